//! Partition agreement and change-point recovery accounting.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};

/// Co-occurrence counts of two labelings of the same items.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContingencyTable {
    /// Distinct labels of the first partition, ascending.
    pub row_labels: Vec<usize>,
    pub col_labels: Vec<usize>,
    pub counts: Vec<Vec<u64>>,
}

impl ContingencyTable {
    pub fn new(p: &[usize], q: &[usize]) -> Result<Self> {
        if p.len() != q.len() {
            return Err(Error::InvalidInput(format!(
                "partitions have different lengths ({} vs {})",
                p.len(),
                q.len()
            )));
        }
        let index = |labels: &[usize]| -> BTreeMap<usize, usize> {
            let mut m: BTreeMap<usize, usize> = labels.iter().map(|&l| (l, 0)).collect();
            for (i, v) in m.values_mut().enumerate() {
                *v = i;
            }
            m
        };
        let (ri, ci) = (index(p), index(q));
        let mut counts = vec![vec![0u64; ci.len()]; ri.len()];
        for (a, b) in p.iter().zip(q) {
            counts[ri[a]][ci[b]] += 1;
        }
        Ok(Self {
            row_labels: ri.into_keys().collect(),
            col_labels: ci.into_keys().collect(),
            counts,
        })
    }

    pub fn n(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        let mut out = vec![0; self.col_labels.len()];
        for r in &self.counts {
            for (o, v) in out.iter_mut().zip(r) {
                *o += v;
            }
        }
        out
    }
}

fn pairs(m: u64) -> i128 {
    let m = m as i128;
    m * (m - 1) / 2
}

/// Adjusted Rand index. Combinatorial sums are exact; only the final ratio
/// is floating point. Two partitions that are both a single cluster (or both
/// all singletons) score 1.
pub fn ari(p: &[usize], q: &[usize]) -> Result<f64> {
    if p.len() < 2 {
        return Err(Error::InvalidInput("need at least 2 items".into()));
    }
    let table = ContingencyTable::new(p, q)?;
    let total = pairs(table.n());
    let sum_ij: i128 = table.counts.iter().flatten().map(|&v| pairs(v)).sum();
    let sum_a: i128 = table.row_sums().into_iter().map(pairs).sum();
    let sum_b: i128 = table.col_sums().into_iter().map(pairs).sum();
    let num = 2 * total * sum_ij - 2 * sum_a * sum_b;
    let den = total * (sum_a + sum_b) - 2 * sum_a * sum_b;
    if den == 0 {
        return Ok(1.0);
    }
    Ok(num as f64 / den as f64)
}

/// Fraction of replicates that estimate a change-point at each grid position.
pub fn changepoint_frequencies(estimated: &[Vec<f64>], grid: &[f64]) -> Result<Vec<f64>> {
    let mut counts = vec![0u64; grid.len()];
    for (r, knots) in estimated.iter().enumerate() {
        for &t in knots {
            let j = grid_index(grid, t).ok_or_else(|| {
                Error::InvalidInput(format!("replicate {}: knot {t} is not a grid position", r + 1))
            })?;
            counts[j] += 1;
        }
    }
    let reps = estimated.len().max(1) as f64;
    Ok(counts.into_iter().map(|c| c as f64 / reps).collect())
}

fn grid_index(grid: &[f64], t: f64) -> Option<usize> {
    let scale = grid.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    grid.iter().position(|&g| (g - t).abs() <= 1e-9 * scale)
}

/// Recovery of known change-points across replicates.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Recovery {
    pub replicates: usize,
    /// Per true knot (by rank), the fraction of replicates with an estimate
    /// within `radius`.
    pub hit_rate: Vec<f64>,
    /// Fraction of replicates with at least one estimate far from every true knot.
    pub spurious_rate: f64,
    /// Spurious frequency per estimated position, ascending by position.
    pub spurious_by_position: Vec<(f64, f64)>,
}

impl Recovery {
    pub fn max_spurious_frequency(&self) -> f64 {
        self.spurious_by_position.iter().fold(0.0, |m, p| m.max(p.1))
    }
}

/// `truths[r]` and `estimated[r]` belong to replicate `r`. Every truth must
/// have the same number of knots.
pub fn recovery(estimated: &[Vec<f64>], truths: &[Vec<f64>], radius: f64) -> Result<Recovery> {
    if estimated.len() != truths.len() {
        return Err(Error::InvalidInput(format!(
            "{} estimates for {} truths",
            estimated.len(),
            truths.len()
        )));
    }
    let k = truths.first().map_or(0, Vec::len);
    if truths.iter().any(|t| t.len() != k) {
        return Err(Error::InvalidInput("truths differ in knot count".into()));
    }
    let mut hits = vec![0u64; k];
    let mut spurious_reps = 0u64;
    let mut by_pos: BTreeMap<i64, (f64, u64)> = BTreeMap::new();
    for (est, truth) in estimated.iter().zip(truths) {
        for (h, t) in hits.iter_mut().zip(truth) {
            if est.iter().any(|e| (e - t).abs() <= radius) {
                *h += 1;
            }
        }
        let mut any = false;
        for &e in est {
            if truth.iter().all(|t| (e - t).abs() > radius) {
                any = true;
                let key = (e * 1e6).round() as i64;
                by_pos.entry(key).or_insert((e, 0)).1 += 1;
            }
        }
        spurious_reps += any as u64;
    }
    let reps = estimated.len().max(1) as f64;
    Ok(Recovery {
        replicates: estimated.len(),
        hit_rate: hits.into_iter().map(|h| h as f64 / reps).collect(),
        spurious_rate: spurious_reps as f64 / reps,
        spurious_by_position: by_pos.into_values().map(|(p, c)| (p, c as f64 / reps)).collect(),
    })
}
