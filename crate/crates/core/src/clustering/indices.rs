//! Cluster-count validity indices with the NbClust conventions.
//!
//! Every index is evaluated over a ladder of partitions with consecutive
//! `k`. KL and Hartigan need the neighbors `k − 1` and `k + 1`; the ladder
//! therefore starts one below `k_min` and ends one above `k_max`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::kmeans::{sq_dist, Partition};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ValidityIndex {
    KL,
    Hartigan,
    SD,
    Ptbiserial,
}

impl ValidityIndex {
    pub const ALL: [ValidityIndex; 4] = [
        ValidityIndex::KL,
        ValidityIndex::Hartigan,
        ValidityIndex::SD,
        ValidityIndex::Ptbiserial,
    ];
}

impl fmt::Display for ValidityIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for ValidityIndex {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ValidityIndex::ALL
            .into_iter()
            .find(|v| v.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidInput(format!("unknown index `{s}`")))
    }
}

/// Index values for `k = k_min..=k_max`; `None` marks a `k` outside the
/// index's domain (a zero denominator).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexCurve {
    pub index: ValidityIndex,
    pub values: Vec<(usize, Option<f64>)>,
    pub choice: Option<usize>,
}

/// Partitions `ladder[j]` with `k = k_min − 1 + j`, up to `k_max + 1`.
pub struct Ladder<'a> {
    pub points: &'a [Vec<f64>],
    pub k_min: usize,
    pub k_max: usize,
    pub partitions: &'a [Partition],
}

impl Ladder<'_> {
    fn part(&self, k: usize) -> &Partition {
        &self.partitions[k + 1 - self.k_min]
    }

    fn wss(&self, k: usize) -> f64 {
        self.part(k).wss
    }

    fn check(&self) -> Result<()> {
        if self.k_min < 2 || self.k_max < self.k_min {
            return Err(Error::InvalidInput(format!(
                "cluster range {}..={} must satisfy 2 <= k_min <= k_max",
                self.k_min, self.k_max
            )));
        }
        let expected = self.k_max - self.k_min + 3;
        if self.partitions.len() != expected {
            return Err(Error::Invariant(format!(
                "ladder has {} partitions, expected {expected}",
                self.partitions.len()
            )));
        }
        for (j, p) in self.partitions.iter().enumerate() {
            if p.k != self.k_min - 1 + j || p.labels.len() != self.points.len() {
                return Err(Error::Invariant(format!("ladder entry {j} is inconsistent")));
            }
        }
        Ok(())
    }
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// First `k` attaining the maximum (or minimum) over defined values.
fn pick(values: &[(usize, Option<f64>)], maximize: bool) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &(k, v) in values {
        let Some(v) = v else { continue };
        let better = match best {
            None => true,
            Some((_, b)) => {
                if maximize {
                    v > b
                } else {
                    v < b
                }
            }
        };
        if better {
            best = Some((k, v));
        }
    }
    best.map(|b| b.0)
}

/// `|DIFF(k) / DIFF(k+1)|` with `DIFF(k) = (k−1)^{2/p} W_{k−1} − k^{2/p} W_k`; maximized.
pub fn kl(ladder: &Ladder) -> Result<IndexCurve> {
    ladder.check()?;
    let p = ladder.points[0].len() as f64;
    let diff = |k: usize| {
        ((k - 1) as f64).powf(2.0 / p) * ladder.wss(k - 1) - (k as f64).powf(2.0 / p) * ladder.wss(k)
    };
    let values: Vec<_> = (ladder.k_min..=ladder.k_max)
        .map(|k| {
            let den = diff(k + 1);
            (k, if den == 0.0 { None } else { finite((diff(k) / den).abs()) })
        })
        .collect();
    Ok(IndexCurve {
        index: ValidityIndex::KL,
        choice: pick(&values, true),
        values,
    })
}

/// `H(k) = (W_k / W_{k+1} − 1)(n − k − 1)`; the chosen `k` has the largest
/// drop `H(k−1) − H(k)`.
pub fn hartigan(ladder: &Ladder) -> Result<IndexCurve> {
    ladder.check()?;
    let n = ladder.points.len() as f64;
    let h = |k: usize| {
        let next = ladder.wss(k + 1);
        if next == 0.0 {
            None
        } else {
            finite((ladder.wss(k) / next - 1.0) * (n - k as f64 - 1.0))
        }
    };
    let values: Vec<_> = (ladder.k_min..=ladder.k_max)
        .map(|k| (k, h(k)))
        .collect();
    let drops: Vec<_> = (ladder.k_min..=ladder.k_max)
        .map(|k| (k, h(k - 1).zip(h(k)).map(|(a, b)| a - b)))
        .collect();
    Ok(IndexCurve {
        index: ValidityIndex::Hartigan,
        choice: pick(&drops, true),
        values,
    })
}

fn population_variance(rows: &[&Vec<f64>]) -> Vec<f64> {
    let p = rows[0].len();
    let m = rows.len() as f64;
    (0..p)
        .map(|j| {
            let mean = rows.iter().map(|r| r[j]).sum::<f64>() / m;
            rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / m
        })
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn scat(points: &[Vec<f64>], part: &Partition, total: f64) -> f64 {
    let mut acc = 0.0;
    for c in 1..=part.k {
        let members: Vec<&Vec<f64>> = points
            .iter()
            .zip(&part.labels)
            .filter(|(_, &l)| l == c)
            .map(|(x, _)| x)
            .collect();
        acc += norm(&population_variance(&members));
    }
    acc / part.k as f64 / total
}

fn dis(part: &Partition) -> f64 {
    let c = &part.centroids;
    let mut dmax = 0.0_f64;
    let mut dmin = f64::INFINITY;
    let mut acc = 0.0;
    for i in 0..c.len() {
        let mut row = 0.0;
        for j in 0..c.len() {
            if i == j {
                continue;
            }
            let d = sq_dist(&c[i], &c[j]).sqrt();
            dmax = dmax.max(d);
            dmin = dmin.min(d);
            row += d;
        }
        acc += 1.0 / row;
    }
    dmax / dmin * acc
}

/// `Dis(k_max) · Scat(k) + Dis(k)`; minimized.
pub fn sd(ladder: &Ladder) -> Result<IndexCurve> {
    ladder.check()?;
    let all: Vec<&Vec<f64>> = ladder.points.iter().collect();
    let total = norm(&population_variance(&all));
    if total == 0.0 {
        return Err(Error::InvalidInput("all points coincide".into()));
    }
    let alpha = dis(ladder.part(ladder.k_max));
    let values: Vec<_> = (ladder.k_min..=ladder.k_max)
        .map(|k| {
            let part = ladder.part(k);
            (k, finite(alpha * scat(ladder.points, part, total) + dis(part)))
        })
        .collect();
    Ok(IndexCurve {
        index: ValidityIndex::SD,
        choice: pick(&values, false),
        values,
    })
}

/// Upper-triangle Euclidean distances, row-major over `i < j`.
pub fn pair_distances(points: &[Vec<f64>]) -> Vec<f64> {
    let n = points.len();
    let mut out = Vec::with_capacity(n * (n.saturating_sub(1)) / 2);
    for i in 0..n {
        for j in i + 1..n {
            out.push(sq_dist(&points[i], &points[j]).sqrt());
        }
    }
    out
}

/// Point-biserial correlation between pair distances and the
/// different-cluster indicator.
pub fn ptbiserial_value(distances: &[f64], labels: &[usize]) -> Option<f64> {
    let n = labels.len();
    let (mut sw, mut sb, mut nw, mut nb) = (0.0, 0.0, 0u64, 0u64);
    let mut idx = 0;
    for i in 0..n {
        for j in i + 1..n {
            let d = distances[idx];
            idx += 1;
            if labels[i] == labels[j] {
                sw += d;
                nw += 1;
            } else {
                sb += d;
                nb += 1;
            }
        }
    }
    if nw == 0 || nb == 0 {
        return None;
    }
    let nt = (nw + nb) as f64;
    let mean = distances.iter().sum::<f64>() / nt;
    let sdev = (distances.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / nt).sqrt();
    if sdev == 0.0 {
        return None;
    }
    let (nw, nb) = (nw as f64, nb as f64);
    finite((sb / nb - sw / nw) * (nw * nb / (nt * nt)).sqrt() / sdev)
}

/// Maximized.
pub fn ptbiserial(ladder: &Ladder, distances: &[f64]) -> Result<IndexCurve> {
    ladder.check()?;
    let values: Vec<_> = (ladder.k_min..=ladder.k_max)
        .map(|k| (k, ptbiserial_value(distances, &ladder.part(k).labels)))
        .collect();
    Ok(IndexCurve {
        index: ValidityIndex::Ptbiserial,
        choice: pick(&values, true),
        values,
    })
}

pub fn evaluate_all(ladder: &Ladder) -> Result<Vec<IndexCurve>> {
    let distances = pair_distances(ladder.points);
    Ok(vec![kl(ladder)?, hartigan(ladder)?, sd(ladder)?, ptbiserial(ladder, &distances)?])
}
