//! Selection of slope change-points among trend-filter candidates.
//!
//! For every size `k` the best continuous piecewise-linear fit using `k` of
//! the candidate knots is found by exhaustive enumeration (the continuity
//! constraint couples neighbouring segments, so segment-additive dynamic
//! programming does not apply). The number of change-points is then chosen
//! from the normalized second differences of the best-contrast curve.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{Curve, Dataset};
use crate::linalg::GivensLs;
use crate::par::{self, Exec};
use crate::spline::{fit_nodes, project, CurveSummary, SplineBasis};
use crate::trend_filter::{search_lambda, SearchOptions};

/// Largest candidate set accepted by [`best_subsets`].
pub const MAX_CANDIDATES: usize = 16;
pub const DEFAULT_K_MAX: usize = 10;
pub const DEFAULT_S_THRESHOLD: f64 = 0.75;

const MASKS_PER_TASK: usize = 128;

/// Contrast fed to [`select_k`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Contrast {
    /// `ln(rss_k)`: the Gaussian log-likelihood with unknown variance.
    #[default]
    LogRss,
    /// Raw residual sum of squares.
    Rss,
}

impl std::str::FromStr for Contrast {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "log-rss" => Ok(Contrast::LogRss),
            "rss" => Ok(Contrast::Rss),
            _ => Err(Error::InvalidInput(format!("unknown contrast `{s}` (expected log-rss or rss)"))),
        }
    }
}

impl Contrast {
    /// Maps best costs to a nonincreasing contrast sequence. Costs are floored
    /// at the round-off level of `y` so exact fits do not produce `ln 0`.
    pub fn transform(self, cost_by_k: &[f64], y: &[f64]) -> Vec<f64> {
        match self {
            Contrast::Rss => cost_by_k.to_vec(),
            Contrast::LogRss => {
                let peak = y.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                let floor = (y.len() as f64 * (1e-10 * peak).powi(2)).max(f64::MIN_POSITIVE);
                let mut out: Vec<f64> = cost_by_k.iter().map(|c| c.max(floor).ln()).collect();
                for k in 1..out.len() {
                    out[k] = out[k].min(out[k - 1]);
                }
                out
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SegmentOptions {
    pub k_max: usize,
    pub s_threshold: f64,
    pub contrast: Contrast,
    pub search: SearchOptions,
}

impl Default for SegmentOptions {
    fn default() -> Self {
        Self {
            k_max: DEFAULT_K_MAX,
            s_threshold: DEFAULT_S_THRESHOLD,
            contrast: Contrast::default(),
            search: SearchOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Segmentation {
    pub curve_id: String,
    /// Selected change-point positions, strictly inside `(x₁, xₙ)`.
    pub knots: Vec<f64>,
    pub k_hat: usize,
    /// Node values of the fit at `(x₁, knots…, xₙ)`, length `k_hat + 2`.
    pub theta: Vec<f64>,
    pub rss: f64,
    /// Best rss with exactly `k` knots, `k = 0..=K` (`K` = candidate count).
    pub cost_by_k: Vec<f64>,
    pub candidates: Vec<f64>,
    pub lambda: f64,
    pub underfilled: bool,
}

impl Segmentation {
    pub fn summary(&self) -> CurveSummary {
        CurveSummary {
            id: self.curve_id.clone(),
            knots: self.knots.clone(),
            theta: self.theta.clone(),
        }
    }
}

fn check_knots(curve: &Curve, knots: &[f64]) -> Result<()> {
    let (lo, hi) = (curve.x_first(), curve.x_last());
    if knots.iter().any(|&t| !(t > lo && t < hi)) {
        return Err(Error::InvalidInput(format!(
            "knots must lie strictly inside ({lo}, {hi})"
        )));
    }
    if knots.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("knots must be strictly increasing".into()));
    }
    Ok(())
}

/// Best continuous piecewise-linear fit with the given interior knots.
/// Returns `(rss, theta)` with `theta` the node values at `(x₁, knots…, xₙ)`.
pub fn continuous_pl_rss(curve: &Curve, knots: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_knots(curve, knots)?;
    let basis = SplineBasis::new(curve.x_first(), curve.x_last(), knots)?;
    let theta = project(curve, &basis)?;
    let rss = curve
        .x
        .iter()
        .zip(&curve.y)
        .map(|(&u, &v)| (v - basis.evaluate(&theta, u)).powi(2))
        .sum();
    Ok((rss, theta))
}

/// Optimal knot subsets of each size.
#[derive(Clone, Debug, PartialEq)]
pub struct SubsetSearch {
    /// Sorted, deduplicated candidate positions actually searched.
    pub candidates: Vec<f64>,
    /// `cost_by_k[k]`: minimal rss using exactly `k` candidates (`+∞` if no
    /// size-`k` subset gives a well-posed fit).
    pub cost_by_k: Vec<f64>,
    pub best: Vec<Option<Vec<f64>>>,
}

/// Exhaustive search over all subsets of at most [`MAX_CANDIDATES`] candidates.
pub fn best_subsets(curve: &Curve, candidates: &[f64], exec: Exec) -> Result<SubsetSearch> {
    let mut cands = candidates.to_vec();
    cands.sort_by(f64::total_cmp);
    cands.dedup();
    if cands.len() > MAX_CANDIDATES {
        return Err(Error::InvalidInput(format!(
            "{} candidates exceed the exhaustive-search limit of {MAX_CANDIDATES}",
            cands.len()
        )));
    }
    check_knots(curve, &cands)?;
    let m = cands.len();
    let total = 1usize << m;
    let tasks = total.div_ceil(MASKS_PER_TASK);

    // Per task: best (rss, mask) for each subset size.
    let partial = par::map_range(exec, 0..tasks, |t| {
        let mut ls = GivensLs::new(m + 2);
        let mut nodes = Vec::with_capacity(m + 2);
        let mut best: Vec<Option<(f64, usize)>> = vec![None; m + 1];
        let end = ((t + 1) * MASKS_PER_TASK).min(total);
        for mask in t * MASKS_PER_TASK..end {
            nodes.clear();
            nodes.push(curve.x_first());
            nodes.extend((0..m).filter(|&i| mask >> i & 1 == 1).map(|i| cands[i]));
            nodes.push(curve.x_last());
            let rss = fit_nodes(&curve.x, &curve.y, &nodes, &mut ls);
            if !ls.full_rank() {
                continue;
            }
            let k = mask.count_ones() as usize;
            if best[k].is_none_or(|(b, _)| rss < b) {
                best[k] = Some((rss, mask));
            }
        }
        best
    });

    let mut merged: Vec<Option<(f64, usize)>> = vec![None; m + 1];
    for chunk in partial {
        for (k, entry) in chunk.into_iter().enumerate() {
            if let Some((rss, mask)) = entry {
                if merged[k].is_none_or(|(b, _)| rss < b) {
                    merged[k] = Some((rss, mask));
                }
            }
        }
    }
    let cost_by_k = merged
        .iter()
        .map(|e| e.map_or(f64::INFINITY, |(r, _)| r))
        .collect();
    let best = merged
        .iter()
        .map(|e| {
            e.map(|(_, mask)| (0..m).filter(|&i| mask >> i & 1 == 1).map(|i| cands[i]).collect())
        })
        .collect();
    Ok(SubsetSearch {
        candidates: cands,
        cost_by_k,
        best,
    })
}

/// Number of change-points from a nonincreasing contrast sequence
/// `contrast[0..=K]`.
///
/// The contrast is mapped affinely to `J` with `J₀ = K`, `J_K = 0`; with
/// `D_k = J_{k−1} − 2J_k + J_{k+1}` (and `D_K = J_{K−1} − J_K`) the result is
/// the largest `k` with `D_k > s_threshold`, or 0 if there is none.
pub fn select_k(contrast: &[f64], s_threshold: f64) -> usize {
    // Drop trailing sizes with no feasible fit.
    let usable = contrast.iter().take_while(|c| c.is_finite()).count();
    if usable < 2 {
        return 0;
    }
    let c = &contrast[..usable];
    let k_max = usable - 1;
    let range = c[0] - c[k_max];
    if !(range > 0.0) {
        return 0;
    }
    let j: Vec<f64> = c
        .iter()
        .map(|v| (v - c[k_max]) / range * k_max as f64)
        .collect();
    (1..=k_max)
        .rev()
        .find(|&k| {
            let d = if k < k_max {
                j[k - 1] - 2.0 * j[k] + j[k + 1]
            } else {
                j[k - 1] - j[k]
            };
            d > s_threshold
        })
        .unwrap_or(0)
}

/// Trend-filter candidates → best subsets → `select_k` → refit.
pub fn segment(curve: &Curve, opts: &SegmentOptions, exec: Exec) -> Result<Segmentation> {
    if opts.k_max < 1 {
        return Err(Error::InvalidInput("k_max must be >= 1".into()));
    }
    if opts.k_max > MAX_CANDIDATES {
        return Err(Error::InvalidInput(format!(
            "k_max must be <= {MAX_CANDIDATES}, got {}",
            opts.k_max
        )));
    }
    let k_max = opts.k_max.min(curve.len() - 2);
    let fit = search_lambda(&curve.y, k_max, &opts.search)?;
    let candidates: Vec<f64> = fit.candidate_indices.iter().map(|&i| curve.x[i]).collect();
    let search = best_subsets(curve, &candidates, exec)?;
    let contrast = opts.contrast.transform(&search.cost_by_k, &curve.y);
    let k_hat = select_k(&contrast, opts.s_threshold);
    let knots = search.best[k_hat]
        .clone()
        .ok_or_else(|| Error::Invariant(format!("no feasible subset of size {k_hat}")))?;
    let (rss, theta) = continuous_pl_rss(curve, &knots)?;
    Ok(Segmentation {
        curve_id: curve.id.clone(),
        k_hat,
        knots,
        theta,
        rss,
        cost_by_k: search.cost_by_k,
        candidates: search.candidates,
        lambda: fit.lambda,
        underfilled: fit.underfilled,
    })
}

/// Segments every curve; output order follows the dataset.
pub fn segment_all(dataset: &Dataset, opts: &SegmentOptions, exec: Exec) -> Result<Vec<Segmentation>> {
    par::try_map(exec, &dataset.curves, |c| segment(c, opts, exec))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Vec<f64> {
        (0..51).map(|i| 10.0 * i as f64).collect()
    }

    fn piecewise(x: &[f64], nodes: &[(f64, f64)]) -> Vec<f64> {
        x.iter()
            .map(|&u| {
                let j = nodes.iter().rposition(|n| n.0 <= u).unwrap().min(nodes.len() - 2);
                let (a, b) = (nodes[j], nodes[j + 1]);
                a.1 + (b.1 - a.1) * (u - a.0) / (b.0 - a.0)
            })
            .collect()
    }

    fn cluster3() -> Curve {
        let nodes = [(0.0, 0.0), (100.0, 300.0), (200.0, 1500.0), (300.0, 1700.0), (400.0, 2000.0), (500.0, 2200.0)];
        let x = grid();
        let y = piecewise(&x, &nodes);
        Curve::new("c3", x, y).unwrap()
    }

    #[test]
    fn no_knots_is_simple_regression() {
        let x = grid();
        let y: Vec<f64> = x.iter().map(|u| (u / 37.0).sin() * 10.0 + u * 0.3).collect();
        let curve = Curve::new("s", x.clone(), y.clone()).unwrap();
        let (rss, theta) = continuous_pl_rss(&curve, &[]).unwrap();
        let n = x.len() as f64;
        let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let slope = sxy / sxx;
        let expected: f64 = x.iter().zip(&y).map(|(a, b)| (b - my - slope * (a - mx)).powi(2)).sum();
        assert!((rss - expected).abs() <= 1e-9 * expected);
        assert_eq!(theta.len(), 2);
    }

    #[test]
    fn exact_model_has_zero_residual_and_node_values() {
        let c = cluster3();
        let (rss, theta) = continuous_pl_rss(&c, &[100.0, 200.0, 300.0, 400.0]).unwrap();
        let norm: f64 = c.y.iter().map(|v| v * v).sum();
        assert!(rss <= 1e-18 * norm, "rss={rss}");
        let expected = [0.0, 300.0, 1500.0, 1700.0, 2000.0, 2200.0];
        for (a, b) in theta.iter().zip(expected) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn true_knots_win_at_full_size() {
        let c = cluster3();
        let s = best_subsets(&c, &[100.0, 200.0, 300.0, 400.0], Exec::Sequential).unwrap();
        assert_eq!(s.best[4].as_deref(), Some(&[100.0, 200.0, 300.0, 400.0][..]));
        assert!(s.cost_by_k[4] < 1e-12);
        let (affine, _) = continuous_pl_rss(&c, &[]).unwrap();
        assert!((s.cost_by_k[0] - affine).abs() <= 1e-9 * affine);
    }

    #[test]
    fn candidate_order_does_not_matter() {
        let c = cluster3();
        let a = best_subsets(&c, &[300.0, 100.0, 250.0, 400.0, 200.0], Exec::Parallel).unwrap();
        let b = best_subsets(&c, &[100.0, 200.0, 250.0, 300.0, 400.0], Exec::Sequential).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn too_many_candidates_rejected() {
        let c = cluster3();
        let cands: Vec<f64> = (1..=17).map(|i| 10.0 * i as f64).collect();
        assert!(best_subsets(&c, &cands, Exec::Sequential).is_err());
    }

    #[test]
    fn select_k_single_drop() {
        let costs = [100.0, 1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1];
        assert_eq!(select_k(&costs, 0.75), 1);
    }

    #[test]
    fn select_k_flat_is_zero() {
        assert_eq!(select_k(&[5.0; 11], 0.75), 0);
        assert_eq!(select_k(&[5.0], 0.75), 0);
    }

    #[test]
    fn select_k_ignores_infeasible_tail() {
        let costs = [100.0, 10.0, 1.0, f64::INFINITY];
        assert_eq!(select_k(&costs, 0.75), select_k(&costs[..3], 0.75));
    }

    #[test]
    fn noiseless_cluster3_recovers_knots_exactly() {
        let seg = segment(&cluster3(), &SegmentOptions::default(), Exec::Sequential).unwrap();
        assert_eq!(seg.knots, vec![100.0, 200.0, 300.0, 400.0]);
        assert_eq!(seg.k_hat, 4);
    }

    #[test]
    fn affine_curve_has_no_knots() {
        let x = grid();
        let y: Vec<f64> = x.iter().map(|u| 3.0 * u + 1.0).collect();
        let seg = segment(&Curve::new("a", x, y).unwrap(), &SegmentOptions::default(), Exec::Sequential).unwrap();
        assert_eq!(seg.k_hat, 0);
        assert!(seg.knots.is_empty());
        assert_eq!(seg.theta.len(), 2);
    }

    #[test]
    fn constant_shift_moves_theta_only() {
        let c = cluster3();
        let mut y = c.y.clone();
        for (i, v) in y.iter_mut().enumerate() {
            *v += ((i * 7919) % 13) as f64 * 0.7;
        }
        let base = Curve::new("b", c.x.clone(), y.clone()).unwrap();
        let shifted = Curve::new("b", c.x.clone(), y.iter().map(|v| v + 250.0).collect()).unwrap();
        let opts = SegmentOptions::default();
        let a = segment(&base, &opts, Exec::Sequential).unwrap();
        let b = segment(&shifted, &opts, Exec::Sequential).unwrap();
        assert_eq!(a.knots, b.knots);
        assert!((a.rss - b.rss).abs() <= 1e-9 * a.rss.max(1.0));
        for (u, v) in a.theta.iter().zip(&b.theta) {
            assert!((u + 250.0 - v).abs() < 1e-8);
        }
    }
}
