//! L1 trend filtering on second differences.
//!
//! Solves `min_β ‖y − β‖² + λ‖D²β‖₁` where `D²` is the unit-spacing second
//! difference operator on the index grid. The main iteration is ADMM on the
//! split `z = D²β` with a banded direct solve for the β block. Every few
//! iterations the current dual estimate seeds a primal-dual active-set step on
//! the dual box-constrained QP
//!
//! ```text
//!     min_w ½ wᵀ(DDᵀ)w − wᵀDy   s.t. |w_i| ≤ λ/2,      β = y − Dᵀw
//! ```
//!
//! which, once the active set is right, yields the solution to linear-solve
//! precision. A fit is only returned after its KKT certificate passes.
//!
//! Indices are 0-based throughout: row `r` of `D²` touches `β[r..=r+2]` and
//! maps to the candidate index `r + 1`.

use crate::error::{Error, Result};
use crate::linalg::PentaSpd;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_EPS_REL: f64 = 1e-4;
pub const DEFAULT_GRID_SIZE: usize = 50;
pub const DEFAULT_MAX_ITER: usize = 20_000;
/// Ratio between the smallest and largest λ of the search grid.
pub const GRID_SPAN: f64 = 1e-6;

const ADMM_CHUNK: usize = 25;
const MAX_ACTIVE_SET_STEPS: usize = 40;
const MAX_PRIMAL_STEPS: usize = 8;

/// Implicit `(n−2) × n` second-difference matrix with rows `(1, −2, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct D2Operator {
    n: usize,
}

impl D2Operator {
    pub fn new(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidInput(format!(
                "second differences need at least 3 points, got {n}"
            )));
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> usize {
        self.n - 2
    }

    pub fn apply(&self, beta: &[f64]) -> Vec<f64> {
        debug_assert_eq!(beta.len(), self.n);
        beta.windows(3).map(|w| w[0] - 2.0 * w[1] + w[2]).collect()
    }

    pub fn apply_transpose(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.rows());
        let mut out = vec![0.0; self.n];
        for (r, &vr) in v.iter().enumerate() {
            out[r] += vr;
            out[r + 1] -= 2.0 * vr;
            out[r + 2] += vr;
        }
        out
    }

    /// `D Dᵀ`, of size `(n−2) × (n−2)`.
    pub fn gram(&self) -> PentaSpd {
        let m = self.rows();
        PentaSpd::new(
            vec![6.0; m],
            vec![-4.0; m.saturating_sub(1)],
            vec![1.0; m.saturating_sub(2)],
        )
    }

    /// `alpha·I + rho·DᵀD`, of size `n × n`.
    pub fn regularized_normal(&self, alpha: f64, rho: f64) -> PentaSpd {
        let n = self.n;
        let mut diag = vec![alpha; n];
        let mut off1 = vec![0.0; n - 1];
        let mut off2 = vec![0.0; n - 2];
        for r in 0..n - 2 {
            diag[r] += rho;
            diag[r + 1] += 4.0 * rho;
            diag[r + 2] += rho;
            off1[r] -= 2.0 * rho;
            off1[r + 1] -= 2.0 * rho;
            off2[r] += rho;
        }
        PentaSpd::new(diag, off1, off2)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrendFit {
    pub beta: Vec<f64>,
    pub lambda: f64,
    /// `‖y − β‖²`.
    pub rss: f64,
    /// `D²β`, length `n − 2`.
    pub second_diff: Vec<f64>,
    /// Sorted interior indices (0-based) of the kinks of β.
    pub candidate_indices: Vec<usize>,
    pub kkt_residual: f64,
    pub iterations: usize,
    /// Set by [`search_lambda`] when no λ on the grid reached `k_max` candidates.
    pub underfilled: bool,
}

/// Interior indices whose second difference exceeds
/// `eps_rel · max(1, max_j |(D²β)_j|)`.
pub fn candidates(fit: &TrendFit, eps_rel: f64) -> Vec<usize> {
    candidates_from_second_diff(&fit.second_diff, eps_rel)
}

fn candidates_from_second_diff(d2: &[f64], eps_rel: f64) -> Vec<usize> {
    let peak = d2.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let threshold = eps_rel * peak;
    d2.iter()
        .enumerate()
        .filter(|(_, v)| v.abs() > threshold)
        .map(|(r, _)| r + 1)
        .collect()
}

/// Stationarity/complementarity residual of a candidate solution, relative
/// to `max(1, ‖y‖∞)`.
///
/// The dual vector is recovered from `y − β = Dᵀw`; the residual is the worst
/// of the range mismatch, the box violation `|w_i| − λ/2`, and the per-row
/// complementarity `min(|(D²β)_i|, |w_i − (λ/2)·sign((D²β)_i)|)`.
pub fn kkt_residual(y: &[f64], beta: &[f64], lambda: f64) -> Result<f64> {
    let d = D2Operator::new(y.len())?;
    let scale = y.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let r: Vec<f64> = y.iter().zip(beta).map(|(a, b)| a - b).collect();
    if lambda == 0.0 {
        return Ok(r.iter().fold(0.0_f64, |m, v| m.max(v.abs())) / scale);
    }
    let ldl = d.gram().factor()?;
    let w = ldl.solve(&d.apply(&r));
    Ok(dual_residual(&d, &r, &w, &d.apply(beta), lambda) / scale)
}

fn dual_residual(d: &D2Operator, r: &[f64], w: &[f64], mu: &[f64], lambda: f64) -> f64 {
    let h = 0.5 * lambda;
    let range = d
        .apply_transpose(w)
        .iter()
        .zip(r)
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    let mut worst = range;
    for (&wi, &mi) in w.iter().zip(mu) {
        worst = worst.max(wi.abs() - h);
        let bound = if mi > 0.0 {
            h
        } else if mi < 0.0 {
            -h
        } else {
            wi
        };
        worst = worst.max(mi.abs().min((wi - bound).abs()));
    }
    worst
}

/// Reusable per-signal state: factorizations and the affine (λ → ∞) solution.
pub struct TrendFilter<'a> {
    y: &'a [f64],
    d: D2Operator,
    dy: Vec<f64>,
    gram: PentaSpd,
    w_affine: Vec<f64>,
    lambda_max: f64,
    scale: f64,
}

/// Warm-start state carried between solves on the same signal.
#[derive(Clone, Debug)]
pub struct DualState {
    pub w: Vec<f64>,
}

impl<'a> TrendFilter<'a> {
    pub fn new(y: &'a [f64]) -> Result<Self> {
        let d = D2Operator::new(y.len())?;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite observation".into()));
        }
        let dy = d.apply(y);
        let gram = d.gram();
        let gram_ldl = gram.factor()?;
        let w_affine = gram_ldl.solve(&dy);
        let lambda_max = 2.0 * w_affine.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let scale = y.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        Ok(Self {
            y,
            d,
            dy,
            gram,
            w_affine,
            lambda_max,
            scale,
        })
    }

    /// Smallest λ at which the solution is the least-squares affine fit.
    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    fn beta_from_dual(&self, w: &[f64]) -> Vec<f64> {
        let dtw = self.d.apply_transpose(w);
        self.y.iter().zip(dtw).map(|(a, b)| a - b).collect()
    }

    fn finish(&self, beta: Vec<f64>, w: &[f64], lambda: f64, iterations: usize) -> TrendFit {
        let second_diff = self.d.apply(&beta);
        let r: Vec<f64> = self.y.iter().zip(&beta).map(|(a, b)| a - b).collect();
        let rss = r.iter().map(|v| v * v).sum();
        let kkt_residual = if lambda == 0.0 {
            0.0
        } else {
            dual_residual(&self.d, &r, w, &second_diff, lambda) / self.scale
        };
        let candidate_indices = candidates_from_second_diff(&second_diff, DEFAULT_EPS_REL);
        TrendFit {
            beta,
            lambda,
            rss,
            second_diff,
            candidate_indices,
            kkt_residual,
            iterations,
            underfilled: false,
        }
    }

    /// Solves at one λ, optionally warm-started from a previous dual state.
    pub fn solve(
        &self,
        lambda: f64,
        tol: f64,
        max_iter: usize,
        warm: Option<&DualState>,
    ) -> Result<(TrendFit, DualState)> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidInput(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        if !(tol > 0.0) {
            return Err(Error::InvalidInput(format!("tol must be > 0, got {tol}")));
        }
        let m = self.d.rows();
        if lambda == 0.0 {
            let fit = self.finish(self.y.to_vec(), &vec![0.0; m], 0.0, 0);
            return Ok((fit, DualState { w: vec![0.0; m] }));
        }
        if lambda >= self.lambda_max {
            let w = self.w_affine.clone();
            let fit = self.finish(self.beta_from_dual(&w), &w, lambda, 0);
            return Ok((fit, DualState { w }));
        }

        let h = 0.5 * lambda;
        let start: Vec<f64> = warm
            .map(|s| s.w.as_slice())
            .unwrap_or(&self.w_affine)
            .iter()
            .map(|v| v.clamp(-h, h))
            .collect();
        if let Some(fit) = self.active_set(&start, lambda, tol, 0) {
            let w = fit.1;
            return Ok((fit.0, DualState { w }));
        }

        // ADMM on  min ‖y−β‖² + λ‖z‖₁  s.t. Dβ = z, scaled dual u with w = ρu/2.
        let rho = lambda;
        let system = self.d.regularized_normal(2.0, rho).factor()?;
        let mut u: Vec<f64> = start.iter().map(|w| 2.0 * w / rho).collect();
        let mut beta = self.beta_from_dual(&start);
        let mut z = self.d.apply(&beta);
        let mut iterations = 0;
        let mut last_residual = f64::INFINITY;
        while iterations < max_iter {
            let steps = ADMM_CHUNK.min(max_iter - iterations);
            for _ in 0..steps {
                let zu: Vec<f64> = z.iter().zip(&u).map(|(a, b)| a - b).collect();
                let dt = self.d.apply_transpose(&zu);
                let mut rhs: Vec<f64> = self
                    .y
                    .iter()
                    .zip(&dt)
                    .map(|(yi, di)| 2.0 * yi + rho * di)
                    .collect();
                system.solve_in_place(&mut rhs);
                beta = rhs;
                let db = self.d.apply(&beta);
                for i in 0..m {
                    let v = db[i] + u[i];
                    z[i] = soft_threshold(v, lambda / rho);
                    u[i] += db[i] - z[i];
                }
            }
            iterations += steps;
            let w: Vec<f64> = u.iter().map(|v| 0.5 * rho * v).collect();
            if let Some((fit, w)) = self.active_set(&w, lambda, tol, iterations) {
                return Ok((fit, DualState { w }));
            }
            let clamped: Vec<f64> = w.iter().map(|v| v.clamp(-h, h)).collect();
            if let Some((fit, w)) = self.primal_active_set(&clamped, lambda, tol, iterations) {
                return Ok((fit, DualState { w }));
            }
            let candidate = self.finish(beta.clone(), &clamped, lambda, iterations);
            last_residual = candidate.kkt_residual;
            if last_residual <= tol {
                return Ok((candidate, DualState { w: clamped }));
            }
        }
        Err(Error::NonConvergence {
            iterations,
            residual: last_residual,
        })
    }

    /// Primal-dual active-set iterations on the dual box QP, started from `w0`.
    /// Returns a certified fit or `None` if the iteration stalls.
    fn active_set(
        &self,
        w0: &[f64],
        lambda: f64,
        tol: f64,
        iterations: usize,
    ) -> Option<(TrendFit, Vec<f64>)> {
        let m = self.d.rows();
        let h = 0.5 * lambda;
        let mut w = w0.to_vec();
        let mut beta = self.beta_from_dual(&w);
        let mut seen: Vec<Vec<i8>> = Vec::new();
        for _ in 0..MAX_ACTIVE_SET_STEPS {
            let mu = self.d.apply(&beta);
            let signs: Vec<i8> = (0..m)
                .map(|i| {
                    let t = w[i] + mu[i];
                    if t > h {
                        1
                    } else if t < -h {
                        -1
                    } else {
                        0
                    }
                })
                .collect();
            if seen.contains(&signs) {
                return None;
            }
            w = self.solve_reduced(&signs, h)?;
            beta = self.beta_from_dual(&w);
            seen.push(signs);

            let fit = self.finish(beta.clone(), &w, lambda, iterations);
            if fit.kkt_residual <= tol {
                return Some((fit, w));
            }
        }
        None
    }

    /// Primal active-set method on the dual box QP from a feasible `w0`.
    /// Slower than [`Self::active_set`] but the objective decreases at every
    /// step, so it cannot cycle.
    fn primal_active_set(
        &self,
        w0: &[f64],
        lambda: f64,
        tol: f64,
        iterations: usize,
    ) -> Option<(TrendFit, Vec<f64>)> {
        let m = self.d.rows();
        let h = 0.5 * lambda;
        let mut w = w0.to_vec();
        let mut signs: Vec<i8> = w
            .iter()
            .map(|&v| if v >= h { 1 } else if v <= -h { -1 } else { 0 })
            .collect();
        for i in 0..m {
            if signs[i] != 0 {
                w[i] = h * f64::from(signs[i]);
            }
        }
        for _ in 0..MAX_PRIMAL_STEPS * m {
            let target = self.solve_reduced(&signs, h)?;
            let mut alpha = 1.0;
            let mut block = None;
            for i in (0..m).filter(|&i| signs[i] == 0) {
                let d = target[i] - w[i];
                let (bound, s) = if d > 0.0 { (h, 1) } else { (-h, -1) };
                if d != 0.0 && (w[i] + d - bound) * f64::from(s) > 0.0 {
                    let a = (bound - w[i]) / d;
                    if a < alpha {
                        alpha = a;
                        block = Some((i, s));
                    }
                }
            }
            for i in (0..m).filter(|&i| signs[i] == 0) {
                w[i] += alpha * (target[i] - w[i]);
            }
            if let Some((i, s)) = block {
                signs[i] = s;
                w[i] = h * f64::from(s);
                continue;
            }
            let fit = self.finish(self.beta_from_dual(&w), &w, lambda, iterations);
            if fit.kkt_residual <= tol {
                return Some((fit, w));
            }
            let g = self.gram.mul(&w);
            let release = (0..m)
                .filter(|&i| signs[i] != 0)
                .map(|i| (i, (g[i] - self.dy[i]) * f64::from(signs[i])))
                .filter(|&(_, v)| v > 0.0)
                .max_by(|a, b| a.1.total_cmp(&b.1));
            signs[release?.0] = 0;
        }
        None
    }

    /// Fixes `w_i = h·s_i` on the active rows and solves the free rows exactly.
    fn solve_reduced(&self, signs: &[i8], h: f64) -> Option<Vec<f64>> {
        let m = signs.len();
        let mut w: Vec<f64> = signs.iter().map(|&s| h * f64::from(s)).collect();
        let free: Vec<usize> = (0..m).filter(|&i| signs[i] == 0).collect();
        if free.is_empty() {
            return Some(w);
        }
        let qa = self.gram.mul(&w);
        let rhs: Vec<f64> = free.iter().map(|&i| self.dy[i] - qa[i]).collect();
        let k = free.len();
        let gram_entry = |gap: usize| match gap {
            1 => -4.0,
            2 => 1.0,
            _ => 0.0,
        };
        let off1 = (0..k.saturating_sub(1))
            .map(|a| gram_entry(free[a + 1] - free[a]))
            .collect();
        let off2 = (0..k.saturating_sub(2))
            .map(|a| gram_entry(free[a + 2] - free[a]))
            .collect();
        let reduced = PentaSpd::new(vec![6.0; k], off1, off2);
        let sol = reduced.factor().ok()?.solve(&rhs);
        for (&i, v) in free.iter().zip(sol) {
            w[i] = v;
        }
        Some(w)
    }
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Solves the trend-filtering problem at a single λ.
pub fn solve_tf(y: &[f64], lambda: f64, tol: f64, max_iter: usize) -> Result<TrendFit> {
    Ok(TrendFilter::new(y)?.solve(lambda, tol, max_iter, None)?.0)
}

/// Geometric grid from `lambda_max` down to `lambda_max · GRID_SPAN`.
pub fn lambda_grid(lambda_max: f64, grid_size: usize) -> Vec<f64> {
    if grid_size <= 1 {
        return vec![lambda_max];
    }
    let ratio = GRID_SPAN.powf(1.0 / (grid_size - 1) as f64);
    (0..grid_size)
        .map(|j| lambda_max * ratio.powi(j as i32))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchOptions {
    pub grid_size: usize,
    pub eps_rel: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            grid_size: DEFAULT_GRID_SIZE,
            eps_rel: DEFAULT_EPS_REL,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

/// Summary of one grid point, kept for diagnostics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathPoint {
    pub lambda: f64,
    pub count: usize,
    pub rss: f64,
}

/// Fits along the λ grid and returns the fit with `k_max` candidates and the
/// smallest residual sum of squares.
///
/// If no grid point has exactly `k_max` candidates, the smallest count above
/// `k_max` is used and its candidates are truncated to the `k_max` largest
/// `|D²β|`. If every count is below `k_max`, the fit with the most candidates
/// is returned with `underfilled` set.
pub fn search_lambda(y: &[f64], k_max: usize, opts: &SearchOptions) -> Result<TrendFit> {
    Ok(search_lambda_path(y, k_max, opts)?.0)
}

pub fn search_lambda_path(
    y: &[f64],
    k_max: usize,
    opts: &SearchOptions,
) -> Result<(TrendFit, Vec<PathPoint>)> {
    let n = y.len();
    if k_max < 1 || k_max + 2 > n {
        return Err(Error::InvalidInput(format!(
            "k_max must lie in 1..={}, got {k_max}",
            n.saturating_sub(2)
        )));
    }
    if opts.grid_size == 0 || !(opts.eps_rel > 0.0) {
        return Err(Error::InvalidInput(
            "grid_size must be >= 1 and eps_rel > 0".into(),
        ));
    }
    let tf = TrendFilter::new(y)?;
    let lmax = tf.lambda_max();
    if lmax == 0.0 {
        let (mut fit, _) = tf.solve(0.0, opts.tol, opts.max_iter, None)?;
        fit.candidate_indices.clear();
        fit.underfilled = true;
        let point = PathPoint {
            lambda: 0.0,
            count: 0,
            rss: fit.rss,
        };
        return Ok((fit, vec![point]));
    }

    let mut fits = Vec::with_capacity(opts.grid_size);
    let mut warm: Option<DualState> = None;
    for lambda in lambda_grid(lmax, opts.grid_size) {
        let (mut fit, state) = tf.solve(lambda, opts.tol, opts.max_iter, warm.as_ref())?;
        fit.candidate_indices = candidates_from_second_diff(&fit.second_diff, opts.eps_rel);
        fits.push(fit);
        warm = Some(state);
    }
    let path = fits
        .iter()
        .map(|f| PathPoint {
            lambda: f.lambda,
            count: f.candidate_indices.len(),
            rss: f.rss,
        })
        .collect();

    // Minimal rss, ties to the smaller λ (later grid point).
    let best_of = |pred: &dyn Fn(usize) -> bool| -> Option<usize> {
        let mut best: Option<usize> = None;
        for (j, f) in fits.iter().enumerate() {
            if !pred(f.candidate_indices.len()) {
                continue;
            }
            match best {
                Some(b) if fits[b].rss < f.rss => {}
                _ => best = Some(j),
            }
        }
        best
    };

    if let Some(j) = best_of(&|c| c == k_max) {
        return Ok((fits.swap_remove(j), path));
    }
    let above = fits
        .iter()
        .map(|f| f.candidate_indices.len())
        .filter(|&c| c > k_max)
        .min();
    if let Some(count) = above {
        let j = best_of(&|c| c == count).expect("count attained");
        let mut fit = fits.swap_remove(j);
        let mut ranked = fit.candidate_indices.clone();
        ranked.sort_by(|&a, &b| {
            fit.second_diff[b - 1]
                .abs()
                .total_cmp(&fit.second_diff[a - 1].abs())
                .then(a.cmp(&b))
        });
        ranked.truncate(k_max);
        ranked.sort_unstable();
        fit.candidate_indices = ranked;
        return Ok((fit, path));
    }
    let most = fits
        .iter()
        .map(|f| f.candidate_indices.len())
        .max()
        .unwrap_or(0);
    let j = best_of(&|c| c == most).expect("count attained");
    let mut fit = fits.swap_remove(j);
    fit.underfilled = true;
    Ok((fit, path))
}
