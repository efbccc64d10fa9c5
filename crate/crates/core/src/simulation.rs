//! Synthetic curve models with four clusters of continuous piecewise-linear
//! mean functions on `x = 0, 10, …, 500`.
//!
//! Each curve draws, in this order and from its own ChaCha20 stream
//! (`seed`, stream = curve index): the cluster label, the common knot shift
//! `U`, the common level shift `V`, then `n` standard normals. The noise
//! level only scales the last block, so runs at different σ with the same
//! seed share everything else.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{Cell, Curve, Dataset, Table};
use crate::par::{self, Exec};

pub const N_POINTS: usize = 51;
pub const X_STEP: f64 = 10.0;
pub const DOMAIN_END: f64 = 500.0;

/// Knot shift support as printed in the model description (10 appears twice).
pub const VERBATIM_JITTER: [f64; 7] = [-30.0, -20.0, 10.0, 0.0, 10.0, 20.0, 30.0];
pub const SYMMETRIC_JITTER: [f64; 7] = [-30.0, -20.0, -10.0, 0.0, 10.0, 20.0, 30.0];
pub const LEVEL_SHIFT: f64 = 200.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JitterSet {
    #[default]
    Verbatim,
    Symmetric,
}

impl JitterSet {
    pub fn values(self) -> &'static [f64; 7] {
        match self {
            JitterSet::Verbatim => &VERBATIM_JITTER,
            JitterSet::Symmetric => &SYMMETRIC_JITTER,
        }
    }
}

impl FromStr for JitterSet {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "verbatim" => Ok(JitterSet::Verbatim),
            "symmetric" => Ok(JitterSet::Symmetric),
            other => Err(Error::InvalidInput(format!(
                "unknown jitter set `{other}` (expected verbatim|symmetric)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "1")]
    Model1,
    #[serde(rename = "2")]
    Model2,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Model1 => "1",
            ModelKind::Model2 => "2",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" => Ok(ModelKind::Model1),
            "2" => Ok(ModelKind::Model2),
            other => Err(Error::InvalidInput(format!("unknown model `{other}` (expected 1|2)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterSpec {
    /// 1-based cluster label.
    pub label: usize,
    pub knots: Vec<f64>,
    /// Node values at the knots and at the right end, length `knots.len() + 1`.
    pub theta: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub clusters: Vec<ClusterSpec>,
    pub x: Vec<f64>,
}

fn spec(label: usize, knots: &[f64], theta: &[f64]) -> ClusterSpec {
    ClusterSpec {
        label,
        knots: knots.to_vec(),
        theta: theta.to_vec(),
    }
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        let fourth = match kind {
            ModelKind::Model1 => spec(4, &[50.0, 150.0, 300.0], &[200.0, 1300.0, 1800.0, 2100.0]),
            ModelKind::Model2 => spec(4, &[150.0, 250.0, 300.0], &[200.0, 700.0, 1000.0, 1600.0]),
        };
        Self {
            kind,
            clusters: vec![
                spec(1, &[150.0, 250.0], &[1600.0, 1900.0, 2000.0]),
                spec(2, &[150.0, 300.0], &[1400.0, 1800.0, 2200.0]),
                spec(3, &[100.0, 200.0, 300.0, 400.0], &[300.0, 1500.0, 1700.0, 2000.0, 2200.0]),
                fourth,
            ],
            x: (0..N_POINTS).map(|i| X_STEP * i as f64).collect(),
        }
    }

    pub fn model1() -> Self {
        Self::new(ModelKind::Model1)
    }

    pub fn model2() -> Self {
        Self::new(ModelKind::Model2)
    }

    /// Cluster by 1-based label.
    pub fn cluster(&self, label: usize) -> Option<&ClusterSpec> {
        self.clusters.iter().find(|c| c.label == label)
    }
}

/// Continuous piecewise-linear function through `(0, 0)`, `(tⱼ, θⱼ)` and
/// `(end, θ_{K+1})`.
pub fn interpolant(knots: &[f64], theta: &[f64], end: f64, u: f64) -> f64 {
    debug_assert_eq!(theta.len(), knots.len() + 1);
    let k = knots.len();
    let t = |j: usize| match j {
        0 => 0.0,
        j if j <= k => knots[j - 1],
        _ => end,
    };
    let th = |j: usize| if j == 0 { 0.0 } else { theta[j - 1] };
    let mut j = 0;
    while j < k && u >= t(j + 1) {
        j += 1;
    }
    (th(j + 1) - th(j)) * (u - t(j)) / (t(j + 1) - t(j)) + th(j)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub label: usize,
    /// Shifted knots `tᶻ + U`.
    pub knots: Vec<f64>,
    /// Shifted node values `θᶻ + V`.
    pub theta: Vec<f64>,
    pub u: f64,
    pub v: f64,
}

impl Truth {
    pub fn eval(&self, u: f64) -> f64 {
        interpolant(&self.knots, &self.theta, DOMAIN_END, u)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulatedCurve {
    pub curve: Curve,
    pub truth: Truth,
}

/// Independent stream for one curve.
pub fn curve_rng(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draws one curve. `force_label` keeps the label draw (so streams stay
/// aligned) but overrides its value.
pub fn sample_curve<R: Rng>(
    model: &ModelSpec,
    sigma: f64,
    jitter: JitterSet,
    force_label: Option<usize>,
    id: impl Into<String>,
    rng: &mut R,
) -> Result<SimulatedCurve> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidInput(format!("sigma must be finite and >= 0, got {sigma}")));
    }
    let drawn = rng.random_range(0..model.clusters.len());
    let cluster = match force_label {
        Some(z) => model
            .cluster(z)
            .ok_or_else(|| Error::InvalidInput(format!("no cluster with label {z}")))?,
        None => &model.clusters[drawn],
    };
    let u = jitter.values()[rng.random_range(0..7)];
    let v = rng.sample(Uniform::new_inclusive(-LEVEL_SHIFT, LEVEL_SHIFT).expect("valid range"));
    let knots: Vec<f64> = cluster.knots.iter().map(|t| t + u).collect();
    let theta: Vec<f64> = cluster.theta.iter().map(|t| t + v).collect();
    if knots.iter().any(|&t| !(t > 0.0 && t < DOMAIN_END)) {
        return Err(Error::Invariant(format!("shifted knots {knots:?} leave (0, {DOMAIN_END})")));
    }
    let truth = Truth {
        label: cluster.label,
        knots,
        theta,
        u,
        v,
    };
    let y = model
        .x
        .iter()
        .map(|&xi| {
            let e: f64 = rng.sample(StandardNormal);
            truth.eval(xi) + sigma * e
        })
        .collect();
    Ok(SimulatedCurve {
        curve: Curve::new(id, model.x.clone(), y)?,
        truth,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimulatedDataset {
    pub dataset: Dataset,
    pub truths: Vec<Truth>,
}

impl SimulatedDataset {
    pub fn labels(&self) -> Vec<usize> {
        self.truths.iter().map(|t| t.label).collect()
    }

    pub fn truth_table(&self) -> Table {
        let mut table = Table::new(["curve_id", "label", "k", "u", "v", "knots", "theta"]);
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";");
        for (c, t) in self.dataset.curves.iter().zip(&self.truths) {
            table.rows.push(vec![
                Cell::from(c.id.as_str()),
                Cell::from(t.label),
                Cell::from(t.knots.len()),
                Cell::Real(t.u),
                Cell::Real(t.v),
                Cell::from(join(&t.knots)),
                Cell::from(join(&t.theta)),
            ]);
        }
        table
    }
}

pub fn curve_id(index: usize) -> String {
    format!("curve_{:04}", index + 1)
}

/// `n_curves` independent curves; curve `i` uses stream `i` of `seed`.
pub fn sample_dataset(
    model: &ModelSpec,
    sigma: f64,
    n_curves: usize,
    seed: u64,
    jitter: JitterSet,
    exec: Exec,
) -> Result<SimulatedDataset> {
    sample_with(model, sigma, n_curves, seed, jitter, None, exec)
}

/// Like [`sample_dataset`] but every curve comes from cluster `label`.
pub fn sample_cluster(
    model: &ModelSpec,
    label: usize,
    sigma: f64,
    n_curves: usize,
    seed: u64,
    jitter: JitterSet,
    exec: Exec,
) -> Result<SimulatedDataset> {
    sample_with(model, sigma, n_curves, seed, jitter, Some(label), exec)
}

fn sample_with(
    model: &ModelSpec,
    sigma: f64,
    n_curves: usize,
    seed: u64,
    jitter: JitterSet,
    force_label: Option<usize>,
    exec: Exec,
) -> Result<SimulatedDataset> {
    if n_curves == 0 {
        return Err(Error::InvalidInput("need at least one curve".into()));
    }
    let sims = par::map_range(exec, 0..n_curves, |i| {
        let mut rng = curve_rng(seed, i as u64);
        sample_curve(model, sigma, jitter, force_label, curve_id(i), &mut rng)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let (curves, truths): (Vec<_>, Vec<_>) = sims.into_iter().map(|s| (s.curve, s.truth)).unzip();
    Ok(SimulatedDataset {
        dataset: Dataset::new(curves)?,
        truths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cluster1_noiseless_nodes() {
        let m = ModelSpec::model1();
        let c = m.cluster(1).unwrap();
        assert_eq!(interpolant(&c.knots, &c.theta, DOMAIN_END, 0.0), 0.0);
        assert_eq!(interpolant(&c.knots, &c.theta, DOMAIN_END, 150.0), 1600.0);
        assert_eq!(interpolant(&c.knots, &c.theta, DOMAIN_END, 250.0), 1900.0);
        assert_eq!(interpolant(&c.knots, &c.theta, DOMAIN_END, 500.0), 2000.0);
        assert_eq!(interpolant(&c.knots, &c.theta, DOMAIN_END, 200.0), 1750.0);
    }

    #[test]
    fn models_differ_only_in_cluster4() {
        let (a, b) = (ModelSpec::model1(), ModelSpec::model2());
        assert_eq!(a.clusters[..3], b.clusters[..3]);
        assert_ne!(a.clusters[3], b.clusters[3]);
    }

    #[test]
    fn every_shift_keeps_knots_inside() {
        for m in [ModelSpec::model1(), ModelSpec::model2()] {
            for c in &m.clusters {
                assert_eq!(c.theta.len(), c.knots.len() + 1);
                for set in [JitterSet::Verbatim, JitterSet::Symmetric] {
                    for u in set.values() {
                        assert!(c.knots.iter().all(|t| t + u > 0.0 && t + u < DOMAIN_END));
                    }
                }
            }
        }
    }

    #[test]
    fn starts_at_zero_for_every_draw() {
        let m = ModelSpec::model2();
        let sim = sample_dataset(&m, 0.0, 50, 3, JitterSet::Verbatim, Exec::Sequential).unwrap();
        for c in &sim.dataset.curves {
            assert_eq!(c.y[0], 0.0);
        }
    }

    #[test]
    fn deterministic_and_parallel_safe() {
        let m = ModelSpec::model1();
        let a = sample_dataset(&m, 1.0, 40, 11, JitterSet::Verbatim, Exec::Sequential).unwrap();
        let b = sample_dataset(&m, 1.0, 40, 11, JitterSet::Verbatim, Exec::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sigma_only_scales_noise() {
        let m = ModelSpec::model1();
        let a = sample_dataset(&m, 1.0, 20, 5, JitterSet::Verbatim, Exec::Sequential).unwrap();
        let b = sample_dataset(&m, 5.0, 20, 5, JitterSet::Verbatim, Exec::Sequential).unwrap();
        assert_eq!(a.truths, b.truths);
        for ((ca, cb), t) in a.dataset.curves.iter().zip(&b.dataset.curves).zip(&a.truths) {
            for ((&x, ya), yb) in ca.x.iter().zip(&ca.y).zip(&cb.y) {
                let f = t.eval(x);
                assert!(((yb - f) - 5.0 * (ya - f)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn models_share_draws_outside_cluster4() {
        let a = sample_dataset(&ModelSpec::model1(), 1.0, 60, 9, JitterSet::Verbatim, Exec::Sequential).unwrap();
        let b = sample_dataset(&ModelSpec::model2(), 1.0, 60, 9, JitterSet::Verbatim, Exec::Sequential).unwrap();
        for ((ta, tb), (ca, cb)) in a.truths.iter().zip(&b.truths).zip(a.dataset.curves.iter().zip(&b.dataset.curves)) {
            assert_eq!(ta.label, tb.label);
            if ta.label != 4 {
                assert_eq!(ta, tb);
                assert_eq!(ca, cb);
            }
        }
    }

    #[test]
    fn verbatim_jitter_weights_ten_twice() {
        let m = ModelSpec::model1();
        let sim = sample_dataset(&m, 0.0, 7000, 1, JitterSet::Verbatim, Exec::Parallel).unwrap();
        let count = |u: f64| sim.truths.iter().filter(|t| t.u == u).count() as f64 / 7000.0;
        assert!((count(10.0) - 2.0 / 7.0).abs() < 0.03);
        assert_eq!(count(-10.0), 0.0);
        assert!(sim.truths.iter().all(|t| t.v.abs() <= LEVEL_SHIFT));
    }

    #[test]
    fn forced_label() {
        let m = ModelSpec::model1();
        let sim = sample_cluster(&m, 3, 1.0, 10, 2, JitterSet::Verbatim, Exec::Sequential).unwrap();
        assert!(sim.labels().iter().all(|&z| z == 3));
    }
}
