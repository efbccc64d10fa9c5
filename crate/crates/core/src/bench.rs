//! Replicated simulation studies: clustering agreement against raw-data
//! k-means, and change-point recovery on a single cluster.
//!
//! Every replicate derives its seeds from `(seed, replicate)`, so all
//! methods and noise levels in a replicate see the same draws and the output
//! does not depend on scheduling.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{write_table, Cell, Table};
use crate::metrics::{ari, changepoint_frequencies, recovery, Recovery};
use crate::par::{self, Exec};
use crate::pipeline::{cluster_raw, run_pipeline, PipelineConfig};
use crate::report::join;
use crate::segmentation::segment;
use crate::simulation::{sample_cluster, sample_dataset, ModelKind, ModelSpec};

pub const HIT_RADIUS: f64 = 10.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub model: ModelKind,
    pub sigmas: Vec<f64>,
    pub replicates: usize,
    pub n_curves: usize,
    pub seed: u64,
    /// Cluster whose curves the change-point study draws.
    pub cp_cluster: usize,
    pub pipeline: PipelineConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Model1,
            sigmas: vec![1.0, 5.0],
            replicates: 100,
            n_curves: 100,
            seed: 0,
            cp_cluster: 3,
            pipeline: PipelineConfig::default(),
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates < 1 {
            return Err(Error::InvalidInput("replicates must be >= 1".into()));
        }
        if self.n_curves < 2 {
            return Err(Error::InvalidInput("n_curves must be >= 2".into()));
        }
        if self.sigmas.is_empty() || self.sigmas.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::InvalidInput("sigmas must be a nonempty list of finite values >= 0".into()));
        }
        if !(1..=4).contains(&self.cp_cluster) {
            return Err(Error::InvalidInput(format!("cp_cluster must lie in 1..=4, got {}", self.cp_cluster)));
        }
        self.pipeline.validate()
    }
}

fn derive_seed(seed: u64, tag: u64, index: u64) -> u64 {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream((tag << 48) ^ index);
    rng.next_u64()
}

const DATA_TAG: u64 = 1;
const CLUSTER_TAG: u64 = 2;
const CP_TAG: u64 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Pipeline,
    RawKmeans,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Pipeline => "pipeline",
            Method::RawKmeans => "raw_kmeans",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AriRow {
    pub replicate: usize,
    pub method: Method,
    pub sigma: f64,
    pub model: ModelKind,
    pub ari: f64,
    pub k: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Failure {
    pub study: &'static str,
    pub replicate: usize,
    pub sigma: f64,
    pub method: String,
    pub class: String,
    pub reason: String,
}

impl Failure {
    fn new(study: &'static str, replicate: usize, sigma: f64, method: &str, e: &Error) -> Self {
        Self {
            study,
            replicate,
            sigma,
            method: method.to_string(),
            class: format!("{:?}", e.class()).to_lowercase(),
            reason: e.to_string(),
        }
    }
}

fn failures_table(failures: &[Failure]) -> Table {
    let mut t = Table::new(["study", "replicate", "sigma", "method", "class", "reason"]);
    for f in failures {
        t.rows.push(vec![
            Cell::from(f.study),
            Cell::from(f.replicate),
            Cell::Real(f.sigma),
            Cell::from(f.method.as_str()),
            Cell::from(f.class.as_str()),
            Cell::from(f.reason.as_str()),
        ]);
    }
    t
}

/// Median and quartiles with linear interpolation between order statistics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Quantiles {
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl Quantiles {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Self {
            n: v.len(),
            min: v[0],
            q1: quantile(&v, 0.25),
            median: quantile(&v, 0.5),
            q3: quantile(&v, 0.75),
            max: v[v.len() - 1],
            mean: v.iter().sum::<f64>() / v.len() as f64,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AriSummary {
    pub model: ModelKind,
    pub sigma: f64,
    pub method: Method,
    pub ari: Option<Quantiles>,
    /// How often each k was selected.
    pub k_counts: BTreeMap<usize, usize>,
    pub failures: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AriBenchmark {
    pub rows: Vec<AriRow>,
    pub failures: Vec<Failure>,
}

impl AriBenchmark {
    pub fn values(&self, method: Method, sigma: f64) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.method == method && r.sigma == sigma)
            .map(|r| r.ari)
            .collect()
    }

    pub fn summary(&self, cfg: &BenchConfig) -> Vec<AriSummary> {
        let mut out = Vec::new();
        for &sigma in &cfg.sigmas {
            for method in [Method::Pipeline, Method::RawKmeans] {
                let rows: Vec<&AriRow> = self.rows.iter().filter(|r| r.method == method && r.sigma == sigma).collect();
                let mut k_counts = BTreeMap::new();
                for r in &rows {
                    *k_counts.entry(r.k).or_insert(0) += 1;
                }
                out.push(AriSummary {
                    model: cfg.model,
                    sigma,
                    method,
                    ari: Quantiles::of(&rows.iter().map(|r| r.ari).collect::<Vec<_>>()),
                    k_counts,
                    failures: self
                        .failures
                        .iter()
                        .filter(|f| f.sigma == sigma && f.method == method.name())
                        .count(),
                });
            }
        }
        out
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(["replicate", "method", "sigma", "model", "ari"]);
        for r in &self.rows {
            t.rows.push(vec![
                Cell::from(r.replicate),
                Cell::from(r.method.name()),
                Cell::Real(r.sigma),
                Cell::from(r.model.to_string()),
                Cell::Real(r.ari),
            ]);
        }
        t
    }
}

/// Per replicate and noise level: simulate, run the pipeline and raw-data
/// k-means on the same sample, score both against the true labels.
pub fn run_ari_benchmark(cfg: &BenchConfig, exec: Exec) -> Result<AriBenchmark> {
    cfg.validate()?;
    let model = ModelSpec::new(cfg.model);
    let tasks: Vec<(usize, f64)> = (0..cfg.replicates)
        .flat_map(|r| cfg.sigmas.iter().map(move |&s| (r, s)))
        .collect();
    let results = par::map(exec, &tasks, |&(rep, sigma)| {
        let data_seed = derive_seed(cfg.seed, DATA_TAG, rep as u64);
        let pcfg = PipelineConfig {
            seed: derive_seed(cfg.seed, CLUSTER_TAG, rep as u64),
            ..cfg.pipeline.clone()
        };
        let mut rows = Vec::new();
        let mut failures = Vec::new();
        let sim = match sample_dataset(&model, sigma, cfg.n_curves, data_seed, pcfg.jitter, exec) {
            Ok(s) => s,
            Err(e) => {
                failures.push(Failure::new("ari", rep + 1, sigma, "simulate", &e));
                return (rows, failures);
            }
        };
        let truth = sim.labels();
        let scored = |labels: &[usize]| ari(labels, &truth);
        let a = run_pipeline(&sim.dataset, &pcfg, exec)
            .and_then(|out| Ok((scored(out.labels())?, out.clustering.partition.k)));
        let b = cluster_raw(&sim.dataset, &pcfg, exec)
            .and_then(|c| Ok((scored(&c.partition.labels)?, c.partition.k)));
        for (method, res) in [(Method::Pipeline, a), (Method::RawKmeans, b)] {
            match res {
                Ok((ari, k)) => rows.push(AriRow {
                    replicate: rep + 1,
                    method,
                    sigma,
                    model: cfg.model,
                    ari,
                    k,
                }),
                Err(e) => failures.push(Failure::new("ari", rep + 1, sigma, method.name(), &e)),
            }
        }
        (rows, failures)
    });
    let mut bench = AriBenchmark {
        rows: Vec::new(),
        failures: Vec::new(),
    };
    for (rows, failures) in results {
        bench.rows.extend(rows);
        bench.failures.extend(failures);
    }
    Ok(bench)
}

pub fn write_ari_outputs(bench: &AriBenchmark, cfg: &BenchConfig, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    create_dir(dir)?;
    write_table(&bench.table(), dir.join("ari.csv"))?;
    write_table(&failures_table(&bench.failures), dir.join("failures.csv"))?;
    write_json(&bench.summary(cfg), dir.join("summary.json"))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CpReplicate {
    pub replicate: usize,
    pub sigma: f64,
    pub u: f64,
    pub truth: Vec<f64>,
    pub knots: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CpSigmaSummary {
    pub sigma: f64,
    pub replicates: usize,
    pub failures: usize,
    pub recovery: Recovery,
    /// Distribution of the selected number of change-points.
    pub k_counts: BTreeMap<usize, usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CpStudy {
    pub model: ModelKind,
    pub cluster: usize,
    pub grid: Vec<f64>,
    pub replicates: Vec<CpReplicate>,
    /// `(sigma, frequency per grid position)`.
    pub frequencies: Vec<(f64, Vec<f64>)>,
    pub summaries: Vec<CpSigmaSummary>,
    pub failures: Vec<Failure>,
}

impl CpStudy {
    pub fn summary(&self, sigma: f64) -> Option<&CpSigmaSummary> {
        self.summaries.iter().find(|s| s.sigma == sigma)
    }

    pub fn frequency_table(&self) -> Table {
        let mut t = Table::new(["sigma", "position", "frequency"]);
        for (sigma, freq) in &self.frequencies {
            for (x, f) in self.grid.iter().zip(freq) {
                t.rows.push(vec![Cell::Real(*sigma), Cell::Real(*x), Cell::Real(*f)]);
            }
        }
        t
    }

    /// Jitter-aware view: hit rate per true knot and spurious frequency per
    /// estimated position.
    pub fn recovery_table(&self) -> Table {
        let mut t = Table::new(["sigma", "kind", "rank", "position", "frequency"]);
        let nominal = ModelSpec::new(self.model)
            .cluster(self.cluster)
            .map(|c| c.knots.clone())
            .unwrap_or_default();
        for s in &self.summaries {
            for (j, h) in s.recovery.hit_rate.iter().enumerate() {
                t.rows.push(vec![
                    Cell::Real(s.sigma),
                    Cell::from("truth"),
                    Cell::from(j + 1),
                    nominal.get(j).map_or(Cell::Empty, |&v| Cell::Real(v)),
                    Cell::Real(*h),
                ]);
            }
            for (pos, f) in &s.recovery.spurious_by_position {
                t.rows.push(vec![
                    Cell::Real(s.sigma),
                    Cell::from("spurious"),
                    Cell::Empty,
                    Cell::Real(*pos),
                    Cell::Real(*f),
                ]);
            }
        }
        t
    }

    pub fn replicate_table(&self) -> Table {
        let mut t = Table::new(["sigma", "replicate", "u", "k_hat", "knots", "truth"]);
        for r in &self.replicates {
            t.rows.push(vec![
                Cell::Real(r.sigma),
                Cell::from(r.replicate),
                Cell::Real(r.u),
                Cell::from(r.knots.len()),
                Cell::from(join(&r.knots)),
                Cell::from(join(&r.truth)),
            ]);
        }
        t
    }
}

/// Segments `replicates` independent curves of one cluster at every noise
/// level and tallies where change-points land.
pub fn run_cp_study(cfg: &BenchConfig, exec: Exec) -> Result<CpStudy> {
    cfg.validate()?;
    let model = ModelSpec::new(cfg.model);
    let opts = cfg.pipeline.segment_options();
    let data_seed = derive_seed(cfg.seed, CP_TAG, 0);
    let mut study = CpStudy {
        model: cfg.model,
        cluster: cfg.cp_cluster,
        grid: model.x.clone(),
        replicates: Vec::new(),
        frequencies: Vec::new(),
        summaries: Vec::new(),
        failures: Vec::new(),
    };
    for &sigma in &cfg.sigmas {
        let sim = sample_cluster(&model, cfg.cp_cluster, sigma, cfg.replicates, data_seed, cfg.pipeline.jitter, exec)?;
        let segs = par::map(exec, &sim.dataset.curves, |c| segment(c, &opts, Exec::Sequential));
        let mut estimated = Vec::new();
        let mut truths = Vec::new();
        let mut k_counts = BTreeMap::new();
        let mut failures = 0;
        for (r, (seg, truth)) in segs.into_iter().zip(&sim.truths).enumerate() {
            match seg {
                Ok(s) => {
                    *k_counts.entry(s.k_hat).or_insert(0) += 1;
                    study.replicates.push(CpReplicate {
                        replicate: r + 1,
                        sigma,
                        u: truth.u,
                        truth: truth.knots.clone(),
                        knots: s.knots.clone(),
                    });
                    estimated.push(s.knots);
                    truths.push(truth.knots.clone());
                }
                Err(e) => {
                    failures += 1;
                    study.failures.push(Failure::new("cp", r + 1, sigma, "segment", &e));
                }
            }
        }
        study.frequencies.push((sigma, changepoint_frequencies(&estimated, &model.x)?));
        study.summaries.push(CpSigmaSummary {
            sigma,
            replicates: estimated.len(),
            failures,
            recovery: recovery(&estimated, &truths, HIT_RADIUS)?,
            k_counts,
        });
    }
    Ok(study)
}

pub fn write_cp_outputs(study: &CpStudy, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    create_dir(dir)?;
    write_table(&study.frequency_table(), dir.join("cpfreq.csv"))?;
    write_table(&study.recovery_table(), dir.join("cprecovery.csv"))?;
    write_table(&study.replicate_table(), dir.join("cpreplicates.csv"))?;
    write_table(&failures_table(&study.failures), dir.join("cp_failures.csv"))?;
    write_json(&study.summaries, dir.join("cp_summary.json"))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn write_json<T: Serialize + ?Sized>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Invariant(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> BenchConfig {
        BenchConfig {
            sigmas: vec![0.0],
            replicates: 1,
            n_curves: 24,
            seed: 5,
            ..Default::default()
        }
    }

    #[test]
    fn quartiles_interpolate() {
        let q = Quantiles::of(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!((q.q1, q.median, q.q3), (1.75, 2.5, 3.25));
        assert_eq!(Quantiles::of(&[]), None);
    }

    #[test]
    fn one_replicate_gives_one_row_per_method() {
        let b = run_ari_benchmark(&small(), Exec::Parallel).unwrap();
        assert_eq!(b.rows.len(), 2);
        assert!(b.failures.is_empty());
        assert_eq!(b.rows[0].method, Method::Pipeline);
        assert_eq!(b.rows[1].method, Method::RawKmeans);
    }

    #[test]
    fn noiseless_cp_study_is_exact() {
        let cfg = BenchConfig {
            replicates: 10,
            ..small()
        };
        let s = run_cp_study(&cfg, Exec::Parallel).unwrap();
        let sum = s.summary(0.0).unwrap();
        assert_eq!(sum.recovery.hit_rate, vec![1.0; 4]);
        assert_eq!(sum.recovery.spurious_rate, 0.0);
        for r in &s.replicates {
            assert_eq!(r.knots, r.truth);
        }
    }

    #[test]
    fn rejects_empty_config() {
        let cfg = BenchConfig {
            replicates: 0,
            ..Default::default()
        };
        assert!(run_ari_benchmark(&cfg, Exec::Sequential).is_err());
    }
}
