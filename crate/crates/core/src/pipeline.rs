//! Segment → featurize → scale → choose k → k-means.

use serde::{Deserialize, Serialize};

use crate::clustering::{kmeans, select_k_majority, KMeansOptions, KSelection, Partition};
use crate::error::{Error, Result};
use crate::io::Dataset;
use crate::par::Exec;
use crate::segmentation::{segment_all, Contrast, SegmentOptions, Segmentation, MAX_CANDIDATES};
use crate::simulation::JitterSet;
use crate::spline::{featurize, scale_features, FeatureMatrix, Scaling};
use crate::trend_filter::SearchOptions;
use crate::{clustering, segmentation, trend_filter};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub k_max: usize,
    pub s_threshold: f64,
    pub contrast: Contrast,
    pub eps_rel: f64,
    pub tol: f64,
    pub grid_size: usize,
    pub max_iter: usize,
    pub cluster_k_min: usize,
    pub cluster_k_max: usize,
    pub restarts: usize,
    pub kmeans_max_iter: usize,
    pub seed: u64,
    /// Skip the majority vote and use this many clusters.
    pub forced_k: Option<usize>,
    pub jitter: JitterSet,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let search = SearchOptions::default();
        let km = KMeansOptions::default();
        Self {
            k_max: segmentation::DEFAULT_K_MAX,
            s_threshold: segmentation::DEFAULT_S_THRESHOLD,
            contrast: Contrast::default(),
            eps_rel: search.eps_rel,
            tol: search.tol,
            grid_size: search.grid_size,
            max_iter: trend_filter::DEFAULT_MAX_ITER,
            cluster_k_min: clustering::DEFAULT_K_MIN,
            cluster_k_max: clustering::DEFAULT_K_MAX,
            restarts: km.restarts,
            kmeans_max_iter: km.max_iter,
            seed: 0,
            forced_k: None,
            jitter: JitterSet::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if self.k_max < 1 || self.k_max > MAX_CANDIDATES {
            return bad(format!("k_max must lie in 1..={MAX_CANDIDATES}, got {}", self.k_max));
        }
        if !(self.s_threshold.is_finite() && self.s_threshold >= 0.0) {
            return bad(format!("s_threshold must be finite and >= 0, got {}", self.s_threshold));
        }
        if !(self.eps_rel.is_finite() && self.eps_rel > 0.0) {
            return bad(format!("eps_rel must be > 0, got {}", self.eps_rel));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return bad(format!("tol must be > 0, got {}", self.tol));
        }
        if self.grid_size < 1 || self.max_iter < 1 || self.kmeans_max_iter < 1 {
            return bad("grid_size, max_iter and kmeans_max_iter must be >= 1".into());
        }
        if self.cluster_k_min < 2 || self.cluster_k_max < self.cluster_k_min {
            return bad(format!(
                "cluster range {}..={} must satisfy 2 <= k_min <= k_max",
                self.cluster_k_min, self.cluster_k_max
            ));
        }
        if self.restarts < 1 {
            return bad("restarts must be >= 1".into());
        }
        if self.forced_k == Some(0) {
            return bad("forced k must be >= 1".into());
        }
        Ok(())
    }

    pub fn search_options(&self) -> SearchOptions {
        SearchOptions {
            grid_size: self.grid_size,
            eps_rel: self.eps_rel,
            tol: self.tol,
            max_iter: self.max_iter,
        }
    }

    pub fn segment_options(&self) -> SegmentOptions {
        SegmentOptions {
            k_max: self.k_max,
            s_threshold: self.s_threshold,
            contrast: self.contrast,
            search: self.search_options(),
        }
    }

    pub fn kmeans_options(&self) -> KMeansOptions {
        KMeansOptions {
            restarts: self.restarts,
            max_iter: self.kmeans_max_iter,
            seed: self.seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Clustering {
    /// `None` when k was forced.
    pub selection: Option<KSelection>,
    pub partition: Partition,
}

/// Chooses k by majority vote (unless forced) and returns the partition for it.
pub fn cluster_points(points: &[Vec<f64>], cfg: &PipelineConfig, exec: Exec) -> Result<Clustering> {
    let opts = cfg.kmeans_options();
    match cfg.forced_k {
        Some(k) => Ok(Clustering {
            selection: None,
            partition: kmeans(points, k, &opts, exec)?,
        }),
        None => {
            let sel = select_k_majority(points, cfg.cluster_k_min, cfg.cluster_k_max, &opts, exec)?;
            let partition = sel.chosen().clone();
            Ok(Clustering {
                selection: Some(sel.selection),
                partition,
            })
        }
    }
}

/// Scales the feature rows and clusters them.
pub fn cluster_features(features: &FeatureMatrix, cfg: &PipelineConfig, exec: Exec) -> Result<(Vec<Vec<f64>>, Scaling, Clustering)> {
    let (scaled, scaling) = scale_features(&features.rows)?;
    let clustering = cluster_points(&scaled, cfg, exec)?;
    Ok((scaled, scaling, clustering))
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineOutput {
    pub segmentations: Vec<Segmentation>,
    pub features: FeatureMatrix,
    pub scaled: Vec<Vec<f64>>,
    pub scaling: Scaling,
    pub clustering: Clustering,
}

impl PipelineOutput {
    pub fn labels(&self) -> &[usize] {
        &self.clustering.partition.labels
    }
}

pub fn run_pipeline(dataset: &Dataset, cfg: &PipelineConfig, exec: Exec) -> Result<PipelineOutput> {
    cfg.validate()?;
    let segmentations = segment_all(dataset, &cfg.segment_options(), exec)?;
    let features = featurize(&segmentations)?;
    let (scaled, scaling, clustering) = cluster_features(&features, cfg, exec)?;
    Ok(PipelineOutput {
        segmentations,
        features,
        scaled,
        scaling,
        clustering,
    })
}

/// k-means on the raw response rows (no scaling), with the same k rule.
/// Requires a common grid.
pub fn cluster_raw(dataset: &Dataset, cfg: &PipelineConfig, exec: Exec) -> Result<Clustering> {
    if !dataset.common_grid {
        return Err(Error::InvalidInput("raw-data clustering needs curves on a common grid".into()));
    }
    let rows: Vec<Vec<f64>> = dataset.curves.iter().map(|c| c.y.clone()).collect();
    cluster_points(&rows, cfg, exec)
}
