//! Regularized piecewise-linear summarization and clustering of functional data.
//!
//! Each curve is reduced to a continuous piecewise-linear fit: an L1 trend
//! filter proposes candidate slope changes, an exhaustive continuous
//! least-squares search keeps the relevant ones, and the fit is re-expressed
//! in an order-2 B-spline basis whose knots are the retained change-points.
//! The resulting coefficient/knot vectors are clustered with k-means, the
//! number of clusters being chosen by a majority vote over four validity
//! indices.
//!
//! Batch entry points take an [`Exec`] to pick between the rayon-backed and
//! the sequential code path; both produce identical output.

pub mod bench;
pub mod clustering;
pub mod error;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod par;
pub mod report;
pub mod pipeline;
pub mod segmentation;
pub mod simulation;
pub mod spline;
pub mod trend_filter;

pub use clustering::{kmeans, select_k_majority, KSelection, Partition, ValidityIndex};
pub use error::{Error, ErrorClass, Result};
pub use io::{Curve, Dataset};
pub use metrics::{ari, changepoint_frequencies, ContingencyTable};
pub use par::Exec;
pub use pipeline::{run_pipeline, PipelineConfig, PipelineOutput};
pub use segmentation::{segment, Contrast, SegmentOptions, Segmentation};
pub use simulation::{JitterSet, ModelKind, ModelSpec};
pub use spline::{featurize, scale_features, FeatureMatrix, SplineBasis};
pub use trend_filter::{search_lambda, solve_tf, D2Operator, TrendFit};
