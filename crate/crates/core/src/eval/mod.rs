//! Benchmark metrics, the interpolation baseline and the ablation harness.

mod ablation;
mod benchmark;
mod metrics;
mod predict;

pub use ablation::{run_ablation, AblationAxis, AblationReport, AblationRun, AblationSpec, Delta};
pub use benchmark::{run_benchmark, BenchmarkConfig, BenchmarkReport, Method, ReportRow};
pub use metrics::{l2p, l2q, npss, npss_pooled, quaternion_features, PositionStats, Transition};
pub use predict::{slerp_baseline, Predictor};

use thiserror::Error;

use crate::dataset::DatasetError;
use crate::motion::MotionError;
use crate::nn::NnError;
use crate::train::TrainError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("skeleton mismatch: {0}")]
    SkeletonMismatch(String),
    #[error("frame range {start}..{end} outside a {len}-frame clip")]
    Frames { start: usize, end: usize, len: usize },
    #[error("position statistics have {found} dimensions, skeleton needs {expected}")]
    Stats { expected: usize, found: usize },
    #[error("missing statistic '{0}' in checkpoint")]
    MissingStats(String),
    #[error("ground truth has zero power in every feature")]
    ZeroPower,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("unknown ablation axis '{0}' (expected one of: offset5_vs_20, root_vs_local, velocity_on_off, zeros_vs_slerp, keypos_on_off)")]
    UnknownAxis(String),
    #[error(transparent)]
    Motion(#[from] MotionError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Train(#[from] TrainError),
}
