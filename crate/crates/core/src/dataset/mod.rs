//! Clips, windows and the feature matrices fed to the encoder.

mod bvh;
mod cache;
mod clip;
mod features;
mod normalize;
mod synth;
mod window;

pub use bvh::{parse_bvh, write_bvh, BvhOptions};
pub use cache::{read_feature_cache, write_feature_cache, FeatureCache, CACHE_MAGIC, CACHE_VERSION};
pub use clip::AnimationClip;
pub use features::{
    anchored_to_local, assemble_input, assemble_target, decode_output, interpolate_pose,
    real_rows, FeatureLayout, FeatureOptions, FillMode, PoseSpace, PreparedClip,
};
pub use normalize::{Normalizer, NORMALIZER_EPS};
pub use synth::{synth_clip, synth_corpus, SynthStyle};
pub use window::{slice_windows, Window};

use thiserror::Error;

use crate::motion::MotionError;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error(transparent)]
    Motion(#[from] MotionError),
    #[error("line {line}: {msg}")]
    Bvh { line: usize, msg: String },
    #[error("invalid clip: {0}")]
    InvalidClip(String),
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error("unknown {kind} '{value}' (expected one of: {expected})")]
    UnknownMode {
        kind: &'static str,
        value: String,
        expected: &'static str,
    },
    #[error("cannot fit a normalizer on zero rows")]
    EmptyNormalizer,
    #[error("feature cache: {0}")]
    Cache(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
