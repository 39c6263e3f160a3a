//! Motion in-betweening with a single transformer encoder.
//!
//! Given a few context frames and one target keyframe, the model predicts
//! every missing frame in one forward pass.

pub mod motion;
pub mod nn;
pub mod tensor;
pub mod dataset;
pub mod train;
pub mod eval;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/skeletons.md")]
    mod skeletons {}
    #[doc = include_str!("../../../book/src/features.md")]
    mod features {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
