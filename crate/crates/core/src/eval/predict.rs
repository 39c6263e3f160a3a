//! Model inference on windows and the interpolation baseline.

use crate::dataset::{
    anchored_to_local, assemble_input, decode_output, interpolate_pose, FeatureOptions,
    Normalizer, PreparedClip, Window,
};
use crate::motion::LocalPose;
use crate::nn::{predict, Checkpoint, ModelConfig, ModelParams};
use crate::train::TrainSet;

use super::EvalError;

/// Missing frames filled by slerp between the last context frame and the target.
pub fn slerp_baseline(prep: &PreparedClip, w: &Window) -> Result<Vec<LocalPose>, EvalError> {
    let anchor = prep.root(w.anchor_frame());
    let a = prep.anchored(w.anchor_frame(), &anchor);
    let b = prep.anchored(w.target_frame(), &anchor);
    (0..w.missing)
        .map(|k| {
            let t = (k + 1) as f64 / (w.missing + 1) as f64;
            let p = interpolate_pose(&prep.skeleton, &a, &b, t)?;
            Ok(anchored_to_local(&prep.skeleton, &p, &anchor)?)
        })
        .collect()
}

/// A trained model with the feature settings and normalizers it was trained with.
#[derive(Debug, Clone)]
pub struct Predictor {
    pub config: ModelConfig,
    pub params: ModelParams<f32>,
    pub options: FeatureOptions,
    pub input_norm: Normalizer,
    pub output_norm: Normalizer,
}

impl Predictor {
    pub fn from_train_set(config: ModelConfig, params: ModelParams<f32>, data: &TrainSet) -> Self {
        Self {
            config,
            params,
            options: data.options,
            input_norm: data.input_norm.clone(),
            output_norm: data.output_norm.clone(),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self, EvalError> {
        let stat = |name: &str| {
            ck.stat(name)
                .ok_or_else(|| EvalError::MissingStats(name.into()))
        };
        let options = FeatureOptions::from_stats(stat("feature_options")?)
            .ok_or_else(|| EvalError::MissingStats("feature_options".into()))?;
        let input_norm = Normalizer::from_stats(stat("input_norm")?)
            .ok_or_else(|| EvalError::MissingStats("input_norm".into()))?;
        let joints = (ck.config.d_out - 4) / 9;
        let layout = crate::dataset::FeatureLayout::new(joints, options.use_velocity);
        if layout.d_in() != ck.config.d_in || layout.d_out() != ck.config.d_out {
            return Err(EvalError::Shape(format!(
                "checkpoint model is {}→{}, feature options imply {}→{}",
                ck.config.d_in,
                ck.config.d_out,
                layout.d_in(),
                layout.d_out()
            )));
        }
        if input_norm.cols() != layout.d_in() {
            return Err(EvalError::Shape(format!(
                "normalizer has {} columns, model input has {}",
                input_norm.cols(),
                layout.d_in()
            )));
        }
        let output_norm = input_norm.select(&layout.pose_columns());
        Ok(Self {
            config: ck.config.clone(),
            params: ck.params.clone(),
            options,
            input_norm,
            output_norm,
        })
    }

    pub fn joints(&self) -> usize {
        (self.config.d_out - 4) / 9
    }

    /// Every frame of `w` decoded from the model output, in world space.
    pub fn predict_window(&self, prep: &PreparedClip, w: &Window) -> Result<Vec<LocalPose>, EvalError> {
        if prep.skeleton.joint_count() != self.joints() {
            return Err(EvalError::SkeletonMismatch(format!(
                "model expects {} joints, clip has {}",
                self.joints(),
                prep.skeleton.joint_count()
            )));
        }
        let x = assemble_input(prep, w, &self.options, Some(&self.input_norm))?;
        let y = predict(&x.cast::<f32>(), w.context, &self.config, &self.params)?;
        let mut y = y.cast::<f64>();
        self.output_norm.invert(&mut y);
        let layout = prep.layout(self.options.use_velocity);
        let anchor = prep.root(w.anchor_frame());
        (0..w.len())
            .map(|r| {
                Ok(decode_output(
                    &prep.skeleton,
                    &layout,
                    self.options.pose_space,
                    y.row(r),
                    &anchor,
                )?)
            })
            .collect()
    }
}
