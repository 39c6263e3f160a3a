use crate::motion::{forward_kinematics, LocalPose, Skeleton, WorldPose};

use super::DatasetError;

/// A named sequence of local-to-parent poses sampled at a fixed rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AnimationClip {
    pub name: String,
    pub skeleton: Skeleton,
    pub frames: Vec<LocalPose>,
    pub fps: f64,
}

impl AnimationClip {
    pub fn new(
        name: impl Into<String>,
        skeleton: Skeleton,
        frames: Vec<LocalPose>,
        fps: f64,
    ) -> Result<Self, DatasetError> {
        if frames.len() < 2 {
            return Err(DatasetError::InvalidClip(format!(
                "{} frames, need at least 2",
                frames.len()
            )));
        }
        if !(fps.is_finite() && fps > 0.0) {
            return Err(DatasetError::InvalidClip(format!("fps {fps}")));
        }
        let j = skeleton.joint_count();
        if let Some(i) = frames.iter().position(|f| f.local_rot.len() != j) {
            return Err(DatasetError::InvalidClip(format!(
                "frame {i} has {} rotations, skeleton has {j} joints",
                frames[i].local_rot.len()
            )));
        }
        Ok(Self {
            name: name.into(),
            skeleton,
            frames,
            fps,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn joint_count(&self) -> usize {
        self.skeleton.joint_count()
    }

    pub fn world(&self, frame: usize) -> WorldPose {
        forward_kinematics(&self.skeleton, &self.frames[frame]).expect("validated joint count")
    }
}
