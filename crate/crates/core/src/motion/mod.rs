//! Rotation algebra, forward kinematics and root-space conversion.

mod math;
mod root_space;
mod rotation;
mod skeleton;
mod velocity;

pub use math::{wrap_angle, Mat3, Quat, Vec3};
pub use root_space::{
    cs_to_yaw, hip_heading, local_to_root_space, root_space_matrices, root_space_to_local,
    root_space_to_world, to_root_space, world_to_local, yaw_to_cs, RootSpacePose, RootTransform,
};
pub use rotation::{quat_slerp, rot6d_from_quat, rot6d_to_matrix, Rot6D, Rot6DColumn};
pub use skeleton::{forward_kinematics, synthetic_layout, LocalPose, Skeleton, WorldPose};
pub use velocity::{finite_velocities, FrameVelocity};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MotionError {
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("degenerate 6D rotation: {0:?} column is zero or parallel to the first")]
    DegenerateRot6D(Rot6DColumn),
    #[error("expected {expected} joints, found {found}")]
    JointCountMismatch { expected: usize, found: usize },
    #[error("invalid skeleton: {0}")]
    InvalidSkeleton(String),
    #[error("hip heading is vertical, yaw undefined{}", frame.map(|f| format!(" at frame {f}")).unwrap_or_default())]
    UndefinedHeading { frame: Option<usize> },
    #[error("sequence needs at least {needed} frames, found {found}")]
    SequenceTooShort { needed: usize, found: usize },
}

impl MotionError {
    /// Attach a frame index to errors that carry one.
    pub fn at_frame(self, frame: usize) -> Self {
        match self {
            MotionError::UndefinedHeading { .. } => MotionError::UndefinedHeading {
                frame: Some(frame),
            },
            e => e,
        }
    }
}
