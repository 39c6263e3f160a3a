//! Ground-projected root frame and the mapping between world and root space.

use super::math::{wrap_angle, Mat3, Quat, Vec3};
use super::rotation::{rot6d_from_quat, rot6d_to_matrix, Rot6D};
use super::skeleton::{forward_kinematics, LocalPose, Skeleton, WorldPose};
use super::MotionError;

const HEADING_EPS: f64 = 1e-6;

/// A translation on the ground plane combined with a rotation about +y.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootTransform {
    pub pos_xz: [f64; 2],
    pub yaw: f64,
}

impl RootTransform {
    pub const IDENTITY: RootTransform = RootTransform {
        pos_xz: [0.0, 0.0],
        yaw: 0.0,
    };

    pub fn rotation(&self) -> Quat {
        Quat::from_yaw(self.yaw)
    }

    pub fn translation(&self) -> Vec3 {
        Vec3::new(self.pos_xz[0], 0.0, self.pos_xz[1])
    }

    /// Map a point from this frame into its parent frame.
    pub fn apply_point(&self, p: Vec3) -> Vec3 {
        self.rotation().rotate(p) + self.translation()
    }

    /// Map a parent-frame point into this frame.
    pub fn inverse_point(&self, p: Vec3) -> Vec3 {
        self.rotation().conjugate().rotate(p - self.translation())
    }

    pub fn apply_vector(&self, v: Vec3) -> Vec3 {
        self.rotation().rotate(v)
    }

    pub fn inverse_vector(&self, v: Vec3) -> Vec3 {
        self.rotation().conjugate().rotate(v)
    }

    /// Express `other` relative to `self`.
    pub fn relative(&self, other: &RootTransform) -> RootTransform {
        let p = self.inverse_point(other.translation());
        RootTransform {
            pos_xz: [p.x, p.z],
            yaw: wrap_angle(other.yaw - self.yaw),
        }
    }

    /// Inverse of [`RootTransform::relative`]: compose `rel` onto `self`.
    pub fn compose(&self, rel: &RootTransform) -> RootTransform {
        let p = self.apply_point(rel.translation());
        RootTransform {
            pos_xz: [p.x, p.z],
            yaw: wrap_angle(self.yaw + rel.yaw),
        }
    }
}

pub fn yaw_to_cs(yaw: f64) -> [f64; 2] {
    [yaw.cos(), yaw.sin()]
}

pub fn cs_to_yaw(cs: [f64; 2]) -> f64 {
    cs[1].atan2(cs[0])
}

/// Pose features relative to the ground-projected, yaw-only root.
///
/// The hip keeps its height: in root space it sits at `(0, h, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RootSpacePose {
    pub root_pos_xz: [f64; 2],
    /// Cosine and sine of the heading angle about +y.
    pub root_yaw_cs: [f64; 2],
    pub joint_pos: Vec<Vec3>,
    pub joint_rot: Vec<Rot6D>,
}

impl RootSpacePose {
    pub fn root(&self) -> RootTransform {
        RootTransform {
            pos_xz: self.root_pos_xz,
            yaw: cs_to_yaw(self.root_yaw_cs),
        }
    }

    pub fn set_root(&mut self, root: &RootTransform) {
        self.root_pos_xz = root.pos_xz;
        self.root_yaw_cs = yaw_to_cs(root.yaw);
    }

    pub fn joint_count(&self) -> usize {
        self.joint_pos.len()
    }

    pub fn max_abs_diff(&self, o: &RootSpacePose) -> f64 {
        let mut d = (self.root_pos_xz[0] - o.root_pos_xz[0])
            .abs()
            .max((self.root_pos_xz[1] - o.root_pos_xz[1]).abs())
            .max((self.root_yaw_cs[0] - o.root_yaw_cs[0]).abs())
            .max((self.root_yaw_cs[1] - o.root_yaw_cs[1]).abs());
        for (a, b) in self.joint_pos.iter().zip(&o.joint_pos) {
            d = d.max(a.max_abs_diff(*b));
        }
        for (a, b) in self.joint_rot.iter().zip(&o.joint_rot) {
            d = d.max(a.max_abs_diff(*b));
        }
        d
    }
}

/// Heading of the hip: its forward axis projected onto the ground plane.
pub fn hip_heading(s: &Skeleton, hip_rot: Quat) -> Result<f64, MotionError> {
    let fwd = hip_rot.rotate(s.heading_axis());
    let n = (fwd.x * fwd.x + fwd.z * fwd.z).sqrt();
    if !(n >= HEADING_EPS) {
        return Err(MotionError::UndefinedHeading { frame: None });
    }
    Ok(fwd.x.atan2(fwd.z))
}

pub fn to_root_space(s: &Skeleton, world: &WorldPose) -> Result<RootSpacePose, MotionError> {
    let j = s.joint_count();
    if world.positions.len() != j || world.rotations.len() != j {
        return Err(MotionError::JointCountMismatch {
            expected: j,
            found: world.positions.len().min(world.rotations.len()),
        });
    }
    if world.positions.iter().any(|p| !p.is_finite())
        || world.rotations.iter().any(|q| !q.is_finite())
    {
        return Err(MotionError::NonFinite("world transform"));
    }
    let hip = world.positions[0];
    let root = RootTransform {
        pos_xz: [hip.x, hip.z],
        yaw: hip_heading(s, world.rotations[0])?,
    };
    let inv = root.rotation().conjugate();
    let joint_pos = world.positions.iter().map(|p| root.inverse_point(*p)).collect();
    let joint_rot = world
        .rotations
        .iter()
        .map(|q| rot6d_from_quat(inv * *q))
        .collect::<Result<_, _>>()?;
    Ok(RootSpacePose {
        root_pos_xz: root.pos_xz,
        root_yaw_cs: yaw_to_cs(root.yaw),
        joint_pos,
        joint_rot,
    })
}

/// World transforms recovered from a root-space pose. Rotations come from the
/// 6D channels; positions from the stored joint positions.
pub fn root_space_to_world(s: &Skeleton, r: &RootSpacePose) -> Result<WorldPose, MotionError> {
    let j = s.joint_count();
    if r.joint_pos.len() != j || r.joint_rot.len() != j {
        return Err(MotionError::JointCountMismatch {
            expected: j,
            found: r.joint_pos.len().min(r.joint_rot.len()),
        });
    }
    let root = r.root();
    let rq = root.rotation();
    let positions = r.joint_pos.iter().map(|p| root.apply_point(*p)).collect();
    let rotations = r
        .joint_rot
        .iter()
        .map(|m| Ok(rq * Quat::from_matrix(&rot6d_to_matrix(*m)?)))
        .collect::<Result<_, MotionError>>()?;
    Ok(WorldPose {
        positions,
        rotations,
    })
}

/// Recover local-to-parent rotations from a root-space pose.
///
/// The hip height lives in `joint_pos[0]`, so no separate height is needed.
pub fn root_space_to_local(s: &Skeleton, r: &RootSpacePose) -> Result<LocalPose, MotionError> {
    let world = root_space_to_world(s, r)?;
    Ok(world_to_local(s, &world))
}

pub fn world_to_local(s: &Skeleton, world: &WorldPose) -> LocalPose {
    let local_rot = (0..s.joint_count())
        .map(|i| match s.parent(i) {
            None => world.rotations[i],
            Some(p) => (world.rotations[p].conjugate() * world.rotations[i]).normalize(),
        })
        .collect();
    LocalPose {
        root_world_pos: world.positions[0],
        local_rot,
    }
}

/// Convenience: forward kinematics followed by root projection.
pub fn local_to_root_space(s: &Skeleton, p: &LocalPose) -> Result<RootSpacePose, MotionError> {
    to_root_space(s, &forward_kinematics(s, p)?)
}

/// Rotation matrices of every joint in root space.
pub fn root_space_matrices(r: &RootSpacePose) -> Result<Vec<Mat3>, MotionError> {
    r.joint_rot.iter().map(|m| rot6d_to_matrix(*m)).collect()
}
