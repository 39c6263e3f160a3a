use super::math::{Quat, Vec3};
use super::MotionError;

/// Joint hierarchy with rest offsets in centimetres.
///
/// Joint 0 is the hip and the only root. `heading_axis` is the hip-local axis
/// whose ground projection defines the character's facing direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    joint_names: Vec<String>,
    parents: Vec<Option<usize>>,
    rest_offsets: Vec<Vec3>,
    heading_axis: Vec3,
}

impl Skeleton {
    pub fn new(
        joint_names: Vec<String>,
        parents: Vec<Option<usize>>,
        rest_offsets: Vec<Vec3>,
    ) -> Result<Self, MotionError> {
        let j = parents.len();
        if j < 2 {
            return Err(MotionError::InvalidSkeleton(format!(
                "need at least 2 joints, got {j}"
            )));
        }
        if joint_names.len() != j || rest_offsets.len() != j {
            return Err(MotionError::InvalidSkeleton(format!(
                "{} names and {} offsets for {j} parents",
                joint_names.len(),
                rest_offsets.len()
            )));
        }
        if parents[0].is_some() {
            return Err(MotionError::InvalidSkeleton("joint 0 must be the root".into()));
        }
        for (i, p) in parents.iter().enumerate().skip(1) {
            match p {
                Some(p) if *p < i => {}
                _ => {
                    return Err(MotionError::InvalidSkeleton(format!(
                        "joint {i} has parent {p:?}; parents must precede children"
                    )))
                }
            }
        }
        if let Some(i) = rest_offsets.iter().position(|o| !o.is_finite()) {
            return Err(MotionError::InvalidSkeleton(format!(
                "rest offset of joint {i} is not finite"
            )));
        }
        Ok(Self {
            joint_names,
            parents,
            rest_offsets,
            heading_axis: Vec3::Z,
        })
    }

    pub fn with_heading_axis(mut self, axis: Vec3) -> Self {
        self.heading_axis = axis;
        self
    }

    /// A three-limb tree: two legs hanging from the hip and a spine going up.
    ///
    /// Joint `i > 0` belongs to limb `(i - 1) % 3` at depth `(i - 1) / 3`.
    pub fn synthetic(joints: usize) -> Result<Self, MotionError> {
        if joints < 2 {
            return Err(MotionError::InvalidSkeleton(format!("{joints} joints")));
        }
        let layout = synthetic_layout(joints);
        let mut names = vec!["hips".to_string()];
        let mut parents = vec![None];
        let mut offsets = vec![Vec3::ZERO];
        for (i, &(limb, depth)) in layout.iter().enumerate().skip(1) {
            parents.push(Some(if depth == 0 { 0 } else { i - 1 }));
            let (name, offset) = match (limb, depth) {
                (0, 0) => ("left_leg", Vec3::new(9.0, -2.0, 0.0)),
                (1, 0) => ("right_leg", Vec3::new(-9.0, -2.0, 0.0)),
                (2, 0) => ("spine", Vec3::new(0.0, 10.0, -1.0)),
                (0, _) => ("left_leg", Vec3::new(0.0, -40.0, 1.0)),
                (1, _) => ("right_leg", Vec3::new(0.0, -40.0, 1.0)),
                _ => ("spine", Vec3::new(0.0, 14.0, 0.5)),
            };
            names.push(format!("{name}{depth}"));
            offsets.push(offset);
        }
        Self::new(names, parents, offsets)
    }

    pub fn joint_count(&self) -> usize {
        self.parents.len()
    }

    pub fn parents(&self) -> &[Option<usize>] {
        &self.parents
    }

    pub fn parent(&self, joint: usize) -> Option<usize> {
        self.parents[joint]
    }

    pub fn rest_offsets(&self) -> &[Vec3] {
        &self.rest_offsets
    }

    pub fn joint_names(&self) -> &[String] {
        &self.joint_names
    }

    pub fn heading_axis(&self) -> Vec3 {
        self.heading_axis
    }

    /// Children of `joint` in index order.
    pub fn children(&self, joint: usize) -> impl Iterator<Item = usize> + '_ {
        self.parents
            .iter()
            .enumerate()
            .filter(move |(_, p)| **p == Some(joint))
            .map(|(i, _)| i)
    }
}

/// `(limb, depth)` of each joint of [`Skeleton::synthetic`], in depth-first
/// order. Joints are dealt round-robin to three limbs; the hip is `(0, 0)`.
pub fn synthetic_layout(joints: usize) -> Vec<(usize, usize)> {
    let mut rest: Vec<(usize, usize)> = (0..joints.saturating_sub(1))
        .map(|k| (k % 3, k / 3))
        .collect();
    rest.sort_unstable();
    let mut out = vec![(0, 0)];
    out.extend(rest);
    out
}

/// A pose in local-to-parent space: root translation plus one rotation per joint.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalPose {
    pub root_world_pos: Vec3,
    pub local_rot: Vec<Quat>,
}

impl LocalPose {
    pub fn identity(joints: usize) -> Self {
        Self {
            root_world_pos: Vec3::ZERO,
            local_rot: vec![Quat::IDENTITY; joints],
        }
    }

    /// Max componentwise error against `other`, quaternions compared up to sign.
    pub fn max_abs_diff(&self, other: &LocalPose) -> f64 {
        self.local_rot
            .iter()
            .zip(&other.local_rot)
            .map(|(a, b)| a.max_abs_diff_up_to_sign(*b))
            .fold(self.root_world_pos.max_abs_diff(other.root_world_pos), f64::max)
    }
}

/// Per-joint world transforms produced by forward kinematics.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldPose {
    pub positions: Vec<Vec3>,
    pub rotations: Vec<Quat>,
}

pub fn forward_kinematics(s: &Skeleton, p: &LocalPose) -> Result<WorldPose, MotionError> {
    let j = s.joint_count();
    if p.local_rot.len() != j {
        return Err(MotionError::JointCountMismatch {
            expected: j,
            found: p.local_rot.len(),
        });
    }
    let mut positions = Vec::with_capacity(j);
    let mut rotations: Vec<Quat> = Vec::with_capacity(j);
    for i in 0..j {
        match s.parent(i) {
            None => {
                positions.push(p.root_world_pos);
                rotations.push(p.local_rot[i]);
            }
            Some(parent) => {
                let prot = rotations[parent];
                positions.push(positions[parent] + prot.rotate(s.rest_offsets[i]));
                rotations.push(prot * p.local_rot[i]);
            }
        }
    }
    Ok(WorldPose {
        positions,
        rotations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn chain2() -> Skeleton {
        Skeleton::new(
            vec!["a".into(), "b".into()],
            vec![None, Some(0)],
            vec![Vec3::ZERO, Vec3::Y],
        )
        .unwrap()
    }

    #[test]
    fn rejects_bad_trees() {
        let names = || vec!["a".to_string(), "b".to_string()];
        assert!(Skeleton::new(names(), vec![Some(0), Some(0)], vec![Vec3::ZERO; 2]).is_err());
        assert!(Skeleton::new(names(), vec![None, Some(1)], vec![Vec3::ZERO; 2]).is_err());
        assert!(Skeleton::new(vec!["a".into()], vec![None], vec![Vec3::ZERO]).is_err());
        let nan = vec![Vec3::ZERO, Vec3::new(f64::NAN, 0.0, 0.0)];
        assert!(Skeleton::new(names(), vec![None, Some(0)], nan).is_err());
    }

    #[test]
    fn synthetic_tree_is_valid() {
        for j in [2, 5, 8, 22] {
            let s = Skeleton::synthetic(j).unwrap();
            assert_eq!(s.joint_count(), j);
            let mut order = Vec::new();
            let mut stack = vec![0];
            while let Some(i) = stack.pop() {
                order.push(i);
                let kids: Vec<usize> = s.children(i).collect();
                stack.extend(kids.into_iter().rev());
            }
            assert_eq!(order, (0..j).collect::<Vec<_>>(), "not depth-first for {j} joints");
        }
    }

    #[test]
    fn identity_pose_accumulates_offsets() {
        let s = Skeleton::synthetic(8).unwrap();
        let w = forward_kinematics(&s, &LocalPose::identity(8)).unwrap();
        for i in 1..8 {
            let p = s.parent(i).unwrap();
            let expect = w.positions[p] + s.rest_offsets()[i];
            assert!(w.positions[i].max_abs_diff(expect) < 1e-12);
        }
    }

    #[test]
    fn rotated_root_swings_child() {
        // Rz(90°)·(0,1,0) = (-1,0,0).
        let mut pose = LocalPose::identity(2);
        pose.local_rot[0] = Quat::from_axis_angle(Vec3::Z, FRAC_PI_2);
        let w = forward_kinematics(&chain2(), &pose).unwrap();
        assert!(w.positions[1].max_abs_diff(Vec3::new(-1.0, 0.0, 0.0)) < 1e-12);
    }

    #[test]
    fn translation_equivariance() {
        let s = Skeleton::synthetic(5).unwrap();
        let mut pose = LocalPose::identity(5);
        pose.local_rot[1] = Quat::from_axis_angle(Vec3::X, 0.4);
        let a = forward_kinematics(&s, &pose).unwrap();
        let v = Vec3::new(3.0, -2.0, 7.5);
        pose.root_world_pos += v;
        let b = forward_kinematics(&s, &pose).unwrap();
        for (pa, pb) in a.positions.iter().zip(&b.positions) {
            assert!((*pa + v).max_abs_diff(*pb) < 1e-12);
        }
    }

    #[test]
    fn joint_count_mismatch() {
        let err = forward_kinematics(&chain2(), &LocalPose::identity(3)).unwrap_err();
        assert!(matches!(
            err,
            MotionError::JointCountMismatch {
                expected: 2,
                found: 3
            }
        ));
    }
}
