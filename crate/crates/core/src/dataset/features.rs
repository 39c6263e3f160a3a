//! Window feature matrices.
//!
//! Every window is expressed relative to the root of its last context frame,
//! so root channels describe motion relative to where the transition starts.
//!
//! Input row layout (`J` joints):
//!
//! | columns | content |
//! |---|---|
//! | 2 | root position on the ground |
//! | 2 | cosine and sine of root yaw |
//! | 2 | root linear velocity (velocity layouts only) |
//! | 2 | cosine and sine of the per-frame yaw change (velocity layouts only) |
//! | 3J | joint positions |
//! | 6J | joint rotations, 6D |
//! | 3J | joint linear velocities (velocity layouts only) |
//! | 6J | joint angular velocities, 6D of `R_t·R_{t-1}ᵀ` (velocity layouts only) |
//!
//! Output rows hold the four root columns followed by the `9J` joint pose columns.

use std::str::FromStr;

use crate::motion::{
    finite_velocities, quat_slerp, root_space_matrices, root_space_to_local, wrap_angle,
    yaw_to_cs, FrameVelocity, LocalPose, Mat3, Quat, Rot6D, RootSpacePose, RootTransform,
    Skeleton, Vec3, forward_kinematics, local_to_root_space, rot6d_to_matrix,
};
use crate::tensor::Matrix;

use super::clip::AnimationClip;
use super::normalize::Normalizer;
use super::window::Window;
use super::DatasetError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum FillMode {
    #[default]
    Zeros,
    Slerp,
}

impl FromStr for FillMode {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zeros" => Ok(FillMode::Zeros),
            "slerp" => Ok(FillMode::Slerp),
            _ => Err(DatasetError::UnknownMode {
                kind: "fill mode",
                value: s.into(),
                expected: "zeros, slerp",
            }),
        }
    }
}

/// Which joint channels the features carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum PoseSpace {
    /// Joint positions and rotations relative to the per-frame root.
    #[default]
    Root,
    /// Hip transform relative to the window anchor, rest offsets for the
    /// other joints, and local-to-parent rotations.
    Local,
}

impl FromStr for PoseSpace {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "root" => Ok(PoseSpace::Root),
            "local" => Ok(PoseSpace::Local),
            _ => Err(DatasetError::UnknownMode {
                kind: "pose space",
                value: s.into(),
                expected: "root, local",
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FeatureOptions {
    pub fill: FillMode,
    pub pose_space: PoseSpace,
    pub use_velocity: bool,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        Self {
            fill: FillMode::Zeros,
            pose_space: PoseSpace::Root,
            use_velocity: true,
        }
    }
}

impl FeatureOptions {
    /// `[fill, pose_space, use_velocity]` as 0/1 flags.
    pub fn to_stats(&self) -> Vec<f64> {
        vec![
            (self.fill == FillMode::Slerp) as u8 as f64,
            (self.pose_space == PoseSpace::Local) as u8 as f64,
            self.use_velocity as u8 as f64,
        ]
    }

    pub fn from_stats(v: &[f64]) -> Option<Self> {
        let flag = |x: f64| match x {
            0.0 => Some(false),
            1.0 => Some(true),
            _ => None,
        };
        let [f, p, u] = v else { return None };
        Some(Self {
            fill: if flag(*f)? { FillMode::Slerp } else { FillMode::Zeros },
            pose_space: if flag(*p)? { PoseSpace::Local } else { PoseSpace::Root },
            use_velocity: flag(*u)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureLayout {
    pub joints: usize,
    pub use_velocity: bool,
}

impl FeatureLayout {
    pub fn new(joints: usize, use_velocity: bool) -> Self {
        Self {
            joints,
            use_velocity,
        }
    }

    /// `18J + 8` with velocities, `9J + 4` without.
    pub fn d_in(&self) -> usize {
        if self.use_velocity {
            18 * self.joints + 8
        } else {
            9 * self.joints + 4
        }
    }

    pub fn d_out(&self) -> usize {
        9 * self.joints + 4
    }

    fn joint_start(&self) -> usize {
        if self.use_velocity {
            8
        } else {
            4
        }
    }

    /// Input column of every output column.
    pub fn pose_columns(&self) -> Vec<usize> {
        let js = self.joint_start();
        (0..4).chain(js..js + 9 * self.joints).collect()
    }

    pub fn velocity_columns(&self) -> Vec<usize> {
        if !self.use_velocity {
            return Vec::new();
        }
        let jv = 8 + 9 * self.joints;
        (4..8).chain(jv..jv + 9 * self.joints).collect()
    }

    fn write_pose(&self, row: &mut [f64], pose: &RootSpacePose, joint_start: usize) {
        row[0..2].copy_from_slice(&pose.root_pos_xz);
        row[2..4].copy_from_slice(&pose.root_yaw_cs);
        let j = self.joints;
        for (i, p) in pose.joint_pos.iter().enumerate() {
            row[joint_start + 3 * i..joint_start + 3 * i + 3].copy_from_slice(&p.to_array());
        }
        let rs = joint_start + 3 * j;
        for (i, r) in pose.joint_rot.iter().enumerate() {
            row[rs + 6 * i..rs + 6 * i + 6].copy_from_slice(&r.to_array());
        }
    }

    pub(crate) fn input_row_public(&self, pose: &RootSpacePose, vel: &FrameVelocity) -> Vec<f64> {
        self.input_row(pose, vel)
    }

    fn input_row(&self, pose: &RootSpacePose, vel: &FrameVelocity) -> Vec<f64> {
        let mut row = vec![0.0; self.d_in()];
        self.write_pose(&mut row, pose, self.joint_start());
        if self.use_velocity {
            row[4..6].copy_from_slice(&vel.root_lin);
            row[6..8].copy_from_slice(&vel.root_ang_cs);
            let j = self.joints;
            let jv = 8 + 9 * j;
            for (i, v) in vel.joint_lin.iter().enumerate() {
                row[jv + 3 * i..jv + 3 * i + 3].copy_from_slice(&v.to_array());
            }
            let av = jv + 3 * j;
            for (i, r) in vel.joint_ang.iter().enumerate() {
                row[av + 6 * i..av + 6 * i + 6].copy_from_slice(&r.to_array());
            }
        }
        row
    }

    fn output_row(&self, pose: &RootSpacePose) -> Vec<f64> {
        let mut row = vec![0.0; self.d_out()];
        self.write_pose(&mut row, pose, 4);
        row
    }

    /// Parse one output row back into pose channels.
    pub fn read_output(&self, row: &[f64]) -> RootSpacePose {
        assert_eq!(row.len(), self.d_out(), "output row width");
        let j = self.joints;
        RootSpacePose {
            root_pos_xz: [row[0], row[1]],
            root_yaw_cs: [row[2], row[3]],
            joint_pos: (0..j).map(|i| Vec3::from_slice(&row[4 + 3 * i..])).collect(),
            joint_rot: (0..j)
                .map(|i| Rot6D::from_slice(&row[4 + 3 * j + 6 * i..]))
                .collect(),
        }
    }
}

/// Per-frame root-space poses of a clip, computed once.
#[derive(Debug, Clone)]
pub struct PreparedClip {
    pub skeleton: Skeleton,
    pub fps: f64,
    poses: Vec<RootSpacePose>,
}

impl PreparedClip {
    pub fn new(clip: &AnimationClip) -> Result<Self, DatasetError> {
        let poses = clip
            .frames
            .iter()
            .enumerate()
            .map(|(f, p)| local_to_root_space(&clip.skeleton, p).map_err(|e| e.at_frame(f)))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            skeleton: clip.skeleton.clone(),
            fps: clip.fps,
            poses,
        })
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn layout(&self, use_velocity: bool) -> FeatureLayout {
        FeatureLayout::new(self.skeleton.joint_count(), use_velocity)
    }

    /// World root of `frame`.
    pub fn root(&self, frame: usize) -> RootTransform {
        self.poses[frame].root()
    }

    /// Root-space pose of `frame` with root channels relative to `anchor`.
    pub fn anchored(&self, frame: usize, anchor: &RootTransform) -> RootSpacePose {
        let mut p = self.poses[frame].clone();
        p.set_root(&anchor.relative(&p.root()));
        p
    }

    fn check(&self, w: &Window) -> Result<(), DatasetError> {
        if w.context == 0 || w.missing == 0 || w.start + w.len() > self.len() {
            return Err(DatasetError::InvalidWindow(format!(
                "start {} with C={} M={} on a {}-frame clip",
                w.start,
                w.context,
                w.missing,
                self.len()
            )));
        }
        Ok(())
    }

    /// Anchored poses for the window, preceded by the frame before it when
    /// the clip has one. Returns the poses and the index of the window's first row.
    fn sequence(&self, w: &Window, fill: FillMode) -> Result<(Vec<RootSpacePose>, usize), DatasetError> {
        self.check(w)?;
        let anchor = self.root(w.anchor_frame());
        let lead = usize::from(w.start > 0);
        let mut seq: Vec<RootSpacePose> = (w.start - lead..w.start + w.len())
            .map(|f| self.anchored(f, &anchor))
            .collect();
        if fill == FillMode::Slerp {
            let a = seq[lead + w.context - 1].clone();
            let b = seq[lead + w.len() - 1].clone();
            for k in 0..w.missing {
                let t = (k + 1) as f64 / (w.missing + 1) as f64;
                seq[lead + w.context + k] = interpolate_pose(&self.skeleton, &a, &b, t)?;
            }
        }
        Ok((seq, lead))
    }
}

/// Pose-space projection of an anchored root-space pose.
fn to_space(s: &Skeleton, p: &RootSpacePose, space: PoseSpace) -> Result<RootSpacePose, DatasetError> {
    match space {
        PoseSpace::Root => Ok(p.clone()),
        PoseSpace::Local => {
            let m = root_space_matrices(p)?;
            let root = p.root();
            let yaw = root.rotation().to_matrix();
            let mut out = p.clone();
            out.joint_pos[0] = root.apply_point(p.joint_pos[0]);
            out.joint_rot[0] = Rot6D::from_matrix(&(yaw * m[0]));
            for i in 1..s.joint_count() {
                let parent = s.parent(i).expect("non-root joint");
                out.joint_pos[i] = s.rest_offsets()[i];
                out.joint_rot[i] = Rot6D::from_matrix(&(m[parent].transpose() * m[i]));
            }
            Ok(out)
        }
    }
}

fn rows_for(
    prep: &PreparedClip,
    w: &Window,
    opts: &FeatureOptions,
) -> Result<(Matrix<f64>, FeatureLayout), DatasetError> {
    let layout = prep.layout(opts.use_velocity);
    let (seq, lead) = prep.sequence(w, opts.fill)?;
    let seq = seq
        .iter()
        .map(|p| to_space(&prep.skeleton, p, opts.pose_space))
        .collect::<Result<Vec<_>, _>>()?;
    let vel = finite_velocities(&seq, prep.fps)?;
    let mut m = Matrix::zeros(w.len(), layout.d_in());
    for r in 0..w.len() {
        m.row_mut(r)
            .copy_from_slice(&layout.input_row(&seq[lead + r], &vel[lead + r]));
    }
    Ok((m, layout))
}

/// Unnormalised input rows of every window frame with true velocities and
/// no fill. Normalizer statistics come from the context and target rows.
pub fn real_rows(
    prep: &PreparedClip,
    w: &Window,
    opts: &FeatureOptions,
) -> Result<Matrix<f64>, DatasetError> {
    let opts = FeatureOptions {
        fill: FillMode::Zeros,
        ..*opts
    };
    Ok(rows_for(prep, w, &opts)?.0)
}

/// Model input for `w`.
///
/// Real rows are normalised first; missing rows (zero fill) and the target
/// row's velocity channels are then set to exactly zero.
pub fn assemble_input(
    prep: &PreparedClip,
    w: &Window,
    opts: &FeatureOptions,
    norm: Option<&Normalizer>,
) -> Result<Matrix<f64>, DatasetError> {
    let (mut m, layout) = rows_for(prep, w, opts)?;
    if let Some(n) = norm {
        n.apply(&mut m);
    }
    if opts.fill == FillMode::Zeros {
        for r in w.missing_rows() {
            m.row_mut(r).fill(0.0);
        }
    }
    let target = m.row_mut(w.len() - 1);
    for c in layout.velocity_columns() {
        target[c] = 0.0;
    }
    Ok(m)
}

/// Ground-truth output features for every window frame.
pub fn assemble_target(
    prep: &PreparedClip,
    w: &Window,
    space: PoseSpace,
    norm: Option<&Normalizer>,
) -> Result<Matrix<f64>, DatasetError> {
    let layout = prep.layout(false);
    let (seq, lead) = prep.sequence(w, FillMode::Zeros)?;
    let mut m = Matrix::zeros(w.len(), layout.d_out());
    for r in 0..w.len() {
        let p = to_space(&prep.skeleton, &seq[lead + r], space)?;
        m.row_mut(r).copy_from_slice(&layout.output_row(&p));
    }
    if let Some(n) = norm {
        n.apply(&mut m);
    }
    Ok(m)
}

/// Interpolated pose between two anchored root-space poses.
///
/// Root position and hip height are linear, yaw follows the shorter arc,
/// the hip's root-space rotation and every local rotation are slerped, and
/// joint positions come from forward kinematics of the result.
pub fn interpolate_pose(
    s: &Skeleton,
    a: &RootSpacePose,
    b: &RootSpacePose,
    t: f64,
) -> Result<RootSpacePose, DatasetError> {
    let (ra, rb) = (a.root(), b.root());
    let root = RootTransform {
        pos_xz: [
            ra.pos_xz[0] + (rb.pos_xz[0] - ra.pos_xz[0]) * t,
            ra.pos_xz[1] + (rb.pos_xz[1] - ra.pos_xz[1]) * t,
        ],
        yaw: ra.yaw + wrap_angle(rb.yaw - ra.yaw) * t,
    };
    let la = root_frame_local(s, a)?;
    let lb = root_frame_local(s, b)?;
    let mut pose = LocalPose {
        root_world_pos: la.root_world_pos.lerp(lb.root_world_pos, t),
        local_rot: Vec::with_capacity(s.joint_count()),
    };
    for (qa, qb) in la.local_rot.iter().zip(&lb.local_rot) {
        pose.local_rot.push(quat_slerp(*qa, *qb, t)?);
    }
    let w = forward_kinematics(s, &pose)?;
    Ok(RootSpacePose {
        root_pos_xz: root.pos_xz,
        root_yaw_cs: yaw_to_cs(root.yaw),
        joint_pos: w.positions,
        joint_rot: w
            .rotations
            .iter()
            .map(|q| Rot6D::from_matrix(&q.to_matrix()))
            .collect(),
    })
}

/// Local rotations of a root-space pose with the root frame as the world.
fn root_frame_local(s: &Skeleton, p: &RootSpacePose) -> Result<LocalPose, DatasetError> {
    let mut q = p.clone();
    q.set_root(&RootTransform::IDENTITY);
    Ok(root_space_to_local(s, &q)?)
}

/// Local pose in world coordinates from one unnormalised output row.
pub fn decode_output(
    s: &Skeleton,
    layout: &FeatureLayout,
    space: PoseSpace,
    row: &[f64],
    anchor: &RootTransform,
) -> Result<LocalPose, DatasetError> {
    let p = layout.read_output(row);
    match space {
        PoseSpace::Root => anchored_to_local(s, &p, anchor),
        PoseSpace::Local => {
            let hip: Mat3 = rot6d_to_matrix(p.joint_rot[0])?;
            let mut local_rot = Vec::with_capacity(s.joint_count());
            local_rot.push((anchor.rotation() * Quat::from_matrix(&hip)).normalize());
            for r in &p.joint_rot[1..] {
                local_rot.push(Quat::from_matrix(&rot6d_to_matrix(*r)?));
            }
            Ok(LocalPose {
                root_world_pos: anchor.apply_point(p.joint_pos[0]),
                local_rot,
            })
        }
    }
}

/// World local pose of an anchored root-space pose.
pub fn anchored_to_local(
    s: &Skeleton,
    p: &RootSpacePose,
    anchor: &RootTransform,
) -> Result<LocalPose, DatasetError> {
    let mut q = p.clone();
    q.set_root(&anchor.compose(&p.root()));
    Ok(root_space_to_local(s, &q)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::synth::{synth_clip, SynthStyle};

    fn prep(style: SynthStyle) -> PreparedClip {
        PreparedClip::new(&synth_clip(11, 5, 80, style).unwrap()).unwrap()
    }

    fn win(start: usize, m: usize) -> Window {
        Window { clip: 0, start, context: 10, missing: m }
    }

    #[test]
    fn widths_follow_joint_count() {
        assert_eq!(FeatureLayout::new(22, true).d_in(), 18 * 22 + 8);
        assert_eq!(FeatureLayout::new(22, true).d_out(), 202);
        assert_eq!(FeatureLayout::new(22, false).d_in(), 202);
        let l = FeatureLayout::new(5, true);
        assert_eq!(l.pose_columns().len(), l.d_out());
        assert_eq!(l.pose_columns().len() + l.velocity_columns().len(), l.d_in());
    }

    #[test]
    fn zero_fill_rows_are_exact_zeros() {
        let p = prep(SynthStyle::WalkCycle);
        for opts in [
            FeatureOptions::default(),
            FeatureOptions { use_velocity: false, ..Default::default() },
            FeatureOptions { pose_space: PoseSpace::Local, ..Default::default() },
        ] {
            let m = assemble_input(&p, &win(3, 3), &opts, None).unwrap();
            assert_eq!(m.cols(), p.layout(opts.use_velocity).d_in());
            for r in 10..13 {
                assert!(m.row(r).iter().all(|v| *v == 0.0));
            }
            assert!(m.row(9).iter().any(|v| *v != 0.0));
        }
    }

    #[test]
    fn target_row_pose_matches_output_and_velocity_is_zero() {
        let p = prep(SynthStyle::Turn);
        let w = win(5, 7);
        let x = assemble_input(&p, &w, &FeatureOptions::default(), None).unwrap();
        let y = assemble_target(&p, &w, PoseSpace::Root, None).unwrap();
        let l = p.layout(true);
        let last = w.len() - 1;
        for (o, i) in l.pose_columns().into_iter().enumerate() {
            assert_eq!(x.get(last, i), y.get(last, o));
        }
        for c in l.velocity_columns() {
            assert_eq!(x.get(last, c), 0.0);
        }
    }

    #[test]
    fn anchor_frame_sits_at_origin() {
        let p = prep(SynthStyle::Turn);
        let y = assemble_target(&p, &win(20, 5), PoseSpace::Root, None).unwrap();
        assert!(y.row(9)[0].abs() < 1e-12 && y.row(9)[1].abs() < 1e-12);
        assert!((y.row(9)[2] - 1.0).abs() < 1e-12 && y.row(9)[3].abs() < 1e-12);
    }

    #[test]
    fn context_velocities_use_frames_before_the_window() {
        let p = prep(SynthStyle::WalkCycle);
        let x = assemble_input(&p, &win(4, 5), &FeatureOptions::default(), None).unwrap();
        let lin = x.row(0)[4];
        let pos_diff = |a: usize, b: usize| {
            let anchor = p.root(13);
            (p.anchored(b, &anchor).root_pos_xz[0] - p.anchored(a, &anchor).root_pos_xz[0]) * p.fps
        };
        assert!((lin - pos_diff(3, 4)).abs() < 1e-9);
        let x0 = assemble_input(&p, &win(0, 5), &FeatureOptions::default(), None).unwrap();
        assert_eq!(x0.row(0)[4..8], x0.row(1)[4..8]);
    }

    #[test]
    fn slerp_fill_is_constant_for_a_static_pose() {
        let c = synth_clip(2, 5, 40, SynthStyle::Pendulum).unwrap();
        let mut frozen = c.clone();
        for f in &mut frozen.frames {
            *f = c.frames[0].clone();
        }
        let p = PreparedClip::new(&frozen).unwrap();
        let opts = FeatureOptions { fill: FillMode::Slerp, ..Default::default() };
        let x = assemble_input(&p, &win(0, 6), &opts, None).unwrap();
        let l = p.layout(true);
        for r in 10..16 {
            for c in l.pose_columns() {
                assert!((x.get(r, c) - x.get(9, c)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn slerp_midpoint_with_one_missing_frame() {
        let p = prep(SynthStyle::Turn);
        let w = win(8, 1);
        let opts = FeatureOptions { fill: FillMode::Slerp, ..Default::default() };
        let x = assemble_input(&p, &w, &opts, None).unwrap();
        let truth = assemble_target(&p, &w, PoseSpace::Root, None).unwrap();
        let l = p.layout(true);
        // Root xz at t = 1/2 is the average of its neighbours.
        for c in 0..2 {
            let mid = 0.5 * (truth.get(9, c) + truth.get(11, c));
            assert!((x.get(10, l.pose_columns()[c]) - mid).abs() < 1e-9);
        }
        // Smooth motion: the midpoint is close to the true frame.
        for (o, i) in l.pose_columns().into_iter().enumerate() {
            assert!((x.get(10, i) - truth.get(10, o)).abs() < 2.0, "column {o}");
        }
    }

    #[test]
    fn decode_inverts_output_features() {
        let c = synth_clip(5, 5, 60, SynthStyle::Turn).unwrap();
        let p = PreparedClip::new(&c).unwrap();
        let w = win(30, 9);
        let l = p.layout(false);
        let anchor = p.root(w.anchor_frame());
        for space in [PoseSpace::Root, PoseSpace::Local] {
            let y = assemble_target(&p, &w, space, None).unwrap();
            for r in 0..w.len() {
                let got = decode_output(&p.skeleton, &l, space, y.row(r), &anchor).unwrap();
                assert!(got.max_abs_diff(&c.frames[w.start + r]) < 1e-9, "{space:?} row {r}");
            }
        }
    }

    #[test]
    fn rejects_out_of_range_windows() {
        let p = prep(SynthStyle::Pendulum);
        assert!(assemble_input(&p, &win(75, 5), &FeatureOptions::default(), None).is_err());
        assert!("lerp".parse::<FillMode>().is_err());
        assert!("world".parse::<PoseSpace>().is_err());
    }
}
