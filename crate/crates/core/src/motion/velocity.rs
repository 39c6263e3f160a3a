use super::math::Vec3;
use super::root_space::{root_space_matrices, RootSpacePose};
use super::rotation::Rot6D;
use super::MotionError;

/// Velocity channels of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameVelocity {
    /// cm/s on the ground plane.
    pub root_lin: [f64; 2],
    /// Cosine and sine of the heading change since the previous frame.
    pub root_ang_cs: [f64; 2],
    /// cm/s in root space.
    pub joint_lin: Vec<Vec3>,
    /// Relative rotation `R_t · R_{t-1}ᵀ` per joint.
    pub joint_ang: Vec<Rot6D>,
}

impl FrameVelocity {
    pub fn zero(joints: usize) -> Self {
        Self {
            root_lin: [0.0; 2],
            root_ang_cs: [1.0, 0.0],
            joint_lin: vec![Vec3::ZERO; joints],
            joint_ang: vec![Rot6D::IDENTITY; joints],
        }
    }
}

/// Backward differences over a pose sequence; frame 0 copies frame 1.
pub fn finite_velocities(
    seq: &[RootSpacePose],
    fps: f64,
) -> Result<Vec<FrameVelocity>, MotionError> {
    if seq.len() < 2 {
        return Err(MotionError::SequenceTooShort {
            needed: 2,
            found: seq.len(),
        });
    }
    let mats = seq
        .iter()
        .map(root_space_matrices)
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = Vec::with_capacity(seq.len());
    for t in 1..seq.len() {
        let (prev, cur) = (&seq[t - 1], &seq[t]);
        let root_lin = [
            (cur.root_pos_xz[0] - prev.root_pos_xz[0]) * fps,
            (cur.root_pos_xz[1] - prev.root_pos_xz[1]) * fps,
        ];
        // (c, s) of yaw_t - yaw_{t-1}, via complex division.
        let [c1, s1] = cur.root_yaw_cs;
        let [c0, s0] = prev.root_yaw_cs;
        let (c, s) = (c1 * c0 + s1 * s0, s1 * c0 - c1 * s0);
        let n = c.hypot(s);
        let root_ang_cs = if n > 0.0 { [c / n, s / n] } else { [1.0, 0.0] };
        let joint_lin = cur
            .joint_pos
            .iter()
            .zip(&prev.joint_pos)
            .map(|(a, b)| (*a - *b).scale(fps))
            .collect();
        let joint_ang = mats[t]
            .iter()
            .zip(&mats[t - 1])
            .map(|(r1, r0)| Rot6D::from_matrix(&(*r1 * r0.transpose())))
            .collect();
        out.push(FrameVelocity {
            root_lin,
            root_ang_cs,
            joint_lin,
            joint_ang,
        });
    }
    out.insert(0, out[0].clone());
    Ok(out)
}
