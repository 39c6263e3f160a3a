//! Continuous 6D rotation encoding and quaternion interpolation.

use super::math::{Mat3, Quat, Vec3};
use super::MotionError;

/// First two columns of a rotation matrix.
///
/// The encoding is continuous over SO(3); the third column is recovered by
/// Gram–Schmidt orthogonalisation in [`rot6d_to_matrix`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rot6D {
    pub a1: Vec3,
    pub a2: Vec3,
}

impl Rot6D {
    pub const IDENTITY: Rot6D = Rot6D {
        a1: Vec3::X,
        a2: Vec3::Y,
    };

    pub fn from_matrix(m: &Mat3) -> Rot6D {
        Rot6D {
            a1: m.col(0),
            a2: m.col(1),
        }
    }

    pub fn to_array(self) -> [f64; 6] {
        [
            self.a1.x, self.a1.y, self.a1.z, self.a2.x, self.a2.y, self.a2.z,
        ]
    }

    pub fn from_slice(s: &[f64]) -> Rot6D {
        Rot6D {
            a1: Vec3::from_slice(&s[0..3]),
            a2: Vec3::from_slice(&s[3..6]),
        }
    }

    pub fn to_quat(self) -> Result<Quat, MotionError> {
        Ok(Quat::from_matrix(&rot6d_to_matrix(self)?))
    }

    pub fn max_abs_diff(self, o: Rot6D) -> f64 {
        self.a1.max_abs_diff(o.a1).max(self.a2.max_abs_diff(o.a2))
    }
}

pub fn rot6d_from_quat(q: Quat) -> Result<Rot6D, MotionError> {
    if !q.is_finite() {
        return Err(MotionError::NonFinite("quaternion"));
    }
    Ok(Rot6D::from_matrix(&q.to_matrix()))
}

/// Which input column made the Gram–Schmidt reconstruction degenerate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rot6DColumn {
    First,
    Second,
}

const DEGENERATE_TOL: f64 = 1e-12;

pub fn rot6d_to_matrix(r: Rot6D) -> Result<Mat3, MotionError> {
    if !r.a1.is_finite() || !r.a2.is_finite() {
        return Err(MotionError::NonFinite("6D rotation"));
    }
    let n1 = r.a1.norm();
    if n1 < DEGENERATE_TOL {
        return Err(MotionError::DegenerateRot6D(Rot6DColumn::First));
    }
    let b1 = r.a1.scale(1.0 / n1);
    let u2 = r.a2 - b1.scale(b1.dot(r.a2));
    let n2 = u2.norm();
    if n2 < DEGENERATE_TOL * r.a2.norm().max(1.0) {
        return Err(MotionError::DegenerateRot6D(Rot6DColumn::Second));
    }
    let b2 = u2.scale(1.0 / n2);
    let b3 = b1.cross(b2);
    Ok(Mat3::from_cols(b1, b2, b3))
}

/// Spherical linear interpolation along the shorter arc.
///
/// `q1` is flipped into the hemisphere of `q0` first, so `q1 = -q0` yields
/// `q0` for every `t`. Endpoints are returned exactly.
pub fn quat_slerp(q0: Quat, q1: Quat, t: f64) -> Result<Quat, MotionError> {
    if !q0.is_finite() || !q1.is_finite() || !t.is_finite() {
        return Err(MotionError::NonFinite("slerp input"));
    }
    if t <= 0.0 {
        return Ok(q0);
    }
    let q1 = q1.aligned_to(q0);
    if t >= 1.0 {
        return Ok(q1);
    }
    let cos = q0.dot(q1).clamp(-1.0, 1.0);
    let (k0, k1) = if cos > 1.0 - 1e-10 {
        (1.0 - t, t)
    } else {
        let theta = cos.acos();
        let s = theta.sin();
        (((1.0 - t) * theta).sin() / s, (t * theta).sin() / s)
    };
    Ok(Quat::new(
        k0 * q0.w + k1 * q1.w,
        k0 * q0.x + k1 * q1.x,
        k0 * q0.y + k1 * q1.y,
        k0 * q0.z + k1 * q1.z,
    )
    .normalize())
}
