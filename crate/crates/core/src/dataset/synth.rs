//! Procedural clips: smooth sinusoidal joint motion over a drifting root.

use std::f64::consts::{PI, TAU};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::motion::{synthetic_layout, LocalPose, Quat, Skeleton, Vec3};

use super::clip::AnimationClip;
use super::DatasetError;

const FPS: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SynthStyle {
    WalkCycle,
    /// Fixed root; only joint 1 swings.
    Pendulum,
    Turn,
}

impl SynthStyle {
    pub const ALL: [SynthStyle; 3] = [SynthStyle::WalkCycle, SynthStyle::Turn, SynthStyle::Pendulum];

    pub fn name(self) -> &'static str {
        match self {
            SynthStyle::WalkCycle => "walk-cycle",
            SynthStyle::Pendulum => "pendulum",
            SynthStyle::Turn => "turn",
        }
    }
}

impl FromStr for SynthStyle {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "walk-cycle" => Ok(SynthStyle::WalkCycle),
            "pendulum" => Ok(SynthStyle::Pendulum),
            "turn" => Ok(SynthStyle::Turn),
            _ => Err(DatasetError::UnknownMode {
                kind: "synthetic style",
                value: s.into(),
                expected: "walk-cycle, pendulum, turn",
            }),
        }
    }
}

/// Gait phase with slowly modulated frequency; smooth in `t`.
struct Phase {
    f0: f64,
    depth: f64,
    fm: f64,
    psi: f64,
    phi0: f64,
}

impl Phase {
    fn sample(rng: &mut impl Rng) -> Self {
        Phase {
            f0: rng.gen_range(0.8..1.3),
            depth: 0.15,
            fm: rng.gen_range(0.05..0.15),
            psi: rng.gen_range(0.0..TAU),
            phi0: rng.gen_range(0.0..TAU),
        }
    }

    fn at(&self, t: f64) -> f64 {
        let w = TAU * self.fm;
        let drift = self.depth / w * ((w * t + self.psi).cos() - self.psi.cos());
        self.phi0 + TAU * self.f0 * (t - drift)
    }
}

struct JointWave {
    axis: Vec3,
    amp: f64,
    offset: f64,
    twist: f64,
}

/// Deterministic clip of `n` frames at 30 fps on [`Skeleton::synthetic`].
pub fn synth_clip(
    seed: u64,
    joints: usize,
    n: usize,
    style: SynthStyle,
) -> Result<AnimationClip, DatasetError> {
    let skeleton = Skeleton::synthetic(joints)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phase = Phase::sample(&mut rng);
    let waves: Vec<JointWave> = synthetic_layout(joints)
        .into_iter()
        .map(|(limb, depth)| {
            let side = match limb {
                0 => 0.0,
                1 => PI,
                _ => PI / 2.0,
            };
            JointWave {
                axis: Vec3::new(1.0, 0.0, rng.gen_range(-0.3..0.3)),
                amp: rng.gen_range(0.15..0.45),
                offset: side - 0.4 * depth as f64 + rng.gen_range(-0.2..0.2),
                twist: rng.gen_range(0.0..0.1),
            }
        })
        .collect();
    let theta0 = rng.gen_range(-PI..PI);
    let (speed, kappa, fh) = match style {
        SynthStyle::WalkCycle => (
            rng.gen_range(90.0..150.0),
            rng.gen_range(0.3..0.8),
            rng.gen_range(0.05..0.15),
        ),
        SynthStyle::Turn => (
            rng.gen_range(40.0..90.0),
            rng.gen_range(1.5..3.0),
            rng.gen_range(0.1..0.25),
        ),
        SynthStyle::Pendulum => (0.0, 0.0, 0.0),
    };
    let psi_h = rng.gen_range(0.0..TAU);
    let swing = rng.gen_range(0.3..0.6);
    let start = Vec3::new(rng.gen_range(-200.0..200.0), 0.0, rng.gen_range(-200.0..200.0));

    let mut pos = start;
    let mut frames = Vec::with_capacity(n);
    for f in 0..n {
        let t = f as f64 / FPS;
        let phi = phase.at(t);
        let heading = theta0 + kappa * ((TAU * fh * t + psi_h).sin() - psi_h.sin());
        let mut pose = LocalPose::identity(joints);
        match style {
            SynthStyle::Pendulum => {
                pose.root_world_pos = Vec3::new(start.x, 90.0, start.z);
                pose.local_rot[0] = Quat::from_yaw(theta0);
                pose.local_rot[1] = Quat::from_axis_angle(Vec3::X, swing * phi.sin());
            }
            SynthStyle::WalkCycle | SynthStyle::Turn => {
                pose.root_world_pos = Vec3::new(pos.x, 90.0 + 2.0 * (2.0 * phi).sin(), pos.z);
                pose.local_rot[0] = Quat::from_yaw(heading)
                    * Quat::from_axis_angle(Vec3::X, 0.05 * (2.0 * phi).sin())
                    * Quat::from_axis_angle(Vec3::Z, 0.05 * phi.sin());
                for (i, w) in waves.iter().enumerate().skip(1) {
                    pose.local_rot[i] = Quat::from_axis_angle(w.axis, w.amp * (phi + w.offset).sin())
                        * Quat::from_axis_angle(Vec3::Y, w.twist * (2.0 * phi + w.offset).sin());
                }
                let v = speed * (1.0 + 0.1 * (2.0 * phi).sin());
                pos = pos + Vec3::new(heading.sin(), 0.0, heading.cos()).scale(v / FPS);
            }
        }
        frames.push(pose);
    }
    AnimationClip::new(format!("synth-{}-{seed}", style.name()), skeleton, frames, FPS)
}

/// `count` clips cycling through the styles, with per-clip seeds drawn from `seed`.
pub fn synth_corpus(
    seed: u64,
    count: usize,
    joints: usize,
    frames: usize,
    styles: &[SynthStyle],
) -> Result<Vec<AnimationClip>, DatasetError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let styles = if styles.is_empty() { &SynthStyle::ALL[..] } else { styles };
    (0..count)
        .map(|i| synth_clip(rng.gen(), joints, frames, styles[i % styles.len()]))
        .collect()
}
