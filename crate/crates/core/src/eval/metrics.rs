//! L2P, L2Q and NPSS over the missing frames of a transition.

use std::ops::Range;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::dataset::{AnimationClip, Window};
use crate::motion::{to_root_space, Quat, RootTransform};
use crate::tensor::Matrix;

use super::EvalError;

/// Frames scored by the metrics, with the frame whose root anchors positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub anchor: usize,
    pub missing: Range<usize>,
}

impl Transition {
    /// Window-local transition: `context` known frames then `missing` frames.
    pub fn new(context: usize, missing: usize) -> Self {
        Self {
            anchor: context - 1,
            missing: context..context + missing,
        }
    }
}

fn check(pred: &AnimationClip, gt: &AnimationClip, t: &Transition) -> Result<(), EvalError> {
    if pred.skeleton.parents() != gt.skeleton.parents()
        || pred.skeleton.rest_offsets() != gt.skeleton.rest_offsets()
    {
        return Err(EvalError::SkeletonMismatch(format!(
            "{} vs {} joints or differing hierarchy",
            pred.joint_count(),
            gt.joint_count()
        )));
    }
    let len = pred.len().min(gt.len());
    if t.missing.is_empty() || t.missing.end > len || t.anchor >= len {
        return Err(EvalError::Frames {
            start: t.missing.start,
            end: t.missing.end,
            len,
        });
    }
    Ok(())
}

/// Mean over missing frames of the L2 norm of all world-quaternion
/// differences, each prediction aligned to the ground-truth hemisphere.
pub fn l2q(pred: &AnimationClip, gt: &AnimationClip, t: &Transition) -> Result<f64, EvalError> {
    check(pred, gt, t)?;
    let mut total = 0.0;
    for f in t.missing.clone() {
        let (p, g) = (pred.world(f), gt.world(f));
        let sq: f64 = p
            .rotations
            .iter()
            .zip(&g.rotations)
            .map(|(a, b)| {
                let a = a.aligned_to(*b);
                (a.w - b.w).powi(2) + (a.x - b.x).powi(2) + (a.y - b.y).powi(2) + (a.z - b.z).powi(2)
            })
            .sum();
        total += sq.sqrt();
    }
    Ok(total / t.missing.len() as f64)
}

/// Per-dimension statistics of joint positions expressed in the window
/// anchor's root frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl PositionStats {
    /// Statistics over every frame of every `(clip, transition)` pair.
    pub fn fit<'a>(
        items: impl IntoIterator<Item = (&'a AnimationClip, Range<usize>, usize)>,
    ) -> Result<Self, EvalError> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (clip, frames, anchor) in items {
            let root = anchor_root(clip, anchor)?;
            for f in frames {
                rows.push(anchored_positions(clip, f, &root));
            }
        }
        let Some(first) = rows.first() else {
            return Err(EvalError::Stats { expected: 1, found: 0 });
        };
        let d = first.len();
        let n = rows.len() as f64;
        let mean: Vec<f64> = (0..d).map(|c| rows.iter().map(|r| r[c]).sum::<f64>() / n).collect();
        let std = (0..d)
            .map(|c| {
                let v = rows.iter().map(|r| (r[c] - mean[c]).powi(2)).sum::<f64>() / n;
                v.sqrt().max(1e-8)
            })
            .collect();
        Ok(Self { mean, std })
    }

    /// Statistics over every frame of `windows`, each anchored at its last context frame.
    pub fn from_windows(clips: &[AnimationClip], windows: &[Window]) -> Result<Self, EvalError> {
        Self::fit(
            windows
                .iter()
                .map(|w| (&clips[w.clip], w.start..w.start + w.len(), w.anchor_frame())),
        )
    }

    pub fn to_stats(&self) -> Vec<f64> {
        self.mean.iter().chain(&self.std).copied().collect()
    }

    pub fn from_stats(v: &[f64]) -> Option<Self> {
        (v.len() % 2 == 0).then(|| {
            let (m, s) = v.split_at(v.len() / 2);
            Self {
                mean: m.to_vec(),
                std: s.to_vec(),
            }
        })
    }
}

fn anchor_root(clip: &AnimationClip, anchor: usize) -> Result<RootTransform, EvalError> {
    Ok(to_root_space(&clip.skeleton, &clip.world(anchor))
        .map_err(|e| e.at_frame(anchor))?
        .root())
}

fn anchored_positions(clip: &AnimationClip, f: usize, root: &RootTransform) -> Vec<f64> {
    clip.world(f)
        .positions
        .iter()
        .flat_map(|p| root.inverse_point(*p).to_array())
        .collect()
}

/// Mean over missing frames of the L2 norm of standardised position differences.
///
/// Both clips are expressed in the ground-truth anchor's root frame.
pub fn l2p(
    pred: &AnimationClip,
    gt: &AnimationClip,
    t: &Transition,
    stats: &PositionStats,
) -> Result<f64, EvalError> {
    check(pred, gt, t)?;
    let d = 3 * gt.joint_count();
    if stats.mean.len() != d || stats.std.len() != d {
        return Err(EvalError::Stats {
            expected: d,
            found: stats.std.len(),
        });
    }
    let root = anchor_root(gt, t.anchor)?;
    let mut total = 0.0;
    for f in t.missing.clone() {
        let p = anchored_positions(pred, f, &root);
        let g = anchored_positions(gt, f, &root);
        let sq: f64 = (0..d)
            .map(|c| {
                let a = (p[c] - stats.mean[c]) / stats.std[c];
                let b = (g[c] - stats.mean[c]) / stats.std[c];
                (a - b).powi(2)
            })
            .sum();
        total += sq.sqrt();
    }
    Ok(total / t.missing.len() as f64)
}

/// World quaternions of `frames` as a `frames × 4J` matrix.
///
/// Ground truth is made sign-continuous in time; predictions are aligned
/// to `reference` frame by frame when given.
pub fn quaternion_features(
    clip: &AnimationClip,
    frames: &[usize],
    reference: Option<&Matrix<f64>>,
) -> Matrix<f64> {
    let j = clip.joint_count();
    let mut m = Matrix::zeros(frames.len(), 4 * j);
    let mut prev: Option<Vec<Quat>> = None;
    for (r, &f) in frames.iter().enumerate() {
        let mut qs = clip.world(f).rotations;
        for (i, q) in qs.iter_mut().enumerate() {
            let target = match (reference, &prev) {
                (Some(refm), _) => Some(Quat::new(
                    refm.get(r, 4 * i),
                    refm.get(r, 4 * i + 1),
                    refm.get(r, 4 * i + 2),
                    refm.get(r, 4 * i + 3),
                )),
                (None, Some(p)) => Some(p[i]),
                (None, None) => None,
            };
            if let Some(t) = target {
                *q = q.aligned_to(t);
            }
            m.row_mut(r)[4 * i..4 * i + 4].copy_from_slice(&q.to_array());
        }
        prev = Some(qs);
    }
    m
}

/// Power spectrum of one series, normalised to sum 1; all zeros when the
/// series has no power. Returns the spectrum and the raw total power.
fn normalized_power(planner: &mut FftPlanner<f64>, series: &[f64]) -> (Vec<f64>, f64) {
    let mut buf: Vec<Complex<f64>> = series.iter().map(|v| Complex::new(*v, 0.0)).collect();
    planner.plan_fft_forward(buf.len()).process(&mut buf);
    let power: Vec<f64> = buf.iter().map(|c| c.norm_sqr()).collect();
    let total: f64 = power.iter().sum();
    if total > 0.0 {
        (power.iter().map(|p| p / total).collect(), total)
    } else {
        (vec![0.0; power.len()], 0.0)
    }
}

/// Power-weighted earth mover's distance between per-feature normalised
/// power spectra; rows are time, columns features.
pub fn npss(pred: &Matrix<f64>, gt: &Matrix<f64>) -> Result<f64, EvalError> {
    npss_pooled(&[(pred.clone(), gt.clone())])
}

/// [`npss`] with weights pooled over several `(pred, gt)` pairs.
pub fn npss_pooled(pairs: &[(Matrix<f64>, Matrix<f64>)]) -> Result<f64, EvalError> {
    let mut planner = FftPlanner::new();
    let (mut weighted, mut weight) = (0.0, 0.0);
    for (p, g) in pairs {
        if p.shape() != g.shape() || p.rows() == 0 {
            return Err(EvalError::Shape(format!("{:?} vs {:?}", p.shape(), g.shape())));
        }
        for c in 0..g.cols() {
            let ps: Vec<f64> = (0..p.rows()).map(|r| p.get(r, c)).collect();
            let gs: Vec<f64> = (0..g.rows()).map(|r| g.get(r, c)).collect();
            let (gn, gp) = normalized_power(&mut planner, &gs);
            if gp == 0.0 {
                continue;
            }
            let (pn, _) = normalized_power(&mut planner, &ps);
            let (mut cp, mut cg, mut emd) = (0.0, 0.0, 0.0);
            for (a, b) in pn.iter().zip(&gn) {
                cp += a;
                cg += b;
                emd += (cp - cg).abs();
            }
            weighted += gp * emd;
            weight += gp;
        }
    }
    if weight == 0.0 {
        return Err(EvalError::ZeroPower);
    }
    Ok(weighted / weight)
}
