//! Fixed-length transition benchmark over held-out clips.

use std::fmt::Write as _;

use crate::dataset::{slice_windows, AnimationClip, PreparedClip, Window};
use crate::motion::LocalPose;
use crate::tensor::Matrix;

use super::metrics::{l2p, l2q, npss_pooled, quaternion_features, PositionStats, Transition};
use super::predict::{slerp_baseline, Predictor};
use super::EvalError;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub context: usize,
    pub lengths: Vec<usize>,
    /// Stride between evaluation windows.
    pub offset: usize,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            context: 10,
            lengths: vec![5, 15, 30, 45],
            offset: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    Slerp,
    Model,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Slerp => "slerp",
            Method::Model => "model",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub method: Method,
    pub length: usize,
    pub windows: usize,
    pub l2p: f64,
    pub l2q: f64,
    pub npss: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchmarkReport {
    pub rows: Vec<ReportRow>,
    pub metadata: Vec<(String, String)>,
}

impl BenchmarkReport {
    pub fn row(&self, method: Method, length: usize) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.length == length)
    }

    /// Metadata as `# key: value` lines, then one row per method and length.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.metadata {
            let _ = writeln!(s, "# {k}: {v}");
        }
        s.push_str("method,length,windows,l2p,l2q,npss\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{:.6},{:.6},{:.6}",
                r.method.name(),
                r.length,
                r.windows,
                r.l2p,
                r.l2q,
                r.npss
            );
        }
        s
    }

    /// One line per method; columns grouped by metric then length.
    pub fn to_table(&self) -> String {
        let mut lengths: Vec<usize> = self.rows.iter().map(|r| r.length).collect();
        lengths.sort_unstable();
        lengths.dedup();
        let mut methods: Vec<Method> = self.rows.iter().map(|r| r.method).collect();
        methods.sort_unstable();
        methods.dedup();
        let metrics: [(&str, fn(&ReportRow) -> f64); 3] =
            [("L2Q", |r| r.l2q), ("L2P", |r| r.l2p), ("NPSS", |r| r.npss)];

        let mut s = String::new();
        let _ = write!(s, "{:<8}", "");
        for (name, _) in &metrics {
            let _ = write!(s, "| {:<width$}", name, width = 9 * lengths.len());
        }
        s.push('\n');
        let _ = write!(s, "{:<8}", "length");
        for _ in &metrics {
            s.push_str("| ");
            for l in &lengths {
                let _ = write!(s, "{l:<9}");
            }
        }
        s.push('\n');
        for m in methods {
            let _ = write!(s, "{:<8}", m.name());
            for (_, get) in &metrics {
                s.push_str("| ");
                for l in &lengths {
                    match self.row(m, *l) {
                        Some(r) => {
                            let _ = write!(s, "{:<9.4}", get(r));
                        }
                        None => {
                            let _ = write!(s, "{:<9}", "-");
                        }
                    }
                }
            }
            s.push('\n');
        }
        s
    }
}

/// Ground-truth window clip and a copy with the missing frames replaced.
fn window_clips(
    clip: &AnimationClip,
    w: &Window,
    missing: Vec<LocalPose>,
) -> Result<(AnimationClip, AnimationClip), EvalError> {
    let frames = clip.frames[w.start..w.start + w.len()].to_vec();
    let gt = AnimationClip::new(clip.name.clone(), clip.skeleton.clone(), frames, clip.fps)?;
    let mut pred = gt.clone();
    for (k, p) in missing.into_iter().enumerate() {
        pred.frames[w.context + k] = p;
    }
    Ok((gt, pred))
}

#[derive(Default)]
struct Accumulator {
    windows: usize,
    l2p: f64,
    l2q: f64,
    spectra: Vec<(Matrix<f64>, Matrix<f64>)>,
}

impl Accumulator {
    fn add(
        &mut self,
        gt: &AnimationClip,
        pred: &AnimationClip,
        w: &Window,
        stats: &PositionStats,
    ) -> Result<(), EvalError> {
        let t = Transition::new(w.context, w.missing);
        self.l2p += l2p(pred, gt, &t, stats)?;
        self.l2q += l2q(pred, gt, &t)?;
        let span: Vec<usize> = (w.context - 1..=w.context + w.missing).collect();
        let g = quaternion_features(gt, &span, None);
        let p = quaternion_features(pred, &span, Some(&g));
        self.spectra.push((p, g));
        self.windows += 1;
        Ok(())
    }

    fn finish(self, method: Method, length: usize) -> Result<ReportRow, EvalError> {
        let n = self.windows as f64;
        Ok(ReportRow {
            method,
            length,
            windows: self.windows,
            l2p: self.l2p / n,
            l2q: self.l2q / n,
            npss: npss_pooled(&self.spectra)?,
        })
    }
}

/// SLERP rows and, when a model is given, model rows for every length.
///
/// Windows are sliced from each clip at `cfg.offset`; L2P and L2Q average
/// per-window means and NPSS pools spectra over all windows of a length.
pub fn run_benchmark(
    clips: &[AnimationClip],
    cfg: &BenchmarkConfig,
    stats: &PositionStats,
    model: Option<&Predictor>,
) -> Result<BenchmarkReport, EvalError> {
    let preps = clips
        .iter()
        .map(PreparedClip::new)
        .collect::<Result<Vec<_>, _>>()?;
    let mut report = BenchmarkReport::default();
    for &m in &cfg.lengths {
        let windows: Vec<Window> = clips
            .iter()
            .enumerate()
            .flat_map(|(i, c)| slice_windows(i, c, cfg.context, m, cfg.offset))
            .collect();
        if windows.is_empty() {
            return Err(EvalError::Frames {
                start: 0,
                end: cfg.context + m + 1,
                len: clips.iter().map(AnimationClip::len).max().unwrap_or(0),
            });
        }
        let mut slerp = Accumulator::default();
        let mut learned = Accumulator::default();
        for w in &windows {
            let (clip, prep) = (&clips[w.clip], &preps[w.clip]);
            let (gt, pred) = window_clips(clip, w, slerp_baseline(prep, w)?)?;
            slerp.add(&gt, &pred, w, stats)?;
            if let Some(model) = model {
                let all = model.predict_window(prep, w)?;
                let missing = all[w.missing_rows()].to_vec();
                let (gt, pred) = window_clips(clip, w, missing)?;
                learned.add(&gt, &pred, w, stats)?;
            }
        }
        report.rows.push(slerp.finish(Method::Slerp, m)?);
        if model.is_some() {
            report.rows.push(learned.finish(Method::Model, m)?);
        }
    }
    Ok(report)
}
