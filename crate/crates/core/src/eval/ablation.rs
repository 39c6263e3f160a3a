//! Paired training runs that differ along exactly one axis.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::dataset::{slice_windows, AnimationClip, FeatureOptions, FillMode, PoseSpace};
use crate::nn::ModelConfig;
use crate::train::{train, TrainConfig, TrainHooks, TrainSet};

use super::benchmark::{run_benchmark, BenchmarkConfig, BenchmarkReport, Method};
use super::metrics::PositionStats;
use super::predict::Predictor;
use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AblationAxis {
    Offset5Vs20,
    RootVsLocal,
    VelocityOnOff,
    ZerosVsSlerp,
    KeyposOnOff,
}

impl AblationAxis {
    pub const ALL: [AblationAxis; 5] = [
        AblationAxis::Offset5Vs20,
        AblationAxis::RootVsLocal,
        AblationAxis::VelocityOnOff,
        AblationAxis::ZerosVsSlerp,
        AblationAxis::KeyposOnOff,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AblationAxis::Offset5Vs20 => "offset5_vs_20",
            AblationAxis::RootVsLocal => "root_vs_local",
            AblationAxis::VelocityOnOff => "velocity_on_off",
            AblationAxis::ZerosVsSlerp => "zeros_vs_slerp",
            AblationAxis::KeyposOnOff => "keypos_on_off",
        }
    }

    /// Names of the two arms; deltas are first minus second.
    pub fn arms(self) -> [&'static str; 2] {
        match self {
            AblationAxis::Offset5Vs20 => ["offset5", "offset20"],
            AblationAxis::RootVsLocal => ["root", "local"],
            AblationAxis::VelocityOnOff => ["velocity_on", "velocity_off"],
            AblationAxis::ZerosVsSlerp => ["zeros", "slerp"],
            AblationAxis::KeyposOnOff => ["keypos_on", "keypos_off"],
        }
    }

    fn apply(self, first: bool, spec: &AblationSpec) -> Arm {
        let mut arm = Arm {
            options: spec.options,
            offset: spec.offset,
            key_pos: spec.model.key_pos_embedding,
        };
        match self {
            AblationAxis::Offset5Vs20 => arm.offset = if first { 5 } else { 20 },
            AblationAxis::RootVsLocal => {
                arm.options.pose_space = if first { PoseSpace::Root } else { PoseSpace::Local }
            }
            AblationAxis::VelocityOnOff => arm.options.use_velocity = first,
            AblationAxis::ZerosVsSlerp => {
                arm.options.fill = if first { FillMode::Zeros } else { FillMode::Slerp }
            }
            AblationAxis::KeyposOnOff => arm.key_pos = first,
        }
        arm
    }
}

impl FromStr for AblationAxis {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| EvalError::UnknownAxis(s.into()))
    }
}

struct Arm {
    options: FeatureOptions,
    offset: usize,
    key_pos: bool,
}

/// Shared base settings; the axis overrides exactly one of them per arm.
#[derive(Debug, Clone)]
pub struct AblationSpec {
    pub axis: AblationAxis,
    pub seeds: Vec<u64>,
    pub train: TrainConfig,
    /// `d_in` and `d_out` are recomputed per arm.
    pub model: ModelConfig,
    pub options: FeatureOptions,
    /// Training window stride.
    pub offset: usize,
    pub bench: BenchmarkConfig,
}

#[derive(Debug, Clone)]
pub struct AblationRun {
    pub seed: u64,
    pub arm: &'static str,
    pub windows: usize,
    pub final_train_l1: f64,
    pub report: BenchmarkReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Delta {
    pub seed: u64,
    pub length: usize,
    pub metric: &'static str,
    pub first: f64,
    pub second: f64,
}

impl Delta {
    pub fn delta(&self) -> f64 {
        self.first - self.second
    }
}

#[derive(Debug, Clone)]
pub struct AblationReport {
    pub axis: AblationAxis,
    pub runs: Vec<AblationRun>,
    pub deltas: Vec<Delta>,
    /// `(length, metric, all seeds agree on the sign of the delta)`.
    pub sign_consistency: Vec<(usize, &'static str, bool)>,
    /// Key-position axis only: the first arm is worse on both L2P and L2Q
    /// (mean over seeds) at some length beyond the training maximum.
    pub degradation: Option<bool>,
}

impl AblationReport {
    /// Training window count of each arm for the first seed.
    pub fn window_counts(&self) -> (usize, usize) {
        let [a, b] = self.axis.arms();
        let count = |arm| self.runs.iter().find(|r| r.arm == arm).map_or(0, |r| r.windows);
        (count(a), count(b))
    }

    pub fn runs_csv(&self) -> String {
        let mut s = String::from("seed,arm,windows,final_train_l1,length,l2p,l2q,npss\n");
        for run in &self.runs {
            for r in run.report.rows.iter().filter(|r| r.method == Method::Model) {
                let _ = writeln!(
                    s,
                    "{},{},{},{:.6},{},{:.6},{:.6},{:.6}",
                    run.seed, run.arm, run.windows, run.final_train_l1, r.length, r.l2p, r.l2q, r.npss
                );
            }
        }
        s
    }

    /// Per-seed deltas, then a window-count line for the offset axis.
    pub fn delta_csv(&self) -> String {
        let [a, b] = self.axis.arms();
        let mut s = format!("seed,length,metric,{a},{b},delta\n");
        for d in &self.deltas {
            let _ = writeln!(
                s,
                "{},{},{},{:.6},{:.6},{:.6}",
                d.seed,
                d.length,
                d.metric,
                d.first,
                d.second,
                d.delta()
            );
        }
        if self.axis == AblationAxis::Offset5Vs20 {
            let (x, y) = self.window_counts();
            let _ = writeln!(s, "# windows {a}={x} {b}={y} ratio={:.3}", x as f64 / y.max(1) as f64);
        }
        s
    }

    pub fn summary(&self) -> String {
        let [a, b] = self.axis.arms();
        let mut s = format!("axis {} ({a} minus {b})\n", self.axis.name());
        for (length, metric, consistent) in &self.sign_consistency {
            let ds: Vec<f64> = self
                .deltas
                .iter()
                .filter(|d| d.length == *length && d.metric == *metric)
                .map(Delta::delta)
                .collect();
            let mean = ds.iter().sum::<f64>() / ds.len() as f64;
            let _ = writeln!(
                s,
                "length {length:>3} {metric:<4} mean delta {mean:+.4} sign {}",
                if *consistent { "consistent" } else { "mixed" }
            );
        }
        if let Some(flag) = self.degradation {
            let _ = writeln!(s, "extrapolation degradation: {}", if flag { "yes" } else { "no" });
        }
        s
    }
}

/// Trains and benchmarks both arms for every seed.
///
/// L2P statistics come from the training clips sliced at the base offset, so
/// both arms are scored on the same scale.
pub fn run_ablation(
    spec: &AblationSpec,
    train_clips: &[AnimationClip],
    test_clips: &[AnimationClip],
    log: &mut dyn FnMut(&str),
) -> Result<AblationReport, EvalError> {
    if spec.seeds.is_empty() {
        return Err(EvalError::Shape("ablation needs at least one seed".into()));
    }
    spec.train.validate()?;
    let stat_windows: Vec<_> = train_clips
        .iter()
        .enumerate()
        .flat_map(|(i, c)| slice_windows(i, c, spec.train.context, spec.train.m_max, spec.offset))
        .collect();
    let stats = PositionStats::from_windows(train_clips, &stat_windows)?;

    let mut runs = Vec::new();
    for &seed in &spec.seeds {
        for (k, name) in spec.axis.arms().into_iter().enumerate() {
            let arm = spec.axis.apply(k == 0, spec);
            let cfg = TrainConfig { seed, ..spec.train.clone() };
            let data = TrainSet::new(train_clips, &cfg, arm.offset, arm.options)?;
            let layout = data.layout();
            let model = ModelConfig {
                key_pos_embedding: arm.key_pos,
                d_in: layout.d_in(),
                d_out: layout.d_out(),
                ..spec.model.clone()
            };
            let out = train(&cfg, &model, &data, TrainHooks::default())?;
            let final_train_l1 = out.records.last().map_or(f64::NAN, |r| r.train_l1);
            let predictor = Predictor::from_train_set(model, out.params, &data);
            let report = run_benchmark(test_clips, &spec.bench, &stats, Some(&predictor))?;
            log(&format!(
                "seed {seed} arm {name}: {} windows, final train L1 {final_train_l1:.4}",
                data.windows.len()
            ));
            runs.push(AblationRun {
                seed,
                arm: name,
                windows: data.windows.len(),
                final_train_l1,
                report,
            });
        }
    }

    let metrics: [(&'static str, fn(&super::ReportRow) -> f64); 3] =
        [("l2p", |r| r.l2p), ("l2q", |r| r.l2q), ("npss", |r| r.npss)];
    let mut deltas = Vec::new();
    for pair in runs.chunks(2) {
        let (a, b) = (&pair[0], &pair[1]);
        for &length in &spec.bench.lengths {
            let (ra, rb) = (
                a.report.row(Method::Model, length).expect("benchmarked length"),
                b.report.row(Method::Model, length).expect("benchmarked length"),
            );
            for (metric, get) in &metrics {
                deltas.push(Delta {
                    seed: a.seed,
                    length,
                    metric,
                    first: get(ra),
                    second: get(rb),
                });
            }
        }
    }

    let mut sign_consistency = Vec::new();
    for &length in &spec.bench.lengths {
        for (metric, _) in &metrics {
            let signs: Vec<f64> = deltas
                .iter()
                .filter(|d| d.length == length && d.metric == *metric)
                .map(|d| d.delta().signum())
                .collect();
            sign_consistency.push((length, *metric, signs.iter().all(|s| *s == signs[0])));
        }
    }

    let degradation = (spec.axis == AblationAxis::KeyposOnOff).then(|| {
        let mean = |length: usize, metric: &str| {
            let ds: Vec<f64> = deltas
                .iter()
                .filter(|d| d.length == length && d.metric == metric)
                .map(Delta::delta)
                .collect();
            ds.iter().sum::<f64>() / ds.len() as f64
        };
        spec.bench
            .lengths
            .iter()
            .filter(|&&l| l > spec.train.m_max)
            .any(|&l| mean(l, "l2p") > 0.0 && mean(l, "l2q") > 0.0)
    });

    Ok(AblationReport {
        axis: spec.axis,
        runs,
        deltas,
        sign_consistency,
        degradation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_names_round_trip() {
        for a in AblationAxis::ALL {
            assert_eq!(a.name().parse::<AblationAxis>().unwrap(), a);
        }
        let err = "bogus".parse::<AblationAxis>().unwrap_err().to_string();
        assert!(err.contains("zeros_vs_slerp") && err.contains("bogus"));
    }
}
