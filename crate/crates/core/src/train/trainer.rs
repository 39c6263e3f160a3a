use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{
    assemble_input, assemble_target, real_rows, slice_windows, AnimationClip, FeatureLayout,
    FeatureOptions, Normalizer, PreparedClip, Window,
};
use crate::nn::{
    encoder_forward, write_checkpoint, Checkpoint, ForwardOptions, Init, ModelConfig, ModelParams,
};
use crate::tensor::Matrix;

use super::loss::{l1_loss, l1_loss_rows};
use super::optim::{clip_global_norm, AdamW, OptimizerState};
use super::schedule::{noam_lr, sample_transition_length};
use super::TrainError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub steps: u64,
    pub batch_size: usize,
    pub warmup: u64,
    /// Multiplier on the noam schedule.
    pub lr_factor: f64,
    pub context: usize,
    pub m_min: usize,
    pub m_max: usize,
    pub optimizer: AdamW,
    /// Global gradient-norm cap; `0` disables clipping.
    pub grad_clip: f64,
    pub seed: u64,
    pub checkpoint_every: u64,
    pub keep_last: usize,
    /// Restrict the loss to missing frames.
    pub missing_only_loss: bool,
    pub normalize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 20_000,
            batch_size: 16,
            warmup: 200,
            lr_factor: 1.0,
            context: 10,
            m_min: 5,
            m_max: 30,
            optimizer: AdamW::default(),
            grad_clip: 1.0,
            seed: 0,
            checkpoint_every: 1000,
            keep_last: 3,
            missing_only_loss: false,
            normalize: true,
        }
    }
}

impl TrainConfig {
    /// Batch 64 and 4000 warmup steps.
    pub fn paper() -> Self {
        Self {
            batch_size: 64,
            warmup: 4000,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.into()));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.m_min == 0 || self.m_min > self.m_max {
            return bad("need 1 <= m_min <= m_max");
        }
        if self.context == 0 {
            return bad("context must be at least 1");
        }
        if self.steps == 0 || self.warmup == 0 || self.checkpoint_every == 0 {
            return bad("steps, warmup and checkpoint_every must be positive");
        }
        if !(self.lr_factor > 0.0) {
            return bad("lr_factor must be positive");
        }
        Ok(())
    }
}

/// Prepared clips, training windows and the fitted normalizers.
#[derive(Debug, Clone)]
pub struct TrainSet {
    pub clips: Vec<PreparedClip>,
    /// Sliced at the longest transition; shorter ones are cut from the end.
    pub windows: Vec<Window>,
    pub options: FeatureOptions,
    pub input_norm: Normalizer,
    pub output_norm: Normalizer,
}

impl TrainSet {
    pub fn new(
        clips: &[AnimationClip],
        cfg: &TrainConfig,
        offset: usize,
        options: FeatureOptions,
    ) -> Result<Self, TrainError> {
        let windows = clips
            .iter()
            .enumerate()
            .flat_map(|(i, c)| slice_windows(i, c, cfg.context, cfg.m_max, offset))
            .collect();
        Self::from_windows(clips, windows, options, cfg.normalize)
    }

    pub fn from_windows(
        clips: &[AnimationClip],
        windows: Vec<Window>,
        options: FeatureOptions,
        normalize: bool,
    ) -> Result<Self, TrainError> {
        if windows.is_empty() {
            return Err(TrainError::Config("no training windows".into()));
        }
        let clips = clips
            .iter()
            .map(PreparedClip::new)
            .collect::<Result<Vec<_>, _>>()?;
        let layout = clips[0].layout(options.use_velocity);
        let input_norm = if normalize {
            let mut rows = Vec::new();
            for w in &windows {
                let m = real_rows(&clips[w.clip], w, &options)?;
                for r in (0..w.context).chain([w.len() - 1]) {
                    rows.push(m.row(r).to_vec());
                }
            }
            Normalizer::fit(rows.iter().map(|r| r.as_slice()))?
        } else {
            Normalizer::identity(layout.d_in())
        };
        let output_norm = input_norm.select(&layout.pose_columns());
        Ok(Self {
            clips,
            windows,
            options,
            input_norm,
            output_norm,
        })
    }

    pub fn layout(&self) -> FeatureLayout {
        self.clips[0].layout(self.options.use_velocity)
    }

    /// Normalised input and target for one window.
    pub fn example(&self, w: &Window) -> Result<(Matrix<f32>, Matrix<f32>), TrainError> {
        let prep = &self.clips[w.clip];
        let x = assemble_input(prep, w, &self.options, Some(&self.input_norm))?;
        let y = assemble_target(prep, w, self.options.pose_space, Some(&self.output_norm))?;
        Ok((x.cast(), y.cast()))
    }

    /// Statistics stored with checkpoints.
    pub fn stats(&self) -> Vec<(String, Vec<f64>)> {
        vec![
            ("input_norm".into(), self.input_norm.to_stats()),
            ("feature_options".into(), self.options.to_stats()),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossRecord {
    pub step: u64,
    pub lr: f64,
    /// Batch loss before this step's update; step 1 reports the untrained model.
    pub train_l1: f64,
    pub val_l2p: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams<f32>,
    pub records: Vec<LossRecord>,
    /// Periodic checkpoints still on disk, oldest first.
    pub checkpoints: Vec<PathBuf>,
    pub best: Option<(PathBuf, f64)>,
    pub final_checkpoint: Option<PathBuf>,
}

/// Optional side channels of [`train`].
#[derive(Default)]
pub struct TrainHooks<'a> {
    pub out_dir: Option<&'a Path>,
    /// Called at every checkpoint step; returns validation L2P.
    pub validate: Option<&'a mut dyn FnMut(&ModelParams<f32>) -> Result<f64, TrainError>>,
    pub progress: Option<&'a mut dyn FnMut(&LossRecord)>,
    /// Stored verbatim in checkpoints.
    pub metadata: String,
    /// Extra statistics stored in checkpoints next to the normalizer.
    pub extra_stats: Vec<(String, Vec<f64>)>,
}

/// Deterministic for a fixed config and data set.
pub fn train(
    cfg: &TrainConfig,
    model: &ModelConfig,
    data: &TrainSet,
    mut hooks: TrainHooks<'_>,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    model.validate()?;
    let layout = data.layout();
    if model.d_in != layout.d_in() || model.d_out != layout.d_out() {
        return Err(TrainError::Shape(format!(
            "model is {}→{}, features are {}→{}",
            model.d_in,
            model.d_out,
            layout.d_in(),
            layout.d_out()
        )));
    }
    if let Some(w) = data.windows.iter().find(|w| w.missing < cfg.m_max || w.context != cfg.context) {
        return Err(TrainError::Config(format!(
            "window C={} M={} cannot serve C={} M<={}",
            w.context, w.missing, cfg.context, cfg.m_max
        )));
    }
    if let Some(dir) = hooks.out_dir {
        std::fs::create_dir_all(dir)?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut drop_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_d40f);
    let mut params: ModelParams<f32> = ModelParams::init(model, &mut rng, Init::Training)?;
    let mut state = OptimizerState::new(&params);
    let mut order: Vec<usize> = (0..data.windows.len()).collect();
    order.shuffle(&mut rng);
    let mut cursor = 0;

    let mut stats = data.stats();
    stats.extend(hooks.extra_stats.iter().cloned());
    let mut records = Vec::with_capacity(cfg.steps as usize);
    let mut checkpoints: Vec<PathBuf> = Vec::new();
    let mut best: Option<(PathBuf, f64)> = None;
    let mut last_good: Option<PathBuf> = None;
    let batch = cfg.batch_size as f32;

    for step in 1..=cfg.steps {
        let m = sample_transition_length(&mut rng, cfg.m_min, cfg.m_max);
        let mut grads: Option<Vec<Matrix<f32>>> = None;
        let mut loss = 0.0;
        for _ in 0..cfg.batch_size {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            let w = data.windows[order[cursor]].truncated(m);
            cursor += 1;
            let (x, y) = data.example(&w)?;
            let opts = ForwardOptions {
                context: Some(w.context),
                dropout_rng: Some(&mut drop_rng),
            };
            let mut fwd = encoder_forward(&x, model, &params, opts)?;
            let (l, mut g) = if cfg.missing_only_loss {
                l1_loss_rows(fwd.value(), &y, w.missing_rows())?
            } else {
                l1_loss(fwd.value(), &y)?
            };
            loss += l;
            g.scale_in_place(1.0 / batch);
            let gw = fwd.backward(g)?;
            match &mut grads {
                None => grads = Some(gw),
                Some(acc) => acc.iter_mut().zip(&gw).for_each(|(a, b)| a.add_assign(b)),
            }
        }
        let loss = loss / cfg.batch_size as f64;
        if !loss.is_finite() {
            return Err(TrainError::NonFiniteLoss {
                step,
                last_checkpoint: last_good,
            });
        }
        let mut grads = grads.expect("batch_size >= 1");
        if cfg.grad_clip > 0.0 {
            clip_global_norm(&mut grads, cfg.grad_clip);
        }
        let lr = cfg.lr_factor * noam_lr(step, model.d_model, cfg.warmup)?;
        cfg.optimizer.step(&mut params, &grads, &mut state, lr)?;

        let mut rec = LossRecord {
            step,
            lr,
            train_l1: loss,
            val_l2p: None,
        };
        if step % cfg.checkpoint_every == 0 || step == cfg.steps {
            if let Some(v) = hooks.validate.as_mut() {
                rec.val_l2p = Some(v(&params)?);
            }
            if let Some(dir) = hooks.out_dir {
                let ck = Checkpoint {
                    config: model.clone(),
                    params: params.clone(),
                    step,
                    metadata: hooks.metadata.clone(),
                    stats: stats.clone(),
                };
                let path = dir.join(format!("step-{step:08}.mibc"));
                write_checkpoint(&path, &ck)?;
                checkpoints.push(path.clone());
                while checkpoints.len() > cfg.keep_last.max(1) {
                    std::fs::remove_file(checkpoints.remove(0))?;
                }
                if let Some(v) = rec.val_l2p {
                    if best.as_ref().map_or(true, |(_, b)| v < *b) {
                        let bp = dir.join("best.mibc");
                        write_checkpoint(&bp, &ck)?;
                        best = Some((bp, v));
                    }
                }
                last_good = Some(path);
            }
        }
        if let Some(p) = hooks.progress.as_mut() {
            p(&rec);
        }
        records.push(rec);
    }

    let final_checkpoint = match hooks.out_dir {
        Some(dir) => {
            let path = dir.join("final.mibc");
            write_checkpoint(
                &path,
                &Checkpoint {
                    config: model.clone(),
                    params: params.clone(),
                    step: cfg.steps,
                    metadata: hooks.metadata.clone(),
                    stats,
                },
            )?;
            Some(path)
        }
        None => None,
    };
    Ok(TrainOutcome {
        params,
        records,
        checkpoints,
        best,
        final_checkpoint,
    })
}

/// `step,lr,train_l1,val_l2p`; validation is blank between checkpoints.
pub fn write_loss_csv(path: &Path, records: &[LossRecord]) -> Result<(), TrainError> {
    let mut s = String::from("step,lr,train_l1,val_l2p\n");
    for r in records {
        let val = r.val_l2p.map(|v| format!("{v:.9e}")).unwrap_or_default();
        let _ = writeln!(s, "{},{:.9e},{:.9e},{}", r.step, r.lr, r.train_l1, val);
    }
    std::fs::write(path, s)?;
    Ok(())
}

pub fn read_loss_csv(path: &Path) -> Result<Vec<LossRecord>, TrainError> {
    let text = std::fs::read_to_string(path)?;
    let bad = |i: usize| TrainError::Config(format!("{}: malformed line {}", path.display(), i + 1));
    text.lines()
        .enumerate()
        .skip(1)
        .map(|(i, l)| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 4 {
                return Err(bad(i));
            }
            Ok(LossRecord {
                step: f[0].parse().map_err(|_| bad(i))?,
                lr: f[1].parse().map_err(|_| bad(i))?,
                train_l1: f[2].parse().map_err(|_| bad(i))?,
                val_l2p: if f[3].is_empty() {
                    None
                } else {
                    Some(f[3].parse().map_err(|_| bad(i))?)
                },
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synth_corpus, SynthStyle};

    fn small_run(steps: u64, seed: u64) -> (TrainConfig, ModelConfig, TrainSet) {
        let clips = synth_corpus(1, 2, 4, 60, &[SynthStyle::WalkCycle]).unwrap();
        let cfg = TrainConfig {
            steps,
            batch_size: 2,
            warmup: 10,
            m_min: 2,
            m_max: 6,
            context: 4,
            seed,
            checkpoint_every: 3,
            keep_last: 2,
            ..Default::default()
        };
        let data = TrainSet::new(&clips, &cfg, 10, FeatureOptions::default()).unwrap();
        let l = data.layout();
        let model = ModelConfig { d_model: 16, d_ff: 32, heads: 2, max_rel_dist: 8, ..ModelConfig::tiny(l.d_in(), l.d_out()) };
        (cfg, model, data)
    }

    #[test]
    fn first_loss_is_mean_abs_target() {
        let (cfg, model, data) = small_run(1, 0);
        let out = train(&cfg, &model, &data, TrainHooks::default()).unwrap();
        // Replay the first batch.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let _: ModelParams<f32> = ModelParams::init(&model, &mut rng, Init::Training).unwrap();
        let mut order: Vec<usize> = (0..data.windows.len()).collect();
        order.shuffle(&mut rng);
        let m = sample_transition_length(&mut rng, cfg.m_min, cfg.m_max);
        let want: f64 = order[..2]
            .iter()
            .map(|i| {
                let (_, y) = data.example(&data.windows[*i].truncated(m)).unwrap();
                y.as_slice().iter().map(|v| v.abs() as f64).sum::<f64>() / y.len() as f64
            })
            .sum::<f64>()
            / 2.0;
        assert!((out.records[0].train_l1 - want).abs() < 1e-6);
    }

    #[test]
    fn seeded_runs_repeat_and_checkpoints_rotate() {
        let dir = tempfile::tempdir().unwrap();
        let (cfg, model, data) = small_run(10, 4);
        let mut calls = 0;
        let mut val = |_: &ModelParams<f32>| {
            calls += 1;
            Ok(1.0 / calls as f64)
        };
        let hooks = TrainHooks { out_dir: Some(dir.path()), validate: Some(&mut val), ..Default::default() };
        let a = train(&cfg, &model, &data, hooks).unwrap();
        let b = train(&cfg, &model, &data, TrainHooks::default()).unwrap();
        let strip = |r: &[LossRecord]| r.iter().map(|r| (r.step, r.lr, r.train_l1)).collect::<Vec<_>>();
        assert_eq!(strip(&a.records), strip(&b.records));
        assert_eq!(a.params, b.params);
        let names: Vec<_> = a.checkpoints.iter().map(|p| p.file_name().unwrap().to_str().unwrap().to_string()).collect();
        assert_eq!(names, ["step-00000009.mibc", "step-00000010.mibc"]);
        assert!(!dir.path().join("step-00000003.mibc").exists());
        assert!(a.best.unwrap().0.exists() && a.final_checkpoint.unwrap().exists());
        assert_eq!(a.records.iter().filter(|r| r.val_l2p.is_some()).count(), 4);

        let csv = dir.path().join("loss.csv");
        write_loss_csv(&csv, &a.records).unwrap();
        let back = read_loss_csv(&csv).unwrap();
        assert_eq!(back.len(), 10);
        assert_eq!(back[2].val_l2p.is_some(), a.records[2].val_l2p.is_some());
    }

    #[test]
    fn loss_decreases_on_a_tiny_problem() {
        let (mut cfg, model, data) = small_run(150, 1);
        cfg.warmup = 20;
        let out = train(&cfg, &model, &data, TrainHooks::default()).unwrap();
        let head: f64 = out.records[..10].iter().map(|r| r.train_l1).sum::<f64>() / 10.0;
        let tail: f64 = out.records[140..].iter().map(|r| r.train_l1).sum::<f64>() / 10.0;
        assert!(tail < 0.7 * head, "{head} -> {tail}");
    }

    #[test]
    fn rejects_inconsistent_setups() {
        let (mut cfg, model, data) = small_run(1, 0);
        cfg.m_min = 7;
        assert!(matches!(train(&cfg, &model, &data, TrainHooks::default()), Err(TrainError::Config(_))));
        let (cfg, mut model, data) = small_run(1, 0);
        model.d_in += 1;
        assert!(matches!(train(&cfg, &model, &data, TrainHooks::default()), Err(TrainError::Shape(_))));
    }
}
