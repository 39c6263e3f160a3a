//! One function per verb. Each returns the directory or file it produced.

use std::path::{Path, PathBuf};

use inbetween::dataset::{AnimationClip, PreparedClip, Window, write_bvh};
use inbetween::eval::{
    run_ablation, run_benchmark, AblationAxis, AblationSpec, BenchmarkConfig, Method,
    PositionStats, Predictor,
};
use inbetween::nn::{read_checkpoint, stats_hash, Checkpoint, ModelParams};
use inbetween::train::{train, write_loss_csv, LossRecord, TrainError, TrainHooks, TrainSet};
use sha2::{Digest, Sha256};

use crate::config::{hex, RunConfig};
use crate::data::{bvh_options, load_corpus, read_bvh, read_bvh_dir};
use crate::error::CliError;
use crate::run_dir::RunDir;

fn run_dir(cfg: &RunConfig, verb: &str, out: Option<PathBuf>) -> Result<RunDir, CliError> {
    match out {
        Some(p) => RunDir::at(p, verb, cfg),
        None => RunDir::create(&cfg.runs_dir, verb, cfg),
    }
}

/// Statistics a checkpoint trained under `cfg` must carry.
fn checkpoint_stats(
    cfg: &RunConfig,
    data: &TrainSet,
    positions: &PositionStats,
) -> Vec<(String, Vec<f64>)> {
    let mut stats = data.stats();
    stats.extend(extra_stats(cfg, positions));
    stats
}

fn extra_stats(cfg: &RunConfig, positions: &PositionStats) -> Vec<(String, Vec<f64>)> {
    let t = &cfg.train;
    vec![
        ("position_stats".into(), positions.to_stats()),
        (
            "window".into(),
            vec![t.context as f64, t.m_min as f64, t.m_max as f64],
        ),
    ]
}

struct Prepared {
    data: TrainSet,
    positions: PositionStats,
    test: Vec<AnimationClip>,
    description: String,
}

fn prepare(cfg: &RunConfig) -> Result<Prepared, CliError> {
    let corpus = load_corpus(cfg)?;
    let data = TrainSet::new(&corpus.train, &cfg.train, cfg.data.offset, cfg.feature_options()?)?;
    let positions = PositionStats::from_windows(&corpus.train, &data.windows)?;
    Ok(Prepared {
        data,
        positions,
        test: corpus.test,
        description: corpus.description,
    })
}

pub fn train_cmd(cfg: &RunConfig, out: Option<PathBuf>) -> Result<PathBuf, CliError> {
    let Prepared {
        data,
        positions,
        test,
        description,
    } = prepare(cfg)?;
    let window_len = cfg.train.context + cfg.train.m_max + 1;
    eprintln!(
        "windows: {} (offset {}, length {window_len})",
        data.windows.len(),
        cfg.data.offset
    );
    let layout = data.layout();
    let model = cfg.model_config(layout.d_in(), layout.d_out());
    let mut run = run_dir(cfg, "train", out)?;
    run.record("dataset", &description);
    run.record("windows", data.windows.len());
    run.record("offset", cfg.data.offset);
    run.record("seed", cfg.train.seed);
    run.record("stats_hash", stats_hash(&checkpoint_stats(cfg, &data, &positions)));
    run.write_manifest()?;

    let bench = BenchmarkConfig {
        lengths: vec![cfg.train.m_max],
        ..cfg.bench_config()
    };
    let mut validate = |p: &ModelParams<f32>| -> Result<f64, TrainError> {
        let predictor = Predictor::from_train_set(model.clone(), p.clone(), &data);
        let r = run_benchmark(&test, &bench, &positions, Some(&predictor))
            .map_err(|e| TrainError::Config(format!("validation: {e}")))?;
        Ok(r.row(Method::Model, cfg.train.m_max).map_or(f64::NAN, |r| r.l2p))
    };
    let every = (cfg.train.steps / 20).max(1);
    let mut progress = |r: &LossRecord| {
        if r.step % every == 0 || r.val_l2p.is_some() {
            let val = r.val_l2p.map(|v| format!(" val_l2p {v:.4}")).unwrap_or_default();
            eprintln!("step {:>6} lr {:.3e} train_l1 {:.5}{val}", r.step, r.lr, r.train_l1);
        }
    };
    let hooks = TrainHooks {
        out_dir: Some(&run.path),
        validate: if test.is_empty() { None } else { Some(&mut validate) },
        progress: Some(&mut progress),
        metadata: cfg.to_toml(),
        extra_stats: extra_stats(cfg, &positions),
    };
    let outcome = train(&cfg.train, &model, &data, hooks)?;
    write_loss_csv(&run.path.join("loss.csv"), &outcome.records)?;
    if let Some(r) = outcome.records.last() {
        run.record("final_train_l1", format!("{:.6}", r.train_l1));
    }
    if let Some((p, v)) = &outcome.best {
        run.record("best", format!("{} (val_l2p {v:.6})", p.display()));
    }
    run.write_manifest()?;
    println!("{}", run.path.display());
    Ok(run.path)
}

fn load_checkpoint(path: &Path) -> Result<(Checkpoint, RunConfig), CliError> {
    if !path.exists() {
        return Err(CliError::Usage(format!("checkpoint {} not found", path.display())));
    }
    let ck = read_checkpoint(path)?;
    let cfg: RunConfig = toml::from_str(&ck.metadata).map_err(|e| {
        CliError::Mismatch(format!("checkpoint carries no readable run config: {}", e.message()))
    })?;
    Ok((ck, cfg))
}

fn stat<'a>(ck: &'a Checkpoint, name: &str) -> Result<&'a [f64], CliError> {
    ck.stat(name)
        .ok_or_else(|| CliError::Mismatch(format!("checkpoint lacks '{name}' statistics")))
}

pub struct EvalArgs {
    pub checkpoint: PathBuf,
    /// Verifies the checkpoint against the statistics this config produces.
    pub config: Option<RunConfig>,
    pub data: Option<PathBuf>,
    pub lengths: Option<Vec<usize>>,
    pub offset: Option<usize>,
    pub out: Option<PathBuf>,
}

pub fn eval_cmd(args: EvalArgs) -> Result<PathBuf, CliError> {
    let (ck, embedded) = load_checkpoint(&args.checkpoint)?;
    let cfg = match args.config {
        Some(cfg) => {
            let p = prepare(&cfg)?;
            let expect = stats_hash(&checkpoint_stats(&cfg, &p.data, &p.positions));
            if expect != ck.stats_hash() {
                return Err(CliError::Mismatch(format!(
                    "checkpoint statistics {} differ from the config's dataset statistics {expect}",
                    ck.stats_hash()
                )));
            }
            cfg
        }
        None => embedded,
    };
    let predictor = Predictor::from_checkpoint(&ck)?;
    let positions = PositionStats::from_stats(stat(&ck, "position_stats")?)
        .ok_or_else(|| CliError::Mismatch("malformed position statistics".into()))?;
    let context = match stat(&ck, "window")? {
        [c, ..] if *c >= 1.0 => *c as usize,
        _ => return Err(CliError::Mismatch("malformed window statistics".into())),
    };
    let (clips, dataset) = match &args.data {
        Some(dir) => (read_bvh_dir(dir, &bvh_options(&cfg))?, format!("bvh {}", dir.display())),
        None => {
            let c = load_corpus(&cfg)?;
            (c.test, format!("{} (test split)", c.description))
        }
    };
    if clips.is_empty() {
        return Err(CliError::Usage("no evaluation clips; pass --data or set data.test_bvh_dir".into()));
    }
    let bench = BenchmarkConfig {
        context,
        lengths: args.lengths.unwrap_or_else(|| cfg.eval.lengths.clone()),
        offset: args.offset.unwrap_or(cfg.eval.offset),
    };
    let mut report = run_benchmark(&clips, &bench, &positions, Some(&predictor))?;
    report.metadata = vec![
        ("dataset".into(), dataset),
        ("checkpoint_step".into(), ck.step.to_string()),
        ("config_hash".into(), hex(&Sha256::digest(ck.metadata.as_bytes()))),
        ("stats_hash".into(), ck.stats_hash()),
        ("context".into(), context.to_string()),
        ("eval_offset".into(), bench.offset.to_string()),
    ];
    let mut run = run_dir(&cfg, "eval", args.out)?;
    run.record("checkpoint", args.checkpoint.display());
    run.record("stats_hash", ck.stats_hash());
    run.write_manifest()?;
    std::fs::write(run.path.join("report.csv"), report.to_csv())?;
    let table = report.to_table();
    std::fs::write(run.path.join("report.txt"), &table)?;
    print!("{table}");
    eprintln!("report written to {}", run.path.display());
    Ok(run.path)
}

pub struct GenerateArgs {
    pub checkpoint: PathBuf,
    pub context: PathBuf,
    pub context_start: usize,
    pub target: Option<PathBuf>,
    pub target_frame: Option<usize>,
    pub missing: usize,
    pub out: PathBuf,
}

/// Writes context, generated and target frames (`C + M + 1`) as one BVH clip.
pub fn generate_cmd(args: GenerateArgs) -> Result<PathBuf, CliError> {
    if args.missing == 0 {
        return Err(CliError::Usage("--missing must be at least 1".into()));
    }
    let (ck, cfg) = load_checkpoint(&args.checkpoint)?;
    let predictor = Predictor::from_checkpoint(&ck)?;
    let (context, trained_max) = match stat(&ck, "window")? {
        [c, _, m] if *c >= 1.0 => (*c as usize, *m as usize),
        _ => return Err(CliError::Mismatch("malformed window statistics".into())),
    };
    let opts = bvh_options(&cfg);
    let ctx = read_bvh(&args.context, &opts)?;
    let tgt = match &args.target {
        Some(p) => read_bvh(p, &opts)?,
        None => ctx.clone(),
    };
    let end = args.context_start + context;
    if end > ctx.len() {
        return Err(CliError::Usage(format!(
            "context needs frames {}..{end}, {} has {}",
            args.context_start,
            args.context.display(),
            ctx.len()
        )));
    }
    let t = args.target_frame.unwrap_or(tgt.len() - 1);
    if t >= tgt.len() {
        return Err(CliError::Usage(format!("target frame {t} outside a {}-frame clip", tgt.len())));
    }
    if tgt.joint_count() != ctx.joint_count() {
        return Err(CliError::Mismatch(format!(
            "context has {} joints, target has {}",
            ctx.joint_count(),
            tgt.joint_count()
        )));
    }
    if args.missing > trained_max || context + args.missing + 1 > ck.config.max_rel_dist + 1 {
        eprintln!(
            "warning: {} missing frames exceed the trained maximum {trained_max} or the relative-bias range {}; extrapolating",
            args.missing, ck.config.max_rel_dist
        );
    }
    let mut frames = ctx.frames[args.context_start..end].to_vec();
    frames.extend(std::iter::repeat(frames[context - 1].clone()).take(args.missing));
    frames.push(tgt.frames[t].clone());
    let mut clip = AnimationClip::new(ctx.name.clone(), ctx.skeleton.clone(), frames, ctx.fps)?;
    let prep = PreparedClip::new(&clip)?;
    let w = Window {
        clip: 0,
        start: 0,
        context,
        missing: args.missing,
    };
    let predicted = predictor.predict_window(&prep, &w)?;
    for r in w.missing_rows() {
        clip.frames[r] = predicted[r].clone();
    }
    std::fs::write(&args.out, write_bvh(&clip))?;
    eprintln!("wrote {} frames to {}", clip.len(), args.out.display());
    Ok(args.out)
}

pub fn ablate_cmd(
    cfg: &RunConfig,
    axis: &str,
    seeds: usize,
    out: Option<PathBuf>,
) -> Result<PathBuf, CliError> {
    let axis: AblationAxis = axis.parse()?;
    if seeds == 0 {
        return Err(CliError::Usage("--seeds must be at least 1".into()));
    }
    let corpus = load_corpus(cfg)?;
    if corpus.test.is_empty() {
        return Err(CliError::Usage("ablation needs a test split".into()));
    }
    let spec = AblationSpec {
        axis,
        seeds: (0..seeds as u64).map(|k| cfg.train.seed + k).collect(),
        train: cfg.train.clone(),
        model: cfg.model_config(0, 0),
        options: cfg.feature_options()?,
        offset: cfg.data.offset,
        bench: cfg.bench_config(),
    };
    let mut run = run_dir(cfg, &format!("ablate-{}", axis.name()), out)?;
    run.record("dataset", &corpus.description);
    run.record("axis", axis.name());
    run.record("seeds", format!("{:?}", spec.seeds));
    run.write_manifest()?;
    let report = run_ablation(&spec, &corpus.train, &corpus.test, &mut |line| eprintln!("{line}"))?;
    std::fs::write(run.path.join("runs.csv"), report.runs_csv())?;
    std::fs::write(run.path.join("deltas.csv"), report.delta_csv())?;
    let summary = report.summary();
    std::fs::write(run.path.join("summary.txt"), &summary)?;
    if axis == AblationAxis::Offset5Vs20 {
        let (a, b) = report.window_counts();
        run.record("windows", format!("offset5={a} offset20={b}"));
        run.write_manifest()?;
    }
    print!("{summary}");
    eprintln!("ablation written to {}", run.path.display());
    Ok(run.path)
}

/// Prints dataset statistics; `export` receives the training clips as BVH files.
pub fn inspect_cmd(cfg: &RunConfig, export: Option<&Path>) -> Result<(), CliError> {
    let corpus = load_corpus(cfg)?;
    if let Some(dir) = export {
        std::fs::create_dir_all(dir)?;
        for (i, c) in corpus.train.iter().enumerate() {
            std::fs::write(dir.join(format!("{i:03}-{}.bvh", c.name)), write_bvh(c))?;
        }
    }
    let t = &cfg.train;
    println!("dataset: {}", corpus.description);
    for (split, clips) in [("train", &corpus.train), ("test", &corpus.test)] {
        let frames: usize = clips.iter().map(AnimationClip::len).sum();
        let windows: usize = clips
            .iter()
            .enumerate()
            .map(|(i, c)| inbetween::dataset::slice_windows(i, c, t.context, t.m_max, cfg.data.offset).len())
            .sum();
        println!(
            "{split}: {} clips, {frames} frames, {windows} windows (length {}, offset {})",
            clips.len(),
            t.context + t.m_max + 1,
            cfg.data.offset
        );
    }
    if let Some(c) = corpus.train.first() {
        println!("joints: {} at {} fps", c.joint_count(), c.fps);
        for (i, name) in c.skeleton.joint_names().iter().enumerate() {
            let parent = c.skeleton.parent(i).map_or("-".to_string(), |p| p.to_string());
            println!("  {i:>3} {name} (parent {parent})");
        }
    }
    Ok(())
}
