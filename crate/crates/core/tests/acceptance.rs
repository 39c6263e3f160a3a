//! Acceptance criteria 1 to 10, one PASS/FAIL line each.

use std::time::Instant;

use inbetween::dataset::{
    slice_windows, synth_clip, synth_corpus, AnimationClip, FeatureOptions, FillMode, SynthStyle,
};
use inbetween::eval::{
    npss, run_ablation, run_benchmark, AblationAxis, AblationSpec, BenchmarkConfig,
    BenchmarkReport, Method, PositionStats, Predictor,
};
use inbetween::motion::{
    forward_kinematics, root_space_to_local, to_root_space, LocalPose, Quat, Skeleton, Vec3,
};
use inbetween::nn::{grad_check, grad_check_linear, predict, ModelConfig};
use inbetween::tensor::Matrix;
use inbetween::train::{l1_loss, train, write_loss_csv, TrainConfig, TrainHooks, TrainSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = Result<String, String>;

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c1_gradients() -> Verdict {
    let cfg = ModelConfig::tiny(18 * 8 + 8, 9 * 8 + 4);
    let mut worst: f64 = 0.0;
    for seed in [1, 2, 3] {
        let r = grad_check(&cfg, seed, 12, 1e-5, 4).map_err(|e| e.to_string())?;
        worst = worst.max(r.max_rel_error);
    }
    let lin = grad_check_linear(20, 16, 12, 9, 4, 1e-3).max_rel_error;
    check(
        worst < 1e-4 && lin < 1e-8,
        format!("encoder max rel err {worst:.2e}, linear {lin:.2e}"),
    )
}

fn random_quat(rng: &mut impl Rng) -> Quat {
    loop {
        let q = Quat::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let n = q.norm();
        if n > 0.1 && n <= 1.0 {
            return q.normalize();
        }
    }
}

fn c2_kinematics() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for j in [2, 5, 22] {
        let s = Skeleton::synthetic(j).map_err(|e| e.to_string())?;
        for _ in 0..1000 {
            let pose = LocalPose {
                root_world_pos: Vec3::new(
                    rng.gen_range(-500.0..500.0),
                    rng.gen_range(0.0..200.0),
                    rng.gen_range(-500.0..500.0),
                ),
                local_rot: (0..j).map(|_| random_quat(&mut rng)).collect(),
            };
            let back = forward_kinematics(&s, &pose)
                .and_then(|w| to_root_space(&s, &w))
                .and_then(|r| root_space_to_local(&s, &r))
                .map_err(|e| e.to_string())?;
            worst = worst.max(back.max_abs_diff(&pose));
        }
    }
    check(worst < 1e-6, format!("max abs error {worst:.2e} over 3000 poses"))
}

fn c3_overfit() -> Verdict {
    let clips = synth_corpus(7, 8, 8, 200, &[]).map_err(|e| e.to_string())?;
    let cfg = TrainConfig {
        steps: 2000,
        batch_size: 8,
        m_min: 30,
        m_max: 30,
        lr_factor: 0.35,
        warmup: 50,
        seed: 1,
        ..TrainConfig::default()
    };
    let opts = FeatureOptions::default();
    let all = TrainSet::new(&clips, &cfg, 20, opts).map_err(|e| e.to_string())?;
    let picked: Vec<_> = all
        .windows
        .iter()
        .step_by(all.windows.len() / 8)
        .take(8)
        .cloned()
        .collect();
    let data = TrainSet::from_windows(&clips, picked, opts, true).map_err(|e| e.to_string())?;
    let layout = data.layout();
    let model = ModelConfig::tiny(layout.d_in(), layout.d_out());
    let out = train(&cfg, &model, &data, TrainHooks::default()).map_err(|e| e.to_string())?;

    let mut total = 0.0;
    for w in &data.windows {
        let (x, y) = data.example(w).map_err(|e| e.to_string())?;
        let p = predict(&x, w.context, &model, &out.params).map_err(|e| e.to_string())?;
        total += l1_loss(&p, &y).map_err(|e| e.to_string())?.0;
    }
    let l1 = total / data.windows.len() as f64;
    let medians: Vec<f64> = out
        .records
        .chunks(200)
        .map(|c| {
            let mut v: Vec<f64> = c.iter().map(|r| r.train_l1).collect();
            v.sort_by(f64::total_cmp);
            v[v.len() / 2]
        })
        .collect();
    let monotone = medians.windows(2).all(|m| m[1] <= m[0]);
    check(
        l1 < 1e-2 && monotone,
        format!(
            "final L1 {l1:.5}, 200-step medians {}",
            medians.iter().map(|m| format!("{m:.4}")).collect::<Vec<_>>().join(" ")
        ),
    )
}

/// Criterion 4 training run; criterion 5 reuses its report.
fn long_run() -> Result<BenchmarkReport, String> {
    let clips = synth_corpus(100, 50, 8, 240, &[]).map_err(|e| e.to_string())?;
    let test = synth_corpus(9999, 10, 8, 240, &[]).map_err(|e| e.to_string())?;
    let cfg = TrainConfig::default();
    let data = TrainSet::new(&clips, &cfg, 20, FeatureOptions::default()).map_err(|e| e.to_string())?;
    let layout = data.layout();
    let model = ModelConfig::tiny(layout.d_in(), layout.d_out());
    let out = train(&cfg, &model, &data, TrainHooks::default()).map_err(|e| e.to_string())?;
    let stats = PositionStats::from_windows(&clips, &data.windows).map_err(|e| e.to_string())?;
    let predictor = Predictor::from_train_set(model, out.params, &data);
    run_benchmark(&test, &BenchmarkConfig::default(), &stats, Some(&predictor)).map_err(|e| e.to_string())
}

fn rows(r: &BenchmarkReport, length: usize) -> Result<(f64, f64, f64, f64), String> {
    let s = r.row(Method::Slerp, length).ok_or("missing slerp row")?;
    let m = r.row(Method::Model, length).ok_or("missing model row")?;
    Ok((m.l2p, s.l2p, m.l2q, s.l2q))
}

fn c4_beats_slerp(r: &Result<BenchmarkReport, String>) -> Verdict {
    let r = r.as_ref().map_err(Clone::clone)?;
    let (mp, sp, mq, sq) = rows(r, 30)?;
    check(
        mp <= 0.8 * sp && mq <= 0.8 * sq,
        format!("length 30: L2P {mp:.3} vs slerp {sp:.3} ({:.2}x), L2Q {mq:.3} vs {sq:.3} ({:.2}x)", mp / sp, mq / sq),
    )
}

fn c5_extrapolation(r: &Result<BenchmarkReport, String>) -> Verdict {
    let r = r.as_ref().map_err(Clone::clone)?;
    let m45 = r.row(Method::Model, 45).ok_or("missing model row at 45")?;
    let m30 = r.row(Method::Model, 30).ok_or("missing model row at 30")?;
    let finite = [m45.l2p, m45.l2q, m45.npss].iter().all(|v| v.is_finite());
    let ratio = m45.l2p / m30.l2p;
    check(
        finite && ratio <= 2.5,
        format!("L2P(45) {:.3} / L2P(30) {:.3} = {ratio:.2}, NPSS(45) {:.4}", m45.l2p, m30.l2p, m45.npss),
    )
}

fn c6_slicing() -> Verdict {
    let styles = [SynthStyle::WalkCycle, SynthStyle::Turn, SynthStyle::Pendulum];
    let mut clips = Vec::new();
    for (i, n) in [200usize, 240, 300, 417, 611, 1000].into_iter().cycle().take(30).enumerate() {
        clips.push(synth_clip(i as u64, 8, n, styles[i % 3]).map_err(|e| e.to_string())?);
    }
    let l = 41;
    let count = |offset: usize| -> Result<usize, String> {
        let mut total = 0;
        for (i, c) in clips.iter().enumerate() {
            let got = slice_windows(i, c, 10, 30, offset).len();
            let want = (c.len() - l) / offset + 1;
            if got != want {
                return Err(format!("clip {i}: {got} windows at offset {offset}, expected {want}"));
            }
            total += got;
        }
        Ok(total)
    };
    let (a, b) = (count(5)?, count(20)?);
    let ratio = a as f64 / b as f64;
    check(
        (3.5..=4.2).contains(&ratio),
        format!("{a} windows at offset 5, {b} at offset 20, ratio {ratio:.3}"),
    )
}

/// Brute-force DFT power, normalised cumulative EMD, ground-truth power weights.
fn npss_oracle(pred: &[Vec<f64>], gt: &[Vec<f64>]) -> f64 {
    let power = |x: &[f64]| -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (t, v) in x.iter().enumerate() {
                    let a = -2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64;
                    re += v * a.cos();
                    im += v * a.sin();
                }
                re * re + im * im
            })
            .collect()
    };
    let (mut num, mut den) = (0.0, 0.0);
    for (p, g) in pred.iter().zip(gt) {
        let (pp, gp) = (power(p), power(g));
        let (ps, gs): (f64, f64) = (pp.iter().sum(), gp.iter().sum());
        let mut emd = 0.0;
        let (mut cp, mut cg) = (0.0, 0.0);
        for k in 0..pp.len() {
            cp += if ps > 0.0 { pp[k] / ps } else { 0.0 };
            cg += gp[k] / gs;
            emd += (cp - cg).abs();
        }
        num += gs * emd;
        den += gs;
    }
    num / den
}

fn c7_npss_oracle() -> Verdict {
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut series = || -> Vec<Vec<f64>> {
            (0..2).map(|_| (0..32).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
        };
        let (p, g) = (series(), series());
        let as_matrix = |s: &[Vec<f64>]| Matrix::from_fn(32, 2, |r, c| s[c][r]);
        let got = npss(&as_matrix(&p), &as_matrix(&g)).map_err(|e| e.to_string())?;
        worst = worst.max((got - npss_oracle(&p, &g)).abs());
    }
    check(worst < 1e-9, format!("max deviation {worst:.2e} over 100 pairs"))
}

fn ablation_spec(axis: AblationAxis) -> AblationSpec {
    AblationSpec {
        axis,
        seeds: vec![0, 1, 2],
        train: TrainConfig {
            steps: 300,
            batch_size: 8,
            warmup: 100,
            ..TrainConfig::default()
        },
        model: ModelConfig::tiny(0, 0),
        options: FeatureOptions {
            fill: FillMode::Zeros,
            ..FeatureOptions::default()
        },
        offset: 20,
        bench: BenchmarkConfig::default(),
    }
}

fn small_corpus() -> Result<(Vec<AnimationClip>, Vec<AnimationClip>), String> {
    Ok((
        synth_corpus(21, 12, 8, 240, &[]).map_err(|e| e.to_string())?,
        synth_corpus(22, 4, 8, 240, &[]).map_err(|e| e.to_string())?,
    ))
}

fn c8_zero_fill() -> Verdict {
    let (train_clips, test) = small_corpus()?;
    let spec = ablation_spec(AblationAxis::ZerosVsSlerp);
    let r = run_ablation(&spec, &train_clips, &test, &mut |_| {}).map_err(|e| e.to_string())?;
    let per_seed = |s: u64| r.deltas.iter().filter(|d| d.seed == s).count();
    let complete = r.runs.len() == 6
        && spec.seeds.iter().all(|&s| per_seed(s) == 12)
        && r.deltas.iter().all(|d| d.delta().is_finite());
    let csv = r.delta_csv();
    let at30: Vec<String> = r
        .deltas
        .iter()
        .filter(|d| d.length == 30 && d.metric == "l2p")
        .map(|d| format!("{:+.3}", d.delta()))
        .collect();
    check(
        complete && csv.lines().count() == 1 + 36,
        format!("6 runs, 36 deltas; zeros minus slerp L2P at 30 per seed: {}", at30.join(" ")),
    )
}

fn c9_keypos() -> Verdict {
    let (train_clips, test) = small_corpus()?;
    let spec = ablation_spec(AblationAxis::KeyposOnOff);
    let r = run_ablation(&spec, &train_clips, &test, &mut |_| {}).map_err(|e| e.to_string())?;
    let arm = |name: &str| {
        r.runs
            .iter()
            .filter(|x| x.arm == name)
            .filter_map(|x| x.report.row(Method::Model, 45))
            .map(|row| row.l2p)
            .collect::<Vec<f64>>()
    };
    let (on, off) = (arm("keypos_on"), arm("keypos_off"));
    let flag = r.degradation;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    check(
        on.len() == 3 && off.len() == 3 && flag.is_some(),
        format!(
            "length-45 L2P keypos on {:.3} vs off {:.3} (seed means), degradation flag {}",
            mean(&on),
            mean(&off),
            flag.map_or("missing".into(), |f| f.to_string())
        ),
    )
}

fn short_run(dir: &std::path::Path) -> Result<(Vec<u8>, String, Vec<u8>), String> {
    let (clips, test) = small_corpus()?;
    let cfg = TrainConfig {
        steps: 120,
        batch_size: 4,
        checkpoint_every: 40,
        seed: 5,
        ..TrainConfig::default()
    };
    let data = TrainSet::new(&clips, &cfg, 20, FeatureOptions::default()).map_err(|e| e.to_string())?;
    let layout = data.layout();
    let model = ModelConfig::tiny(layout.d_in(), layout.d_out());
    let stats = PositionStats::from_windows(&clips, &data.windows).map_err(|e| e.to_string())?;
    let bench = BenchmarkConfig::default();
    let mut validate = |p: &inbetween::nn::ModelParams<f32>| {
        let pr = Predictor::from_train_set(model.clone(), p.clone(), &data);
        let r = run_benchmark(&test, &BenchmarkConfig { lengths: vec![30], ..bench.clone() }, &stats, Some(&pr))
            .map_err(|e| inbetween::train::TrainError::Config(e.to_string()))?;
        Ok(r.row(Method::Model, 30).map_or(f64::NAN, |x| x.l2p))
    };
    let hooks = TrainHooks {
        out_dir: Some(dir),
        validate: Some(&mut validate),
        ..TrainHooks::default()
    };
    let out = train(&cfg, &model, &data, hooks).map_err(|e| e.to_string())?;
    let loss = dir.join("loss.csv");
    write_loss_csv(&loss, &out.records).map_err(|e| e.to_string())?;
    let pr = Predictor::from_train_set(model.clone(), out.params, &data);
    let report = run_benchmark(&test, &bench, &stats, Some(&pr)).map_err(|e| e.to_string())?;
    let ck = std::fs::read(dir.join("final.mibc")).map_err(|e| e.to_string())?;
    Ok((std::fs::read(loss).map_err(|e| e.to_string())?, report.to_csv(), ck))
}

fn c10_reproducible() -> Verdict {
    let (a, b) = (tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?);
    let ra = short_run(a.path())?;
    let rb = short_run(b.path())?;
    check(
        ra == rb,
        format!(
            "loss CSV {} bytes, benchmark CSV {} bytes, final checkpoint {} bytes; identical: {}",
            ra.0.len(),
            ra.1.len(),
            ra.2.len(),
            ra == rb
        ),
    )
}

fn report(n: usize, name: &str, started: Instant, v: Verdict) -> bool {
    let secs = started.elapsed().as_secs_f64();
    let (tag, detail, ok) = match v {
        Ok(d) => ("PASS", d, true),
        Err(d) => ("FAIL", d, false),
    };
    println!("{tag} criterion {n:>2} {name}: {detail} [{secs:.1}s]");
    ok
}

fn main() {
    let mut ok = true;
    let t = Instant::now();
    ok &= report(1, "gradient fidelity", t, c1_gradients());
    let t = Instant::now();
    ok &= report(2, "kinematics round trip", t, c2_kinematics());
    let t = Instant::now();
    ok &= report(3, "overfit smoke", t, c3_overfit());
    let t = Instant::now();
    let long = long_run();
    ok &= report(4, "beats interpolation", t, c4_beats_slerp(&long));
    let t = Instant::now();
    ok &= report(5, "extrapolation", t, c5_extrapolation(&long));
    let t = Instant::now();
    ok &= report(6, "dataset slicing", t, c6_slicing());
    let t = Instant::now();
    ok &= report(7, "npss oracle", t, c7_npss_oracle());
    let t = Instant::now();
    ok &= report(8, "zero-fill contrast", t, c8_zero_fill());
    let t = Instant::now();
    ok &= report(9, "key-position extrapolation flag", t, c9_keypos());
    let t = Instant::now();
    ok &= report(10, "reproducibility", t, c10_reproducible());
    if !ok {
        std::process::exit(1);
    }
}
