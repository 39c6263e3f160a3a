use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use inbetween::dataset::{parse_bvh, BvhOptions};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_inbetween"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Small synthetic corpus and a short schedule.
const SMALL: &[&str] = &[
    "--synthetic",
    "--set",
    "data.synthetic.clips=3",
    "--set",
    "data.synthetic.test_clips=2",
    "--set",
    "train.batch_size=4",
    "--set",
    "train.checkpoint_every=20",
];

fn train_small(dir: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let mut args = vec!["train", "--steps", "40", "--out", name];
    args.extend_from_slice(SMALL);
    args.extend_from_slice(extra);
    let o = run(dir, &args);
    assert!(o.status.success(), "{}", stderr(&o));
    dir.join(name)
}

#[test]
fn train_writes_a_complete_run_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let run_dir = train_small(tmp.path(), "run", &[]);
    for f in ["config.toml", "manifest.txt", "loss.csv", "final.mibc", "best.mibc", "step-00000040.mibc"] {
        assert!(run_dir.join(f).exists(), "missing {f}");
    }
    let loss = std::fs::read_to_string(run_dir.join("loss.csv")).unwrap();
    assert!(loss.starts_with("step,lr,train_l1,val_l2p\n"));
    assert_eq!(loss.lines().count(), 41);
    let manifest = std::fs::read_to_string(run_dir.join("manifest.txt")).unwrap();
    assert!(manifest.contains("config_hash: ") && manifest.contains("windows: 30"));
    // The recorded config is fully explicit and reproduces itself.
    let cfg = std::fs::read_to_string(run_dir.join("config.toml")).unwrap();
    for key in ["preset", "[model]", "[train]", "[features]", "[data.synthetic]", "[eval]", "steps = 40"] {
        assert!(cfg.contains(key), "resolved config lacks {key}");
    }
}

#[test]
fn timestamped_run_directories_do_not_collide() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec!["train", "--steps", "2", "--set", "runs_dir=\"runs\""];
    args.extend_from_slice(SMALL);
    for _ in 0..2 {
        assert!(run(tmp.path(), &args).status.success());
    }
    let dirs: Vec<_> = std::fs::read_dir(tmp.path().join("runs")).unwrap().collect();
    assert_eq!(dirs.len(), 2);
}

#[test]
fn eval_is_deterministic_and_checks_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let run_dir = train_small(tmp.path(), "run", &[]);
    let ck = run_dir.join("final.mibc");
    let ck = ck.to_str().unwrap();
    let eval = |out: &str, extra: &[&str]| {
        let mut args = vec!["eval", "--checkpoint", ck, "--out", out];
        args.extend_from_slice(extra);
        run(tmp.path(), &args)
    };
    assert!(eval("e1", &[]).status.success());
    assert!(eval("e2", &[]).status.success());
    let a = std::fs::read_to_string(tmp.path().join("e1/report.csv")).unwrap();
    let b = std::fs::read_to_string(tmp.path().join("e2/report.csv")).unwrap();
    assert_eq!(a, b);
    let rows: Vec<&str> = a.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 8);
    for len in ["5", "15", "30", "45"] {
        for m in ["slerp", "model"] {
            assert!(rows.iter().any(|r| r.starts_with(&format!("{m},{len},"))));
        }
    }

    assert!(eval("e3", &["--lengths", "45"]).status.success());
    let single = std::fs::read_to_string(tmp.path().join("e3/report.csv")).unwrap();
    assert_eq!(single.lines().filter(|l| l.starts_with("slerp,") || l.starts_with("model,")).count(), 2);

    let same_cfg = run_dir.join("config.toml");
    assert!(eval("e4", &["--config", same_cfg.to_str().unwrap(), "--lengths", "5"]).status.success());

    let other = tmp.path().join("other.toml");
    std::fs::write(&other, "[data]\noffset = 7\n").unwrap();
    let o = eval("e5", &["--config", other.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));

    let corrupt = tmp.path().join("corrupt.mibc");
    let mut bytes = std::fs::read(ck).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0xff;
    std::fs::write(&corrupt, bytes).unwrap();
    let o = run(tmp.path(), &["eval", "--checkpoint", corrupt.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn generate_round_trips_through_bvh() {
    let tmp = tempfile::tempdir().unwrap();
    let run_dir = train_small(tmp.path(), "run", &[]);
    let ck = run_dir.join("final.mibc");
    let mut args = vec!["inspect-dataset", "--export", "bvh"];
    args.extend_from_slice(SMALL);
    assert!(run(tmp.path(), &args).status.success());
    let mut clips: Vec<_> = std::fs::read_dir(tmp.path().join("bvh"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    clips.sort();
    let ctx = clips[0].to_str().unwrap();
    let gen = |m: &str, out: &str| {
        run(
            tmp.path(),
            &["generate", "--checkpoint", ck.to_str().unwrap(), "--context", ctx, "--target-frame", "120", "--missing", m, "--out", out],
        )
    };
    let o = gen("0", "zero.bvh");
    assert_eq!(o.status.code(), Some(2));

    assert!(gen("7", "out.bvh").status.success());
    let text = std::fs::read_to_string(tmp.path().join("out.bvh")).unwrap();
    let clip = parse_bvh(&text, &BvhOptions::default()).unwrap();
    assert_eq!(clip.len(), 10 + 7 + 1);
    // Schema: every motion line carries 3 + 3J channel values.
    let j = clip.joint_count();
    let declared: usize = text
        .lines()
        .filter_map(|l| l.trim().strip_prefix("CHANNELS "))
        .map(|c| c.split_whitespace().next().unwrap().parse::<usize>().unwrap())
        .sum();
    assert_eq!(declared, 3 + 3 * j);
    let motion = text.split("Frame Time:").nth(1).unwrap();
    let lines: Vec<&str> = motion.lines().skip(1).filter(|l| !l.trim().is_empty()).collect();
    assert_eq!(lines.len(), 18);
    assert!(lines.iter().all(|l| l.split_whitespace().count() == 3 + 3 * j));

    let o = gen("45", "long.bvh");
    assert!(o.status.success());
    assert!(stderr(&o).contains("warning"));
}

#[test]
fn config_errors_exit_with_usage_status() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "[train]\nstepz = 3\n").unwrap();
    let o = run(tmp.path(), &["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("stepz"));

    let o = run(tmp.path(), &["train", "--data", "no/such/dir", "--steps", "1"]);
    assert_eq!(o.status.code(), Some(2));

    let o = run(tmp.path(), &["ablate", "sideways"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("zeros_vs_slerp") && stderr(&o).contains("keypos_on_off"));

    let o = run(tmp.path(), &["train", "--preset", "huge"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn divergent_training_aborts_with_numeric_status() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec!["train", "--steps", "40", "--out", "nan", "--set", "train.lr_factor=1e30"];
    args.extend_from_slice(SMALL);
    let o = run(tmp.path(), &args);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn offset_window_counts_are_about_four_to_one() {
    let tmp = tempfile::tempdir().unwrap();
    let count = |offset: &str| -> usize {
        let o = run(tmp.path(), &["inspect-dataset", "--synthetic", "--offset", offset]);
        let out = String::from_utf8(o.stdout).unwrap();
        let line = out.lines().find(|l| l.starts_with("train:")).unwrap();
        let words: Vec<&str> = line.split_whitespace().collect();
        let i = words.iter().position(|w| *w == "windows").unwrap();
        words[i - 1].parse().unwrap()
    };
    let ratio = count("5") as f64 / count("20") as f64;
    assert!((3.5..=4.2).contains(&ratio), "{ratio}");
}

#[test]
fn ablate_writes_per_seed_deltas() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec![
        "ablate", "offset5_vs_20", "--steps", "3", "--out", "abl", "--set", "eval.lengths=[5]", "--seeds", "2",
    ];
    args.extend_from_slice(SMALL);
    let o = run(tmp.path(), &args);
    assert!(o.status.success(), "{}", stderr(&o));
    let deltas = std::fs::read_to_string(tmp.path().join("abl/deltas.csv")).unwrap();
    assert!(deltas.starts_with("seed,length,metric,offset5,offset20,delta\n"));
    assert_eq!(deltas.lines().filter(|l| !l.starts_with('#')).count(), 1 + 2 * 3);
    assert!(deltas.contains("# windows offset5="));
    let runs = std::fs::read_to_string(tmp.path().join("abl/runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 1 + 4);
}
