//! `inbetween`: train, evaluate, generate and ablate motion in-betweening models.
//!
//! Exit status: 0 success, 1 other failure, 2 usage or config error,
//! 3 numeric abort during training, 4 artifact mismatch.

mod commands;
mod config;
mod data;
mod error;
mod run_dir;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{EvalArgs, GenerateArgs};
use config::{parse_override, RunConfig};
use error::CliError;

#[derive(Parser)]
#[command(name = "inbetween", version, about = "Motion in-betweening with a transformer encoder")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write checkpoints and a loss curve.
    Train {
        #[command(flatten)]
        common: Common,
        /// Exact run directory instead of a timestamped one.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Benchmark a checkpoint against the slerp baseline.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Check the checkpoint against the statistics of this config's dataset.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory of BVH clips to evaluate on instead of the test split.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        lengths: Option<Vec<usize>>,
        /// Evaluation window stride.
        #[arg(long)]
        offset: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fill a transition between context frames and a target frame.
    Generate {
        #[arg(long)]
        checkpoint: PathBuf,
        /// BVH clip providing the context frames.
        #[arg(long)]
        context: PathBuf,
        #[arg(long, default_value_t = 0)]
        context_start: usize,
        /// BVH clip providing the target frame; defaults to the context clip.
        #[arg(long)]
        target: Option<PathBuf>,
        /// Defaults to the last frame of the target clip.
        #[arg(long)]
        target_frame: Option<usize>,
        /// Number of frames to generate.
        #[arg(long)]
        missing: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train and benchmark both arms of one ablation axis over several seeds.
    Ablate {
        /// offset5_vs_20, root_vs_local, velocity_on_off, zeros_vs_slerp or keypos_on_off.
        axis: String,
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 3)]
        seeds: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print clip, frame and window counts of the configured dataset.
    InspectDataset {
        #[command(flatten)]
        common: Common,
        /// Also write the training clips as BVH files into this directory.
        #[arg(long)]
        export: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML run config; unset keys come from the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// tiny or paper.
    #[arg(long)]
    preset: Option<String>,
    /// Use the synthetic corpus described by the config.
    #[arg(long, conflicts_with = "data")]
    synthetic: bool,
    /// Directory of BVH training clips.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Training window stride.
    #[arg(long)]
    offset: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    steps: Option<u64>,
    /// Any config key, e.g. `--set train.lr_factor=0.5`.
    #[arg(long = "set", value_parser = parse_override)]
    set: Vec<(String, toml::Value)>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut o: Vec<(String, toml::Value)> = Vec::new();
        if let Some(p) = &self.preset {
            o.push(("preset".into(), p.clone().into()));
        }
        if self.synthetic {
            o.push(("data.source".into(), "synthetic".into()));
        }
        if let Some(d) = &self.data {
            o.push(("data.source".into(), "bvh".into()));
            o.push(("data.bvh_dir".into(), d.display().to_string().into()));
        }
        if let Some(v) = self.offset {
            o.push(("data.offset".into(), (v as i64).into()));
        }
        if let Some(v) = self.seed {
            o.push(("train.seed".into(), (v as i64).into()));
        }
        if let Some(v) = self.steps {
            o.push(("train.steps".into(), (v as i64).into()));
        }
        o.extend(self.set.iter().cloned());
        RunConfig::load(self.config.as_deref(), &o)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train { common, out } => {
            commands::train_cmd(&common.resolve()?, out)?;
        }
        Command::Eval {
            checkpoint,
            config,
            data,
            lengths,
            offset,
            out,
        } => {
            let config = config
                .map(|p| RunConfig::load(Some(&p), &[]))
                .transpose()?;
            commands::eval_cmd(EvalArgs {
                checkpoint,
                config,
                data,
                lengths,
                offset,
                out,
            })?;
        }
        Command::Generate {
            checkpoint,
            context,
            context_start,
            target,
            target_frame,
            missing,
            out,
        } => {
            commands::generate_cmd(GenerateArgs {
                checkpoint,
                context,
                context_start,
                target,
                target_frame,
                missing,
                out,
            })?;
        }
        Command::Ablate {
            axis,
            common,
            seeds,
            out,
        } => {
            commands::ablate_cmd(&common.resolve()?, &axis, seeds, out)?;
        }
        Command::InspectDataset { common, export } => {
            commands::inspect_cmd(&common.resolve()?, export.as_deref())?
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
