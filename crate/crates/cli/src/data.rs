//! Clip loading for the configured source.

use std::path::Path;

use inbetween::dataset::{parse_bvh, synth_corpus, AnimationClip, BvhOptions};
use inbetween::motion::Vec3;

use crate::config::RunConfig;
use crate::error::CliError;

pub struct Corpus {
    pub train: Vec<AnimationClip>,
    pub test: Vec<AnimationClip>,
    pub description: String,
}

pub fn bvh_options(cfg: &RunConfig) -> BvhOptions {
    let [x, y, z] = cfg.data.heading_axis;
    BvhOptions {
        unit_scale: cfg.data.unit_scale,
        heading_axis: Vec3::new(x, y, z),
    }
}

pub fn read_bvh(path: &Path, opts: &BvhOptions) -> Result<AnimationClip, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let mut clip = parse_bvh(&text, opts)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    if let Some(stem) = path.file_stem() {
        clip.name = stem.to_string_lossy().into_owned();
    }
    Ok(clip)
}

/// Every `.bvh` file directly inside `dir`, sorted by file name.
pub fn read_bvh_dir(dir: &Path, opts: &BvhOptions) -> Result<Vec<AnimationClip>, CliError> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| CliError::Usage(format!("dataset path {}: {e}", dir.display())))?;
    let mut paths: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("bvh")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Usage(format!("no .bvh files in {}", dir.display())));
    }
    paths.iter().map(|p| read_bvh(p, opts)).collect()
}

pub fn load_corpus(cfg: &RunConfig) -> Result<Corpus, CliError> {
    match cfg.data.source.as_str() {
        "bvh" => {
            let opts = bvh_options(cfg);
            let dir = cfg.data.bvh_dir.as_deref().expect("validated");
            let train = read_bvh_dir(dir, &opts)?;
            let test = match &cfg.data.test_bvh_dir {
                Some(t) => read_bvh_dir(t, &opts)?,
                None => Vec::new(),
            };
            Ok(Corpus {
                description: format!("bvh {}", dir.display()),
                train,
                test,
            })
        }
        _ => {
            let s = &cfg.data.synthetic;
            let styles = cfg.styles()?;
            Ok(Corpus {
                train: synth_corpus(s.seed, s.clips, s.joints, s.frames, &styles)?,
                test: synth_corpus(s.test_seed, s.test_clips, s.joints, s.frames, &styles)?,
                description: format!(
                    "synthetic seed={} clips={} test_seed={} test_clips={} joints={} frames={} styles={}",
                    s.seed,
                    s.clips,
                    s.test_seed,
                    s.test_clips,
                    s.joints,
                    s.frames,
                    s.styles.join("+")
                ),
            })
        }
    }
}
