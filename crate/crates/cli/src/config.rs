//! Run configuration: a preset, an optional TOML file and flag overrides,
//! merged in that order and then checked strictly.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use inbetween::dataset::{FeatureOptions, FillMode, PoseSpace, SynthStyle};
use inbetween::eval::BenchmarkConfig;
use inbetween::nn::ModelConfig;
use inbetween::train::TrainConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// `tiny` or `paper`; supplies every default below.
    pub preset: String,
    /// Parent of the timestamped run directories.
    pub runs_dir: PathBuf,
    pub model: ModelSection,
    pub train: TrainConfig,
    pub features: FeatureSection,
    pub data: DataSection,
    pub eval: EvalSection,
}

/// Model hyperparameters; input and output widths follow from the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub layers: usize,
    pub heads: usize,
    pub d_model: usize,
    pub d_ff: usize,
    pub max_rel_dist: usize,
    pub dropout: f64,
    pub pre_norm: bool,
    pub key_pos_embedding: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSection {
    /// `zeros` or `slerp`.
    pub fill: String,
    /// `root` or `local`.
    pub pose_space: String,
    pub use_velocity: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// `synthetic` or `bvh`.
    pub source: String,
    /// Training window stride.
    pub offset: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bvh_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_bvh_dir: Option<PathBuf>,
    pub unit_scale: f64,
    pub heading_axis: [f64; 3],
    pub synthetic: SyntheticSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSection {
    pub seed: u64,
    pub clips: usize,
    pub joints: usize,
    pub frames: usize,
    /// Any of `walk-cycle`, `pendulum`, `turn`; clips cycle through them.
    pub styles: Vec<String>,
    pub test_seed: u64,
    pub test_clips: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub lengths: Vec<usize>,
    /// Evaluation window stride.
    pub offset: usize,
}

impl RunConfig {
    pub fn preset(name: &str) -> Result<Self, CliError> {
        let (model, train) = match name {
            "tiny" => (ModelConfig::tiny(0, 0), TrainConfig::default()),
            "paper" => (ModelConfig::paper(0, 0), TrainConfig::paper()),
            _ => {
                return Err(CliError::Config(format!(
                    "unknown preset '{name}' (expected tiny or paper)"
                )))
            }
        };
        let bench = BenchmarkConfig::default();
        Ok(Self {
            preset: name.into(),
            runs_dir: PathBuf::from("runs"),
            model: ModelSection {
                layers: model.layers,
                heads: model.heads,
                d_model: model.d_model,
                d_ff: model.d_ff,
                max_rel_dist: model.max_rel_dist,
                dropout: model.dropout,
                pre_norm: model.pre_norm,
                key_pos_embedding: model.key_pos_embedding,
            },
            train,
            features: FeatureSection {
                fill: "zeros".into(),
                pose_space: "root".into(),
                use_velocity: true,
            },
            data: DataSection {
                source: "synthetic".into(),
                offset: 20,
                bvh_dir: None,
                test_bvh_dir: None,
                unit_scale: 1.0,
                heading_axis: [0.0, 0.0, 1.0],
                synthetic: SyntheticSection {
                    seed: 0,
                    clips: 50,
                    joints: 8,
                    frames: 240,
                    styles: SynthStyle::ALL.iter().map(|s| s.name().to_string()).collect(),
                    test_seed: 1,
                    test_clips: 10,
                },
            },
            eval: EvalSection {
                lengths: bench.lengths,
                offset: bench.offset,
            },
        })
    }

    /// Resolves `file` (if any) and `overrides` over the preset they name.
    ///
    /// Overrides are `dotted.key = toml-value` pairs and win over the file.
    pub fn load(file: Option<&Path>, overrides: &[(String, toml::Value)]) -> Result<Self, CliError> {
        let mut user = match file {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    CliError::Usage(format!("cannot read config {}: {e}", p.display()))
                })?;
                text.parse::<toml::Table>()
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for (key, value) in overrides {
            set_dotted(&mut user, key, value.clone())?;
        }
        let preset = match user.get("preset") {
            None => "tiny".to_string(),
            Some(toml::Value::String(s)) => s.clone(),
            Some(v) => return Err(CliError::Config(format!("preset must be a string, got {v}"))),
        };
        let mut merged = toml::Table::try_from(Self::preset(&preset)?)
            .map_err(|e| CliError::Failed(e.to_string()))?;
        merge(&mut merged, user);
        let cfg: Self = toml::Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.feature_options()?;
        self.styles()?;
        self.train.validate()?;
        self.model_config(1, 1).validate()?;
        match self.data.source.as_str() {
            "synthetic" => {
                let s = &self.data.synthetic;
                if s.clips == 0 || s.joints < 2 || s.frames < 2 {
                    return Err(CliError::Config(
                        "data.synthetic needs clips >= 1, joints >= 2, frames >= 2".into(),
                    ));
                }
            }
            "bvh" => {
                if self.data.bvh_dir.is_none() {
                    return Err(CliError::Usage("data.source = \"bvh\" needs data.bvh_dir".into()));
                }
            }
            other => {
                return Err(CliError::Config(format!(
                    "data.source '{other}' (expected synthetic or bvh)"
                )))
            }
        }
        if self.data.offset == 0 || self.eval.offset == 0 {
            return Err(CliError::Config("offsets must be at least 1".into()));
        }
        if self.eval.lengths.iter().any(|&m| m == 0) {
            return Err(CliError::Config("eval.lengths must be at least 1".into()));
        }
        Ok(())
    }

    pub fn feature_options(&self) -> Result<FeatureOptions, CliError> {
        Ok(FeatureOptions {
            fill: FillMode::from_str(&self.features.fill)?,
            pose_space: PoseSpace::from_str(&self.features.pose_space)?,
            use_velocity: self.features.use_velocity,
        })
    }

    pub fn styles(&self) -> Result<Vec<SynthStyle>, CliError> {
        Ok(self
            .data
            .synthetic
            .styles
            .iter()
            .map(|s| s.parse())
            .collect::<Result<_, _>>()?)
    }

    pub fn model_config(&self, d_in: usize, d_out: usize) -> ModelConfig {
        let m = &self.model;
        ModelConfig {
            layers: m.layers,
            heads: m.heads,
            d_model: m.d_model,
            d_ff: m.d_ff,
            max_rel_dist: m.max_rel_dist,
            dropout: m.dropout,
            pre_norm: m.pre_norm,
            key_pos_embedding: m.key_pos_embedding,
            d_in,
            d_out,
        }
    }

    pub fn bench_config(&self) -> BenchmarkConfig {
        BenchmarkConfig {
            context: self.train.context,
            lengths: self.eval.lengths.clone(),
            offset: self.eval.offset,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of the resolved TOML.
    pub fn hash(&self) -> String {
        hex(&Sha256::digest(self.to_toml().as_bytes()))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn set_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), CliError> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty());
    let Some(last) = last else {
        return Err(CliError::Usage(format!("empty override key '{key}'")));
    };
    let mut t = table;
    for p in parts {
        let entry = t
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        t = match entry {
            toml::Value::Table(inner) => inner,
            _ => return Err(CliError::Config(format!("'{p}' in '{key}' is not a table"))),
        };
    }
    t.insert(last.to_string(), value);
    Ok(())
}

/// Parses `key=value`; the value is TOML, falling back to a bare string.
pub fn parse_override(s: &str) -> Result<(String, toml::Value), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected key=value, got '{s}'"))?;
    let v = v.trim();
    let value = format!("v = {v}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(v.to_string()));
    Ok((k.trim().to_string(), value))
}
