//! Timestamped output directories with the resolved config and a manifest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::error::CliError;

pub struct RunDir {
    pub path: PathBuf,
    manifest: Vec<(String, String)>,
}

impl RunDir {
    /// `<runs_dir>/<UTC timestamp>-<verb>`, suffixed when the name is taken.
    pub fn create(root: &Path, verb: &str, cfg: &RunConfig) -> Result<Self, CliError> {
        let stamp = chrono::Utc::now().format("%Y%m%d-%H%M%S");
        std::fs::create_dir_all(root)?;
        let mut path = root.join(format!("{stamp}-{verb}"));
        let mut n = 1;
        while path.exists() {
            n += 1;
            path = root.join(format!("{stamp}-{verb}-{n}"));
        }
        Self::at(path, verb, cfg)
    }

    pub fn at(path: PathBuf, verb: &str, cfg: &RunConfig) -> Result<Self, CliError> {
        std::fs::create_dir_all(&path)?;
        std::fs::write(path.join("config.toml"), cfg.to_toml())?;
        let mut dir = Self {
            path,
            manifest: Vec::new(),
        };
        dir.record("version", concat!("inbetween ", env!("CARGO_PKG_VERSION")));
        dir.record("command", verb);
        dir.record("config_hash", cfg.hash());
        dir.record("args", std::env::args().collect::<Vec<_>>().join(" "));
        Ok(dir)
    }

    pub fn record(&mut self, key: &str, value: impl ToString) {
        self.manifest.push((key.into(), value.to_string()));
    }

    /// Rewrites `manifest.txt` with everything recorded so far.
    pub fn write_manifest(&self) -> Result<(), CliError> {
        let mut s = String::new();
        for (k, v) in &self.manifest {
            let _ = writeln!(s, "{k}: {v}");
        }
        std::fs::write(self.path.join("manifest.txt"), s)?;
        Ok(())
    }
}
