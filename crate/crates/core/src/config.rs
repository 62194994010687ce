//! Toolkit configuration file.
//!
//! Plain `key = value` lines under `[section]` headers (TOML syntax). Every
//! key is optional; unknown sections and keys are rejected.
//!
//! ```toml
//! [aie]
//! tau_uncert = 0.98
//! scale_factors = [0.95, 1.05]
//!
//! [sequence]
//! motion = "constant-velocity"
//! noise_std = 3.0
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aie::AieConfig;
use crate::curation::CurationConfig;
use crate::error::{Error, Result};
use crate::metrics::MetricConfig;
use crate::simulator::{SequenceSpec, SweepGrid, TrackerModel};

/// Environment variable consulted when no `--config` is given.
pub const CONFIG_ENV: &str = "SYMKIT_CONFIG";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolkitConfig {
    pub aie: AieConfig,
    pub metrics: MetricConfig,
    pub curation: CurationConfig,
    pub sequence: SequenceSpec,
    pub tracker: TrackerModel,
    pub sweep: SweepGrid,
}

impl ToolkitConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Loads `explicit`, else the file named by `SYMKIT_CONFIG`, else defaults.
    pub fn resolve(explicit: Option<&Path>) -> Result<Self> {
        match config_path(explicit) {
            Some(p) => Self::load(&p),
            None => Ok(Self::default()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.aie.validate()?;
        self.metrics.validate()?;
        self.sequence.validate()?;
        self.tracker.validate()?;
        // curation paths are finalised by the command line, so only the
        // path-independent fields are checked here
        if self.curation.min_length < 1 {
            return Err(Error::Config("curation.min_length must be at least 1".into()));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }
}

pub fn config_path(explicit: Option<&Path>) -> Option<PathBuf> {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(CONFIG_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
}
