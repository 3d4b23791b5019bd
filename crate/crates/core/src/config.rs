//! Run configuration: JSON file, then command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::OutputFormat;
use crate::behavior::DEFAULT_IDLE_THRESHOLD;
use crate::error::{Error, Result};
use crate::logfile::LogFormat;
use crate::mining::{SequenceEngine, DEFAULT_MAX_LENGTH};
use crate::preprocess::{CleanConfig, DEFAULT_SESSION_TIMEOUT};

/// Environment variable consulted when no `--config` is given.
pub const CONFIG_ENV: &str = "WEBLOG_MINER_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MiningConfig {
    pub min_support: f64,
    pub min_confidence: f64,
    pub max_length: usize,
    /// Jaccard threshold for session clustering.
    pub cluster_threshold: f64,
}

impl Default for MiningConfig {
    fn default() -> Self {
        MiningConfig {
            min_support: 0.1,
            min_confidence: 0.5,
            max_length: DEFAULT_MAX_LENGTH,
            cluster_threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub format: LogFormat,
    pub timeout_seconds: i64,
    pub clean: CleanConfig,
    pub mining: MiningConfig,
    pub engine: SequenceEngine,
    pub idle_threshold: f64,
    pub output_format: OutputFormat,
    pub topology_path: Option<PathBuf>,
    /// `parse` fails when more than this fraction of lines is malformed.
    pub max_malformed_fraction: f64,
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            format: LogFormat::Combined,
            timeout_seconds: DEFAULT_SESSION_TIMEOUT,
            clean: CleanConfig::default(),
            mining: MiningConfig::default(),
            engine: SequenceEngine::default(),
            idle_threshold: DEFAULT_IDLE_THRESHOLD,
            output_format: OutputFormat::default(),
            topology_path: None,
            max_malformed_fraction: 0.5,
            workers: 1,
        }
    }
}

/// Values given on the command line; `None` leaves the file or default.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub format: Option<LogFormat>,
    pub timeout_seconds: Option<i64>,
    pub min_support: Option<f64>,
    pub min_confidence: Option<f64>,
    pub max_length: Option<usize>,
    pub cluster_threshold: Option<f64>,
    pub engine: Option<SequenceEngine>,
    pub idle_threshold: Option<f64>,
    pub output_format: Option<OutputFormat>,
    pub topology_path: Option<PathBuf>,
    pub max_malformed_fraction: Option<f64>,
    pub workers: Option<usize>,
}

fn fraction(key: &str, v: f64) -> Result<()> {
    if v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(Error::config(key, format!("{v} is not in (0, 1]")))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        fraction("mining.min_support", self.mining.min_support)?;
        fraction("mining.min_confidence", self.mining.min_confidence)?;
        if self.mining.max_length == 0 {
            return Err(Error::config("mining.max_length", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.mining.cluster_threshold) {
            return Err(Error::config("mining.cluster_threshold", "must be in [0, 1]"));
        }
        if self.timeout_seconds <= 0 {
            return Err(Error::config("timeout_seconds", "must be positive"));
        }
        if !(self.idle_threshold > 0.0 && self.idle_threshold.is_finite()) {
            return Err(Error::config("idle_threshold", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.max_malformed_fraction) {
            return Err(Error::config("max_malformed_fraction", "must be in [0, 1]"));
        }
        if self.workers == 0 {
            return Err(Error::config("workers", "must be at least 1"));
        }
        self.clean.validate()
    }

    pub fn apply(&mut self, o: &Overrides) {
        macro_rules! set {
            ($($field:ident).+ <- $src:ident) => {
                if let Some(v) = &o.$src {
                    self.$($field).+ = v.clone();
                }
            };
        }
        set!(format <- format);
        set!(timeout_seconds <- timeout_seconds);
        set!(mining.min_support <- min_support);
        set!(mining.min_confidence <- min_confidence);
        set!(mining.max_length <- max_length);
        set!(mining.cluster_threshold <- cluster_threshold);
        set!(engine <- engine);
        set!(idle_threshold <- idle_threshold);
        set!(output_format <- output_format);
        if o.topology_path.is_some() {
            self.topology_path = o.topology_path.clone();
        }
        set!(max_malformed_fraction <- max_malformed_fraction);
        set!(workers <- workers);
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let config: RunConfig = serde_json::from_str(text).map_err(|e| {
        let msg = e.to_string();
        // serde names the offending field in backticks
        let key = msg
            .split('`')
            .nth(1)
            .filter(|_| msg.starts_with("unknown field"))
            .unwrap_or("config")
            .to_string();
        Error::config(key, msg)
    })?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

/// Defaults, then the file from `--config` or the environment, then flags.
pub fn resolve(config_path: Option<&Path>, env_path: Option<&Path>, overrides: &Overrides) -> Result<RunConfig> {
    let mut config = match config_path.or(env_path) {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    config.apply(overrides);
    config.validate()?;
    Ok(config)
}
