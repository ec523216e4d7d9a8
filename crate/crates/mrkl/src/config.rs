//! CLI settings: flags > environment > config file > defaults.
//!
//! The config file is flat `key = value` text; `#` starts a comment.
//!
//! ```text
//! threshold = 0.5
//! rates = data/rates.jsonl
//! records = data/records.jsonl
//! backend = reference        # reference | digits-only | cmd:<shell command>
//! fallback = stub            # stub | echo | cmd:<shell command>
//! seed = 7
//! clock = 2022-05-01
//! out_dir = reports
//! ```
//!
//! Environment: `MRKL_CONFIG` (config file path), `MRKL_CLOCK`, `MRKL_SEED`.

use std::path::PathBuf;

use mrkl_core::experts::CivilDate;
use mrkl_core::router::DEFAULT_THRESHOLD;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("{origin}: line {line}: expected `key = value`")]
    Syntax { origin: String, line: usize },
    #[error("{origin}: unknown key `{key}`")]
    UnknownKey { origin: String, key: String },
    #[error("{origin}: invalid {key} `{value}`: {reason}")]
    Invalid { origin: String, key: String, value: String, reason: String },
    #[error("cannot read config file {path}: {reason}")]
    Read { path: String, reason: String },
}

/// Partially specified settings from one source.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    pub threshold: Option<f64>,
    pub rates: Option<PathBuf>,
    pub records: Option<PathBuf>,
    pub backend: Option<String>,
    pub fallback: Option<String>,
    pub seed: Option<u64>,
    pub clock: Option<CivilDate>,
    pub out_dir: Option<PathBuf>,
}

impl Settings {
    /// Sets `key` from its textual value.
    pub fn set(&mut self, origin: &str, key: &str, value: &str) -> Result<(), ConfigError> {
        let invalid = |reason: String| ConfigError::Invalid {
            origin: origin.into(),
            key: key.into(),
            value: value.into(),
            reason,
        };
        match key {
            "threshold" => {
                let t: f64 = value.parse().map_err(|e| invalid(format!("{e}")))?;
                if !(0.0..=1.0).contains(&t) {
                    return Err(invalid("must be within [0, 1]".into()));
                }
                self.threshold = Some(t);
            }
            "rates" => self.rates = Some(value.into()),
            "records" => self.records = Some(value.into()),
            "backend" => self.backend = Some(value.into()),
            "fallback" => self.fallback = Some(value.into()),
            "seed" => self.seed = Some(value.parse().map_err(|e| invalid(format!("{e}")))?),
            "clock" => self.clock = Some(value.parse().map_err(|e| invalid(format!("{e}")))?),
            "out_dir" => self.out_dir = Some(value.into()),
            _ => return Err(ConfigError::UnknownKey { origin: origin.into(), key: key.into() }),
        }
        Ok(())
    }

    pub fn parse_file(origin: &str, text: &str) -> Result<Settings, ConfigError> {
        let mut s = Settings::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) =
                line.split_once('=').ok_or_else(|| ConfigError::Syntax { origin: origin.into(), line: i + 1 })?;
            s.set(origin, k.trim(), v.trim())?;
        }
        Ok(s)
    }

    pub fn from_env(get: impl Fn(&str) -> Option<String>) -> Result<Settings, ConfigError> {
        let mut s = Settings::default();
        for (var, key) in [("MRKL_CLOCK", "clock"), ("MRKL_SEED", "seed")] {
            if let Some(v) = get(var).filter(|v| !v.is_empty()) {
                s.set(var, key, &v)?;
            }
        }
        Ok(s)
    }

    /// Fields of `self` win over `lower`.
    pub fn over(self, lower: Settings) -> Settings {
        Settings {
            threshold: self.threshold.or(lower.threshold),
            rates: self.rates.or(lower.rates),
            records: self.records.or(lower.records),
            backend: self.backend.or(lower.backend),
            fallback: self.fallback.or(lower.fallback),
            seed: self.seed.or(lower.seed),
            clock: self.clock.or(lower.clock),
            out_dir: self.out_dir.or(lower.out_dir),
        }
    }

    pub fn resolve(self) -> CliConfig {
        CliConfig {
            threshold: self.threshold.unwrap_or(DEFAULT_THRESHOLD),
            rates: self.rates,
            records: self.records,
            backend: self.backend.unwrap_or_else(|| "reference".into()),
            fallback: self.fallback.unwrap_or_else(|| "stub".into()),
            seed: self.seed.unwrap_or(0),
            clock: self.clock,
            out_dir: self.out_dir.unwrap_or_else(|| ".".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub threshold: f64,
    pub rates: Option<PathBuf>,
    pub records: Option<PathBuf>,
    pub backend: String,
    pub fallback: String,
    pub seed: u64,
    /// `None` means the system clock.
    pub clock: Option<CivilDate>,
    pub out_dir: PathBuf,
}

/// Merges flags over environment over the config file (if any).
pub fn load(
    flags: Settings,
    config_flag: Option<PathBuf>,
    get_env: impl Fn(&str) -> Option<String>,
) -> Result<CliConfig, ConfigError> {
    let env = Settings::from_env(&get_env)?;
    let path = config_flag.or_else(|| get_env("MRKL_CONFIG").filter(|p| !p.is_empty()).map(PathBuf::from));
    let file = match path {
        None => Settings::default(),
        Some(p) => {
            let text = std::fs::read_to_string(&p)
                .map_err(|e| ConfigError::Read { path: p.display().to_string(), reason: e.to_string() })?;
            Settings::parse_file(&p.display().to_string(), &text)?
        }
    };
    Ok(flags.over(env).over(file).resolve())
}
