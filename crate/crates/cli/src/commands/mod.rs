use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;

use sde_core::enhance::SubspaceMask;
use sde_core::io::{write_matrix, MatrixFormat};
use sde_core::{FeatureMatrix, Result, SdeError};

use crate::config::RunConfig;

pub mod ablate;
pub mod analyze;
pub mod enhance;
pub mod gradcheck;
pub mod schedules;
pub mod train;

/// How a command that ran to completion ended.
#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Success,
    /// The command ran but a check it performs did not hold.
    CheckFailed(String),
}

/// 2 for bad input, 3 for numeric failures inside a computation.
pub fn exit_code(e: &SdeError) -> u8 {
    match e {
        SdeError::Dimension(_)
        | SdeError::NonFinite(_)
        | SdeError::Degenerate(_)
        | SdeError::Range(_)
        | SdeError::Contract(_)
        | SdeError::Io { .. }
        | SdeError::Format { .. }
        | SdeError::Config { .. } => 2,
        SdeError::Convergence { .. } | SdeError::SpectralGap { .. } | SdeError::Training { .. } => 3,
    }
}

/// State shared by every command: where to write and what was written.
pub struct Context {
    pub out: PathBuf,
    pub format: MatrixFormat,
    pub config: RunConfig,
    artifacts: Vec<String>,
}

impl Context {
    pub fn new(out: PathBuf, format: MatrixFormat, config: RunConfig) -> Result<Self> {
        fs::create_dir_all(&out).map_err(|source| SdeError::Io { offset: 0, source })?;
        Ok(Self { out, format, config, artifacts: Vec::new() })
    }

    /// The run seed, 0 when neither the flag nor the config set one.
    pub fn seed(&self) -> u64 {
        self.config.seed.unwrap_or(0)
    }

    pub fn artifacts(&self) -> &[String] {
        &self.artifacts
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn write_text(&mut self, name: &str, contents: &str) -> Result<()> {
        write_file(&self.path(name), contents.as_bytes())?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    /// Writes `m` as `<stem>.<ext>` in the run's matrix format.
    pub fn write_matrix(&mut self, stem: &str, m: &FeatureMatrix) -> Result<()> {
        let name = format!("{stem}.{}", self.format.extension());
        write_matrix(&self.path(&name), m, self.format)?;
        self.artifacts.push(name);
        Ok(())
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| SdeError::Io { offset: 0, source })
}

pub fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes");
    s.push('\n');
    s
}

/// Reads a flag value with the same spelling the config file uses.
pub fn serde_value<T: DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

/// `all`, or subspace names joined by `+`, e.g. `strong+weak`.
pub fn parse_mask(s: &str) -> std::result::Result<SubspaceMask, String> {
    if s == "all" {
        return Ok(SubspaceMask::ALL);
    }
    let mut mask = SubspaceMask { strong: false, weak: false, noise: false };
    for part in s.split('+') {
        match part {
            "strong" => mask.strong = true,
            "weak" => mask.weak = true,
            "noise" => mask.noise = true,
            other => return Err(format!("unknown subspace `{other}` (expected strong, weak, noise or all)")),
        }
    }
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use sde_core::harness::TrainMode;

    #[test]
    fn exit_codes_split_input_from_numerics() {
        assert_eq!(exit_code(&SdeError::Degenerate("z".into())), 2);
        assert_eq!(exit_code(&SdeError::Format { offset: 3, message: "m".into() }), 2);
        assert_eq!(exit_code(&SdeError::Config { key: "k".into(), message: "m".into() }), 2);
        assert_eq!(exit_code(&SdeError::Convergence { sweeps: 60, residual: 1.0 }), 3);
        assert_eq!(exit_code(&SdeError::Training { step: 1, message: "nan".into() }), 3);
    }

    #[test]
    fn flag_values_use_config_spelling() {
        assert_eq!(serde_value::<TrainMode>("infonce_only").unwrap(), TrainMode::InfonceOnly);
        assert!(serde_value::<TrainMode>("InfonceOnly").is_err());
    }

    #[test]
    fn masks() {
        assert_eq!(parse_mask("all").unwrap(), SubspaceMask::ALL);
        assert_eq!(parse_mask("weak").unwrap(), SubspaceMask::WEAK_ONLY);
        let sw = parse_mask("strong+weak").unwrap();
        assert!(sw.strong && sw.weak && !sw.noise);
        assert!(parse_mask("strong+loud").is_err());
    }
}
