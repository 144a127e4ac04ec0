use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Deserialize;
use thiserror::Error;

use gpsanno::proposal::ProposalConfig;
use gpsanno::ranking::Policy;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {msg}")]
    Config { path: String, msg: String },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] gpsanno::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } | CliError::Usage(_) => 2,
            CliError::Core(e) if e.is_config_error() => 2,
            CliError::Core(_) => 1,
        }
    }
}

/// Reads a JSON config. Schema errors carry the path of the offending field.
pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config {
        path: path.display().to_string(),
        msg: match e.kind() {
            std::io::ErrorKind::NotFound => "file not found".into(),
            _ => e.to_string(),
        },
    })?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| CliError::Config {
        path: path.display().to_string(),
        msg: format!("at `{}`: {}", e.path(), e.inner()),
    })
}

/// Where annotate reads its clips from.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Input {
    /// Scenario spec files, simulated on the fly.
    Simulate(Vec<PathBuf>),
    /// Clip directories written by `simulate` or by an external tracker.
    Ingest(Vec<PathBuf>),
}

/// The annotate configuration file. Command-line flags override it.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Replaces scenario seeds: scenario `i` is simulated with `seed + i`.
    pub seed: Option<u64>,
    pub input: Option<Input>,
    pub params: Option<PathBuf>,
    pub refiner_model: Option<PathBuf>,
    pub ranker_model: Option<PathBuf>,
    pub version: Option<String>,
    pub keep_top: Option<f64>,
    pub policy: Option<Policy>,
    pub proposal: ProposalConfig,
    pub dump_stages: bool,
}

impl PipelineConfig {
    /// Resolves relative paths against the directory of the config file.
    pub fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(Input::Simulate(ps) | Input::Ingest(ps)) = &mut self.input {
            ps.iter_mut().for_each(fix);
        }
        for p in [&mut self.params, &mut self.refiner_model, &mut self.ranker_model].into_iter().flatten() {
            fix(p);
        }
    }
}
