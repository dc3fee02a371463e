//! Optional TOML run configuration. Command-line flags override it.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use tabsynth::llm::LlmConfig;
use tabsynth::metrics::DEFAULT_TOL_REL;
use tabsynth::prompt::OutputFormat;

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    /// Built-in correlated Gaussian sampler (offline, seeded).
    Local,
    /// Remote chat-completion endpoint.
    Llm,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub backend: Option<Backend>,
    pub generation: GenerationConfig,
    pub llm: LlmConfig,
    pub metrics: MetricsConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub decimals: u32,
    pub corr_threshold: f64,
    pub include_all_correlations: bool,
    pub output_format: OutputFormat,
    /// Prompt template file; the built-in template when absent.
    pub template: Option<PathBuf>,
    pub trials: usize,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            decimals: 3,
            corr_threshold: 0.20,
            include_all_correlations: false,
            output_format: OutputFormat::default(),
            template: None,
            trials: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub tol_rel: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            tol_rel: DEFAULT_TOL_REL,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Config {
            path: path.to_path_buf(),
            message: e.message().to_string(),
        })
    }
}
