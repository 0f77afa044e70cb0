//! Pipeline configuration: one versioned JSON document shared by all
//! subcommands.

use nearps::calib::CalibrationSettings;
use nearps::dataset::SampleSpec;
use nearps::integrate::IntegrateSettings;
use nearps::refine::RefinementConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegrationConfig {
    /// Depth-prior weight.
    pub w1: f64,
    /// Laplacian smoothness weight.
    pub w2: f64,
    pub settings: IntegrateSettings,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        IntegrationConfig {
            w1: 1e-4,
            w2: 1e-3,
            settings: IntegrateSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub version: u32,
    /// Face model container path.
    pub model: PathBuf,
    /// Corpus directory (generated by `generate`, read by the rest).
    pub corpus: PathBuf,
    /// Number of records `generate` produces.
    pub records: usize,
    /// Base seed; per-record seeds derive from it.
    pub seed: u64,
    /// Per-record sampling template (its `seed` field is replaced).
    pub sample: SampleSpec,
    pub refinement: RefinementConfig,
    pub integration: IntegrationConfig,
    pub calibration: CalibrationSettings,
    /// Lights to use, named S1..Sn (supports 1-3 image experiments).
    pub lights_subset: Vec<String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            version: CONFIG_VERSION,
            model: PathBuf::from("model.bin"),
            corpus: PathBuf::from("corpus"),
            records: 20,
            seed: 0,
            sample: SampleSpec::default(),
            refinement: RefinementConfig::default(),
            integration: IntegrationConfig::default(),
            calibration: CalibrationSettings::default(),
            lights_subset: vec!["S1".into(), "S2".into(), "S3".into()],
        }
    }
}

/// Errors that map to exit code 2 (usage / bad input).
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config {path} is not valid JSON: {source}")]
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("config version {0} unsupported (expected {CONFIG_VERSION})")]
    Version(u32),
    #[error("path does not exist: {0}")]
    MissingPath(PathBuf),
    #[error("invalid weights: w1 and w2 must be finite and >= 0")]
    BadWeights,
    #[error("unknown light name `{0}` (expected S1..S{1})")]
    BadLightName(String, usize),
    #[error("light subset is empty")]
    EmptySubset,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let bytes = std::fs::read(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let config: PipelineConfig =
            serde_json::from_slice(&bytes).map_err(|source| ConfigError::Parse {
                path: path.to_path_buf(),
                source,
            })?;
        if config.version != CONFIG_VERSION {
            return Err(ConfigError::Version(config.version));
        }
        if !(config.integration.w1.is_finite()
            && config.integration.w1 >= 0.0
            && config.integration.w2.is_finite()
            && config.integration.w2 >= 0.0)
        {
            return Err(ConfigError::BadWeights);
        }
        if config.lights_subset.is_empty() {
            return Err(ConfigError::EmptySubset);
        }
        Ok(config)
    }

    pub fn require_model(&self) -> Result<(), ConfigError> {
        if !self.model.is_file() {
            return Err(ConfigError::MissingPath(self.model.clone()));
        }
        Ok(())
    }

    pub fn require_corpus(&self) -> Result<(), ConfigError> {
        if !self.corpus.is_dir() {
            return Err(ConfigError::MissingPath(self.corpus.clone()));
        }
        Ok(())
    }

    /// Parse a subset selection like `["S1","S3"]` into light indices.
    pub fn subset_indices(
        &self,
        names: &[String],
        n_lights: usize,
    ) -> Result<Vec<usize>, ConfigError> {
        if names.is_empty() {
            return Err(ConfigError::EmptySubset);
        }
        let mut out = Vec::with_capacity(names.len());
        for name in names {
            let idx = name
                .strip_prefix('S')
                .or_else(|| name.strip_prefix('s'))
                .and_then(|n| n.parse::<usize>().ok())
                .filter(|&n| n >= 1 && n <= n_lights)
                .ok_or_else(|| ConfigError::BadLightName(name.clone(), n_lights))?;
            out.push(idx - 1);
        }
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    /// Deterministic per-record seed (splitmix64 of base ^ index).
    pub fn record_seed(&self, index: usize) -> u64 {
        let mut z = self
            .seed
            .wrapping_add(0x9e3779b97f4a7c15u64.wrapping_mul(index as u64 + 1));
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }
}
