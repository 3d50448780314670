//! One declarative file for corpus, network, training and analysis
//! settings, in TOML or JSON.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::audio::CorpusSpec;
use crate::error::{Error, Result};
use crate::nn::NetworkConfig;
use crate::train::TrainSettings;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSettings {
    /// Frequency points from 0 to Nyquist for exported responses.
    pub n_points: usize,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        Self { n_points: 1024 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Seeds model initialization, shuffling, dropout and trial sampling.
    pub seed: u64,
    pub corpus: CorpusSpec,
    pub network: NetworkConfig,
    pub train: TrainSettings,
    pub analysis: AnalysisSettings,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    /// Parses by extension: `.json` as JSON, anything else as TOML.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let parsed = match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => Self::from_json_str(&text),
            _ => Self::from_toml_str(&text),
        };
        parsed.map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Overrides both the run seed and the corpus seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.corpus.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.corpus.validate()?;
        self.network.validate()?;
        self.train.validate()?;
        if self.analysis.n_points < 2 {
            return Err(Error::Config("analysis.n_points must be at least 2".into()));
        }
        Ok(())
    }

    /// Pretty JSON that loads back into the same config.
    pub fn echo(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }
}
