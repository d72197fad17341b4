use std::path::{Path, PathBuf};

use cqcim::shaping::Precision;
use cqcim::training::{ModelConfig, TrainConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// The document passed to `cqcim train --config`.
///
/// Exactly one of `embeddings` and `views` names the training data.
/// Relative paths are resolved against the directory holding the config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainJob {
    /// Embedding file; positive views come from synthetic dropout.
    #[serde(default)]
    pub embeddings: Option<PathBuf>,
    /// Paired-view file from the exporter.
    #[serde(default)]
    pub views: Option<PathBuf>,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
}

/// Command-line values that take precedence over the config.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub device: Option<String>,
    pub dim: Option<usize>,
    pub precision: Option<Precision>,
    pub epochs: Option<usize>,
}

impl TrainJob {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let job: Self = serde_json::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))?;
        job.validate()?;
        Ok(job)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Core(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())).into()))?;
        let mut job = Self::parse(&text).map_err(|e| match e {
            CliError::Usage(m) => CliError::Usage(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut job.embeddings, &mut job.views].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(job)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), CliError> {
        if let Some(s) = o.seed {
            self.train.seed = s;
        }
        if let Some(d) = &o.device {
            self.model.device = d.clone();
        }
        if let Some(d) = o.dim {
            self.model.dim = d;
        }
        if let Some(p) = o.precision {
            self.model.precision = p;
        }
        if let Some(e) = o.epochs {
            self.train.epochs = e;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.embeddings.is_some() == self.views.is_some() {
            return Err(CliError::Usage(
                "config: set exactly one of \"embeddings\" and \"views\"".into(),
            ));
        }
        self.train.validate().map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    /// SHA-256 of the model and training sections as canonical JSON.
    pub fn hash(&self) -> [u8; 32] {
        let canonical = serde_json::to_vec(&(&self.model, &self.train)).expect("config serializes");
        Sha256::digest(&canonical).into()
    }
}
