use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossConfig {
    /// Softmax temperature of the contrastive term.
    pub temperature: f64,
    /// Weight of the reconstruction term.
    pub lambda_mse: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            temperature: 0.05,
            lambda_mse: 8.0,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::Parameter(format!("temperature must be > 0, got {}", self.temperature)));
        }
        if !(self.lambda_mse.is_finite() && self.lambda_mse >= 0.0) {
            return Err(Error::Parameter(format!("lambda_mse must be >= 0, got {}", self.lambda_mse)));
        }
        Ok(())
    }
}

/// How the quantizer output enters the training loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForwardMode {
    /// Quantized values forward, surrogate gradient backward.
    StraightThrough,
    /// The differentiable surrogate in both directions; rounding happens
    /// only at inference.
    Surrogate,
}

/// Where the positive (and negative) views come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairMode {
    /// Views exported alongside the embeddings.
    FromFile,
    /// Views made here by dropping out embedding components.
    SyntheticDropout,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub sigma_g: f64,
    pub dropout_rate_pos: f64,
    pub dropout_rate_neg: Option<f64>,
    pub pair_mode: PairMode,
    pub forward: ForwardMode,
    pub loss: LossConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 16,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            sigma_g: 0.1,
            dropout_rate_pos: 0.05,
            dropout_rate_neg: None,
            pair_mode: PairMode::SyntheticDropout,
            forward: ForwardMode::Surrogate,
            loss: LossConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let rate = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Parameter(format!("{name} must be in [0, 1], got {v}")))
            }
        };
        if self.batch_size == 0 {
            return Err(Error::Parameter("batch_size must be >= 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Parameter(format!("learning_rate must be > 0, got {}", self.learning_rate)));
        }
        rate("adam_beta1", self.adam_beta1)?;
        rate("adam_beta2", self.adam_beta2)?;
        if self.adam_beta1 >= 1.0 || self.adam_beta2 >= 1.0 {
            return Err(Error::Parameter("Adam betas must be < 1".into()));
        }
        if !(self.adam_eps.is_finite() && self.adam_eps > 0.0) {
            return Err(Error::Parameter(format!("adam_eps must be > 0, got {}", self.adam_eps)));
        }
        if !(self.sigma_g.is_finite() && self.sigma_g >= 0.0) {
            return Err(Error::Parameter(format!("sigma_g must be >= 0, got {}", self.sigma_g)));
        }
        rate("dropout_rate_pos", self.dropout_rate_pos)?;
        if let Some(p) = self.dropout_rate_neg {
            rate("dropout_rate_neg", p)?;
        }
        self.loss.validate()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Input(format!("training config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }
}
