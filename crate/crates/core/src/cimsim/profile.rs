use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Variation profile of one CiM device technology.
///
/// `nominal[k]` is the normalized programmed conductance of level `k` and
/// `sigma_v[k]` the Gaussian deviation around it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviceProfile {
    pub name: String,
    pub sigma_v: Vec<f64>,
    pub nominal: Vec<f64>,
}

/// Names accepted by [`DeviceProfile::preset`].
pub const PRESET_NAMES: [&str; 5] = ["D-1", "D-2", "D-3", "D-4", "D-5"];

impl DeviceProfile {
    pub fn new(name: impl Into<String>, sigma_v: Vec<f64>, nominal: Vec<f64>) -> Result<Self> {
        let p = Self {
            name: name.into(),
            sigma_v,
            nominal,
        };
        p.validate()?;
        Ok(p)
    }

    /// Profile with equally spaced nominal levels on `[0, 1]`.
    pub fn with_uniform_levels(name: impl Into<String>, sigma_v: Vec<f64>) -> Result<Self> {
        let k = sigma_v.len();
        Self::new(name, sigma_v, uniform_levels(k))
    }

    pub fn levels(&self) -> usize {
        self.sigma_v.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.sigma_v.len();
        if k < 2 {
            return Err(Error::Parameter(format!(
                "device '{}' needs at least 2 levels, has {k}",
                self.name
            )));
        }
        if self.nominal.len() != k {
            return Err(Error::Parameter(format!(
                "device '{}': {} nominal levels for {k} deviations",
                self.name,
                self.nominal.len()
            )));
        }
        if self.sigma_v.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::Parameter(format!(
                "device '{}': deviations must be finite and >= 0",
                self.name
            )));
        }
        if self.nominal.iter().any(|v| !v.is_finite()) || self.nominal.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Parameter(format!(
                "device '{}': nominal levels must be strictly increasing",
                self.name
            )));
        }
        Ok(())
    }

    /// Built-in variation presets `D-1` .. `D-5`.
    ///
    /// `D-1` is a single-state-pair (on/off) RRAM, so it is modelled as a
    /// binary cell carrying the row's uniform deviation on both states.
    pub fn preset(name: &str) -> Result<Self> {
        let (label, sigma): (&str, &[f64]) = match name {
            "D-1" => ("RRAM1", &[0.0100, 0.0100]),
            "D-2" => ("FeFET2", &[0.0067, 0.0135, 0.0135, 0.0067]),
            "D-3" => ("FeFET3", &[0.0049, 0.0146, 0.0146, 0.0049]),
            "D-4" => ("RRAM4", &[0.0038, 0.0151, 0.0151, 0.0038]),
            "D-5" => ("FeFET6", &[0.0026, 0.0155, 0.0155, 0.0026]),
            other => {
                return Err(Error::Parameter(format!(
                    "unknown device preset '{other}' (known: {})",
                    PRESET_NAMES.join(", ")
                )))
            }
        };
        Self::with_uniform_levels(format!("{name} ({label})"), sigma.to_vec())
    }

    pub fn presets() -> Vec<Self> {
        PRESET_NAMES
            .iter()
            .map(|n| Self::preset(n).expect("builtin preset"))
            .collect()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ProfileFile =
            serde_json::from_str(text).map_err(|e| Error::Input(format!("device profile: {e}")))?;
        file.into_profile()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }
}

impl fmt::Display for DeviceProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<14} K={} sigma_v=[", self.name, self.levels())?;
        for (i, s) in self.sigma_v.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{s:.4}")?;
        }
        write!(f, "]")
    }
}

pub(crate) fn uniform_levels(k: usize) -> Vec<f64> {
    if k < 2 {
        return vec![0.0; k];
    }
    (0..k).map(|i| i as f64 / (k - 1) as f64).collect()
}

/// On-disk JSON form, one row of the variation table.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileFile {
    name: String,
    levels: usize,
    sigma_v: Vec<f64>,
    #[serde(default)]
    nominal: Option<Vec<f64>>,
}

impl ProfileFile {
    fn into_profile(self) -> Result<DeviceProfile> {
        let sigma = match self.levels {
            0 => return Err(Error::Parameter("device levels must be >= 1".into())),
            // a "1 level" device stores one programmable on/off pair
            1 => {
                let first = *self
                    .sigma_v
                    .first()
                    .ok_or_else(|| Error::Parameter("sigma_v is empty".into()))?;
                let second = self.sigma_v.get(1).copied().unwrap_or(first);
                vec![first, second]
            }
            k => {
                if self.sigma_v.len() < k {
                    return Err(Error::Parameter(format!(
                        "device '{}' declares {k} levels but lists {} deviations",
                        self.name,
                        self.sigma_v.len()
                    )));
                }
                self.sigma_v[..k].to_vec()
            }
        };
        match self.nominal {
            Some(nominal) => DeviceProfile::new(self.name, sigma, nominal),
            None => DeviceProfile::with_uniform_levels(self.name, sigma),
        }
    }
}
