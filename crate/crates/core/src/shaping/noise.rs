use crate::cimsim::DeviceProfile;
use crate::error::{Error, Result};
use crate::numkit::{Matrix, Rng};

/// Level-aware device noise applied between compression and quantization.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSpec {
    profile: DeviceProfile,
    sigma_g: f64,
    lookup_thresholds: Vec<f64>,
    normalize: bool,
}

impl NoiseSpec {
    /// Thresholds default to `k / K` (`{0.25, 0.5, 0.75}` for four levels),
    /// applied to batch-normalized values.
    pub fn new(profile: DeviceProfile, sigma_g: f64) -> Result<Self> {
        let k = profile.levels();
        let thresholds = (1..k).map(|i| i as f64 / k as f64).collect();
        Self::with_thresholds(profile, sigma_g, thresholds, true)
    }

    pub fn with_thresholds(
        profile: DeviceProfile,
        sigma_g: f64,
        lookup_thresholds: Vec<f64>,
        normalize: bool,
    ) -> Result<Self> {
        profile.validate()?;
        if !(sigma_g.is_finite() && sigma_g >= 0.0) {
            return Err(Error::Parameter(format!("global noise factor must be >= 0, got {sigma_g}")));
        }
        if lookup_thresholds.len() + 1 != profile.levels() {
            return Err(Error::Parameter(format!(
                "{} lookup thresholds for a {}-level device",
                lookup_thresholds.len(),
                profile.levels()
            )));
        }
        if lookup_thresholds.iter().any(|t| !t.is_finite()) || lookup_thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Parameter("lookup thresholds must be strictly increasing".into()));
        }
        Ok(Self {
            profile,
            sigma_g,
            lookup_thresholds,
            normalize,
        })
    }

    pub fn profile(&self) -> &DeviceProfile {
        &self.profile
    }

    pub fn sigma_g(&self) -> f64 {
        self.sigma_g
    }

    pub fn lookup_thresholds(&self) -> &[f64] {
        &self.lookup_thresholds
    }

    pub fn normalize(&self) -> bool {
        self.normalize
    }

    pub fn with_sigma_g(mut self, sigma_g: f64) -> Result<Self> {
        if !(sigma_g.is_finite() && sigma_g >= 0.0) {
            return Err(Error::Parameter(format!("global noise factor must be >= 0, got {sigma_g}")));
        }
        self.sigma_g = sigma_g;
        Ok(self)
    }
}

/// Level of `value`: how many thresholds lie at or below it. A value sitting
/// exactly on a threshold belongs to the upper level.
pub fn find_level(value: f64, thresholds: &[f64]) -> usize {
    thresholds.partition_point(|&t| t <= value)
}

/// `emb + sigma_g · ε`, where `ε_j ~ N(0, σ_v[k_j]²)` and `k_j` is the level
/// of element `j` (looked up after min-max normalizing the batch when
/// `spec.normalize` is set). The backward pass is the identity.
pub fn inject_noise(emb: &Matrix, spec: &NoiseSpec, rng: &mut Rng) -> Result<Matrix> {
    if spec.sigma_g == 0.0 {
        return Ok(emb.clone());
    }
    let (lo, span) = if spec.normalize {
        let (mn, mx) = emb
            .as_slice()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        (mn, mx - mn)
    } else {
        (0.0, 1.0)
    };
    let sigma = &spec.profile.sigma_v;
    let mut out = emb.clone();
    for v in out.data_mut() {
        let key = if span > 0.0 { (*v - lo) / span } else { 0.0 };
        let level = find_level(key, &spec.lookup_thresholds);
        *v += spec.sigma_g * sigma[level] * rng.normal();
    }
    out.check_finite("inject_noise")?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::stats;

    const EXAMPLE: [f64; 3] = [0.25, 0.5, 0.75];

    #[test]
    fn level_lookup() {
        assert_eq!(find_level(0.1, &EXAMPLE), 0);
        assert_eq!(find_level(0.6, &EXAMPLE), 2);
        assert_eq!(find_level(0.25, &EXAMPLE), 1);
        assert_eq!(find_level(0.75, &EXAMPLE), 3);
        assert_eq!(find_level(2.0, &EXAMPLE), 3);
    }

    #[test]
    fn zero_factor_is_identity() {
        let spec = NoiseSpec::new(DeviceProfile::preset("D-2").unwrap(), 0.0).unwrap();
        let mut rng = Rng::new(3);
        let x = Matrix::from_fn(4, 5, |i, j| (i * 5 + j) as f64 * 0.37 - 2.0).unwrap();
        assert_eq!(inject_noise(&x, &spec, &mut rng).unwrap(), x);
    }

    #[test]
    fn threshold_count_must_match_device() {
        let p = DeviceProfile::preset("D-2").unwrap();
        assert!(NoiseSpec::with_thresholds(p.clone(), 1.0, vec![0.5], true).is_err());
        assert!(NoiseSpec::with_thresholds(p.clone(), 1.0, vec![0.5, 0.25, 0.75], true).is_err());
        assert!(NoiseSpec::new(p, -0.1).is_err());
    }

    #[test]
    fn global_factor_scales_deviation() {
        let p = DeviceProfile::preset("D-2").unwrap();
        // every element at level 0 when values are fed unnormalized below 0.25
        let x = Matrix::zeros(100, 1000);
        let std_at = |g: f64| {
            let spec = NoiseSpec::with_thresholds(p.clone(), g, EXAMPLE.to_vec(), false).unwrap();
            let y = inject_noise(&x, &spec, &mut Rng::new(8)).unwrap();
            stats::std_dev(y.as_slice())
        };
        let full = std_at(1.0);
        let tenth = std_at(0.1);
        assert!((full - 0.0067).abs() < 0.1 * 0.0067);
        assert!((tenth / full - 0.1).abs() < 1e-9);
    }
}
