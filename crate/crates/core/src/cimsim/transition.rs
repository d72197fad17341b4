use std::f64::consts::SQRT_2;

use crate::cimsim::{CellMapping, DeviceProfile, QuantizedCorpus};
use crate::error::{Error, Result};
use crate::numkit::Rng;

/// Row-stochastic `K × K` matrix: `p[i][j]` is the probability that a cell
/// programmed to level `i` reads back as level `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionMatrix {
    k: usize,
    p: Vec<f64>,
}

const ROW_SUM_TOL: f64 = 1e-9;

impl TransitionMatrix {
    pub fn new(k: usize, p: Vec<f64>) -> Result<Self> {
        if p.len() != k * k {
            return Err(Error::shape("TransitionMatrix::new", k * k, p.len()));
        }
        if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Parameter("transition probabilities must lie in [0, 1]".into()));
        }
        for (i, row) in p.chunks_exact(k).enumerate() {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::Parameter(format!("transition row {i} sums to {s}")));
            }
        }
        Ok(Self { k, p })
    }

    pub fn identity(k: usize) -> Self {
        let mut p = vec![0.0; k * k];
        for i in 0..k {
            p[i * k + i] = 1.0;
        }
        Self { k, p }
    }

    /// Device-level read-out matrix: level `i` reads as
    /// `N(nominal[i], (noise_scale * sigma_v[i])²)`, sensed against the
    /// midpoints of adjacent nominal levels.
    pub fn derive(profile: &DeviceProfile, noise_scale: f64) -> Result<Self> {
        profile.validate()?;
        check_scale(noise_scale)?;
        let sig: Vec<f64> = profile.sigma_v.iter().map(|s| s * noise_scale).collect();
        Ok(gaussian_readout(&profile.nominal, &sig))
    }

    /// Code-level matrix for `code_levels`-level codes stored on `profile`'s
    /// cells with the layout of [`CellMapping::for_levels`].
    ///
    /// Direct layouts restrict sensing to the levels actually programmed;
    /// sliced layouts flip every digit cell independently.
    pub fn for_codes(profile: &DeviceProfile, noise_scale: f64, code_levels: usize) -> Result<Self> {
        profile.validate()?;
        check_scale(noise_scale)?;
        let kd = profile.levels();
        match CellMapping::for_levels(code_levels, kd)? {
            CellMapping::Direct { stride } => {
                let idx: Vec<usize> = (0..code_levels).map(|c| c * stride).collect();
                let means: Vec<f64> = idx.iter().map(|&l| profile.nominal[l]).collect();
                let sig: Vec<f64> = idx.iter().map(|&l| profile.sigma_v[l] * noise_scale).collect();
                Ok(gaussian_readout(&means, &sig))
            }
            CellMapping::Sliced { digits } => {
                let cell = Self::derive(profile, noise_scale)?;
                let mut out = Self::identity(1);
                for _ in 0..digits {
                    // code = Σ d_i kd^i, so the least significant digit varies fastest
                    out = cell.kron(&out);
                }
                Ok(out)
            }
        }
    }

    fn kron(&self, other: &Self) -> Self {
        let k = self.k * other.k;
        let mut p = vec![0.0; k * k];
        for a in 0..self.k {
            for b in 0..self.k {
                let pab = self.get(a, b);
                for c in 0..other.k {
                    for d in 0..other.k {
                        p[(a * other.k + c) * k + (b * other.k + d)] = pab * other.get(c, d);
                    }
                }
            }
        }
        Self { k, p }
    }

    pub fn levels(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.k + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.p[i * self.k..(i + 1) * self.k]
    }

    /// Off-diagonal mass of row `i`.
    pub fn flip_probability(&self, i: usize) -> f64 {
        1.0 - self.get(i, i)
    }

    /// Inverse-CDF draw of the read level for stored level `from`.
    pub fn sample(&self, from: usize, rng: &mut Rng) -> usize {
        let u = rng.uniform();
        let mut acc = 0.0;
        for (j, &p) in self.row(from).iter().enumerate() {
            acc += p;
            if u < acc {
                return j;
            }
        }
        // u landed in the rounding gap at the end of the row
        self.row(from).iter().rposition(|&p| p > 0.0).unwrap_or(from)
    }
}

fn check_scale(noise_scale: f64) -> Result<()> {
    if !(noise_scale.is_finite() && noise_scale >= 0.0) {
        return Err(Error::Parameter(format!("noise scale must be >= 0, got {noise_scale}")));
    }
    Ok(())
}

/// Standard normal CDF.
pub fn phi(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

/// Mass of `N(mu, sigma²)` on `[lo, hi)`.
fn interval_mass(mu: f64, sigma: f64, lo: f64, hi: f64) -> f64 {
    if sigma == 0.0 {
        return if lo <= mu && mu < hi { 1.0 } else { 0.0 };
    }
    let za = (lo - mu) / sigma;
    let zb = (hi - mu) / sigma;
    // difference of upper tails keeps precision when both bounds sit above mu
    let m = if za >= 0.0 {
        phi(-za) - phi(-zb)
    } else {
        phi(zb) - phi(za)
    };
    m.clamp(0.0, 1.0)
}

fn gaussian_readout(means: &[f64], sigmas: &[f64]) -> TransitionMatrix {
    let k = means.len();
    let mut bounds = Vec::with_capacity(k + 1);
    bounds.push(f64::NEG_INFINITY);
    for w in means.windows(2) {
        bounds.push(0.5 * (w[0] + w[1]));
    }
    bounds.push(f64::INFINITY);
    let mut p = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            p[i * k + j] = interval_mass(means[i], sigmas[i], bounds[j], bounds[j + 1]);
        }
    }
    TransitionMatrix { k, p }
}

/// See [`TransitionMatrix::derive`].
pub fn derive_transition_matrix(profile: &DeviceProfile, noise_scale: f64) -> Result<TransitionMatrix> {
    TransitionMatrix::derive(profile, noise_scale)
}

/// Resample every stored code independently from its transition row.
pub fn apply_flips(corpus: &QuantizedCorpus, tm: &TransitionMatrix, rng: &mut Rng) -> Result<QuantizedCorpus> {
    if tm.levels() != corpus.levels() {
        return Err(Error::Parameter(format!(
            "transition matrix has {} levels, corpus {}",
            tm.levels(),
            corpus.levels()
        )));
    }
    let mut codes = corpus.codes().clone();
    for c in codes.as_mut_slice() {
        *c = tm.sample(*c as usize, rng) as u8;
    }
    corpus.with_codes(codes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shaping::CodeMatrix;

    fn binary(sigma: f64) -> DeviceProfile {
        DeviceProfile::with_uniform_levels("bin", vec![sigma, sigma]).unwrap()
    }

    #[test]
    fn zero_noise_is_identity() {
        for p in DeviceProfile::presets() {
            let tm = TransitionMatrix::derive(&p, 0.0).unwrap();
            assert_eq!(tm, TransitionMatrix::identity(p.levels()));
        }
    }

    #[test]
    fn binary_tail_closed_form() {
        let tm = TransitionMatrix::derive(&binary(0.5), 1.0).unwrap();
        assert!((tm.get(0, 1) - 0.158_655_253_931_457).abs() < 1e-12);
        assert!((tm.get(1, 0) - tm.get(0, 1)).abs() < 1e-15);
    }

    #[test]
    fn wider_inner_levels_flip_more() {
        let d1 = DeviceProfile::with_uniform_levels("RRAM1-4", vec![0.01; 4]).unwrap();
        let d5 = DeviceProfile::preset("D-5").unwrap();
        let a = TransitionMatrix::derive(&d1, 8.0).unwrap();
        let b = TransitionMatrix::derive(&d5, 8.0).unwrap();
        for i in [1, 2] {
            assert!(b.flip_probability(i) > a.flip_probability(i));
        }
    }

    #[test]
    fn flips_follow_the_matrix() {
        // p[i][i] = 0.9, the rest shared evenly
        let k = 4;
        let mut p = vec![0.1 / 3.0; k * k];
        for i in 0..k {
            p[i * k + i] = 0.9;
        }
        let tm = TransitionMatrix::new(k, p).unwrap();
        let n = 100_000;
        let data: Vec<u8> = (0..n).map(|i| (i % k) as u8).collect();
        let corpus = QuantizedCorpus::new(
            CodeMatrix::new(n / 100, 100, k, data.clone()).unwrap(),
            vec![0.0, 1.0, 2.0, 3.0],
        )
        .unwrap();
        let flipped = apply_flips(&corpus, &tm, &mut Rng::new(4)).unwrap();
        let changed = flipped
            .codes()
            .as_slice()
            .iter()
            .zip(&data)
            .filter(|(a, b)| a != b)
            .count();
        let rate = changed as f64 / n as f64;
        assert!((rate - 0.10).abs() < 0.01, "flip rate {rate}");

        let again = apply_flips(&corpus, &tm, &mut Rng::new(4)).unwrap();
        assert_eq!(flipped, again);
        let unchanged = apply_flips(&corpus, &TransitionMatrix::identity(k), &mut Rng::new(1)).unwrap();
        assert_eq!(unchanged, corpus);
    }

    #[test]
    fn sliced_codes_compose_digit_flips() {
        let d1 = DeviceProfile::preset("D-1").unwrap();
        let cell = TransitionMatrix::derive(&binary(0.3), 1.0).unwrap();
        let prof = binary(0.3);
        let tm = TransitionMatrix::for_codes(&prof, 1.0, 4).unwrap();
        // code 2 = (msb 1, lsb 0) -> code 1 = (msb 0, lsb 1): both digits flip
        assert!((tm.get(2, 1) - cell.get(1, 0) * cell.get(0, 1)).abs() < 1e-15);
        assert!((tm.get(3, 3) - cell.get(1, 1).powi(2)).abs() < 1e-15);
        let tm1 = TransitionMatrix::for_codes(&d1, 5.0, 4).unwrap();
        for i in 0..4 {
            let s: f64 = tm1.row(i).iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn mismatched_levels_rejected() {
        let corpus = QuantizedCorpus::new(CodeMatrix::new(1, 2, 2, vec![0, 1]).unwrap(), vec![-1.0, 1.0]).unwrap();
        assert!(apply_flips(&corpus, &TransitionMatrix::identity(4), &mut Rng::new(0)).is_err());
    }
}
