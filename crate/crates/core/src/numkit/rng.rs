use rand::{Rng as _, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Explicitly seeded, platform-independent random stream.
///
/// Backed by ChaCha8 so identical seeds produce identical draws everywhere.
/// Not `Sync`-shared: hand each worker its own stream via [`Rng::fork`].
#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream derived from this generator's seed and `stream`.
    /// Does not advance `self`.
    pub fn fork(&self, stream: u64) -> Rng {
        let mut inner = ChaCha8Rng::seed_from_u64(self.seed);
        inner.set_stream(stream.wrapping_add(1));
        Rng {
            seed: self.seed,
            inner,
        }
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Uniform integer in `[0, n)`.
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        // Fisher-Yates, kept local so the draw sequence is pinned here.
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        self.shuffle(&mut idx);
        idx
    }
}

/// `n` i.i.d. draws from `N(mean, sigma²)`. `sigma == 0` returns `mean`
/// exactly, without consuming randomness.
pub fn gaussian(rng: &mut Rng, mean: f64, sigma: f64, n: usize) -> Result<Vec<f64>> {
    if !(sigma >= 0.0) || !sigma.is_finite() || !mean.is_finite() {
        return Err(Error::Parameter(format!(
            "gaussian needs finite mean and sigma >= 0, got mean={mean}, sigma={sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(vec![mean; n]);
    }
    Ok((0..n).map(|_| mean + sigma * rng.normal()).collect())
}
