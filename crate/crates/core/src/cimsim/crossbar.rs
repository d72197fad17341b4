use crate::cimsim::{CellMapping, DeviceProfile, QuantizedCorpus};
use crate::error::{Error, Result};
use crate::numkit::Rng;

/// Physical array geometry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArraySpec {
    /// Wordlines per tile: how many vector dimensions one tile accumulates.
    pub rows: usize,
    /// Bitlines per tile.
    pub cols: usize,
    /// Read noise added to every tile's bitline partial sum.
    pub adc_noise_sigma: f64,
}

impl ArraySpec {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Parameter(format!("array must be non-empty, got {rows}x{cols}")));
        }
        Ok(Self {
            rows,
            cols,
            adc_noise_sigma: 0.0,
        })
    }

    pub fn with_adc_noise(mut self, sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::Parameter(format!("ADC noise must be >= 0, got {sigma}")));
        }
        self.adc_noise_sigma = sigma;
        Ok(self)
    }

    /// Row tiles needed for `d`-dimensional vectors.
    pub fn row_tiles(&self, d: usize) -> usize {
        d.div_ceil(self.rows)
    }
}

impl Default for ArraySpec {
    fn default() -> Self {
        Self {
            rows: 128,
            cols: 128,
            adc_noise_sigma: 0.0,
        }
    }
}

/// A corpus programmed onto simulated cells. Programming noise is drawn once
/// here; [`Crossbar::mips`] only adds read (ADC) noise.
#[derive(Clone, Debug)]
pub struct Crossbar {
    spec: ArraySpec,
    n_docs: usize,
    dim: usize,
    slices: usize,
    slice_weights: Vec<f64>,
    /// `(G⁺ - G⁻)` laid out as `[doc][slice][dim]`.
    diff: Vec<f64>,
    center: f64,
    /// Logical value per unit of `Σ w_s (G⁺ - G⁻)`.
    gain: f64,
}

impl Crossbar {
    pub fn program(
        corpus: &QuantizedCorpus,
        spec: ArraySpec,
        profile: &DeviceProfile,
        noise_scale: f64,
        rng: &mut Rng,
    ) -> Result<Self> {
        profile.validate()?;
        if !(noise_scale.is_finite() && noise_scale >= 0.0) {
            return Err(Error::Parameter(format!("noise scale must be >= 0, got {noise_scale}")));
        }
        let (offset, step) = corpus.affine_map().ok_or_else(|| {
            Error::Parameter("crossbar programming needs a uniform dequantization map".into())
        })?;
        let kc = corpus.levels();
        let kd = profile.levels();
        let mapping = CellMapping::for_levels(kc, kd)?;
        let device_step = (profile.nominal[kd - 1] - profile.nominal[0]) / (kd - 1) as f64;
        let unit = match mapping {
            CellMapping::Direct { stride } => stride as f64 * device_step,
            CellMapping::Sliced { .. } => device_step,
        };
        // v = center + (step / 2) * (2c - (K - 1))
        let center = offset + step * (kc - 1) as f64 / 2.0;
        let gain = step / 2.0 / unit;

        let slices = mapping.cells_per_value();
        let (n, d) = (corpus.len(), corpus.dim());
        let layouts: Vec<Vec<(usize, usize)>> = (0..kc).map(|c| mapping.cell_levels(c, kc, kd)).collect();
        let mut diff = vec![0.0; n * slices * d];
        let cell = |level: usize, rng: &mut Rng| {
            let sigma = noise_scale * profile.sigma_v[level];
            let g = profile.nominal[level];
            if sigma > 0.0 {
                g + sigma * rng.normal()
            } else {
                g
            }
        };
        for doc in 0..n {
            let codes = corpus.codes().row(doc);
            for (j, &c) in codes.iter().enumerate() {
                for (s, &(pos, neg)) in layouts[c as usize].iter().enumerate() {
                    let gp = cell(pos, rng);
                    let gn = cell(neg, rng);
                    diff[(doc * slices + s) * d + j] = gp - gn;
                }
            }
        }
        Ok(Self {
            spec,
            n_docs: n,
            dim: d,
            slices,
            slice_weights: mapping.slice_weights(kd),
            diff,
            center,
            gain,
        })
    }

    pub fn len(&self) -> usize {
        self.n_docs
    }

    pub fn is_empty(&self) -> bool {
        self.n_docs == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spec(&self) -> &ArraySpec {
        &self.spec
    }

    /// Row tiles × column tiles occupied by the programmed corpus.
    pub fn tile_grid(&self) -> (usize, usize) {
        let columns = self.n_docs * self.slices * 2;
        (self.spec.row_tiles(self.dim), columns.div_ceil(self.spec.cols))
    }

    /// Analog inner product of `query` with every stored vector. Each row
    /// tile's bitline sum is digitized separately and accumulated digitally;
    /// slices are recombined by shift-and-add.
    pub fn mips(&self, query: &[f64], rng: &mut Rng) -> Result<Vec<f64>> {
        if query.len() != self.dim {
            return Err(Error::shape("crossbar_mips", self.dim, query.len()));
        }
        let qsum: f64 = query.iter().sum();
        let adc = self.spec.adc_noise_sigma;
        let tile = self.spec.rows;
        let mut scores = Vec::with_capacity(self.n_docs);
        for doc in 0..self.n_docs {
            let mut acc = 0.0;
            for (s, w) in self.slice_weights.iter().enumerate() {
                let g = &self.diff[(doc * self.slices + s) * self.dim..][..self.dim];
                let mut total = 0.0;
                for (qt, gt) in query.chunks(tile).zip(g.chunks(tile)) {
                    let mut partial: f64 = qt.iter().zip(gt).map(|(q, g)| q * g).sum();
                    if adc > 0.0 {
                        partial += adc * rng.normal();
                    }
                    total += partial;
                }
                acc += w * total;
            }
            scores.push(self.center * qsum + self.gain * acc);
        }
        Ok(scores)
    }
}

/// Program `corpus` and score a single query.
pub fn crossbar_mips(
    query: &[f64],
    corpus: &QuantizedCorpus,
    spec: ArraySpec,
    profile: &DeviceProfile,
    noise_scale: f64,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    if query.len() != corpus.dim() {
        return Err(Error::shape("crossbar_mips", corpus.dim(), query.len()));
    }
    Crossbar::program(corpus, spec, profile, noise_scale, rng)?.mips(query, rng)
}
