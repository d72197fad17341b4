use crate::error::{Error, Result};
use crate::numkit::{stats, Matrix};
use crate::shaping::{CodeMatrix, Precision, QuantCache};

/// Data-independent symmetric quantizer with a straight-through backward.
#[derive(Clone, Debug, PartialEq)]
pub struct FixedQuantizer {
    mode: Precision,
    scale: f64,
}

impl FixedQuantizer {
    pub fn new(mode: Precision, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::Parameter(format!("quantizer scale must be > 0, got {scale}")));
        }
        Ok(Self { mode, scale })
    }

    /// Scale set to the 99th percentile of `|x|`.
    pub fn calibrated(mode: Precision, data: &[f64]) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Input("cannot calibrate on empty data".into()));
        }
        let abs: Vec<f64> = data.iter().map(|v| v.abs()).collect();
        let s = stats::percentile(&abs, 99.0);
        Self::new(mode, if s > 0.0 { s } else { 1.0 })
    }

    pub fn mode(&self) -> Precision {
        self.mode
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn levels(&self) -> usize {
        self.mode.levels()
    }

    /// Logical value of every code.
    pub fn codebook(&self) -> Vec<f64> {
        let s = self.scale;
        match self.mode {
            Precision::Binary => vec![-s, s],
            Precision::Ternary => vec![-s, 0.0, s],
            Precision::TwoBit | Precision::Int4 => {
                let k = self.levels();
                (0..k).map(|i| -s + 2.0 * s * i as f64 / (k - 1) as f64).collect()
            }
        }
    }

    pub fn code(&self, x: f64) -> u8 {
        let s = self.scale;
        match self.mode {
            Precision::Binary => u8::from(x >= 0.0),
            Precision::Ternary => {
                if x >= 0.5 * s {
                    2
                } else if x < -0.5 * s {
                    0
                } else {
                    1
                }
            }
            Precision::TwoBit | Precision::Int4 => {
                let top = (self.levels() - 1) as f64;
                let pos = (x + s) / (2.0 * s) * top;
                (pos + 0.5).floor().clamp(0.0, top) as u8
            }
        }
    }

    pub fn quantize(&self, x: &Matrix) -> Result<(CodeMatrix, Matrix)> {
        let book = self.codebook();
        let codes: Vec<u8> = x.as_slice().iter().map(|&v| self.code(v)).collect();
        let y = codes.iter().map(|&c| book[c as usize]).collect();
        Ok((
            CodeMatrix::new(x.rows(), x.cols(), self.levels(), codes)?,
            Matrix::from_vec(x.rows(), x.cols(), y)?,
        ))
    }

    pub fn forward(&self, x: &Matrix, cache: &mut QuantCache) -> Result<(CodeMatrix, Matrix)> {
        let out = self.quantize(x)?;
        cache.input = Some(x.clone());
        Ok(out)
    }

    /// Straight-through: gradient passes where `|x| <= scale`, zero outside.
    pub fn backward(&self, cache: &QuantCache, grad_y: &Matrix) -> Result<Matrix> {
        let x = cache.input(grad_y, "fixed_quantize backward")?;
        let s = self.scale;
        let g = x
            .as_slice()
            .iter()
            .zip(grad_y.as_slice())
            .map(|(&x, &g)| if x.abs() <= s { g } else { 0.0 })
            .collect();
        Matrix::from_vec(x.rows(), x.cols(), g)
    }
}
