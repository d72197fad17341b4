//! The data path downstream of the encoder:
//! compression head → noise injector → quantization head.

mod codes;
mod compression;
mod fixed;
mod n2uq;
mod noise;
mod precision;

pub use codes::CodeMatrix;
pub use compression::{CompressionHead, LinearCache, LinearGrads};
pub use fixed::FixedQuantizer;
pub use n2uq::N2uqQuantizer;
pub use noise::{find_level, inject_noise, NoiseSpec};
pub use precision::Precision;

use crate::error::{Error, Result};
use crate::numkit::Matrix;

/// Input recorded by a quantizer's forward pass.
#[derive(Clone, Debug, Default)]
pub struct QuantCache {
    input: Option<Matrix>,
}

impl QuantCache {
    fn input(&self, grad: &Matrix, op: &str) -> Result<&Matrix> {
        let x = self
            .input
            .as_ref()
            .ok_or_else(|| Error::State(format!("{op} called before forward")))?;
        if x.dims() != grad.dims() {
            return Err(Error::Shape {
                op: "quantizer backward",
                expected: format!("{}x{}", x.rows(), x.cols()),
                got: format!("{}x{}", grad.rows(), grad.cols()),
            });
        }
        Ok(x)
    }
}

/// Quantization head of a shaping model.
///
/// Both variants are driven through their *logical* values (the codebook on
/// the input value scale), which is what reconstruction and similarity are
/// computed on.
#[derive(Clone, Debug, PartialEq)]
pub enum Quantizer {
    N2uq(N2uqQuantizer),
    Fixed(FixedQuantizer),
}

impl Quantizer {
    pub fn levels(&self) -> usize {
        match self {
            Quantizer::N2uq(q) => q.levels(),
            Quantizer::Fixed(q) => q.levels(),
        }
    }

    pub fn precision(&self) -> Option<Precision> {
        match self {
            Quantizer::N2uq(q) => Precision::from_levels(q.levels()),
            Quantizer::Fixed(q) => Some(q.mode()),
        }
    }

    /// Logical value of every code; always uniformly spaced.
    pub fn logical_levels(&self) -> Vec<f64> {
        match self {
            Quantizer::N2uq(q) => q.logical_levels(),
            Quantizer::Fixed(q) => q.codebook(),
        }
    }

    /// Learnable thresholds (empty for fixed quantizers).
    pub fn thresholds(&self) -> &[f64] {
        match self {
            Quantizer::N2uq(q) => q.thresholds(),
            Quantizer::Fixed(_) => &[],
        }
    }

    pub fn set_thresholds(&mut self, t: &[f64]) -> Result<()> {
        match self {
            Quantizer::N2uq(q) => q.set_thresholds(t),
            Quantizer::Fixed(_) if t.is_empty() => Ok(()),
            Quantizer::Fixed(_) => Err(Error::Parameter("fixed quantizer has no thresholds".into())),
        }
    }

    pub fn codes(&self, x: &Matrix) -> Result<CodeMatrix> {
        Ok(self.quantize_logical(x)?.0)
    }

    /// Codes and logical values, no activation cache.
    pub fn quantize_logical(&self, x: &Matrix) -> Result<(CodeMatrix, Matrix)> {
        match self {
            Quantizer::N2uq(q) => {
                let (codes, _) = q.quantize(x)?;
                let book = q.logical_levels();
                let v = codes.as_slice().iter().map(|&c| book[c as usize]).collect();
                Ok((codes, Matrix::from_vec(x.rows(), x.cols(), v)?))
            }
            Quantizer::Fixed(q) => q.quantize(x),
        }
    }

    pub fn forward_logical(&self, x: &Matrix, cache: &mut QuantCache) -> Result<(CodeMatrix, Matrix)> {
        let out = self.quantize_logical(x)?;
        cache.input = Some(x.clone());
        Ok(out)
    }

    /// Gradient w.r.t. the input and the thresholds, given the gradient
    /// w.r.t. the logical output.
    pub fn backward_logical(&self, cache: &QuantCache, grad_v: &Matrix) -> Result<(Matrix, Vec<f64>)> {
        match self {
            Quantizer::N2uq(q) => {
                let (lo, hi) = q.range();
                q.backward(cache, &grad_v.scale(hi - lo)?)
            }
            Quantizer::Fixed(q) => Ok((q.backward(cache, grad_v)?, Vec::new())),
        }
    }

    /// Logical-value surrogate used by the straight-through backward pass.
    pub fn surrogate_logical(&self, x: f64) -> f64 {
        match self {
            Quantizer::N2uq(q) => {
                let (lo, hi) = q.range();
                lo + (hi - lo) * q.surrogate(x)
            }
            Quantizer::Fixed(q) => x.clamp(-q.scale(), q.scale()),
        }
    }
}
