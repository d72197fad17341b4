use crate::error::{Error, Result};
use crate::numkit::Matrix;
use crate::shaping::CodeMatrix;

/// Integer codes plus the level → signed logical value map: what gets
/// programmed into the crossbar.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantizedCorpus {
    codes: CodeMatrix,
    dequant: Vec<f64>,
}

impl QuantizedCorpus {
    pub fn new(codes: CodeMatrix, dequant: Vec<f64>) -> Result<Self> {
        if dequant.len() != codes.levels() {
            return Err(Error::Parameter(format!(
                "dequantization map has {} entries for {} levels",
                dequant.len(),
                codes.levels()
            )));
        }
        if dequant.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite dequantization value".into()));
        }
        Ok(Self { codes, dequant })
    }

    pub fn codes(&self) -> &CodeMatrix {
        &self.codes
    }

    pub fn dequant(&self) -> &[f64] {
        &self.dequant
    }

    pub fn levels(&self) -> usize {
        self.codes.levels()
    }

    pub fn len(&self) -> usize {
        self.codes.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.codes.cols()
    }

    pub fn with_codes(&self, codes: CodeMatrix) -> Result<Self> {
        Self::new(codes, self.dequant.clone())
    }

    /// Logical values of every code.
    pub fn dequantize(&self) -> Matrix {
        let data = self
            .codes
            .as_slice()
            .iter()
            .map(|&c| self.dequant[c as usize])
            .collect();
        Matrix::from_vec(self.codes.rows(), self.codes.cols(), data).expect("finite dequant map")
    }

    /// `(offset, step)` such that `dequant[k] == offset + step * k`, when the
    /// map is uniform (every quantizer in this crate produces one).
    pub fn affine_map(&self) -> Option<(f64, f64)> {
        let k = self.dequant.len();
        let offset = self.dequant[0];
        let step = (self.dequant[k - 1] - offset) / (k - 1) as f64;
        let scale = self.dequant.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);
        let uniform = self
            .dequant
            .iter()
            .enumerate()
            .all(|(i, v)| (offset + step * i as f64 - v).abs() <= 1e-12 * scale);
        uniform.then_some((offset, step))
    }
}
