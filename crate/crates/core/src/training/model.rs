use serde::{Deserialize, Serialize};

use crate::baselines::pca_fit;
use crate::cimsim::DeviceProfile;
use crate::error::{Error, Result};
use crate::numkit::{matmul, random_orthonormal, stats, Matrix, Rng};
use crate::shaping::{CodeMatrix, CompressionHead, FixedQuantizer, N2uqQuantizer, NoiseSpec, Precision, Quantizer};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantizerKind {
    /// Learned thresholds, uniform outputs.
    N2uq,
    /// Data-independent symmetric codebook.
    Fixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadInit {
    /// Principal components of the training corpus, centered.
    Pca,
    /// Principal components followed by a seeded random rotation of the
    /// subspace, which spreads variance evenly over the output coordinates.
    RotatedPca,
    /// A random orthonormal projection, centered, with an independently
    /// drawn lift.
    Random,
}

/// Architecture of a shaping model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub dim: usize,
    pub precision: Precision,
    pub quantizer: QuantizerKind,
    /// Preset name (`D-1`..`D-5`) or path to a profile JSON, used by the
    /// training-time noise injector.
    pub device: String,
    pub init: HeadInit,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            dim: 128,
            precision: Precision::TwoBit,
            quantizer: QuantizerKind::N2uq,
            device: "D-2".into(),
            init: HeadInit::RotatedPca,
        }
    }
}

/// Per-parameter Adam moments.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AdamMoments {
    pub step: u64,
    pub m_w: Vec<f64>,
    pub v_w: Vec<f64>,
    pub m_b: Vec<f64>,
    pub v_b: Vec<f64>,
    pub m_t: Vec<f64>,
    pub v_t: Vec<f64>,
}

impl AdamMoments {
    pub fn zeros(w: usize, b: usize, t: usize) -> Self {
        Self {
            step: 0,
            m_w: vec![0.0; w],
            v_w: vec![0.0; w],
            m_b: vec![0.0; b],
            v_b: vec![0.0; b],
            m_t: vec![0.0; t],
            v_t: vec![0.0; t],
        }
    }
}

/// Learnable heads plus the frozen pieces training needs.
///
/// The reconstruction term compares the input with `y·lift + lift_offset`,
/// where `y` is the dequantized output; the lift is fixed at initialization
/// and `lift_offset` is the corpus mean.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapingModelState {
    pub head: CompressionHead,
    pub quantizer: Quantizer,
    pub noise: NoiseSpec,
    /// `d × D`, orthonormal rows.
    pub lift: Matrix,
    pub lift_offset: Vec<f64>,
    pub moments: AdamMoments,
}

impl ShapingModelState {
    /// Head from `cfg.init`, quantizer range calibrated on the projected
    /// corpus, lift set to the transpose of the initial projection.
    pub fn init(corpus: &Matrix, cfg: &ModelConfig, noise: NoiseSpec, seed: u64) -> Result<Self> {
        let (n, dim_in) = corpus.dims();
        if n == 0 {
            return Err(Error::Input("cannot initialize a model on an empty corpus".into()));
        }
        if cfg.dim == 0 || cfg.dim > dim_in {
            return Err(Error::Parameter(format!(
                "target dimension must be in 1..={dim_in}, got {}",
                cfg.dim
            )));
        }
        let rng = Rng::new(seed);
        let (w, lift, mean) = match cfg.init {
            HeadInit::Pca | HeadInit::RotatedPca => {
                let pca = pca_fit(corpus, cfg.dim)?;
                let mut w = pca.components().clone();
                if cfg.init == HeadInit::RotatedPca {
                    w = matmul(&w, &random_orthonormal(cfg.dim, cfg.dim, &mut rng.fork(0x11f8))?)?;
                }
                let lift = w.transpose();
                (w, lift, pca.mean().to_vec())
            }
            HeadInit::Random => {
                let w = random_orthonormal(dim_in, cfg.dim, &mut rng.fork(0x11f7))?;
                let lift = random_orthonormal(dim_in, cfg.dim, &mut rng.fork(0x11f9))?.transpose();
                let mean = (0..dim_in).map(|j| stats::mean(&corpus.column(j))).collect();
                (w, lift, mean)
            }
        };
        let shift = matmul(&Matrix::row_vector(&mean)?, &w)?;
        let b = shift.as_slice().iter().map(|v| -v).collect();
        let head = CompressionHead::new(w, b)?;
        let projected = head.apply(corpus)?;
        let quantizer = match cfg.quantizer {
            QuantizerKind::N2uq => {
                Quantizer::N2uq(N2uqQuantizer::calibrated(cfg.precision.levels(), projected.as_slice())?)
            }
            QuantizerKind::Fixed => {
                Quantizer::Fixed(FixedQuantizer::calibrated(cfg.precision, projected.as_slice())?)
            }
        };
        Self::new(head, quantizer, noise, lift, mean)
    }

    pub fn new(
        head: CompressionHead,
        quantizer: Quantizer,
        noise: NoiseSpec,
        lift: Matrix,
        lift_offset: Vec<f64>,
    ) -> Result<Self> {
        if lift.dims() != (head.output_dim(), head.input_dim()) {
            return Err(Error::shape(
                "ShapingModelState::new",
                format!("{}x{} lift", head.output_dim(), head.input_dim()),
                format!("{}x{}", lift.rows(), lift.cols()),
            ));
        }
        if lift_offset.len() != head.input_dim() {
            return Err(Error::shape("ShapingModelState::new", head.input_dim(), lift_offset.len()));
        }
        let moments = AdamMoments::zeros(
            head.input_dim() * head.output_dim(),
            head.output_dim(),
            quantizer.thresholds().len(),
        );
        Ok(Self {
            head,
            quantizer,
            noise,
            lift,
            lift_offset,
            moments,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.head.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.head.output_dim()
    }

    pub fn levels(&self) -> usize {
        self.quantizer.levels()
    }

    /// Inference-time shaping: compress then quantize, no noise.
    pub fn shape(&self, x: &Matrix) -> Result<(CodeMatrix, Matrix)> {
        self.quantizer.quantize_logical(&self.head.apply(x)?)
    }

    /// Compressed but unquantized vectors, the query side of retrieval.
    pub fn project(&self, x: &Matrix) -> Result<Matrix> {
        self.head.apply(x)
    }

    /// `y·lift + lift_offset`.
    pub fn lift_back(&self, y: &Matrix) -> Result<Matrix> {
        let mut out = matmul(y, &self.lift)?;
        for i in 0..out.rows() {
            for (v, o) in out.row_mut(i).iter_mut().zip(&self.lift_offset) {
                *v += o;
            }
        }
        Ok(out)
    }

    /// Reconstruction MSE of `x` through shape → lift.
    pub fn reconstruction_mse(&self, x: &Matrix) -> Result<f64> {
        let (_, y) = self.shape(x)?;
        Ok(crate::training::mse_loss(x, &self.lift_back(&y)?)?.0)
    }
}

/// Resolves a preset name or a profile JSON path.
pub fn resolve_device(spec: &str) -> Result<DeviceProfile> {
    match DeviceProfile::preset(spec) {
        Ok(p) => Ok(p),
        Err(preset_err) => {
            let path = std::path::Path::new(spec);
            if path.exists() {
                DeviceProfile::load(path)
            } else {
                Err(preset_err)
            }
        }
    }
}
