use crate::error::{Error, Result};
use crate::numkit::{Matrix, Rng};
use crate::training::{PairMode, TrainConfig};

/// Row-aligned views of one batch: `positive[i]` is a second view of
/// `anchor[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ViewBatch {
    pub anchor: Matrix,
    pub positive: Matrix,
    pub negative: Option<Matrix>,
}

impl ViewBatch {
    pub fn new(anchor: Matrix, positive: Matrix, negative: Option<Matrix>) -> Result<Self> {
        if positive.dims() != anchor.dims() || negative.as_ref().is_some_and(|n| n.dims() != anchor.dims()) {
            return Err(Error::shape(
                "ViewBatch::new",
                format!("{}x{} for every view", anchor.rows(), anchor.cols()),
                "mismatched view blocks",
            ));
        }
        Ok(Self {
            anchor,
            positive,
            negative,
        })
    }

    pub fn len(&self) -> usize {
        self.anchor.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.anchor.rows() == 0
    }

    pub fn select(&self, rows: &[usize]) -> Self {
        Self {
            anchor: self.anchor.select_rows(rows),
            positive: self.positive.select_rows(rows),
            negative: self.negative.as_ref().map(|n| n.select_rows(rows)),
        }
    }
}

/// Inverted dropout: each component is zeroed with probability `p` and the
/// survivors are scaled by `1/(1-p)`. `p = 1` zeroes everything.
pub fn dropout(x: &Matrix, p: f64, rng: &mut Rng) -> Result<Matrix> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Parameter(format!("dropout rate must be in [0, 1], got {p}")));
    }
    if p == 0.0 {
        return Ok(x.clone());
    }
    let keep = if p < 1.0 { 1.0 / (1.0 - p) } else { 0.0 };
    let data = x
        .as_slice()
        .iter()
        .map(|&v| if rng.uniform() < p { 0.0 } else { v * keep })
        .collect();
    Matrix::from_vec(x.rows(), x.cols(), data)
}

/// Builds dropout views of `embeddings`. Exported views are not available
/// here; use [`ViewBatch::select`] on the loaded file instead.
pub fn make_views(embeddings: &Matrix, cfg: &TrainConfig, rng: &mut Rng) -> Result<ViewBatch> {
    match cfg.pair_mode {
        PairMode::FromFile => Err(Error::Input(
            "pair_mode 'from_file' needs exported paired views".into(),
        )),
        PairMode::SyntheticDropout => {
            let positive = dropout(embeddings, cfg.dropout_rate_pos, rng)?;
            let negative = cfg
                .dropout_rate_neg
                .map(|p| dropout(embeddings, p, rng))
                .transpose()?;
            ViewBatch::new(embeddings.clone(), positive, negative)
        }
    }
}
