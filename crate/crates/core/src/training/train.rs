use log::{debug, info};

use crate::error::{Error, Result};
use crate::numkit::{matmul_nt, Matrix, Rng};
use crate::shaping::{inject_noise, LinearCache, QuantCache};
use crate::training::{
    adam_step, contrastive_loss, ForwardMode, joint_loss, make_views, mse_loss, Gradients, LossConfig, PairMode,
    ShapingModelState, TrainConfig, ViewBatch,
};

#[derive(Clone, Debug)]
pub struct StepOutput {
    pub loss: f64,
    pub cse: f64,
    pub mse: f64,
    pub grads: Gradients,
}

/// Training input: bare embeddings (views made by dropout) or exported
/// views.
#[derive(Clone, Copy, Debug)]
pub enum TrainingData<'a> {
    Embeddings(&'a Matrix),
    Views(&'a ViewBatch),
}

impl TrainingData<'_> {
    fn anchor(&self) -> &Matrix {
        match self {
            TrainingData::Embeddings(m) => m,
            TrainingData::Views(v) => &v.anchor,
        }
    }
}

struct ViewPass {
    linear: LinearCache,
    quant: QuantCache,
    y: Matrix,
}

fn view_forward(state: &ShapingModelState, x: &Matrix, mode: ForwardMode, rng: &mut Rng) -> Result<ViewPass> {
    let mut linear = LinearCache::default();
    let mut quant = QuantCache::default();
    let z = state.head.forward(x, &mut linear)?;
    let z = inject_noise(&z, &state.noise, rng)?;
    let (_, y) = state.quantizer.forward_logical(&z, &mut quant)?;
    let y = match mode {
        ForwardMode::StraightThrough => y,
        ForwardMode::Surrogate => z.map(|v| state.quantizer.surrogate_logical(v))?,
    };
    Ok(ViewPass { linear, quant, y })
}

fn view_backward(state: &ShapingModelState, pass: &ViewPass, grad_y: &Matrix, acc: &mut Gradients) -> Result<()> {
    let (gz, gt) = state.quantizer.backward_logical(&pass.quant, grad_y)?;
    let g = state.head.backward(&pass.linear, &gz)?;
    acc.w = acc.w.add(&g.w)?;
    acc.b.iter_mut().zip(&g.b).for_each(|(a, b)| *a += b);
    acc.t.iter_mut().zip(&gt).for_each(|(a, b)| *a += b);
    Ok(())
}

/// Joint loss of one batch and its gradient w.r.t. W, b and the thresholds.
/// The reconstruction term compares `batch.anchor` with the lifted anchor
/// output.
pub fn loss_and_grads(
    state: &ShapingModelState,
    batch: &ViewBatch,
    loss_cfg: &LossConfig,
    mode: ForwardMode,
    rng: &mut Rng,
) -> Result<StepOutput> {
    let a = view_forward(state, &batch.anchor, mode, rng)?;
    let p = view_forward(state, &batch.positive, mode, rng)?;
    let n = batch
        .negative
        .as_ref()
        .map(|m| view_forward(state, m, mode, rng))
        .transpose()?;

    let cse = contrastive_loss(&a.y, &p.y, n.as_ref().map(|v| &v.y), loss_cfg)?;
    let (mse, grad_recon) = mse_loss(&batch.anchor, &state.lift_back(&a.y)?)?;
    let grad_a = if loss_cfg.lambda_mse > 0.0 {
        cse.grad_anchor
            .add(&matmul_nt(&grad_recon, &state.lift)?.scale(loss_cfg.lambda_mse)?)?
    } else {
        cse.grad_anchor
    };

    let mut grads = Gradients::zeros_like(state);
    view_backward(state, &a, &grad_a, &mut grads)?;
    view_backward(state, &p, &cse.grad_positive, &mut grads)?;
    if let (Some(n), Some(g)) = (n.as_ref(), cse.grad_negative.as_ref()) {
        view_backward(state, n, g, &mut grads)?;
    }
    Ok(StepOutput {
        loss: joint_loss(cse.loss, mse, loss_cfg),
        cse: cse.loss,
        mse,
        grads,
    })
}

/// Runs `cfg.epochs` passes of shuffled mini-batches and returns the model
/// with the mean joint loss of every epoch.
pub fn train(data: TrainingData<'_>, mut state: ShapingModelState, cfg: &TrainConfig) -> Result<(ShapingModelState, Vec<f64>)> {
    cfg.validate()?;
    let anchor = data.anchor();
    if anchor.rows() == 0 {
        return Err(Error::Input("training corpus is empty".into()));
    }
    if anchor.cols() != state.input_dim() {
        return Err(Error::shape("train", state.input_dim(), anchor.cols()));
    }
    if cfg.pair_mode == PairMode::FromFile && matches!(data, TrainingData::Embeddings(_)) {
        return Err(Error::Input("pair_mode 'from_file' needs exported paired views".into()));
    }
    state.noise = state.noise.clone().with_sigma_g(cfg.sigma_g)?;

    let mut rng = Rng::new(cfg.seed);
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let order = rng.permutation(anchor.rows());
        let mut total = 0.0;
        let mut batches = 0usize;
        for (step, rows) in order.chunks(cfg.batch_size).enumerate() {
            let batch = match (data, cfg.pair_mode) {
                (TrainingData::Views(v), PairMode::FromFile) => v.select(rows),
                _ => make_views(&anchor.select_rows(rows), cfg, &mut rng)?,
            };
            let out = loss_and_grads(&state, &batch, &cfg.loss, cfg.forward, &mut rng)?;
            if !out.loss.is_finite() {
                return Err(Error::Numeric(format!("epoch {epoch}, step {step}: loss became {}", out.loss)));
            }
            adam_step(&mut state, &out.grads, cfg)
                .map_err(|e| Error::Numeric(format!("epoch {epoch}, step {step}: {e}")))?;
            debug!("epoch {epoch} step {step}: cse {:.5} mse {:.6}", out.cse, out.mse);
            total += out.loss;
            batches += 1;
        }
        let mean = total / batches as f64;
        info!("epoch {epoch}: mean loss {mean:.6}");
        curve.push(mean);
    }
    Ok((state, curve))
}
