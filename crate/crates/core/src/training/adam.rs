use crate::error::{Error, Result};
use crate::numkit::Matrix;
use crate::training::{ShapingModelState, TrainConfig};

/// Gradients for every learnable parameter of a shaping model.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub w: Matrix,
    pub b: Vec<f64>,
    pub t: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(state: &ShapingModelState) -> Self {
        Self {
            w: Matrix::zeros(state.input_dim(), state.output_dim()),
            b: vec![0.0; state.output_dim()],
            t: vec![0.0; state.quantizer.thresholds().len()],
        }
    }
}

fn check(name: &str, g: &[f64]) -> Result<()> {
    if let Some(i) = g.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("non-finite gradient for {name}[{i}]")));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn update(p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64], lr: f64, b1: f64, b2: f64, eps: f64, t: i32) {
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for i in 0..p.len() {
        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
        let mh = m[i] / c1;
        let vh = v[i] / c2;
        p[i] -= lr * mh / (vh.sqrt() + eps);
    }
}

/// One bias-corrected Adam step on W, b and the thresholds, followed by
/// threshold re-projection.
pub fn adam_step(state: &mut ShapingModelState, grads: &Gradients, cfg: &TrainConfig) -> Result<()> {
    let n_t = state.quantizer.thresholds().len();
    if grads.w.dims() != state.head.weights().dims() || grads.b.len() != state.output_dim() || grads.t.len() != n_t {
        return Err(Error::shape(
            "adam_step",
            format!(
                "W {}x{}, b {}, t {}",
                state.input_dim(),
                state.output_dim(),
                state.output_dim(),
                n_t
            ),
            format!("W {}x{}, b {}, t {}", grads.w.rows(), grads.w.cols(), grads.b.len(), grads.t.len()),
        ));
    }
    check("W", grads.w.as_slice())?;
    check("b", &grads.b)?;
    check("thresholds", &grads.t)?;

    let mo = &mut state.moments;
    mo.step += 1;
    let t = i32::try_from(mo.step).unwrap_or(i32::MAX);
    let (lr, b1, b2, eps) = (cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
    {
        let (w, b) = state.head.params_mut();
        update(w.data_mut(), grads.w.as_slice(), &mut mo.m_w, &mut mo.v_w, lr, b1, b2, eps, t);
        update(b, &grads.b, &mut mo.m_b, &mut mo.v_b, lr, b1, b2, eps, t);
        w.check_finite("adam_step W")?;
    }
    if n_t > 0 {
        let mut th = state.quantizer.thresholds().to_vec();
        update(&mut th, &grads.t, &mut mo.m_t, &mut mo.v_t, lr, b1, b2, eps, t);
        state.quantizer.set_thresholds(&th)?;
    }
    Ok(())
}
