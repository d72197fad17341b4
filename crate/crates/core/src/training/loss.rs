use crate::error::{Error, Result};
use crate::numkit::{dot, l2_norm, Matrix};
use crate::training::LossConfig;

/// Contrastive loss value and its gradient w.r.t. each view.
#[derive(Clone, Debug)]
pub struct ContrastiveOutput {
    pub loss: f64,
    pub grad_anchor: Matrix,
    pub grad_positive: Matrix,
    pub grad_negative: Option<Matrix>,
}

fn unit_rows(m: &Matrix, which: &str) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let mut units = Vec::with_capacity(m.rows());
    let mut norms = Vec::with_capacity(m.rows());
    for (i, r) in m.iter_rows().enumerate() {
        let n = l2_norm(r);
        if !(n > 0.0) {
            return Err(Error::Numeric(format!("{which} row {i} has zero norm; cosine is undefined")));
        }
        units.push(r.iter().map(|v| v / n).collect());
        norms.push(n);
    }
    Ok((units, norms))
}

/// Backprop through `u = h / |h|`.
fn through_normalization(units: &[Vec<f64>], norms: &[f64], grad_u: &[Vec<f64>]) -> Result<Matrix> {
    let cols = units.first().map_or(0, Vec::len);
    let mut data = Vec::with_capacity(units.len() * cols);
    for ((u, n), g) in units.iter().zip(norms).zip(grad_u) {
        let ug = dot(u, g);
        data.extend(u.iter().zip(g).map(|(ui, gi)| (gi - ui * ug) / n));
    }
    Matrix::from_vec(units.len(), cols, data)
}

/// In-batch InfoNCE over cosine similarities. Anchor `i` is scored against
/// every positive (and every negative, when given); its own positive is
/// the target. Averaged over anchors.
pub fn contrastive_loss(
    anchor: &Matrix,
    positive: &Matrix,
    negative: Option<&Matrix>,
    cfg: &LossConfig,
) -> Result<ContrastiveOutput> {
    cfg.validate()?;
    if anchor.dims() != positive.dims() {
        return Err(Error::shape(
            "contrastive_loss",
            format!("{}x{}", anchor.rows(), anchor.cols()),
            format!("{}x{}", positive.rows(), positive.cols()),
        ));
    }
    if let Some(neg) = negative {
        if neg.dims() != anchor.dims() {
            return Err(Error::shape(
                "contrastive_loss",
                format!("{}x{}", anchor.rows(), anchor.cols()),
                format!("{}x{}", neg.rows(), neg.cols()),
            ));
        }
    }
    let n = anchor.rows();
    if n == 0 {
        return Err(Error::Input("contrastive loss on an empty batch".into()));
    }
    let tau = cfg.temperature;
    let (ua, na) = unit_rows(anchor, "anchor")?;
    let (up, np) = unit_rows(positive, "positive")?;
    let neg = negative.map(|m| unit_rows(m, "negative")).transpose()?;

    let cols = anchor.cols();
    let zero = || vec![vec![0.0; cols]; n];
    let (mut ga, mut gp) = (zero(), zero());
    let mut gn = neg.as_ref().map(|_| zero());
    let mut loss = 0.0;
    let inv_n = 1.0 / n as f64;
    for i in 0..n {
        let s: Vec<f64> = up.iter().map(|p| dot(&ua[i], p) / tau).collect();
        let t: Vec<f64> = neg
            .as_ref()
            .map(|(um, _)| um.iter().map(|m| dot(&ua[i], m) / tau).collect())
            .unwrap_or_default();
        let mx = s.iter().chain(&t).fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let es: Vec<f64> = s.iter().map(|v| (v - mx).exp()).collect();
        let et: Vec<f64> = t.iter().map(|v| (v - mx).exp()).collect();
        let z: f64 = es.iter().sum::<f64>() + et.iter().sum::<f64>();
        loss += -(s[i] - mx) + z.ln();

        for j in 0..n {
            let coef = (es[j] / z - if i == j { 1.0 } else { 0.0 }) * inv_n / tau;
            if coef == 0.0 {
                continue;
            }
            for c in 0..cols {
                ga[i][c] += coef * up[j][c];
                gp[j][c] += coef * ua[i][c];
            }
        }
        if let (Some((um, _)), Some(gn)) = (neg.as_ref(), gn.as_mut()) {
            for j in 0..n {
                let coef = et[j] / z * inv_n / tau;
                for c in 0..cols {
                    ga[i][c] += coef * um[j][c];
                    gn[j][c] += coef * ua[i][c];
                }
            }
        }
    }
    Ok(ContrastiveOutput {
        loss: loss * inv_n,
        grad_anchor: through_normalization(&ua, &na, &ga)?,
        grad_positive: through_normalization(&up, &np, &gp)?,
        grad_negative: match (neg, gn) {
            (Some((um, nm)), Some(g)) => Some(through_normalization(&um, &nm, &g)?),
            _ => None,
        },
    })
}

/// Mean squared error over all elements and its gradient w.r.t.
/// `reconstructed`.
pub fn mse_loss(orig: &Matrix, reconstructed: &Matrix) -> Result<(f64, Matrix)> {
    if orig.dims() != reconstructed.dims() {
        return Err(Error::shape(
            "mse_loss",
            format!("{}x{}", orig.rows(), orig.cols()),
            format!("{}x{}", reconstructed.rows(), reconstructed.cols()),
        ));
    }
    let count = orig.as_slice().len();
    if count == 0 {
        return Err(Error::Input("MSE of empty matrices".into()));
    }
    let diff = reconstructed.sub(orig)?;
    let loss = diff.as_slice().iter().map(|d| d * d).sum::<f64>() / count as f64;
    Ok((loss, diff.scale(2.0 / count as f64)?))
}

/// `L_CSE + λ·L_MSE`.
pub fn joint_loss(cse: f64, mse: f64, cfg: &LossConfig) -> f64 {
    cse + cfg.lambda_mse * mse
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(t: f64) -> LossConfig {
        LossConfig {
            temperature: t,
            lambda_mse: 8.0,
        }
    }

    #[test]
    fn single_pair_has_zero_loss() {
        let a = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        let p = Matrix::from_rows(&[[-3.0, 0.5]]).unwrap();
        assert!(contrastive_loss(&a, &p, None, &cfg(0.05)).unwrap().loss.abs() < 1e-15);
    }

    #[test]
    fn orthogonal_pair_closed_form() {
        // anchor i coincides with positive i, everything else orthogonal
        let a = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let out = contrastive_loss(&a, &a, None, &cfg(1.0)).unwrap();
        let e = std::f64::consts::E;
        assert!((out.loss + (e / (e + 1.0)).ln()).abs() < 1e-15);
        assert!((out.loss - 0.3133).abs() < 1e-4);
    }

    #[test]
    fn zero_row_is_reported() {
        let a = Matrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]]).unwrap();
        let err = contrastive_loss(&a, &a, None, &cfg(0.1)).unwrap_err();
        assert!(matches!(err, Error::Numeric(ref m) if m.contains("row 1")), "{err}");
    }

    #[test]
    fn mse_cases() {
        let z = Matrix::zeros(1, 2);
        let o = Matrix::from_rows(&[[1.0, 1.0]]).unwrap();
        assert_eq!(mse_loss(&z, &z).unwrap().0, 0.0);
        assert_eq!(mse_loss(&z, &o).unwrap().0, 1.0);
        assert!(mse_loss(&z, &Matrix::zeros(2, 1)).is_err());
    }

    #[test]
    fn joint_is_weighted_sum() {
        assert!((joint_loss(0.3, 0.1, &cfg(1.0)) - 1.1).abs() < 1e-15);
        let zero = LossConfig {
            lambda_mse: 0.0,
            ..cfg(1.0)
        };
        assert_eq!(joint_loss(0.3, 5.0, &zero), 0.3);
    }
}
