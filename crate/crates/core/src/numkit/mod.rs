//! Dense numeric kernels, seeded randomness and the finite-difference
//! gradient oracle every learnable piece is checked against.

mod matrix;
mod rng;
pub mod stats;

pub use matrix::{dot, l2_norm, matmul, matmul_nt, matmul_tn, Matrix};
pub use rng::{gaussian, Rng};

use crate::error::{Error, Result};

/// Central-difference gradient `(f(x + h eᵢ) - f(x - h eᵢ)) / 2h`.
pub fn finite_diff_grad(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(Error::Parameter(format!("finite difference step must be > 0, got {h}")));
    }
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let up = f(&probe);
        probe[i] = orig - h;
        let down = f(&probe);
        probe[i] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::Numeric(format!(
                "objective not finite around component {i} (f+={up}, f-={down})"
            )));
        }
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}

/// `rows × cols` matrix with orthonormal columns: Gram-Schmidt on Gaussian
/// draws.
pub fn random_orthonormal(rows: usize, cols: usize, rng: &mut Rng) -> Result<Matrix> {
    if cols > rows {
        return Err(Error::Parameter(format!(
            "cannot fit {cols} orthonormal columns in {rows} dimensions"
        )));
    }
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(cols);
    while basis.len() < cols {
        let mut v: Vec<f64> = (0..rows).map(|_| rng.normal()).collect();
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &v);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let n = l2_norm(&v);
        // a draw (numerically) inside the current span is simply redrawn
        if n > 1e-8 {
            basis.push(v.into_iter().map(|x| x / n).collect());
        }
    }
    Matrix::from_fn(rows, cols, |i, j| basis[j][i])
}

/// Largest componentwise relative error, with `floor` guarding tiny entries.
pub fn max_rel_err(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic() {
        let g = finite_diff_grad(|x| x[0] * x[0], &[3.0], 1e-5).unwrap();
        assert!((g[0] - 6.0).abs() < 1e-6);
    }

    #[test]
    fn orthonormal_columns() {
        let q = random_orthonormal(12, 5, &mut Rng::new(3)).unwrap();
        let g = matmul_tn(&q, &q).unwrap();
        assert!(g.max_abs_diff(&Matrix::identity(5)) < 1e-12);
        assert!(random_orthonormal(3, 4, &mut Rng::new(3)).is_err());
    }

    #[test]
    fn constant_has_zero_gradient() {
        let g = finite_diff_grad(|_| 4.2, &[1.0, -2.0, 0.5], 1e-5).unwrap();
        assert_eq!(g, vec![0.0; 3]);
    }

    #[test]
    fn non_finite_objective_is_reported() {
        let err = finite_diff_grad(|x| 1.0 / x[0], &[0.0], 1e-5);
        assert!(err.is_ok()); // 1/±h is finite
        let err = finite_diff_grad(|x| (x[0] - 1e-5).ln(), &[0.0], 1e-5);
        assert!(matches!(err, Err(Error::Numeric(_))));
    }

    #[test]
    fn bad_step_rejected() {
        assert!(finite_diff_grad(|x| x[0], &[0.0], 0.0).is_err());
    }
}
