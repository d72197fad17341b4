use crate::error::{Error, Result};
use crate::numkit::{matmul, matmul_nt, matmul_tn, Matrix};

/// Dense projection `y = x·W + b` from `D_in` down to `d_out` dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct CompressionHead {
    w: Matrix,
    b: Vec<f64>,
}

/// Activations recorded by [`CompressionHead::forward`] for the backward pass.
#[derive(Clone, Debug, Default)]
pub struct LinearCache {
    input: Option<Matrix>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearGrads {
    pub w: Matrix,
    pub b: Vec<f64>,
    pub x: Matrix,
}

impl CompressionHead {
    pub fn new(w: Matrix, b: Vec<f64>) -> Result<Self> {
        if w.cols() > w.rows() {
            return Err(Error::Parameter(format!(
                "compression head cannot expand: {} -> {}",
                w.rows(),
                w.cols()
            )));
        }
        if b.len() != w.cols() {
            return Err(Error::shape("CompressionHead::new", w.cols(), b.len()));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite bias".into()));
        }
        Ok(Self { w, b })
    }

    pub fn input_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn weights(&self) -> &Matrix {
        &self.w
    }

    pub fn bias(&self) -> &[f64] {
        &self.b
    }

    pub(crate) fn params_mut(&mut self) -> (&mut Matrix, &mut Vec<f64>) {
        (&mut self.w, &mut self.b)
    }

    /// Projection without recording activations.
    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.w.rows() {
            return Err(Error::shape("compress_forward", self.w.rows(), x.cols()));
        }
        let mut out = matmul(x, &self.w)?;
        for i in 0..out.rows() {
            for (o, b) in out.row_mut(i).iter_mut().zip(&self.b) {
                *o += b;
            }
        }
        out.check_finite("compress_forward")?;
        Ok(out)
    }

    pub fn forward(&self, x: &Matrix, cache: &mut LinearCache) -> Result<Matrix> {
        let out = self.apply(x)?;
        cache.input = Some(x.clone());
        Ok(out)
    }

    pub fn backward(&self, cache: &LinearCache, grad_out: &Matrix) -> Result<LinearGrads> {
        let x = cache
            .input
            .as_ref()
            .ok_or_else(|| Error::State("compress_backward called before compress_forward".into()))?;
        if grad_out.dims() != (x.rows(), self.w.cols()) {
            return Err(Error::shape(
                "compress_backward",
                format!("{}x{}", x.rows(), self.w.cols()),
                format!("{}x{}", grad_out.rows(), grad_out.cols()),
            ));
        }
        let gw = matmul_tn(x, grad_out)?;
        let mut gb = vec![0.0; self.w.cols()];
        for r in grad_out.iter_rows() {
            for (g, v) in gb.iter_mut().zip(r) {
                *g += v;
            }
        }
        let gx = matmul_nt(grad_out, &self.w)?;
        Ok(LinearGrads { w: gw, b: gb, x: gx })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{finite_diff_grad, max_rel_err, Rng};

    #[test]
    fn identity_head_passes_through() {
        let head = CompressionHead::new(Matrix::identity(3), vec![0.0; 3]).unwrap();
        let x = Matrix::from_rows(&[[1.0, -2.0, 3.5]]).unwrap();
        assert_eq!(head.apply(&x).unwrap(), x);
    }

    #[test]
    fn hand_computed_projection() {
        let head = CompressionHead::new(Matrix::from_rows(&[[1.0], [-1.0]]).unwrap(), vec![0.5]).unwrap();
        let y = head.apply(&Matrix::from_rows(&[[1.0, 1.0]]).unwrap()).unwrap();
        assert_eq!(y.as_slice(), &[0.5]);
    }

    #[test]
    fn rejects_expansion_and_bad_input() {
        assert!(CompressionHead::new(Matrix::zeros(2, 3), vec![0.0; 3]).is_err());
        let head = CompressionHead::new(Matrix::zeros(3, 2), vec![0.0; 2]).unwrap();
        assert!(matches!(head.apply(&Matrix::zeros(1, 2)), Err(Error::Shape { .. })));
    }

    #[test]
    fn backward_requires_forward() {
        let head = CompressionHead::new(Matrix::zeros(3, 2), vec![0.0; 2]).unwrap();
        let err = head.backward(&LinearCache::default(), &Matrix::zeros(1, 2));
        assert!(matches!(err, Err(Error::State(_))));
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = Rng::new(1);
        let head = CompressionHead::new(Matrix::from_fn(4, 2, |_, _| rng.normal()).unwrap(), vec![0.1, 0.2]).unwrap();
        let mut cache = LinearCache::default();
        let x = Matrix::from_fn(3, 4, |_, _| rng.normal()).unwrap();
        head.forward(&x, &mut cache).unwrap();
        let g = head.backward(&cache, &Matrix::zeros(3, 2)).unwrap();
        assert!(g.w.as_slice().iter().chain(&g.b).chain(g.x.as_slice()).all(|&v| v == 0.0));
    }

    #[test]
    fn scalar_weight_gradient() {
        let head = CompressionHead::new(Matrix::from_rows(&[[0.7]]).unwrap(), vec![0.0]).unwrap();
        let mut cache = LinearCache::default();
        head.forward(&Matrix::from_rows(&[[2.5]]).unwrap(), &mut cache).unwrap();
        let g = head.backward(&cache, &Matrix::from_rows(&[[-1.5]]).unwrap()).unwrap();
        assert_eq!(g.w.as_slice(), &[-1.5 * 2.5]);
        assert_eq!(g.x.as_slice(), &[-1.5 * 0.7]);
    }

    #[test]
    fn matches_finite_differences() {
        let mut rng = Rng::new(17);
        let (n, din, dout) = (5, 6, 3);
        let w = Matrix::from_fn(din, dout, |_, _| rng.normal()).unwrap();
        let b: Vec<f64> = (0..dout).map(|_| rng.normal()).collect();
        let x = Matrix::from_fn(n, din, |_, _| rng.normal()).unwrap();
        let c = Matrix::from_fn(n, dout, |_, _| rng.normal()).unwrap();
        // loss = Σ c ⊙ y, so dL/dy = c
        let head = CompressionHead::new(w.clone(), b.clone()).unwrap();
        let mut cache = LinearCache::default();
        head.forward(&x, &mut cache).unwrap();
        let g = head.backward(&cache, &c).unwrap();

        let loss_w = |p: &[f64]| {
            let h = CompressionHead::new(Matrix::from_vec(din, dout, p.to_vec()).unwrap(), b.clone()).unwrap();
            let y = h.apply(&x).unwrap();
            y.as_slice().iter().zip(c.as_slice()).map(|(a, b)| a * b).sum::<f64>()
        };
        let num = finite_diff_grad(loss_w, w.as_slice(), 1e-5).unwrap();
        assert!(max_rel_err(g.w.as_slice(), &num, 1e-6) < 1e-4);

        let loss_x = |p: &[f64]| {
            let y = head.apply(&Matrix::from_vec(n, din, p.to_vec()).unwrap()).unwrap();
            y.as_slice().iter().zip(c.as_slice()).map(|(a, b)| a * b).sum::<f64>()
        };
        let num = finite_diff_grad(loss_x, x.as_slice(), 1e-5).unwrap();
        assert!(max_rel_err(g.x.as_slice(), &num, 1e-6) < 1e-4);
    }
}
