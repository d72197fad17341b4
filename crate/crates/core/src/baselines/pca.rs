use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::numkit::{matmul, matmul_nt, matmul_tn, Matrix};

/// Iteration cap handed to the eigensolver.
pub const PCA_MAX_ITERATIONS: usize = 10_000;

/// Top principal components of a corpus.
#[derive(Clone, Debug, PartialEq)]
pub struct PcaModel {
    mean: Vec<f64>,
    /// `D × d`, orthonormal columns, descending eigenvalue.
    components: Matrix,
    eigenvalues: Vec<f64>,
}

impl PcaModel {
    pub fn new(mean: Vec<f64>, components: Matrix, eigenvalues: Vec<f64>) -> Result<Self> {
        if mean.len() != components.rows() {
            return Err(Error::shape("PcaModel::new", components.rows(), mean.len()));
        }
        if eigenvalues.len() != components.cols() {
            return Err(Error::shape("PcaModel::new", components.cols(), eigenvalues.len()));
        }
        if eigenvalues.iter().any(|&l| !(l >= 0.0)) || eigenvalues.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Parameter("eigenvalues must be nonnegative and non-increasing".into()));
        }
        Ok(Self {
            mean,
            components,
            eigenvalues,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.components.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.components.cols()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn components(&self) -> &Matrix {
        &self.components
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Maps projected coordinates back into the input space.
    pub fn reconstruct(&self, y: &Matrix) -> Result<Matrix> {
        if y.cols() != self.output_dim() {
            return Err(Error::shape("pca_reconstruct", self.output_dim(), y.cols()));
        }
        let mut x = matmul_nt(y, &self.components)?;
        for i in 0..x.rows() {
            for (v, m) in x.row_mut(i).iter_mut().zip(&self.mean) {
                *v += m;
            }
        }
        Ok(x)
    }
}

/// Top-`d` principal components from a symmetric eigendecomposition of the
/// sample covariance.
pub fn pca_fit(corpus: &Matrix, d: usize) -> Result<PcaModel> {
    let (n, dim) = corpus.dims();
    if d == 0 || d > dim {
        return Err(Error::Parameter(format!("PCA target dimension must be in 1..={dim}, got {d}")));
    }
    if n < d {
        return Err(Error::Parameter(format!("PCA needs at least {d} rows, got {n}")));
    }
    let mean: Vec<f64> = (0..dim)
        .map(|j| corpus.iter_rows().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let centered = center(corpus, &mean)?;
    let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
    let cov = matmul_tn(&centered, &centered)?.scale(1.0 / denom)?;
    let eig = DMatrix::from_row_slice(dim, dim, cov.as_slice())
        .try_symmetric_eigen(f64::EPSILON, PCA_MAX_ITERATIONS)
        .ok_or_else(|| {
            Error::Numeric(format!("covariance eigensolver did not converge in {PCA_MAX_ITERATIONS} sweeps"))
        })?;

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut components = Matrix::zeros(dim, d);
    let mut eigenvalues = Vec::with_capacity(d);
    for (j, &src) in order.iter().take(d).enumerate() {
        let mut v: Vec<f64> = eig.eigenvectors.column(src).iter().copied().collect();
        sign_normalize(&mut v);
        for (i, x) in v.into_iter().enumerate() {
            components.set(i, j, x);
        }
        eigenvalues.push(eig.eigenvalues[src].max(0.0));
    }
    PcaModel::new(mean, components, eigenvalues)
}

/// `(x - mean) · components`.
pub fn pca_project(model: &PcaModel, x: &Matrix) -> Result<Matrix> {
    if x.cols() != model.input_dim() {
        return Err(Error::shape("pca_project", model.input_dim(), x.cols()));
    }
    matmul(&center(x, &model.mean)?, &model.components)
}

fn center(x: &Matrix, mean: &[f64]) -> Result<Matrix> {
    let mut data = x.as_slice().to_vec();
    for row in data.chunks_exact_mut(mean.len().max(1)) {
        for (v, m) in row.iter_mut().zip(mean) {
            *v -= m;
        }
    }
    Matrix::from_vec(x.rows(), x.cols(), data)
}

/// First coordinate of non-negligible magnitude made positive.
fn sign_normalize(v: &mut [f64]) {
    let big = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-9 * big) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::Rng;

    #[test]
    fn diagonal_line_gives_diagonal_component() {
        let x = Matrix::from_fn(20, 2, |i, _| i as f64 - 9.5).unwrap();
        let m = pca_fit(&x, 1).unwrap();
        let c = m.components().column(0);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((c[0] - r).abs() < 1e-9 && (c[1] - r).abs() < 1e-9, "{c:?}");
    }

    #[test]
    fn projecting_the_mean_gives_zero() {
        let mut rng = Rng::new(4);
        let x = Matrix::from_fn(30, 5, |_, _| rng.normal()).unwrap();
        let m = pca_fit(&x, 3).unwrap();
        let y = pca_project(&m, &Matrix::row_vector(m.mean()).unwrap()).unwrap();
        assert!(y.as_slice().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn rejects_bad_dimension() {
        let x = Matrix::zeros(10, 4);
        assert!(matches!(pca_fit(&x, 5), Err(Error::Parameter(_))));
        assert!(matches!(pca_fit(&x, 0), Err(Error::Parameter(_))));
        assert!(matches!(pca_fit(&Matrix::zeros(2, 4), 3), Err(Error::Parameter(_))));
    }

    #[test]
    fn constant_corpus_has_zero_variance() {
        let x = Matrix::from_fn(6, 3, |_, j| j as f64).unwrap();
        let m = pca_fit(&x, 2).unwrap();
        assert_eq!(m.eigenvalues(), &[0.0, 0.0]);
    }
}
