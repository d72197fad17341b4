use crate::error::{Error, Result};
use crate::numkit::{l2_norm, Matrix};

/// First `d` coordinates of every row.
pub fn vanilla_truncate(x: &Matrix, d: usize) -> Result<Matrix> {
    if d > x.cols() {
        return Err(Error::Parameter(format!(
            "cannot truncate {}-dim rows to {d} dimensions",
            x.cols()
        )));
    }
    Ok(x.column_range(0, d))
}

/// Rows scaled to unit length; all-zero rows are left alone.
pub fn normalize_rows(x: &Matrix) -> Result<Matrix> {
    let mut data = Vec::with_capacity(x.as_slice().len());
    for r in x.iter_rows() {
        let n = l2_norm(r);
        let n = if n > 0.0 { n } else { 1.0 };
        data.extend(r.iter().map(|v| v / n));
    }
    Matrix::from_vec(x.rows(), x.cols(), data)
}
