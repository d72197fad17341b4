use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{dot, Matrix};

/// Ranked top-k lists for a set of queries plus the grid coordinates they
/// were produced under.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub method: String,
    pub precision: String,
    pub dim: usize,
    pub device: String,
    /// One list per query, ordered by (score desc, doc asc).
    pub rankings: Vec<Vec<(usize, f64)>>,
}

impl RunResult {
    pub fn new(rankings: Vec<Vec<(usize, f64)>>) -> Self {
        Self {
            method: "exact".into(),
            precision: "fp".into(),
            dim: 0,
            device: "ideal".into(),
            rankings,
        }
    }

    pub fn labeled(mut self, method: &str, precision: &str, dim: usize, device: &str) -> Self {
        self.method = method.into();
        self.precision = precision.into();
        self.dim = dim;
        self.device = device.into();
        self
    }

    pub fn ranked_docs(&self, query: usize) -> impl Iterator<Item = usize> + '_ {
        self.rankings[query].iter().map(|&(d, _)| d)
    }
}

/// Top `k` of `scores`, highest first, ties broken by lower index.
pub fn rank_scores(scores: &[f64], k: usize) -> Vec<(usize, f64)> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    let by = |a: &usize, b: &usize| scores[*b].total_cmp(&scores[*a]).then(a.cmp(b));
    let k = k.min(scores.len());
    if k < idx.len() && k > 0 {
        idx.select_nth_unstable_by(k - 1, by);
        idx.truncate(k);
    }
    idx.sort_unstable_by(by);
    idx.truncate(k);
    idx.into_iter().map(|i| (i, scores[i])).collect()
}

/// Exhaustive inner-product search.
pub fn exact_mips(queries: &Matrix, corpus: &Matrix, k: usize) -> Result<RunResult> {
    if queries.cols() != corpus.cols() {
        return Err(Error::shape("exact_mips", corpus.cols(), queries.cols()));
    }
    let k = clamp_k(k, corpus.rows());
    let rankings = (0..queries.rows())
        .into_par_iter()
        .map(|i| {
            let q = queries.row(i);
            let scores: Vec<f64> = corpus.iter_rows().map(|d| dot(q, d)).collect();
            rank_scores(&scores, k)
        })
        .collect();
    Ok(RunResult::new(rankings).labeled("exact", "fp", corpus.cols(), "ideal"))
}

pub(crate) fn clamp_k(k: usize, n: usize) -> usize {
    if k > n {
        warn!("requested top-{k} from {n} documents; returning all {n}");
        n
    } else {
        k
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_break_by_doc_id() {
        let r = rank_scores(&[1.0, 3.0, 3.0, 0.5, 3.0], 4);
        assert_eq!(r.iter().map(|p| p.0).collect::<Vec<_>>(), vec![1, 2, 4, 0]);
    }

    #[test]
    fn k_is_clamped() {
        let c = Matrix::identity(3);
        let r = exact_mips(&Matrix::row_vector(&[0.2, 0.9, 0.1]).unwrap(), &c, 10).unwrap();
        assert_eq!(r.rankings[0].len(), 3);
        assert_eq!(r.rankings[0][0], (1, 0.9));
    }

    #[test]
    fn shape_mismatch() {
        assert!(exact_mips(&Matrix::zeros(1, 2), &Matrix::zeros(4, 3), 1).is_err());
    }
}
