//! Seeded clustered corpora for tests, benchmarks and the acceptance suite.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{l2_norm, Matrix, Rng};
use crate::retrieval::Qrels;

/// Gaussian clusters around random unit centers, rows L2-normalized like
/// sentence embeddings. Queries are fresh draws from the same clusters and
/// every document of a query's cluster is relevant to it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSpec {
    pub docs: usize,
    pub queries: usize,
    pub dim: usize,
    pub clusters: usize,
    /// Norm of the within-cluster offset relative to the unit center.
    pub spread: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            docs: 1024,
            queries: 64,
            dim: 384,
            clusters: 8,
            spread: 3.0,
            seed: 7,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SynthCorpus {
    pub docs: Matrix,
    pub queries: Matrix,
    pub qrels: Qrels,
    pub doc_cluster: Vec<usize>,
    pub query_cluster: Vec<usize>,
}

impl SynthSpec {
    pub fn generate(&self) -> Result<SynthCorpus> {
        if self.clusters == 0 || self.dim == 0 || self.docs < self.clusters {
            return Err(Error::Parameter(format!(
                "need dim > 0 and at least one document per cluster (docs={}, clusters={})",
                self.docs, self.clusters
            )));
        }
        if !(self.spread.is_finite() && self.spread >= 0.0) {
            return Err(Error::Parameter(format!("spread must be >= 0, got {}", self.spread)));
        }
        let root = Rng::new(self.seed);
        let mut rng = root.fork(0);
        let centers: Vec<Vec<f64>> = (0..self.clusters).map(|_| unit(&mut rng, self.dim)).collect();
        let sigma = self.spread / (self.dim as f64).sqrt();

        let draw = |rng: &mut Rng, n: usize| -> Result<(Matrix, Vec<usize>)> {
            let mut data = Vec::with_capacity(n * self.dim);
            let mut labels = Vec::with_capacity(n);
            for i in 0..n {
                let c = i % self.clusters;
                let row: Vec<f64> = centers[c].iter().map(|m| m + sigma * rng.normal()).collect();
                let norm = l2_norm(&row).max(f64::MIN_POSITIVE);
                data.extend(row.iter().map(|v| v / norm));
                labels.push(c);
            }
            Ok((Matrix::from_vec(n, self.dim, data)?, labels))
        };
        let (docs, doc_cluster) = draw(&mut root.fork(1), self.docs)?;
        let (queries, query_cluster) = draw(&mut root.fork(2), self.queries)?;

        let mut qrels = Qrels::default();
        for (q, &cq) in query_cluster.iter().enumerate() {
            for (d, &cd) in doc_cluster.iter().enumerate() {
                if cq == cd {
                    qrels.insert(q, d, 1);
                }
            }
        }
        Ok(SynthCorpus {
            docs,
            queries,
            qrels,
            doc_cluster,
            query_cluster,
        })
    }
}

fn unit(rng: &mut Rng, dim: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
    let n = l2_norm(&v);
    v.into_iter().map(|x| x / n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_and_labels() {
        let s = SynthSpec {
            docs: 40,
            queries: 6,
            dim: 12,
            clusters: 4,
            ..SynthSpec::default()
        };
        let c = s.generate().unwrap();
        assert_eq!(c.docs.dims(), (40, 12));
        assert_eq!(c.queries.dims(), (6, 12));
        assert_eq!(c.qrels.relevant(0).unwrap().len(), 10);
        for r in c.docs.iter_rows() {
            assert!((l2_norm(r) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn seeded() {
        let s = SynthSpec::default();
        assert_eq!(s.generate().unwrap().docs, s.generate().unwrap().docs);
    }
}
