//! Product quantization with asymmetric inner-product scoring.

use log::warn;

use crate::error::{Error, Result};
use crate::numkit::{dot, Matrix, Rng};

pub const KMEANS_ITERATIONS: usize = 25;

/// `m` sub-codebooks of `k` centroids, each `D/m` wide.
#[derive(Clone, Debug, PartialEq)]
pub struct PqCodebook {
    m: usize,
    k: usize,
    sub_dim: usize,
    /// `[subspace][centroid][coord]`
    centroids: Vec<f64>,
}

/// One centroid index per subspace per document.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PqCodes {
    n: usize,
    m: usize,
    codes: Vec<u8>,
}

impl PqCodebook {
    pub fn new(m: usize, k: usize, sub_dim: usize, centroids: Vec<f64>) -> Result<Self> {
        if m == 0 || sub_dim == 0 || !(1..=256).contains(&k) {
            return Err(Error::Parameter(format!(
                "invalid PQ geometry m={m}, k={k}, sub_dim={sub_dim}"
            )));
        }
        if centroids.len() != m * k * sub_dim {
            return Err(Error::shape("PqCodebook::new", m * k * sub_dim, centroids.len()));
        }
        if centroids.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite centroid".into()));
        }
        Ok(Self {
            m,
            k,
            sub_dim,
            centroids,
        })
    }

    pub fn subspaces(&self) -> usize {
        self.m
    }

    pub fn centroids_per_subspace(&self) -> usize {
        self.k
    }

    pub fn sub_dim(&self) -> usize {
        self.sub_dim
    }

    pub fn dim(&self) -> usize {
        self.m * self.sub_dim
    }

    pub fn raw_centroids(&self) -> &[f64] {
        &self.centroids
    }

    pub fn centroid(&self, sub: usize, c: usize) -> &[f64] {
        let at = (sub * self.k + c) * self.sub_dim;
        &self.centroids[at..at + self.sub_dim]
    }

    pub fn encode(&self, x: &Matrix) -> Result<PqCodes> {
        if x.cols() != self.dim() {
            return Err(Error::shape("pq_encode", self.dim(), x.cols()));
        }
        let mut codes = Vec::with_capacity(x.rows() * self.m);
        for r in x.iter_rows() {
            for s in 0..self.m {
                let v = &r[s * self.sub_dim..(s + 1) * self.sub_dim];
                codes.push(nearest(v, &self.centroids[s * self.k * self.sub_dim..], self.k, self.sub_dim).0 as u8);
            }
        }
        PqCodes::new(x.rows(), self.m, codes)
    }

    /// Centroid reconstruction of encoded documents.
    pub fn decode(&self, codes: &PqCodes) -> Result<Matrix> {
        if codes.m != self.m {
            return Err(Error::shape("pq_decode", self.m, codes.m));
        }
        let mut data = Vec::with_capacity(codes.n * self.dim());
        for i in 0..codes.n {
            for (s, &c) in codes.row(i).iter().enumerate() {
                data.extend_from_slice(self.centroid(s, c as usize));
            }
        }
        Matrix::from_vec(codes.n, self.dim(), data)
    }

    /// Inner product of a float query with every encoded document via
    /// per-subspace lookup tables.
    pub fn score(&self, query: &[f64], codes: &PqCodes) -> Result<Vec<f64>> {
        if query.len() != self.dim() {
            return Err(Error::shape("pq_score", self.dim(), query.len()));
        }
        if codes.m != self.m {
            return Err(Error::shape("pq_score", self.m, codes.m));
        }
        let mut lut = Vec::with_capacity(self.m * self.k);
        for s in 0..self.m {
            let q = &query[s * self.sub_dim..(s + 1) * self.sub_dim];
            lut.extend((0..self.k).map(|c| dot(q, self.centroid(s, c))));
        }
        Ok((0..codes.n)
            .map(|i| {
                codes
                    .row(i)
                    .iter()
                    .enumerate()
                    .map(|(s, &c)| lut[s * self.k + c as usize])
                    .sum()
            })
            .collect())
    }
}

impl PqCodes {
    pub fn new(n: usize, m: usize, codes: Vec<u8>) -> Result<Self> {
        if codes.len() != n * m {
            return Err(Error::shape("PqCodes::new", n * m, codes.len()));
        }
        Ok(Self { n, m, codes })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn subspaces(&self) -> usize {
        self.m
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.codes[i * self.m..(i + 1) * self.m]
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.codes
    }
}

/// Independent k-means (k-means++ seeding, then Lloyd) in each of `m`
/// contiguous subspaces.
pub fn pq_fit(corpus: &Matrix, m: usize, k: usize, seed: u64) -> Result<PqCodebook> {
    let (n, dim) = corpus.dims();
    if m == 0 || dim % m != 0 {
        return Err(Error::Parameter(format!("dimension {dim} is not divisible into {m} subspaces")));
    }
    if !(1..=256).contains(&k) {
        return Err(Error::Parameter(format!("PQ centroids per subspace must be in 1..=256, got {k}")));
    }
    if k > n {
        return Err(Error::Parameter(format!("{k} centroids requested from {n} rows")));
    }
    let sub_dim = dim / m;
    let rng = Rng::new(seed);
    let mut centroids = Vec::with_capacity(m * k * sub_dim);
    for s in 0..m {
        let points: Vec<&[f64]> = corpus.iter_rows().map(|r| &r[s * sub_dim..(s + 1) * sub_dim]).collect();
        centroids.extend(kmeans(&points, k, &mut rng.fork(s as u64), s));
    }
    PqCodebook::new(m, k, sub_dim, centroids)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index and squared distance of the closest of `k` packed centroids;
/// ties go to the lower index.
fn nearest(v: &[f64], packed: &[f64], k: usize, sub_dim: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..k {
        let d = sq_dist(v, &packed[c * sub_dim..(c + 1) * sub_dim]);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn kmeans(points: &[&[f64]], k: usize, rng: &mut Rng, sub: usize) -> Vec<f64> {
    let dim = points[0].len();
    let n = points.len();

    // k-means++ seeding
    let mut cent = Vec::with_capacity(k * dim);
    cent.extend_from_slice(points[rng.below(n)]);
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &cent[..dim])).collect();
    let mut duplicated = false;
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.uniform() * total;
            let mut idx = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    idx = i;
                    break;
                }
                target -= w;
            }
            idx
        } else {
            duplicated = true;
            rng.below(n)
        };
        let c = cent.len() / dim;
        cent.extend_from_slice(points[pick]);
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &cent[c * dim..]));
        }
    }
    if duplicated {
        warn!("k-means on subspace {sub}: fewer distinct points than {k} centroids, centroids duplicated");
    }

    let mut assign = vec![usize::MAX; n];
    let mut dist = vec![0.0; n];
    for _ in 0..KMEANS_ITERATIONS {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let (c, d) = nearest(p, &cent, k, dim);
            changed |= assign[i] != c;
            assign[i] = c;
            dist[i] = d;
        }
        if !changed {
            break;
        }
        let mut sums = vec![0.0; k * dim];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter().zip(&assign) {
            counts[c] += 1;
            for (s, v) in sums[c * dim..(c + 1) * dim].iter_mut().zip(*p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for (dst, s) in cent[c * dim..(c + 1) * dim].iter_mut().zip(&sums[c * dim..]) {
                    *dst = s / counts[c] as f64;
                }
            } else {
                // re-seed to the point worst served by its centroid
                let far = (0..n).fold(0, |b, i| if dist[i] > dist[b] { i } else { b });
                cent[c * dim..(c + 1) * dim].copy_from_slice(points[far]);
                dist[far] = 0.0;
            }
        }
    }
    cent
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_geometry() {
        let x = Matrix::zeros(10, 6);
        assert!(pq_fit(&x, 4, 2, 0).is_err());
        assert!(pq_fit(&x, 3, 11, 0).is_err());
        assert!(pq_fit(&x, 3, 257, 0).is_err());
    }

    #[test]
    fn identical_rows_duplicate_centroids() {
        let x = Matrix::from_fn(5, 2, |_, j| j as f64).unwrap();
        let cb = pq_fit(&x, 1, 3, 9).unwrap();
        for c in 0..3 {
            assert_eq!(cb.centroid(0, c), &[0.0, 1.0]);
        }
    }

    #[test]
    fn decode_matches_lookup_scores() {
        let mut rng = Rng::new(6);
        let x = Matrix::from_fn(40, 8, |_, _| rng.normal()).unwrap();
        let cb = pq_fit(&x, 2, 5, 1).unwrap();
        let codes = cb.encode(&x).unwrap();
        let dec = cb.decode(&codes).unwrap();
        let q: Vec<f64> = (0..8).map(|_| rng.normal()).collect();
        let s = cb.score(&q, &codes).unwrap();
        for (i, r) in dec.iter_rows().enumerate() {
            assert!((s[i] - dot(&q, r)).abs() < 1e-12);
        }
    }
}
