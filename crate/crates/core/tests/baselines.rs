use cqcim::baselines::*;
use cqcim::numkit::{dot, l2_norm, matmul_tn, stats, Matrix, Rng};
use cqcim::retrieval::rank_scores;
use cqcim::synth::SynthSpec;
use proptest::prelude::*;

fn gaussian(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = Rng::new(seed);
    Matrix::from_fn(rows, cols, |_, j| rng.normal() * (1.0 + j as f64 * 0.3)).unwrap()
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
fn jacobi_eigenvalues(a: &Matrix) -> Vec<f64> {
    let n = a.rows();
    let mut m: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| a.get(i, j)).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[i][j] * m[i][j]).sum();
        if off < 1e-24 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[i][i]).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

fn covariance(x: &Matrix) -> Matrix {
    let (n, d) = x.dims();
    let mean: Vec<f64> = (0..d).map(|j| stats::mean(&x.column(j))).collect();
    let xc = Matrix::from_fn(n, d, |i, j| x.get(i, j) - mean[j]).unwrap();
    matmul_tn(&xc, &xc).unwrap().scale(1.0 / (n - 1) as f64).unwrap()
}

fn reconstruction_error(x: &Matrix, d: usize) -> f64 {
    let model = pca_fit(x, d).unwrap();
    let back = model.reconstruct(&pca_project(&model, x).unwrap()).unwrap();
    back.as_slice().iter().zip(x.as_slice()).map(|(a, b)| (a - b).powi(2)).sum()
}

#[test]
fn explained_variance_matches_jacobi() {
    let x = gaussian(100, 10, 1);
    let oracle = jacobi_eigenvalues(&covariance(&x));
    let model = pca_fit(&x, 3).unwrap();
    let total: f64 = oracle.iter().sum();
    let want: f64 = oracle[..3].iter().sum::<f64>() / total;
    let got: f64 = model.eigenvalues().iter().sum::<f64>() / total;
    assert!((got - want).abs() < 1e-6, "{got} vs {want}");
    for (g, w) in model.eigenvalues().iter().zip(&oracle) {
        assert!((g - w).abs() < 1e-6 * w.max(1.0));
    }
}

#[test]
fn full_rank_reconstruction_is_exact() {
    let x = gaussian(50, 8, 2);
    assert!(reconstruction_error(&x, 8) < 1e-8 * 50.0 * 8.0);
    let model = pca_fit(&x, 8).unwrap();
    let back = model.reconstruct(&pca_project(&model, &x).unwrap()).unwrap();
    assert!(back.max_abs_diff(&x) < 1e-8);
}

#[test]
fn components_are_orthonormal_and_sorted() {
    let x = gaussian(120, 12, 3);
    let model = pca_fit(&x, 6).unwrap();
    let g = matmul_tn(model.components(), model.components()).unwrap();
    assert!(g.max_abs_diff(&Matrix::identity(6)) < 1e-8);
    let ev = model.eigenvalues();
    assert!(ev.windows(2).all(|w| w[0] >= w[1]) && ev.iter().all(|&v| v >= 0.0));
    // sign convention: first non-negligible coordinate of every component is positive
    for j in 0..6 {
        let c = model.components().column(j);
        let first = c.iter().find(|v| v.abs() > 1e-12).unwrap();
        assert!(*first > 0.0);
    }
}

#[test]
fn component_direction_projects_to_unit_coordinate() {
    let x = gaussian(60, 5, 4);
    let model = pca_fit(&x, 3).unwrap();
    for j in 0..3 {
        let row: Vec<f64> = model.mean().iter().zip(model.components().column(j)).map(|(m, c)| m + c).collect();
        let y = pca_project(&model, &Matrix::row_vector(&row).unwrap()).unwrap();
        for k in 0..3 {
            let want = if k == j { 1.0 } else { 0.0 };
            assert!((y.get(0, k) - want).abs() < 1e-9);
        }
    }
}

#[test]
fn reconstruction_error_shrinks_with_dimension() {
    let x = gaussian(80, 10, 5);
    let errs: Vec<f64> = (1..=10).map(|d| reconstruction_error(&x, d)).collect();
    assert!(errs.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{errs:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_never_gains_energy(seed in any::<u64>(), d in 1usize..6) {
        let x = gaussian(30, 6, seed % 1000);
        let model = pca_fit(&x, d).unwrap();
        let mut rng = Rng::new(seed);
        let probe: Vec<f64> = (0..6).map(|_| 3.0 * rng.normal()).collect();
        let y = pca_project(&model, &Matrix::row_vector(&probe).unwrap()).unwrap();
        let centered: Vec<f64> = probe.iter().zip(model.mean()).map(|(a, m)| a - m).collect();
        prop_assert!(l2_norm(y.row(0)) <= l2_norm(&centered) * (1.0 + 1e-12));
    }
}

#[test]
fn vanilla_truncation_examples() {
    let x = Matrix::row_vector(&[1.0, 2.0, 3.0, 4.0]).unwrap();
    assert_eq!(vanilla_truncate(&x, 2).unwrap().as_slice(), &[1.0, 2.0]);
    assert_eq!(vanilla_truncate(&x, 4).unwrap(), x);
    assert!(vanilla_truncate(&x, 5).is_err());
}

#[test]
fn two_cluster_kmeans_fixed_point() {
    let mut rng = Rng::new(6);
    let centers = [[5.0, -3.0, 1.0], [-4.0, 2.0, 0.5]];
    let x = Matrix::from_fn(200, 3, |i, j| centers[i % 2][j] + 0.3 * rng.normal()).unwrap();
    let book = pq_fit(&x, 1, 2, 9).unwrap();
    for (c, _) in centers.iter().enumerate() {
        let mean: Vec<f64> = (0..3).map(|j| (c..200).step_by(2).map(|i| x.get(i, j)).sum::<f64>() / 100.0).collect();
        let found = (0..2).any(|k| book.centroid(0, k).iter().zip(&mean).all(|(a, b)| (a - b).abs() < 1e-6));
        assert!(found, "no centroid at cluster mean {mean:?}");
    }
}

#[test]
fn pq_scores_track_exact_ranking() {
    // 16 centroids per 8-D subspace is half a bit per coordinate, so only a
    // corpus with tight cluster structure can be ranked this faithfully
    let c = SynthSpec {
        docs: 256,
        queries: 32,
        dim: 32,
        spread: 0.25,
        ..SynthSpec::default()
    }
    .generate()
    .unwrap();
    let book = pq_fit(&c.docs, 4, 16, 3).unwrap();
    let codes = book.encode(&c.docs).unwrap();
    for (i, q) in c.queries.iter_rows().enumerate() {
        let approx = book.score(q, &codes).unwrap();
        let exact: Vec<f64> = c.docs.iter_rows().map(|r| dot(q, r)).collect();
        let rho = stats::spearman(&approx, &exact);
        assert!(rho > 0.9, "query {i}: spearman {rho}");
    }
}

#[test]
fn exhaustive_codebook_reproduces_exact_mips() {
    let x = gaussian(40, 6, 10);
    let book = pq_fit(&x, 1, 40, 1).unwrap();
    let codes = book.encode(&x).unwrap();
    let mut rng = Rng::new(11);
    let q: Vec<f64> = (0..6).map(|_| rng.normal()).collect();
    let approx = book.score(&q, &codes).unwrap();
    let exact: Vec<f64> = x.iter_rows().map(|r| dot(&q, r)).collect();
    for (a, e) in approx.iter().zip(&exact) {
        assert!((a - e).abs() < 1e-12);
    }
    let ids = |s: &[f64]| rank_scores(s, 40).into_iter().map(|(i, _)| i).collect::<Vec<_>>();
    assert_eq!(ids(&approx), ids(&exact));
}

#[test]
fn baselines_are_deterministic() {
    let x = gaussian(64, 16, 12);
    assert_eq!(pq_fit(&x, 4, 8, 5).unwrap(), pq_fit(&x, 4, 8, 5).unwrap());
    let (a, b) = (pca_fit(&x, 4).unwrap(), pca_fit(&x, 4).unwrap());
    assert_eq!(a.components(), b.components());
}
