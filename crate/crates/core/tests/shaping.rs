use cqcim::cimsim::DeviceProfile;
use cqcim::numkit::{finite_diff_grad, max_rel_err, stats, Matrix, Rng};
use cqcim::shaping::*;
use cqcim::training::{train, HeadInit, ModelConfig, ShapingModelState, TrainConfig, TrainingData};
use proptest::prelude::*;

fn weighted_sum(m: &Matrix, c: &Matrix) -> f64 {
    m.as_slice().iter().zip(c.as_slice()).map(|(a, b)| a * b).sum()
}

#[test]
fn noise_stdev_per_level_matches_profiles() {
    let per_level = 100_000;
    for profile in DeviceProfile::presets() {
        let k = profile.levels();
        // centers of each lookup bin; the batch spans [0, 1] so normalization is the identity
        let mut values: Vec<f64> = (0..k).flat_map(|l| std::iter::repeat_n((l as f64 + 0.5) / k as f64, per_level)).collect();
        values.push(0.0);
        values.push(1.0);
        let emb = Matrix::row_vector(&values).unwrap();
        let spec = NoiseSpec::new(profile.clone(), 1.0).unwrap();
        let noisy = inject_noise(&emb, &spec, &mut Rng::new(31)).unwrap();
        for level in 0..k {
            let range = level * per_level..(level + 1) * per_level;
            let diffs: Vec<f64> = range.map(|i| noisy.as_slice()[i] - values[i]).collect();
            let sd = stats::std_dev(&diffs);
            let want = profile.sigma_v[level];
            assert!((sd - want).abs() <= 0.1 * want, "{} level {level}: {sd} vs {want}", profile.name);
        }
    }
}

#[test]
fn zero_global_factor_is_bit_exact() {
    let mut rng = Rng::new(4);
    let emb = Matrix::from_fn(50, 20, |_, _| rng.normal()).unwrap();
    for profile in DeviceProfile::presets() {
        let spec = NoiseSpec::new(profile, 0.0).unwrap();
        let out = inject_noise(&emb, &spec, &mut rng).unwrap();
        let same = out.as_slice().iter().zip(emb.as_slice()).all(|(a, b)| a.to_bits() == b.to_bits());
        assert!(same);
    }
}

#[test]
fn compression_backward_matches_finite_differences() {
    let mut rng = Rng::new(7);
    for point in 0..20 {
        let (n, din, dout) = (1 + point % 4, 3 + point % 5, 1 + point % 3);
        let x = Matrix::from_fn(n, din, |_, _| rng.normal()).unwrap();
        let w = Matrix::from_fn(din, dout, |_, _| rng.normal()).unwrap();
        let b: Vec<f64> = (0..dout).map(|_| rng.normal()).collect();
        let c = Matrix::from_fn(n, dout, |_, _| rng.normal()).unwrap();
        let head = CompressionHead::new(w.clone(), b.clone()).unwrap();
        let mut cache = LinearCache::default();
        head.forward(&x, &mut cache).unwrap();
        let g = head.backward(&cache, &c).unwrap();

        let fw = |v: &[f64]| {
            let h = CompressionHead::new(Matrix::from_vec(din, dout, v.to_vec()).unwrap(), b.clone()).unwrap();
            weighted_sum(&h.apply(&x).unwrap(), &c)
        };
        assert!(max_rel_err(g.w.as_slice(), &finite_diff_grad(fw, w.as_slice(), 1e-5).unwrap(), 1e-8) < 1e-4);
        let fb = |v: &[f64]| weighted_sum(&CompressionHead::new(w.clone(), v.to_vec()).unwrap().apply(&x).unwrap(), &c);
        assert!(max_rel_err(&g.b, &finite_diff_grad(fb, &b, 1e-5).unwrap(), 1e-8) < 1e-4);
        let fx = |v: &[f64]| weighted_sum(&head.apply(&Matrix::from_vec(n, din, v.to_vec()).unwrap()).unwrap(), &c);
        assert!(max_rel_err(g.x.as_slice(), &finite_diff_grad(fx, x.as_slice(), 1e-5).unwrap(), 1e-8) < 1e-4);
    }
}

fn random_n2uq(levels: usize, rng: &mut Rng) -> N2uqQuantizer {
    let (lo, hi) = (-1.0 - rng.uniform(), 1.0 + rng.uniform());
    let mut t: Vec<f64> = (0..levels - 1).map(|_| lo + (hi - lo) * (0.05 + 0.9 * rng.uniform())).collect();
    t.sort_by(f64::total_cmp);
    // keep segments comfortably wider than the finite-difference step
    for i in 1..t.len() {
        t[i] = t[i].max(t[i - 1] + 0.05);
    }
    N2uqQuantizer::new(levels, t, lo, hi).unwrap()
}

#[test]
fn n2uq_backward_matches_surrogate_finite_differences() {
    let mut rng = Rng::new(8);
    for point in 0..20 {
        let levels = [2, 3, 4, 16][point % 4];
        let q = random_n2uq(levels, &mut rng);
        let (lo, hi) = q.range();
        let kinks: Vec<f64> = q.thresholds().iter().copied().chain([lo, hi]).collect();
        let x = Matrix::from_fn(3, 7, |_, _| loop {
            let v = lo - 0.2 + (hi - lo + 0.4) * rng.uniform();
            if kinks.iter().all(|k| (v - k).abs() > 1e-3) {
                break v;
            }
        })
        .unwrap();
        let c = Matrix::from_fn(3, 7, |_, _| rng.normal()).unwrap();
        let mut cache = QuantCache::default();
        q.forward(&x, &mut cache).unwrap();
        let (gx, gt) = q.backward(&cache, &c).unwrap();

        let sur = |q: &N2uqQuantizer, x: &[f64]| x.iter().zip(c.as_slice()).map(|(&v, w)| w * q.surrogate(v)).sum::<f64>();
        let num = finite_diff_grad(|v| sur(&q, v), x.as_slice(), 1e-5).unwrap();
        assert!(max_rel_err(gx.as_slice(), &num, 1e-8) < 1e-4, "point {point}: grad_x");
        let ft = |t: &[f64]| sur(&N2uqQuantizer::new(levels, t.to_vec(), lo, hi).unwrap(), x.as_slice());
        let num = finite_diff_grad(ft, q.thresholds(), 1e-5).unwrap();
        assert!(max_rel_err(&gt, &num, 1e-8) < 1e-4, "point {point}: grad_t {gt:?} vs {num:?}");
    }
}

#[test]
fn learned_thresholds_balance_skewed_codes() {
    let mut rng = Rng::new(1);
    let x = Matrix::from_fn(512, 25, |_, _| (0.8 * rng.normal()).exp()).unwrap();
    let mc = ModelConfig {
        dim: 25,
        init: HeadInit::Pca,
        ..ModelConfig::default()
    };
    let noise = NoiseSpec::new(DeviceProfile::preset("D-2").unwrap(), 0.1).unwrap();
    let st = ShapingModelState::init(&x, &mc, noise, 0).unwrap();
    let (st, _) = train(TrainingData::Embeddings(&x), st, &TrainConfig::default()).unwrap();

    let z = st.project(&x).unwrap();
    let fixed = FixedQuantizer::calibrated(Precision::TwoBit, z.as_slice()).unwrap();
    let fixed_h = stats::entropy_bits(&fixed.quantize(&z).unwrap().0.histogram());
    let learned_h = stats::entropy_bits(&st.shape(&x).unwrap().0.histogram());
    assert!(learned_h > fixed_h, "learned {learned_h} bits vs fixed {fixed_h} bits");
}

fn quantizers(scale: f64, t: &[f64]) -> Vec<Quantizer> {
    let mut t = t.to_vec();
    t.sort_by(f64::total_cmp);
    t.dedup();
    let mut qs: Vec<Quantizer> = [Precision::Binary, Precision::Ternary, Precision::TwoBit, Precision::Int4]
        .into_iter()
        .map(|p| Quantizer::Fixed(FixedQuantizer::new(p, scale).unwrap()))
        .collect();
    if t.len() == 3 {
        qs.push(Quantizer::N2uq(N2uqQuantizer::new(4, t, -scale, scale).unwrap()));
    }
    qs
}

proptest! {
    #[test]
    fn codes_are_monotone(a in -5.0f64..5.0, b in -5.0f64..5.0, scale in 0.1f64..3.0,
                          t in proptest::collection::vec(-0.09f64..0.09, 3)) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let t: Vec<f64> = t.iter().map(|v| v * 10.0 * scale).collect();
        for q in quantizers(scale, &t) {
            let codes = q.codes(&Matrix::row_vector(&[lo, hi]).unwrap()).unwrap();
            prop_assert!(codes.get(0, 0) <= codes.get(0, 1));
        }
    }

    #[test]
    fn outputs_lie_on_the_codebook(v in proptest::collection::vec(-5.0f64..5.0, 1..40), scale in 0.1f64..3.0) {
        let x = Matrix::row_vector(&v).unwrap();
        for q in quantizers(scale, &[-0.5 * scale, 0.1 * scale, 0.6 * scale]) {
            let levels = q.logical_levels();
            let (codes, y) = q.quantize_logical(&x).unwrap();
            for (c, y) in codes.as_slice().iter().zip(y.as_slice()) {
                prop_assert!((*c as usize) < q.levels());
                prop_assert_eq!(y.to_bits(), levels[*c as usize].to_bits());
            }
        }
    }

    #[test]
    fn level_lookup_is_monotone(a in -1.0f64..2.0, b in -1.0f64..2.0) {
        let t = [0.25, 0.5, 0.75];
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(find_level(lo, &t) <= find_level(hi, &t));
    }
}
