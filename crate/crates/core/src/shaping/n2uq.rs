//! Nonuniform-to-uniform quantizer.
//!
//! A learnable piecewise-linear warp `g` sends the clamp range
//! `[lo, hi]` onto `[0, K-1]` with knots
//!
//! ```text
//! x:  lo   t₁    t₂   ...  t_{K-1}    hi
//! g:  0    0.5   1.5  ...  K-1.5      K-1
//! ```
//!
//! and the code is `round(g(x))`, so the thresholds `tₖ` are exactly the
//! decision boundaries. Output levels `k / (K-1)` stay uniform. The
//! backward pass differentiates the surrogate `g(x) / (K-1)` (straight
//! through the rounding), which reaches the thresholds through the two
//! segments adjacent to each knot.

use crate::error::{Error, Result};
use crate::numkit::{stats, Matrix};
use crate::shaping::{CodeMatrix, QuantCache};

#[derive(Clone, Debug, PartialEq)]
pub struct N2uqQuantizer {
    levels: usize,
    thresholds: Vec<f64>,
    range_lo: f64,
    range_hi: f64,
}

/// Minimum gap between knots, relative to the clamp range.
const MIN_GAP: f64 = 1e-6;

impl N2uqQuantizer {
    pub fn new(levels: usize, thresholds: Vec<f64>, range_lo: f64, range_hi: f64) -> Result<Self> {
        if !(2..=256).contains(&levels) {
            return Err(Error::Parameter(format!("N2UQ levels must be in 2..=256, got {levels}")));
        }
        if !(range_lo.is_finite() && range_hi.is_finite() && range_lo < range_hi) {
            return Err(Error::Parameter(format!("invalid clamp range [{range_lo}, {range_hi}]")));
        }
        if thresholds.len() != levels - 1 {
            return Err(Error::Parameter(format!(
                "{levels}-level quantizer needs {} thresholds, got {}",
                levels - 1,
                thresholds.len()
            )));
        }
        let mut knots = Vec::with_capacity(levels + 1);
        knots.push(range_lo);
        knots.extend_from_slice(&thresholds);
        knots.push(range_hi);
        if knots.iter().any(|v| !v.is_finite()) || knots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Parameter(
                "thresholds must be strictly increasing inside the clamp range".into(),
            ));
        }
        Ok(Self {
            levels,
            thresholds,
            range_lo,
            range_hi,
        })
    }

    /// Thresholds at `lo + (k - ½)·(hi - lo)/(K - 1)`: the warp starts out
    /// linear, i.e. as a plain uniform quantizer over `[lo, hi]`.
    pub fn uniform(levels: usize, range_lo: f64, range_hi: f64) -> Result<Self> {
        let step = (range_hi - range_lo) / (levels.max(2) - 1) as f64;
        let t = (1..levels).map(|k| range_lo + (k as f64 - 0.5) * step).collect();
        Self::new(levels, t, range_lo, range_hi)
    }

    /// Clamp range from the 1st/99th percentile of `data`.
    pub fn calibrated(levels: usize, data: &[f64]) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Input("cannot calibrate on empty data".into()));
        }
        let lo = stats::percentile(data, 1.0);
        let hi = stats::percentile(data, 99.0);
        if !(hi > lo) {
            return Err(Error::Parameter(format!(
                "calibration batch is degenerate (p1 = p99 = {lo})"
            )));
        }
        Self::uniform(levels, lo, hi)
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn range(&self) -> (f64, f64) {
        (self.range_lo, self.range_hi)
    }

    /// Normalized output levels `k / (K-1)`.
    pub fn out_levels(&self) -> Vec<f64> {
        let top = (self.levels - 1) as f64;
        (0..self.levels).map(|k| k as f64 / top).collect()
    }

    /// Output levels mapped back onto the input value scale:
    /// `lo + (hi - lo)·k/(K-1)`.
    pub fn logical_levels(&self) -> Vec<f64> {
        let span = self.range_hi - self.range_lo;
        self.out_levels().iter().map(|y| self.range_lo + span * y).collect()
    }

    /// Sets new thresholds and restores strict ordering inside the range.
    pub fn set_thresholds(&mut self, t: &[f64]) -> Result<()> {
        if t.len() != self.thresholds.len() {
            return Err(Error::shape("N2uqQuantizer::set_thresholds", self.thresholds.len(), t.len()));
        }
        if let Some(i) = t.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("threshold {i} is not finite")));
        }
        self.thresholds.copy_from_slice(t);
        self.project();
        Ok(())
    }

    /// Re-projection onto `lo < t₁ < … < t_{K-1} < hi` with a minimum gap.
    pub fn project(&mut self) {
        let gap = MIN_GAP * (self.range_hi - self.range_lo);
        let mut prev = self.range_lo;
        for t in self.thresholds.iter_mut() {
            *t = t.max(prev + gap);
            prev = *t;
        }
        let mut next = self.range_hi;
        for t in self.thresholds.iter_mut().rev() {
            *t = t.min(next - gap);
            next = *t;
        }
    }

    #[inline]
    fn knot(&self, i: usize) -> f64 {
        if i == 0 {
            self.range_lo
        } else if i == self.levels {
            self.range_hi
        } else {
            self.thresholds[i - 1]
        }
    }

    #[inline]
    fn knot_target(&self, i: usize) -> f64 {
        if i == 0 {
            0.0
        } else if i == self.levels {
            (self.levels - 1) as f64
        } else {
            i as f64 - 0.5
        }
    }

    /// Segment containing `x` (assumed inside the clamp range).
    #[inline]
    fn segment(&self, x: f64) -> usize {
        self.thresholds.partition_point(|&t| t <= x)
    }

    /// Warp value `g(x)`, clamped to `[0, K-1]`.
    pub fn warp(&self, x: f64) -> f64 {
        if x <= self.range_lo {
            return 0.0;
        }
        if x >= self.range_hi {
            return (self.levels - 1) as f64;
        }
        let s = self.segment(x);
        let (p0, p1) = (self.knot(s), self.knot(s + 1));
        let (g0, g1) = (self.knot_target(s), self.knot_target(s + 1));
        g0 + (g1 - g0) * (x - p0) / (p1 - p0)
    }

    /// Code of `x`: the number of thresholds at or below it.
    #[inline]
    pub fn code(&self, x: f64) -> u8 {
        self.segment(x) as u8
    }

    /// Differentiable surrogate `g(x)/(K-1)`.
    pub fn surrogate(&self, x: f64) -> f64 {
        self.warp(x) / (self.levels - 1) as f64
    }

    pub fn quantize(&self, x: &Matrix) -> Result<(CodeMatrix, Matrix)> {
        let out = self.out_levels();
        let codes: Vec<u8> = x.as_slice().iter().map(|&v| self.code(v)).collect();
        let y = codes.iter().map(|&c| out[c as usize]).collect();
        Ok((
            CodeMatrix::new(x.rows(), x.cols(), self.levels, codes)?,
            Matrix::from_vec(x.rows(), x.cols(), y)?,
        ))
    }

    pub fn forward(&self, x: &Matrix, cache: &mut QuantCache) -> Result<(CodeMatrix, Matrix)> {
        let out = self.quantize(x)?;
        cache.input = Some(x.clone());
        Ok(out)
    }

    /// Gradients of the surrogate w.r.t. the input and the thresholds.
    pub fn backward(&self, cache: &QuantCache, grad_y: &Matrix) -> Result<(Matrix, Vec<f64>)> {
        let x = cache.input(grad_y, "n2uq backward")?;
        let top = (self.levels - 1) as f64;
        let mut gx = Vec::with_capacity(x.as_slice().len());
        let mut gt = vec![0.0; self.thresholds.len()];
        for (&xv, &gy) in x.as_slice().iter().zip(grad_y.as_slice()) {
            if !(self.range_lo..=self.range_hi).contains(&xv) || gy == 0.0 {
                gx.push(0.0);
                continue;
            }
            let s = self.segment(xv).min(self.levels - 1);
            let (p0, p1) = (self.knot(s), self.knot(s + 1));
            let h = self.knot_target(s + 1) - self.knot_target(s);
            let len = p1 - p0;
            let scale = gy / top;
            gx.push(scale * h / len);
            // ∂g/∂p0 = h (x - p1) / len², ∂g/∂p1 = -h (x - p0) / len²
            if s >= 1 {
                gt[s - 1] += scale * h * (xv - p1) / (len * len);
            }
            if s + 1 <= self.levels - 1 {
                gt[s] += scale * -h * (xv - p0) / (len * len);
            }
        }
        Ok((Matrix::from_vec(x.rows(), x.cols(), gx)?, gt))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{finite_diff_grad, max_rel_err, Rng};

    fn four_level() -> N2uqQuantizer {
        N2uqQuantizer::uniform(4, 0.0, 1.0).unwrap()
    }

    #[test]
    fn uniform_init_is_linear_warp() {
        let q = four_level();
        for (t, want) in q.thresholds().iter().zip([1.0 / 6.0, 0.5, 5.0 / 6.0]) {
            assert!((t - want).abs() < 1e-15);
        }
        for i in 0..=20 {
            let x = i as f64 / 20.0;
            assert!((q.warp(x) - 3.0 * x).abs() < 1e-12);
        }
        assert_eq!(q.out_levels(), vec![0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]);
    }

    #[test]
    fn codes_and_outputs() {
        let q = four_level();
        let x = Matrix::row_vector(&[-0.5, 0.05, 0.4, 0.7, 0.99, 3.0]).unwrap();
        let (codes, y) = q.quantize(&x).unwrap();
        assert_eq!(codes.as_slice(), &[0, 0, 1, 2, 3, 3]);
        assert_eq!(y.as_slice()[0], 0.0);
        assert_eq!(y.as_slice()[4], 1.0);
    }

    #[test]
    fn threshold_boundary_rounds_up() {
        let q = N2uqQuantizer::new(4, vec![0.1, 0.3, 0.8], -0.2, 1.0).unwrap();
        for (k, &t) in q.thresholds().iter().enumerate() {
            assert_eq!(q.code(t) as usize, k + 1);
            assert!((q.warp(t) - (k as f64 + 0.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_disordered_thresholds() {
        assert!(N2uqQuantizer::new(4, vec![0.5, 0.2, 0.8], 0.0, 1.0).is_err());
        assert!(N2uqQuantizer::new(4, vec![0.0, 0.2, 0.8], 0.0, 1.0).is_err());
        assert!(N2uqQuantizer::new(4, vec![0.2, 0.8], 0.0, 1.0).is_err());
    }

    #[test]
    fn projection_restores_order() {
        let mut q = four_level();
        q.set_thresholds(&[0.9, -3.0, 0.5]).unwrap();
        let t = q.thresholds();
        assert!(0.0 < t[0] && t[0] < t[1] && t[1] < t[2] && t[2] < 1.0);
        assert!(q.set_thresholds(&[0.1, f64::NAN, 0.3]).is_err());
    }

    #[test]
    fn backward_needs_forward() {
        let q = four_level();
        assert!(matches!(
            q.backward(&QuantCache::default(), &Matrix::zeros(1, 1)),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn zero_upstream_zero_gradient() {
        let q = four_level();
        let x = Matrix::row_vector(&[0.1, 0.4, 0.9]).unwrap();
        let mut c = QuantCache::default();
        q.forward(&x, &mut c).unwrap();
        let (gx, gt) = q.backward(&c, &Matrix::zeros(1, 3)).unwrap();
        assert!(gx.as_slice().iter().chain(&gt).all(|&v| v == 0.0));
    }

    #[test]
    fn outside_range_has_no_gradient() {
        let q = four_level();
        let x = Matrix::row_vector(&[-0.1, 1.2]).unwrap();
        let mut c = QuantCache::default();
        q.forward(&x, &mut c).unwrap();
        let (gx, gt) = q.backward(&c, &Matrix::row_vector(&[1.0, 1.0]).unwrap()).unwrap();
        assert_eq!(gx.as_slice(), &[0.0, 0.0]);
        assert_eq!(gt, vec![0.0; 3]);
    }

    #[test]
    fn raising_lower_knot_lowers_segment_output() {
        let q = N2uqQuantizer::new(4, vec![0.2, 0.45, 0.7], 0.0, 1.0).unwrap();
        let x = Matrix::row_vector(&[0.3, 0.35, 0.4]).unwrap(); // inside [t₁, t₂]
        let mut c = QuantCache::default();
        q.forward(&x, &mut c).unwrap();
        let (_, gt) = q.backward(&c, &Matrix::row_vector(&[1.0; 3]).unwrap()).unwrap();
        assert!(gt[0] < 0.0);
        assert!(gt[1] < 0.0);
        assert_eq!(gt[2], 0.0);
    }

    #[test]
    fn surrogate_gradients_match_finite_differences() {
        let mut rng = Rng::new(29);
        for levels in [2usize, 3, 4, 16] {
            for _ in 0..5 {
                let mut t: Vec<f64> = (0..levels - 1).map(|_| rng.uniform()).collect();
                t.sort_by(f64::total_cmp);
                let mut q = N2uqQuantizer::uniform(levels, -0.05, 1.05).unwrap();
                q.set_thresholds(&t).unwrap();
                let t = q.thresholds().to_vec();
                // stay away from knots so the central difference sees one segment
                let mut xs = Vec::new();
                while xs.len() < 12 {
                    let v = -0.05 + 1.1 * rng.uniform();
                    let near = t.iter().chain([-0.05, 1.05].iter()).any(|k| (k - v).abs() < 1e-3);
                    if !near {
                        xs.push(v);
                    }
                }
                let w: Vec<f64> = (0..xs.len()).map(|_| rng.normal()).collect();
                let x = Matrix::row_vector(&xs).unwrap();
                let mut c = QuantCache::default();
                q.forward(&x, &mut c).unwrap();
                let (gx, gt) = q.backward(&c, &Matrix::row_vector(&w).unwrap()).unwrap();

                let loss_x = |p: &[f64]| p.iter().zip(&w).map(|(v, w)| w * q.surrogate(*v)).sum::<f64>();
                let num = finite_diff_grad(loss_x, &xs, 1e-5).unwrap();
                assert!(max_rel_err(gx.as_slice(), &num, 1e-6) < 1e-4);

                let loss_t = |p: &[f64]| {
                    let qq = N2uqQuantizer::new(levels, p.to_vec(), -0.05, 1.05).unwrap();
                    xs.iter().zip(&w).map(|(v, w)| w * qq.surrogate(*v)).sum::<f64>()
                };
                let num = finite_diff_grad(loss_t, &t, 1e-5).unwrap();
                assert!(max_rel_err(&gt, &num, 1e-6) < 1e-4, "K={levels}: {gt:?} vs {num:?}");
            }
        }
    }
}
