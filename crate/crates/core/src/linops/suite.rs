//! Randomized admissible test functions `r^p P(r/s) exp(-r^2/s^2)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SampledFn;
use crate::quadrature::PanelGrid;
use crate::scalar::Real;

/// Scales cycled through by [`random_suite`].
pub const SCALES: [f64; 4] = [0.5, 1.0, 2.0, 4.0];
/// Number of even Hermite terms, degrees 0, 2, ..., 12.
pub const HERMITE_TERMS: usize = 7;

/// `g(r) = r^p P(r/s) exp(-r^2/s^2)` with `P = sum_k a_k H_{2k} / sqrt(2^{2k} (2k)!)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub p: u32,
    pub scale: f64,
    pub coeffs: Vec<f64>,
    pub seed: u64,
    pub index: usize,
}

// Physicists' Hermite values and derivatives up to degree n.
fn hermite(x: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut h = vec![0.0; n + 1];
    h[0] = 1.0;
    if n >= 1 {
        h[1] = 2.0 * x;
    }
    for k in 1..n {
        h[k + 1] = 2.0 * x * h[k] - 2.0 * k as f64 * h[k - 1];
    }
    let dh = (0..=n).map(|k| if k == 0 { 0.0 } else { 2.0 * k as f64 * h[k - 1] }).collect();
    (h, dh)
}

impl TestFunction {
    pub fn new(p: u32, scale: f64, coeffs: Vec<f64>) -> Self {
        Self { p, scale, coeffs, seed: 0, index: 0 }
    }

    /// Pure Gaussian `r^p exp(-r^2/s^2)`.
    pub fn gaussian(p: u32, scale: f64) -> Self {
        Self::new(p, scale, vec![1.0])
    }

    fn poly(&self, x: f64) -> (f64, f64) {
        let deg = 2 * (self.coeffs.len() - 1);
        let (h, dh) = hermite(x, deg);
        let mut norm = 1.0f64;
        let (mut v, mut dv) = (0.0, 0.0);
        for (k, &a) in self.coeffs.iter().enumerate() {
            if k > 0 {
                let n = 2 * k;
                norm *= 4.0 * (n * (n - 1)) as f64;
            }
            let c = a / norm.sqrt();
            v += c * h[2 * k];
            dv += c * dh[2 * k];
        }
        (v, dv)
    }

    /// `(g(r), g'(r))`.
    pub fn eval(&self, r: f64) -> (f64, f64) {
        let s = self.scale;
        let x = r / s;
        let (p, dp) = self.poly(x);
        let e = (-x * x).exp();
        let rp = r.powi(self.p as i32);
        let g = rp * p * e;
        let lead = if self.p == 0 { 0.0 } else { self.p as f64 * r.powi(self.p as i32 - 1) * p * e };
        let dg = lead + rp * e * (dp / s - 2.0 * x / s * p);
        (g, dg)
    }

    /// `g(sigma r)`; the dilation used by the scaling identity.
    pub fn eval_dilated(&self, sigma: f64, r: f64) -> f64 {
        self.eval(sigma * r).0
    }

    pub fn sample<T: Real>(&self, grid: &PanelGrid<T>) -> SampledFn<T> {
        SampledFn::from_fn(grid, self.p, |r| T::lit(self.eval(r.as_f64()).0))
    }

    pub fn sample_derivative<T: Real>(&self, grid: &PanelGrid<T>) -> SampledFn<T> {
        SampledFn::from_fn(grid, self.p.saturating_sub(1), |r| T::lit(self.eval(r.as_f64()).1))
    }
}

/// Least admissible vanishing order: `(A - 1)/2` rounded up to an even integer.
pub fn min_vanishing_order(a: u32) -> u32 {
    let half = a.saturating_sub(1).div_ceil(2);
    half + half % 2
}

/// `count` functions cycling through scales and `p in {p_min, p_min + 2}`,
/// with coefficients uniform on `[-1, 1]` from a ChaCha stream seeded by `seed`.
pub fn random_suite(a: u32, count: usize, seed: u64) -> Vec<TestFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p_min = min_vanishing_order(a);
    (0..count)
        .map(|i| {
            let coeffs = (0..HERMITE_TERMS).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            TestFunction {
                p: p_min + 2 * ((i / SCALES.len()) % 2) as u32,
                scale: SCALES[i % SCALES.len()],
                coeffs,
                seed,
                index: i,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vanishing_order_rule() {
        assert_eq!(min_vanishing_order(36), 18);
        assert_eq!(min_vanishing_order(40), 20);
        assert_eq!(min_vanishing_order(13), 6);
    }

    #[test]
    fn analytic_derivative_matches_difference() {
        let suite = random_suite(36, 8, 7);
        for tf in &suite {
            for &r in &[0.3, 1.1, 2.5] {
                let h = 1e-6 * r;
                let fd = (tf.eval(r + h).0 - tf.eval(r - h).0) / (2.0 * h);
                let (_, d) = tf.eval(r);
                assert!((fd - d).abs() <= 1e-6 * (d.abs() + tf.eval(r).0.abs() / r + 1e-300));
            }
        }
    }

    #[test]
    fn suite_is_reproducible() {
        assert_eq!(random_suite(36, 10, 42), random_suite(36, 10, 42));
        assert_ne!(random_suite(36, 10, 42), random_suite(36, 10, 43));
    }
}
