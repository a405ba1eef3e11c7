//! Rayleigh quotients, the three-term split and low-order Sobolev identities.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::suite::{min_vanishing_order, TestFunction};
use super::{apply_l, weighted_parts, Background, SampledFn, WeightParams};
use crate::error::LinopsError;
use crate::quadrature::PanelGrid;
use crate::scalar::Real;

/// Threshold `-1/8 + 1e-3` above which a quotient is flagged.
pub const QUOTIENT_LIMIT: f64 = -0.125 + 1e-3;

/// One row of the coercivity report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub index: usize,
    pub seed: u64,
    pub p: u32,
    pub scale: f64,
    pub quotient: f64,
    pub pass: bool,
}

/// `(Lg, g)_w` evaluated directly and as the sum of its three pieces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticSplit<T> {
    pub si: T,
    pub lo: T,
    pub nlo: T,
    pub direct: T,
    pub norm_sq: T,
}

impl<T: Real> QuadraticSplit<T> {
    pub fn sum(&self) -> T {
        self.si + self.lo + self.nlo
    }
}

fn admissible(tf: &TestFunction, a: u32) -> Result<(), LinopsError> {
    let p_min = min_vanishing_order(a);
    if tf.p < p_min {
        return Err(LinopsError::Inadmissible(format!(
            "vanishing order {} below {p_min} for A = {a}",
            tf.p
        )));
    }
    Ok(())
}

/// Direct value of `(Lg, g)_w` together with the split into singular,
/// lower-order and nonlocal parts obtained by integrating by parts.
pub fn quadratic_split<T: Real>(
    bg: &Background<T>,
    w: &WeightParams<T>,
    g: &SampledFn<T>,
) -> Result<QuadraticSplit<T>, LinopsError> {
    let grid: &PanelGrid<T> = &bg.grid;
    let lg = apply_l(bg, g)?;
    let direct = weighted_parts(grid, w.a, &lg, g, None)?.total(w.log10_b);
    let norm_sq = weighted_parts(grid, w.a, g, g, None)?.total(w.log10_b);

    let plain = weighted_parts(grid, w.a, g, g, None)?;
    let with_q = weighted_parts(grid, w.a, g, g, Some(&bg.q))?;
    let with_f = weighted_parts(grid, w.a, g, g, Some(&bg.f))?;
    let avg = bg.averaged_mass(g);
    let nonlocal = SampledFn {
        spec: g.spec,
        values: bg.dq.iter().zip(&avg).map(|(&d, &m)| d * m).collect(),
        vanishing_order: g.vanishing_order,
    };
    let nlo = weighted_parts(grid, w.a, &nonlocal, g, None)?.total(w.log10_b);

    let a = T::lit(w.a as f64);
    let half = T::lit(0.5);
    let react = T::lit(1.5) - T::lit(2.0) * bg.mu;
    let si = (-T::one() + bg.beta * (T::lit(3.0) - a) * half) * plain.singular
        + a * half * with_f.singular
        + react * with_q.singular;
    let lo = w.b() * ((-T::one() + T::lit(1.5) * bg.beta) * plain.flat + react * with_q.flat);
    Ok(QuadraticSplit { si, lo, nlo, direct, norm_sq })
}

/// The transport form `(g' r f, g)_w` computed directly and through the identity
/// `-1/2 int Q g^2 w + (A/2) int g^2 f r^{-A}`.
pub fn transport_form_routes<T: Real>(
    bg: &Background<T>,
    w: &WeightParams<T>,
    g: &SampledFn<T>,
) -> Result<(T, T), LinopsError> {
    let grid: &PanelGrid<T> = &bg.grid;
    let dg = grid.derivative_dr(&g.values);
    let transport = SampledFn {
        spec: g.spec,
        values: (0..grid.len()).map(|i| dg[i] * grid.radii()[i] * bg.f[i]).collect(),
        vanishing_order: g.vanishing_order,
    };
    let direct = weighted_parts(grid, w.a, &transport, g, None)?.total(w.log10_b);
    let with_q = weighted_parts(grid, w.a, g, g, Some(&bg.q))?.total(w.log10_b);
    let with_f = weighted_parts(grid, w.a, g, g, Some(&bg.f))?.singular;
    let identity = -T::lit(0.5) * with_q + T::lit(w.a as f64 / 2.0) * with_f;
    Ok((direct, identity))
}

/// Rayleigh quotients `(Lg, g)_w / (g, g)_w` over a suite, in input order.
pub fn coercivity_probe<T: Real>(
    bg: &Background<T>,
    w: &WeightParams<T>,
    suite: &[TestFunction],
) -> Result<Vec<ProbeResult>, LinopsError> {
    for tf in suite {
        admissible(tf, w.a)?;
    }
    suite
        .par_iter()
        .map(|tf| {
            let g = tf.sample(&bg.grid);
            let lg = apply_l(bg, &g)?;
            let num = weighted_parts(&bg.grid, w.a, &lg, &g, None)?.total(w.log10_b);
            let den = weighted_parts(&bg.grid, w.a, &g, &g, None)?.total(w.log10_b);
            let quotient = (num / den).as_f64();
            Ok(ProbeResult {
                index: tf.index,
                seed: tf.seed,
                p: tf.p,
                scale: tf.scale,
                quotient,
                pass: quotient <= QUOTIENT_LIMIT,
            })
        })
        .collect()
}

/// Outcome of [`sobolev_probe_low_order`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SobolevProbe {
    pub m: u32,
    /// `(Lg, g)` in the homogeneous `H^m` inner product.
    pub form: f64,
    /// `(g + beta r g', g)` by quadrature of the sampled generator.
    pub direct: f64,
    /// `d/dlambda (1/2) || lambda g(lambda^beta .) ||^2` at 1, by finite differences.
    pub dilation: f64,
    /// `1 + beta (2m - 3)/2`.
    pub coefficient: f64,
    pub norm_sq: f64,
}

fn laplacian<T: Real>(grid: &PanelGrid<T>, v: &[T]) -> Vec<T> {
    let d1 = grid.derivative_dr(v);
    let d2 = grid.derivative_dr(&d1);
    (0..v.len()).map(|i| d2[i] + T::lit(2.0) * d1[i] / grid.radii()[i]).collect()
}

/// Homogeneous `H^m` inner product for `m <= 2` with measure `4 pi r^2 dr`.
pub fn hm_inner<T: Real>(grid: &PanelGrid<T>, u: &[T], v: &[T], m: u32) -> Result<T, LinopsError> {
    let (a, b) = match m {
        0 => (u.to_vec(), v.to_vec()),
        1 => (grid.derivative_dr(u), grid.derivative_dr(v)),
        2 => (laplacian(grid, u), laplacian(grid, v)),
        _ => return Err(LinopsError::OrderUnsupported { m }),
    };
    let prod: Vec<T> = (0..a.len()).map(|i| a[i] * b[i] * grid.radii()[i] * grid.radii()[i]).collect();
    Ok(T::lit(4.0) * T::PI() * grid.integrate_dr(&prod))
}

/// `(Lg, g)_{H^m}` plus the dilation identity checked by two independent routes.
pub fn sobolev_probe_low_order<T: Real>(
    bg: &Background<T>,
    g: &TestFunction,
    m: u32,
) -> Result<SobolevProbe, LinopsError> {
    if m > 2 {
        return Err(LinopsError::OrderUnsupported { m });
    }
    let grid: &PanelGrid<T> = &bg.grid;
    let gs = g.sample(grid);
    let dgs = g.sample_derivative(grid);
    let lg = apply_l(bg, &gs)?;
    let form = hm_inner(grid, &lg.values, &gs.values, m)?;
    let generator: Vec<T> = (0..grid.len())
        .map(|i| gs.values[i] + bg.beta * grid.radii()[i] * dgs.values[i])
        .collect();
    let direct = hm_inner(grid, &generator, &gs.values, m)?;
    let norm_sq = hm_inner(grid, &gs.values, &gs.values, m)?;

    let beta = bg.beta.as_f64();
    let energy = |lambda: f64| -> Result<f64, LinopsError> {
        let sigma = lambda.powf(beta);
        let v: Vec<T> = grid
            .radii()
            .iter()
            .map(|&r| T::lit(lambda * g.eval_dilated(sigma, r.as_f64())))
            .collect();
        Ok(0.5 * hm_inner(grid, &v, &v, m)?.as_f64())
    };
    let h = 1e-3;
    let dilation = (-energy(1.0 + 2.0 * h)? + 8.0 * energy(1.0 + h)? - 8.0 * energy(1.0 - h)?
        + energy(1.0 - 2.0 * h)?)
        / (12.0 * h);
    Ok(SobolevProbe {
        m,
        form: form.as_f64(),
        direct: direct.as_f64(),
        dilation,
        coefficient: 1.0 + beta * (2.0 * m as f64 - 3.0) / 2.0,
        norm_sq: norm_sq.as_f64(),
    })
}
