//! Linearization around the profile and the singular weight `|y|^{-A} + B`.
//!
//! For radial `g` the linearized operator is
//!
//! ```text
//! L g = -(g + beta r g') + g' r f + Q' r^{-2} int_0^r g s^2 ds + 2(1 - mu) Q g
//! ```
//!
//! and every bilinear form carries the measure `4 pi r^2 dr`.

mod probe;
mod suite;
mod weight;

use std::sync::Arc;

pub use probe::{
    coercivity_probe, quadratic_split, sobolev_probe_low_order, transport_form_routes, ProbeResult,
    QuadraticSplit, SobolevProbe, QUOTIENT_LIMIT,
};
pub use suite::{random_suite, TestFunction};
pub use weight::{
    select_weight, weight_for_exponent, weighted_dq_norm_sq, WeightCertificate, WeightParams, A_MAX,
};

use crate::error::LinopsError;
use crate::params::ProfileParams;
use crate::profile::RadialProfile;
use crate::quadrature::{PanelGrid, PanelSpec};
use crate::scalar::Real;

/// A radial function sampled on a panel grid, with its vanishing order at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFn<T> {
    pub spec: PanelSpec,
    pub values: Vec<T>,
    pub vanishing_order: u32,
}

impl<T: Real> SampledFn<T> {
    pub fn from_fn(grid: &PanelGrid<T>, vanishing_order: u32, f: impl Fn(T) -> T) -> Self {
        Self {
            spec: grid.spec(),
            values: grid.radii().iter().map(|&r| f(r)).collect(),
            vanishing_order,
        }
    }

    pub fn zeros(grid: &PanelGrid<T>, vanishing_order: u32) -> Self {
        Self { spec: grid.spec(), values: vec![T::zero(); grid.len()], vanishing_order }
    }

    /// `a self + b other`.
    pub fn combine(&self, a: T, other: &Self, b: T) -> Result<Self, LinopsError> {
        if self.spec != other.spec {
            return Err(LinopsError::GridMismatch);
        }
        Ok(Self {
            spec: self.spec,
            values: self.values.iter().zip(&other.values).map(|(&x, &y)| a * x + b * y).collect(),
            vanishing_order: self.vanishing_order.min(other.vanishing_order),
        })
    }
}

/// Profile fields resampled on a panel grid.
#[derive(Debug, Clone)]
pub struct Background<T> {
    pub grid: Arc<PanelGrid<T>>,
    pub q: Vec<T>,
    pub f: Vec<T>,
    pub dq: Vec<T>,
    pub beta: T,
    pub mu: T,
}

impl<T: Real> Background<T> {
    /// Samples `(Q, f, Q')` on the default grid `[e^{-30}, r_max]`.
    pub fn from_profile(profile: &RadialProfile<T>) -> Result<Self, LinopsError> {
        let grid = Arc::new(PanelGrid::for_radius(profile.r_max().as_f64()));
        Self::on_grid(profile, grid)
    }

    pub fn on_grid(profile: &RadialProfile<T>, grid: Arc<PanelGrid<T>>) -> Result<Self, LinopsError> {
        let mut q = Vec::with_capacity(grid.len());
        let mut f = Vec::with_capacity(grid.len());
        let mut dq = Vec::with_capacity(grid.len());
        for &r in grid.radii() {
            let s = profile.eval(r)?;
            q.push(s.q);
            f.push(s.f);
            dq.push(s.dq);
        }
        let params: &ProfileParams<T> = profile.params();
        Ok(Self { grid, q, f, dq, beta: params.beta(), mu: params.mu() })
    }

    /// Background whose operator is the local heat-analog `-e - r e'/(2m) + 2 U e`.
    pub fn heat_analog(grid: Arc<PanelGrid<T>>, m: u32, c: T) -> Self {
        let two_m = T::lit(2.0 * m as f64);
        let q = grid.radii().iter().map(|&r| T::one() / (T::one() + c * r.powf(two_m))).collect();
        let n = grid.len();
        Self {
            grid,
            q,
            f: vec![T::zero(); n],
            dq: vec![T::zero(); n],
            beta: T::one() / two_m,
            mu: T::zero(),
        }
    }

    pub fn sample(&self, vanishing_order: u32, f: impl Fn(T) -> T) -> SampledFn<T> {
        SampledFn::from_fn(&self.grid, vanishing_order, f)
    }

    fn check(&self, g: &SampledFn<T>) -> Result<(), LinopsError> {
        if g.spec != self.grid.spec() {
            Err(LinopsError::GridMismatch)
        } else {
            Ok(())
        }
    }

    /// `r^{-2} int_0^r g s^2 ds`, including the analytic piece below the first node.
    pub fn averaged_mass(&self, g: &SampledFn<T>) -> Vec<T> {
        let r = self.grid.radii();
        let gs2: Vec<T> = g.values.iter().zip(r).map(|(&v, &r)| v * r * r).collect();
        let mut cum = self.grid.cumulative_dr(&gs2);
        let r_lo = T::lit(self.grid.spec().u_min).exp();
        let p = T::lit(g.vanishing_order as f64);
        let head = g.values[0] * (r_lo / r[0]).powf(p) * r_lo.powi(3) / (p + T::lit(3.0));
        for (c, &ri) in cum.iter_mut().zip(r) {
            *c = (*c + head) / (ri * ri);
        }
        cum
    }
}

/// Applies the linearized operator to a sampled function.
pub fn apply_l<T: Real>(bg: &Background<T>, g: &SampledFn<T>) -> Result<SampledFn<T>, LinopsError> {
    bg.check(g)?;
    let r = bg.grid.radii();
    let dg = bg.grid.derivative_dr(&g.values);
    let nonlocal = bg.averaged_mass(g);
    let two_react = T::lit(2.0) * (T::one() - bg.mu);
    let values = (0..r.len())
        .map(|i| {
            -(g.values[i] + bg.beta * r[i] * dg[i])
                + dg[i] * r[i] * bg.f[i]
                + bg.dq[i] * nonlocal[i]
                + two_react * bg.q[i] * g.values[i]
        })
        .collect();
    Ok(SampledFn { spec: g.spec, values, vanishing_order: g.vanishing_order })
}

/// Weight-dependent parts of an inner product, kept apart so `B` can vary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedParts<T> {
    /// `4 pi int g h r^{2-A} dr`.
    pub singular: T,
    /// `4 pi int g h r^2 dr`.
    pub flat: T,
}

impl<T: Real> WeightedParts<T> {
    pub fn total(&self, log10_b: i32) -> T {
        self.singular + self.flat * T::lit(10f64.powi(log10_b))
    }
}

/// Both parts of `(g h)` against the weight with exponent `a`, optionally times `extra`.
pub fn weighted_parts<T: Real>(
    grid: &PanelGrid<T>,
    a: u32,
    g: &SampledFn<T>,
    h: &SampledFn<T>,
    extra: Option<&[T]>,
) -> Result<WeightedParts<T>, LinopsError> {
    if g.spec != grid.spec() || h.spec != grid.spec() {
        return Err(LinopsError::GridMismatch);
    }
    let order = g.vanishing_order + h.vanishing_order;
    let required = a.saturating_sub(2);
    if order < required {
        return Err(LinopsError::DivergentIntegrand { order, required });
    }
    let a_t = T::lit(a as f64);
    let three = T::lit(3.0);
    let (mut singular, mut flat) = (T::zero(), T::zero());
    for i in 0..grid.len() {
        let prod = g.values[i] * h.values[i] * extra.map_or(T::one(), |e| e[i]);
        if prod == T::zero() {
            continue;
        }
        let u = grid.log_radii()[i];
        let w = grid.log_weights()[i];
        // Products like r^{36} * r^{-36} near the inner edge overflow if formed directly.
        let ln_mag = g.values[i].abs().ln()
            + h.values[i].abs().ln()
            + extra.map_or(T::zero(), |e| e[i].abs().ln())
            + (three - a_t) * u;
        singular += w * prod.signum() * ln_mag.exp();
        flat += w * prod * (three * u).exp();
    }
    let four_pi = T::lit(4.0) * T::PI();
    Ok(WeightedParts { singular: four_pi * singular, flat: four_pi * flat })
}

/// `(g, h)_w = 4 pi int g h (r^{-A} + B) r^2 dr`.
pub fn weighted_inner<T: Real>(
    grid: &PanelGrid<T>,
    g: &SampledFn<T>,
    h: &SampledFn<T>,
    w: &WeightParams<T>,
) -> Result<T, LinopsError> {
    Ok(weighted_parts(grid, w.a, g, h, None)?.total(w.log10_b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_moment_matches_gamma_closed_form() {
        // 4 pi int r^{A} e^{-2 r^2} r^{2-A} dr = 4 pi int r^2 e^{-2r^2} dr = pi^{3/2} / 2^{3/2}.
        let grid: PanelGrid<f64> = PanelGrid::spanning(-30.0, 3.0);
        let a = 36;
        let g = SampledFn::from_fn(&grid, 18, |r: f64| r.powi(18) * (-r * r).exp());
        let parts = weighted_parts(&grid, a, &g, &g, None).unwrap();
        let exact = std::f64::consts::PI.powf(1.5) / 2f64.powf(1.5);
        assert!((parts.singular / exact - 1.0).abs() < 1e-12);
    }

    #[test]
    fn divergent_pairs_are_rejected() {
        let grid: PanelGrid<f64> = PanelGrid::spanning(-30.0, 3.0);
        let g = SampledFn::from_fn(&grid, 10, |r: f64| r.powi(10));
        assert!(matches!(
            weighted_parts(&grid, 36, &g, &g, None),
            Err(LinopsError::DivergentIntegrand { order: 20, required: 34 })
        ));
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let a: PanelGrid<f64> = PanelGrid::spanning(-30.0, 3.0);
        let b: PanelGrid<f64> = a.refined();
        let g = SampledFn::zeros(&a, 20);
        let h = SampledFn::zeros(&b, 20);
        assert_eq!(g.combine(1.0, &h, 1.0), Err(LinopsError::GridMismatch));
    }
}
