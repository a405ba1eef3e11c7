//! Semilinear heat analog `u_t = u_yy + u^2` in self-similar variables.
//!
//! Profile `U(y) = 1/(1 + c y^{2m})`, operator `L e = -e - y e'/(2m) + 2 U e`,
//! weight `Theta(y) + kappa` with `Theta = y^{-4m-4}` on the half line.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::HeatError;
use crate::linops::{SampledFn, TestFunction};
use crate::quadrature::PanelGrid;
use crate::scalar::Real;

/// Candidate regularizations, scanned from the largest.
pub const KAPPA_LADDER: [f64; 6] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatParams<T> {
    pub m: u32,
    pub c: T,
    /// Exponent `4m + 4` of the singular weight `y^{-(4m+4)}`.
    pub theta_exponent: u32,
}

impl<T: Real> HeatParams<T> {
    pub fn new(m: u32, c: T) -> Result<Self, HeatError> {
        if m < 2 {
            return Err(HeatError::InvalidParams(format!("m must be at least 2, got {m}")));
        }
        if !(c > T::zero()) {
            return Err(HeatError::InvalidParams("c must be positive".into()));
        }
        Ok(Self { m, c, theta_exponent: 4 * m + 4 })
    }

    pub fn two_m(&self) -> T {
        T::lit(2.0 * self.m as f64)
    }

    /// Least vanishing order making `e^2 Theta` integrable at the origin.
    pub fn min_order(&self) -> u32 {
        2 * self.m + 2
    }

    /// Default grid on `[e^{-30}, 60]`.
    pub fn grid(&self) -> PanelGrid<T> {
        PanelGrid::spanning(crate::quadrature::U_MIN, 60f64.ln())
    }
}

pub fn heat_profile<T: Real>(p: &HeatParams<T>, y: T) -> T {
    T::one() / (T::one() + p.c * y.powf(p.two_m()))
}

/// `dU/dy`.
pub fn heat_profile_derivative<T: Real>(p: &HeatParams<T>, y: T) -> T {
    let u = heat_profile(p, y);
    -p.c * p.two_m() * y.powf(p.two_m() - T::one()) * u * u
}

/// Residual of `-U - y U'/(2m) + U^2`.
pub fn heat_profile_residual<T: Real>(p: &HeatParams<T>, y: T) -> T {
    let u = heat_profile(p, y);
    -u - y * heat_profile_derivative(p, y) / p.two_m() + u * u
}

/// `L e = -e - y e'/(2m) + 2 U e` on a panel grid.
pub fn heat_apply_l<T: Real>(
    p: &HeatParams<T>,
    grid: &PanelGrid<T>,
    e: &SampledFn<T>,
) -> Result<SampledFn<T>, HeatError> {
    if e.spec != grid.spec() {
        return Err(HeatError::GridMismatch);
    }
    let de = grid.derivative_dr(&e.values);
    let values = grid
        .radii()
        .iter()
        .enumerate()
        .map(|(i, &y)| -e.values[i] - y * de[i] / p.two_m() + T::lit(2.0) * heat_profile(p, y) * e.values[i])
        .collect();
    Ok(SampledFn { spec: e.spec, values, vanishing_order: e.vanishing_order })
}

/// `int u v m_theta Theta dy + kappa int u v m_flat dy` with optional multipliers.
fn theta_inner<T: Real>(
    p: &HeatParams<T>,
    grid: &PanelGrid<T>,
    u: &[T],
    v: &[T],
    kappa: T,
    m_theta: impl Fn(usize) -> T,
    m_flat: impl Fn(usize) -> T,
) -> T {
    let expo = T::lit(p.theta_exponent as f64);
    let mut total = T::zero();
    for i in 0..grid.len() {
        let uv = u[i] * v[i];
        if uv == T::zero() {
            continue;
        }
        let y_u = grid.log_radii()[i];
        let w = grid.log_weights()[i];
        let mt = m_theta(i);
        let singular = if mt == T::zero() {
            T::zero()
        } else {
            let ln_mag = u[i].abs().ln() + v[i].abs().ln() + mt.abs().ln() + (T::one() - expo) * y_u;
            (uv * mt).signum() * ln_mag.exp()
        };
        total += w * (singular + kappa * uv * m_flat(i) * y_u.exp());
    }
    total
}

/// `(L e, e)` under `Theta + kappa`, by direct quadrature and through the multiplier
/// `-1 + 2U + ((-4m-3) Theta + kappa)/(4m (Theta + kappa))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatRoutes {
    pub direct: f64,
    pub multiplier: f64,
    pub norm_sq: f64,
}

pub fn heat_quadratic_routes<T: Real>(
    p: &HeatParams<T>,
    grid: &PanelGrid<T>,
    e: &SampledFn<T>,
    kappa: T,
) -> Result<HeatRoutes, HeatError> {
    if e.vanishing_order < p.min_order() {
        return Err(HeatError::DivergentIntegrand { order: e.vanishing_order, required: p.min_order() });
    }
    let le = heat_apply_l(p, grid, e)?;
    let one = |_| T::one();
    let direct = theta_inner(p, grid, &le.values, &e.values, kappa, one, one);
    let norm_sq = theta_inner(p, grid, &e.values, &e.values, kappa, one, one);
    let four_m = T::lit(4.0 * p.m as f64);
    let react = |i: usize| T::lit(2.0) * heat_profile(p, grid.radii()[i]) - T::one();
    let theta_coeff = T::lit(-(4.0 * p.m as f64) - 3.0) / four_m;
    let multiplier = theta_inner(
        p,
        grid,
        &e.values,
        &e.values,
        kappa,
        |i| react(i) + theta_coeff,
        |i| react(i) + T::one() / four_m,
    );
    Ok(HeatRoutes { direct: direct.as_f64(), multiplier: multiplier.as_f64(), norm_sq: norm_sq.as_f64() })
}

/// Randomized suite admissible for `Theta`; orders cycle through `2m + 2` and `2m + 4`.
pub fn heat_suite<T: Real>(p: &HeatParams<T>, count: usize, seed: u64) -> Vec<TestFunction> {
    crate::linops::random_suite(p.theta_exponent, count, seed)
}

/// Rayleigh quotients under `Theta + kappa`, in suite order.
pub fn heat_coercivity<T: Real>(
    p: &HeatParams<T>,
    suite: &[TestFunction],
    kappa: T,
) -> Result<Vec<f64>, HeatError> {
    let grid = p.grid();
    suite
        .par_iter()
        .map(|tf| {
            let e = tf.sample(&grid);
            let routes = heat_quadratic_routes(p, &grid, &e, kappa)?;
            Ok(routes.direct / routes.norm_sq)
        })
        .collect()
}

/// Largest `kappa` on [`KAPPA_LADDER`] keeping every quotient at or below `-1/(4m)`.
pub fn find_kappa<T: Real>(p: &HeatParams<T>, suite: &[TestFunction]) -> Result<Option<f64>, HeatError> {
    let limit = -1.0 / (4.0 * p.m as f64);
    for &kappa in &KAPPA_LADDER {
        let q = heat_coercivity(p, suite, T::lit(kappa))?;
        if q.iter().all(|&v| v <= limit) {
            return Ok(Some(kappa));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_values() {
        let p = HeatParams::new(2, 1.0f64).unwrap();
        assert_eq!(heat_profile(&p, 0.0), 1.0);
        assert_eq!(heat_profile(&p, 1.0), 0.5);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(HeatParams::new(1, 1.0f64).is_err());
        assert!(HeatParams::new(2, 0.0f64).is_err());
    }

    #[test]
    fn low_order_test_function_diverges() {
        let p = HeatParams::new(2, 1.0f64).unwrap();
        let grid = p.grid();
        let e = TestFunction::gaussian(4, 1.0).sample(&grid);
        assert!(matches!(
            heat_quadratic_routes(&p, &grid, &e, 0.0),
            Err(HeatError::DivergentIntegrand { order: 4, required: 6 })
        ));
    }
}
