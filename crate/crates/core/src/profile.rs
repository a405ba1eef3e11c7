//! Profile continuation from the series handoff to large radius.
//!
//! The integrator advances `(ln Q, ln f)` in `s = ln r`:
//!
//! ```text
//! d ln Q/ds = ((1 - mu) Q - 1) / (beta - f)
//! d ln f/ds = Q/f - 3
//! ```
//!
//! Logarithmic unknowns keep relative accuracy in the power-law tail, and
//! positivity of `Q` and `f` holds by construction.

use serde::{Deserialize, Serialize};

use crate::error::ProfileError;
use crate::lsq::line_fit;
use crate::ode::Dopri5;
use crate::params::ProfileParams;
use crate::scalar::Real;
use crate::series::PowerSeries;

/// Nodes per decade in the logarithmic tail grid.
pub const NODES_PER_DECADE: usize = 64;
/// Nodes on `[0, r_h]`.
pub const SERIES_NODES: usize = 32;
/// Default outer radius.
pub const DEFAULT_R_MAX: f64 = 1e4;
/// Width of the rejection band around region boundaries.
const BOUNDARY_BAND: f64 = 1e-12;
const MAX_REJECTIONS: usize = 3;

const GL4_X: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GL4_W: [f64; 4] = [
    0.347_854_845_137_453_9,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_9,
];

/// Profile values at one radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileSample<T> {
    pub q: T,
    pub f: T,
    /// `dQ/dr`.
    pub dq: T,
}

/// Sampled profile `(r, Q, f, dQ/dr)` on a graded grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile<T> {
    params: ProfileParams<T>,
    series: PowerSeries<T>,
    grid: Vec<T>,
    q_vals: Vec<T>,
    f_vals: Vec<T>,
    dq_vals: Vec<T>,
    handoff_index: usize,
    tail_exponent: T,
    residual_max: T,
    cum_mass: Vec<T>,
}

struct LogRhs<T> {
    mu: T,
    beta: T,
}

impl<T: Real> LogRhs<T> {
    fn first(&self, q: T, f: T) -> [T; 2] {
        [((T::one() - self.mu) * q - T::one()) / (self.beta - f), q / f - T::lit(3.0)]
    }

    fn second(&self, q: T, f: T) -> [T; 2] {
        let [ls, fs] = self.first(q, f);
        let gap = self.beta - f;
        let a = (T::one() - self.mu) * q;
        [a * ls / gap + (a - T::one()) * f * fs / (gap * gap), q / f * (ls - fs)]
    }
}

fn hermite5<T: Real>(t: T, h: T, y0: [T; 3], y1: [T; 3]) -> T {
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let t5 = t4 * t;
    let c = |x: f64| T::lit(x);
    let h0 = T::one() - c(10.0) * t3 + c(15.0) * t4 - c(6.0) * t5;
    let h1 = t - c(6.0) * t3 + c(8.0) * t4 - c(3.0) * t5;
    let h2 = (t2 - c(3.0) * t3 + c(3.0) * t4 - t5) * c(0.5);
    let h3 = c(10.0) * t3 - c(15.0) * t4 + c(6.0) * t5;
    let h4 = -c(4.0) * t3 + c(7.0) * t4 - c(3.0) * t5;
    let h5 = (t3 - c(2.0) * t4 + t5) * c(0.5);
    y0[0] * h0 + h * y0[1] * h1 + h * h * y0[2] * h2 + y1[0] * h3 + h * y1[1] * h4 + h * h * y1[2] * h5
}

/// Continues the series to `r_max` and samples the profile.
pub fn solve_profile<T: Real>(
    params: &ProfileParams<T>,
    series: &PowerSeries<T>,
    r_max: T,
    tol: T,
) -> Result<RadialProfile<T>, ProfileError> {
    if !(r_max >= T::lit(1e3)) {
        return Err(ProfileError::InvalidParams("r_max must be at least 1e3".into()));
    }
    if !(tol > T::zero()) {
        return Err(ProfileError::InvalidParams("tolerance must be positive".into()));
    }
    let r_h = series.handoff_radius;
    // Grading by the 1/j0 power spaces r^{2 j0}, and hence Q(0) - Q, quadratically
    // so consecutive series nodes stay distinguishable in floating point.
    let grading = T::one() / T::lit(params.j0() as f64);
    let mut grid: Vec<T> = (0..=SERIES_NODES)
        .map(|k| r_h * (T::from_usize_lossy(k) / T::from_usize_lossy(SERIES_NODES)).powf(grading))
        .collect();
    let mut q_vals: Vec<T> = grid.iter().map(|&r| series.eval_q(r)).collect();
    let mut f_vals: Vec<T> = grid.iter().map(|&r| series.eval_f(r)).collect();
    let handoff_index = SERIES_NODES;

    let s_h = r_h.ln();
    let s_max = r_max.ln();
    let per_decade = T::lit(10f64.ln()) / T::from_usize_lossy(NODES_PER_DECADE);
    let intervals = ((s_max - s_h) / per_decade).ceil().to_usize().unwrap_or(1).max(1);
    let ds = (s_max - s_h) / T::from_usize_lossy(intervals);

    let rhs = LogRhs { mu: params.mu(), beta: params.beta() };
    if series.is_constant() {
        for k in 1..=intervals {
            grid.push((s_h + ds * T::from_usize_lossy(k)).exp());
            q_vals.push(q_vals[0]);
            f_vals.push(f_vals[0]);
        }
    } else {
        let dp = Dopri5::new(tol, tol);
        let system = |_s: T, y: &[T; 2]| rhs.first(y[0].exp(), y[1].exp());
        let q0 = params.q0();
        let mut y = [q_vals[handoff_index].ln(), f_vals[handoff_index].ln()];
        let mut s = s_h;
        let mut h = ds / T::lit(4.0);
        for k in 1..=intervals {
            let target = if k == intervals { s_max } else { s_h + ds * T::from_usize_lossy(k) };
            let mut rejections = 0;
            while s < target {
                let remaining = target - s;
                let step = if h >= remaining * T::lit(0.999) { remaining } else { h };
                let r_now = s.exp().as_f64();
                if step < T::lit(1e-14) * (T::one() + s.abs()) {
                    return Err(ProfileError::StepSizeUnderflow {
                        r: r_now,
                        gap: (rhs.beta - y[1].exp()).as_f64(),
                    });
                }
                let (yn, err) = dp.trial(&system, s, &y, step);
                if !(yn[0].is_finite() && yn[1].is_finite() && err.is_finite()) {
                    h = step * T::lit(0.5);
                    continue;
                }
                if err > T::one() {
                    h = step * dp.factor(err);
                    continue;
                }
                let (q, f) = (yn[0].exp(), yn[1].exp());
                let band = T::lit(BOUNDARY_BAND);
                let violation = if T::lit(3.0) - q / f <= band * T::lit(3.0) {
                    Some(ProfileError::RegionExitScenario1 { r: r_now })
                } else if q <= band * y[0].exp() || q <= T::min_positive_value() {
                    Some(ProfileError::RegionExitScenario2 { r: r_now })
                } else if rhs.beta - f <= band || q >= q0 {
                    Some(ProfileError::StepSizeUnderflow { r: r_now, gap: (rhs.beta - f).as_f64() })
                } else {
                    None
                };
                if let Some(e) = violation {
                    rejections += 1;
                    if rejections >= MAX_REJECTIONS {
                        return Err(e);
                    }
                    h = step * T::lit(0.5);
                    continue;
                }
                rejections = 0;
                s = s + step;
                y = yn;
                h = step * dp.factor(err);
            }
            grid.push(if k == intervals { r_max } else { s.exp() });
            q_vals.push(y[0].exp());
            f_vals.push(y[1].exp());
        }
    }

    let dq_vals: Vec<T> = grid
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            if i <= handoff_index {
                series.eval_dq(r)
            } else {
                q_vals[i] * rhs.first(q_vals[i], f_vals[i])[0] / r
            }
        })
        .collect();

    let mut profile = RadialProfile {
        params: *params,
        series: series.clone(),
        grid,
        q_vals,
        f_vals,
        dq_vals,
        handoff_index,
        tail_exponent: T::zero(),
        residual_max: T::zero(),
        cum_mass: Vec::new(),
    };
    profile.cum_mass = profile.cumulative_mass();
    profile.residual_max = profile.ode_residual();
    profile.tail_exponent = profile.fit_tail_exponent(profile.r_max() / T::lit(10.0), profile.r_max());
    Ok(profile)
}

impl<T: Real> RadialProfile<T> {
    pub fn params(&self) -> &ProfileParams<T> {
        &self.params
    }

    pub fn series(&self) -> &PowerSeries<T> {
        &self.series
    }

    pub fn grid(&self) -> &[T] {
        &self.grid
    }

    pub fn q_vals(&self) -> &[T] {
        &self.q_vals
    }

    pub fn f_vals(&self) -> &[T] {
        &self.f_vals
    }

    pub fn dq_vals(&self) -> &[T] {
        &self.dq_vals
    }

    pub fn handoff_radius(&self) -> T {
        self.grid[self.handoff_index]
    }

    pub fn tail_exponent(&self) -> T {
        self.tail_exponent
    }

    /// Largest ODE residual `|(beta - f) r Q' - (1 - mu) Q^2 + Q|` over the grid,
    /// with `f` recomputed from cumulative quadrature of `Q`.
    pub fn residual_max(&self) -> T {
        self.residual_max
    }

    pub fn r_max(&self) -> T {
        *self.grid.last().expect("non-empty grid")
    }

    /// True for the constant solution at the stagnation point.
    pub fn is_stationary(&self) -> bool {
        self.series.is_constant()
    }

    fn rhs(&self) -> LogRhs<T> {
        LogRhs { mu: self.params.mu(), beta: self.params.beta() }
    }

    /// Interpolated profile at `r` in `[0, r_max]`.
    pub fn eval(&self, r: T) -> Result<ProfileSample<T>, ProfileError> {
        let r_max = self.r_max();
        if !(r >= T::zero() && r <= r_max * (T::one() + T::lit(1e-12))) {
            return Err(ProfileError::OutOfRange { r: r.as_f64(), r_max: r_max.as_f64() });
        }
        let r = r.min(r_max);
        if self.is_stationary() {
            return Ok(ProfileSample { q: self.q_vals[0], f: self.f_vals[0], dq: T::zero() });
        }
        if r <= self.handoff_radius() {
            return Ok(ProfileSample {
                q: self.series.eval_q(r),
                f: self.series.eval_f(r),
                dq: self.series.eval_dq(r),
            });
        }
        let i = self.interval_of(r);
        let (q, f) = self.interpolate(i, r.ln());
        let dq = q * self.rhs().first(q, f)[0] / r;
        Ok(ProfileSample { q, f, dq })
    }

    /// Convenience for `eval(r).q`.
    pub fn q(&self, r: T) -> Result<T, ProfileError> {
        self.eval(r).map(|s| s.q)
    }

    // Index i with grid[i] < r <= grid[i+1], restricted to the tail.
    fn interval_of(&self, r: T) -> usize {
        let idx = self.grid.partition_point(|&g| g < r);
        idx.saturating_sub(1).max(self.handoff_index).min(self.grid.len() - 2)
    }

    fn log_jets(&self, i: usize) -> ([T; 3], [T; 3]) {
        let (q, f) = (self.q_vals[i], self.f_vals[i]);
        let rhs = self.rhs();
        let d1 = rhs.first(q, f);
        let d2 = rhs.second(q, f);
        ([q.ln(), d1[0], d2[0]], [f.ln(), d1[1], d2[1]])
    }

    fn interpolate(&self, i: usize, s: T) -> (T, T) {
        let s0 = self.grid[i].ln();
        let h = self.grid[i + 1].ln() - s0;
        let t = (s - s0) / h;
        let (l0, g0) = self.log_jets(i);
        let (l1, g1) = self.log_jets(i + 1);
        (hermite5(t, h, l0, l1).exp(), hermite5(t, h, g0, g1).exp())
    }

    // Integral of Q s^2 over [grid[i], r] for r inside tail interval i.
    fn interval_mass(&self, i: usize, r: T) -> T {
        let a = self.grid[i].ln();
        let b = r.ln();
        let half = (b - a) * T::lit(0.5);
        let mid = (a + b) * T::lit(0.5);
        (0..4)
            .map(|k| {
                let s = mid + half * T::lit(GL4_X[k]);
                let (q, _) = self.interpolate(i, s);
                T::lit(GL4_W[k]) * q * (T::lit(3.0) * s).exp()
            })
            .sum::<T>()
            * half
    }

    fn cumulative_mass(&self) -> Vec<T> {
        let mut cum = Vec::with_capacity(self.grid.len());
        for i in 0..=self.handoff_index {
            let r = self.grid[i];
            cum.push(r * r * r * self.f_vals[i]);
        }
        for i in self.handoff_index..self.grid.len() - 1 {
            let prev = *cum.last().expect("non-empty");
            let add = if self.is_stationary() {
                (self.grid[i + 1].powi(3) - self.grid[i].powi(3)) * self.q_vals[0] / T::lit(3.0)
            } else {
                self.interval_mass(i, self.grid[i + 1])
            };
            cum.push(prev + add);
        }
        cum
    }

    fn ode_residual(&self) -> T {
        let (mu, beta) = (self.params.mu(), self.params.beta());
        let mut worst = T::zero();
        for i in 1..self.grid.len() {
            let r = self.grid[i];
            let f_quad = self.cum_mass[i] / (r * r * r);
            let q = self.q_vals[i];
            let res = (beta - f_quad) * r * self.dq_vals[i] - (T::one() - mu) * q * q + q;
            worst = worst.max(res.abs());
        }
        worst
    }

    /// Least-squares slope of `ln Q` against `ln r` over grid nodes in `[r_lo, r_hi]`.
    pub fn fit_tail_exponent(&self, r_lo: T, r_hi: T) -> T {
        let pts: Vec<(f64, f64)> = self
            .grid
            .iter()
            .zip(&self.q_vals)
            .filter(|(r, _)| **r >= r_lo && **r <= r_hi && **r > T::zero())
            .map(|(r, q)| (r.ln().as_f64(), q.ln().as_f64()))
            .collect();
        if pts.len() < 2 {
            return T::zero();
        }
        T::lit(line_fit(&pts).slope)
    }

    /// `4 pi int_0^r Q s^2 ds`.
    pub fn partial_mass(&self, r: T) -> Result<T, ProfileError> {
        let r_max = self.r_max();
        if !(r >= T::zero() && r <= r_max * (T::one() + T::lit(1e-12))) {
            return Err(ProfileError::OutOfRange { r: r.as_f64(), r_max: r_max.as_f64() });
        }
        let r = r.min(r_max);
        let four_pi = T::lit(4.0) * T::PI();
        if self.is_stationary() {
            return Ok(four_pi * r * r * r * self.q_vals[0] / T::lit(3.0));
        }
        if r <= self.handoff_radius() {
            return Ok(four_pi * r * r * r * self.series.eval_f(r));
        }
        let i = self.interval_of(r);
        Ok(four_pi * (self.cum_mass[i] + self.interval_mass(i, r)))
    }

    /// Fitted constants `sup Q (1 + r^2)` and `sup |Q'| (1 + r^2)^{3/2}`.
    pub fn decay_constants(&self) -> (T, T) {
        let mut c0 = T::zero();
        let mut c1 = T::zero();
        for ((&r, &q), &dq) in self.grid.iter().zip(&self.q_vals).zip(&self.dq_vals) {
            let w = T::one() + r * r;
            c0 = c0.max(q * w);
            c1 = c1.max(dq.abs() * w * w.sqrt());
        }
        (c0, c1)
    }

    /// Slope `df/dQ` at the stagnation point, measured from the first nodes.
    pub fn phase_slope_at_origin(&self) -> T {
        let (q0, f0) = (self.q_vals[0], self.f_vals[0]);
        let i = 2.min(self.grid.len() - 1);
        (self.f_vals[i] - f0) / (self.q_vals[i] - q0)
    }

    /// Checks monotonicity, positivity, region membership and the mass identity.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.is_stationary() {
            return Ok(());
        }
        let beta = self.params.beta();
        let q0 = self.params.q0();
        for i in 1..self.grid.len() {
            let (q, f) = (self.q_vals[i], self.f_vals[i]);
            if !(q < self.q_vals[i - 1] && f < self.f_vals[i - 1]) {
                return Err(format!("not strictly decreasing at node {i}"));
            }
            if !(q > T::zero() && q < q0 && q / T::lit(3.0) < f && f < beta) {
                return Err(format!("node {i} outside the invariant region"));
            }
            let r = self.grid[i];
            let f_quad = self.cum_mass[i] / (r * r * r);
            if ((f_quad - f) / f).abs() > T::lit(1e-7) {
                return Err(format!("mass identity fails at node {i}"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::build_series;

    fn reference() -> RadialProfile<f64> {
        let p = ProfileParams::new(0.0, 4, -1.0).unwrap();
        let s = build_series(&p, 1e-13).unwrap();
        solve_profile(&p, &s, 1e4, 1e-10).unwrap()
    }

    #[test]
    fn hermite_reproduces_quintics() {
        let p = |t: f64| 1.0 + 2.0 * t - t * t + 0.5 * t.powi(3) - t.powi(4) + 0.25 * t.powi(5);
        let dp = |t: f64| 2.0 - 2.0 * t + 1.5 * t * t - 4.0 * t.powi(3) + 1.25 * t.powi(4);
        let ddp = |t: f64| -2.0 + 3.0 * t - 12.0 * t * t + 5.0 * t.powi(3);
        let (a, h) = (0.3, 0.7);
        for &t in &[0.0, 0.2, 0.5, 0.9, 1.0] {
            let got = hermite5(t, h, [p(a), dp(a), ddp(a)], [p(a + h), dp(a + h), ddp(a + h)]);
            assert!((got - p(a + t * h)).abs() < 1e-13);
        }
    }

    #[test]
    fn interpolant_matches_nodes() {
        let prof = reference();
        for i in [40, 100, 250] {
            let s = prof.eval(prof.grid()[i]).unwrap();
            assert!((s.q / prof.q_vals()[i] - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn out_of_range_is_rejected() {
        let prof = reference();
        assert!(matches!(prof.eval(2e4), Err(ProfileError::OutOfRange { .. })));
        assert!(matches!(prof.partial_mass(-1.0), Err(ProfileError::OutOfRange { .. })));
    }

    #[test]
    fn invariants_hold_for_reference() {
        let prof = reference();
        prof.check_invariants().unwrap();
        assert!(prof.residual_max() < 1e-8, "residual {}", prof.residual_max());
    }
}
