//! Radial solver for `d_t rho = Lap rho - div(rho grad c) - mu rho^2`, `-Lap c = rho`.
//!
//! Finite volumes on spherical shells `[i h, (i+1) h]`. The chemotactic
//! velocity at a face is `u = -m(r)/r^2` with `m` the exact shell mass below
//! it, so no Poisson solve is needed. Transport uses minmod-limited upwind
//! states and the time stepper is SSP-RK3. The outer face is closed.

use serde::{Deserialize, Serialize};

use crate::error::PhysError;
use crate::lsq::{line_fit, LineFit};
use crate::profile::RadialProfile;
use crate::quadrature::simpson_prefix;
use crate::renorm::cutoff;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysConfig {
    pub n: usize,
    pub lambda0: f64,
    /// Data are cut off at `R2`, where `Q < tail_cut * Q(0)`.
    pub tail_cut: f64,
    /// Domain radius in units of `R2 lambda0^{2 beta}`.
    pub domain_factor: f64,
    pub sup_factor: f64,
    pub min_cells: f64,
    pub fit_samples: usize,
    /// Samples with `sup < fit_start * sup0` are transient and skipped by the exponent fits.
    pub fit_start: f64,
    /// Time budget in units of `1/sup0`.
    pub time_budget: f64,
    pub max_steps: usize,
}

impl Default for PhysConfig {
    fn default() -> Self {
        Self {
            n: 8192,
            lambda0: 1e-24,
            tail_cut: 1e-4,
            domain_factor: 2.2,
            sup_factor: 1e4,
            min_cells: 8.0,
            fit_samples: 50,
            fit_start: 2.0,
            time_budget: 20.0,
            max_steps: 2_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhysState<T> {
    pub t: T,
    pub rho: Vec<T>,
    pub mass: T,
    pub sup_norm: T,
    pub dt: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysSample {
    pub t: f64,
    pub sup_norm: f64,
    pub mass: f64,
    pub half_max_radius: f64,
    pub dt: f64,
}

/// Cell-centred density at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub r: Vec<f64>,
    pub rho: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    SupThreshold,
    ResolutionExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupFit {
    pub t_est: f64,
    pub p_amp: f64,
    pub p_len: f64,
    pub t_est_r2: f64,
    pub amp_r2: f64,
    pub len_r2: f64,
    /// Times bounding the exponent fits.
    pub window: (f64, f64),
    pub samples_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysRun {
    pub samples: Vec<PhysSample>,
    pub snapshots: Vec<Snapshot>,
    pub fit: BlowupFit,
    pub stop: StopReason,
    pub steps: usize,
    /// Largest `|dmass - oracle| / mass` over accepted steps.
    pub mass_defect_max: f64,
    pub min_rho: f64,
    /// `ln(T_est / (T_est - t_end))`, the elapsed self-similar time.
    pub rescaled_time: f64,
}

impl PhysRun {
    /// `|mass_end - mass_0| / mass_0` per unit of self-similar time.
    pub fn relative_mass_drift_rate(&self) -> f64 {
        let m0 = self.samples[0].mass;
        let m1 = self.samples.last().map_or(m0, |s| s.mass);
        (m1 - m0).abs() / m0 / self.rescaled_time.max(f64::MIN_POSITIVE)
    }

    pub fn mass_strictly_decreasing(&self) -> bool {
        self.samples.windows(2).all(|w| w[1].mass < w[0].mass)
    }
}

/// Shell geometry and equation coefficient.
#[derive(Debug, Clone)]
pub struct PhysSolver<T> {
    mu: T,
    h: T,
    centers: Vec<T>,
    volumes: Vec<T>,
    areas: Vec<T>,
    config: PhysConfig,
}

fn minmod<T: Real>(a: T, b: T) -> T {
    if a * b <= T::zero() {
        T::zero()
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

impl<T: Real> PhysSolver<T> {
    pub fn new(mu: T, radius: T, config: PhysConfig) -> Result<Self, PhysError> {
        if config.n < 8 || !(radius > T::zero()) || !(mu >= T::zero()) {
            return Err(PhysError::InvalidConfig(format!("n = {}, radius = {radius}, mu = {mu}", config.n)));
        }
        let n = config.n;
        let h = radius / T::from_usize_lossy(n);
        let third = T::one() / T::lit(3.0);
        let centers = (0..n).map(|i| h * (T::from_usize_lossy(i) + T::lit(0.5))).collect();
        let volumes = (0..n)
            .map(|i| {
                let a = T::from_usize_lossy(i);
                let b = a + T::one();
                third * (b * b * b - a * a * a) * h * h * h
            })
            .collect();
        let areas = (0..=n).map(|i| (h * T::from_usize_lossy(i)).powi(2)).collect();
        Ok(Self { mu, h, centers, volumes, areas, config })
    }

    pub fn h(&self) -> T {
        self.h
    }

    pub fn centers(&self) -> &[T] {
        &self.centers
    }

    /// `4 pi sum rho_i V_i`.
    pub fn mass(&self, rho: &[T]) -> T {
        T::lit(4.0) * T::PI() * rho.iter().zip(&self.volumes).map(|(&p, &v)| p * v).sum::<T>()
    }

    /// `4 pi sum S_i V_i` for the semi-discrete source: `-mu 4 pi sum rho^2 V`.
    pub fn mass_rate(&self, rho: &[T]) -> T {
        -self.mu * T::lit(4.0) * T::PI() * rho.iter().zip(&self.volumes).map(|(&p, &v)| p * p * v).sum::<T>()
    }

    /// Face velocities `-m/r^2`; index `k` is the face at `k h`.
    fn face_velocity(&self, rho: &[T]) -> Vec<T> {
        let n = rho.len();
        let mut u = vec![T::zero(); n + 1];
        let mut m = T::zero();
        for i in 0..n {
            m += rho[i] * self.volumes[i];
            u[i + 1] = -m / self.areas[i + 1];
        }
        u
    }

    pub fn rhs(&self, rho: &[T], out: &mut [T]) {
        let n = rho.len();
        let u = self.face_velocity(rho);
        let at = |k: isize| -> T {
            if k < 0 {
                rho[(-k - 1) as usize]
            } else if k as usize >= n {
                rho[n - 1]
            } else {
                rho[k as usize]
            }
        };
        let mut flux = vec![T::zero(); n + 1];
        let half = T::lit(0.5);
        for k in 1..n {
            let (l, r) = (k as isize - 1, k as isize);
            let diff = -(at(r) - at(l)) / self.h;
            let state = if u[k] >= T::zero() {
                at(l) + half * minmod(at(l) - at(l - 1), at(r) - at(l))
            } else {
                at(r) - half * minmod(at(r + 1) - at(r), at(r) - at(l))
            };
            flux[k] = self.areas[k] * (diff + u[k] * state);
        }
        for i in 0..n {
            out[i] = -(flux[i + 1] - flux[i]) / self.volumes[i] - self.mu * rho[i] * rho[i];
        }
    }

    fn max_speed(&self, rho: &[T]) -> T {
        self.face_velocity(rho).iter().fold(T::zero(), |a, &v| a.max(v.abs()))
    }

    /// `min(0.4 h^2/6, 0.4 h/u_max, 0.1/sup)`.
    pub fn stable_dt(&self, rho: &[T]) -> T {
        let sup = rho.iter().cloned().fold(T::zero(), T::max);
        let mut dt = T::lit(0.4) * self.h * self.h / T::lit(6.0);
        let umax = self.max_speed(rho);
        if umax > T::zero() {
            dt = dt.min(T::lit(0.4) * self.h / umax);
        }
        if sup > T::zero() {
            dt = dt.min(T::lit(0.1) / sup);
        }
        dt
    }

    /// One SSP-RK3 step, together with the mass change the semi-discrete
    /// identity predicts for the same stages.
    pub fn step(&self, state: &PhysState<T>, dt: T) -> Result<(PhysState<T>, T), PhysError> {
        let n = state.rho.len();
        let rho = &state.rho;
        let mut k = vec![T::zero(); n];
        self.rhs(rho, &mut k);
        let s0 = self.mass_rate(rho);
        let r1: Vec<T> = (0..n).map(|i| rho[i] + dt * k[i]).collect();
        self.rhs(&r1, &mut k);
        let s1 = self.mass_rate(&r1);
        let q = T::lit(0.25);
        let r2: Vec<T> = (0..n).map(|i| (T::one() - q) * rho[i] + q * (r1[i] + dt * k[i])).collect();
        self.rhs(&r2, &mut k);
        let s2 = self.mass_rate(&r2);
        let w = T::lit(2.0) / T::lit(3.0);
        let r3: Vec<T> = (0..n).map(|i| (T::one() - w) * rho[i] + w * (r2[i] + dt * k[i])).collect();
        let t = state.t + dt;
        if r3.iter().any(|v| !v.is_finite()) {
            return Err(PhysError::NonFiniteField { t: t.as_f64() });
        }
        let sixth = T::one() / T::lit(6.0);
        let predicted = dt * (sixth * s0 + sixth * s1 + w * s2);
        let next = PhysState {
            t,
            mass: self.mass(&r3),
            sup_norm: r3.iter().cloned().fold(T::zero(), T::max),
            rho: r3,
            dt,
        };
        Ok((next, predicted))
    }

    /// Radius where the density first falls to half its maximum, by linear
    /// interpolation between cell centres.
    pub fn half_max_radius(&self, rho: &[T]) -> T {
        let (imax, sup) = rho
            .iter()
            .enumerate()
            .fold((0, T::zero()), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
        let target = sup * T::lit(0.5);
        for i in imax + 1..rho.len() {
            if rho[i] <= target {
                let (a, b) = (rho[i - 1], rho[i]);
                let frac = (a - target) / (a - b);
                return self.centers[i - 1] + frac * self.h;
            }
        }
        self.centers[rho.len() - 1]
    }

    pub fn state(&self, t: T, rho: Vec<T>) -> PhysState<T> {
        PhysState {
            t,
            mass: self.mass(&rho),
            sup_norm: rho.iter().cloned().fold(T::zero(), T::max),
            dt: self.stable_dt(&rho),
            rho,
        }
    }

    fn snapshot(&self, s: &PhysState<T>) -> Snapshot {
        Snapshot {
            t: s.t.as_f64(),
            r: self.centers.iter().map(|v| v.as_f64()).collect(),
            rho: s.rho.iter().map(|v| v.as_f64()).collect(),
        }
    }
}

/// Radius beyond which `Q < cut * Q(0)`, by bisection on the profile grid.
pub fn tail_radius<T: Real>(profile: &RadialProfile<T>, cut: T) -> Result<T, PhysError> {
    let target = cut * profile.params().q0();
    let (mut lo, mut hi) = (T::zero(), profile.r_max());
    if profile.q(hi)? >= target {
        return Err(PhysError::InvalidConfig(format!("profile does not drop below {target} by r = {hi}")));
    }
    for _ in 0..200 {
        let mid = T::lit(0.5) * (lo + hi);
        if profile.q(mid)? >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Solver and data `rho_0(x) = lambda0^{-2} (chi_{R2} Q)(x / lambda0^{2 beta})`.
///
/// `mu` is the coefficient of the evolved equation, which may differ from the
/// profile's own `mu` for consistency probes.
pub fn initial_data<T: Real>(
    profile: &RadialProfile<T>,
    mu: T,
    config: PhysConfig,
) -> Result<(PhysSolver<T>, PhysState<T>), PhysError> {
    if !(config.lambda0 > 0.0 && config.lambda0 < 1.0) {
        return Err(PhysError::InvalidConfig(format!("lambda0 = {}", config.lambda0)));
    }
    let beta = profile.params().beta();
    let lambda0 = T::lit(config.lambda0);
    let length = lambda0.powf(T::lit(2.0) * beta);
    let amp = T::one() / (lambda0 * lambda0);
    let r2 = tail_radius(profile, T::lit(config.tail_cut))?;
    let solver = PhysSolver::new(mu, T::lit(config.domain_factor) * r2 * length, config)?;
    let mut rho = Vec::with_capacity(config.n);
    for &x in solver.centers() {
        let y = x / length;
        let chi = cutoff(y / r2);
        rho.push(if chi > T::zero() { amp * chi * profile.q(y)? } else { T::zero() });
    }
    let state = solver.state(T::zero(), rho);
    Ok((solver, state))
}

/// Integrates until the sup norm grows by `sup_factor` or the core falls under
/// `min_cells` cells, then fits the blowup exponents.
pub fn run_phys<T: Real>(solver: &PhysSolver<T>, initial: PhysState<T>) -> Result<PhysRun, PhysError> {
    let cfg = solver.config;
    let sup0 = initial.sup_norm;
    let budget = T::lit(cfg.time_budget) / sup0;
    let mut state = initial;
    let mut samples = vec![sample(solver, &state)];
    let mut snapshots = vec![solver.snapshot(&state)];
    let mut next_snapshot = sup0 * T::lit(2.0);
    let mut mass_defect_max: f64 = 0.0;
    let mut min_rho = state.rho.iter().cloned().fold(T::infinity(), T::min);
    let mut steps = 0;
    let stop = loop {
        if state.sup_norm >= T::lit(cfg.sup_factor) * sup0 {
            break StopReason::SupThreshold;
        }
        if solver.half_max_radius(&state.rho) < T::lit(cfg.min_cells) * solver.h {
            if state.sup_norm < T::lit(cfg.fit_start) * sup0 {
                return Err(PhysError::ResolutionExhausted { t: state.t.as_f64() });
            }
            break StopReason::ResolutionExhausted;
        }
        if state.t > budget || steps >= cfg.max_steps || state.sup_norm < T::lit(0.5) * sup0 {
            return Err(PhysError::NoBlowupDetected {
                t: state.t.as_f64(),
                sup_ratio: (state.sup_norm / sup0).as_f64(),
            });
        }
        let dt = solver.stable_dt(&state.rho);
        let (next, predicted) = solver.step(&state, dt)?;
        let defect = ((next.mass - state.mass - predicted) / state.mass).abs().as_f64();
        mass_defect_max = mass_defect_max.max(defect);
        min_rho = next.rho.iter().cloned().fold(min_rho, T::min);
        state = next;
        steps += 1;
        samples.push(sample(solver, &state));
        if state.sup_norm >= next_snapshot {
            snapshots.push(solver.snapshot(&state));
            while next_snapshot <= state.sup_norm {
                next_snapshot = next_snapshot * T::lit(2.0);
            }
        }
    };
    if snapshots.last().map(|s| s.t) != Some(state.t.as_f64()) {
        snapshots.push(solver.snapshot(&state));
    }
    let fit = fit_blowup(&samples, cfg.fit_samples, cfg.fit_start * sup0.as_f64())?;
    let t_end = state.t.as_f64();
    Ok(PhysRun {
        rescaled_time: (fit.t_est / (fit.t_est - t_end)).ln(),
        samples,
        snapshots,
        fit,
        stop,
        steps,
        mass_defect_max,
        min_rho: min_rho.as_f64(),
    })
}

fn sample<T: Real>(solver: &PhysSolver<T>, s: &PhysState<T>) -> PhysSample {
    PhysSample {
        t: s.t.as_f64(),
        sup_norm: s.sup_norm.as_f64(),
        mass: s.mass.as_f64(),
        half_max_radius: solver.half_max_radius(&s.rho).as_f64(),
        dt: s.dt.as_f64(),
    }
}

/// `T_est` from a line through the last `tail` samples of `1/sup` against `t`;
/// exponents from log-log fits over samples with `sup >= sup_min`.
pub fn fit_blowup(samples: &[PhysSample], tail: usize, sup_min: f64) -> Result<BlowupFit, PhysError> {
    let last = samples.last().ok_or_else(|| PhysError::InvalidConfig("empty trajectory".into()))?;
    let start = samples.len().saturating_sub(tail.max(2));
    let inv: Vec<(f64, f64)> = samples[start..].iter().map(|s| (s.t, 1.0 / s.sup_norm)).collect();
    let lf = line_fit(&inv);
    let t_est = -lf.intercept / lf.slope;
    if !(lf.slope < 0.0) || !(t_est > last.t) {
        return Err(PhysError::NoBlowupDetected { t: last.t, sup_ratio: last.sup_norm / samples[0].sup_norm });
    }
    let window: Vec<&PhysSample> = samples.iter().filter(|s| s.sup_norm >= sup_min).collect();
    if window.len() < 3 {
        return Err(PhysError::ResolutionExhausted { t: last.t });
    }
    let log_fit = |f: &dyn Fn(&PhysSample) -> f64| -> LineFit {
        let pts: Vec<(f64, f64)> = window.iter().map(|s| ((t_est - s.t).ln(), f(s).ln())).collect();
        line_fit(&pts)
    };
    let amp = log_fit(&|s| s.sup_norm);
    let len = log_fit(&|s| s.half_max_radius);
    Ok(BlowupFit {
        t_est,
        p_amp: amp.slope,
        p_len: len.slope,
        t_est_r2: lf.r_squared,
        amp_r2: amp.r_squared,
        len_r2: len.r_squared,
        window: (window[0].t, last.t),
        samples_used: window.len(),
    })
}

/// `sup_{y <= y_max} |s rho(t, s^beta y) - Q(y)|` with `s = T_est - t`, for each snapshot.
pub fn collapse_errors<T: Real>(
    run: &PhysRun,
    profile: &RadialProfile<T>,
    y_max: f64,
) -> Result<Vec<(f64, f64)>, PhysError> {
    let beta = profile.params().beta().as_f64();
    let mut out = Vec::with_capacity(run.snapshots.len());
    for snap in &run.snapshots {
        let s = run.fit.t_est - snap.t;
        let len = s.powf(beta);
        let h = snap.r[1] - snap.r[0];
        let mut err: f64 = 0.0;
        for k in 0..=64 {
            let y = y_max * k as f64 / 64.0;
            let x = y * len;
            let pos = (x / h - 0.5).max(0.0);
            let i = (pos.floor() as usize).min(snap.r.len() - 2);
            let frac = (pos - i as f64).min(1.0);
            let rho = snap.rho[i] * (1.0 - frac) + snap.rho[i + 1] * frac;
            err = err.max((s * rho - profile.q(T::lit(y))?.as_f64()).abs());
        }
        out.push((snap.t, err));
    }
    Ok(out)
}

/// Node-sampled density on a uniform grid starting at `r = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSnapshot {
    pub t: f64,
    pub h: f64,
    pub rho: Vec<f64>,
}

impl NodeSnapshot {
    /// Image under `rho -> lambda^{-2} rho(t/lambda^2, x/lambda)`.
    pub fn rescaled(&self, lambda: f64) -> NodeSnapshot {
        let l2 = lambda * lambda;
        NodeSnapshot { t: self.t * l2, h: self.h * lambda, rho: self.rho.iter().map(|v| v / l2).collect() }
    }
}

/// `Lap rho + rho' m/r^2 + (1 - mu) rho^2` by centred differences.
fn node_rhs(s: &NodeSnapshot, mu: f64) -> Vec<f64> {
    let n = s.rho.len();
    let h = s.h;
    let rho = &s.rho;
    let big: Vec<f64> = (0..n).map(|i| rho[i] * (i as f64 * h).powi(2)).collect();
    let m = simpson_prefix(h, &big);
    (0..n)
        .map(|i| {
            let r = i as f64 * h;
            let react = (1.0 - mu) * rho[i] * rho[i];
            if i == 0 {
                return 6.0 * (rho[1] - rho[0]) / (h * h) + react;
            }
            let (a, c) = if i == n - 1 {
                (rho[i - 1], 2.0 * rho[i] - rho[i - 1])
            } else {
                (rho[i - 1], rho[i + 1])
            };
            let d1 = (c - a) / (2.0 * h);
            let d2 = (c - 2.0 * rho[i] + a) / (h * h);
            d2 + 2.0 * d1 / r + d1 * m[i] / (r * r) + react
        })
        .collect()
}

/// Relative discrete residual of the equation, with source `forcing(t, r)`,
/// between two snapshots after both are rescaled by `lambda`.
///
/// The time derivative is the difference quotient and the spatial operator is
/// averaged over the endpoints. The forcing is given in the unrescaled
/// variables and is mapped as `lambda^{-4} F(t/lambda^2, r/lambda)`.
pub fn check_scaling_invariance(
    before: &NodeSnapshot,
    after: &NodeSnapshot,
    lambda: f64,
    mu: f64,
    forcing: &dyn Fn(f64, f64) -> f64,
) -> Result<f64, PhysError> {
    if before.rho.len() != after.rho.len() || before.h != after.h || before.rho.len() < 4 {
        return Err(PhysError::SnapshotMismatch("snapshots must share a grid of at least 4 nodes".into()));
    }
    if !(after.t > before.t) || !(lambda > 0.0) {
        return Err(PhysError::SnapshotMismatch(format!("times {} -> {}, lambda {lambda}", before.t, after.t)));
    }
    let (a, b) = (before.rescaled(lambda), after.rescaled(lambda));
    let (la, lb) = (node_rhs(&a, mu), node_rhs(&b, mu));
    let dt = b.t - a.t;
    let l2 = lambda * lambda;
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..a.rho.len() - 1 {
        let r = i as f64 * a.h;
        let w = r * r;
        let dot = (b.rho[i] - a.rho[i]) / dt;
        let f = 0.5 * (forcing(a.t / l2, r / lambda) + forcing(b.t / l2, r / lambda)) / (l2 * l2);
        let res = dot - 0.5 * (la[i] + lb[i]) - f;
        num += w * res * res;
        den += w * dot * dot;
    }
    if den == 0.0 {
        return Ok(num.sqrt());
    }
    Ok((num / den).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_domain_conserves_mass_without_damping() {
        let solver = PhysSolver::<f64>::new(0.0, 6.0, PhysConfig { n: 200, ..Default::default() }).unwrap();
        let rho: Vec<f64> = solver.centers().iter().map(|r| (-r * r).exp()).collect();
        let s = solver.state(0.0, rho);
        let (next, predicted) = solver.step(&s, s.dt).unwrap();
        assert_eq!(predicted, 0.0);
        assert!(((next.mass - s.mass) / s.mass).abs() < 1e-14);
    }

    #[test]
    fn zero_density_is_a_fixed_point() {
        let solver = PhysSolver::<f64>::new(0.3, 1.0, PhysConfig { n: 32, ..Default::default() }).unwrap();
        let s = solver.state(0.0, vec![0.0; 32]);
        let (next, _) = solver.step(&s, 1e-4).unwrap();
        assert!(next.rho.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn half_max_of_a_step() {
        let solver = PhysSolver::<f64>::new(0.0, 1.0, PhysConfig { n: 10, ..Default::default() }).unwrap();
        let rho = vec![2.0, 2.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert!((solver.half_max_radius(&rho) - 0.3).abs() < 1e-15);
    }
}
