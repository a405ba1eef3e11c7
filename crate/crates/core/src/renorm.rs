//! Renormalized radial flow around the profile.
//!
//! ```text
//! d_tau Psi = D(tau) Lap Psi - Psi - beta r Psi' + r f_Psi Psi' + (1 - mu) Psi^2
//! D(tau) = lambda(tau)^{2 - 4 beta},  lambda(tau) = lambda_0 exp(-tau/2)
//! ```
//!
//! with `f_Psi(r) = r^{-3} int_0^r Psi s^2 ds`. Uniform nodes on `[0, R_dom]`,
//! second-order upwinding for the transport, classical RK4 in time.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::RenormError;
use crate::lsq::{line_fit, lstsq};
use crate::params::ProfileParams;
use crate::profile::RadialProfile;
use crate::quadrature::simpson_prefix;
use crate::scalar::Real;

/// Which terms of the right-hand side are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Terms {
    pub diffusion: bool,
    pub nonlocal: bool,
    pub reaction: bool,
}

impl Terms {
    pub const ALL: Terms = Terms { diffusion: true, nonlocal: true, reaction: true };
    /// Only `-Psi - beta r Psi'`.
    pub const TRANSPORT_ONLY: Terms = Terms { diffusion: false, nonlocal: false, reaction: false };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenormConfig {
    pub r_dom: f64,
    pub n: usize,
    pub lambda0: f64,
    pub fit_radius: f64,
    /// Highest extracted mode; `None` means `j0 + 2`.
    pub kfit: Option<usize>,
    pub cfl: f64,
    /// Spacing of recorded samples in `tau`.
    pub sample_dt: f64,
    pub terms: Terms,
}

impl Default for RenormConfig {
    fn default() -> Self {
        Self {
            r_dom: 50.0,
            n: 4096,
            lambda0: 1e-3,
            fit_radius: 0.5,
            kfit: None,
            cfl: 0.4,
            sample_dt: 0.02,
            terms: Terms::ALL,
        }
    }
}

/// Snapshot of the renormalized flow.
#[derive(Debug, Clone, PartialEq)]
pub struct RenormState<T> {
    pub tau: T,
    pub lambda: T,
    pub psi: Vec<T>,
    /// Modulation coefficients of `Psi - Q` on the fit window.
    pub c: Vec<T>,
    /// `|| d_tau Psi ||_{L^2}` at this state.
    pub residual_norm: T,
    /// Smallest nodal value seen so far in the run.
    pub min_psi: T,
}

/// One recorded row of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenormSample {
    pub tau: f64,
    pub lambda: f64,
    pub eps_sup: f64,
    pub c: Vec<f64>,
    pub residual_norm: f64,
}

/// A finished run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenormRun {
    pub samples: Vec<RenormSample>,
    /// `sup_tau || Psi - Q ||_inf` over every step.
    pub eps_sup_max: f64,
    pub steps: usize,
    /// True if any node dropped below `-1e-10`.
    pub negativity_flag: bool,
}

/// Discretization of the renormalized equation for one profile.
#[derive(Debug, Clone)]
pub struct RenormSolver<T> {
    config: RenormConfig,
    mu: T,
    beta: T,
    j0: usize,
    kfit: usize,
    h: T,
    r: Vec<T>,
    q: Vec<T>,
    chi: Vec<T>,
}

/// `chi = 1` on `[0, 1]`, `0` beyond 2, joined by the quintic smoothstep.
pub fn cutoff<T: Real>(r: T) -> T {
    let t = (r - T::one()).max(T::zero()).min(T::one());
    let t3 = t * t * t;
    T::one() - t3 * (T::lit(10.0) - T::lit(15.0) * t + T::lit(6.0) * t * t)
}

impl<T: Real> RenormSolver<T> {
    pub fn new(profile: &RadialProfile<T>, config: RenormConfig) -> Result<Self, RenormError> {
        if config.n < 16 || !(config.r_dom > 2.0) || !(config.lambda0 > 0.0) || !(config.cfl > 0.0) {
            return Err(RenormError::InvalidConfig(format!("{config:?}")));
        }
        if !(config.fit_radius > 0.0 && config.fit_radius <= 1.0) {
            return Err(RenormError::InvalidConfig("fit window must lie where the cutoff is 1".into()));
        }
        let params: &ProfileParams<T> = profile.params();
        let h = T::lit(config.r_dom / (config.n - 1) as f64);
        let r: Vec<T> = (0..config.n).map(|i| h * T::from_usize_lossy(i)).collect();
        let mut q = Vec::with_capacity(config.n);
        for &ri in &r {
            q.push(profile.eval(ri)?.q);
        }
        let chi = r.iter().map(|&ri| cutoff(ri)).collect();
        let j0 = params.j0() as usize;
        Ok(Self {
            kfit: config.kfit.unwrap_or(j0 + 2),
            config,
            mu: params.mu(),
            beta: params.beta(),
            j0,
            h,
            r,
            q,
            chi,
        })
    }

    pub fn config(&self) -> &RenormConfig {
        &self.config
    }

    pub fn radii(&self) -> &[T] {
        &self.r
    }

    pub fn profile_samples(&self) -> &[T] {
        &self.q
    }

    pub fn kfit(&self) -> usize {
        self.kfit
    }

    pub fn j0(&self) -> usize {
        self.j0
    }

    pub fn lambda(&self, tau: T) -> T {
        T::lit(self.config.lambda0) * (-tau * T::lit(0.5)).exp()
    }

    /// `lambda(tau)^{2 - 4 beta}`.
    pub fn diffusivity(&self, tau: T) -> T {
        if !self.config.terms.diffusion {
            return T::zero();
        }
        self.lambda(tau).powf(T::lit(2.0) - T::lit(4.0) * self.beta)
    }

    /// `Q + sum a_j chi r^{2j}`.
    pub fn seeded(&self, modes: &[(usize, T)]) -> Vec<T> {
        (0..self.r.len())
            .map(|i| {
                self.q[i]
                    + modes
                        .iter()
                        .map(|&(j, a)| a * self.chi[i] * self.r[i].powi(2 * j as i32))
                        .sum::<T>()
            })
            .collect()
    }

    /// State at `tau` for given nodal values.
    pub fn state(&self, tau: T, psi: Vec<T>) -> Result<RenormState<T>, RenormError> {
        let mut rhs = vec![T::zero(); psi.len()];
        self.rhs(tau, &psi, &mut rhs);
        let eps: Vec<T> = psi.iter().zip(&self.q).map(|(&p, &q)| p - q).collect();
        let c = self.extract(&eps)?;
        let min_psi = psi.iter().cloned().fold(T::infinity(), T::min);
        Ok(RenormState {
            tau,
            lambda: self.lambda(tau),
            residual_norm: self.l2_norm(&rhs),
            psi,
            c,
            min_psi,
        })
    }

    pub fn initial_state(&self, modes: &[(usize, T)]) -> Result<RenormState<T>, RenormError> {
        self.state(T::zero(), self.seeded(modes))
    }

    /// `(4 pi int v^2 r^2 dr)^{1/2}` by the trapezoid rule.
    pub fn l2_norm(&self, v: &[T]) -> T {
        let n = v.len();
        let mut acc = T::zero();
        for i in 0..n {
            let w = if i == 0 || i == n - 1 { T::lit(0.5) } else { T::one() };
            acc += w * v[i] * v[i] * self.r[i] * self.r[i];
        }
        (T::lit(4.0) * T::PI() * acc * self.h).sqrt()
    }

    /// `f_Psi` by cumulative Simpson sums of `Psi r^2`.
    pub fn averaged_mass(&self, psi: &[T], out: &mut [T]) {
        let big: Vec<T> = psi.iter().zip(&self.r).map(|(&p, &r)| p * r * r).collect();
        let m = simpson_prefix(self.h, &big);
        out[0] = psi[0] / T::lit(3.0);
        for i in 1..psi.len() {
            out[i] = m[i] / (self.r[i] * self.r[i] * self.r[i]);
        }
    }

    /// Right-hand side of the renormalized equation.
    pub fn rhs(&self, tau: T, psi: &[T], out: &mut [T]) {
        let n = psi.len();
        let h = self.h;
        let two = T::lit(2.0);
        let d = self.diffusivity(tau);
        let terms = self.config.terms;
        let mut f = vec![T::zero(); n];
        if terms.nonlocal {
            self.averaged_mass(psi, &mut f);
        }
        let ghost_hi = two * psi[n - 1] - psi[n - 2];
        let at = |k: isize| -> T {
            if k < 0 {
                psi[(-k) as usize]
            } else if k as usize >= n {
                ghost_hi + (ghost_hi - psi[n - 1]) * T::lit((k as usize - n) as f64)
            } else {
                psi[k as usize]
            }
        };
        for i in 0..n {
            let ri = self.r[i];
            let mut v = -psi[i];
            if i == 0 {
                if d > T::zero() {
                    v += d * T::lit(6.0) * (psi[1] - psi[0]) / (h * h);
                }
            } else {
                let k = i as isize;
                if d > T::zero() {
                    let lap = (at(k + 1) - two * psi[i] + at(k - 1)) / (h * h)
                        + (at(k + 1) - at(k - 1)) / (h * ri);
                    v += d * lap;
                }
                let vel = ri * (self.beta - f[i]);
                let grad = if vel >= T::zero() {
                    (T::lit(3.0) * psi[i] - T::lit(4.0) * at(k - 1) + at(k - 2)) / (two * h)
                } else {
                    (-T::lit(3.0) * psi[i] + T::lit(4.0) * at(k + 1) - at(k + 2)) / (two * h)
                };
                v -= vel * grad;
            }
            if terms.reaction {
                v += (T::one() - self.mu) * psi[i] * psi[i];
            }
            out[i] = v;
        }
    }

    fn max_drift(&self, psi: &[T]) -> T {
        if !self.config.terms.nonlocal {
            return T::zero();
        }
        let mut f = vec![T::zero(); psi.len()];
        self.averaged_mass(psi, &mut f);
        f.iter().zip(&self.r).map(|(&fi, &r)| (fi * r).abs()).fold(T::zero(), T::max)
    }

    /// Stability limit `min(h/(beta R + max drift), h^2/(2 D))` before the CFL factor.
    pub fn stability_limit(&self, state: &RenormState<T>) -> T {
        self.limit_at(state.tau, &state.psi)
    }

    fn limit_at(&self, tau: T, psi: &[T]) -> T {
        let speed = self.beta * T::lit(self.config.r_dom) + self.max_drift(psi);
        let adv = self.h / speed;
        let d = self.diffusivity(tau);
        if d > T::zero() {
            adv.min(self.h * self.h / (T::lit(2.0) * d))
        } else {
            adv
        }
    }

    pub fn stable_dt(&self, state: &RenormState<T>) -> T {
        T::lit(self.config.cfl) * self.stability_limit(state)
    }

    /// One RK4 step without the extraction bookkeeping.
    fn advance(&self, tau: T, psi: &[T], dt: T) -> Vec<T> {
        let n = psi.len();
        let mut k = vec![vec![T::zero(); n]; 4];
        let mut stage = psi.to_vec();
        let half = T::lit(0.5);
        let offsets = [T::zero(), half, half, T::one()];
        for s in 0..4 {
            if s > 0 {
                for i in 0..n {
                    stage[i] = psi[i] + offsets[s] * dt * k[s - 1][i];
                }
            }
            self.rhs(tau + offsets[s] * dt, &stage, &mut k[s]);
        }
        let sixth = dt / T::lit(6.0);
        (0..n)
            .map(|i| psi[i] + sixth * (k[0][i] + T::lit(2.0) * (k[1][i] + k[2][i]) + k[3][i]))
            .collect()
    }

    /// Modulation coefficients of `eps` on the fit window.
    pub fn extract(&self, eps: &[T]) -> Result<Vec<T>, RenormError> {
        let r: Vec<f64> = self.r.iter().map(|v| v.as_f64()).collect();
        let e: Vec<f64> = eps.iter().map(|v| v.as_f64()).collect();
        Ok(extract_modes(&r, &e, self.config.fit_radius, self.kfit)?.into_iter().map(T::lit).collect())
    }

    /// Advances to `tau_end`, recording samples every `sample_dt`.
    pub fn run(&self, initial: RenormState<T>, tau_end: T) -> Result<(RenormState<T>, RenormRun), RenormError> {
        let sample_dt = T::lit(self.config.sample_dt);
        let mut state = initial;
        let mut samples = vec![self.sample(&state)];
        let mut eps_sup_max = self.eps_sup(&state.psi);
        let mut min_psi = state.min_psi;
        let mut steps = 0;
        let mut next_sample = sample_dt;
        let eps_tau = T::lit(1e-12);
        while state.tau < tau_end - eps_tau {
            let target = next_sample.min(tau_end);
            let mut psi = state.psi;
            let mut tau = state.tau;
            while tau < target - eps_tau {
                let dt = (T::lit(self.config.cfl) * self.limit_at(tau, &psi)).min(target - tau);
                psi = self.advance(tau, &psi, dt);
                tau = tau + dt;
                steps += 1;
                if psi.iter().any(|v| !v.is_finite()) {
                    return Err(RenormError::NonFiniteField { tau: tau.as_f64() });
                }
                eps_sup_max = eps_sup_max.max(self.eps_sup(&psi));
                min_psi = psi.iter().cloned().fold(min_psi, T::min);
            }
            state = self.state(target, psi)?;
            state.min_psi = min_psi;
            samples.push(self.sample(&state));
            next_sample = next_sample + sample_dt;
        }
        let run = RenormRun {
            samples,
            eps_sup_max,
            steps,
            negativity_flag: min_psi.as_f64() < -1e-10,
        };
        Ok((state, run))
    }

    fn eps_sup(&self, psi: &[T]) -> f64 {
        psi.iter().zip(&self.q).map(|(&p, &q)| (p - q).abs().as_f64()).fold(0.0, f64::max)
    }

    fn sample(&self, state: &RenormState<T>) -> RenormSample {
        RenormSample {
            tau: state.tau.as_f64(),
            lambda: state.lambda.as_f64(),
            eps_sup: self.eps_sup(&state.psi),
            c: state.c.iter().map(|v| v.as_f64()).collect(),
            residual_norm: state.residual_norm.as_f64(),
        }
    }
}

/// One explicit step of the renormalized equation.
pub fn step_renorm<T: Real>(
    solver: &RenormSolver<T>,
    state: &RenormState<T>,
    dt: T,
) -> Result<RenormState<T>, RenormError> {
    let limit = solver.stability_limit(state);
    if !(dt > T::zero()) || dt > limit {
        return Err(RenormError::CflViolation { dt: dt.as_f64(), limit: limit.as_f64() });
    }
    let psi = solver.advance(state.tau, &state.psi, dt);
    if psi.iter().any(|v| !v.is_finite()) {
        return Err(RenormError::NonFiniteField { tau: (state.tau + dt).as_f64() });
    }
    let mut next = solver.state(state.tau + dt, psi)?;
    next.min_psi = next.min_psi.min(state.min_psi);
    Ok(next)
}

/// Least-squares coefficients `c_0..c_kfit` of `eps ~ sum c_j r^{2j}` on `[0, fit_radius]`.
///
/// The basis is scaled to `t = r/fit_radius` before solving.
pub fn extract_modes(r: &[f64], eps: &[f64], fit_radius: f64, kfit: usize) -> Result<Vec<f64>, RenormError> {
    let idx: Vec<usize> = (0..r.len()).filter(|&i| r[i] <= fit_radius * (1.0 + 1e-12)).collect();
    let cols = kfit + 1;
    if idx.len() < cols {
        return Err(RenormError::IllConditionedFit { cond: f64::INFINITY });
    }
    let mut design = Vec::with_capacity(idx.len() * cols);
    for &i in &idx {
        let t2 = (r[i] / fit_radius).powi(2);
        let mut v = 1.0;
        for _ in 0..cols {
            design.push(v);
            v *= t2;
        }
    }
    let rhs: Vec<f64> = idx.iter().map(|&i| eps[i]).collect();
    let sol = lstsq(&design, idx.len(), cols, &rhs);
    if !(sol.condition <= 1e12) {
        return Err(RenormError::IllConditionedFit { cond: sol.condition });
    }
    Ok(sol
        .coeffs
        .iter()
        .enumerate()
        .map(|(j, a)| a / fit_radius.powi(2 * j as i32))
        .collect())
}

/// Fitted growth of one seeded mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateMeasurement {
    pub mode: usize,
    pub rate: f64,
    /// `(j0 - j)/j0`.
    pub expected: f64,
    pub r_squared: f64,
    /// Largest ratio of diffusive forcing to the mode's response over the window.
    pub forcing_ratio_max: f64,
    /// `(tau, c_j seeded - c_j baseline)`.
    pub series: Vec<(f64, f64)>,
}

/// Regression of `d(dc_{j0})/dtau` on `dc_0` in the mode-0 run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingMeasurement {
    pub slope: f64,
    pub expected: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub rates: Vec<RateMeasurement>,
    pub coupling: Option<CouplingMeasurement>,
    pub baseline: RenormRun,
}

fn central_derivative(series: &[(f64, f64)], k: usize) -> f64 {
    let n = series.len();
    let (a, b) = if k == 0 {
        (0, 1)
    } else if k == n - 1 {
        (n - 2, n - 1)
    } else {
        (k - 1, k + 1)
    };
    (series[b].1 - series[a].1) / (series[b].0 - series[a].0)
}

/// Seeds each mode at `amplitude`, subtracts an unseeded baseline run and fits
/// `ln |dc_j|` against `tau`. Mode `0`, when present, also yields the coupling slope.
pub fn measure_rates<T: Real>(
    solver: &RenormSolver<T>,
    params: &ProfileParams<T>,
    modes: &[usize],
    amplitude: T,
    tau_end: T,
) -> Result<RateReport, RenormError> {
    let j0 = solver.j0();
    if let Some(&j) = modes.iter().find(|&&j| j > j0) {
        return Err(RenormError::InvalidConfig(format!("mode {j} exceeds j0 = {j0}")));
    }
    if modes.iter().any(|&j| j + 1 > solver.kfit()) {
        return Err(RenormError::InvalidConfig("kfit must exceed every seeded mode".into()));
    }
    let mut jobs: Vec<Option<usize>> = vec![None];
    jobs.extend(modes.iter().map(|&j| Some(j)));
    let runs: Vec<RenormRun> = jobs
        .par_iter()
        .map(|job| {
            let seed: Vec<(usize, T)> = job.map(|j| vec![(j, amplitude)]).unwrap_or_default();
            let init = solver.initial_state(&seed)?;
            Ok(solver.run(init, tau_end)?.1)
        })
        .collect::<Result<_, RenormError>>()?;
    let baseline = runs[0].clone();
    let diff = |run: &RenormRun, j: usize| -> Vec<(f64, f64)> {
        run.samples
            .iter()
            .zip(&baseline.samples)
            .map(|(s, b)| (s.tau, s.c[j] - b.c[j]))
            .collect()
    };
    let exponent = params.diffusion_exponent().as_f64();
    let mut rates = Vec::new();
    let mut coupling = None;
    for (run, &j) in runs[1..].iter().zip(modes) {
        let series = diff(run, j);
        let next = diff(run, j + 1);
        let pts: Vec<(f64, f64)> = series.iter().filter(|(_, v)| *v != 0.0).map(|&(t, v)| (t, v.abs().ln())).collect();
        let fit = line_fit(&pts);
        let mut forcing_ratio_max: f64 = 0.0;
        let mut dominated_everywhere = true;
        for k in 0..series.len() {
            let tau = series[k].0;
            let d = solver.config().lambda0.powf(exponent) * (-(exponent / 2.0) * tau).exp();
            let forcing = d * ((2 * j + 2) * (2 * j + 3)) as f64 * next[k].1.abs();
            let response = central_derivative(&series, k).abs();
            let ratio = forcing / response;
            forcing_ratio_max = forcing_ratio_max.max(ratio);
            if ratio <= 0.1 {
                dominated_everywhere = false;
            }
        }
        if dominated_everywhere {
            return Err(RenormError::ForcingDominates { mode: j, ratio: forcing_ratio_max });
        }
        rates.push(RateMeasurement {
            mode: j,
            rate: fit.slope,
            expected: (j0 - j) as f64 / j0 as f64,
            r_squared: fit.r_squared,
            forcing_ratio_max,
            series: series.clone(),
        });
        if j == 0 {
            let top = diff(run, j0);
            let pts: Vec<(f64, f64)> = (0..series.len()).map(|k| (series[k].1, central_derivative(&top, k))).collect();
            let cf = line_fit(&pts[1..pts.len() - 1]);
            coupling = Some(CouplingMeasurement {
                slope: cf.slope,
                expected: params.coupling_sigma().as_f64(),
                r_squared: cf.r_squared,
            });
        }
    }
    Ok(RateReport { rates, coupling, baseline })
}
