//! Selection of `(A, B, R1)` and the stored admissibility certificates.

use serde::{Deserialize, Serialize};

use crate::error::LinopsError;
use crate::profile::RadialProfile;
use crate::quadrature::PanelGrid;
use crate::scalar::Real;

/// Largest exponent tried by [`select_weight`].
pub const A_MAX: u32 = 100_000;

const Q_CUTOFF: f64 = 1e-3;
const TAIL_CUTOFF: f64 = 1.0 / 5000.0;
const WHOLE_CUTOFF: f64 = 1.0 / 100.0;
const B_CUTOFF: f64 = 1.0 / 100.0;

/// Weight `w = r^{-A} + B` with `B = 10^{log10_b}` and its certificates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightParams<T> {
    pub a: u32,
    /// `B` is stored as a decimal exponent; admissible values reach far below `f64` range.
    pub log10_b: i32,
    pub r1: T,
    /// `|| r^{-1/2} Q' ||_{L^2(r >= R1)}`.
    pub cert_tailnorm: T,
    /// `|| r^{-1/2} Q' ||_{L^2}`.
    pub cert_wholenorm: T,
    pub j0: u32,
    pub mu: T,
    pub q_at_r1: T,
    pub q0: T,
}

/// Outcome of each of the four weight conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightCertificate {
    /// `1 + (3 - A)/(4 j0)`; must be at most `-1`.
    pub origin_coefficient: f64,
    pub origin_ok: bool,
    /// `sqrt(1/(4 pi (A + 3))) ||r^{-1/2} Q'||`; must be at most `1/100`.
    pub whole_value: f64,
    pub whole_ok: bool,
    /// `(3/2) Q(R1)`; must be at most `1/1000` together with the tail norm.
    pub r1_value: f64,
    pub tail_value: f64,
    pub r1_ok: bool,
    /// Base-10 logarithm of the B-condition left side; must be at most `-2`.
    pub log10_b_value: f64,
    pub b_ok: bool,
}

impl WeightCertificate {
    pub fn all_pass(&self) -> bool {
        self.origin_ok && self.whole_ok && self.r1_ok && self.b_ok
    }
}

impl<T: Real> WeightParams<T> {
    pub fn b(&self) -> T {
        T::lit(10f64.powi(self.log10_b))
    }

    /// Decimal log of `(3/2 - 2 mu) B R1^A Q(0) + 50 B R1^A ||r^{-1/2} Q'||^2`.
    pub fn log10_b_condition(&self, log10_b: i32) -> f64 {
        b_condition_log10(
            self.a,
            log10_b,
            self.r1.as_f64(),
            self.mu.as_f64(),
            self.q0.as_f64(),
            self.cert_wholenorm.as_f64(),
        )
    }

    pub fn certificate(&self) -> WeightCertificate {
        let a = self.a as f64;
        let origin_coefficient = 1.0 + (3.0 - a) / (4.0 * self.j0 as f64);
        let whole_value = (1.0 / (4.0 * std::f64::consts::PI * (a + 3.0))).sqrt() * self.cert_wholenorm.as_f64();
        let r1_value = 1.5 * self.q_at_r1.as_f64();
        let tail_value = self.cert_tailnorm.as_f64();
        let log10_b_value = self.log10_b_condition(self.log10_b);
        WeightCertificate {
            origin_coefficient,
            origin_ok: origin_coefficient <= -1.0,
            whole_value,
            whole_ok: whole_value <= WHOLE_CUTOFF,
            r1_value,
            tail_value,
            r1_ok: r1_value <= Q_CUTOFF && tail_value <= TAIL_CUTOFF,
            log10_b_value,
            b_ok: log10_b_value <= B_CUTOFF.log10(),
        }
    }
}

fn b_condition_log10(a: u32, log10_b: i32, r1: f64, mu: f64, q0: f64, whole: f64) -> f64 {
    let bracket = (1.5 - 2.0 * mu) * q0 + 50.0 * whole * whole;
    log10_b as f64 + a as f64 * r1.log10() + bracket.log10()
}

/// `4 pi int_{r_from}^infty Q'^2 r dr`, with the part beyond `r_max` from the fitted power law.
pub fn weighted_dq_norm_sq<T: Real>(profile: &RadialProfile<T>, r_from: T) -> Result<T, LinopsError> {
    let r_max = profile.r_max();
    let u_lo = r_from.max(T::lit(crate::quadrature::U_MIN).exp()).ln().as_f64();
    let u_hi = r_max.ln().as_f64();
    let mut total = T::zero();
    if u_hi > u_lo {
        let grid: PanelGrid<T> = PanelGrid::spanning(u_lo, u_hi);
        let mut vals = Vec::with_capacity(grid.len());
        for &r in grid.radii() {
            let dq = profile.eval(r)?.dq;
            vals.push(dq * dq * r * r);
        }
        total = grid.integrate_du(&vals);
    }
    let gamma = profile.tail_exponent();
    if gamma < T::zero() {
        let r_end = r_max.max(r_from);
        let dq_end = profile.eval(r_max)?.dq * (r_end / r_max).powf(gamma - T::one());
        total += dq_end * dq_end * r_end * r_end / (T::lit(-2.0) * gamma);
    }
    Ok(T::lit(4.0) * T::PI() * total)
}

fn bisect_decreasing<T: Real>(
    mut lo: T,
    mut hi: T,
    mut pass: impl FnMut(T) -> Result<bool, LinopsError>,
) -> Result<T, LinopsError> {
    if pass(lo)? {
        return Ok(lo);
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if pass(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi / lo - T::one() < T::lit(1e-12) {
            break;
        }
    }
    Ok(hi)
}

/// Weight for a fixed exponent `a`: `R1` is the least radius meeting both tail
/// conditions and `B` the largest power of ten meeting the B-condition.
pub fn weight_for_exponent<T: Real>(
    profile: &RadialProfile<T>,
    j0: u32,
    a: u32,
) -> Result<WeightParams<T>, LinopsError> {
    let whole = weighted_dq_norm_sq(profile, T::zero())?.sqrt();
    let r_lo = profile.handoff_radius();
    let r_hi = profile.r_max();
    let r_q = bisect_decreasing(r_lo, r_hi, |r| Ok(T::lit(1.5) * profile.q(r)? <= T::lit(Q_CUTOFF)))?;
    let r_tail = bisect_decreasing(r_lo, r_hi, |r| {
        Ok(weighted_dq_norm_sq(profile, r)?.sqrt() <= T::lit(TAIL_CUTOFF))
    })?;
    let r1 = r_q.max(r_tail);
    let tail = weighted_dq_norm_sq(profile, r1)?.sqrt();
    let mu = profile.params().mu();
    let q0 = profile.params().q0();
    let target = B_CUTOFF.log10();
    let lhs0 = b_condition_log10(a, 0, r1.as_f64(), mu.as_f64(), q0.as_f64(), whole.as_f64());
    let mut log10_b = (target - lhs0).floor() as i32;
    while b_condition_log10(a, log10_b + 1, r1.as_f64(), mu.as_f64(), q0.as_f64(), whole.as_f64()) <= target {
        log10_b += 1;
    }
    while b_condition_log10(a, log10_b, r1.as_f64(), mu.as_f64(), q0.as_f64(), whole.as_f64()) > target {
        log10_b -= 1;
    }
    Ok(WeightParams {
        a,
        log10_b,
        r1,
        cert_tailnorm: tail,
        cert_wholenorm: whole,
        j0,
        mu,
        q_at_r1: profile.q(r1)?,
        q0,
    })
}

/// Smallest admissible weight: `A` starts at the least multiple of 4 with
/// `A >= 8 j0 + 3` and grows in steps of 4 until the whole-norm condition holds.
pub fn select_weight<T: Real>(profile: &RadialProfile<T>, j0: u32) -> Result<WeightParams<T>, LinopsError> {
    let whole = weighted_dq_norm_sq(profile, T::zero())?.sqrt().as_f64();
    let mut a = (8 * j0 + 3).div_ceil(4) * 4;
    while (1.0 / (4.0 * std::f64::consts::PI * (a as f64 + 3.0))).sqrt() * whole > WHOLE_CUTOFF {
        a += 4;
        if a > A_MAX {
            return Err(LinopsError::NoAdmissibleA { a_max: A_MAX });
        }
    }
    weight_for_exponent(profile, j0, a)
}
