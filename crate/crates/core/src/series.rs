//! Even Taylor expansion of the profile at the origin.
//!
//! With `Q(r) = sum Q_j r^{2j}` and `f(r) = sum f_j r^{2j}`, the profile system
//! gives `f_j = Q_j/(2j + 3)` and, for `j >= 1`,
//!
//! ```text
//! (2j (beta - f_0) - 1) Q_j = sum_{i=1}^{j-1} (2i/(2(j-i)+3) + 1 - mu) Q_i Q_{j-i}
//! ```
//!
//! The left coefficient vanishes only at the resonant index, whose value is free.

use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use crate::error::ProfileError;
use crate::params::ProfileParams;
use crate::scalar::{FieldScalar, Real};

/// Number of coefficients computed before truncation is chosen.
pub const N_MAX: usize = 400;

/// Inputs of the coefficient recurrence in a chosen scalar field.
#[derive(Debug, Clone)]
pub struct SeriesProblem<S> {
    pub mu: S,
    pub beta: S,
    /// Index whose coefficient is left free (the resonance), if any.
    pub resonant: Option<usize>,
    /// Value assigned at the resonant index.
    pub free_coeff: S,
}

impl<S: FieldScalar> SeriesProblem<S> {
    /// Problem for `(mu, j0, q_j0)` with `beta = 1/(3(1-mu)) + 1/(2 j0)` formed in `S`.
    pub fn resonant(mu: S, j0: usize, q_j0: S) -> Self {
        let three = S::ratio(3, 1);
        let beta = S::one().quotient(&(three * (S::one() - mu.clone()))) + S::ratio(1, 2 * j0 as i64);
        Self { mu, beta, resonant: Some(j0), free_coeff: q_j0 }
    }

    /// Problem with an arbitrary `beta` and no free coefficient.
    pub fn with_beta(mu: S, beta: S) -> Self {
        Self { mu, beta, resonant: None, free_coeff: S::zero() }
    }

    pub fn q0(&self) -> S {
        S::one().quotient(&(S::one() - self.mu.clone()))
    }

    pub fn f0(&self) -> S {
        self.q0().quotient(&S::ratio(3, 1))
    }

    /// Left coefficient `2j(beta - f_0) - 1`.
    pub fn diagonal(&self, j: usize) -> S {
        S::ratio(2 * j as i64, 1) * (self.beta.clone() - self.f0()) - S::one()
    }

    /// Right-hand side of the recurrence at index `j` given `Q_1..Q_{j-1}`.
    pub fn convolution(&self, q: &[S], j: usize) -> S {
        let one_minus_mu = S::one() - self.mu.clone();
        let mut acc = S::zero();
        for i in 1..j {
            if q[i].is_zero() || q[j - i].is_zero() {
                continue;
            }
            let w = S::ratio(2 * i as i64, 2 * (j - i) as i64 + 3) + one_minus_mu.clone();
            acc = acc + w * q[i].clone() * q[j - i].clone();
        }
        acc
    }
}

/// Coefficients `Q_0..Q_{n}` of the recurrence.
pub fn q_coefficients<S: FieldScalar>(
    problem: &SeriesProblem<S>,
    n: usize,
) -> Result<Vec<S>, ProfileError> {
    let mut q = Vec::with_capacity(n + 1);
    q.push(problem.q0());
    let degenerate_scale = S::ratio(1, 1_000_000_000_000);
    for j in 1..=n {
        if problem.resonant == Some(j) {
            q.push(problem.free_coeff.clone());
            continue;
        }
        let d = problem.diagonal(j);
        if d.is_zero() || d.abs() <= degenerate_scale.clone() * S::ratio(2 * j as i64, 1) {
            return Err(ProfileError::RecurrenceDegenerate { j });
        }
        let rhs = problem.convolution(&q, j);
        q.push(rhs.quotient(&d));
    }
    Ok(q)
}

/// `f_j = Q_j/(2j + 3)`.
pub fn f_coefficients<S: FieldScalar>(q: &[S]) -> Vec<S> {
    q.iter()
        .enumerate()
        .map(|(j, qj)| qj.quotient(&S::ratio(2 * j as i64 + 3, 1)))
        .collect()
}

/// Relative mismatch of the two sides of the recurrence at every `j >= 1`
/// (the resonant index is skipped).
pub fn recurrence_residuals<S: FieldScalar>(problem: &SeriesProblem<S>, q: &[S]) -> Vec<f64> {
    (1..q.len())
        .filter(|&j| problem.resonant != Some(j))
        .map(|j| {
            let lhs = problem.diagonal(j) * q[j].clone();
            let rhs = problem.convolution(q, j);
            let scale = lhs.abs().to_f64_approx().max(rhs.abs().to_f64_approx());
            if scale == 0.0 {
                0.0
            } else {
                (lhs - rhs).abs().to_f64_approx() / scale
            }
        })
        .collect()
}

/// Certified coefficient bound `|Q_j| <= K^(j - alpha) / j^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientBound {
    pub k: f64,
    pub alpha: f64,
}

impl CoefficientBound {
    pub fn holds(&self, j: usize, qj: f64) -> bool {
        let j_f = j as f64;
        qj.abs() <= self.k.powf(j_f - self.alpha) / (j_f * j_f) * (1.0 + 1e-12)
    }
}

/// Truncated even Taylor series of `(Q, f)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSeries<T> {
    pub q_coeffs: Vec<T>,
    pub f_coeffs: Vec<T>,
    /// Certified lower bound `K^{-1/2}` on the convergence radius.
    pub radius_estimate: T,
    /// Radius from the geometric fit of `|Q_j|^{1/j}` over the upper half of the coefficients.
    pub ratio_radius: T,
    pub truncation: usize,
    pub bound: CoefficientBound,
    /// Radius at which the series hands over to the integrator.
    pub handoff_radius: T,
}

impl<T: Real> PowerSeries<T> {
    pub fn is_constant(&self) -> bool {
        self.q_coeffs.iter().skip(1).all(|c| c.is_zero())
    }

    pub fn eval_q(&self, r: T) -> T {
        horner(&self.q_coeffs, r * r)
    }

    pub fn eval_f(&self, r: T) -> T {
        horner(&self.f_coeffs, r * r)
    }

    /// `dQ/dr`.
    pub fn eval_dq(&self, r: T) -> T {
        let x = r * r;
        let mut acc = T::zero();
        for j in (1..self.q_coeffs.len()).rev() {
            acc = acc * x + T::lit(2.0 * j as f64) * self.q_coeffs[j];
        }
        acc * r
    }
}

fn horner<T: Real>(c: &[T], x: T) -> T {
    c.iter().rev().fold(T::zero(), |acc, &cj| acc * x + cj)
}

/// Builds the truncated series for a profile problem.
///
/// Coefficients are generated in double-double arithmetic. The handoff radius
/// is the largest of `{1/2, 0.45, ..., 0.05}` times the certified radius at
/// which the certified tail bound falls below `tol` within [`N_MAX`] terms and
/// `beta - f > (beta - f_0)/2` still holds.
pub fn build_series<T: Real>(
    params: &ProfileParams<T>,
    tol: T,
) -> Result<PowerSeries<T>, ProfileError> {
    if !(tol > T::zero()) {
        return Err(ProfileError::InvalidParams("tolerance must be positive".into()));
    }
    let j0 = params.j0() as usize;
    let problem = SeriesProblem::resonant(
        TwoFloat::from(params.mu().as_f64()),
        j0,
        TwoFloat::from(params.q_j0().as_f64()),
    );
    let q_ext = q_coefficients(&problem, N_MAX)?;
    let q: Vec<f64> = q_ext.iter().map(|c| f64::from(*c)).collect();
    let nonzero: Vec<(usize, f64)> = q
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, c)| **c != 0.0)
        .map(|(j, c)| (j, c.abs()))
        .collect();

    let to_t = |v: &[f64]| v.iter().map(|&c| T::lit(c)).collect::<Vec<T>>();
    if nonzero.is_empty() {
        let q0 = vec![q[0]];
        return Ok(PowerSeries {
            f_coeffs: to_t(&[q[0] / 3.0]),
            q_coeffs: to_t(&q0),
            radius_estimate: T::infinity(),
            ratio_radius: T::infinity(),
            truncation: 0,
            bound: CoefficientBound { k: 1.0, alpha: 0.0 },
            handoff_radius: T::one(),
        });
    }

    let k_raw = nonzero
        .iter()
        .map(|&(j, c)| (c * (j * j) as f64).powf(1.0 / j as f64))
        .fold(0.0f64, f64::max);
    let k = (k_raw * 1.01).max(1.01);
    let ln_k = k.ln();
    let alpha = nonzero
        .iter()
        .map(|&(j, c)| j as f64 - (c * (j * j) as f64).ln() / ln_k)
        .fold(f64::INFINITY, f64::min);
    let bound = CoefficientBound { k, alpha };
    let certified = k.powf(-0.5);

    let upper: Vec<(f64, f64)> = nonzero
        .iter()
        .filter(|(j, _)| *j >= N_MAX / 2)
        .map(|&(j, c)| (j as f64, c.ln()))
        .collect();
    let ratio_radius = if upper.len() >= 2 {
        let slope = crate::lsq::line_fit(&upper).slope;
        (-0.5 * slope).exp()
    } else {
        certified
    };

    let tol_f = tol.as_f64();
    let f0 = q[0] / 3.0;
    let beta = f64::from(problem.beta);
    for step in 0..10 {
        let r_h = certified * (0.5 - 0.05 * step as f64);
        let x = k * r_h * r_h;
        let Some(n) = (j0..=N_MAX).find(|&n| {
            let nn = (n + 1) as f64;
            k.powf(-alpha) * x.powf(nn) / (nn * nn * (1.0 - x)) < tol_f
        }) else {
            continue;
        };
        let q_trunc = &q[..=n];
        let f_trunc: Vec<f64> = q_trunc.iter().enumerate().map(|(j, c)| c / (2 * j + 3) as f64).collect();
        let f_h = f_trunc.iter().rev().fold(0.0, |acc, c| acc * r_h * r_h + c);
        if beta - f_h > 0.5 * (beta - f0) {
            return Ok(PowerSeries {
                q_coeffs: to_t(q_trunc),
                f_coeffs: to_t(&f_trunc),
                radius_estimate: T::lit(certified),
                ratio_radius: T::lit(ratio_radius),
                truncation: n,
                bound,
                handoff_radius: T::lit(r_h),
            });
        }
    }
    Err(ProfileError::NoConvergence { n_max: N_MAX })
}
