//! Profile parameters and the admissibility threshold.

use serde::{Deserialize, Serialize};

use crate::error::ProfileError;
use crate::scalar::Real;

/// Relative slack when comparing a floating threshold against an integer.
const INTEGER_SLACK: f64 = 1e-9;

/// Output of [`compute_admissibility`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Admissibility {
    /// `J = 3(1 - mu)/(1 - 3 mu) + 1`.
    pub threshold: f64,
    /// Least integer `j0 >= J`.
    pub j0_min: u32,
}

/// Threshold `J(mu)` and the least admissible vanishing order.
///
/// `J` is computed in floating point; integers within a relative `1e-9`
/// of it count as reaching it, so `mu = 0.2` gives `j0_min = 7` even though
/// `0.2` is not representable.
pub fn compute_admissibility(mu: f64) -> Result<Admissibility, ProfileError> {
    if !(mu.is_finite() && (0.0..1.0 / 3.0).contains(&mu)) {
        return Err(ProfileError::Domain { mu });
    }
    let threshold = 3.0 * (1.0 - mu) / (1.0 - 3.0 * mu) + 1.0;
    let j0_min = (threshold * (1.0 - INTEGER_SLACK)).ceil().max(2.0) as u32;
    Ok(Admissibility { threshold, j0_min })
}

/// Similarity exponent `beta = 1/(3(1 - mu)) + 1/(2 j0)`.
pub fn similarity_exponent(mu: f64, j0: u32) -> f64 {
    1.0 / (3.0 * (1.0 - mu)) + 1.0 / (2.0 * j0 as f64)
}

/// One profile problem `(mu, j0, beta, q_j0)`.
///
/// `beta` is derived from `(mu, j0)` at construction and never set directly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileParams<T> {
    mu: T,
    j0: u32,
    beta: T,
    q_j0: T,
}

impl<T: Real> ProfileParams<T> {
    pub fn new(mu: T, j0: u32, q_j0: T) -> Result<Self, ProfileError> {
        let adm = compute_admissibility(mu.as_f64())?;
        if j0 < adm.j0_min {
            return Err(ProfileError::InvalidParams(format!(
                "j0 = {j0} is below the threshold J = {:.6}",
                adm.threshold
            )));
        }
        if !(q_j0 < T::zero()) {
            return Err(ProfileError::InvalidParams(format!(
                "q_j0 must be negative, got {q_j0}"
            )));
        }
        Ok(Self::assemble(mu, j0, q_j0))
    }

    /// The constant solution at the stagnation point (`q_j0 = 0`).
    pub fn stationary(mu: T, j0: u32) -> Result<Self, ProfileError> {
        compute_admissibility(mu.as_f64())?;
        if j0 < 2 {
            return Err(ProfileError::InvalidParams("j0 must be at least 2".into()));
        }
        Ok(Self::assemble(mu, j0, T::zero()))
    }

    fn assemble(mu: T, j0: u32, q_j0: T) -> Self {
        let beta = T::one() / (T::lit(3.0) * (T::one() - mu)) + T::one() / T::lit(2.0 * j0 as f64);
        Self { mu, j0, beta, q_j0 }
    }

    pub fn mu(&self) -> T {
        self.mu
    }

    pub fn j0(&self) -> u32 {
        self.j0
    }

    pub fn beta(&self) -> T {
        self.beta
    }

    pub fn q_j0(&self) -> T {
        self.q_j0
    }

    /// `Q(0) = 1/(1 - mu)`.
    pub fn q0(&self) -> T {
        T::one() / (T::one() - self.mu)
    }

    /// `f(0) = Q(0)/3`.
    pub fn f0(&self) -> T {
        self.q0() / T::lit(3.0)
    }

    /// Exponent `2 - 4 beta` of the diffusive term in renormalized variables.
    pub fn diffusion_exponent(&self) -> T {
        T::lit(2.0) - T::lit(4.0) * self.beta
    }

    /// Coupling `sigma = q_j0 (2 j0/3 + 2(1 - mu))` of mode 0 into mode `j0`.
    pub fn coupling_sigma(&self) -> T {
        let j0 = T::lit(self.j0 as f64);
        self.q_j0 * (T::lit(2.0) * j0 / T::lit(3.0) + T::lit(2.0) * (T::one() - self.mu))
    }

    pub fn to_f64(&self) -> ProfileParams<f64> {
        ProfileParams {
            mu: self.mu.as_f64(),
            j0: self.j0,
            beta: self.beta.as_f64(),
            q_j0: self.q_j0.as_f64(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_at_zero_damping() {
        let a = compute_admissibility(0.0).unwrap();
        assert_eq!(a.threshold, 4.0);
        assert_eq!(a.j0_min, 4);
    }

    #[test]
    fn threshold_rejects_global_existence_regime() {
        assert!(matches!(compute_admissibility(1.0 / 3.0), Err(ProfileError::Domain { .. })));
        assert!(matches!(compute_admissibility(0.34), Err(ProfileError::Domain { .. })));
        assert!(matches!(compute_admissibility(-0.1), Err(ProfileError::Domain { .. })));
    }

    #[test]
    fn beta_below_one_half_at_threshold() {
        for mu in [0.0, 0.05, 0.1, 0.2, 0.3, 0.33] {
            let a = compute_admissibility(mu).unwrap();
            assert!(similarity_exponent(mu, a.j0_min) < 0.5, "mu = {mu}");
        }
    }

    #[test]
    fn params_reject_low_order_and_positive_coefficient() {
        assert!(ProfileParams::new(0.0, 3, -1.0).is_err());
        assert!(ProfileParams::new(0.0, 4, 1.0).is_err());
        let p = ProfileParams::new(0.0f64, 4, -1.0).unwrap();
        assert!((p.beta() - 11.0 / 24.0).abs() < 1e-16);
        assert!((p.coupling_sigma() + 14.0 / 3.0).abs() < 1e-14);
    }
}
