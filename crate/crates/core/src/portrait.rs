//! Classification of `(mu, beta)` by where the resonance of the recurrence falls.
//!
//! With `f_0 = 1/(3(1 - mu))` the diagonal is `2j(beta - f_0) - 1`. For
//! `beta <= f_0` it never vanishes and the series is forced to be constant.
//! For `beta > f_0` it vanishes at `j = 1/(2(beta - f_0))`, and a nonconstant
//! profile exists only when that index is an admissible integer.

use serde::{Deserialize, Serialize};

use crate::error::ProfileError;
use crate::params::{compute_admissibility, ProfileParams};
use crate::profile::{solve_profile, DEFAULT_R_MAX};
use crate::series::{build_series, q_coefficients, SeriesProblem};

/// Position of the stagnation point relative to the resonance line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PortraitCase {
    /// `beta < f_0`.
    Below,
    /// `beta = f_0`.
    Boundary,
    /// `beta > f_0`.
    Above,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    /// Only the constant solution is reachable.
    Trivial,
    /// A profile leaves the stagnation point with vanishing order `j0`.
    Nontrivial { j0: u32 },
    /// Near-resonant or inadmissible: the recurrence or the continuation breaks down.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortraitRow {
    pub beta: f64,
    pub case: PortraitCase,
    /// `1/(2(beta - f_0))`, infinite unless `beta > f_0`.
    pub resonance: f64,
    pub classification: Classification,
    /// `(Q, f)` along the computed trajectory; a single point when trivial.
    pub trajectory: Vec<(f64, f64)>,
}

const BOUNDARY_TOL: f64 = 1e-12;
const INTEGER_TOL: f64 = 1e-9;
const TRAJECTORY_POINTS: usize = 64;
const RECURRENCE_PROBE: usize = 64;

/// Classifies a single `beta`.
pub fn classify_beta(mu: f64, beta: f64) -> Result<PortraitRow, ProfileError> {
    let adm = compute_admissibility(mu)?;
    if !(beta > 0.0 && beta < 0.5) {
        return Err(ProfileError::InvalidParams(format!("beta = {beta} outside (0, 1/2)")));
    }
    let f0 = 1.0 / (3.0 * (1.0 - mu));
    let q0 = 3.0 * f0;
    let gap = beta - f0;
    let case = if gap.abs() <= BOUNDARY_TOL {
        PortraitCase::Boundary
    } else if gap < 0.0 {
        PortraitCase::Below
    } else {
        PortraitCase::Above
    };
    let resonance = if case == PortraitCase::Above { 0.5 / gap } else { f64::INFINITY };
    let trivial = |case| PortraitRow {
        beta,
        case,
        resonance,
        classification: Classification::Trivial,
        trajectory: vec![(q0, f0)],
    };
    if case != PortraitCase::Above {
        return Ok(trivial(case));
    }
    let nearest = resonance.round();
    if (resonance - nearest).abs() > INTEGER_TOL * resonance {
        let probe = SeriesProblem::with_beta(mu, beta);
        return Ok(match q_coefficients(&probe, RECURRENCE_PROBE) {
            Ok(q) if q[1..].iter().all(|c| *c == 0.0) => trivial(case),
            _ => PortraitRow { classification: Classification::Degenerate, ..trivial(case) },
        });
    }
    let j0 = nearest as u32;
    if j0 < adm.j0_min {
        return Ok(PortraitRow { classification: Classification::Degenerate, ..trivial(case) });
    }
    let params = ProfileParams::new(mu, j0, -1.0)?;
    let outcome = build_series(&params, 1e-14).and_then(|s| solve_profile(&params, &s, DEFAULT_R_MAX, 1e-12));
    Ok(match outcome {
        Ok(profile) => {
            let q = profile.q_vals();
            let f = profile.f_vals();
            let stride = (q.len() / TRAJECTORY_POINTS).max(1);
            let trajectory = (0..q.len()).step_by(stride).map(|i| (q[i], f[i])).collect();
            PortraitRow { beta, case, resonance, classification: Classification::Nontrivial { j0 }, trajectory }
        }
        Err(_) => PortraitRow { classification: Classification::Degenerate, ..trivial(case) },
    })
}

/// Classification table over a list of `beta` values.
pub fn portrait_scan(mu: f64, betas: &[f64]) -> Result<Vec<PortraitRow>, ProfileError> {
    betas.iter().map(|&b| classify_beta(mu, b)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_cases() {
        let rows = portrait_scan(0.0, &[0.30, 1.0 / 3.0, 11.0 / 24.0]).unwrap();
        assert_eq!(rows[0].case, PortraitCase::Below);
        assert_eq!(rows[0].classification, Classification::Trivial);
        assert_eq!(rows[1].case, PortraitCase::Boundary);
        assert_eq!(rows[1].classification, Classification::Trivial);
        assert_eq!(rows[2].classification, Classification::Nontrivial { j0: 4 });
        assert!(rows[2].trajectory.len() > 10);
    }

    #[test]
    fn nonresonant_and_inadmissible() {
        // 1/(2(0.45 - 1/3)) is not an integer.
        assert_eq!(classify_beta(0.0, 0.45).unwrap().classification, Classification::Trivial);
        // j0 = 3 sits below the threshold J = 4.
        let b = 1.0 / 3.0 + 1.0 / 6.0 - 1e-3;
        assert_ne!(classify_beta(0.0, b).unwrap().classification, Classification::Nontrivial { j0: 3 });
    }
}
