use std::sync::OnceLock;

use ksd_core::renorm::{extract_modes, measure_rates, step_renorm, RenormConfig, RenormSolver, Terms};
use ksd_core::{build_series, solve_profile, ProfileParams, RadialProfile, RenormError};
use num_rational::BigRational;

fn profile() -> &'static RadialProfile {
    static P: OnceLock<RadialProfile> = OnceLock::new();
    P.get_or_init(|| {
        let p = ProfileParams::new(0.0, 4, -1.0).unwrap();
        let s = build_series(&p, 1e-14).unwrap();
        solve_profile(&p, &s, 1e4, 1e-12).unwrap()
    })
}

fn solver(cfg: RenormConfig) -> RenormSolver<f64> {
    RenormSolver::new(profile(), cfg).unwrap()
}

#[test]
fn diffusion_exponent_is_one_sixth() {
    let beta = BigRational::new(1.into(), 3.into()) + BigRational::new(1.into(), 8.into());
    let two = BigRational::from_integer(2.into());
    let four = BigRational::from_integer(4.into());
    assert_eq!(two - four * beta, BigRational::new(1.into(), 6.into()));
    let p = profile().params();
    assert!((p.diffusion_exponent() - 1.0 / 6.0).abs() < 1e-15);
}

#[test]
fn zero_state_stays_zero() {
    let s = solver(RenormConfig { n: 1024, ..Default::default() });
    let zero = s.state(0.0, vec![0.0; 1024]).unwrap();
    let dt = s.stable_dt(&zero);
    let next = step_renorm(&s, &zero, dt).unwrap();
    assert!(next.psi.iter().all(|&v| v == 0.0));
}

#[test]
fn cfl_violation_is_reported() {
    let s = solver(RenormConfig { n: 1024, ..Default::default() });
    let init = s.initial_state(&[]).unwrap();
    let limit = s.stability_limit(&init);
    assert!(matches!(step_renorm(&s, &init, 1.5 * limit), Err(RenormError::CflViolation { .. })));
}

#[test]
fn extraction_oracles() {
    let s = solver(RenormConfig { n: 4096, ..Default::default() });
    let r = s.radii();
    let eps: Vec<f64> = r.iter().map(|x| 0.01 * x * x).collect();
    let c = s.extract(&eps).unwrap();
    assert!((c[1] - 0.01).abs() < 1e-10);
    for (j, cj) in c.iter().enumerate() {
        if j != 1 {
            assert!(cj.abs() < 1e-10, "c_{j} = {cj}");
        }
    }
    let zero = s.extract(&vec![0.0; r.len()]).unwrap();
    assert!(zero.iter().all(|&v| v == 0.0));
    let a = [2e-3, -1e-2, 5e-3, 1e-3, -4e-4, 1e-4, 2e-5];
    let poly: Vec<f64> =
        r.iter().map(|x| a.iter().enumerate().map(|(j, c)| c * x.powi(2 * j as i32)).sum()).collect();
    let got = extract_modes(&r.to_vec(), &poly, 0.5, 6).unwrap();
    for (g, e) in got.iter().zip(&a) {
        assert!((g - e).abs() < 1e-10, "{g} vs {e}");
    }
}

#[test]
fn initial_residual_scales_with_diffusivity() {
    // At tau = 0 only lambda^{1/6} Lap Q is unbalanced.
    let mut norms = Vec::new();
    for lam in [1e-1, 1e-2, 1e-3] {
        let s = solver(RenormConfig { n: 4096, lambda0: lam, ..Default::default() });
        let init = s.initial_state(&[]).unwrap();
        norms.push(init.residual_norm);
        // Direct oracle: lambda^{1/6} || Lap Q || by centred differences.
        let q = s.profile_samples();
        let h = s.radii()[1];
        let lap: Vec<f64> = (0..q.len())
            .map(|i| {
                if i == 0 {
                    6.0 * (q[1] - q[0]) / (h * h)
                } else if i == q.len() - 1 {
                    let ghost = 2.0 * q[i] - q[i - 1];
                    (ghost - 2.0 * q[i] + q[i - 1]) / (h * h) + (ghost - q[i - 1]) / (h * s.radii()[i])
                } else {
                    (q[i + 1] - 2.0 * q[i] + q[i - 1]) / (h * h) + (q[i + 1] - q[i - 1]) / (h * s.radii()[i])
                }
            })
            .collect();
        let oracle = lam.powf(1.0 / 6.0) * s.l2_norm(&lap);
        // The discrete transport part of the stationary equation leaves an O(h^2) remainder.
        assert!((init.residual_norm / oracle - 1.0).abs() < 2e-4, "{} vs {oracle}", init.residual_norm);
    }
    let slope = (norms[0] / norms[2]).log10() / 2.0;
    assert!((slope * 6.0 - 1.0).abs() < 1e-3, "slope {slope}");
}

#[test]
fn transport_follows_characteristics() {
    let s = solver(RenormConfig { n: 4096, terms: Terms::TRANSPORT_ONLY, ..Default::default() });
    let beta = profile().params().beta();
    let psi: Vec<f64> = s.radii().iter().map(|r| (-r * r).exp()).collect();
    let init = s.state(0.0, psi).unwrap();
    let (end, _) = s.run(init, 1.0).unwrap();
    let err = s
        .radii()
        .iter()
        .zip(&end.psi)
        .map(|(r, p)| {
            let y = r * (-beta).exp();
            ((-1.0f64).exp() * (-y * y).exp() - p).abs()
        })
        .fold(0.0, f64::max);
    assert!(err < 1e-3, "error {err}");
}

#[test]
fn initial_residual_converges_under_refinement() {
    let res: Vec<f64> = [1024, 2048, 4096]
        .iter()
        .map(|&n| solver(RenormConfig { n, lambda0: 1e-2, ..Default::default() }).initial_state(&[]).unwrap().residual_norm)
        .collect();
    let ratio = (res[0] - res[1]) / (res[1] - res[2]);
    assert!(ratio > 3.0 && ratio < 5.0, "ratio {ratio} from {res:?}");
}

#[test]
fn rates_in_the_weak_diffusion_regime() {
    let s = solver(RenormConfig { n: 2048, lambda0: 1e-24, ..Default::default() });
    let params = *profile().params();
    let rep = measure_rates(&s, &params, &[0, 1, 2], 1e-4, 2.0).unwrap();
    for r in &rep.rates {
        assert!((r.rate / r.expected - 1.0).abs() < 0.1, "mode {}: {} vs {}", r.mode, r.rate, r.expected);
        assert!(r.forcing_ratio_max < 0.1);
    }
    let c = rep.coupling.unwrap();
    assert!((c.slope / c.expected - 1.0).abs() < 0.15, "coupling {} vs {}", c.slope, c.expected);
    assert!(!rep.baseline.negativity_flag);
}

#[test]
fn invalid_requests() {
    let s = solver(RenormConfig { n: 512, ..Default::default() });
    let params = *profile().params();
    assert!(matches!(measure_rates(&s, &params, &[5], 1e-4, 0.1), Err(RenormError::InvalidConfig(_))));
    assert!(RenormSolver::new(profile(), RenormConfig { fit_radius: 1.5, ..Default::default() }).is_err());
    let bad = extract_modes(&[0.0, 0.1, 0.2], &[0.0; 3], 0.5, 6);
    assert!(matches!(bad, Err(RenormError::IllConditionedFit { .. })));
}
