use std::sync::{Arc, OnceLock};

use ksd_core::heat::{heat_apply_l, HeatParams};
use ksd_core::linops::{
    apply_l, coercivity_probe, quadratic_split, random_suite, select_weight, sobolev_probe_low_order,
    transport_form_routes, weight_for_exponent, weighted_inner, Background, SampledFn, TestFunction, WeightParams,
    QUOTIENT_LIMIT,
};
use ksd_core::quadrature::PanelGrid;
use ksd_core::{build_series, solve_profile, LinopsError, ProfileParams, RadialProfile};
use proptest::prelude::*;

struct Fixture {
    profile: RadialProfile,
    bg: Background<f64>,
    w36: WeightParams<f64>,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let p = ProfileParams::new(0.0, 4, -1.0).unwrap();
        let s = build_series(&p, 1e-14).unwrap();
        let profile = solve_profile(&p, &s, 1e4, 1e-12).unwrap();
        let bg = Background::from_profile(&profile).unwrap();
        let w36 = weight_for_exponent(&profile, 4, 36).unwrap();
        Fixture { profile, bg, w36 }
    })
}

#[test]
fn gamma_moment_of_gaussian() {
    // 4 pi int r^{2p} e^{-2 r^2} r^{2 - A} dr with 2p = A: pi^{3/2} / 2^{3/2}.
    let f = fixture();
    let g = SampledFn::from_fn(&f.bg.grid, 18, |r: f64| r.powi(18) * (-r * r).exp());
    let w = WeightParams { log10_b: -300, ..f.w36 };
    let v = weighted_inner(&f.bg.grid, &g, &g, &w).unwrap();
    let exact = std::f64::consts::PI.powf(1.5) / 2f64.powf(1.5);
    assert!((v / exact - 1.0).abs() < 1e-12, "{v} vs {exact}");
}

#[test]
fn inner_product_is_symmetric() {
    let f = fixture();
    let suite = random_suite(36, 4, 11);
    let a = suite[0].sample(&f.bg.grid);
    let b = suite[3].sample(&f.bg.grid);
    let ab = weighted_inner(&f.bg.grid, &a, &b, &f.w36).unwrap();
    let ba = weighted_inner(&f.bg.grid, &b, &a, &f.w36).unwrap();
    assert_eq!(ab, ba);
}

#[test]
fn zero_maps_to_zero() {
    let f = fixture();
    let z = SampledFn::zeros(&f.bg.grid, 18);
    assert!(apply_l(&f.bg, &z).unwrap().values.iter().all(|&v| v == 0.0));
}

#[test]
fn mismatched_grids_are_rejected() {
    let f = fixture();
    let other: PanelGrid<f64> = PanelGrid::spanning(-20.0, 2.0);
    let g = SampledFn::from_fn(&other, 18, |r: f64| r.powi(18));
    assert_eq!(apply_l(&f.bg, &g).unwrap_err(), LinopsError::GridMismatch);
}

#[test]
fn weight_certificates_at_36_and_selected() {
    let f = fixture();
    let c = f.w36.certificate();
    assert!(c.origin_ok && c.r1_ok && c.b_ok);
    // The whole-norm condition needs A in the thousands for this profile.
    assert!(!c.whole_ok);
    let sel = select_weight(&f.profile, 4).unwrap();
    assert!(sel.certificate().all_pass());
    assert!(sel.a > 36 && sel.a % 4 == 0);
    let worse = WeightParams { log10_b: sel.log10_b + 1, ..sel };
    assert!(!worse.certificate().b_ok, "B is maximal up to a decade");
}

#[test]
fn suite_of_fifty_is_coercive_at_36() {
    let f = fixture();
    let suite = random_suite(36, 50, 20240601);
    let res = coercivity_probe(&f.bg, &f.w36, &suite).unwrap();
    assert_eq!(res.len(), 50);
    for r in &res {
        assert!(r.quotient <= QUOTIENT_LIMIT, "index {} quotient {}", r.index, r.quotient);
    }
    let again = coercivity_probe(&f.bg, &f.w36, &suite).unwrap();
    assert_eq!(res, again);
}

#[test]
fn split_and_identity_routes_agree() {
    let f = fixture();
    for tf in random_suite(36, 8, 5) {
        let g = tf.sample(&f.bg.grid);
        let s = quadratic_split(&f.bg, &f.w36, &g).unwrap();
        assert!(((s.sum() - s.direct) / s.direct).abs() < 1e-9, "split {} vs {}", s.sum(), s.direct);
        let (direct, identity) = transport_form_routes(&f.bg, &f.w36, &g).unwrap();
        assert!(((direct - identity) / direct).abs() < 1e-9);
    }
}

#[test]
fn quotient_is_scale_invariant() {
    let f = fixture();
    let tf = random_suite(36, 1, 3).remove(0);
    let scaled = TestFunction::new(tf.p, tf.scale, tf.coeffs.iter().map(|c| 5.0 * c).collect());
    let a = coercivity_probe(&f.bg, &f.w36, &[tf]).unwrap()[0].quotient;
    let b = coercivity_probe(&f.bg, &f.w36, &[scaled]).unwrap()[0].quotient;
    assert!((a - b).abs() <= 1e-14 * a.abs());
}

#[test]
fn panel_halving_changes_quotients_below_1e6() {
    let f = fixture();
    let fine = Background::on_grid(&f.profile, Arc::new(f.bg.grid.refined())).unwrap();
    let suite = random_suite(36, 6, 77);
    let coarse_q = coercivity_probe(&f.bg, &f.w36, &suite).unwrap();
    let fine_q = coercivity_probe(&fine, &f.w36, &suite).unwrap();
    for (c, d) in coarse_q.iter().zip(&fine_q) {
        assert!(((c.quotient - d.quotient) / d.quotient).abs() < 1e-6);
    }
}

#[test]
fn inadmissible_order_is_reported() {
    let f = fixture();
    let low = TestFunction::gaussian(10, 1.0);
    assert!(matches!(coercivity_probe(&f.bg, &f.w36, &[low]), Err(LinopsError::Inadmissible(_))));
}

#[test]
fn dilation_identity_in_low_sobolev_orders() {
    let f = fixture();
    let tf = TestFunction::gaussian(4, 1.0);
    for m in 0..=2 {
        let s = sobolev_probe_low_order(&f.bg, &tf, m).unwrap();
        assert!(((s.direct - s.dilation) / s.dilation).abs() < 1e-6, "m = {m}");
        assert!(((s.direct - s.coefficient * s.norm_sq) / s.direct).abs() < 1e-6, "m = {m}");
    }
    assert!(matches!(sobolev_probe_low_order(&f.bg, &tf, 3), Err(LinopsError::OrderUnsupported { m: 3 })));
}

#[test]
fn heat_configuration_matches_heat_operator() {
    let p = HeatParams::new(2, 1.0f64).unwrap();
    let grid = Arc::new(p.grid());
    let bg = Background::heat_analog(grid.clone(), 2, 1.0);
    let e = TestFunction::gaussian(6, 0.7).sample(&grid);
    let a = apply_l(&bg, &e).unwrap();
    let b = heat_apply_l(&p, &grid, &e).unwrap();
    for (x, y) in a.values.iter().zip(&b.values) {
        assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn operator_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, s1 in 0u64..1000, s2 in 0u64..1000) {
        let f = fixture();
        let g1 = random_suite(36, 1, s1)[0].sample(&f.bg.grid);
        let g2 = random_suite(36, 1, s2)[0].sample(&f.bg.grid);
        let lhs = apply_l(&f.bg, &g1.combine(a, &g2, b).unwrap()).unwrap();
        let rhs = apply_l(&f.bg, &g1).unwrap().combine(a, &apply_l(&f.bg, &g2).unwrap(), b).unwrap();
        let scale = rhs.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (x, y) in lhs.values.iter().zip(&rhs.values) {
            prop_assert!((x - y).abs() <= 1e-12 * scale.max(1e-300));
        }
    }
}
