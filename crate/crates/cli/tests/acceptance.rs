//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rayon::prelude::*;

use ksd_core::heat::{find_kappa, heat_coercivity, heat_quadratic_routes, heat_suite, HeatParams};
use ksd_core::linops::{
    coercivity_probe, random_suite, select_weight, weight_for_exponent, Background, TestFunction, QUOTIENT_LIMIT,
};
use ksd_core::lsq::line_fit;
use ksd_core::phys::{initial_data, run_phys, PhysConfig};
use ksd_core::portrait::{portrait_scan, Classification};
use ksd_core::renorm::{measure_rates, RenormConfig, RenormSolver};
use ksd_core::series::{q_coefficients, SeriesProblem, N_MAX};
use ksd_core::{build_series, solve_profile, ProfileParams, RadialProfile};
use ksd_lab::config::{Command, RunConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn build(mu: f64, j0: u32) -> Result<RadialProfile, String> {
    let p = ProfileParams::new(mu, j0, -1.0).map_err(|e| e.to_string())?;
    let s = build_series(&p, 1e-14).map_err(|e| e.to_string())?;
    solve_profile(&p, &s, 1e4, 1e-12).map_err(|e| e.to_string())
}

fn profile_construction() -> Result<Outcome, String> {
    let t = Instant::now();
    let p = build(0.0, 4)?;
    let secs = t.elapsed().as_secs_f64();
    let s0 = p.eval(0.0).map_err(|e| e.to_string())?;
    let origin = (s0.q - 1.0).abs() < 1e-12 && (s0.f - 1.0 / 3.0).abs() < 1e-12;
    let invariants = p.check_invariants();
    let residual = p.residual_max();
    let pass = origin && invariants.is_ok() && residual < 1e-8 && secs < 5.0;
    Ok(outcome(
        pass,
        format!(
            "Q(0)-1 = {:.1e}, f(0)-1/3 = {:.1e}, invariants {}, residual {residual:.2e}, {secs:.3} s",
            s0.q - 1.0,
            s0.f - 1.0 / 3.0,
            invariants.err().unwrap_or_else(|| "ok".into())
        ),
    ))
}

fn coefficients(p: &RadialProfile) -> Result<Outcome, String> {
    let prob = SeriesProblem::resonant(0.0f64, 4, -1.0);
    let q = q_coefficients(&prob, N_MAX).map_err(|e| e.to_string())?;
    let low_zero = q[1] == 0.0 && q[2] == 0.0 && q[3] == 0.0;
    let q8 = (q[8] - 19.0 / 11.0).abs();
    let sparse = q.iter().take(201).enumerate().all(|(j, &c)| j % 4 == 0 || c == 0.0);
    let bound = p.series().bound;
    let bounded = q.iter().enumerate().skip(1).all(|(j, &c)| bound.holds(j, c));
    Ok(outcome(
        low_zero && q8 < 1e-12 && sparse && q.len() > 200 && bounded,
        format!(
            "Q_1..Q_3 zero {low_zero}, |Q_8 - 19/11| = {q8:.1e}, sparse to 200 {sparse} ({} terms), bound K = {:.4} alpha = {:.4} holds {bounded}",
            q.len(),
            bound.k,
            bound.alpha
        ),
    ))
}

fn tail(p: &RadialProfile) -> Outcome {
    let slope = p.fit_tail_exponent(1e3, 1e4);
    let rel = (slope / (-24.0 / 11.0) - 1.0).abs();
    outcome(rel < 0.05, format!("slope {slope:.5} vs -24/11, relative error {rel:.2e}"))
}

fn classification() -> Result<Outcome, String> {
    let rows = portrait_scan(0.0, &[0.30, 1.0 / 3.0, 11.0 / 24.0]).map_err(|e| e.to_string())?;
    let labels: Vec<_> = rows.iter().map(|r| r.classification).collect();
    let pass = matches!(
        labels.as_slice(),
        [Classification::Trivial, Classification::Trivial, Classification::Nontrivial { j0: 4 }]
    );
    Ok(outcome(pass, format!("{labels:?}")))
}

fn coercivity(p: &RadialProfile) -> Result<Outcome, String> {
    let t = Instant::now();
    let j0 = p.params().j0();
    let weight = weight_for_exponent(p, j0, 36).map_err(|e| e.to_string())?;
    let cert = weight.certificate();
    let bg = Background::from_profile(p).map_err(|e| e.to_string())?;
    let suite = random_suite(36, 50, 20240601);
    let results = coercivity_probe(&bg, &weight, &suite).map_err(|e| e.to_string())?;
    let max_q = results.iter().map(|r| r.quotient).fold(f64::NEG_INFINITY, f64::max);
    let all_q = results.iter().all(|r| r.quotient <= QUOTIENT_LIMIT);
    let smallest = select_weight(p, j0).map(|w| w.a).map_err(|e| e.to_string())?;
    let secs = t.elapsed().as_secs_f64();
    Ok(outcome(
        cert.all_pass() && all_q && results.len() >= 50 && secs < 60.0,
        format!(
            "A = 36 log10 B = {}: origin {:.4} ({}), whole {:.4} ({}), R1 ({}), B ({}); {} quotients max {max_q:.4} (all pass {all_q}); least passing A = {smallest}; {secs:.2} s",
            weight.log10_b,
            cert.origin_coefficient,
            cert.origin_ok,
            cert.whole_value,
            cert.whole_ok,
            cert.r1_ok,
            cert.b_ok,
            results.len()
        ),
    ))
}

fn modulation(p: &RadialProfile) -> Result<Outcome, String> {
    let t = Instant::now();
    let cfg = RenormConfig { n: 4096, lambda0: 1e-3, ..Default::default() };
    let solver = RenormSolver::new(p, cfg).map_err(|e| e.to_string())?;
    let secs = |t: Instant| t.elapsed().as_secs_f64();
    let report = match measure_rates(&solver, p.params(), &[0, 1, 2, 3], 1e-4, 2.0) {
        Ok(r) => r,
        Err(e) => return Ok(outcome(false, format!("{e}; {:.1} s", secs(t)))),
    };
    let mut detail = Vec::new();
    let mut pass = secs(t) < 600.0;
    for r in &report.rates {
        let ok = ((r.rate - r.expected) / r.expected).abs() < 0.1;
        pass &= ok;
        detail.push(format!("j={} rate {:.4} (want {:.2})", r.mode, r.rate, r.expected));
    }
    match &report.coupling {
        Some(c) => {
            let ok = ((c.slope - c.expected) / c.expected).abs() < 0.15;
            pass &= ok;
            detail.push(format!("coupling {:.4} (want {:.4})", c.slope, c.expected));
        }
        None => {
            pass = false;
            detail.push("no coupling measurement".into());
        }
    }
    detail.push(format!("{:.1} s", secs(t)));
    Ok(outcome(pass, detail.join(", ")))
}

fn drift(p: &RadialProfile) -> Result<Outcome, String> {
    let lambdas = [1e-1, 1e-2, 1e-3];
    let sups: Vec<f64> = lambdas
        .par_iter()
        .map(|&lambda0| {
            let solver = RenormSolver::new(p, RenormConfig { n: 4096, lambda0, ..Default::default() })
                .map_err(|e| e.to_string())?;
            let init = solver.initial_state(&[]).map_err(|e| e.to_string())?;
            let (_, run) = solver.run(init, 2.0).map_err(|e| e.to_string())?;
            Ok(run.eps_sup_max)
        })
        .collect::<Result<_, String>>()?;
    let pts: Vec<_> = lambdas.iter().zip(&sups).map(|(l, s)| (l.log10(), s.log10())).collect();
    let slope = line_fit(&pts).slope;
    let rel = (slope * 6.0 - 1.0).abs();
    Ok(outcome(rel < 0.2, format!("sup drift {sups:.4?}, log-log slope {slope:.4} vs 1/6")))
}

fn blowup() -> Result<Outcome, String> {
    let cases = [(0.0, 4, 1e-24), (0.2, 7, 1e-60)];
    let mut pass = true;
    let mut detail = Vec::new();
    for (mu, j0, lambda0) in cases {
        let prof = build(mu, j0)?;
        let beta = prof.params().beta();
        let (solver, state) =
            initial_data(&prof, mu, PhysConfig { lambda0, ..Default::default() }).map_err(|e| e.to_string())?;
        let run = match run_phys(&solver, state) {
            Ok(r) => r,
            Err(e) => {
                pass = false;
                detail.push(format!("mu={mu}: {e}"));
                continue;
            }
        };
        let amp = (run.fit.p_amp + 1.0).abs() < 0.1;
        let len = (run.fit.p_len / beta - 1.0).abs() < 0.15;
        let mass = if mu == 0.0 {
            run.relative_mass_drift_rate() < 1e-6
        } else {
            run.mass_strictly_decreasing()
        };
        pass &= amp && len && mass;
        detail.push(format!(
            "mu={mu}: p_amp {:.4}, p_len {:.4} (beta {beta:.4}), mass ok {mass} (drift/time {:.1e})",
            run.fit.p_amp,
            run.fit.p_len,
            run.relative_mass_drift_rate()
        ));
    }
    Ok(outcome(pass, detail.join("; ")))
}

fn heat_toy() -> Result<Outcome, String> {
    let p = HeatParams::new(2, 1.0).map_err(|e| e.to_string())?;
    let grid = p.grid();
    let suite = heat_suite(&p, 50, 20240601);
    let kappa = find_kappa(&p, &suite).map_err(|e| e.to_string())?.ok_or("no admissible kappa")?;
    let q = heat_coercivity(&p, &suite, kappa).map_err(|e| e.to_string())?;
    let mut gap: f64 = 0.0;
    for tf in &suite {
        let r = heat_quadratic_routes(&p, &grid, &tf.sample(&grid), kappa).map_err(|e| e.to_string())?;
        gap = gap.max(((r.direct - r.multiplier) / r.multiplier).abs());
    }
    let mut near = Vec::new();
    for s in [0.01, 0.02, 0.05] {
        let tf = TestFunction::gaussian(p.min_order(), s);
        let r = heat_quadratic_routes(&p, &grid, &tf.sample(&grid), kappa).map_err(|e| e.to_string())?;
        near.push(r.direct / r.norm_sq);
    }
    let max_q = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let clustered = near.iter().all(|v| (v + 0.375).abs() < 0.01);
    Ok(outcome(
        gap < 1e-8 && max_q <= -0.125 && clustered,
        format!("kappa {kappa:e}, route gap {gap:.1e}, max quotient {max_q:.4}, near origin {near:.5?}"),
    ))
}

fn csv_bodies(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        if path.extension().is_some_and(|e| e == "csv") {
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            out.insert(name, std::fs::read(&path).map_err(|e| e.to_string())?);
        }
    }
    Ok(out)
}

fn determinism() -> Result<Outcome, String> {
    let root = std::env::temp_dir().join(format!("ksd-acceptance-{}", std::process::id()));
    let run_in = |sub: &str| -> Result<BTreeMap<String, Vec<u8>>, String> {
        let mut cfg = RunConfig::new(Command::All);
        cfg.numerics.quick = true;
        cfg.output_dir = root.join(sub);
        ksd_lab::run(&cfg).map_err(|e| e.to_string())?;
        csv_bodies(&cfg.output_dir)
    };
    let pool = |n: usize| rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| e.to_string());
    let a = pool(4)?.install(|| run_in("a"))?;
    let b = pool(1)?.install(|| run_in("b"))?;
    let _ = std::fs::remove_dir_all(&root);
    let differing: Vec<_> = a.keys().filter(|k| a.get(*k) != b.get(*k)).cloned().collect();
    Ok(outcome(
        !a.is_empty() && a.len() == b.len() && differing.is_empty(),
        format!("{} CSV files compared between 4-thread and 1-thread pools, differing {differing:?}", a.len()),
    ))
}

fn main() -> ExitCode {
    // `cargo test` passes harness flags; a filter argument that is not ours skips the run.
    if std::env::args().skip(1).any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let reference = match build(0.0, 4) {
        Ok(p) => p,
        Err(e) => {
            println!("reference profile failed: {e}");
            return ExitCode::FAILURE;
        }
    };
    let criteria: Vec<(&str, Box<dyn Fn() -> Result<Outcome, String>>)> = vec![
        ("profile construction", Box::new(profile_construction)),
        ("series coefficients", Box::new(|| coefficients(&reference))),
        ("tail exponent", Box::new(|| Ok(tail(&reference)))),
        ("case classification", Box::new(classification)),
        ("coercivity at A = 36", Box::new(|| coercivity(&reference))),
        ("modulation rates at lambda0 = 1e-3", Box::new(|| modulation(&reference))),
        ("exact-profile drift scaling", Box::new(|| drift(&reference))),
        ("physical blowup", Box::new(blowup)),
        ("heat analog", Box::new(heat_toy)),
        ("determinism", Box::new(determinism)),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = check().unwrap_or_else(|e| outcome(false, format!("error: {e}")));
        if !o.pass {
            failures += 1;
        }
        println!(
            "criterion {:>2} {}: {} [{:.2} s] {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            name,
            t.elapsed().as_secs_f64(),
            o.detail
        );
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
