//! Pipeline stages. Each writes its CSV tables and a JSON summary.

use serde::Serialize;
use serde_json::json;

use ksd_core::heat::{find_kappa, heat_coercivity, heat_quadratic_routes, heat_suite, HeatParams};
use ksd_core::linops::{coercivity_probe, random_suite, weight_for_exponent, Background, TestFunction, QUOTIENT_LIMIT};
use ksd_core::phys::{collapse_errors, initial_data, run_phys, PhysConfig};
use ksd_core::portrait::{portrait_scan, Classification, PortraitCase};
use ksd_core::renorm::{measure_rates, RenormConfig, RenormSolver};
use ksd_core::{build_series, solve_profile, ProfileParams, RadialProfile};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::io::{cache_key, encode_profile_cache, read_profile_cache, ArtifactSink, Table};

pub const PROFILE_CACHE: &str = "profile.cache.json";

/// State shared by the stages of one run.
pub struct Context<'a> {
    pub cfg: &'a RunConfig,
    pub sink: ArtifactSink,
    profile: Option<RadialProfile>,
}

impl<'a> Context<'a> {
    pub fn new(cfg: &'a RunConfig, sink: ArtifactSink) -> Self {
        Self { cfg, sink, profile: None }
    }

    fn params(&self) -> Result<ProfileParams, CliError> {
        let p = &self.cfg.params;
        ProfileParams::new(p.mu, p.j0, p.qj0).map_err(|e| CliError::stage("profile", e))
    }

    /// The profile for the configured parameters, from the cache when it matches.
    pub fn profile(&mut self) -> Result<&RadialProfile, CliError> {
        if self.profile.is_none() {
            let params = self.params()?;
            let key = cache_key(self.cfg);
            let path = self.sink.dir().join(PROFILE_CACHE);
            let profile = match read_profile_cache(&path, &key)? {
                Some(p) => p,
                None => {
                    let n = &self.cfg.numerics;
                    let series = build_series(&params, n.series_tol).map_err(|e| CliError::stage("profile", e))?;
                    let p = solve_profile(&params, &series, n.r_max, n.tol).map_err(|e| CliError::stage("profile", e))?;
                    self.sink.write_bytes(PROFILE_CACHE, &encode_profile_cache(&key, &p)?)?;
                    p
                }
            };
            self.profile = Some(profile);
        }
        Ok(self.profile.as_ref().expect("profile set above"))
    }
}

#[derive(Serialize)]
struct ProfileSummary {
    mu: f64,
    j0: u32,
    q_j0: f64,
    beta: f64,
    series_terms: usize,
    bound_k: f64,
    bound_alpha: f64,
    certified_radius: f64,
    ratio_radius: f64,
    handoff_radius: f64,
    nodes: usize,
    q_at_1: f64,
    q_at_r_max: f64,
    tail_exponent: f64,
    tail_exponent_expected: f64,
    residual_max: f64,
    phase_slope: f64,
    phase_slope_expected: f64,
    decay_constants: (f64, f64),
}

pub fn profile(ctx: &mut Context) -> Result<(), CliError> {
    let p = ctx.profile()?.clone();
    p.check_invariants().map_err(|message| CliError::Check { stage: "profile", message })?;
    let params = p.params();
    let j0 = params.j0() as f64;
    let s = p.series();
    let summary = ProfileSummary {
        mu: params.mu(),
        j0: params.j0(),
        q_j0: params.q_j0(),
        beta: params.beta(),
        series_terms: s.truncation,
        bound_k: s.bound.k,
        bound_alpha: s.bound.alpha,
        certified_radius: s.radius_estimate,
        ratio_radius: s.ratio_radius,
        handoff_radius: p.handoff_radius(),
        nodes: p.grid().len(),
        q_at_1: p.q(1.0).map_err(|e| CliError::stage("profile", e))?,
        q_at_r_max: p.q(p.r_max()).map_err(|e| CliError::stage("profile", e))?,
        tail_exponent: p.tail_exponent(),
        tail_exponent_expected: -1.0 / params.beta(),
        residual_max: p.residual_max(),
        phase_slope: p.phase_slope_at_origin(),
        phase_slope_expected: (1.0 - 3.0 / (2.0 * j0 + 3.0)) / (2.0 * j0),
        decay_constants: p.decay_constants(),
    };
    let mut nodes = Table::new(["r", "Q", "f", "dQ"]);
    for i in 0..p.grid().len() {
        nodes.push(vec![p.grid()[i].into(), p.q_vals()[i].into(), p.f_vals()[i].into(), p.dq_vals()[i].into()]);
    }
    let mut coeffs = Table::new(["j", "Q_j", "f_j"]);
    for (j, (q, f)) in s.q_coeffs.iter().zip(&s.f_coeffs).enumerate() {
        coeffs.push(vec![j.into(), (*q).into(), (*f).into()]);
    }
    ctx.sink.csv("profile.csv", &nodes)?;
    ctx.sink.csv("profile_series.csv", &coeffs)?;
    ctx.sink.json("profile.json", &summary)?;
    Ok(())
}

pub fn portrait(ctx: &mut Context) -> Result<(), CliError> {
    let mut betas = ctx.cfg.numerics.portrait_betas.clone();
    if ctx.cfg.numerics.quick {
        betas = vec![0.30, 1.0 / 3.0, 11.0 / 24.0];
    }
    let rows = portrait_scan(ctx.cfg.params.mu, &betas).map_err(|e| CliError::stage("portrait", e))?;
    let mut table = Table::new(["beta", "case", "resonance", "classification", "j0"]);
    let mut traj = Table::new(["beta", "k", "Q", "f"]);
    for row in &rows {
        let case = match row.case {
            PortraitCase::Below => "below",
            PortraitCase::Boundary => "boundary",
            PortraitCase::Above => "above",
        };
        let (class, j0) = match row.classification {
            Classification::Trivial => ("trivial", String::new()),
            Classification::Nontrivial { j0 } => ("nontrivial", j0.to_string()),
            Classification::Degenerate => ("degenerate", String::new()),
        };
        table.push(vec![row.beta.into(), case.into(), row.resonance.into(), class.into(), j0.into()]);
        for (k, &(q, f)) in row.trajectory.iter().enumerate() {
            traj.push(vec![row.beta.into(), k.into(), q.into(), f.into()]);
        }
    }
    ctx.sink.csv("portrait.csv", &table)?;
    ctx.sink.csv("portrait_trajectories.csv", &traj)?;
    Ok(())
}

pub fn coercivity(ctx: &mut Context) -> Result<(), CliError> {
    let n = ctx.cfg.numerics.clone();
    let count = if n.quick { n.suite_size.min(12) } else { n.suite_size };
    let profile = ctx.profile()?.clone();
    let j0 = profile.params().j0();
    let err = |e| CliError::stage("coercivity", e);
    let weight = weight_for_exponent(&profile, j0, n.weight_a).map_err(err)?;
    let cert = weight.certificate();
    let bg = Background::from_profile(&profile).map_err(err)?;
    let suite = random_suite(n.weight_a, count, n.seed);
    let results = coercivity_probe(&bg, &weight, &suite).map_err(err)?;
    let mut table = Table::new(["index", "seed", "p", "scale", "quotient", "pass"]);
    for r in &results {
        table.push(vec![r.index.into(), r.seed.into(), r.p.into(), r.scale.into(), r.quotient.into(), r.pass.into()]);
    }
    let max_q = results.iter().map(|r| r.quotient).fold(f64::NEG_INFINITY, f64::max);
    let min_q = results.iter().map(|r| r.quotient).fold(f64::INFINITY, f64::min);
    ctx.sink.csv("coercivity.csv", &table)?;
    ctx.sink.json(
        "coercivity.json",
        &json!({
            "weight": weight,
            "certificate": cert,
            "certificate_pass": cert.all_pass(),
            "quotient_limit": QUOTIENT_LIMIT,
            "count": results.len(),
            "all_pass": results.iter().all(|r| r.pass),
            "max_quotient": max_q,
            "min_quotient": min_q,
        }),
    )?;
    Ok(())
}

pub fn renorm(ctx: &mut Context) -> Result<(), CliError> {
    let n = ctx.cfg.numerics.clone();
    let profile = ctx.profile()?.clone();
    let params = *profile.params();
    let err = |e| CliError::stage("renorm", e);
    let config = RenormConfig {
        n: n.grid_n.unwrap_or(if n.quick { 1024 } else { 4096 }),
        lambda0: n.lambda0.unwrap_or(1e-3),
        ..Default::default()
    };
    let modes: Vec<usize> = if n.quick { vec![0, 2] } else { n.renorm_modes.clone() };
    let tau_end = if n.quick { n.renorm_tau_end.min(1.0) } else { n.renorm_tau_end };
    let solver = RenormSolver::new(&profile, config).map_err(err)?;
    let report = measure_rates(&solver, &params, &modes, n.renorm_amplitude, tau_end).map_err(err)?;

    let kfit = solver.kfit();
    let mut header = vec!["tau".to_string(), "lambda".into(), "eps_sup".into()];
    header.extend((0..=kfit).map(|j| format!("c_{j}")));
    header.push("residual_norm".into());
    let mut base = Table::new(header);
    for s in &report.baseline.samples {
        let mut row = vec![s.tau.into(), s.lambda.into(), s.eps_sup.into()];
        row.extend(s.c.iter().map(|&c| c.into()));
        row.push(s.residual_norm.into());
        base.push(row);
    }
    let mut series = Table::new(["mode", "tau", "delta_c"]);
    let mut rates = Table::new(["mode", "rate", "expected", "r_squared", "forcing_ratio_max"]);
    for r in &report.rates {
        rates.push(vec![r.mode.into(), r.rate.into(), r.expected.into(), r.r_squared.into(), r.forcing_ratio_max.into()]);
        for &(tau, dc) in &r.series {
            series.push(vec![r.mode.into(), tau.into(), dc.into()]);
        }
    }
    ctx.sink.csv("renorm_baseline.csv", &base)?;
    ctx.sink.csv("renorm_modes.csv", &series)?;
    ctx.sink.csv("renorm_rates.csv", &rates)?;
    ctx.sink.json(
        "renorm.json",
        &json!({
            "config": config,
            "kfit": kfit,
            "tau_end": tau_end,
            "amplitude": n.renorm_amplitude,
            "diffusion_exponent": params.diffusion_exponent(),
            "dt_policy": "cfl * min(h/(beta R + max |r f|), h^2/(2 lambda^(2-4 beta))), classical RK4",
            "rates": report.rates.iter().map(|r| json!({
                "mode": r.mode, "rate": r.rate, "expected": r.expected,
                "r_squared": r.r_squared, "forcing_ratio_max": r.forcing_ratio_max,
            })).collect::<Vec<_>>(),
            "coupling": report.coupling,
            "baseline_drift_sup": report.baseline.eps_sup_max,
            "baseline_steps": report.baseline.steps,
            "negativity_flag": report.baseline.negativity_flag,
        }),
    )?;
    Ok(())
}

/// `lambda0` with `lambda0^{2 - 4 beta} = 1e-3`, floored so the data stay in `f64` range.
pub fn default_phys_lambda0(beta: f64) -> f64 {
    10f64.powf(-3.0 / (2.0 - 4.0 * beta)).max(1e-70)
}

pub fn phys(ctx: &mut Context) -> Result<(), CliError> {
    let n = ctx.cfg.numerics.clone();
    let profile = ctx.profile()?.clone();
    let params = *profile.params();
    let err = |e| CliError::stage("phys", e);
    let config = PhysConfig {
        n: n.grid_n.unwrap_or(if n.quick { 2048 } else { 8192 }),
        lambda0: n.lambda0.unwrap_or_else(|| default_phys_lambda0(params.beta())),
        ..Default::default()
    };
    let (solver, state) = initial_data(&profile, params.mu(), config).map_err(err)?;
    let run = run_phys(&solver, state).map_err(err)?;
    let collapse = collapse_errors(&run, &profile, 2.0).map_err(err)?;
    let mut traj = Table::new(["t", "sup_norm", "mass", "half_max_radius", "dt"]);
    for s in &run.samples {
        traj.push(vec![s.t.into(), s.sup_norm.into(), s.mass.into(), s.half_max_radius.into(), s.dt.into()]);
    }
    let mut col = Table::new(["t", "collapse_error"]);
    for &(t, e) in &collapse {
        col.push(vec![t.into(), e.into()]);
    }
    ctx.sink.csv("phys.csv", &traj)?;
    ctx.sink.csv("phys_collapse.csv", &col)?;
    ctx.sink.json(
        "blowup_fit.json",
        &json!({
            "config": config,
            "beta": params.beta(),
            "fit": run.fit,
            "stop": run.stop,
            "steps": run.steps,
            "mass_defect_max": run.mass_defect_max,
            "min_rho": run.min_rho,
            "rescaled_time": run.rescaled_time,
            "relative_mass_drift_rate": run.relative_mass_drift_rate(),
            "mass_strictly_decreasing": run.mass_strictly_decreasing(),
        }),
    )?;
    Ok(())
}

pub fn heat(ctx: &mut Context) -> Result<(), CliError> {
    let n = ctx.cfg.numerics.clone();
    let count = if n.quick { n.suite_size.min(12) } else { n.suite_size };
    let err = |e| CliError::stage("heat", e);
    let p = HeatParams::new(n.heat_m, n.heat_c).map_err(err)?;
    let suite = heat_suite(&p, count, n.seed);
    let kappa = find_kappa(&p, &suite)
        .map_err(err)?
        .ok_or_else(|| CliError::Check { stage: "heat", message: "no kappa on the ladder keeps every quotient below -1/(4m)".into() })?;
    let grid = p.grid();
    let quotients = heat_coercivity(&p, &suite, kappa).map_err(err)?;
    let mut table = Table::new(["index", "p", "scale", "quotient", "direct", "multiplier", "route_gap"]);
    let mut worst_gap: f64 = 0.0;
    for (tf, &q) in suite.iter().zip(&quotients) {
        let r = heat_quadratic_routes(&p, &grid, &tf.sample(&grid), kappa).map_err(err)?;
        let gap = ((r.direct - r.multiplier) / r.multiplier).abs();
        worst_gap = worst_gap.max(gap);
        table.push(vec![tf.index.into(), tf.p.into(), tf.scale.into(), q.into(), r.direct.into(), r.multiplier.into(), gap.into()]);
    }
    let mut near = Vec::new();
    for s in [0.01, 0.02, 0.05] {
        let tf = TestFunction::gaussian(p.min_order(), s);
        let r = heat_quadratic_routes(&p, &grid, &tf.sample(&grid), kappa).map_err(err)?;
        near.push(json!({ "scale": s, "quotient": r.direct / r.norm_sq }));
    }
    ctx.sink.csv("heat.csv", &table)?;
    ctx.sink.json(
        "heat.json",
        &json!({
            "m": p.m,
            "c": p.c,
            "kappa": kappa,
            "bound": -1.0 / (4.0 * p.m as f64),
            "near_origin_target": -3.0 / (4.0 * p.m as f64),
            "max_quotient": quotients.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            "min_quotient": quotients.iter().cloned().fold(f64::INFINITY, f64::min),
            "max_route_gap": worst_gap,
            "near_origin": near,
        }),
    )?;
    Ok(())
}
