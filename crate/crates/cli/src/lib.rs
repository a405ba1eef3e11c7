//! Front end for the profile, operator and simulation stages.

pub mod config;
pub mod error;
pub mod io;
pub mod stages;

use std::time::{Instant, SystemTime, UNIX_EPOCH};

use config::{Command, RunConfig};
use error::CliError;
use io::{ArtifactSink, Manifest, SCHEMA_VERSION};
use stages::Context;

pub const THREADS_ENV: &str = "KSD_LAB_THREADS";

type Stage = fn(&mut Context) -> Result<(), CliError>;

fn plan(command: Command) -> Vec<(&'static str, Stage)> {
    let all: [(&'static str, Stage); 6] = [
        ("profile", stages::profile),
        ("portrait", stages::portrait),
        ("coercivity", stages::coercivity),
        ("renorm", stages::renorm),
        ("phys", stages::phys),
        ("heat", stages::heat),
    ];
    match command {
        Command::All => all.to_vec(),
        c => all.into_iter().filter(|(name, _)| *name == c.name()).collect(),
    }
}

/// Sizes the global rayon pool from `KSD_LAB_THREADS` when set.
pub fn configure_threads(value: Option<&str>) -> Result<(), CliError> {
    let Some(v) = value else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

/// Runs the configured stages and writes `manifest.json` next to the artifacts.
pub fn run(cfg: &RunConfig) -> Result<Manifest, CliError> {
    cfg.validate()?;
    let started = Instant::now();
    let started_unix_s = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let sink = ArtifactSink::create(&cfg.output_dir)?;
    let mut ctx = Context::new(cfg, sink);
    let mut times = Vec::new();
    for (name, stage) in plan(cfg.command) {
        let t = Instant::now();
        stage(&mut ctx)?;
        times.push((name.to_string(), t.elapsed().as_secs_f64()));
    }
    let mut artifacts = ctx.sink.written.clone();
    artifacts.sort_by(|a, b| a.file.cmp(&b.file));
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        command: cfg.command.name().to_string(),
        config: cfg.clone(),
        config_hash: cfg.hash(),
        library_version: ksd_core::VERSION.to_string(),
        cli_version: env!("CARGO_PKG_VERSION").to_string(),
        threads: rayon::current_num_threads(),
        started_unix_s,
        wall_time_s: started.elapsed().as_secs_f64(),
        stages: times,
        artifacts,
    };
    ctx.sink.json("manifest.json", &manifest)?;
    Ok(manifest)
}
