//! Run configuration: a TOML file overlaid by command-line flags.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Profile,
    Portrait,
    Coercivity,
    Renorm,
    Phys,
    Heat,
    All,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Profile => "profile",
            Command::Portrait => "portrait",
            Command::Coercivity => "coercivity",
            Command::Renorm => "renorm",
            Command::Phys => "phys",
            Command::Heat => "heat",
            Command::All => "all",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParamsConfig {
    pub mu: f64,
    pub j0: u32,
    pub qj0: f64,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        Self { mu: 0.0, j0: 4, qj0: -1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    /// ODE tolerance for the profile continuation.
    pub tol: f64,
    pub series_tol: f64,
    pub r_max: f64,
    pub seed: u64,
    /// Overrides `lambda0` of both simulations.
    pub lambda0: Option<f64>,
    /// Overrides the node count of both simulations.
    pub grid_n: Option<usize>,
    pub quick: bool,
    pub weight_a: u32,
    pub suite_size: usize,
    pub renorm_modes: Vec<usize>,
    pub renorm_amplitude: f64,
    pub renorm_tau_end: f64,
    pub heat_m: u32,
    pub heat_c: f64,
    pub portrait_betas: Vec<f64>,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            series_tol: 1e-14,
            r_max: 1e4,
            seed: 20240601,
            lambda0: None,
            grid_n: None,
            quick: false,
            weight_a: 36,
            suite_size: 50,
            renorm_modes: vec![0, 1, 2, 3],
            renorm_amplitude: 1e-4,
            renorm_tau_end: 2.0,
            heat_m: 2,
            heat_c: 1.0,
            portrait_betas: default_betas(),
        }
    }
}

/// `0.25, 0.26, ..., 0.49` plus the three reference values.
pub fn default_betas() -> Vec<f64> {
    let mut b: Vec<f64> = (25..50).map(|k| k as f64 / 100.0).collect();
    b.extend([0.30, 1.0 / 3.0, 11.0 / 24.0]);
    b.sort_by(f64::total_cmp);
    b.dedup();
    b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default)]
    pub params: ParamsConfig,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
}

fn default_out() -> PathBuf {
    PathBuf::from("ksd-out")
}

/// File layout of a config: every field optional, `command` comes from the CLI.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    params: ParamsConfig,
    #[serde(default)]
    numerics: Numerics,
    output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        Self { command, params: ParamsConfig::default(), numerics: Numerics::default(), output_dir: default_out() }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let n = &self.numerics;
        let positive = [("tol", n.tol), ("series_tol", n.series_tol), ("r_max", n.r_max), ("heat_c", n.heat_c)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(l) = n.lambda0 {
            if !(l > 0.0 && l < 1.0) {
                return Err(CliError::Config(format!("lambda0 must lie in (0, 1), got {l}")));
            }
        }
        if let Some(g) = n.grid_n {
            if g < 64 {
                return Err(CliError::Config(format!("grid_n must be at least 64, got {g}")));
            }
        }
        if n.suite_size == 0 {
            return Err(CliError::Config("suite_size must be positive".into()));
        }
        if !(n.renorm_amplitude > 0.0) || !(n.renorm_tau_end > 0.0) {
            return Err(CliError::Config("renorm amplitude and horizon must be positive".into()));
        }
        if !self.params.mu.is_finite() || !self.params.qj0.is_finite() {
            return Err(CliError::Config("params must be finite".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex(&Sha256::digest(json.as_bytes()))
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Serialize(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::ConfigParse { path: PathBuf::from("<string>"), message: e.to_string() })
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Parser)]
#[command(name = "ksd-lab", version, about = "Self-similar blowup laboratory for Keller-Segel with logistic damping")]
pub struct Cli {
    /// Stage to run.
    #[arg(value_enum)]
    pub command: Command,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// TOML config; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub j0: Option<u32>,
    /// Free coefficient at the resonant index (negative).
    #[arg(long, allow_negative_numbers = true)]
    pub qj0: Option<f64>,
    #[arg(long)]
    pub lambda0: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub grid_n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Smaller grids and suites for smoke runs.
    #[arg(long)]
    pub quick: bool,
}

fn read_file(path: &Path) -> Result<ConfigFile, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    toml::from_str(&text).map_err(|e| CliError::ConfigParse { path: path.to_owned(), message: e.to_string() })
}

/// Builds the effective configuration.
pub fn resolve(command: Command, o: &Overrides) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::new(command);
    if let Some(path) = &o.config {
        let file = read_file(path)?;
        cfg.params = file.params;
        cfg.numerics = file.numerics;
        if let Some(out) = file.output_dir {
            cfg.output_dir = out;
        }
    }
    if let Some(v) = o.mu {
        cfg.params.mu = v;
    }
    if let Some(v) = o.j0 {
        cfg.params.j0 = v;
    }
    if let Some(v) = o.qj0 {
        cfg.params.qj0 = v;
    }
    if let Some(v) = o.lambda0 {
        cfg.numerics.lambda0 = Some(v);
    }
    if let Some(v) = o.tol {
        cfg.numerics.tol = v;
    }
    if let Some(v) = o.grid_n {
        cfg.numerics.grid_n = Some(v);
    }
    if let Some(v) = o.seed {
        cfg.numerics.seed = v;
    }
    if let Some(v) = &o.out {
        cfg.output_dir = v.clone();
    }
    if o.quick {
        cfg.numerics.quick = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn flags_win_over_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "[params]\nmu = 0.1\nj0 = 5\n[numerics]\nseed = 7\n").unwrap();
        let o = Overrides { config: Some(path), j0: Some(6), ..Default::default() };
        let cfg = resolve(Command::Profile, &o).unwrap();
        assert_eq!(cfg.params.mu, 0.1);
        assert_eq!(cfg.params.j0, 6);
        assert_eq!(cfg.numerics.seed, 7);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.toml");
        std::fs::write(&path, "[params]\nmuu = 0.1\n").unwrap();
        let err = resolve(Command::Profile, &Overrides { config: Some(path), ..Default::default() }).unwrap_err();
        assert_eq!(err.exit_code(), crate::error::EXIT_VALIDATION);
    }

    #[test]
    fn nonpositive_tolerance_is_rejected() {
        let o = Overrides { tol: Some(0.0), ..Default::default() };
        assert!(matches!(resolve(Command::Profile, &o), Err(CliError::Config(_))));
    }

    proptest! {
        #[test]
        fn config_round_trips(mu in 0.0f64..0.33, j0 in 2u32..40, seed in 0u64..(i64::MAX as u64), tol in 1e-15f64..1e-3, lam in proptest::option::of(1e-30f64..0.5)) {
            let mut cfg = RunConfig::new(Command::All);
            cfg.params.mu = mu;
            cfg.params.j0 = j0;
            cfg.numerics.seed = seed;
            cfg.numerics.tol = tol;
            cfg.numerics.lambda0 = lam;
            let back = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
            prop_assert_eq!(&back, &cfg);
            let json: RunConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
            prop_assert_eq!(&json, &cfg);
            prop_assert_eq!(back.hash(), cfg.hash());
        }
    }
}
