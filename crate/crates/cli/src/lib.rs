//! Command-line driver: `solve`, `oracle`, `identity` and `multi`.

use clap::{Args, Parser, Subcommand};
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;
use wedge_ldp::metric::LatticeSpec;

pub mod identity;
pub mod multi;
pub mod oracle;
pub mod solve;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("infeasible data: {0}")]
    Infeasible(String),
    #[error("checks failed: {}", .0.join(", "))]
    Checks(Vec<String>),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Checks(_) => 4,
            CliError::Io(_) | CliError::Internal(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "wedge-ldp", version, about = "Upper-tail rates for the directed landscape")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Minimizer, shocks, measure and rate for a conditioning spec.
    Solve(solve::SolveArgs),
    /// Lattice convergence table for a conditioning spec.
    Oracle(oracle::OracleArgs),
    /// Entropy-production identity on random terminal profiles.
    Identity(identity::IdentityArgs),
    /// Multi-wedge rate by ordered-partition search.
    Multi(multi::MultiArgs),
}

/// Lattice flags; `--xmax` defaults to the support radius plus one.
#[derive(Debug, Clone, Args)]
pub struct LatticeArgs {
    #[arg(long, default_value_t = 100)]
    pub nt: usize,
    #[arg(long, default_value_t = 200)]
    pub nx: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub tmin: f64,
    #[arg(long)]
    pub xmax: Option<f64>,
    #[arg(long, default_value_t = 12)]
    pub maxhop: usize,
}

impl LatticeArgs {
    pub fn lattice(&self, support_radius: f64) -> Result<LatticeSpec, CliError> {
        let lat = LatticeSpec::symmetric(self.tmin, self.nt, self.xmax.unwrap_or(support_radius + 1.0), self.nx, self.maxhop);
        lat.validate().map_err(|e| CliError::Parse(e.to_string()))?;
        Ok(lat)
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve(a) => solve::run(&a).map(|_| ()),
        Command::Oracle(a) => oracle::run(&a).map(|_| ()),
        Command::Identity(a) => identity::run(&a).map(|_| ()),
        Command::Multi(a) => multi::run(&a).map(|_| ()),
    }
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(dir: &Path, name: &str, contents: &[u8]) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)?;
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, &target)?;
    Ok(target)
}

pub fn write_json<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    s.push('\n');
    write_atomic(dir, name, s.as_bytes())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

/// One named check against a tolerance.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tol: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: &str, value: f64, tol: f64) -> Self {
        Check { name: name.to_string(), value, tol, pass: value <= tol }
    }

    pub fn within(name: &str, value: f64, lo: f64, hi: f64) -> Self {
        Check { name: name.to_string(), value, tol: hi - lo, pass: (lo..=hi).contains(&value) }
    }
}

/// `Err(Checks)` naming every failed check.
pub fn verdict(checks: &[Check]) -> Result<(), CliError> {
    let failed: Vec<String> = checks.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Checks(failed))
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Tool {
    pub name: String,
    pub version: String,
}

impl Default for Tool {
    fn default() -> Self {
        Tool { name: "wedge-ldp".into(), version: VERSION.into() }
    }
}
