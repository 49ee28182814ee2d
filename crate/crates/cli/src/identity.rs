use crate::{read_json, verdict, write_json, Check, CliError, Tool};
use clap::Args;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use wedge_ldp::burgers::{backward_evolve, Evolution, TrackOptions};
use wedge_ldp::measures::{entropy_production, flux_route};
use wedge_ldp::par::Exec;
use wedge_ldp::envelope::e_bm_finite;
use wedge_ldp::pwfn::PiecewisePoly;

#[derive(Debug, Clone, Args)]
pub struct IdentityArgs {
    /// Number of random profiles.
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Check this terminal profile instead of random ones.
    #[arg(long)]
    pub profile: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-6)]
    pub tol_identity: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub tol_flux: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileResult {
    pub index: usize,
    pub breakpoints: usize,
    pub shocks: usize,
    /// Non-entropy minus entropy production.
    pub production: f64,
    pub plus: f64,
    pub minus: f64,
    /// Energy of the terminal profile.
    pub energy: f64,
    pub residual: f64,
    pub flux_shock: f64,
    pub flux_boundary: f64,
    pub flux_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub tool: Tool,
    pub command: String,
    pub n: usize,
    pub seed: u64,
    pub max_residual: f64,
    pub max_flux_residual: f64,
    pub profiles: Vec<ProfileResult>,
    pub checks: Vec<Check>,
}

/// Minimizer for 1 to 6 random points on `[−1.5, 1.5]` lying `0.2` to `2`
/// above `−x²`: piecewise linear with `−x²` tails.
pub fn random_profile<R: Rng>(rng: &mut R) -> PiecewisePoly {
    let k = rng.gen_range(1..=6);
    let mut ys: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.5..1.5)).collect();
    ys.sort_by(f64::total_cmp);
    ys.dedup_by(|a, b| (*a - *b).abs() < 0.05);
    let pts: Vec<(f64, f64)> = ys.iter().map(|&y| (y, -y * y + rng.gen_range(0.2..2.0))).collect();
    e_bm_finite(&pts).expect("points above the parabola").1
}

/// Both sides of the entropy-production identity and the boundary-flux route.
pub fn check_profile(index: usize, f: &PiecewisePoly, exec: Exec) -> Result<ProfileResult, CliError> {
    let internal = |e: &dyn std::fmt::Display| CliError::Internal(format!("profile {index}: {e}"));
    let opts = TrackOptions::default();
    let (field, records) = backward_evolve(f, &[1.0], &opts, exec).map_err(|e| internal(&e))?;
    let (plus, minus) = entropy_production(&records);
    let energy = field.slice(1.0).expect("requested slice").tail_energy();
    let evo = Evolution::backward(f).map_err(|e| internal(&e))?;
    let (flux_shock, flux_boundary) = flux_route(&evo, &records, opts.t_floor, 1.0).map_err(|e| internal(&e))?;
    Ok(ProfileResult {
        index,
        breakpoints: f.breakpoints().len(),
        shocks: records.len(),
        production: plus - minus,
        plus,
        minus,
        energy,
        residual: (plus - minus - energy).abs(),
        flux_shock,
        flux_boundary,
        flux_residual: (flux_shock - flux_boundary).abs(),
    })
}

pub fn identity(args: &IdentityArgs) -> Result<IdentityReport, CliError> {
    let exec = Exec::default();
    let profiles: Vec<PiecewisePoly> = match &args.profile {
        Some(path) => vec![read_json(path)?],
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
            (0..args.n).map(|_| random_profile(&mut rng)).collect()
        }
    };
    let results: Vec<ProfileResult> =
        profiles.iter().enumerate().map(|(i, f)| check_profile(i, f, exec)).collect::<Result<_, _>>()?;
    let max_residual = results.iter().map(|r| r.residual).fold(0.0, f64::max);
    let max_flux_residual = results.iter().map(|r| r.flux_residual).fold(0.0, f64::max);
    let report = IdentityReport {
        tool: Tool::default(),
        command: "identity".into(),
        n: results.len(),
        seed: args.seed,
        max_residual,
        max_flux_residual,
        checks: vec![
            Check::at_most("key_identity", max_residual, args.tol_identity),
            Check::at_most("flux_route", max_flux_residual, args.tol_flux),
        ],
        profiles: results,
    };
    match &args.out {
        Some(dir) => {
            write_json(dir, "identity.json", &report)?;
        }
        None => println!("{}", serde_json::to_string_pretty(&report).map_err(|e| CliError::Internal(e.to_string()))?),
    }
    Ok(report)
}

pub fn run(args: &IdentityArgs) -> Result<IdentityReport, CliError> {
    let report = identity(args)?;
    verdict(&report.checks)?;
    Ok(report)
}
