use crate::{oracle, read_json, verdict, write_atomic, write_json, Check, CliError, LatticeArgs, Tool};
use clap::Args;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use std::time::Instant;
use wedge_ldp::burgers::{
    backward_evolve, characteristics_svg, height_slices_csv, shocks_csv, Evolution, ShockClass, ShockRecord,
    TrackOptions,
};
use wedge_ldp::envelope::{interpolate, ConditioningData, EnvelopeError};
use wedge_ldp::measures::{entropy_production, key_identity_residual, measure_from_shocks, rate};
use wedge_ldp::metric::{grid_hopflax_bk, reconstruct_check, LatticeSpec};
use wedge_ldp::par::Exec;
use wedge_ldp::pwfn::PiecewisePoly;

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    /// Conditioning data JSON.
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Slice times in (0, 1]; `1` is always added.
    #[arg(long, value_delimiter = ',')]
    pub times: Option<Vec<f64>>,
    #[command(flatten)]
    pub lattice: LatticeArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    pub tol_identity: f64,
    /// Oracle envelope constant; calibrated on the single wedge when absent.
    #[arg(long)]
    pub tol_oracle_c: Option<f64>,
    /// Write only the JSON artifacts.
    #[arg(long)]
    pub json_only: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveInputs {
    pub spec: ConditioningData,
    pub times: Vec<f64>,
    pub lattice: LatticeSpec,
    pub seed: u64,
    pub tol_identity: f64,
    pub oracle_c: f64,
    pub oracle_c_calibrated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShockSummary {
    pub class: String,
    pub start: (f64, f64),
    pub end: (f64, f64),
    pub production: f64,
    pub closed_form: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Production {
    pub plus: f64,
    pub minus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub evolve_s: f64,
    pub lattice_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool: Tool,
    pub command: String,
    pub inputs: SolveInputs,
    pub e_bm: f64,
    pub rate: f64,
    /// `|e_bm − rate(μ*)|`.
    pub identity_residual: f64,
    pub key_identity_residual: f64,
    pub entropy_production: Production,
    pub shocks: Vec<ShockSummary>,
    /// `none`, `single`, `split` (a shock ending where two begin),
    /// `separate` (every shock leaves the origin) or `other`.
    pub configuration: String,
    pub split_time: Option<f64>,
    pub reconstruction_residual: f64,
    pub oracle_delta: f64,
    /// `Δx + Δt`.
    pub mesh: f64,
    pub checks: Vec<Check>,
    pub conjectural: bool,
    pub timing: Timing,
}

pub fn infeasible_or_parse(e: EnvelopeError) -> CliError {
    match e {
        EnvelopeError::Infeasible { .. } | EnvelopeError::Discontinuous { .. } => CliError::Infeasible(e.to_string()),
        _ => CliError::Parse(e.to_string()),
    }
}

fn times(requested: &Option<Vec<f64>>) -> Result<Vec<f64>, CliError> {
    let mut ts: Vec<f64> = requested.clone().unwrap_or_else(|| (1..=10).map(|k| k as f64 / 10.0).collect());
    if let Some(t) = ts.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
        return Err(CliError::Parse(format!("time {t} outside (0, 1]")));
    }
    ts.push(1.0);
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    Ok(ts)
}

fn summarize(records: &[ShockRecord]) -> Vec<ShockSummary> {
    records
        .iter()
        .map(|r| {
            let (a, b) = (&r.samples[0], &r.samples[r.samples.len() - 1]);
            ShockSummary {
                class: r.class.as_str().to_string(),
                start: (a.t, a.x),
                end: (b.t, b.x),
                production: r.total_production(),
                closed_form: r.closed_form.is_some(),
            }
        })
        .collect()
}

/// Topology of the shock set and the time of the first split.
pub fn configuration(shocks: &[ShockSummary]) -> (String, Option<f64>) {
    const NEAR: f64 = 1e-6;
    let close = |p: (f64, f64), q: (f64, f64)| (p.0 - q.0).abs() <= NEAR && (p.1 - q.1).abs() <= NEAR;
    match shocks.len() {
        0 => return ("none".into(), None),
        1 => return ("single".into(), None),
        _ => {}
    }
    let split = shocks
        .iter()
        .filter(|s| s.end.0 < 1.0 - NEAR)
        .filter(|s| shocks.iter().filter(|o| close(o.start, s.end)).count() >= 2)
        .map(|s| s.end.0)
        .fold(None, |m: Option<f64>, t| Some(m.map_or(t, |m| m.min(t))));
    if split.is_some() {
        ("split".into(), split)
    } else if shocks.iter().all(|s| close(s.start, (0.0, 0.0))) {
        ("separate".into(), None)
    } else {
        ("other".into(), None)
    }
}

/// `(x, ∂ₓf(x))` at cell midpoints of `[−w, w]`.
fn characteristic_feet(f: &PiecewisePoly, w: f64, n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|k| {
            let x = -w + (k as f64 + 0.5) * 2.0 * w / n as f64;
            (x, f.slopes_at(x).1)
        })
        .collect()
}

/// Runs the pipeline and writes every artifact; checks are recorded, not enforced.
pub fn solve(args: &SolveArgs) -> Result<RunReport, CliError> {
    let start = Instant::now();
    let exec = Exec::default();
    let spec: ConditioningData = read_json(&args.spec)?;
    let times = times(&args.times)?;
    let f = interpolate(&spec).map_err(infeasible_or_parse)?;
    let c = f.compact_support_radius();
    let lat = args.lattice.lattice(c)?;
    let internal = |e: &dyn std::fmt::Display| CliError::Internal(e.to_string());

    let e_bm = f.q_bm().map_err(|e| internal(&e))?;
    let opts = TrackOptions::default();
    let (field, records) = backward_evolve(&f, &times, &opts, exec).map_err(|e| internal(&e))?;
    let mu = measure_from_shocks(&records).map_err(|e| internal(&e))?;
    let rate_mu = rate(&mu);
    let key = key_identity_residual(&field, &records).map_err(|e| internal(&e))?;
    let (plus, minus) = entropy_production(&records);
    let evolve_s = start.elapsed().as_secs_f64();

    let lattice_start = Instant::now();
    let evo = Evolution::backward(&f).map_err(|e| internal(&e))?;
    let recon = reconstruct_check(&evo, &records, c, &lat, exec).map_err(|e| internal(&e))?;
    let bk = grid_hopflax_bk(&f, &lat, exec).map_err(|e| internal(&e))?;
    let delta = bk.cone_sup_diff(&evo, c, oracle::T_FROM, exec).map_err(|e| internal(&e))?;
    let (oracle_c, calibrated) = match args.tol_oracle_c {
        Some(c) => (c, false),
        None => (oracle::calibrated_c(&args.lattice, exec)?, true),
    };
    let lattice_s = lattice_start.elapsed().as_secs_f64();
    let mesh = lat.dx() + lat.dt();

    let shocks = summarize(&records);
    let (config, split_time) = configuration(&shocks);
    let identity_residual = (e_bm - rate_mu).abs();
    let checks = vec![
        Check::at_most("e_bm_equals_rate", identity_residual, args.tol_identity),
        Check::at_most("key_identity", key, args.tol_identity),
        Check::at_most("no_entropy_shocks", records.iter().filter(|r| r.class == ShockClass::Entropy).count() as f64, 0.0),
        Check::at_most("reconstruction", recon, oracle_c * mesh),
        Check::at_most("oracle", delta, oracle_c * mesh),
    ];
    let report = RunReport {
        tool: Tool::default(),
        command: "solve".into(),
        inputs: SolveInputs {
            spec,
            times,
            lattice: lat,
            seed: args.seed,
            tol_identity: args.tol_identity,
            oracle_c,
            oracle_c_calibrated: calibrated,
        },
        e_bm,
        rate: rate_mu,
        identity_residual,
        key_identity_residual: key,
        entropy_production: Production { plus, minus },
        shocks,
        configuration: config,
        split_time,
        reconstruction_residual: recon,
        oracle_delta: delta,
        mesh,
        checks,
        conjectural: false,
        timing: Timing { evolve_s, lattice_s, total_s: start.elapsed().as_secs_f64() },
    };

    let out = &args.out;
    write_json(out, "f_star.json", &f)?;
    write_json(out, "measure.json", &mu)?;
    if !args.json_only {
        write_atomic(out, "height_slices.csv", height_slices_csv(&field, c, 200).as_bytes())?;
        write_atomic(out, "shocks.csv", shocks_csv(&records).as_bytes())?;
        let feet = characteristic_feet(&f, c + 1.0, 40);
        write_atomic(out, "characteristics.svg", characteristics_svg(&records, &feet, c).as_bytes())?;
    }
    write_json(out, "report.json", &report)?;
    Ok(report)
}

/// [`solve`], then exit status from the checks.
pub fn run(args: &SolveArgs) -> Result<RunReport, CliError> {
    let report = solve(args)?;
    verdict(&report.checks)?;
    Ok(report)
}
