use crate::solve::infeasible_or_parse;
use crate::{read_json, verdict, write_atomic, write_json, Check, CliError, LatticeArgs, Tool};
use clap::Args;
use serde::{Deserialize, Serialize};
use std::fmt::Write;
use std::path::PathBuf;
use std::time::Instant;
use wedge_ldp::burgers::{a_wedge_slice, track_shocks, Evolution, TrackOptions};
use wedge_ldp::envelope::{interpolate, ConditioningData};
use wedge_ldp::metric::{grid_hopflax_bk, reconstruct_check, LatticeSpec};
use wedge_ldp::par::Exec;
use wedge_ldp::pwfn::PiecewisePoly;

/// Oracle comparisons skip levels below this time.
pub const T_FROM: f64 = 0.1;

/// Default envelope constant as a multiple of the single-wedge constant.
pub const CALIBRATION_FACTOR: f64 = 4.0;

/// Allowed spread of `error / (Δx + Δt)` around its mean.
pub const C_SPREAD: f64 = 0.3;

pub const SLOPE_RANGE: (f64, f64) = (0.8, 1.2);

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub lattice: LatticeArgs,
    /// Number of 2× refinements, counting the base lattice.
    #[arg(long, default_value_t = 3)]
    pub levels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub n_t: usize,
    pub n_x: usize,
    /// `Δx + Δt`.
    pub mesh: f64,
    pub reconstruction: f64,
    pub oracle: f64,
    pub c_reconstruction: f64,
    pub c_oracle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub levels: Vec<Level>,
    /// Error ratios between consecutive levels.
    pub reconstruction_ratios: Vec<f64>,
    pub oracle_ratios: Vec<f64>,
    /// Least-squares slope of log error against log mesh.
    pub reconstruction_slope: f64,
    pub oracle_slope: f64,
    /// `max |C / mean(C) − 1|` for the oracle constants.
    pub oracle_c_spread: f64,
    pub seconds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleInputs {
    pub spec: ConditioningData,
    pub base: LatticeSpec,
    pub levels: usize,
    pub t_from: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub tool: Tool,
    pub command: String,
    pub inputs: OracleInputs,
    pub convergence: Convergence,
    pub checks: Vec<Check>,
}

pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (lx, ly): (Vec<f64>, Vec<f64>) = xs.iter().zip(ys).map(|(x, y)| (x.ln(), y.ln())).unzip();
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

pub fn spread(cs: &[f64]) -> f64 {
    let mean = cs.iter().sum::<f64>() / cs.len() as f64;
    cs.iter().map(|c| (c / mean - 1.0).abs()).fold(0.0, f64::max)
}

fn internal(e: impl std::fmt::Display) -> CliError {
    CliError::Internal(e.to_string())
}

/// Reconstruction residual and backward-oracle error of terminal data `f`
/// on `levels` lattices, each twice as fine as the previous.
pub fn convergence(f: &PiecewisePoly, base: &LatticeSpec, levels: usize, exec: Exec) -> Result<Convergence, CliError> {
    let c = f.compact_support_radius();
    let evo = Evolution::backward(f).map_err(internal)?;
    let records = track_shocks(&evo, &TrackOptions::default(), exec).map_err(internal)?;
    let mut rows = Vec::with_capacity(levels);
    let mut seconds = Vec::with_capacity(levels);
    for k in 0..levels {
        let t0 = Instant::now();
        let lat = base.refined(1 << k);
        let reconstruction = reconstruct_check(&evo, &records, c, &lat, exec).map_err(internal)?;
        let oracle = grid_hopflax_bk(f, &lat, exec).map_err(internal)?.cone_sup_diff(&evo, c, T_FROM, exec).map_err(internal)?;
        let mesh = lat.dx() + lat.dt();
        rows.push(Level {
            n_t: lat.n_t,
            n_x: lat.n_x,
            mesh,
            reconstruction,
            oracle,
            c_reconstruction: reconstruction / mesh,
            c_oracle: oracle / mesh,
        });
        seconds.push(t0.elapsed().as_secs_f64());
    }
    let ratios = |g: fn(&Level) -> f64| rows.windows(2).map(|w| g(&w[0]) / g(&w[1])).collect::<Vec<f64>>();
    let mesh: Vec<f64> = rows.iter().map(|l| l.mesh).collect();
    let rec: Vec<f64> = rows.iter().map(|l| l.reconstruction).collect();
    let orc: Vec<f64> = rows.iter().map(|l| l.oracle).collect();
    Ok(Convergence {
        reconstruction_ratios: ratios(|l| l.reconstruction),
        oracle_ratios: ratios(|l| l.oracle),
        reconstruction_slope: fit_slope(&mesh, &rec),
        oracle_slope: fit_slope(&mesh, &orc),
        oracle_c_spread: spread(&rows.iter().map(|l| l.c_oracle).collect::<Vec<f64>>()),
        levels: rows,
        seconds,
    })
}

/// [`CALIBRATION_FACTOR`] times the larger error constant of the single
/// wedge `(α, β) = (0, 1)` on the lattice described by `args`.
pub fn calibrated_c(args: &LatticeArgs, exec: Exec) -> Result<f64, CliError> {
    let f = a_wedge_slice(0.0, 1.0, 1.0);
    let lat = args.lattice(f.compact_support_radius())?;
    let conv = convergence(&f, &lat, 1, exec)?;
    let l = &conv.levels[0];
    Ok(CALIBRATION_FACTOR * l.c_reconstruction.max(l.c_oracle))
}

fn table_csv(conv: &Convergence) -> String {
    let mut s = String::from("n_t,n_x,mesh,reconstruction,oracle,c_reconstruction,c_oracle\n");
    for l in &conv.levels {
        let _ = writeln!(s, "{},{},{},{},{},{},{}", l.n_t, l.n_x, l.mesh, l.reconstruction, l.oracle, l.c_reconstruction, l.c_oracle);
    }
    s
}

pub fn oracle(args: &OracleArgs) -> Result<OracleReport, CliError> {
    if args.levels < 3 {
        return Err(CliError::Parse("need at least 3 levels".into()));
    }
    let exec = Exec::default();
    let spec: ConditioningData = read_json(&args.spec)?;
    let f = interpolate(&spec).map_err(infeasible_or_parse)?;
    let base = args.lattice.lattice(f.compact_support_radius())?;
    let conv = convergence(&f, &base, args.levels, exec)?;
    let checks = vec![
        Check::within("oracle_slope", conv.oracle_slope, SLOPE_RANGE.0, SLOPE_RANGE.1),
        Check::at_most("oracle_c_spread", conv.oracle_c_spread, C_SPREAD),
    ];
    let report = OracleReport {
        tool: Tool::default(),
        command: "oracle".into(),
        inputs: OracleInputs { spec, base, levels: args.levels, t_from: T_FROM },
        convergence: conv,
        checks,
    };
    write_atomic(&args.out, "oracle.csv", table_csv(&report.convergence).as_bytes())?;
    write_json(&args.out, "oracle.json", &report)?;
    Ok(report)
}

pub fn run(args: &OracleArgs) -> Result<OracleReport, CliError> {
    let report = oracle(args)?;
    verdict(&report.checks)?;
    Ok(report)
}
