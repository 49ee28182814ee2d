use crate::{read_json, write_json, CliError, Tool};
use clap::Args;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use wedge_ldp::multiwedge::{multi_rate, MultiError, MultiRate, MultiWedgeProblem, Source, Target};
use wedge_ldp::par::Exec;

#[derive(Debug, Clone, Args)]
pub struct MultiArgs {
    /// Problem JSON `{sources: [{z, g}], targets: [{y, f}]}`.
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Deserialize)]
struct RawProblem {
    sources: Vec<Source>,
    targets: Vec<Target>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiReport {
    pub tool: Tool,
    pub command: String,
    pub problem: MultiWedgeProblem,
    pub result: MultiRate,
    pub conjectural: bool,
}

fn classify(e: MultiError) -> CliError {
    match e {
        MultiError::Infeasible { .. } | MultiError::NoFeasiblePartition => CliError::Infeasible(e.to_string()),
        MultiError::Envelope(_) => CliError::Internal(e.to_string()),
        _ => CliError::Parse(e.to_string()),
    }
}

pub fn run(args: &MultiArgs) -> Result<MultiReport, CliError> {
    let raw: RawProblem = read_json(&args.spec)?;
    let problem = MultiWedgeProblem::new(raw.sources, raw.targets).map_err(classify)?;
    let result = multi_rate(&problem, Exec::default()).map_err(classify)?;
    let report = MultiReport { tool: Tool::default(), command: "multi".into(), problem, result, conjectural: true };
    write_json(&args.out, "multi.json", &report)?;
    Ok(report)
}
