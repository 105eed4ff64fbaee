use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mpl_cli::output::write_json;
use mpl_cli::problem::rows;
use mpl_cli::{exit, parse_problem, reproduce_qtp, run_scenario, CliError, CliResult, RunConfig, Scenario};
use mpl_core::dense;
use serde_json::json;

#[derive(Parser)]
#[command(name = "mpl", version, about = "Leakage analysis for outsourced model predictive control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Condense a problem into dense QP matrices, one JSON file per horizon.
    BuildDense {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, value_delimiter = ',')]
        horizons: Option<Vec<usize>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one attack scenario over a horizon sweep.
    Attack {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        scenario: Scenario,
        #[arg(long, value_delimiter = ',')]
        horizons: Option<Vec<usize>>,
        #[arg(long, env = "MPL_SEED")]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reproduce the quadruple-tank case study.
    ReproduceQtp {
        #[arg(long, value_delimiter = ',', default_value = "5,20,50")]
        horizons: Vec<usize>,
        #[arg(long, env = "MPL_SEED", default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn build_dense(problem: PathBuf, horizons: Option<Vec<usize>>, out: PathBuf) -> CliResult<i32> {
    let problem = parse_problem(&problem)?;
    let sys = problem.lti()?;
    let bounds = problem.bounds()?;
    std::fs::create_dir_all(&out)?;
    for h in horizons.unwrap_or_else(|| vec![problem.cost.horizon]) {
        let qp = dense::build_dense(&sys, &problem.cost_spec(h)?, &bounds)?;
        let doc = json!({
            "horizon": h,
            "h": rows(&qp.h),
            "f": rows(&qp.f),
            "y": rows(&qp.y),
            "g": rows(&qp.g),
            "w": qp.w.as_slice(),
            "o": rows(&qp.o),
        });
        write_json(&out.join(format!("dense_n{h}.json")), &doc)?;
    }
    Ok(exit::OK)
}

fn run(cli: Cli) -> CliResult<i32> {
    match cli.command {
        Command::BuildDense { problem, horizons, out } => build_dense(problem, horizons, out),
        Command::Attack { problem, scenario, horizons, seed, out } => {
            let problem = parse_problem(&problem)?;
            let seed = seed.or_else(|| problem.experiment.seeds.first().copied()).ok_or_else(|| {
                CliError::Config("no seed given and the problem lists none".into())
            })?;
            let horizons = horizons.unwrap_or_else(|| problem.experiment.horizons.clone());
            let result = run_scenario(&problem, scenario, &RunConfig::new(seed, horizons), Some(&out))?;
            for r in &result.records {
                if let Some(msg) = &r.failure {
                    eprintln!("N = {}: {msg}", r.horizon);
                }
            }
            Ok(result.exit_code())
        }
        Command::ReproduceQtp { horizons, seed, out } => Ok(reproduce_qtp(Some(&out), &horizons, seed)?.exit_code()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit::HARD_ERROR
        }
    };
    ExitCode::from(code as u8)
}
