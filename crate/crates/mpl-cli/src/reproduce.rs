//! The quadruple-tank case study: closed-loop RMS per horizon, the H/F
//! attack's error curve and zero estimates, and eigenvalue estimates from
//! the relaxation attack on a masked closed loop.

use std::path::Path;

use mpl_core::{dense, linalg, LtiSystem64};
use rayon::prelude::*;

use crate::output::{self, write_complex_csv, write_json};
use crate::problem::ProblemFile;
use crate::scenario::{self, HorizonRecord, Scenario, ScenarioResult};
use crate::CliResult;

/// Horizons of the H/F estimation-error curve.
pub const HF_CURVE: [usize; 9] = [10, 15, 20, 25, 30, 35, 40, 45, 50];

pub fn reproduce_qtp(out_dir: Option<&Path>, horizons: &[usize], seed: u64) -> CliResult<ScenarioResult> {
    reproduce(&ProblemFile::qtp(), out_dir, horizons, seed)
}

/// Writes `rms.csv`, `hf_curve.csv`, `zeros.csv`, `eigenvalues.csv`,
/// `metrics.csv` and `report.json` into `out_dir`.
pub fn reproduce(problem: &ProblemFile, out_dir: Option<&Path>, horizons: &[usize], seed: u64) -> CliResult<ScenarioResult> {
    problem.validate()?;
    let sys = problem.lti()?;
    scenario::preflight(Scenario::Rrp, &sys, horizons)?;
    scenario::preflight(Scenario::Hf, &sys, &HF_CURVE)?;

    let curve = HF_CURVE
        .par_iter()
        .map(|&h| hf_point(problem, seed, h))
        .collect::<CliResult<Vec<_>>>()?;
    let records = horizons
        .par_iter()
        .map(|&h| horizon_point(problem, &sys, seed, h))
        .collect::<CliResult<Vec<_>>>()?;

    let result = ScenarioResult {
        scenario: "reproduce-qtp".into(),
        seed,
        problem: problem.name.clone(),
        records,
        curve,
        true_eigenvalues: linalg::eigenvalues(&sys.a),
        true_zeros: scenario::true_zeros(&sys),
    };
    if let Some(dir) = out_dir {
        write_reproduction(dir, &result)?;
    }
    Ok(result)
}

fn hf_point(problem: &ProblemFile, seed: u64, horizon: usize) -> CliResult<HorizonRecord> {
    let cfg = scenario::RunConfig::new(seed, vec![horizon]);
    let res = scenario::run_scenario(problem, Scenario::Hf, &cfg, None)?;
    Ok(res.records.into_iter().next().expect("one record per horizon"))
}

fn horizon_point(problem: &ProblemFile, sys: &LtiSystem64, seed: u64, horizon: usize) -> CliResult<HorizonRecord> {
    let steps = problem.experiment.steps;
    let traj = dense::closed_loop(
        sys,
        &problem.cost_spec(horizon)?,
        &problem.bounds()?,
        &problem.experiment.initial_state,
        steps,
        &problem.disturbance(steps),
    )?;
    let cfg = scenario::RunConfig::new(seed, vec![horizon]);
    let mut rec = scenario::run_scenario(problem, Scenario::Rrp, &cfg, None)?
        .records
        .into_iter()
        .next()
        .expect("one record per horizon");
    if let Some(rrp_rms) = rec.rms {
        rec.metrics.insert("rrp_window_rms".into(), rrp_rms);
    }
    rec.rms = Some(dense::rms_index(&traj.y));
    Ok(rec)
}

fn write_reproduction(dir: &Path, result: &ScenarioResult) -> CliResult<()> {
    std::fs::create_dir_all(dir)?;
    write_json(&dir.join("report.json"), &result.to_json())?;
    output::write_metrics_csv(&dir.join("metrics.csv"), &result.records)?;
    output::write_metrics_csv(&dir.join("hf_curve.csv"), &result.curve)?;
    write_complex_csv(&dir.join("zeros.csv"), &result.curve, |r| &r.zeros)?;
    write_complex_csv(&dir.join("eigenvalues.csv"), &result.records, |r| &r.eigenvalues)?;

    let mut w = csv::Writer::from_path(dir.join("rms.csv"))?;
    w.write_record(["horizon", "rms"])?;
    for r in &result.records {
        w.write_record([r.horizon.to_string(), output::fmt_f64(r.rms)])?;
    }
    w.flush()?;
    Ok(())
}
