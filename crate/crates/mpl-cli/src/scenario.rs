use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use mpl_core::attacks::{self, DataLog, DataRecord, DensePublic};
use mpl_core::dense::{self, QpShape};
use mpl_core::rng::SeededRng;
use mpl_core::transforms::{self, DenseKey, DenseKeyConfig, KeyConfig, SeparateKey, Variant};
use mpl_core::{linalg, lti, tol, DenseQp64, Error, LtiSystem64};
use nalgebra::{Complex, DMatrix, DVector};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::output::{self, complex_list, report_json};
use crate::problem::{rows, ProblemFile};
use crate::{CliError, CliResult};

/// Instances logged by the closed-loop relaxation attack.
pub const RRP_WINDOW: usize = 40;

const NOISE_SAMPLES: usize = 20;
const NOISE_RADIUS: f64 = 1.0;
const KEY_RANGE: (f64, f64) = (-1e3, 1e3);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    Separate,
    Affine,
    Highdim,
    Poly,
    StructuredNoise,
    DenseFull,
    DenseMulti,
    Hf,
    Hx0f,
    KeyRecovery,
    Rrp,
}

impl Scenario {
    pub const ALL: [Scenario; 11] = [
        Scenario::Separate,
        Scenario::Affine,
        Scenario::Highdim,
        Scenario::Poly,
        Scenario::StructuredNoise,
        Scenario::DenseFull,
        Scenario::DenseMulti,
        Scenario::Hf,
        Scenario::Hx0f,
        Scenario::KeyRecovery,
        Scenario::Rrp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Separate => "separate",
            Scenario::Affine => "affine",
            Scenario::Highdim => "highdim",
            Scenario::Poly => "poly",
            Scenario::StructuredNoise => "structured-noise",
            Scenario::DenseFull => "dense-full",
            Scenario::DenseMulti => "dense-multi",
            Scenario::Hf => "hf",
            Scenario::Hx0f => "hx0f",
            Scenario::KeyRecovery => "key-recovery",
            Scenario::Rrp => "rrp",
        }
    }

    fn variant(self) -> Option<Variant> {
        match self {
            Scenario::Separate => Some(Variant::Plain),
            Scenario::Affine => Some(Variant::Affine),
            Scenario::Highdim => Some(Variant::Highdim),
            Scenario::Poly => Some(Variant::Poly),
            _ => None,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| CliError::Config(format!("unknown scenario {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub horizons: Vec<usize>,
    /// Use the key that leaves the problem unchanged instead of a random one.
    pub identity_key: bool,
}

impl RunConfig {
    pub fn new(seed: u64, horizons: Vec<usize>) -> Self {
        Self { seed, horizons, identity_key: false }
    }
}

/// Results for one prediction horizon. Metrics that a scenario does not
/// produce are `None` or empty.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizonRecord {
    pub horizon: usize,
    pub eps_a: Option<f64>,
    pub eps_b: Option<f64>,
    pub eps_y: Option<f64>,
    pub rms: Option<f64>,
    pub eigenvalues: Vec<Complex<f64>>,
    pub zeros: Vec<Complex<f64>>,
    /// Scenario-specific scalar diagnostics.
    pub metrics: BTreeMap<String, f64>,
    pub attack: Option<Value>,
    /// Key material, kept apart from what the attacker produced.
    pub secret: Option<Value>,
    /// Set when the attack itself reported failure.
    pub failure: Option<String>,
}

impl HorizonRecord {
    pub fn new(horizon: usize) -> Self {
        Self {
            horizon,
            eps_a: None,
            eps_b: None,
            eps_y: None,
            rms: None,
            eigenvalues: Vec::new(),
            zeros: Vec::new(),
            metrics: BTreeMap::new(),
            attack: None,
            secret: None,
            failure: None,
        }
    }

    fn failed(horizon: usize, msg: String) -> Self {
        Self { failure: Some(msg), ..Self::new(horizon) }
    }

    fn metric(&mut self, key: &str, value: f64) {
        self.metrics.insert(key.into(), value);
    }

    pub fn to_json(&self) -> Value {
        json!({
            "horizon": self.horizon,
            "eps_a": self.eps_a,
            "eps_b": self.eps_b,
            "eps_y": self.eps_y,
            "rms": self.rms,
            "eigenvalues": complex_list(&self.eigenvalues),
            "zeros": complex_list(&self.zeros),
            "metrics": self.metrics,
            "attack": self.attack,
            "secret": self.secret,
            "failure": self.failure,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub scenario: String,
    pub seed: u64,
    pub problem: String,
    /// One record per requested horizon, in request order.
    pub records: Vec<HorizonRecord>,
    /// Extra sweep (the estimation-error curve in the reproduction).
    pub curve: Vec<HorizonRecord>,
    pub true_eigenvalues: Vec<Complex<f64>>,
    pub true_zeros: Vec<Complex<f64>>,
}

impl ScenarioResult {
    pub fn attack_failed(&self) -> bool {
        self.records.iter().chain(&self.curve).any(|r| r.failure.is_some())
    }

    pub fn exit_code(&self) -> i32 {
        if self.attack_failed() {
            crate::exit::ATTACK_FAILED
        } else {
            crate::exit::OK
        }
    }

    pub fn record(&self, horizon: usize) -> Option<&HorizonRecord> {
        self.records.iter().find(|r| r.horizon == horizon)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "scenario": self.scenario,
            "seed": self.seed,
            "problem": self.problem,
            "truth": {
                "eigenvalues": complex_list(&self.true_eigenvalues),
                "zeros": complex_list(&self.true_zeros),
            },
            "records": self.records.iter().map(HorizonRecord::to_json).collect::<Vec<_>>(),
            "curve": self.curve.iter().map(HorizonRecord::to_json).collect::<Vec<_>>(),
        })
    }
}

/// Runs one scenario per horizon in parallel and, given `out_dir`, writes
/// `report.json` and the curve CSVs there.
pub fn run_scenario(
    problem: &ProblemFile,
    scenario: Scenario,
    cfg: &RunConfig,
    out_dir: Option<&Path>,
) -> CliResult<ScenarioResult> {
    problem.validate()?;
    let sys = problem.lti()?;
    preflight(scenario, &sys, &cfg.horizons)?;
    let records = cfg
        .horizons
        .par_iter()
        .map(|&h| embed(h, run_one(problem, &sys, scenario, cfg, h)))
        .collect::<CliResult<Vec<_>>>()?;
    let result = ScenarioResult {
        scenario: scenario.name().into(),
        seed: cfg.seed,
        problem: problem.name.clone(),
        records,
        curve: Vec::new(),
        true_eigenvalues: linalg::eigenvalues(&sys.a),
        true_zeros: true_zeros(&sys),
    };
    if let Some(dir) = out_dir {
        output::write_scenario(dir, &result)?;
    }
    Ok(result)
}

pub(crate) fn true_zeros(sys: &LtiSystem64) -> Vec<Complex<f64>> {
    lti::transmission_zeros(sys).unwrap_or_default()
}

/// Checks scenario preconditions before any computation.
pub fn preflight(scenario: Scenario, sys: &LtiSystem64, horizons: &[usize]) -> CliResult<()> {
    if horizons.is_empty() {
        return Err(CliError::Config("no horizons requested".into()));
    }
    let n = sys.n();
    let min_horizon = match scenario {
        Scenario::DenseFull => n + 1,
        Scenario::DenseMulti => 2 * n + 1,
        Scenario::Hf | Scenario::Hx0f => n + 1,
        _ => 1,
    };
    if let Some(&h) = horizons.iter().find(|&&h| h < min_horizon) {
        return Err(CliError::Config(format!("{scenario} needs N >= {min_horizon}, got N = {h}")));
    }
    if matches!(scenario, Scenario::Hf | Scenario::Hx0f) {
        let rho = linalg::spectral_radius(&sys.a);
        if rho >= 1.0 {
            return Err(CliError::Config(format!("{scenario} needs a Schur-stable A, spectral radius is {rho}")));
        }
    }
    if scenario == Scenario::StructuredNoise && linalg::rank(&sys.b) < sys.m() {
        return Err(CliError::Config("structured-noise needs B of full column rank".into()));
    }
    Ok(())
}

/// Turns attack-level failures into a failed record; anything else is a hard
/// error.
fn embed(horizon: usize, r: CliResult<HorizonRecord>) -> CliResult<HorizonRecord> {
    match r {
        Err(CliError::Core(e @ (Error::AttackFailed(_) | Error::RankMismatch { .. }))) => {
            Ok(HorizonRecord::failed(horizon, e.to_string()))
        }
        other => other,
    }
}

fn horizon_rng(seed: u64, horizon: usize) -> SeededRng {
    SeededRng::new(seed).fork(horizon as u64)
}

fn run_one(
    problem: &ProblemFile,
    sys: &LtiSystem64,
    scenario: Scenario,
    cfg: &RunConfig,
    horizon: usize,
) -> CliResult<HorizonRecord> {
    let mut rng = horizon_rng(cfg.seed, horizon);
    if let Some(variant) = scenario.variant() {
        return separate_record(problem, sys, variant, cfg.identity_key, &mut rng, horizon);
    }
    match scenario {
        Scenario::StructuredNoise => noise_record(sys, &mut rng, horizon),
        Scenario::KeyRecovery => key_recovery_record(problem, sys, cfg.identity_key, &mut rng, horizon),
        Scenario::Rrp => rrp_record(problem, sys, &mut rng, horizon),
        _ => dense_record(problem, sys, scenario, &mut rng, horizon),
    }
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Largest distance from a true value to its nearest estimate.
pub fn covering_distance(truth: &[Complex<f64>], est: &[Complex<f64>]) -> f64 {
    truth
        .iter()
        .map(|t| est.iter().map(|e| (t - e).norm()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

/// ‖Ȳ − Y_N‖_F/‖Ȳ‖_F between the infinite-horizon Lyapunov sum and its
/// N-step truncation with terminal weight P.
pub fn lyapunov_truncation_error(sys: &LtiSystem64, q: &DMatrix<f64>, p: &DMatrix<f64>, horizon: usize) -> Option<f64> {
    let y_bar = linalg::dlyap(&sys.a, q).ok()?;
    let mut y = DMatrix::zeros(sys.n(), sys.n());
    let mut pow = DMatrix::identity(sys.n(), sys.n());
    for _ in 0..horizon {
        y += pow.transpose() * q * &pow;
        pow = &sys.a * pow;
    }
    y += pow.transpose() * p * &pow;
    linalg::error_index(&y_bar, &y).ok()
}

fn separate_record(
    problem: &ProblemFile,
    sys: &LtiSystem64,
    variant: Variant,
    identity_key: bool,
    rng: &mut SeededRng,
    horizon: usize,
) -> CliResult<HorizonRecord> {
    let cost = problem.cost_spec(horizon)?;
    let key = if identity_key {
        SeparateKey::identity(sys.n(), sys.m(), sys.p())
    } else {
        transforms::gen_separate_key(rng, sys, variant, &KeyConfig::default())?
    };
    let tp = transforms::apply_separate(&key, sys, &cost)?;
    let rep = match variant {
        Variant::Highdim => attacks::attack_highdim(&tp)?,
        Variant::Poly => attacks::attack_poly(&tp)?,
        _ => attacks::attack_separate(&tp)?,
    };

    // What the attack can reach: the system and cost in key coordinates.
    let tl = linalg::pinv(&key.t_mat);
    let gl = linalg::pinv(&key.g_mat);
    let a_key = &key.t_mat * &sys.a * &tl;
    let b_key = &key.t_mat * &sys.b * &gl;
    let q_key = tl.transpose() * &cost.q * &tl;
    let r_key = gl.transpose() * &cost.r * &gl;

    let mut rec = HorizonRecord::new(horizon);
    let a_hat = rep.a_hat.as_ref().expect("separate attacks return Â");
    rec.eps_a = linalg::error_index(&a_key, a_hat).ok();
    rec.eps_b = rep.b_hat.as_ref().and_then(|b| linalg::error_index(&b_key, b).ok());
    if let Some(q_hat) = &rep.q_hat {
        rec.metric("q_error", max_abs(&(q_hat - &q_key)));
        rec.metric("q_rel_error", linalg::error_index(&q_key, q_hat).unwrap_or(f64::NAN));
    }
    if let Some(r_hat) = &rep.r_hat {
        rec.metric("r_rel_error", linalg::error_index(&r_key, r_hat).unwrap_or(f64::NAN));
    }
    rec.metric("eig_distance", linalg::multiset_distance(&rep.eigenvalues, &linalg::eigenvalues(&sys.a)));
    rec.eigenvalues = rep.eigenvalues.clone();
    rec.zeros = rep.zeros.clone();
    rec.attack = Some(report_json(&rep));
    rec.secret = Some(json!({ "key": output::separate_key_json(&key) }));
    Ok(rec)
}

fn noise_record(sys: &LtiSystem64, rng: &mut SeededRng, horizon: usize) -> CliResult<HorizonRecord> {
    let (n, m, p) = (sys.n(), sys.m(), sys.p());
    let key = transforms::gen_structured_noise_key(rng, sys, (n + 1, m + 1, p + 1), KEY_RANGE, NOISE_RADIUS)?;
    let imm = key.immersed_system(sys)?;
    let inputs: Vec<DVector<f64>> = (0..NOISE_SAMPLES).map(|_| rng.normal_vector(m)).collect();
    let encoded: Vec<DVector<f64>> =
        inputs.iter().map(|u| transforms::encode_structured_noise(&key, rng, u)).collect();
    let rep = attacks::attack_structured_noise(&imm.a, &imm.b, &imm.c, &encoded)?;

    // The stripped inputs equal 𝐐u for one fixed 𝐐; fit it and report the misfit.
    let u_mat = DMatrix::from_columns(&inputs);
    let v_mat = DMatrix::from_columns(&rep.q_times_u);
    let q_fit = &v_mat * linalg::pinv(&u_mat);
    let misfit = (&v_mat - &q_fit * &u_mat).norm() / v_mat.norm();
    let decode_error = inputs
        .iter()
        .zip(&encoded)
        .map(|(u, e)| (key.decode(e) - u).amax())
        .fold(0.0, f64::max);

    let eigenvalues = linalg::nonzero_eigenvalues(&imm.a, tol::DEFAULT.zero_eig);
    let mut rec = HorizonRecord::new(horizon);
    rec.metric("noise_dim", rep.noise_dim as f64);
    rec.metric("m_estimate", rep.m_estimate as f64);
    rec.metric("input_fit_misfit", misfit);
    rec.metric("decode_error", decode_error);
    rec.metric("eig_distance", linalg::multiset_distance(&eigenvalues, &linalg::eigenvalues(&sys.a)));
    rec.attack = Some(json!({
        "noise_dim": rep.noise_dim,
        "m_estimate": rep.m_estimate,
        "basis": rows(&rep.basis),
        "eigenvalues": complex_list(&eigenvalues),
        "provenance": { "basis": "attack_structured_noise", "m_estimate": "attack_structured_noise" },
    }));
    rec.eigenvalues = eigenvalues;
    rec.secret = Some(json!({ "key": output::noise_key_json(&key) }));
    Ok(rec)
}

fn random_log(qp: &DenseQp64, rng: &mut SeededRng, count: usize) -> DataLog<f64> {
    let mut log = DataLog::new(qp.shape);
    for _ in 0..count {
        let x0: DVector<f64> = rng.normal_vector(qp.shape.n);
        let (f_tilde, e_tilde) = qp.instance(&x0);
        log.records.push(DataRecord { x0, f_tilde, e_tilde, zeta_star: DVector::zeros(0) });
    }
    log
}

fn dense_record(
    problem: &ProblemFile,
    sys: &LtiSystem64,
    scenario: Scenario,
    rng: &mut SeededRng,
    horizon: usize,
) -> CliResult<HorizonRecord> {
    let cost = problem.cost_spec(horizon)?;
    let qp = dense::build_dense(sys, &cost, &problem.bounds()?)?;
    let n = sys.n();
    // Whether the estimates live in the original state coordinates.
    let (rep, original_basis) = match scenario {
        Scenario::DenseFull => (attacks::attack_dense_full(&DensePublic::from_qp(&qp))?, true),
        Scenario::DenseMulti => (attacks::attack_dense_multi(&random_log(&qp, rng, n + 2), &qp.h, &qp.g)?, false),
        Scenario::Hf => (attacks::attack_hf(&qp.h, &qp.f, qp.shape, n, Some(&sys.c))?, true),
        Scenario::Hx0f => (attacks::attack_hx0f(&random_log(&qp, rng, n + 2), &qp.h)?, false),
        other => unreachable!("{other} is not a dense scenario"),
    };
    let mut rec = HorizonRecord::new(horizon);
    if original_basis {
        rec.eps_a = rep.a_hat.as_ref().and_then(|a| linalg::error_index(&sys.a, a).ok());
        rec.eps_b = rep.b_hat.as_ref().and_then(|b| linalg::error_index(&sys.b, b).ok());
    }
    rec.eps_y = lyapunov_truncation_error(sys, &cost.q, &cost.p_terminal, horizon);
    if let Some(r_hat) = &rep.r_hat {
        rec.metric("r_rel_error", linalg::error_index(&cost.r, r_hat).unwrap_or(f64::NAN));
    }
    let truth = linalg::eigenvalues(&sys.a);
    rec.metric("eig_distance", linalg::multiset_distance(&rep.eigenvalues, &truth));
    if !rep.zeros.is_empty() {
        rec.metric("zero_distance", linalg::multiset_distance(&rep.zeros, &true_zeros(sys)));
    }
    rec.eigenvalues = rep.eigenvalues.clone();
    rec.zeros = rep.zeros.clone();
    rec.attack = Some(report_json(&rep));
    Ok(rec)
}

/// I − (1/N)𝟙𝟙ᵀ ⊗ I_m.
fn block_centering(shape: QpShape) -> DMatrix<f64> {
    let n = shape.horizon;
    let l = DMatrix::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64);
    linalg::kron(&l, &DMatrix::identity(shape.m, shape.m))
}

fn key_recovery_record(
    problem: &ProblemFile,
    sys: &LtiSystem64,
    identity_key: bool,
    rng: &mut SeededRng,
    horizon: usize,
) -> CliResult<HorizonRecord> {
    let qp = dense::build_dense(sys, &problem.cost_spec(horizon)?, &problem.bounds()?)?;
    let key = if identity_key {
        DenseKey::identity(qp.shape)
    } else {
        let cfg = DenseKeyConfig { permute: false, ..Default::default() };
        transforms::gen_dense_key(rng, qp.shape, &cfg)?
    };
    let x0: DVector<f64> = rng.normal_vector(sys.n());
    let inst = transforms::apply_dense(&key, &qp, &x0)?;
    let (r_hat, r_vec_hat) = attacks::recover_dense_key(&inst.g_t, &inst.e_t, qp.shape)?;
    let r_vec_centered = block_centering(qp.shape) * &key.r_vec;

    let sol = dense::solve_qp(&inst.h_t, &inst.f_t, &inst.g_t, &inst.e_t)?;
    let z_plain = dense::qp_solve(&qp, &x0)?.z_star;
    let round_trip = (key.recover(&sol.z_star) - &z_plain).amax();

    let mut rec = HorizonRecord::new(horizon);
    let scale = max_abs(&key.r_mat).max(1.0);
    rec.metric("r_mat_error", max_abs(&(&r_hat - &key.r_mat)) / scale);
    rec.metric("r_vec_error", (&r_vec_hat - &r_vec_centered).amax() / scale);
    rec.metric("round_trip_error", round_trip);
    rec.attack = Some(json!({
        "r_hat": rows(&r_hat),
        "r_vec_centered": r_vec_hat.as_slice(),
        "provenance": { "r_hat": "recover_dense_key", "r_vec_centered": "recover_dense_key" },
    }));
    rec.secret = Some(json!({ "key": output::dense_key_json(&key) }));
    Ok(rec)
}

/// Closed loop in which every step solves the transformed QP under one
/// (𝐑, 𝐫, 𝐏) key; the solver logs the last [`RRP_WINDOW`] instances, starting
/// at the disturbance onset, and runs the relaxation attack on them.
pub(crate) fn rrp_record(problem: &ProblemFile, sys: &LtiSystem64, rng: &mut SeededRng, horizon: usize) -> CliResult<HorizonRecord> {
    let qp = dense::build_dense(sys, &problem.cost_spec(horizon)?, &problem.bounds()?)?;
    let key = transforms::gen_dense_key::<f64>(rng, qp.shape, &DenseKeyConfig::default())?;
    let first = problem.experiment.disturbance.onset();
    let steps = first + RRP_WINDOW;
    let disturbance = problem.disturbance(steps);
    let m = sys.m();
    let mut log = DataLog::new(qp.shape);
    let traj = dense::closed_loop_with(sys, &problem.experiment.initial_state, steps, &disturbance, |k, x| {
        let inst = transforms::apply_dense(&key, &qp, x)?;
        let sol = dense::solve_qp(&inst.h_t, &inst.f_t, &inst.g_t, &inst.e_t)?;
        let u = key.recover(&sol.z_star).rows(0, m).into_owned();
        if k >= first {
            log.records.push(DataRecord { x0: x.clone(), f_tilde: inst.f_t, e_tilde: inst.e_t, zeta_star: sol.z_star });
        }
        Ok(u)
    })?;

    let mut rec = HorizonRecord::new(horizon);
    rec.rms = Some(dense::rms_index(&traj.y));
    rec.secret = Some(json!({ "key": output::dense_key_json(&key) }));
    let rep = match attacks::attack_rrp(&log, true) {
        Ok(rep) => rep,
        Err(e @ Error::AttackFailed(_)) => return Ok(HorizonRecord { failure: Some(e.to_string()), ..rec }),
        Err(e) => return Err(e.into()),
    };
    let truth = linalg::eigenvalues(&sys.a);
    rec.metric("eig_covering", covering_distance(&truth, &rep.eigenvalues));
    rec.metric("eig_distance", linalg::multiset_distance(&rep.eigenvalues, &truth));
    if let Some(eps) = rep.eps_relax {
        rec.metric("eps_relax", eps);
    }
    let mut attack = report_json(&rep);
    attack["extended"] = match attacks::attack_rrp_extended(&log) {
        Ok((a_hat, _)) => json!({ "eigenvalues": complex_list(&linalg::eigenvalues(&a_hat)) }),
        Err(e) => json!({ "failure": e.to_string() }),
    };
    rec.eigenvalues = rep.eigenvalues;
    rec.attack = Some(attack);
    Ok(rec)
}
