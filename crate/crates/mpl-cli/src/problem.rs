//! Versioned JSON problem files.
//!
//! Matrices are row-major nested arrays. A continuous-time system with a
//! sample time `ts` is discretized by zero-order hold on load.

use std::path::Path;

use mpl_core::{lti, qtp, BoxConstraints64, CostSpec64, LtiSystem64};
use nalgebra::{DMatrix, DVector};
use serde_json::{json, Map, Value};

use crate::{CliError, CliResult};

pub const SCHEMA_VERSION: u64 = 1;

/// Name that [`parse_problem`] resolves to the built-in quadruple-tank fixture.
pub const QTP_FIXTURE: &str = "qtp";

#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub discrete: bool,
    pub ts: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostFields {
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub horizon: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintFields {
    pub u_min: DVector<f64>,
    pub u_max: DVector<f64>,
    pub y_min: DVector<f64>,
    pub y_max: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DisturbanceSpec {
    None,
    /// d_k = amplitude·decay^{k−onset} for k ≥ onset, zero before.
    DecayingStep { onset: usize, amplitude: DVector<f64>, decay: f64 },
}

impl DisturbanceSpec {
    pub fn sequence(&self, m: usize, steps: usize) -> Vec<DVector<f64>> {
        match self {
            DisturbanceSpec::None => vec![DVector::zeros(m); steps],
            DisturbanceSpec::DecayingStep { onset, amplitude, decay } => (0..steps)
                .map(|k| if k < *onset { DVector::zeros(m) } else { amplitude * decay.powi((k - onset) as i32) })
                .collect(),
        }
    }

    pub fn onset(&self) -> usize {
        match self {
            DisturbanceSpec::None => 0,
            DisturbanceSpec::DecayingStep { onset, .. } => *onset,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub steps: usize,
    pub disturbance: DisturbanceSpec,
    pub initial_state: DVector<f64>,
    pub seeds: Vec<u64>,
    pub horizons: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemFile {
    pub schema_version: u64,
    pub name: String,
    pub system: SystemSpec,
    pub cost: CostFields,
    pub constraints: ConstraintFields,
    pub experiment: Experiment,
}

/// Reads and validates a problem file. The name `qtp` resolves to the
/// built-in fixture unless a file of that name exists.
pub fn parse_problem(path: &Path) -> CliResult<ProblemFile> {
    if path.as_os_str() == QTP_FIXTURE && !path.exists() {
        return Ok(ProblemFile::qtp());
    }
    let text = std::fs::read_to_string(path)?;
    ProblemFile::from_json_str(&text)
}

pub fn write_problem(path: &Path, problem: &ProblemFile) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(&problem.to_json())?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

impl ProblemFile {
    /// The quadruple-tank process: continuous model sampled at 2 s, Q = 2I,
    /// R = I, P = 0, |u| ≤ 1, |y| ≤ 2, 500 steps with a decaying input
    /// disturbance from step 200.
    pub fn qtp() -> Self {
        let sys = qtp::continuous::<f64>();
        let cost = qtp::cost::<f64>(5).expect("fixture cost is valid");
        let bounds = qtp::constraints::<f64>();
        Self {
            schema_version: SCHEMA_VERSION,
            name: QTP_FIXTURE.into(),
            system: SystemSpec { a: sys.a, b: sys.b, c: sys.c, discrete: false, ts: Some(qtp::SAMPLE_TIME) },
            cost: CostFields { q: cost.q, r: cost.r, p: cost.p_terminal, horizon: cost.horizon },
            constraints: ConstraintFields {
                u_min: bounds.u_min,
                u_max: bounds.u_max,
                y_min: bounds.y_min,
                y_max: bounds.y_max,
            },
            experiment: Experiment {
                steps: qtp::STEPS,
                disturbance: DisturbanceSpec::DecayingStep {
                    onset: qtp::DISTURBANCE_ONSET,
                    amplitude: DVector::from_row_slice(&qtp::DISTURBANCE),
                    decay: qtp::DISTURBANCE_DECAY,
                },
                initial_state: DVector::zeros(4),
                seeds: vec![7],
                horizons: vec![5, 20, 50],
            },
        }
    }

    /// The discrete-time plant the controller runs on.
    pub fn lti(&self) -> CliResult<LtiSystem64> {
        let s = &self.system;
        let sys = LtiSystem64::new(s.a.clone(), s.b.clone(), s.c.clone(), s.discrete)
            .map_err(|e| CliError::parse("/system", e.to_string()))?;
        if s.discrete {
            return Ok(sys);
        }
        let ts = s.ts.ok_or_else(|| CliError::parse("/system/ts", "continuous system needs a sample time"))?;
        lti::zoh_discretize(&sys, ts).map_err(|e| CliError::parse("/system/ts", e.to_string()))
    }

    pub fn cost_spec(&self, horizon: usize) -> CliResult<CostSpec64> {
        let c = &self.cost;
        CostSpec64::new(c.q.clone(), c.r.clone(), c.p.clone(), horizon).map_err(|e| CliError::parse("/cost", e.to_string()))
    }

    pub fn bounds(&self) -> CliResult<BoxConstraints64> {
        let c = &self.constraints;
        BoxConstraints64::new(c.u_min.clone(), c.u_max.clone(), c.y_min.clone(), c.y_max.clone())
            .map_err(|e| CliError::parse("/constraints", e.to_string()))
    }

    pub fn disturbance(&self, steps: usize) -> Vec<DVector<f64>> {
        self.experiment.disturbance.sequence(self.system.b.ncols(), steps)
    }

    /// Cross-checks dimensions that the per-field parsers cannot see.
    pub fn validate(&self) -> CliResult<()> {
        let sys = self.lti()?;
        let (n, m, p) = (sys.n(), sys.m(), sys.p());
        let cost = self.cost_spec(self.cost.horizon)?;
        if cost.q.nrows() != n {
            return Err(CliError::parse("/cost/q", format!("expected {n}×{n}")));
        }
        if cost.r.nrows() != m {
            return Err(CliError::parse("/cost/r", format!("expected {m}×{m}")));
        }
        let bounds = self.bounds()?;
        if bounds.u_min.len() != m {
            return Err(CliError::parse("/constraints/u_min", format!("expected length {m}")));
        }
        if bounds.y_min.len() != p {
            return Err(CliError::parse("/constraints/y_min", format!("expected length {p}")));
        }
        let e = &self.experiment;
        if e.initial_state.len() != n {
            return Err(CliError::parse("/experiment/initial_state", format!("expected length {n}")));
        }
        if let DisturbanceSpec::DecayingStep { amplitude, .. } = &e.disturbance {
            if amplitude.len() != m {
                return Err(CliError::parse("/experiment/disturbance/amplitude", format!("expected length {m}")));
            }
        }
        if let Some(i) = e.horizons.iter().position(|&h| h == 0) {
            return Err(CliError::parse(format!("/experiment/horizons/{i}"), "horizon must be positive"));
        }
        Ok(())
    }

    pub fn from_json_str(text: &str) -> CliResult<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| CliError::parse("", e.to_string()))?;
        Self::from_json(&value)
    }

    pub fn from_json(v: &Value) -> CliResult<Self> {
        let root = Obj::new(v, "")?;
        let schema_version = root.u64("schema_version")?;
        if schema_version != SCHEMA_VERSION {
            return Err(CliError::parse(
                "/schema_version",
                format!("unsupported version {schema_version}, expected {SCHEMA_VERSION}"),
            ));
        }
        let name = root.opt("name").map(|_| root.string("name")).transpose()?.unwrap_or_default();

        let s = root.obj("system")?;
        let system = SystemSpec {
            a: s.matrix("a")?,
            b: s.matrix("b")?,
            c: s.matrix("c")?,
            discrete: s.bool("discrete")?,
            ts: s.opt_f64("ts")?,
        };
        let c = root.obj("cost")?;
        let cost = CostFields { q: c.matrix("q")?, r: c.matrix("r")?, p: c.matrix("p")?, horizon: c.usize("horizon")? };
        let k = root.obj("constraints")?;
        let constraints = ConstraintFields {
            u_min: k.vector("u_min")?,
            u_max: k.vector("u_max")?,
            y_min: k.vector("y_min")?,
            y_max: k.vector("y_max")?,
        };
        let e = root.obj("experiment")?;
        let d = e.obj("disturbance")?;
        let disturbance = match d.string("kind")?.as_str() {
            "none" => DisturbanceSpec::None,
            "decaying_step" => DisturbanceSpec::DecayingStep {
                onset: d.usize("onset")?,
                amplitude: d.vector("amplitude")?,
                decay: d.f64("decay")?,
            },
            other => return Err(CliError::parse(d.ptr("kind"), format!("unknown disturbance kind {other:?}"))),
        };
        let experiment = Experiment {
            steps: e.usize("steps")?,
            disturbance,
            initial_state: e.vector("initial_state")?,
            seeds: e.u64_list("seeds")?,
            horizons: e.u64_list("horizons")?.into_iter().map(|h| h as usize).collect(),
        };
        let out = Self { schema_version, name, system, cost, constraints, experiment };
        out.validate()?;
        Ok(out)
    }

    pub fn to_json(&self) -> Value {
        let s = &self.system;
        let e = &self.experiment;
        let disturbance = match &e.disturbance {
            DisturbanceSpec::None => json!({ "kind": "none" }),
            DisturbanceSpec::DecayingStep { onset, amplitude, decay } => json!({
                "kind": "decaying_step",
                "onset": onset,
                "amplitude": amplitude.as_slice(),
                "decay": decay,
            }),
        };
        json!({
            "schema_version": self.schema_version,
            "name": self.name,
            "system": {
                "a": rows(&s.a),
                "b": rows(&s.b),
                "c": rows(&s.c),
                "discrete": s.discrete,
                "ts": s.ts,
            },
            "cost": {
                "q": rows(&self.cost.q),
                "r": rows(&self.cost.r),
                "p": rows(&self.cost.p),
                "horizon": self.cost.horizon,
            },
            "constraints": {
                "u_min": self.constraints.u_min.as_slice(),
                "u_max": self.constraints.u_max.as_slice(),
                "y_min": self.constraints.y_min.as_slice(),
                "y_max": self.constraints.y_max.as_slice(),
            },
            "experiment": {
                "steps": e.steps,
                "disturbance": disturbance,
                "initial_state": e.initial_state.as_slice(),
                "seeds": e.seeds,
                "horizons": e.horizons,
            },
        })
    }
}

/// Row-major nested arrays.
pub fn rows(m: &DMatrix<f64>) -> Value {
    Value::Array(m.row_iter().map(|r| Value::from(r.iter().copied().collect::<Vec<f64>>())).collect())
}

/// A JSON object together with its pointer, for located errors.
struct Obj<'a> {
    map: &'a Map<String, Value>,
    at: String,
}

fn escape(key: &str) -> String {
    key.replace('~', "~0").replace('/', "~1")
}

impl<'a> Obj<'a> {
    fn new(v: &'a Value, at: &str) -> CliResult<Self> {
        let map = v.as_object().ok_or_else(|| CliError::parse(at, "expected an object"))?;
        Ok(Self { map, at: at.to_string() })
    }

    fn ptr(&self, key: &str) -> String {
        format!("{}/{}", self.at, escape(key))
    }

    fn opt(&self, key: &str) -> Option<&'a Value> {
        self.map.get(key).filter(|v| !v.is_null())
    }

    fn get(&self, key: &str) -> CliResult<&'a Value> {
        self.opt(key).ok_or_else(|| CliError::parse(self.ptr(key), "missing field"))
    }

    fn obj(&self, key: &str) -> CliResult<Obj<'a>> {
        Obj::new(self.get(key)?, &self.ptr(key))
    }

    fn string(&self, key: &str) -> CliResult<String> {
        self.get(key)?.as_str().map(str::to_string).ok_or_else(|| CliError::parse(self.ptr(key), "expected a string"))
    }

    fn bool(&self, key: &str) -> CliResult<bool> {
        self.get(key)?.as_bool().ok_or_else(|| CliError::parse(self.ptr(key), "expected a boolean"))
    }

    fn f64(&self, key: &str) -> CliResult<f64> {
        number(self.get(key)?, &self.ptr(key))
    }

    fn opt_f64(&self, key: &str) -> CliResult<Option<f64>> {
        self.opt(key).map(|v| number(v, &self.ptr(key))).transpose()
    }

    fn u64(&self, key: &str) -> CliResult<u64> {
        self.get(key)?.as_u64().ok_or_else(|| CliError::parse(self.ptr(key), "expected a non-negative integer"))
    }

    fn usize(&self, key: &str) -> CliResult<usize> {
        Ok(self.u64(key)? as usize)
    }

    fn u64_list(&self, key: &str) -> CliResult<Vec<u64>> {
        let at = self.ptr(key);
        let arr = self.get(key)?.as_array().ok_or_else(|| CliError::parse(&at, "expected an array"))?;
        arr.iter()
            .enumerate()
            .map(|(i, v)| v.as_u64().ok_or_else(|| CliError::parse(format!("{at}/{i}"), "expected a non-negative integer")))
            .collect()
    }

    fn vector(&self, key: &str) -> CliResult<DVector<f64>> {
        let at = self.ptr(key);
        let arr = self.get(key)?.as_array().ok_or_else(|| CliError::parse(&at, "expected an array of numbers"))?;
        let vals = arr.iter().enumerate().map(|(i, v)| number(v, &format!("{at}/{i}"))).collect::<CliResult<Vec<_>>>()?;
        Ok(DVector::from_vec(vals))
    }

    fn matrix(&self, key: &str) -> CliResult<DMatrix<f64>> {
        let at = self.ptr(key);
        let outer = self.get(key)?.as_array().ok_or_else(|| CliError::parse(&at, "expected an array of rows"))?;
        let mut data = Vec::new();
        let mut ncols = None;
        for (i, row) in outer.iter().enumerate() {
            let row_at = format!("{at}/{i}");
            let row = row.as_array().ok_or_else(|| CliError::parse(&row_at, "expected an array of numbers"))?;
            match ncols {
                None => ncols = Some(row.len()),
                Some(c) if c != row.len() => {
                    return Err(CliError::parse(&row_at, format!("row has {} entries, expected {c}", row.len())))
                }
                _ => {}
            }
            for (j, v) in row.iter().enumerate() {
                data.push(number(v, &format!("{row_at}/{j}"))?);
            }
        }
        Ok(DMatrix::from_row_slice(outer.len(), ncols.unwrap_or(0), &data))
    }
}

fn number(v: &Value, at: &str) -> CliResult<f64> {
    v.as_f64().filter(|x| x.is_finite()).ok_or_else(|| CliError::parse(at, "expected a finite number"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qtp_round_trips_through_json() {
        let p = ProblemFile::qtp();
        let text = serde_json::to_string_pretty(&p.to_json()).unwrap();
        assert_eq!(ProblemFile::from_json_str(&text).unwrap(), p);
    }

    #[test]
    fn missing_q_is_located() {
        let mut v = ProblemFile::qtp().to_json();
        v["cost"].as_object_mut().unwrap().remove("q");
        match ProblemFile::from_json(&v) {
            Err(CliError::Parse { pointer, .. }) => assert_eq!(pointer, "/cost/q"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ragged_matrix_points_at_the_row() {
        let mut v = ProblemFile::qtp().to_json();
        v["system"]["a"][2] = json!([1.0, 2.0]);
        match ProblemFile::from_json(&v) {
            Err(CliError::Parse { pointer, .. }) => assert_eq!(pointer, "/system/a/2"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_schema_version_is_rejected() {
        let mut v = ProblemFile::qtp().to_json();
        v["schema_version"] = json!(2);
        assert!(matches!(ProblemFile::from_json(&v), Err(CliError::Parse { pointer, .. }) if pointer == "/schema_version"));
    }

    #[test]
    fn dimension_mismatch_is_located() {
        let mut v = ProblemFile::qtp().to_json();
        v["experiment"]["initial_state"] = json!([0.0, 0.0]);
        assert!(matches!(ProblemFile::from_json(&v), Err(CliError::Parse { pointer, .. }) if pointer == "/experiment/initial_state"));
    }

    #[test]
    fn fixture_matches_core_discretization() {
        let sys = ProblemFile::qtp().lti().unwrap();
        assert_eq!(sys, qtp::discrete::<f64>());
    }
}
