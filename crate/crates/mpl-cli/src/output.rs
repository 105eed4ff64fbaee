//! JSON reports (2-space indent, sorted keys) and curve CSVs (17
//! significant digits).

use std::path::Path;

use mpl_core::attacks::WitnessOutcome;
use mpl_core::transforms::{DenseKey, SeparateKey, StructuredNoiseKey};
use mpl_core::AttackReport64;
use nalgebra::{Complex, DMatrix, DVector};
use serde_json::{json, Map, Value};

use crate::problem::rows;
use crate::scenario::{HorizonRecord, ScenarioResult};
use crate::CliResult;

/// Scientific notation with 17 significant digits; empty for a missing value.
pub fn fmt_f64(x: Option<f64>) -> String {
    match x {
        Some(v) => format!("{v:.16e}"),
        None => String::new(),
    }
}

pub fn complex_list(zs: &[Complex<f64>]) -> Value {
    Value::Array(zs.iter().map(|z| json!([z.re, z.im])).collect())
}

fn vector(v: &DVector<f64>) -> Value {
    Value::from(v.as_slice().to_vec())
}

pub fn report_json(rep: &AttackReport64) -> Value {
    let mut out = Map::new();
    let mats: [(&str, &Option<DMatrix<f64>>); 7] = [
        ("a_hat", &rep.a_hat),
        ("b_hat", &rep.b_hat),
        ("c_hat", &rep.c_hat),
        ("r_hat", &rep.r_hat),
        ("q_hat", &rep.q_hat),
        ("p_hat", &rep.p_hat),
        ("ft_hat", &rep.ft_hat),
    ];
    for (key, m) in mats {
        if let Some(m) = m {
            out.insert(key.into(), rows(m));
        }
    }
    out.insert("eigenvalues".into(), complex_list(&rep.eigenvalues));
    out.insert("zeros".into(), complex_list(&rep.zeros));
    if let Some(eps) = rep.eps_relax {
        out.insert("eps_relax".into(), json!(eps));
    }
    if let Some(w) = &rep.witness {
        out.insert("witness".into(), witness_json(w));
    }
    out.insert("provenance".into(), json!(rep.provenance));
    Value::Object(out)
}

fn witness_json(w: &WitnessOutcome<f64>) -> Value {
    match w {
        WitnessOutcome::Witness(w) => json!({
            "outcome": "witness",
            "x_dir": rows(&w.x_dir),
            "epsilon": w.epsilon,
            "min_eig_q": w.min_eig_q,
            "min_eig_p": w.min_eig_p,
        }),
        WitnessOutcome::SingletonCertified => json!({ "outcome": "singleton_certified" }),
        WitnessOutcome::Boundary => json!({ "outcome": "boundary" }),
    }
}

pub fn separate_key_json(key: &SeparateKey<f64>) -> Value {
    json!({
        "variant": key.variant.name(),
        "t": rows(&key.t_mat),
        "f": rows(&key.f_mat),
        "g": rows(&key.g_mat),
        "s": rows(&key.s_mat),
        "r1": vector(&key.r1),
        "r2": vector(&key.r2),
        "r3": vector(&key.r3),
        "f1": rows(&key.f1),
        "degree": key.degree,
        "basis": key.basis,
    })
}

pub fn dense_key_json(key: &DenseKey<f64>) -> Value {
    json!({
        "r_mat": rows(&key.r_mat),
        "r_vec": vector(&key.r_vec),
        "perm": key.perm,
        "time_varying": key.time_varying,
    })
}

pub fn noise_key_json(key: &StructuredNoiseKey<f64>) -> Value {
    json!({
        "g_bar": rows(&key.g_bar),
        "t_bar": rows(&key.t_bar),
        "s_bar": rows(&key.s_bar),
        "noise_basis": rows(&key.noise_basis),
        "radius": key.radius,
    })
}

pub fn write_json(path: &Path, value: &Value) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// horizon, eps_a, eps_b, eps_y, rms.
pub fn write_metrics_csv(path: &Path, records: &[HorizonRecord]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["horizon", "eps_a", "eps_b", "eps_y", "rms"])?;
    for r in records {
        w.write_record([r.horizon.to_string(), fmt_f64(r.eps_a), fmt_f64(r.eps_b), fmt_f64(r.eps_y), fmt_f64(r.rms)])?;
    }
    w.flush()?;
    Ok(())
}

/// horizon, index, re, im for every estimate picked out by `select`.
pub fn write_complex_csv(
    path: &Path,
    records: &[HorizonRecord],
    select: impl Fn(&HorizonRecord) -> &[Complex<f64>],
) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["horizon", "index", "re", "im"])?;
    for r in records {
        for (i, z) in select(r).iter().enumerate() {
            w.write_record([r.horizon.to_string(), i.to_string(), fmt_f64(Some(z.re)), fmt_f64(Some(z.im))])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `report.json`, `metrics.csv`, `eigenvalues.csv` and `zeros.csv`.
pub fn write_scenario(dir: &Path, result: &ScenarioResult) -> CliResult<()> {
    std::fs::create_dir_all(dir)?;
    write_json(&dir.join("report.json"), &result.to_json())?;
    write_metrics_csv(&dir.join("metrics.csv"), &result.records)?;
    write_complex_csv(&dir.join("eigenvalues.csv"), &result.records, |r| &r.eigenvalues)?;
    write_complex_csv(&dir.join("zeros.csv"), &result.records, |r| &r.zeros)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(fmt_f64(Some(0.1)), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(Some(-2.0)), "-2.0000000000000000e0");
        assert_eq!(fmt_f64(None), "");
    }

    #[test]
    fn formatted_values_parse_back_exactly() {
        for x in [std::f64::consts::PI, 1e-300, -123456.789, 0.968] {
            assert_eq!(fmt_f64(Some(x)).parse::<f64>().unwrap(), x);
        }
    }
}
