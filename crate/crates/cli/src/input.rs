//! State input parsing: named families and JSON state files.

use anyhow::{bail, Context, Result};
use nalgebra::Complex;
use serde_json::Value;
use std::path::Path;
use steer_core::qstate::TwoQubitState;
use steer_core::{CMat4, Mat4, Vec4};

/// Parses `werner:P`, `bell:INDEX`, or `tstate:T1,T2,T3`.
pub fn state_from_family(spec: &str) -> Result<TwoQubitState> {
    let (name, params) = spec
        .split_once(':')
        .with_context(|| format!("family spec '{spec}' needs the form name:params"))?;
    match name {
        "werner" => {
            let p: f64 = params.parse().with_context(|| format!("bad werner parameter '{params}'"))?;
            if !(0.0..=1.0).contains(&p) {
                bail!("werner parameter must lie in [0, 1], got {p}");
            }
            from_diag(-p, -p, -p)
        }
        "bell" => {
            let idx: usize = params.parse().with_context(|| format!("bad bell index '{params}'"))?;
            // phi+, phi-, psi+, psi- in that order
            match idx {
                0 => from_diag(1.0, -1.0, 1.0),
                1 => from_diag(-1.0, 1.0, 1.0),
                2 => from_diag(1.0, 1.0, -1.0),
                3 => from_diag(-1.0, -1.0, -1.0),
                _ => bail!("bell index must be 0..=3, got {idx}"),
            }
        }
        "tstate" => {
            let parts: Vec<&str> = params.split(',').collect();
            if parts.len() != 3 {
                bail!("tstate takes three comma-separated entries, got '{params}'");
            }
            let t: Vec<f64> = parts
                .iter()
                .map(|s| s.trim().parse().with_context(|| format!("bad tstate entry '{s}'")))
                .collect::<Result<_>>()?;
            // physicality is checked by reconstructing the density matrix
            from_diag(t[0], t[1], t[2]).context("tstate parameters do not give a physical state")
        }
        other => bail!("unknown family '{other}' (expected werner, bell, or tstate)"),
    }
}

fn from_diag(t1: f64, t2: f64, t3: f64) -> Result<TwoQubitState> {
    let theta = Mat4::from_diagonal(&Vec4::new(1.0, t1, t2, t3));
    Ok(TwoQubitState::from_theta(&theta)?)
}

/// Loads a JSON state file: `{"format": 1, "dense": [[re, im]; 16]}` with the
/// matrix in row-major order, or `{"format": 1, "theta": [[f64; 4]; 4]}`.
pub fn state_from_file(path: &Path) -> Result<TwoQubitState> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let v: Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let format = v.get("format").and_then(Value::as_i64);
    if format != Some(1) {
        bail!("{}: field 'format' must be 1, got {:?}", path.display(), v.get("format"));
    }
    match (v.get("dense"), v.get("theta")) {
        (Some(dense), None) => dense_state(dense).with_context(|| format!("{}: field 'dense'", path.display())),
        (None, Some(theta)) => theta_state(theta).with_context(|| format!("{}: field 'theta'", path.display())),
        (Some(_), Some(_)) => bail!("{}: give either 'dense' or 'theta', not both", path.display()),
        (None, None) => bail!("{}: missing state field 'dense' or 'theta'", path.display()),
    }
}

fn dense_state(v: &Value) -> Result<TwoQubitState> {
    let entries = v.as_array().context("must be an array of 16 [re, im] pairs")?;
    if entries.len() != 16 {
        bail!("expected 16 entries, got {}", entries.len());
    }
    let mut rho = CMat4::zeros();
    for (k, e) in entries.iter().enumerate() {
        let pair = e.as_array().with_context(|| format!("entry {k} must be [re, im]"))?;
        if pair.len() != 2 {
            bail!("entry {k} must have exactly two numbers, got {}", pair.len());
        }
        let re = pair[0].as_f64().with_context(|| format!("entry {k}: re must be a number"))?;
        let im = pair[1].as_f64().with_context(|| format!("entry {k}: im must be a number"))?;
        rho[(k / 4, k % 4)] = Complex::new(re, im);
    }
    Ok(TwoQubitState::from_matrix(rho)?)
}

fn theta_state(v: &Value) -> Result<TwoQubitState> {
    let rows = v.as_array().context("must be a 4x4 array of numbers")?;
    if rows.len() != 4 {
        bail!("expected 4 rows, got {}", rows.len());
    }
    let mut theta = Mat4::zeros();
    for (i, row) in rows.iter().enumerate() {
        let row = row.as_array().with_context(|| format!("row {i} must be an array"))?;
        if row.len() != 4 {
            bail!("row {i}: expected 4 entries, got {}", row.len());
        }
        for (j, e) in row.iter().enumerate() {
            theta[(i, j)] = e.as_f64().with_context(|| format!("entry ({i},{j}) must be a number"))?;
        }
    }
    Ok(TwoQubitState::from_theta(&theta)?)
}
