//! Result serialisation: JSON values keep full double round-trip
//! precision (serde_json's shortest-exact float formatting).

use std::path::PathBuf;

use serde_json::{json, Value};

use gbl_core::{AdjustedBeliefs, DMatrix, DVector, GeneralisedBeliefs, ProjectionResult};

use crate::CliError;

pub fn write_out(out: &Option<PathBuf>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| CliError::Io(format!("writing {}: {e}", path.display()))),
        None => {
            println!("{content}");
            Ok(())
        }
    }
}

fn vec_json(v: &DVector<f64>) -> Value {
    json!(v.iter().copied().collect::<Vec<f64>>())
}

fn mat_json(m: &DMatrix<f64>) -> Value {
    let rows: Vec<Vec<f64>> = (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect();
    json!(rows)
}

pub fn to_json<T: serde::Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value).map_err(|e| CliError::Validation(e.to_string()))
}

pub fn adjusted_json(adj: &AdjustedBeliefs) -> Result<String, CliError> {
    to_json(&json!({
        "expectation": vec_json(&adj.expectation),
        "variance": mat_json(&adj.variance),
        "h0": vec_json(&adj.h0),
        "coefficients": mat_json(&adj.coefficients),
    }))
}

pub fn generalised_json(
    adj: &AdjustedBeliefs,
    gen: &GeneralisedBeliefs,
) -> Result<String, CliError> {
    to_json(&json!({
        "expectation": vec_json(&gen.expectation),
        "discrepancy": vec_json(&gen.discrepancy),
        "shrink": vec_json(&gen.shrink),
        "variance": mat_json(&gen.variance),
        "adjusted": {
            "expectation": vec_json(&adj.expectation),
            "variance": mat_json(&adj.variance),
        },
        "projection": {
            "active_set": gen.projection.active_set,
            "multipliers": gen.projection.multipliers,
            "kkt_residual": gen.projection.kkt_residual,
            "iterations": gen.projection.iterations,
        },
    }))
}

pub fn projection_json(res: &ProjectionResult, residual: f64) -> Result<String, CliError> {
    to_json(&json!({
        "q_star": res.q_star,
        "active_set": res.active_set,
        "multipliers": res.multipliers,
        "kkt_residual": res.kkt_residual,
        "kkt_residual_recheck": residual,
        "iterations": res.iterations,
    }))
}
