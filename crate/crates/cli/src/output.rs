//! Deterministic file writers. CSV cells carry 17 significant digits; JSON
//! reports use shortest-roundtrip float encoding. Byte-identical reruns are
//! part of the contract.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::config::{CliError, CliResult};

/// `step,vertex_1,...,vertex_N,trace` with one row per step. Populations are
/// clipped at zero for reporting only; the trace column sums the raw values.
pub fn write_populations_csv(path: &Path, per_step: &[Vec<f64>]) -> CliResult<()> {
    let n = per_step.first().map(|row| row.len()).unwrap_or(0);
    let mut out = String::from("step");
    for v in 1..=n {
        out.push_str(&format!(",vertex_{v}"));
    }
    out.push_str(",trace\n");
    for (step, row) in per_step.iter().enumerate() {
        out.push_str(&step.to_string());
        let trace: f64 = row.iter().sum();
        for &p in row {
            out.push(',');
            out.push_str(&fmt_f64(p.max(0.0)));
        }
        out.push(',');
        out.push_str(&fmt_f64(trace));
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Internal(format!("serialization failed: {e}")))?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

/// Full double precision: 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes)
        .map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))
}
