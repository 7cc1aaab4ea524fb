use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use errp_bandit::archive::{read_json, write_json};
use errp_bandit::types::Matrix;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::usage;

pub const SEED_ENV: &str = "ERRP_BANDIT_SEED";
pub const SNAPSHOT_FILE: &str = "config.json";

/// Seed precedence: environment override, then the flag, then `default`.
pub fn resolve_seed(flag: Option<u64>, default: u64) -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| usage(format!("{SEED_ENV}='{v}' is not an unsigned integer"))),
        Err(_) => Ok(flag.unwrap_or(default)),
    }
}

#[derive(Serialize)]
struct Snapshot<'a, A: Serialize, R: Serialize> {
    command: &'a str,
    version: &'a str,
    args: &'a A,
    resolved: &'a R,
}

/// Writes `config.json`: the invocation and the fully resolved configuration.
pub fn write_snapshot<A: Serialize, R: Serialize>(dir: &Path, command: &str, args: &A, resolved: &R) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let snapshot = Snapshot {
        command,
        version: env!("CARGO_PKG_VERSION"),
        args,
        resolved,
    };
    write_json(&dir.join(SNAPSHOT_FILE), &snapshot)?;
    Ok(())
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_json(path, value)?;
    Ok(())
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(read_json(path)?)
}

/// Prints JSON to stdout, or writes it to `out`.
pub fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    match out {
        Some(path) => save_json(path, value),
        None => {
            println!("{}", serde_json::to_string_pretty(value)?);
            Ok(())
        }
    }
}

/// Matrix as CSV: a header row of column labels, then one row per matrix
/// row prefixed with its label.
pub fn write_matrix_csv(path: &Path, corner: &str, row_labels: &[String], col_labels: &[f64], m: &Matrix) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    let mut header = vec![corner.to_string()];
    header.extend(col_labels.iter().map(|v| format!("{v}")));
    w.write_record(&header)?;
    for (r, label) in row_labels.iter().enumerate() {
        let mut row = vec![label.clone()];
        row.extend(m.row(r).iter().map(|v| format!("{v}")));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
