//! Table files (CSV or JSON lines) and the tables specific to the CLI.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a value
//! read back parses to the same bits.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use seqdescent::bench::Table;
use seqdescent::{LevelCandidate, SolveReport};

use crate::config::Format;
use crate::CliError;

/// Writes `table` to `dir/stem.{csv,jsonl}` and returns the path.
pub fn write_table(
    dir: &Path,
    stem: &str,
    table: &Table,
    format: Format,
) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let path = dir.join(format!("{stem}.{}", format.extension()));
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record(&table.header)?;
            for row in &table.rows {
                w.write_record(row)?;
            }
            w.flush().map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?;
        }
        Format::Jsonl => {
            let mut text = String::new();
            for row in &table.rows {
                let obj: Map<String, Value> = table
                    .header
                    .iter()
                    .zip(row)
                    .map(|(k, v)| (k.clone(), cell_value(v)))
                    .collect();
                text.push_str(&serde_json::to_string(&obj)?);
                text.push('\n');
            }
            write_file(&path, &text)?;
        }
    }
    Ok(path)
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| CliError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn cell_value(cell: &str) -> Value {
    if cell.is_empty() {
        return Value::Null;
    }
    if let Ok(b) = cell.parse::<bool>() {
        return Value::Bool(b);
    }
    if let Ok(n) = cell.parse::<u64>() {
        return Value::from(n);
    }
    if let Ok(x) = cell.parse::<f64>() {
        return Value::from(x);
    }
    Value::String(cell.to_string())
}

fn numbered(prefix: &str, dim: usize) -> impl Iterator<Item = String> + '_ {
    (1..=dim).map(move |i| format!("{prefix}{i}"))
}

/// Every descent iterate of every local search in a solve.
pub fn trace_table(report: &SolveReport) -> Table {
    let dim = report.start.dim();
    let mut header = vec!["search".to_string(), "iter".to_string()];
    header.extend(numbered("x", dim));
    header.extend(["f", "grad_norm", "lambda"].map(String::from));
    let mut rows = Vec::new();
    for (search, m) in report.minima.iter().enumerate() {
        for (iter, p) in m.trace.iterates.iter().enumerate() {
            let mut row = vec![search.to_string(), iter.to_string()];
            row.extend(p.x.iter().map(|v| v.to_string()));
            row.extend([p.f, p.grad_norm, p.lambda].map(|v| v.to_string()));
            rows.push(row);
        }
    }
    Table { header, rows }
}

/// Refined level-set points: coordinates, f, gradient components, gradient norm.
pub fn levelset_table(dim: usize, candidates: &[LevelCandidate]) -> Table {
    let mut header: Vec<String> = numbered("x", dim).collect();
    header.push("f".into());
    header.extend(numbered("g", dim));
    header.push("grad_norm".into());
    let rows = candidates
        .iter()
        .map(|c| {
            let mut row: Vec<String> = c.x.iter().map(|v| v.to_string()).collect();
            row.push(c.f.to_string());
            row.extend(c.grad.iter().map(|v| v.to_string()));
            row.push(c.grad_norm.to_string());
            row
        })
        .collect();
    Table { header, rows }
}
