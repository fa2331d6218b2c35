//! Two-column plot data extracted from the CSV artifacts of a run.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::CliError;

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

fn read_csv(path: &Path) -> Result<Option<Table>, CliError> {
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .unwrap_or_default()
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').map(|v| v.parse().unwrap_or(f64::NAN)).collect())
        .collect();
    Ok(Some(Table { header, rows }))
}

fn snapshot_times(t: &Table) -> Vec<f64> {
    let mut ts: Vec<f64> = Vec::new();
    for r in &t.rows {
        if ts.last() != Some(&r[0]) {
            ts.push(r[0]);
        }
    }
    ts
}

fn write_pairs(dir: &Path, name: &str, pairs: impl Iterator<Item = (f64, f64)>) -> Result<PathBuf, CliError> {
    let plot = dir.join("plot");
    fs::create_dir_all(&plot).map_err(CliError::io(&plot))?;
    let path = plot.join(format!("{name}.dat"));
    let mut text = String::new();
    for (a, b) in pairs {
        text.push_str(&format!("{a:.17e} {b:.17e}\n"));
    }
    fs::write(&path, text).map_err(CliError::io(&path))?;
    Ok(path)
}

/// Every selector [`emit_plotdata`] accepts for `dir`.
pub fn available_series(dir: &Path) -> Result<Vec<String>, CliError> {
    let mut out = Vec::new();
    if let Some(t) = read_csv(&dir.join("norms.csv"))? {
        out.extend(t.header.iter().skip(1).cloned());
    }
    if let Some(t) = read_csv(&dir.join("snapshots.csv"))? {
        out.extend(snapshot_times(&t).iter().map(|t| format!("snapshot:{t}")));
    }
    for name in ["convergence", "uniqueness"] {
        if dir.join(format!("{name}.csv")).exists() {
            out.push(name.to_string());
        }
    }
    Ok(out)
}

/// Writes `plot/<name>.dat` (whitespace-separated abscissa and ordinate).
///
/// Selectors: a norm-ledger column (`norm_sh`, `schwartz_N_n`) against `t`;
/// `snapshot:<t>` giving `(x, |u|)` at a stored time; `convergence` giving
/// the varying mesh parameter against the error; `uniqueness` giving
/// `(t, ||q||)`.
pub fn emit_plotdata(dir: &Path, selector: &str) -> Result<PathBuf, CliError> {
    let missing = || -> Result<PathBuf, CliError> {
        Err(CliError::MissingSeries {
            selector: selector.to_string(),
            available: available_series(dir)?,
        })
    };
    if let Some(t) = selector.strip_prefix("snapshot:") {
        let Ok(t) = t.parse::<f64>() else {
            return missing();
        };
        let Some(table) = read_csv(&dir.join("snapshots.csv"))? else {
            return missing();
        };
        let Some(&ts) = snapshot_times(&table)
            .iter()
            .find(|s| (*s - t).abs() <= 1e-9 * t.abs().max(1.0))
        else {
            return missing();
        };
        let rows = table.rows.iter().filter(|r| r[0] == ts);
        return write_pairs(
            dir,
            &format!("snapshot_t{ts:.6}"),
            rows.map(|r| (r[1], r[2].hypot(r[3]))),
        );
    }
    match selector {
        "convergence" => {
            let Some(t) = read_csv(&dir.join("convergence.csv"))? else {
                return missing();
            };
            let h_varies = t.rows.windows(2).any(|w| w[0][0] != w[1][0]);
            let col = if h_varies { 0 } else { 1 };
            write_pairs(dir, "convergence", t.rows.iter().map(|r| (r[col], r[2])))
        }
        "uniqueness" => {
            let Some(t) = read_csv(&dir.join("uniqueness.csv"))? else {
                return missing();
            };
            write_pairs(dir, "uniqueness", t.rows.iter().map(|r| (r[0], r[1])))
        }
        column => {
            let Some(t) = read_csv(&dir.join("norms.csv"))? else {
                return missing();
            };
            match t.header.iter().skip(1).position(|h| h == column) {
                Some(i) => write_pairs(dir, column, t.rows.iter().map(|r| (r[0], r[i + 1]))),
                None => missing(),
            }
        }
    }
}
