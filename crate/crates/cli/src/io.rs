//! File formats: headerless CSV for numeric matrices (features, labels,
//! count rows, posteriors) and pretty JSON for configs, reports, and
//! manifests. Floats are written with the shortest round-trip decimal,
//! so write → read → write is byte-stable. All writes go through a temp
//! file in the target directory followed by a rename.

use crate::error::{CliError, Result};
use mixclean::{CountVector, FeatureMatrix};
use std::fs;
use std::io::Write;
use std::path::Path;

/// Write bytes atomically: temp file in the same directory, then rename.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let dir = dir.unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(CliError::io(dir))?;
    tmp.write_all(bytes).map_err(CliError::io(path))?;
    tmp.persist(path)
        .map_err(|e| CliError::Io { path: path.to_path_buf(), source: e.error })?;
    Ok(())
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Numerical(format!("serializing {}: {e}", path.display())))?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> CliError {
    CliError::Parse { path: path.to_path_buf(), line, message: message.into() }
}

/// Non-empty lines of a CSV file, with their 1-based line numbers.
/// A trailing newline is tolerated; interior blank lines are not.
fn csv_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    let mut rows = Vec::new();
    let mut past_content = false;
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            past_content = true;
            continue;
        }
        if past_content {
            return Err(parse_error(path, idx + 1, "blank line inside the table"));
        }
        rows.push((idx + 1, line.to_string()));
    }
    Ok(rows)
}

/// Headerless CSV of floats; all rows must have the same width.
pub fn read_float_matrix(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    let mut width = None;
    for (line_no, line) in csv_lines(path)? {
        let mut row = Vec::new();
        for field in line.split(',') {
            let value: f64 = field.trim().parse().map_err(|_| {
                parse_error(path, line_no, format!("not a number: {:?}", field.trim()))
            })?;
            if !value.is_finite() {
                return Err(parse_error(path, line_no, format!("non-finite value {value}")));
            }
            row.push(value);
        }
        if *width.get_or_insert(row.len()) != row.len() {
            return Err(parse_error(
                path,
                line_no,
                format!("expected {} columns, found {}", width.unwrap(), row.len()),
            ));
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_features(path: &Path) -> Result<FeatureMatrix> {
    let rows = read_float_matrix(path)?;
    if rows.is_empty() {
        return Err(CliError::Validation(format!("{}: no feature rows", path.display())));
    }
    FeatureMatrix::from_rows(rows).map_err(CliError::from)
}

/// Single-column CSV of zero-based integer labels.
pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let mut labels = Vec::new();
    for (line_no, line) in csv_lines(path)? {
        let label: usize = line.trim().parse().map_err(|_| {
            parse_error(path, line_no, format!("not a class index: {:?}", line.trim()))
        })?;
        labels.push(label);
    }
    Ok(labels)
}

/// Headerless CSV of count rows; every row must sum to the same trial
/// count N (one multinomial draw per row).
pub fn read_label_sets(path: &Path) -> Result<Vec<CountVector>> {
    let mut sets: Vec<CountVector> = Vec::new();
    let mut width = None;
    let mut trials = None;
    for (line_no, line) in csv_lines(path)? {
        let mut counts = Vec::new();
        for field in line.split(',') {
            let value: u64 = field.trim().parse().map_err(|_| {
                parse_error(path, line_no, format!("not a count: {:?}", field.trim()))
            })?;
            counts.push(value);
        }
        if *width.get_or_insert(counts.len()) != counts.len() {
            return Err(parse_error(
                path,
                line_no,
                format!("expected {} columns, found {}", width.unwrap(), counts.len()),
            ));
        }
        let row_trials: u64 = counts.iter().sum();
        if *trials.get_or_insert(row_trials) != row_trials {
            return Err(parse_error(
                path,
                line_no,
                format!(
                    "row sums to {row_trials} trials, earlier rows sum to {}",
                    trials.unwrap()
                ),
            ));
        }
        sets.push(CountVector::new(counts).map_err(CliError::from)?);
    }
    Ok(sets)
}

/// Shortest round-trip decimal for every entry, comma-separated rows.
pub fn write_float_matrix(path: &Path, rows: &[Vec<f64>]) -> Result<()> {
    let mut text = String::new();
    for row in rows {
        let fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        text.push_str(&fields.join(","));
        text.push('\n');
    }
    atomic_write(path, text.as_bytes())
}

pub fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut text = String::new();
    for label in labels {
        text.push_str(&label.to_string());
        text.push('\n');
    }
    atomic_write(path, text.as_bytes())
}
