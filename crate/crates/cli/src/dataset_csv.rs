//! Dataset CSV: a header row, numeric feature columns and one `label` column in {0, 1}.

use std::path::Path;

use abstain_core::Dataset;

use crate::error::{CliError, Result};
use crate::fsio;

pub const LABEL_COLUMN: &str = "label";

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    parse_dataset(&fsio::read_text(path)?, path)
}

/// Parses CSV text; `path` only labels error messages.
pub fn parse_dataset(text: &str, path: &Path) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| csv_error(path, &e))?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].trim().is_empty()) {
        return Err(CliError::parse(
            path,
            1,
            "empty file: expected a header row",
        ));
    }
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    let label_col = match names.iter().position(|&n| n == LABEL_COLUMN) {
        Some(i) => i,
        None => {
            return Err(CliError::parse(
                path,
                1,
                format!("missing `{LABEL_COLUMN}` column in header"),
            ))
        }
    };
    if names.iter().filter(|&&n| n == LABEL_COLUMN).count() > 1 {
        return Err(CliError::parse(
            path,
            1,
            format!("duplicate `{LABEL_COLUMN}` column"),
        ));
    }
    let feature_names: Vec<String> = names
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_col)
        .map(|(_, n)| n.to_string())
        .collect();
    if feature_names.is_empty() {
        return Err(CliError::parse(path, 1, "no feature columns"));
    }

    let mut features = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, &e))?;
        let line = record.position().map_or(0, |p| p.line());
        for (i, cell) in record.iter().enumerate() {
            let cell = cell.trim();
            if i == label_col {
                labels.push(match cell {
                    "0" => 0,
                    "1" => 1,
                    _ => {
                        return Err(CliError::parse(
                            path,
                            line,
                            format!("label `{cell}` is not 0 or 1"),
                        ))
                    }
                });
                continue;
            }
            let value: f64 = cell.parse().map_err(|_| {
                CliError::parse(
                    path,
                    line,
                    format!("non-numeric value `{cell}` in column `{}`", names[i]),
                )
            })?;
            if !value.is_finite() {
                return Err(CliError::parse(
                    path,
                    line,
                    format!("non-finite value `{cell}` in column `{}`", names[i]),
                ));
            }
            features.push(value);
        }
    }
    if labels.is_empty() {
        return Err(CliError::parse(path, 2, "no data rows"));
    }
    Ok(Dataset::new(features, labels, feature_names)?)
}

fn csv_error(path: &Path, e: &csv::Error) -> CliError {
    let line = e.position().map_or(0, |p| p.line());
    let message = match e.kind() {
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => format!("expected {expected_len} fields, found {len}"),
        csv::ErrorKind::Utf8 { .. } => "invalid UTF-8".to_string(),
        _ => e.to_string(),
    };
    CliError::parse(path, line, message)
}

/// Features first, then `label`. Floats use the shortest text that parses back to the same value.
pub fn dataset_to_csv(ds: &Dataset) -> String {
    let mut out = String::new();
    for name in ds.feature_names() {
        out.push_str(name);
        out.push(',');
    }
    out.push_str(LABEL_COLUMN);
    out.push('\n');
    for (row, label) in ds.rows().zip(ds.labels()) {
        for x in row {
            out.push_str(&x.to_string());
            out.push(',');
        }
        out.push_str(if *label == 1 { "1" } else { "0" });
        out.push('\n');
    }
    out
}

pub fn save_dataset(path: &Path, ds: &Dataset) -> Result<()> {
    if ds
        .feature_names()
        .iter()
        .any(|n| n.contains([',', '"', '\n']) || n == LABEL_COLUMN)
    {
        return Err(CliError::Usage(format!(
            "feature names of {} cannot be written as a CSV header",
            path.display()
        )));
    }
    fsio::write_text(path, &dataset_to_csv(ds))
}
