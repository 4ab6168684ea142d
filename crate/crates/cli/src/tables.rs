//! Per-observation uncertainty CSV and rejection-curve CSV.

use std::path::Path;

use abstain_core::rejection::{CurvePoint, RejectionCurve};
use abstain_core::uncertainty::Assessment;

use crate::error::{CliError, Result};
use crate::fsio;
use crate::numfmt::sig;

/// Significant digits of every float in the CSV outputs.
pub const CSV_DIGITS: usize = 9;

pub const OBSERVATION_COLUMNS: [&str; 7] = [
    "obs_id",
    "p_class1",
    "pred_label",
    "true_label",
    "u_total",
    "u_data",
    "u_model",
];

pub const CURVE_COLUMNS: [&str; 6] = ["q", "nra", "cq", "rq", "rq_defined", "rq_infinite"];

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationRow {
    pub obs_id: u64,
    pub p_class1: f64,
    pub pred_label: u8,
    pub true_label: u8,
    pub u_total: f64,
    pub u_data: f64,
    pub u_model: f64,
}

impl ObservationRow {
    pub fn new(obs_id: u64, assessment: &Assessment, true_label: u8) -> Self {
        let u = assessment.uncertainty;
        ObservationRow {
            obs_id,
            p_class1: assessment.class1_probability(),
            pred_label: assessment.label,
            true_label,
            u_total: u.total,
            u_data: u.data,
            u_model: u.model,
        }
    }

    pub fn correct(&self) -> bool {
        self.pred_label == self.true_label
    }
}

fn header(columns: &[&str]) -> String {
    let mut s = columns.join(",");
    s.push('\n');
    s
}

pub fn observations_to_csv(rows: &[ObservationRow]) -> String {
    let mut out = header(&OBSERVATION_COLUMNS);
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.obs_id,
            sig(r.p_class1, CSV_DIGITS),
            r.pred_label,
            r.true_label,
            sig(r.u_total, CSV_DIGITS),
            sig(r.u_data, CSV_DIGITS),
            sig(r.u_model, CSV_DIGITS),
        ));
    }
    out
}

/// Reads rows of `text`, checking the header against `columns`; yields (line, cells).
fn records(text: &str, path: &Path, columns: &[&str]) -> Result<Vec<(u64, Vec<String>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let found: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::parse(path, 1, e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if found != columns {
        return Err(CliError::parse(
            path,
            1,
            format!(
                "expected columns `{}`, found `{}`",
                columns.join(","),
                found.join(",")
            ),
        ));
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            CliError::parse(path, e.position().map_or(0, |p| p.line()), e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        out.push((line, record.iter().map(|c| c.trim().to_string()).collect()));
    }
    Ok(out)
}

fn cell<T: std::str::FromStr>(path: &Path, line: u64, column: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| CliError::parse(path, line, format!("invalid `{column}` value `{value}`")))
}

fn finite(path: &Path, line: u64, column: &str, value: &str) -> Result<f64> {
    let x: f64 = cell(path, line, column, value)?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(CliError::parse(
            path,
            line,
            format!("non-finite `{column}` value `{value}`"),
        ))
    }
}

fn label(path: &Path, line: u64, column: &str, value: &str) -> Result<u8> {
    match value {
        "0" => Ok(0),
        "1" => Ok(1),
        _ => Err(CliError::parse(
            path,
            line,
            format!("`{column}` must be 0 or 1, found `{value}`"),
        )),
    }
}

pub fn parse_observations(text: &str, path: &Path) -> Result<Vec<ObservationRow>> {
    let rows = records(text, path, &OBSERVATION_COLUMNS)?;
    if rows.is_empty() {
        return Err(CliError::parse(path, 2, "no observations"));
    }
    rows.iter()
        .map(|(line, c)| {
            let line = *line;
            Ok(ObservationRow {
                obs_id: cell(path, line, "obs_id", &c[0])?,
                p_class1: finite(path, line, "p_class1", &c[1])?,
                pred_label: label(path, line, "pred_label", &c[2])?,
                true_label: label(path, line, "true_label", &c[3])?,
                u_total: finite(path, line, "u_total", &c[4])?,
                u_data: finite(path, line, "u_data", &c[5])?,
                u_model: finite(path, line, "u_model", &c[6])?,
            })
        })
        .collect()
}

pub fn load_observations(path: &Path) -> Result<Vec<ObservationRow>> {
    parse_observations(&fsio::read_text(path)?, path)
}

pub fn save_observations(path: &Path, rows: &[ObservationRow]) -> Result<()> {
    fsio::write_text(path, &observations_to_csv(rows))
}

pub fn curve_to_csv(points: &[CurvePoint]) -> String {
    let mut out = header(&CURVE_COLUMNS);
    for p in points {
        let rq = match (p.rq_defined, p.rq_infinite, p.rq) {
            (true, true, _) => "inf".to_string(),
            (true, false, Some(v)) => sig(v, CSV_DIGITS),
            _ => String::new(),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            sig(p.q, CSV_DIGITS),
            sig(p.nra, CSV_DIGITS),
            sig(p.cq, CSV_DIGITS),
            rq,
            p.rq_defined,
            p.rq_infinite,
        ));
    }
    out
}

pub fn parse_curve(text: &str, path: &Path) -> Result<Vec<CurvePoint>> {
    records(text, path, &CURVE_COLUMNS)?
        .iter()
        .map(|(line, c)| {
            let line = *line;
            let rq_defined: bool = cell(path, line, "rq_defined", &c[4])?;
            let rq_infinite: bool = cell(path, line, "rq_infinite", &c[5])?;
            let rq = match c[3].as_str() {
                "" if !rq_defined => None,
                "inf" if rq_defined && rq_infinite => None,
                v if rq_defined && !rq_infinite => Some(finite(path, line, "rq", v)?),
                v => {
                    return Err(CliError::parse(
                        path,
                        line,
                        format!("`rq` value `{v}` contradicts its flags"),
                    ))
                }
            };
            Ok(CurvePoint {
                q: finite(path, line, "q", &c[0])?,
                nra: finite(path, line, "nra", &c[1])?,
                cq: finite(path, line, "cq", &c[2])?,
                rq,
                rq_defined,
                rq_infinite,
            })
        })
        .collect()
}

pub fn save_curve(path: &Path, curve: &RejectionCurve) -> Result<()> {
    fsio::write_text(path, &curve_to_csv(&curve.points))
}
