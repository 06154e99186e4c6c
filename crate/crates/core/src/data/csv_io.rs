//! CSV ingestion and export.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use super::LabeledDataset;
use crate::error::{Error, Result};

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

fn parse_error(source: &str, location: impl std::fmt::Display, message: impl Into<String>) -> Error {
    Error::Parse { location: format!("{source}: {location}"), message: message.into() }
}

/// Reads a numeric CSV with a header row. When `label_column` names a
/// column, that column becomes the labels (see [`parse_csv`] for the
/// mapping rule).
pub fn load_csv(path: &Path, label_column: Option<&str>) -> Result<LabeledDataset> {
    parse_csv(&read_file(path)?, label_column, &path.display().to_string())
}

/// Parses CSV text. `source` only labels diagnostics.
///
/// Labels that are all integers >= 1 are kept as they are; any other label
/// column is mapped to `1, 2, ...` in order of first appearance.
pub fn parse_csv(text: &str, label_column: Option<&str>, source: &str) -> Result<LabeledDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| parse_error(source, "header", e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(parse_error(source, "header", "missing header row"));
    }
    let label_index = match label_column {
        None => None,
        Some(name) => Some(
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| parse_error(source, "header", format!("no column named {name:?}")))?,
        ),
    };
    let width = headers.len();
    let p = width - usize::from(label_index.is_some());
    if p == 0 {
        return Err(parse_error(source, "header", "no feature columns"));
    }
    let mut values = Vec::new();
    let mut raw_labels = Vec::new();
    for (r, record) in reader.records().enumerate() {
        // header is line 1
        let line = r + 2;
        let record = record.map_err(|e| parse_error(source, format!("line {line}"), e.to_string()))?;
        if record.len() != width {
            return Err(parse_error(
                source,
                format!("line {line}"),
                format!("expected {width} fields, found {}", record.len()),
            ));
        }
        for (c, cell) in record.iter().enumerate() {
            if Some(c) == label_index {
                raw_labels.push(cell.to_owned());
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| {
                parse_error(source, format!("line {line}, column {} ({})", c + 1, headers[c]), format!("non-numeric cell {cell:?}"))
            })?;
            if !v.is_finite() {
                return Err(parse_error(
                    source,
                    format!("line {line}, column {} ({})", c + 1, headers[c]),
                    format!("non-finite cell {cell:?}"),
                ));
            }
            values.push(v);
        }
    }
    let n = values.len() / p;
    if n == 0 {
        return Err(parse_error(source, "body", "no data rows"));
    }
    let data = DMatrix::from_row_slice(n, p, &values);
    let feature_names = headers
        .iter()
        .enumerate()
        .filter(|(c, _)| Some(*c) != label_index)
        .map(|(_, h)| h.clone())
        .collect();
    let labels = label_index.map(|_| map_labels(&raw_labels));
    LabeledDataset::new(data, labels, feature_names)
}

fn map_labels(raw: &[String]) -> Vec<usize> {
    let integers: Option<Vec<usize>> = raw
        .iter()
        .map(|s| s.parse::<usize>().ok().filter(|&v| v >= 1))
        .collect();
    if let Some(v) = integers {
        return v;
    }
    let mut seen: HashMap<&str, usize> = HashMap::new();
    raw.iter()
        .map(|s| {
            let next = seen.len() + 1;
            *seen.entry(s.as_str()).or_insert(next)
        })
        .collect()
}

/// Reads a single-column integer label file. A non-integer first line is
/// taken as a header.
pub fn load_labels(path: &Path) -> Result<Vec<usize>> {
    parse_labels(&read_file(path)?, &path.display().to_string())
}

pub fn parse_labels(text: &str, source: &str) -> Result<Vec<usize>> {
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let cell = line.trim();
        if cell.is_empty() {
            continue;
        }
        if cell.contains(',') {
            return Err(parse_error(source, format!("line {}", i + 1), "expected a single column"));
        }
        match cell.parse::<usize>() {
            Ok(v) => labels.push(v),
            Err(_) if i == 0 => {}
            Err(_) => return Err(parse_error(source, format!("line {}", i + 1), format!("non-integer label {cell:?}"))),
        }
    }
    if labels.is_empty() {
        return Err(parse_error(source, "body", "no labels"));
    }
    Ok(labels)
}

/// CSV text of a matrix under the given header. Values use the shortest
/// representation that round-trips.
pub fn matrix_to_csv(data: &DMatrix<f64>, names: &[String]) -> String {
    debug_assert_eq!(names.len(), data.ncols());
    let mut out = names.join(",");
    out.push('\n');
    for i in 0..data.nrows() {
        for j in 0..data.ncols() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{}", data[(i, j)]).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn labels_to_csv(header: &str, labels: &[usize]) -> String {
    let mut out = format!("{header}\n");
    for l in labels {
        writeln!(out, "{l}").unwrap();
    }
    out
}
