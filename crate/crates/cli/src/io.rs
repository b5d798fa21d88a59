use std::fs;
use std::path::Path;

use optree::format::fmt_f64;
use optree::GridCell;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Rows of a headerless CSV file and the SHA-256 of its bytes.
pub struct Table {
    pub rows: Vec<Vec<f64>>,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Parses a headerless CSV of floats; every row must have the same number of
/// columns, and `expected_cols` when given.
pub fn read_csv(path: &Path, expected_cols: Option<usize>) -> CliResult<Table> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());
    let mut rows = Vec::new();
    let mut width = expected_cols;
    for (r, rec) in reader.records().enumerate() {
        let row = r + 1;
        let rec = rec.map_err(|e| CliError::Data(format!("{}: row {row}: {e}", path.display())))?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        let want = *width.get_or_insert(rec.len());
        if rec.len() != want {
            return Err(CliError::Data(format!(
                "{}: row {row} has {} columns, expected {want}",
                path.display(),
                rec.len()
            )));
        }
        let mut values = Vec::with_capacity(want);
        for (c, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                CliError::Data(format!(
                    "{}: row {row}, column {}: cannot parse {field:?} as a number",
                    path.display(),
                    c + 1
                ))
            })?;
            if !v.is_finite() {
                return Err(CliError::Data(format!(
                    "{}: row {row}, column {}: value {field} is not finite",
                    path.display(),
                    c + 1
                )));
            }
            values.push(v);
        }
        rows.push(values);
    }
    Ok(Table {
        rows,
        sha256: sha256_hex(&bytes),
    })
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> CliResult<()> {
    write_text(path, &optree::format::to_json_string(value)?)
}

/// Points as CSV rows with full precision.
pub fn points_csv<'a>(points: impl Iterator<Item = &'a [f64]>) -> String {
    let mut out = String::new();
    for p in points {
        let row: Vec<String> = p.iter().map(|&v| fmt_f64(v)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Grid rows with one lower/upper column pair per axis, or one state column
/// per axis for table data.
pub fn grid_csv(cells: &[GridCell], dim: usize, table: bool) -> String {
    let mut header: Vec<String> = Vec::new();
    for d in 0..dim {
        if table {
            header.push(format!("x{d}"));
        } else {
            header.push(format!("x{d}_lower"));
            header.push(format!("x{d}_upper"));
        }
    }
    header.push("density".into());
    let mut out = header.join(",");
    out.push('\n');
    for c in cells {
        let mut row = Vec::with_capacity(2 * dim + 1);
        for d in 0..dim {
            if table {
                row.push(format!("{}", c.lower[d] as u8));
            } else {
                row.push(fmt_f64(c.lower[d]));
                row.push(fmt_f64(c.upper[d]));
            }
        }
        row.push(fmt_f64(c.density));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
