//! Matrix and result CSV files.
//!
//! Matrix files have a header row `j0,…,j(p-1)` and one row per
//! observation. Empty cells and `NaN` mark missing entries and are read as
//! zero. Values are written with 17 significant digits.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use super::CliError;
use crate::simulation::ResultRow;

/// Formats `v` with 17 significant digits so it parses back bit-identically.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:.16e}")
    }
}

pub fn matrix_csv(values: &DMatrix<f64>) -> String {
    let p = values.ncols();
    let mut out = String::new();
    let header: Vec<String> = (0..p).map(|j| format!("j{j}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..values.nrows() {
        let cells: Vec<String> = (0..p)
            .map(|j| {
                let v = values[(i, j)];
                if v == 0.0 {
                    String::new()
                } else {
                    fmt_f64(v)
                }
            })
            .collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// A parsed matrix file.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixFile {
    pub values: DMatrix<f64>,
    pub missing: usize,
}

impl MatrixFile {
    pub fn mask_density(&self) -> f64 {
        1.0 - self.missing as f64 / self.values.len().max(1) as f64
    }
}

pub fn parse_matrix_csv(text: &str, origin: &str) -> Result<MatrixFile, CliError> {
    let io = |msg: String| CliError::Io(format!("{origin}: {msg}"));
    if text.trim().is_empty() {
        return Err(io("empty data file".to_string()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let p = reader
        .headers()
        .map_err(|e| io(format!("bad header: {e}")))?
        .len();
    let mut rows: Vec<f64> = Vec::new();
    let mut n = 0;
    let mut missing = 0;
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| io(e.to_string()))?;
        if record.len() != p {
            return Err(io(format!(
                "row {} has {} cells, header has {p}",
                line + 1,
                record.len()
            )));
        }
        for (j, cell) in record.iter().enumerate() {
            let v = if cell.is_empty() || cell.eq_ignore_ascii_case("nan") {
                missing += 1;
                0.0
            } else {
                let v: f64 = cell
                    .parse()
                    .map_err(|_| io(format!("row {}, column {j}: cannot parse `{cell}`", line + 1)))?;
                if !v.is_finite() {
                    return Err(io(format!("row {}, column {j}: non-finite value", line + 1)));
                }
                v
            };
            rows.push(v);
        }
        n += 1;
    }
    if n == 0 {
        return Err(io("no data rows".to_string()));
    }
    Ok(MatrixFile {
        values: DMatrix::from_row_slice(n, p, &rows),
        missing,
    })
}

pub fn read_matrix_csv(path: &Path) -> Result<MatrixFile, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse_matrix_csv(&text, &path.display().to_string())
}

pub const RESULT_COLUMNS: [&str; 9] = [
    "scenario",
    "omega",
    "delta_label",
    "replication_index",
    "estimator_name",
    "error",
    "iterations",
    "runtime_ms",
    "seed",
];

pub fn rows_csv(rows: &[ResultRow]) -> String {
    let mut out = RESULT_COLUMNS.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{:.3},{}\n",
            r.scenario,
            r.omega,
            r.delta_label,
            r.replication_index,
            r.estimator_name.as_str(),
            fmt_f64(r.error),
            r.iterations,
            r.runtime_ms,
            r.seed
        ));
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    let mut f = fs::File::create(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    f.write_all(contents.as_bytes())
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
