//! Datasets, standardization and CSV ingestion.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{CramError, Result};

/// Tolerance for the standardization invariants checked before fitting.
pub const STANDARDIZED_TOL: f64 = 1e-8;

/// Maps raw data onto the fitting scale: `x_std = x_raw / x_scale`,
/// `y_std = y_raw - y_offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub x_scale: Vec<f64>,
    pub y_offset: Vec<f64>,
}

impl Standardization {
    pub fn identity(p: usize, q: usize) -> Self {
        Standardization {
            x_scale: vec![1.0; p],
            y_offset: vec![0.0; q],
        }
    }

    pub fn apply_x(&self, x_raw: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x_raw.ncols() != self.x_scale.len() {
            return Err(CramError::shape(
                "standardize covariates",
                format!("{} columns", self.x_scale.len()),
                format!("{} columns", x_raw.ncols()),
            ));
        }
        let mut x = x_raw.clone();
        for (mut col, s) in x.column_iter_mut().zip(&self.x_scale) {
            col /= *s;
        }
        Ok(x)
    }

    /// Adds the response offsets back onto standardized-scale predictions.
    pub fn restore_y(&self, y_std: &DMatrix<f64>) -> DMatrix<f64> {
        let mut y = y_std.clone();
        for (mut col, o) in y.column_iter_mut().zip(&self.y_offset) {
            col.add_scalar_mut(*o);
        }
        y
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// `n x p`
    pub x: DMatrix<f64>,
    /// `n x q`
    pub y: DMatrix<f64>,
    pub x_names: Vec<String>,
    pub y_names: Vec<String>,
    /// Present once [`standardize`] has been applied. Maps the original raw
    /// scale onto the current one.
    pub standardization: Option<Standardization>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DMatrix<f64>) -> Result<Self> {
        let x_names = (1..=x.ncols()).map(|j| format!("x{j}")).collect();
        let y_names = (1..=y.ncols()).map(|k| format!("y{k}")).collect();
        Dataset::with_names(x, y, x_names, y_names)
    }

    pub fn with_names(
        x: DMatrix<f64>,
        y: DMatrix<f64>,
        x_names: Vec<String>,
        y_names: Vec<String>,
    ) -> Result<Self> {
        if x.nrows() != y.nrows() {
            return Err(CramError::shape(
                "dataset",
                format!("{} rows", x.nrows()),
                format!("{} rows", y.nrows()),
            ));
        }
        if x_names.len() != x.ncols() || y_names.len() != y.ncols() {
            return Err(CramError::shape(
                "dataset names",
                format!("{} + {} names", x.ncols(), y.ncols()),
                format!("{} + {}", x_names.len(), y_names.len()),
            ));
        }
        Ok(Dataset {
            x,
            y,
            x_names,
            y_names,
            standardization: None,
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn q(&self) -> usize {
        self.y.ncols()
    }

    /// Rows selected by index, in the given order; standardization is dropped.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(rows),
            y: self.y.select_rows(rows),
            x_names: self.x_names.clone(),
            y_names: self.y_names.clone(),
            standardization: None,
        }
    }

    pub fn covariate(&self, j: usize) -> Vec<f64> {
        self.x.column(j).iter().copied().collect()
    }

    /// Checks that a standardization record exists and that the data still
    /// satisfy unit second moments and centered responses.
    pub fn ensure_standardized(&self) -> Result<()> {
        if self.standardization.is_none() {
            return Err(CramError::Contract(
                "dataset has not been standardized".into(),
            ));
        }
        let n = self.n() as f64;
        for j in 0..self.p() {
            let m2 = self.x.column(j).norm_squared() / n;
            if (m2 - 1.0).abs() > STANDARDIZED_TOL {
                return Err(CramError::Contract(format!(
                    "covariate '{}' has second moment {m2}, expected 1",
                    self.x_names[j]
                )));
            }
        }
        for k in 0..self.q() {
            let col = self.y.column(k);
            let mean = col.mean();
            let scale = col.amax().max(1.0);
            if mean.abs() > STANDARDIZED_TOL * scale {
                return Err(CramError::Contract(format!(
                    "response '{}' has mean {mean}, expected 0",
                    self.y_names[k]
                )));
            }
        }
        Ok(())
    }
}

/// Rescales each covariate to unit sample second moment and centers each
/// response. Applying it twice composes the records, so the result still
/// maps the original raw scale.
pub fn standardize(data: &Dataset) -> Result<Dataset> {
    let n = data.n();
    if n == 0 {
        return Err(CramError::InvalidArgument("empty dataset".into()));
    }
    let prior = data
        .standardization
        .clone()
        .unwrap_or_else(|| Standardization::identity(data.p(), data.q()));

    let mut x = data.x.clone();
    let mut x_scale = Vec::with_capacity(data.p());
    for (j, mut col) in x.column_iter_mut().enumerate() {
        let m2 = col.norm_squared() / n as f64;
        if !(m2 > 0.0) || !m2.is_finite() {
            return Err(CramError::ZeroSecondMoment(data.x_names[j].clone()));
        }
        let s = m2.sqrt();
        col /= s;
        x_scale.push(prior.x_scale[j] * s);
    }

    let mut y = data.y.clone();
    let mut y_offset = Vec::with_capacity(data.q());
    for (k, mut col) in y.column_iter_mut().enumerate() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
        y_offset.push(prior.y_offset[k] + mean);
    }

    Ok(Dataset {
        x,
        y,
        x_names: data.x_names.clone(),
        y_names: data.y_names.clone(),
        standardization: Some(Standardization { x_scale, y_offset }),
    })
}

fn column_indices(headers: &csv::StringRecord, wanted: &[String]) -> Result<Vec<usize>> {
    wanted
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| CramError::MissingColumn(name.clone()))
        })
        .collect()
}

/// Reads a numeric table with a header row. Rows are 1-based in error
/// messages, counting the header as row 1.
pub fn read_table(path: &Path, columns: &[String]) -> Result<DMatrix<f64>> {
    let file = std::fs::File::open(path).map_err(|e| CramError::io(path, e))?;
    read_table_from(file, columns)
}

fn read_table_from<R: std::io::Read>(reader: R, columns: &[String]) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let idx = column_indices(&headers, columns)?;
    let mut values = Vec::new();
    let mut rows = 0;
    let mut missing = 0;
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = r + 2;
        let mut parsed = Vec::with_capacity(idx.len());
        let mut has_missing = false;
        for (&c, name) in idx.iter().zip(columns) {
            let cell = record.get(c).unwrap_or("").trim();
            if cell.is_empty()
                || cell.eq_ignore_ascii_case("na")
                || cell.eq_ignore_ascii_case("nan")
            {
                has_missing = true;
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| CramError::NonNumeric {
                row,
                column: name.clone(),
                value: cell.to_string(),
            })?;
            parsed.push(v);
        }
        if has_missing {
            missing += 1;
            continue;
        }
        values.extend(parsed);
        rows += 1;
    }
    if missing > 0 {
        return Err(CramError::MissingValues { count: missing });
    }
    Ok(DMatrix::from_row_slice(rows, columns.len(), &values))
}

/// Loads raw (unstandardized) covariates and responses from a CSV file.
pub fn load_csv(path: &Path, x_columns: &[String], y_columns: &[String]) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| CramError::io(path, e))?;
    load_csv_from(file, x_columns, y_columns)
}

pub fn load_csv_from<R: std::io::Read>(
    reader: R,
    x_columns: &[String],
    y_columns: &[String],
) -> Result<Dataset> {
    let mut all = x_columns.to_vec();
    all.extend_from_slice(y_columns);
    let table = read_table_from(reader, &all)?;
    let p = x_columns.len();
    let x = table.columns(0, p).into_owned();
    let y = table.columns(p, y_columns.len()).into_owned();
    Dataset::with_names(x, y, x_columns.to_vec(), y_columns.to_vec())
}

/// Round-trip exact decimal rendering (17 significant digits).
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes a header plus one row per matrix row, atomically (temp file then
/// rename).
pub fn write_table(path: &Path, header: &[String], rows: &DMatrix<f64>) -> Result<()> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for r in 0..rows.nrows() {
        let line: Vec<String> = rows.row(r).iter().map(|&v| fmt_f64(v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    let mut header = data.x_names.clone();
    header.extend(data.y_names.iter().cloned());
    let mut table = DMatrix::zeros(data.n(), data.p() + data.q());
    table.columns_mut(0, data.p()).copy_from(&data.x);
    table.columns_mut(data.p(), data.q()).copy_from(&data.y);
    write_table(path, &header, &table)
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    std::fs::write(&tmp, bytes).map_err(|e| CramError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| CramError::io(path, e))
}
