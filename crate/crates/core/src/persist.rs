//! Model files and curve export.
//!
//! A model file is a single JSON document with `"format_version": 1`.
//! Matrices are stored as arrays of rows. Floats are written in shortest
//! round-trip form, so a save/load cycle reproduces every value bit for bit.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::backfit::{ComponentFunctions, FitDiagnostics, FittedModel};
use crate::config::FitConfig;
use crate::data::{fmt_f64, write_atomic, Standardization};
use crate::error::{CramError, Result};
use crate::linalg::{Shrinkage, SingularSystem};

pub const FORMAT_VERSION: u64 = 1;

type Rows = Vec<Vec<f64>>;

fn to_rows(m: &DMatrix<f64>) -> Rows {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn from_rows(rows: &Rows, ncols: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(CramError::Parse(format!("{what}: ragged rows")));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(rows.len(), ncols, &flat))
}

#[derive(Serialize, Deserialize)]
struct ShrinkageRecord {
    basis: Rows,
    tau: Vec<f64>,
    lambda: f64,
    rank_tol: f64,
}

#[derive(Serialize, Deserialize)]
struct DiagnosticsRecord {
    sweeps_run: usize,
    objective_trace: Vec<f64>,
    component_ranks: Vec<usize>,
    joint_rank: usize,
    converged: bool,
    last_change: f64,
}

#[derive(Serialize, Deserialize)]
struct ModelRecord {
    format_version: u64,
    x_names: Vec<String>,
    y_names: Vec<String>,
    config: FitConfig,
    standardization: Standardization,
    train_x: Rows,
    components: Vec<Rows>,
    residual_targets: Vec<Rows>,
    shrinkage: Vec<ShrinkageRecord>,
    offsets: Vec<Vec<f64>>,
    diagnostics: DiagnosticsRecord,
}

impl ModelRecord {
    fn from_model(model: &FittedModel) -> Result<Self> {
        if model.p() == 0 {
            return Err(CramError::Contract(
                "refusing to save a model without covariates".into(),
            ));
        }
        let d = &model.diagnostics;
        // a non-finite last_change (no sweep run) is not representable in JSON
        let last_change = if d.last_change.is_finite() {
            d.last_change
        } else {
            f64::MAX
        };
        Ok(ModelRecord {
            format_version: FORMAT_VERSION,
            x_names: model.x_names.clone(),
            y_names: model.y_names.clone(),
            config: model.config.clone(),
            standardization: model.standardization.clone(),
            train_x: to_rows(&model.train_x),
            components: model.components.components.iter().map(to_rows).collect(),
            residual_targets: model.residual_targets.iter().map(to_rows).collect(),
            shrinkage: model
                .shrinkage
                .iter()
                .map(|s| ShrinkageRecord {
                    basis: to_rows(&s.system.basis),
                    tau: s.system.values.iter().copied().collect(),
                    lambda: s.lambda,
                    rank_tol: s.rank_tol,
                })
                .collect(),
            offsets: model
                .offsets
                .iter()
                .map(|o| o.iter().copied().collect())
                .collect(),
            diagnostics: DiagnosticsRecord {
                sweeps_run: d.sweeps_run,
                objective_trace: d.objective_trace.clone(),
                component_ranks: d.component_ranks.clone(),
                joint_rank: d.joint_rank,
                converged: d.converged,
                last_change,
            },
        })
    }

    fn into_model(self) -> Result<FittedModel> {
        let p = self.x_names.len();
        let q = self.y_names.len();
        if p == 0 {
            return Err(CramError::Parse("model has no covariates".into()));
        }
        let counts = [
            self.components.len(),
            self.residual_targets.len(),
            self.shrinkage.len(),
            self.offsets.len(),
            self.standardization.x_scale.len(),
        ];
        if counts.iter().any(|&c| c != p) || self.standardization.y_offset.len() != q {
            return Err(CramError::Parse(
                "inconsistent covariate/response counts".into(),
            ));
        }
        let train_x = from_rows(&self.train_x, p, "train_x")?;
        let n = train_x.nrows();
        let block = |rows: &Rows, what: &str| -> Result<DMatrix<f64>> {
            let m = from_rows(rows, q, what)?;
            if m.nrows() != n {
                return Err(CramError::Parse(format!("{what}: expected {n} rows")));
            }
            Ok(m)
        };
        let components = self
            .components
            .iter()
            .map(|r| block(r, "components"))
            .collect::<Result<Vec<_>>>()?;
        let residual_targets = self
            .residual_targets
            .iter()
            .map(|r| block(r, "residual_targets"))
            .collect::<Result<Vec<_>>>()?;
        let shrinkage = self
            .shrinkage
            .into_iter()
            .map(|s| {
                let basis = from_rows(&s.basis, s.tau.len(), "shrinkage basis")?;
                if basis.nrows() != q {
                    return Err(CramError::Parse("shrinkage basis has wrong size".into()));
                }
                Ok(Shrinkage {
                    system: SingularSystem {
                        basis,
                        values: DVector::from_vec(s.tau),
                    },
                    lambda: s.lambda,
                    rank_tol: s.rank_tol,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let offsets = self
            .offsets
            .into_iter()
            .map(|o| {
                if o.len() != q {
                    return Err(CramError::Parse("offset has wrong length".into()));
                }
                Ok(DVector::from_vec(o))
            })
            .collect::<Result<Vec<_>>>()?;
        self.config
            .validate(p)
            .map_err(|e| CramError::Parse(format!("config: {e}")))?;
        let d = self.diagnostics;
        Ok(FittedModel {
            components: ComponentFunctions { components },
            train_x,
            residual_targets,
            shrinkage,
            offsets,
            config: self.config,
            standardization: self.standardization,
            x_names: self.x_names,
            y_names: self.y_names,
            diagnostics: FitDiagnostics {
                sweeps_run: d.sweeps_run,
                objective_trace: d.objective_trace,
                component_ranks: d.component_ranks,
                joint_rank: d.joint_rank,
                converged: d.converged,
                last_change: d.last_change,
            },
        })
    }
}

pub fn model_to_string(model: &FittedModel) -> Result<String> {
    let record = ModelRecord::from_model(model)?;
    serde_json::to_string_pretty(&record).map_err(|e| CramError::Parse(e.to_string()))
}

pub fn model_from_str(text: &str) -> Result<FittedModel> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| CramError::Parse(e.to_string()))?;
    let version = value
        .get("format_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| CramError::Parse("missing format_version".into()))?;
    if version != FORMAT_VERSION {
        return Err(CramError::Version {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let record: ModelRecord =
        serde_json::from_value(value).map_err(|e| CramError::Parse(e.to_string()))?;
    record.into_model()
}

pub fn save_model(model: &FittedModel, path: &Path) -> Result<()> {
    let text = model_to_string(model)?;
    write_atomic(path, text.as_bytes())
}

pub fn load_model(path: &Path) -> Result<FittedModel> {
    let text = std::fs::read_to_string(path).map_err(|e| CramError::io(path, e))?;
    model_from_str(&text)
}

/// Evaluates each component function on `grid_size` evenly spaced points
/// spanning the training range of its covariate. Returns one `grid_size x
/// (1 + q)` table per covariate; the first column is on the original
/// covariate scale.
pub fn component_curves(model: &FittedModel, grid_size: usize) -> Result<Vec<DMatrix<f64>>> {
    if grid_size < 2 {
        return Err(CramError::InvalidArgument(
            "curve grid needs at least 2 points".into(),
        ));
    }
    (0..model.p())
        .map(|j| {
            let col = model.train_x.column(j);
            let (lo, hi) = (col.min(), col.max());
            let pts: Vec<f64> = (0..grid_size)
                .map(|i| {
                    if i == grid_size - 1 {
                        hi
                    } else {
                        lo + (hi - lo) * i as f64 / (grid_size - 1) as f64
                    }
                })
                .collect();
            let values = model.component_at(j, &pts)?;
            let scale = model.standardization.x_scale[j];
            let mut table = DMatrix::zeros(grid_size, 1 + model.q());
            for (i, &x) in pts.iter().enumerate() {
                table[(i, 0)] = x * scale;
            }
            table.columns_mut(1, model.q()).copy_from(&values);
            Ok(table)
        })
        .collect()
}

/// Writes `curve_<j>.csv` (1-based) into `dir` with header `x,m1,...,mq`.
pub fn export_curves(model: &FittedModel, grid_size: usize, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| CramError::io(dir, e))?;
    let mut header = String::from("x");
    for k in 1..=model.q() {
        header.push_str(&format!(",m{k}"));
    }
    component_curves(model, grid_size)?
        .into_iter()
        .enumerate()
        .map(|(j, table)| {
            let mut out = header.clone();
            out.push('\n');
            for r in table.row_iter() {
                let line: Vec<String> = r.iter().map(|&v| fmt_f64(v)).collect();
                out.push_str(&line.join(","));
                out.push('\n');
            }
            let path = dir.join(format!("curve_{}.csv", j + 1));
            write_atomic(&path, out.as_bytes())?;
            Ok(path)
        })
        .collect()
}
