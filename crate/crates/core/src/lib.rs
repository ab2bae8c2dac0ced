//! Constrained rank additive models.
//!
//! A `q`-dimensional response is modelled as a sum of `p` univariate
//! component functions, one per covariate, with a functional nuclear-norm
//! penalty pushing the matrix of component functions towards low rank. Fits
//! are computed by backfitting: smooth the partial residual of one covariate
//! with a local-linear smoother, then soft-threshold the eigenvalues of its
//! second-moment matrix.
//!
//! ```no_run
//! use cram::{fit, standardize, FitConfig, Penalty};
//! use cram::experiments::{generate_synthetic, SyntheticSpec};
//!
//! let raw = generate_synthetic(&SyntheticSpec::default()).unwrap();
//! let data = standardize(&raw).unwrap();
//! let config = FitConfig::with_default_smoothers(&data, Penalty::Joint { lambda: 0.5 }).unwrap();
//! let model = fit(&data, &config).unwrap();
//! println!("rank {}", model.rank());
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod backfit;
pub mod certificate;
pub mod config;
pub mod data;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod path;
pub mod penalty;
pub mod persist;
pub mod smoothing;

pub use nalgebra;

pub use backfit::{
    backfit_joint, backfit_per_component, fit, fit_with, ComponentFunctions, FitDiagnostics,
    FittedModel, Smoothers,
};
pub use certificate::{stationarity_certificate, StationarityReport};
pub use config::{FitConfig, LambdaScale, Penalty, PenaltyKind};
pub use data::{load_csv, standardize, Dataset, Standardization};
pub use error::{CramError, ErrorFamily, Result};
pub use path::{default_lambda_grid, rank_path, PathPoint};
pub use penalty::{objective, penalty_value};
pub use persist::{export_curves, load_model, save_model};
pub use smoothing::{build_smoother, weight_row_at, Kernel, SmootherMatrix, SmootherSpec};
