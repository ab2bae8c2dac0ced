//! Regularization paths over a lambda grid.

use serde::Serialize;

use crate::backfit::{fit_with, FittedModel, Smoothers};
use crate::config::{FitConfig, Penalty};
use crate::data::Dataset;
use crate::error::{CramError, Result};
use crate::linalg::scaled_spectral_norm;
use crate::penalty::objective;

pub const DEFAULT_GRID_SIZE: usize = 30;
pub const DEFAULT_GRID_MIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathPoint {
    pub lambda: f64,
    pub rank: usize,
    pub objective: f64,
}

/// Smallest lambda at which every backfitting step started from zero returns
/// zero: the scaled spectral norm of the smoothed responses (largest over
/// covariates for the per-component penalty, of the stack for the joint one).
pub fn zero_fit_threshold(data: &Dataset, smoothers: &Smoothers, penalty: &Penalty) -> f64 {
    let smoothed: Vec<_> = smoothers.0.iter().map(|s| s.smooth(&data.y)).collect();
    match penalty {
        Penalty::PerComponent { .. } => smoothed
            .iter()
            .map(scaled_spectral_norm)
            .fold(0.0, f64::max),
        Penalty::Joint { .. } => {
            let n = data.n();
            let mut stacked = nalgebra::DMatrix::zeros(n * smoothed.len(), data.q());
            for (j, s) in smoothed.iter().enumerate() {
                stacked.rows_mut(j * n, n).copy_from(s);
            }
            scaled_spectral_norm(&stacked) * (smoothed.len() as f64).sqrt()
        }
    }
}

/// Doubles from `DEFAULT_GRID_MIN` until the fit is identically zero.
pub fn lambda_max(data: &Dataset, smoothers: &Smoothers, penalty: &Penalty) -> f64 {
    let threshold = zero_fit_threshold(data, smoothers, penalty);
    let mut lambda = DEFAULT_GRID_MIN * 2.0;
    while lambda < threshold {
        lambda *= 2.0;
    }
    lambda
}

/// `size` log-spaced values from `DEFAULT_GRID_MIN` to [`lambda_max`].
pub fn default_lambda_grid(data: &Dataset, config: &FitConfig, size: usize) -> Result<Vec<f64>> {
    let smoothers = Smoothers::build(data, config)?;
    Ok(log_grid(
        DEFAULT_GRID_MIN,
        lambda_max(data, &smoothers, &config.penalty),
        size,
    ))
}

pub fn log_grid(lo: f64, hi: f64, size: usize) -> Vec<f64> {
    match size {
        0 => Vec::new(),
        1 => vec![hi],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..size)
                .map(|i| {
                    if i == size - 1 {
                        hi
                    } else {
                        (a + (b - a) * i as f64 / (size - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(CramError::InvalidArgument("lambda grid is empty".into()));
    }
    if grid.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
        return Err(CramError::InvalidArgument(
            "lambda grid must be finite and nonnegative".into(),
        ));
    }
    if grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(CramError::InvalidArgument(
            "lambda grid must be ascending".into(),
        ));
    }
    Ok(())
}

/// Fits along an ascending grid, warm-starting each fit from the previous one.
pub fn fit_path(data: &Dataset, config: &FitConfig, grid: &[f64]) -> Result<Vec<FittedModel>> {
    check_grid(grid)?;
    let smoothers = Smoothers::build(data, config)?;
    let mut fits: Vec<FittedModel> = Vec::with_capacity(grid.len());
    for (index, &lambda) in grid.iter().enumerate() {
        let cfg = config.with_lambda(lambda);
        let model = fit_with(data, &cfg, &smoothers, fits.last()).map_err(|e| CramError::Path {
            index,
            source: Box::new(e),
        })?;
        fits.push(model);
    }
    Ok(fits)
}

/// `(lambda, rank, objective)` along an ascending grid of at least two points.
pub fn rank_path(data: &Dataset, config: &FitConfig, grid: &[f64]) -> Result<Vec<PathPoint>> {
    if grid.len() < 2 {
        return Err(CramError::InvalidArgument(
            "rank path needs at least two grid points".into(),
        ));
    }
    fit_path(data, config, grid)?
        .iter()
        .zip(grid)
        .map(|(m, &lambda)| {
            Ok(PathPoint {
                lambda,
                rank: m.rank(),
                objective: objective(data, m)?,
            })
        })
        .collect()
}
