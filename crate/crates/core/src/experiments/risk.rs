//! Held-out risk of the cross-validated joint fit as the sample size grows.

use rayon::prelude::*;
use serde::Serialize;

use crate::backfit::fit;
use crate::config::{FitConfig, Penalty};
use crate::data::standardize;
use crate::error::{CramError, Result};
use crate::experiments::cv::{kfold_cv, mean_squared_error, SelectionRule};
use crate::experiments::synthetic::{generate_synthetic, SyntheticSpec};
use crate::path::{default_lambda_grid, DEFAULT_GRID_SIZE};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskSettings {
    pub folds: usize,
    pub grid_size: usize,
    pub rule: SelectionRule,
    /// Test set size as a multiple of the training size.
    pub test_multiple: usize,
}

impl Default for RiskSettings {
    fn default() -> Self {
        RiskSettings {
            folds: 5,
            grid_size: DEFAULT_GRID_SIZE,
            rule: SelectionRule::Min,
            test_multiple: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskRow {
    pub n: usize,
    pub mean_risk: f64,
    pub se: f64,
    pub risks: Vec<f64>,
}

/// Seeds for the training and test draws of one repetition.
fn rep_seeds(base: u64, n: usize, rep: usize) -> (u64, u64) {
    let s = base
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((n as u64) << 32)
        .wrapping_add(rep as u64);
    (s, s ^ 0xD1B5_4A32_D192_ED03)
}

/// Held-out risk of one CV-tuned joint fit.
pub fn single_risk(
    base: &SyntheticSpec,
    n: usize,
    rep: usize,
    settings: &RiskSettings,
) -> Result<f64> {
    let (train_seed, test_seed) = rep_seeds(base.seed, n, rep);
    let train = generate_synthetic(&SyntheticSpec {
        n,
        seed: train_seed,
        ..*base
    })?;
    let test = generate_synthetic(&SyntheticSpec {
        n: n * settings.test_multiple,
        seed: test_seed,
        ..*base
    })?;
    let train = standardize(&train)?;
    let config = FitConfig::with_default_smoothers(&train, Penalty::Joint { lambda: 0.0 })?;
    let grid = default_lambda_grid(&train, &config, settings.grid_size)?;
    let cv = kfold_cv(
        &train,
        &config,
        &grid,
        settings.folds,
        train_seed,
        settings.rule,
    )?;
    let model = fit(&train, &config.with_lambda(cv.selected_lambda))?;
    let pred = model.predict_original(&test.x)?;
    Ok(mean_squared_error(&test.y, &pred))
}

/// One row per `n`: mean held-out risk over `repetitions` seeded draws and
/// its standard error.
pub fn risk_scaling_study(
    base: &SyntheticSpec,
    n_list: &[usize],
    repetitions: usize,
    settings: &RiskSettings,
) -> Result<Vec<RiskRow>> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CramError::InvalidArgument(
            "n_list must be nonempty and ascending".into(),
        ));
    }
    if repetitions < 5 {
        return Err(CramError::InvalidArgument(format!(
            "need at least 5 repetitions, got {repetitions}"
        )));
    }
    n_list
        .iter()
        .map(|&n| {
            let risks = (0..repetitions)
                .into_par_iter()
                .map(|rep| single_risk(base, n, rep, settings))
                .collect::<Result<Vec<f64>>>()?;
            let r = risks.len() as f64;
            let mean = risks.iter().sum::<f64>() / r;
            let var = risks.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0);
            Ok(RiskRow {
                n,
                mean_risk: mean,
                se: (var / r).sqrt(),
                risks,
            })
        })
        .collect()
}
