//! K-fold cross-validation over a lambda grid.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::FitConfig;
use crate::data::{standardize, Dataset};
use crate::error::{CramError, Result};
use crate::path::fit_path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    /// Grid value with the smallest mean held-out error.
    #[default]
    Min,
    /// Largest grid value within one standard error of the minimum.
    OneSe,
}

impl std::str::FromStr for SelectionRule {
    type Err = CramError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min" => Ok(SelectionRule::Min),
            "1se" | "one-se" => Ok(SelectionRule::OneSe),
            other => Err(CramError::InvalidArgument(format!(
                "unknown selection rule '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvReport {
    pub lambda_grid: Vec<f64>,
    /// Mean over folds of the held-out error, per grid value.
    pub cv_error: Vec<f64>,
    /// Standard error of that mean, per grid value.
    pub cv_se: Vec<f64>,
    /// `fold_errors[l][f]`: held-out error of fold `f` at grid value `l`.
    pub fold_errors: Vec<Vec<f64>>,
    pub selected_index: usize,
    pub selected_lambda: f64,
    pub rule: SelectionRule,
    pub seed: u64,
}

/// Fold label for each row: a seeded permutation cut into `k` contiguous
/// blocks whose sizes differ by at most one.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![0; n];
    for (pos, &row) in order.iter().enumerate() {
        folds[row] = pos * k / n;
    }
    folds
}

/// Mean over rows of the squared Euclidean prediction error.
pub fn mean_squared_error(y: &DMatrix<f64>, pred: &DMatrix<f64>) -> f64 {
    (y - pred).norm_squared() / y.nrows() as f64
}

fn select(cv_error: &[f64], cv_se: &[f64], grid: &[f64], rule: SelectionRule) -> usize {
    let best = cv_error
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    match rule {
        SelectionRule::Min => best,
        SelectionRule::OneSe => {
            let cap = cv_error[best] + cv_se[best];
            (0..grid.len())
                .filter(|&i| cv_error[i] <= cap)
                .max_by(|&a, &b| grid[a].total_cmp(&grid[b]))
                .unwrap_or(best)
        }
    }
}

/// Held-out errors are measured on the scale of `data`. Each training split
/// is re-standardized before fitting; the bandwidths in `config` are used as
/// given.
pub fn kfold_cv(
    data: &Dataset,
    config: &FitConfig,
    lambda_grid: &[f64],
    k: usize,
    seed: u64,
    rule: SelectionRule,
) -> Result<CvReport> {
    if k < 2 {
        return Err(CramError::InvalidArgument(format!(
            "need k >= 2 folds, got {k}"
        )));
    }
    if lambda_grid.is_empty() {
        return Err(CramError::InvalidArgument("lambda grid is empty".into()));
    }
    if data.n() < 2 * k {
        return Err(CramError::InvalidArgument(format!(
            "{} rows are too few for {k} folds",
            data.n()
        )));
    }
    config.validate(data.p())?;
    let folds = fold_assignment(data.n(), k, seed);

    let per_fold: Vec<Vec<f64>> = (0..k)
        .into_par_iter()
        .map(|f| {
            let train: Vec<usize> = (0..data.n()).filter(|&i| folds[i] != f).collect();
            let test: Vec<usize> = (0..data.n()).filter(|&i| folds[i] == f).collect();
            let held_out = data.subset(&test);
            let run = || -> Result<Vec<f64>> {
                let train = standardize(&data.subset(&train))?;
                fit_path(&train, config, lambda_grid)?
                    .iter()
                    .map(|m| {
                        Ok(mean_squared_error(
                            &held_out.y,
                            &m.predict_original(&held_out.x)?,
                        ))
                    })
                    .collect()
            };
            run().map_err(|e| CramError::Fold {
                fold: f,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let kf = k as f64;
    let mut fold_errors = Vec::with_capacity(lambda_grid.len());
    let mut cv_error = Vec::with_capacity(lambda_grid.len());
    let mut cv_se = Vec::with_capacity(lambda_grid.len());
    for l in 0..lambda_grid.len() {
        let errs: Vec<f64> = per_fold.iter().map(|fe| fe[l]).collect();
        let mean = errs.iter().sum::<f64>() / kf;
        let var = errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (kf - 1.0);
        cv_error.push(mean);
        cv_se.push((var / kf).sqrt());
        fold_errors.push(errs);
    }
    let selected_index = select(&cv_error, &cv_se, lambda_grid, rule);
    Ok(CvReport {
        lambda_grid: lambda_grid.to_vec(),
        cv_error,
        cv_se,
        fold_errors,
        selected_index,
        selected_lambda: lambda_grid[selected_index],
        rule,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_are_balanced_and_seeded() {
        let f = fold_assignment(23, 5, 3);
        let mut counts = [0; 5];
        for &x in &f {
            counts[x] += 1;
        }
        assert!(counts.iter().all(|&c| c == 4 || c == 5));
        assert_eq!(f, fold_assignment(23, 5, 3));
        assert_ne!(f, fold_assignment(23, 5, 4));
    }

    #[test]
    fn selection_rules() {
        let grid = [0.1, 0.2, 0.4, 0.8];
        let err = [3.0, 1.0, 1.05, 2.0];
        let se = [0.1, 0.1, 0.1, 0.1];
        assert_eq!(select(&err, &se, &grid, SelectionRule::Min), 1);
        assert_eq!(select(&err, &se, &grid, SelectionRule::OneSe), 2);
    }
}
