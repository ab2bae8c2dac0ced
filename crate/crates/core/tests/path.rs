mod common;

use common::*;
use cram::experiments::{generate_synthetic, SyntheticSpec};
use cram::nalgebra::DMatrix;
use cram::path::{fit_path, log_grid};
use cram::{default_lambda_grid, rank_path, standardize, Dataset, FitConfig, Kernel, Penalty};
use rand::Rng;

#[test]
fn endpoints_give_full_and_zero_rank() {
    let data = standardize(
        &generate_synthetic(&SyntheticSpec {
            n: 80,
            seed: 1,
            ..Default::default()
        })
        .unwrap(),
    )
    .unwrap();
    let config = FitConfig::with_default_smoothers(&data, Penalty::Joint { lambda: 0.0 }).unwrap();
    let path = rank_path(&data, &config, &[0.0, 1e6]).unwrap();
    assert_eq!(path[0].rank, 3);
    assert_eq!(path[1].rank, 0);
}

#[test]
fn low_rank_linear_path_is_nonincreasing() {
    let mut r = rng(60);
    let n = 150;
    let x = DMatrix::from_fn(n, 4, |_, _| r.gen_range(-2.0..2.0));
    let a = DMatrix::from_column_slice(4, 1, &[1.0, 0.5, -0.5, 0.8]);
    let b = DMatrix::from_row_slice(1, 3, &[0.6, -1.0, 0.9]);
    let y = &x * &a * &b + gaussian(n, 3, &mut r) * 0.3;
    let data = standardize(&Dataset::new(x, y).unwrap()).unwrap();
    let config =
        FitConfig::with_uniform_smoother(4, Penalty::Joint { lambda: 0.0 }, Kernel::Gaussian, 1.0)
            .unwrap();
    let grid = default_lambda_grid(&data, &config, 30).unwrap();
    let path = rank_path(&data, &config, &grid).unwrap();
    assert!(path.windows(2).all(|w| w[1].rank <= w[0].rank), "{path:?}");
    assert_eq!(path[0].rank, 3);
    assert_eq!(path.last().unwrap().rank, 0);
    assert!(path.iter().any(|pt| pt.rank == 1));
}

#[test]
fn warm_started_path_matches_cold_fits() {
    let data = standardize(
        &generate_synthetic(&SyntheticSpec {
            n: 60,
            seed: 2,
            ..Default::default()
        })
        .unwrap(),
    )
    .unwrap();
    let mut config =
        FitConfig::with_default_smoothers(&data, Penalty::Joint { lambda: 0.0 }).unwrap();
    config.tol = 1e-12;
    config.max_sweeps = 5000;
    let grid = [0.05, 0.2, 0.6];
    let warm = fit_path(&data, &config, &grid).unwrap();
    for (m, &l) in warm.iter().zip(&grid) {
        let cold = cram::fit(&data, &config.with_lambda(l)).unwrap();
        assert!(max_abs_diff(&m.fitted_values(), &cold.fitted_values()) < 1e-8);
    }
}

#[test]
fn grid_validation() {
    let data = standardize(
        &generate_synthetic(&SyntheticSpec {
            n: 40,
            seed: 3,
            ..Default::default()
        })
        .unwrap(),
    )
    .unwrap();
    let config = FitConfig::with_default_smoothers(&data, Penalty::Joint { lambda: 0.0 }).unwrap();
    assert!(rank_path(&data, &config, &[0.5]).is_err());
    assert!(rank_path(&data, &config, &[0.5, 0.1]).is_err());
    let g = log_grid(1e-3, 1.0, 4);
    assert!((g[0] - 1e-3).abs() < 1e-15 && (g[3] - 1.0).abs() < 1e-12);
}
