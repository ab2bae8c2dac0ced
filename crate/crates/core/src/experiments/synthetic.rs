//! The four-covariate, three-response synthetic model: every response
//! coordinate shares the components `sin(2x)`, `x^2 - c2`, `x` and
//! `exp(-x) - c4`, with `c2`, `c4` the means under the covariate law.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::Dataset;
use crate::error::{CramError, Result};

pub const SYNTHETIC_P: usize = 4;
pub const SYNTHETIC_Q: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub sigma: f64,
    pub seed: u64,
    pub x_low: f64,
    pub x_high: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n: 150,
            sigma: 1.0,
            seed: 0,
            x_low: -2.0,
            x_high: 2.0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 10 {
            return Err(CramError::InvalidArgument(format!(
                "synthetic n must be >= 10, got {}",
                self.n
            )));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(CramError::InvalidArgument(
                "sigma must be finite and nonnegative".into(),
            ));
        }
        if !(self.x_low < self.x_high) || !self.x_low.is_finite() || !self.x_high.is_finite() {
            return Err(CramError::InvalidArgument(
                "need finite x_low < x_high".into(),
            ));
        }
        Ok(())
    }

    /// `(c2, c4)`: means of `x^2` and `exp(-x)` for `x ~ U[x_low, x_high]`.
    pub fn centering_constants(&self) -> (f64, f64) {
        let (a, b) = (self.x_low, self.x_high);
        let c2 = (a * a + a * b + b * b) / 3.0;
        let c4 = ((-a).exp() - (-b).exp()) / (b - a);
        (c2, c4)
    }

    /// The true component `m_j` (0-based `j`), identical for every response.
    pub fn true_function(&self, j: usize, x: f64) -> f64 {
        let (c2, c4) = self.centering_constants();
        match j {
            0 => (2.0 * x).sin(),
            1 => x * x - c2,
            2 => x,
            3 => (-x).exp() - c4,
            _ => panic!("synthetic model has {SYNTHETIC_P} covariates"),
        }
    }

    /// True component matrices `[m_j(X_ij)]` (each `n x q`, raw covariate scale).
    pub fn true_components(&self, x_raw: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        (0..SYNTHETIC_P)
            .map(|j| {
                DMatrix::from_fn(x_raw.nrows(), SYNTHETIC_Q, |i, _| {
                    self.true_function(j, x_raw[(i, j)])
                })
            })
            .collect()
    }

    pub fn true_mean(&self, x_raw: &DMatrix<f64>) -> DMatrix<f64> {
        let mut total = DMatrix::zeros(x_raw.nrows(), SYNTHETIC_Q);
        for m in self.true_components(x_raw) {
            total += m;
        }
        total
    }
}

/// Draws a raw (unstandardized) dataset. Deterministic in `spec.seed`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut x = DMatrix::zeros(spec.n, SYNTHETIC_P);
    for i in 0..spec.n {
        for j in 0..SYNTHETIC_P {
            x[(i, j)] = rng.gen_range(spec.x_low..spec.x_high);
        }
    }
    let mut y = spec.true_mean(&x);
    for i in 0..spec.n {
        for k in 0..SYNTHETIC_Q {
            let z: f64 = rng.sample(StandardNormal);
            y[(i, k)] += spec.sigma * z;
        }
    }
    Dataset::new(x, y)
}
