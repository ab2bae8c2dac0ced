use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{CramError, Result};
use crate::linalg::DEFAULT_RANK_TOL;
use crate::smoothing::{Kernel, SmootherSpec};

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_SWEEPS: usize = 500;

/// Which functional nuclear-norm penalty is applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Penalty {
    /// `sum_j lambda_j * ||M_j||_*` (scaled), one weight per covariate.
    PerComponent { lambdas: Vec<f64> },
    /// `lambda * ||M_{1:p}||_*` on the stacked `np x q` block.
    Joint { lambda: f64 },
}

impl Penalty {
    pub fn kind(&self) -> PenaltyKind {
        match self {
            Penalty::PerComponent { .. } => PenaltyKind::PerComponent,
            Penalty::Joint { .. } => PenaltyKind::Joint,
        }
    }

    /// Same penalty type with every weight replaced by `lambda`.
    pub fn with_lambda(&self, lambda: f64) -> Penalty {
        match self {
            Penalty::PerComponent { lambdas } => Penalty::PerComponent {
                lambdas: vec![lambda; lambdas.len()],
            },
            Penalty::Joint { .. } => Penalty::Joint { lambda },
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        let check = |l: f64| {
            if l >= 0.0 && l.is_finite() {
                Ok(())
            } else {
                Err(CramError::InvalidArgument(format!(
                    "lambda must be finite and nonnegative, got {l}"
                )))
            }
        };
        match self {
            Penalty::PerComponent { lambdas } => {
                if lambdas.len() != p {
                    return Err(CramError::Contract(format!(
                        "per-component penalty needs {p} lambdas, got {}",
                        lambdas.len()
                    )));
                }
                lambdas.iter().try_for_each(|&l| check(l))
            }
            Penalty::Joint { lambda } => check(*lambda),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyKind {
    PerComponent,
    Joint,
}

impl std::str::FromStr for PenaltyKind {
    type Err = CramError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-component" | "per_component" => Ok(PenaltyKind::PerComponent),
            "joint" => Ok(PenaltyKind::Joint),
            other => Err(CramError::InvalidArgument(format!(
                "unknown penalty '{other}'"
            ))),
        }
    }
}

/// Units in which a user-supplied lambda is expressed.
///
/// `Normalized` is the scale of the fitting objective
/// `(1/2n)||Y - M||_F^2 + lambda * ||M||_* / sqrt(n)`. `Unnormalized` is the
/// scale of `(1/2)||Y - M||_F^2 + lambda * ||M||_*`, which thresholds the raw
/// singular values of the smoothed residuals at `lambda`; it converts to the
/// normalized scale by dividing by `sqrt(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LambdaScale {
    #[default]
    Normalized,
    Unnormalized,
}

impl LambdaScale {
    pub fn to_normalized(self, lambda: f64, n: usize) -> f64 {
        match self {
            LambdaScale::Normalized => lambda,
            LambdaScale::Unnormalized => lambda / (n as f64).sqrt(),
        }
    }
}

impl std::str::FromStr for LambdaScale {
    type Err = CramError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normalized" => Ok(LambdaScale::Normalized),
            "unnormalized" => Ok(LambdaScale::Unnormalized),
            other => Err(CramError::InvalidArgument(format!(
                "unknown lambda scale '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub penalty: Penalty,
    /// One smoother per covariate, bandwidths on the standardized scale.
    pub smoothers: Vec<SmootherSpec>,
    pub max_sweeps: usize,
    /// Stop once `max_j ||dM_j||_F / (1 + ||M_j||_F)` over a sweep drops below this.
    pub tol: f64,
    pub rank_tol: f64,
}

impl FitConfig {
    pub fn new(penalty: Penalty, smoothers: Vec<SmootherSpec>) -> Self {
        FitConfig {
            penalty,
            smoothers,
            max_sweeps: DEFAULT_MAX_SWEEPS,
            tol: DEFAULT_TOL,
            rank_tol: DEFAULT_RANK_TOL,
        }
    }

    /// Gaussian kernels with rule-of-thumb bandwidths picked from `data`.
    pub fn with_default_smoothers(data: &Dataset, penalty: Penalty) -> Result<Self> {
        let smoothers = (0..data.p())
            .map(|j| SmootherSpec::default_for(&data.covariate(j)))
            .collect::<Result<Vec<_>>>()?;
        Ok(FitConfig::new(penalty, smoothers))
    }

    /// Same kernel and bandwidth for every covariate.
    pub fn with_uniform_smoother(
        p: usize,
        penalty: Penalty,
        kernel: Kernel,
        bandwidth: f64,
    ) -> Result<Self> {
        let spec = SmootherSpec::new(kernel, bandwidth)?;
        Ok(FitConfig::new(penalty, vec![spec; p]))
    }

    pub fn with_lambda(&self, lambda: f64) -> FitConfig {
        FitConfig {
            penalty: self.penalty.with_lambda(lambda),
            ..self.clone()
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if p == 0 {
            return Err(CramError::Contract(
                "model needs at least one covariate".into(),
            ));
        }
        self.penalty.validate(p)?;
        if self.smoothers.len() != p {
            return Err(CramError::Contract(format!(
                "expected {p} smoother specs, got {}",
                self.smoothers.len()
            )));
        }
        self.smoothers.iter().try_for_each(SmootherSpec::validate)?;
        if self.max_sweeps == 0 {
            return Err(CramError::InvalidArgument(
                "max_sweeps must be positive".into(),
            ));
        }
        if !(self.tol > 0.0) {
            return Err(CramError::InvalidArgument("tol must be positive".into()));
        }
        if !(self.rank_tol > 0.0 && self.rank_tol < 1.0) {
            return Err(CramError::InvalidArgument(
                "rank_tol must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }
}
