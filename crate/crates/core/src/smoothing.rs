//! Local-linear kernel smoothers.
//!
//! A smoother for covariate `j` is the dense `n x n` matrix whose row `i`
//! holds the local-linear weights at `x_i`. Prediction at a new point uses the
//! same formula anchored at that point ([`weight_row_at`]).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CramError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    /// `exp(-u^2 / 2)`
    Gaussian,
    /// `max(0, 1 - u^2)`, support `|u| <= 1`
    Epanechnikov,
}

impl Kernel {
    /// Log of the kernel value, `None` outside the support.
    fn log_weight(self, u: f64) -> Option<f64> {
        match self {
            Kernel::Gaussian => Some(-0.5 * u * u),
            Kernel::Epanechnikov => {
                let k = 1.0 - u * u;
                (k > 0.0).then(|| k.ln())
            }
        }
    }
}

impl std::str::FromStr for Kernel {
    type Err = CramError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Kernel::Gaussian),
            "epanechnikov" => Ok(Kernel::Epanechnikov),
            other => Err(CramError::InvalidArgument(format!(
                "unknown kernel '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothingMethod {
    #[default]
    LocalLinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmootherSpec {
    pub kernel: Kernel,
    /// In covariate units.
    pub bandwidth: f64,
    #[serde(default)]
    pub method: SmoothingMethod,
}

impl SmootherSpec {
    pub fn new(kernel: Kernel, bandwidth: f64) -> Result<Self> {
        let spec = SmootherSpec {
            kernel,
            bandwidth,
            method: SmoothingMethod::LocalLinear,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Gaussian kernel with the rule-of-thumb bandwidth for `x`.
    pub fn default_for(x: &[f64]) -> Result<Self> {
        SmootherSpec::new(Kernel::Gaussian, rule_of_thumb_bandwidth(x)?)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth > 0.0) || !self.bandwidth.is_finite() {
            return Err(CramError::InvalidArgument(format!(
                "bandwidth must be positive and finite, got {}",
                self.bandwidth
            )));
        }
        Ok(())
    }
}

/// `1.06 * sd(x) * n^(-1/5)`.
pub fn rule_of_thumb_bandwidth(x: &[f64]) -> Result<f64> {
    let n = x.len();
    if n < 2 {
        return Err(CramError::InvalidArgument(
            "bandwidth rule needs at least two points".into(),
        ));
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let h = 1.06 * var.sqrt() * (n as f64).powf(-0.2);
    if !(h > 0.0) || !h.is_finite() {
        return Err(CramError::InvalidArgument(
            "cannot pick a bandwidth for a constant covariate".into(),
        ));
    }
    Ok(h)
}

/// Dense linear smoother for one covariate.
#[derive(Debug, Clone, PartialEq)]
pub struct SmootherMatrix {
    pub weights: DMatrix<f64>,
    pub anchor: DVector<f64>,
}

impl SmootherMatrix {
    pub fn n(&self) -> usize {
        self.anchor.len()
    }

    /// `S * z` for a sample-major block `z`.
    pub fn smooth(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        &self.weights * z
    }
}

fn check_design(x: &[f64], spec: &SmootherSpec) -> Result<()> {
    spec.validate()?;
    if x.len() < 3 {
        return Err(CramError::InvalidArgument(format!(
            "smoother needs at least 3 points, got {}",
            x.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(CramError::InvalidArgument(
            "non-finite covariate value".into(),
        ));
    }
    Ok(())
}

/// Fills `out` with the local-linear weights at `x0`. `row` is only used to
/// label errors.
fn local_linear_row(
    x: &[f64],
    spec: &SmootherSpec,
    x0: f64,
    row: usize,
    out: &mut [f64],
) -> Result<()> {
    let h = spec.bandwidth;
    // Kernel weights are rescaled by their maximum; the local-linear formula is
    // homogeneous in them so this only guards against underflow.
    let mut log_max = f64::NEG_INFINITY;
    for (o, &xl) in out.iter_mut().zip(x) {
        let lw = spec
            .kernel
            .log_weight((xl - x0) / h)
            .unwrap_or(f64::NEG_INFINITY);
        *o = lw;
        log_max = log_max.max(lw);
    }
    if log_max == f64::NEG_INFINITY {
        return Err(CramError::DegenerateSmoother { row, x0 });
    }
    let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
    for (o, &xl) in out.iter_mut().zip(x) {
        let w = (*o - log_max).exp();
        *o = w;
        let d = xl - x0;
        s0 += w;
        s1 += w * d;
        s2 += w * d * d;
    }
    if !(s0 > 0.0) || !s0.is_finite() {
        return Err(CramError::DegenerateSmoother { row, x0 });
    }
    let det = s0 * s2 - s1 * s1;
    if det > 1e-10 * s0 * s2 && det > 0.0 {
        for (o, &xl) in out.iter_mut().zip(x) {
            *o *= (s2 - (xl - x0) * s1) / det;
        }
    } else {
        // every in-window point sits at one location: local-constant fallback
        for o in out.iter_mut() {
            *o /= s0;
        }
    }
    Ok(())
}

pub fn build_smoother(x: &[f64], spec: &SmootherSpec) -> Result<SmootherMatrix> {
    check_design(x, spec)?;
    let n = x.len();
    // filled row by row into a row-major buffer
    let mut buf = vec![0.0; n * n];
    for (i, row) in buf.chunks_mut(n).enumerate() {
        local_linear_row(x, spec, x[i], i, row)?;
    }
    Ok(SmootherMatrix {
        weights: DMatrix::from_row_slice(n, n, &buf),
        anchor: DVector::from_column_slice(x),
    })
}

/// Local-linear weight row anchored at an arbitrary point `x0`.
pub fn weight_row_at(x: &[f64], spec: &SmootherSpec, x0: f64) -> Result<DVector<f64>> {
    check_design(x, spec)?;
    if !x0.is_finite() {
        return Err(CramError::InvalidArgument(
            "non-finite evaluation point".into(),
        ));
    }
    let mut out = vec![0.0; x.len()];
    local_linear_row(x, spec, x0, 0, &mut out)?;
    Ok(DVector::from_vec(out))
}

/// Stacks weight rows for several evaluation points into an `m x n` matrix.
pub fn weight_rows_at(x: &[f64], spec: &SmootherSpec, points: &[f64]) -> Result<DMatrix<f64>> {
    check_design(x, spec)?;
    let n = x.len();
    let mut buf = vec![0.0; points.len() * n];
    for (i, (row, &x0)) in buf.chunks_mut(n).zip(points).enumerate() {
        if !x0.is_finite() {
            return Err(CramError::InvalidArgument(
                "non-finite evaluation point".into(),
            ));
        }
        local_linear_row(x, spec, x0, i, row)?;
    }
    Ok(DMatrix::from_row_slice(points.len(), n, &buf))
}
