//! Penalty and objective evaluation.

use nalgebra::DMatrix;

use crate::backfit::{ComponentFunctions, FittedModel};
use crate::config::Penalty;
use crate::data::Dataset;
use crate::error::{CramError, Result};
use crate::linalg::scaled_nuclear_norm;

/// Per-component: `sum_j lambda_j ||M_j||_* / sqrt(n)`.
/// Joint: `lambda ||M_{1:p}||_* / sqrt(n)` with `n` the per-block sample size.
pub fn penalty_value(components: &ComponentFunctions, penalty: &Penalty) -> f64 {
    match penalty {
        Penalty::PerComponent { lambdas } => components
            .components
            .iter()
            .zip(lambdas)
            .map(|(m, &l)| {
                if l == 0.0 {
                    0.0
                } else {
                    l * scaled_nuclear_norm(m)
                }
            })
            .sum(),
        Penalty::Joint { lambda } => {
            if *lambda == 0.0 || components.p() == 0 {
                return 0.0;
            }
            let n = components.components[0].nrows() as f64;
            let stacked = components.stacked();
            // scaled_nuclear_norm divides by sqrt(np); the penalty wants sqrt(n)
            let rows = stacked.nrows() as f64;
            lambda * scaled_nuclear_norm(&stacked) * (rows / n).sqrt()
        }
    }
}

/// `(1/2n)||Y - sum_j M_j||_F^2 + penalty`.
pub fn objective_of(y: &DMatrix<f64>, components: &ComponentFunctions, penalty: &Penalty) -> f64 {
    let n = y.nrows() as f64;
    let resid = if components.p() == 0 {
        y.clone()
    } else {
        y - components.fitted()
    };
    resid.norm_squared() / (2.0 * n) + penalty_value(components, penalty)
}

/// Empirical penalized risk of a fitted model on (standardized) data.
pub fn objective(data: &Dataset, model: &FittedModel) -> Result<f64> {
    if data.n() != model.n() || data.p() != model.p() || data.q() != model.q() {
        return Err(CramError::shape(
            "objective",
            format!("{}x{}x{}", model.n(), model.p(), model.q()),
            format!("{}x{}x{}", data.n(), data.p(), data.q()),
        ));
    }
    Ok(objective_of(
        &data.y,
        &model.components,
        &model.config.penalty,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_components_have_zero_penalty() {
        let c = ComponentFunctions::zeros(3, 10, 2);
        assert_eq!(penalty_value(&c, &Penalty::Joint { lambda: 2.0 }), 0.0);
        assert_eq!(
            penalty_value(
                &c,
                &Penalty::PerComponent {
                    lambdas: vec![1.0; 3]
                }
            ),
            0.0
        );
    }

    #[test]
    fn zero_model_objective_is_half_mean_square() {
        let y = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -3.0, 0.5]);
        let c = ComponentFunctions::zeros(2, 2, 2);
        let v = objective_of(&y, &c, &Penalty::Joint { lambda: 1.0 });
        assert_relative_eq!(v, (1.0 + 4.0 + 9.0 + 0.25) / 4.0);
        assert_eq!(
            objective_of(&DMatrix::zeros(2, 2), &c, &Penalty::Joint { lambda: 1.0 }),
            0.0
        );
    }
}
