//! Backfitting for constrained rank additive models.
//!
//! Each inner step forms the partial residual `Z_j = Y - sum_{j' != j} M_j'`,
//! smooths it (`P_j = S_j Z_j`), shrinks the eigendirections of its second
//! moment matrix and column-centers the result. The per-component penalty
//! shrinks each `P_j` on its own; the joint penalty shrinks the stacked
//! `[P_1; ...; P_p]` with a shared operator and refreshes every block.

use nalgebra::{DMatrix, DVector};

use crate::config::{FitConfig, Penalty, PenaltyKind};
use crate::data::{Dataset, Standardization};
use crate::error::{CramError, Result};
use crate::linalg::{gram, numerical_rank, Shrinkage};
use crate::penalty;
use crate::smoothing::{build_smoother, weight_rows_at, SmootherMatrix};

/// Fitted function values `M_j`, one `n x q` block per covariate.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentFunctions {
    pub components: Vec<DMatrix<f64>>,
}

impl ComponentFunctions {
    pub fn zeros(p: usize, n: usize, q: usize) -> Self {
        ComponentFunctions {
            components: vec![DMatrix::zeros(n, q); p],
        }
    }

    pub fn p(&self) -> usize {
        self.components.len()
    }

    /// `sum_j M_j`.
    pub fn fitted(&self) -> DMatrix<f64> {
        let mut it = self.components.iter();
        let mut total = it.next().cloned().unwrap_or_else(|| DMatrix::zeros(0, 0));
        for m in it {
            total += m;
        }
        total
    }

    /// `M_{1:p}`, the `np x q` vertical stack.
    pub fn stacked(&self) -> DMatrix<f64> {
        let Some(first) = self.components.first() else {
            return DMatrix::zeros(0, 0);
        };
        let (n, q) = first.shape();
        let mut out = DMatrix::zeros(n * self.p(), q);
        for (j, m) in self.components.iter().enumerate() {
            out.rows_mut(j * n, n).copy_from(m);
        }
        out
    }

    pub fn max_abs_column_mean(&self) -> f64 {
        self.components
            .iter()
            .flat_map(|m| m.column_iter().map(|c| c.mean().abs()).collect::<Vec<_>>())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitDiagnostics {
    pub sweeps_run: usize,
    pub objective_trace: Vec<f64>,
    pub component_ranks: Vec<usize>,
    /// Numerical rank of the stacked `np x q` fitted block.
    pub joint_rank: usize,
    pub converged: bool,
    /// Convergence measure of the last sweep.
    pub last_change: f64,
}

/// A fitted model. Everything needed to evaluate the component functions at
/// new covariate values is kept: for covariate `j`, `m_j(x) = (w_j(x)^T Z_j) T_j - c_j`
/// with `w_j(x)` the local-linear weights at `x`, `T_j` the final shrinkage
/// operator and `c_j` the centering offset.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedModel {
    pub components: ComponentFunctions,
    /// Standardized training covariates, `n x p`.
    pub train_x: DMatrix<f64>,
    /// Partial residuals `Z_j` at each coordinate's last refresh.
    pub residual_targets: Vec<DMatrix<f64>>,
    pub shrinkage: Vec<Shrinkage>,
    pub offsets: Vec<DVector<f64>>,
    pub config: FitConfig,
    pub standardization: Standardization,
    pub x_names: Vec<String>,
    pub y_names: Vec<String>,
    pub diagnostics: FitDiagnostics,
}

/// Smoother matrices for every covariate of a dataset, reusable across fits
/// that share the same design and specs.
#[derive(Debug, Clone)]
pub struct Smoothers(pub Vec<SmootherMatrix>);

impl Smoothers {
    pub fn build(data: &Dataset, config: &FitConfig) -> Result<Self> {
        config.validate(data.p())?;
        (0..data.p())
            .map(|j| build_smoother(&data.covariate(j), &config.smoothers[j]))
            .collect::<Result<Vec<_>>>()
            .map(Smoothers)
    }
}

/// Fits with the algorithm matching `config.penalty`.
pub fn fit(data: &Dataset, config: &FitConfig) -> Result<FittedModel> {
    let smoothers = Smoothers::build(data, config)?;
    fit_with(data, config, &smoothers, None)
}

/// Per-component penalty: each `M_j` is shrunk on its own.
pub fn backfit_per_component(data: &Dataset, config: &FitConfig) -> Result<FittedModel> {
    if config.penalty.kind() != PenaltyKind::PerComponent {
        return Err(CramError::Contract(
            "backfit_per_component needs a per-component penalty".into(),
        ));
    }
    fit(data, config)
}

/// Joint penalty: the stacked components are shrunk together.
pub fn backfit_joint(data: &Dataset, config: &FitConfig) -> Result<FittedModel> {
    if config.penalty.kind() != PenaltyKind::Joint {
        return Err(CramError::Contract(
            "backfit_joint needs a joint penalty".into(),
        ));
    }
    fit(data, config)
}

/// Mutable state of one backfitting run.
struct Sweeper<'a> {
    y: &'a DMatrix<f64>,
    smoothers: &'a [SmootherMatrix],
    n: usize,
    rank_tol: f64,
    m: Vec<DMatrix<f64>>,
    z: Vec<DMatrix<f64>>,
    smoothed: Vec<DMatrix<f64>>,
    grams: Vec<DMatrix<f64>>,
    shrinkage: Vec<Shrinkage>,
    offsets: Vec<DVector<f64>>,
    total: DMatrix<f64>,
}

impl<'a> Sweeper<'a> {
    fn new(
        y: &'a DMatrix<f64>,
        smoothers: &'a [SmootherMatrix],
        rank_tol: f64,
        warm: Option<&FittedModel>,
    ) -> Result<Self> {
        let (n, q) = y.shape();
        let p = smoothers.len();
        let zero_shrink = Shrinkage::from_gram(&DMatrix::zeros(q, q), 0.0, rank_tol)?;
        let mut s = Sweeper {
            y,
            smoothers,
            n,
            rank_tol,
            m: vec![DMatrix::zeros(n, q); p],
            z: vec![DMatrix::zeros(n, q); p],
            smoothed: vec![DMatrix::zeros(n, q); p],
            grams: vec![DMatrix::zeros(q, q); p],
            shrinkage: vec![zero_shrink; p],
            offsets: vec![DVector::zeros(q); p],
            total: DMatrix::zeros(n, q),
        };
        if let Some(prev) = warm {
            if prev.components.p() != p
                || prev.train_x.nrows() != n
                || prev.components.components[0].ncols() != q
            {
                return Err(CramError::Contract(
                    "warm start does not match the dataset".into(),
                ));
            }
            for j in 0..p {
                s.m[j] = prev.components.components[j].clone();
                s.z[j] = prev.residual_targets[j].clone();
                s.smoothed[j] = smoothers[j].smooth(&s.z[j]);
                s.grams[j] = gram(&s.smoothed[j], n);
                s.shrinkage[j] = prev.shrinkage[j].clone();
                s.offsets[j] = prev.offsets[j].clone();
            }
            s.total = ComponentFunctions {
                components: s.m.clone(),
            }
            .fitted();
        }
        Ok(s)
    }

    /// Steps 1-2: partial residual and its smooth for coordinate `j`.
    fn refresh(&mut self, j: usize, sweep: usize) -> Result<()> {
        let z = self.y - (&self.total - &self.m[j]);
        if z.iter().any(|v| !v.is_finite()) {
            return Err(CramError::NonFinite {
                sweep,
                coordinate: j + 1,
            });
        }
        self.smoothed[j] = self.smoothers[j].smooth(&z);
        self.grams[j] = gram(&self.smoothed[j], self.n);
        if self.grams[j].iter().any(|v| !v.is_finite()) {
            return Err(CramError::NonFinite {
                sweep,
                coordinate: j + 1,
            });
        }
        self.z[j] = z;
        Ok(())
    }

    /// Steps 4-5 for block `j` given its shrinkage operator.
    fn set_block(&mut self, j: usize, shrink: Shrinkage) {
        let mut block = shrink.apply(&self.smoothed[j]);
        let means = DVector::from_iterator(block.ncols(), block.column_iter().map(|c| c.mean()));
        for (mut col, mu) in block.column_iter_mut().zip(means.iter()) {
            col.add_scalar_mut(-mu);
        }
        self.total -= &self.m[j];
        self.total += &block;
        self.m[j] = block;
        self.offsets[j] = means;
        self.shrinkage[j] = shrink;
    }

    fn step(&mut self, penalty: &Penalty, sweep: usize) -> Result<()> {
        let p = self.m.len();
        for j in 0..p {
            self.refresh(j, sweep)?;
            match penalty {
                Penalty::PerComponent { lambdas } => {
                    let shrink = Shrinkage::from_gram(&self.grams[j], lambdas[j], self.rank_tol)?;
                    self.set_block(j, shrink);
                }
                Penalty::Joint { lambda } => {
                    let mut total_gram = self.grams[0].clone();
                    for g in &self.grams[1..] {
                        total_gram += g;
                    }
                    let shrink = Shrinkage::from_gram(&total_gram, *lambda, self.rank_tol)?;
                    for jj in 0..p {
                        self.set_block(jj, shrink.clone());
                    }
                }
            }
        }
        Ok(())
    }
}

/// Backfitting with precomputed smoothers, optionally warm-started from a
/// previous fit on the same data.
pub fn fit_with(
    data: &Dataset,
    config: &FitConfig,
    smoothers: &Smoothers,
    warm: Option<&FittedModel>,
) -> Result<FittedModel> {
    config.validate(data.p())?;
    data.ensure_standardized()?;
    if smoothers.0.len() != data.p() || smoothers.0.iter().any(|s| s.n() != data.n()) {
        return Err(CramError::Contract(
            "smoothers do not match the dataset".into(),
        ));
    }

    let n = data.n();
    let mut sweeper = Sweeper::new(&data.y, &smoothers.0, config.rank_tol, warm)?;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut change = f64::INFINITY;
    let mut sweeps = 0;

    while sweeps < config.max_sweeps {
        sweeps += 1;
        let before = sweeper.m.clone();
        sweeper.step(&config.penalty, sweeps)?;

        change = before
            .iter()
            .zip(&sweeper.m)
            .map(|(old, new)| (new - old).norm() / (1.0 + old.norm()))
            .fold(0.0, f64::max);
        let comps = ComponentFunctions {
            components: sweeper.m.clone(),
        };
        trace.push(penalty::objective_of(&data.y, &comps, &config.penalty));
        if !change.is_finite() {
            return Err(CramError::NonFinite {
                sweep: sweeps,
                coordinate: 0,
            });
        }
        if change < config.tol {
            converged = true;
            break;
        }
    }

    let components = ComponentFunctions {
        components: sweeper.m,
    };
    let component_ranks = components
        .components
        .iter()
        .map(|m| numerical_rank(m, config.rank_tol))
        .collect();
    let joint_rank = numerical_rank(&components.stacked(), config.rank_tol);
    debug_assert_eq!(components.components[0].nrows(), n);

    Ok(FittedModel {
        components,
        train_x: data.x.clone(),
        residual_targets: sweeper.z,
        shrinkage: sweeper.shrinkage,
        offsets: sweeper.offsets,
        config: config.clone(),
        standardization: data.standardization.clone().expect("checked above"),
        x_names: data.x_names.clone(),
        y_names: data.y_names.clone(),
        diagnostics: FitDiagnostics {
            sweeps_run: sweeps,
            objective_trace: trace,
            component_ranks,
            joint_rank,
            converged,
            last_change: change,
        },
    })
}

impl FittedModel {
    pub fn n(&self) -> usize {
        self.train_x.nrows()
    }

    pub fn p(&self) -> usize {
        self.train_x.ncols()
    }

    pub fn q(&self) -> usize {
        self.offsets.first().map_or(0, |o| o.len())
    }

    /// Joint rank for the joint penalty, largest component rank otherwise.
    pub fn rank(&self) -> usize {
        match self.config.penalty.kind() {
            PenaltyKind::Joint => self.diagnostics.joint_rank,
            PenaltyKind::PerComponent => self
                .diagnostics
                .component_ranks
                .iter()
                .copied()
                .max()
                .unwrap_or(0),
        }
    }

    pub fn fitted_values(&self) -> DMatrix<f64> {
        self.components.fitted()
    }

    /// `m_j` evaluated at standardized covariate values `points`, `len x q`.
    pub fn component_at(&self, j: usize, points: &[f64]) -> Result<DMatrix<f64>> {
        if j >= self.p() {
            return Err(CramError::InvalidArgument(format!("no covariate {j}")));
        }
        let anchor: Vec<f64> = self.train_x.column(j).iter().copied().collect();
        let w = weight_rows_at(&anchor, &self.config.smoothers[j], points)?;
        let mut values = self.shrinkage[j].apply(&(w * &self.residual_targets[j]));
        for (mut col, c) in values.column_iter_mut().zip(self.offsets[j].iter()) {
            col.add_scalar_mut(-c);
        }
        Ok(values)
    }

    /// Per-covariate component values at standardized inputs `x_new` (`m x p`).
    pub fn predict_components(&self, x_new: &DMatrix<f64>) -> Result<Vec<DMatrix<f64>>> {
        if x_new.ncols() != self.p() {
            return Err(CramError::shape(
                "predict",
                format!("{} columns", self.p()),
                format!("{} columns", x_new.ncols()),
            ));
        }
        (0..self.p())
            .map(|j| {
                let pts: Vec<f64> = x_new.column(j).iter().copied().collect();
                self.component_at(j, &pts)
            })
            .collect()
    }

    /// Predictions on the standardized scale (centered responses) for
    /// standardized inputs.
    pub fn predict(&self, x_new: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let parts = self.predict_components(x_new)?;
        let mut out = DMatrix::zeros(x_new.nrows(), self.q());
        for part in parts {
            out += part;
        }
        Ok(out)
    }

    /// Predictions for the covariates of a standardized dataset; raw datasets
    /// are a contract error (use [`FittedModel::predict_original`]).
    pub fn predict_data(&self, data: &Dataset) -> Result<DMatrix<f64>> {
        if data.standardization.is_none() {
            return Err(CramError::Contract(
                "prediction inputs are not standardized; use predict_original for raw covariates"
                    .into(),
            ));
        }
        self.predict(&data.x)
    }

    /// Predictions on the original response scale for inputs on the original
    /// covariate scale.
    pub fn predict_original(&self, x_raw: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let x = self.standardization.apply_x(x_raw)?;
        Ok(self.standardization.restore_y(&self.predict(&x)?))
    }
}
