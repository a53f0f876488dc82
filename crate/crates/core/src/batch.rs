//! Batch logistic PCA by alternating minimization.
//!
//! Each alternation solves every score row against the current loadings and
//! then every loading row against the new scores. Both half-steps are exact
//! Newton solves of strictly convex problems, so the regularized objective
//! Σ_t h_t + γ‖A‖²/2 + λ‖V‖²/2 never increases.

use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::frobenius_norm_sq;
use crate::loss::row_loss_unchecked;
use crate::model::{BinaryMatrix, FactorModel, Hyperparams};
use crate::newton::{solve_row_from, NewtonReport};

#[derive(Clone, Debug, PartialEq)]
pub struct BatchConfig {
    pub rank: usize,
    pub max_alternations: usize,
    /// Stop once the relative objective decrease falls below this.
    pub tol: f64,
    pub seed: u64,
    /// Loadings start uniform in [−init_scale, init_scale].
    pub init_scale: f64,
}

impl Default for BatchConfig {
    fn default() -> Self {
        Self {
            rank: 1,
            max_alternations: 500,
            tol: 1e-8,
            seed: 0,
            init_scale: 1e-2,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchFitReport {
    pub model: FactorModel,
    /// Regularized objective after each alternation.
    pub objective_history: Vec<f64>,
    /// (1/N) Σ_t h_t(a*_t, V*), regularizers excluded.
    pub batch_loss: f64,
    pub alternations: usize,
    pub converged: bool,
    /// Largest ‖∇l‖ at termination over the row solves of the last alternation.
    pub max_subproblem_residual: f64,
    /// True when every row solve of the last alternation met the Newton tolerance.
    pub subproblems_converged: bool,
}

/// Σ_t h_t(a_t, V) + γ‖A‖²/2 + λ‖V‖²/2.
pub fn objective(model: &FactorModel, data: &BinaryMatrix, params: &Hyperparams) -> Result<f64> {
    let loss_sum = batch_loss(model, data)? * data.nrows() as f64;
    Ok(loss_sum
        + 0.5 * params.gamma * frobenius_norm_sq(model.scores())
        + 0.5 * params.lambda * frobenius_norm_sq(model.loadings()))
}

/// (1/N) Σ_t h_t(a_t, V).
pub fn batch_loss(model: &FactorModel, data: &BinaryMatrix) -> Result<f64> {
    if model.nrows() != data.nrows() || model.ncols() != data.ncols() {
        return Err(Error::Dimension(format!(
            "model is {}x{}, data is {}x{}",
            model.nrows(),
            model.ncols(),
            data.nrows(),
            data.ncols()
        )));
    }
    let total: f64 = (0..data.nrows())
        .map(|t| {
            row_loss_unchecked(
                data.signed_row(t).values(),
                model.scores().row(t),
                model.loadings(),
            )
        })
        .sum();
    Ok(total / data.nrows() as f64)
}

fn solve_half_step<F>(
    count: usize,
    basis: &Array2<f64>,
    previous: &Array2<f64>,
    weight: f64,
    params: &Hyperparams,
    signs: F,
) -> Result<Vec<NewtonReport>>
where
    F: Fn(usize) -> crate::model::SignedRow + Sync,
{
    (0..count)
        .into_par_iter()
        .map(|i| solve_row_from(&signs(i), basis.view(), weight, params, previous.row(i)))
        .collect()
}

fn stack(reports: &[NewtonReport], rank: usize) -> Array2<f64> {
    let mut out = Array2::zeros((reports.len(), rank));
    for (mut row, rep) in out.axis_iter_mut(Axis(0)).zip(reports) {
        row.assign(&rep.solution);
    }
    out
}

pub fn fit_batch(data: &BinaryMatrix, params: &Hyperparams, config: &BatchConfig) -> Result<BatchFitReport> {
    params.validate()?;
    let (n, p) = (data.nrows(), data.ncols());
    let r = config.rank;
    if r == 0 || r > n.min(p) {
        return Err(Error::InvalidParameter(format!(
            "rank {r} must lie in [1, min(N={n}, P={p})]"
        )));
    }
    if !(config.tol.is_finite() && config.tol > 0.0) || config.max_alternations == 0 {
        return Err(Error::InvalidParameter(
            "batch fit needs tol > 0 and at least one alternation".into(),
        ));
    }
    if params.lambda <= 0.0 {
        return Err(Error::InvalidParameter(
            "batch loading step needs lambda > 0 for strict convexity".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let s = config.init_scale;
    let mut loadings = Array2::from_shape_fn((p, r), |_| rng.random_range(-s..=s));
    let mut scores = Array2::<f64>::zeros((n, r));

    let mut history: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut residual = 0.0;
    let mut sub_ok = true;
    for _ in 0..config.max_alternations {
        let a_reports = solve_half_step(n, &loadings, &scores, params.gamma, params, |t| {
            data.signed_row(t)
        })?;
        scores = stack(&a_reports, r);
        let v_reports = solve_half_step(p, &scores, &loadings, params.lambda, params, |j| {
            data.signed_column(j)
        })?;
        loadings = stack(&v_reports, r);

        residual = a_reports
            .iter()
            .chain(&v_reports)
            .map(|rep| rep.gradient_norm)
            .fold(0.0, f64::max);
        sub_ok = a_reports.iter().chain(&v_reports).all(|rep| rep.converged);

        let model = FactorModel::new(scores.clone(), loadings.clone())?;
        let value = objective(&model, data, params)?;
        let done = history
            .last()
            .is_some_and(|&prev| (prev - value) <= config.tol * prev.abs().max(f64::MIN_POSITIVE));
        history.push(value);
        if done {
            converged = true;
            break;
        }
    }

    let mut model = FactorModel::new(scores, loadings)?;
    model.canonicalize_signs();
    let batch_loss = batch_loss(&model, data)?;
    Ok(BatchFitReport {
        model,
        alternations: history.len(),
        objective_history: history,
        batch_loss,
        converged,
        max_subproblem_residual: residual,
        subproblems_converged: sub_ok,
    })
}

/// Scores for `data` against fixed loadings, one Newton solve per row from
/// zero.
pub fn project_scores(
    data: &BinaryMatrix,
    loadings: &Array2<f64>,
    params: &Hyperparams,
) -> Result<Array2<f64>> {
    if loadings.nrows() != data.ncols() {
        return Err(Error::Dimension(format!(
            "loadings have {} rows, data has {} columns",
            loadings.nrows(),
            data.ncols()
        )));
    }
    let zeros = Array2::zeros((data.nrows(), loadings.ncols()));
    let reports = solve_half_step(data.nrows(), loadings, &zeros, params.gamma, params, |t| {
        data.signed_row(t)
    })?;
    Ok(stack(&reports, loadings.ncols()))
}
