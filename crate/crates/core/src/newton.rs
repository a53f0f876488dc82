//! Damped Newton's method with Armijo backtracking for the strictly convex
//! row subproblem `l(a) = Σ_j log(1 + exp(−x*_j ⟨a, v_j⟩)) + γ‖a‖²/2`.
//!
//! The same routine solves the loading rows of the batch fit, with the data
//! column and score matrix taking the places of the row and the loadings.

use ndarray::{Array1, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_solve, dot, norm_sq};
use crate::loss::{row_loss_unchecked, score_derivatives};
use crate::model::{Hyperparams, SignedRow};

#[derive(Clone, Debug, PartialEq)]
pub struct NewtonReport {
    pub solution: Array1<f64>,
    /// Accepted Newton steps.
    pub iterations: usize,
    /// Squared Newton decrement ∇lᵀ(∇²l)⁻¹∇l at `solution`.
    pub final_decrement: f64,
    pub converged: bool,
    /// l(solution), regularizer included.
    pub objective: f64,
    /// ‖∇l(solution)‖.
    pub gradient_norm: f64,
    /// l at the start point followed by l after every accepted step.
    pub objective_history: Vec<f64>,
}

const POLISH_STEPS: usize = 2;

fn regularized_value(x: &SignedRow, a: ArrayView1<f64>, loadings: ArrayView2<f64>, gamma: f64) -> f64 {
    row_loss_unchecked(x.values(), a, loadings) + 0.5 * gamma * norm_sq(a)
}

/// Minimizes l starting from a = 0.
pub fn solve_row(
    x: &SignedRow,
    loadings: ArrayView2<f64>,
    gamma: f64,
    params: &Hyperparams,
) -> Result<NewtonReport> {
    let start = Array1::zeros(loadings.ncols());
    solve_row_from(x, loadings, gamma, params, start.view())
}

/// Minimizes l from an arbitrary start point.
pub fn solve_row_from(
    x: &SignedRow,
    loadings: ArrayView2<f64>,
    gamma: f64,
    params: &Hyperparams,
    start: ArrayView1<f64>,
) -> Result<NewtonReport> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "row problem needs gamma > 0 for strict convexity, got {gamma}"
        )));
    }
    if loadings.nrows() != x.len() || loadings.ncols() != start.len() {
        return Err(Error::Dimension(format!(
            "row of length {} against {}x{} loadings with start of length {}",
            x.len(),
            loadings.nrows(),
            loadings.ncols(),
            start.len()
        )));
    }
    if !loadings.iter().chain(start.iter()).all(|v| v.is_finite()) {
        return Err(Error::NonFinite("row subproblem input".into()));
    }

    let mut a = start.to_owned();
    let mut history = Vec::with_capacity(8);
    let mut iterations = 0;
    let mut converged = false;
    let mut polish = 0usize;
    let mut last_decrement = f64::INFINITY;
    let (decrement, gradient_norm, objective) = loop {
        let (loss, grad, hessian) = score_derivatives(x.values(), a.view(), loadings, gamma);
        let value = loss + 0.5 * gamma * norm_sq(a.view());
        if history.is_empty() {
            history.push(value);
        }
        let direction = cholesky_solve(hessian.view(), (-&grad).view())?;
        let slope = dot(grad.view(), direction.view());
        let decrement = -slope;
        let gradient_norm = norm_sq(grad.view()).sqrt();
        if decrement / 2.0 <= params.newton_tol {
            converged = true;
            // Up to two more steps past the tolerance: nearly free at
            // quadratic convergence, and they take the gradient down to
            // rounding level. Stop as soon as the decrement stalls.
            if polish >= POLISH_STEPS || decrement == 0.0 || decrement > 0.1 * last_decrement {
                break (decrement, gradient_norm, value);
            }
            polish += 1;
        }
        if iterations >= params.max_newton_iterations {
            break (decrement, gradient_norm, value);
        }
        last_decrement = decrement;

        // Rounding bound for a naive sum of this many positive terms. Once the
        // predicted decrease drops under it Armijo cannot tell progress from
        // noise, so only the full Newton step is tried and a failure stops.
        let floor = (x.len() as f64 + 4.0) * f64::EPSILON * value.abs().max(1.0);
        let near = converged || decrement / 2.0 <= floor;
        let mut d = params.initial_step;
        let mut accepted = None;
        if near {
            let trial = &a + &direction;
            let trial_value = regularized_value(x, trial.view(), loadings, gamma);
            if trial_value <= value + floor {
                accepted = Some((trial, trial_value));
            }
        } else {
            for _ in 0..=params.max_backtracks {
                let trial = &a + &(&direction * d);
                let trial_value = regularized_value(x, trial.view(), loadings, gamma);
                // a few ulps of slack so steps inside the rounding floor still count
                let noise = 4.0 * f64::EPSILON * value.abs();
                if trial_value <= value + params.armijo_alpha * d * slope + noise {
                    accepted = Some((trial, trial_value));
                    break;
                }
                d *= params.armijo_beta;
            }
        }
        match accepted {
            Some((trial, trial_value)) => {
                a = trial;
                iterations += 1;
                history.push(trial_value);
            }
            // line search exhausted: stop where we are
            None => break (decrement, gradient_norm, value),
        }
    };

    Ok(NewtonReport {
        solution: a,
        iterations,
        final_decrement: decrement,
        converged,
        objective,
        gradient_norm,
        objective_history: history,
    })
}
