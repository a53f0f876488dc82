//! Shared data types: binary observations, factor models, hyperparameters and
//! step-size schedules.

use std::fmt;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An N×P matrix of binary observations. Rows are time steps, columns are
/// monitored variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMatrix {
    data: Array2<u8>,
}

impl BinaryMatrix {
    pub fn from_array(data: Array2<u8>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::Empty(format!(
                "binary matrix must be at least 1x1, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        if let Some((index, &value)) = data.iter().enumerate().find(|(_, &v)| v > 1) {
            return Err(Error::NonBinary {
                index,
                value: value.to_string(),
            });
        }
        Ok(Self { data })
    }

    pub fn from_shape_vec(rows: usize, cols: usize, values: Vec<u8>) -> Result<Self> {
        let data = Array2::from_shape_vec((rows, cols), values)
            .map_err(|e| Error::Dimension(e.to_string()))?;
        Self::from_array(data)
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if let Some((t, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != p) {
            return Err(Error::Dimension(format!(
                "row {t} has length {}, expected {p}",
                r.len()
            )));
        }
        Self::from_shape_vec(n, p, rows.concat())
    }

    pub fn nrows(&self) -> usize {
        self.data.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.data.ncols()
    }

    pub fn get(&self, t: usize, j: usize) -> u8 {
        self.data[[t, j]]
    }

    pub fn row(&self, t: usize) -> ArrayView1<'_, u8> {
        self.data.row(t)
    }

    pub fn as_array(&self) -> ArrayView2<'_, u8> {
        self.data.view()
    }

    /// Signed (±1) view of row `t`.
    pub fn signed_row(&self, t: usize) -> SignedRow {
        SignedRow(self.data.row(t).mapv(|x| 2.0 * f64::from(x) - 1.0))
    }

    /// Signed (±1) view of column `j`, used when the roles of scores and
    /// loadings are exchanged.
    pub fn signed_column(&self, j: usize) -> SignedRow {
        SignedRow(self.data.column(j).mapv(|x| 2.0 * f64::from(x) - 1.0))
    }

    /// Copy of rows `0..len`.
    pub fn prefix(&self, len: usize) -> Result<Self> {
        if len == 0 || len > self.nrows() {
            return Err(Error::OutOfRange {
                index: len,
                len: self.nrows(),
            });
        }
        Ok(Self {
            data: self.data.slice(ndarray::s![..len, ..]).to_owned(),
        })
    }

    pub fn row_sums(&self) -> Vec<usize> {
        self.data
            .axis_iter(Axis(0))
            .map(|r| r.iter().map(|&v| usize::from(v)).sum())
            .collect()
    }
}

/// A row mapped from {0,1} to {−1,+1} by x ↦ 2x − 1.
#[derive(Clone, Debug, PartialEq)]
pub struct SignedRow(Array1<f64>);

impl SignedRow {
    /// Wraps values that are already ±1.
    pub fn from_signs(values: Array1<f64>) -> Result<Self> {
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, &v)| v != 1.0 && v != -1.0)
        {
            return Err(Error::NonSigned { index, value });
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> ArrayView1<'_, f64> {
        self.0.view()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Inverse map (s + 1)/2.
    pub fn to_binary(&self) -> Vec<u8> {
        self.0.iter().map(|&s| if s > 0.0 { 1 } else { 0 }).collect()
    }
}

pub fn signed_transform(x: &[u8]) -> Result<SignedRow> {
    let mut out = Array1::zeros(x.len());
    for (index, (&v, o)) in x.iter().zip(out.iter_mut()).enumerate() {
        *o = match v {
            0 => -1.0,
            1 => 1.0,
            _ => {
                return Err(Error::NonBinary {
                    index,
                    value: v.to_string(),
                })
            }
        };
    }
    Ok(SignedRow(out))
}

/// Low-rank factorization Θ = A·Vᵀ with scores A (N×r) and loadings V (P×r).
#[derive(Clone, Debug, PartialEq)]
pub struct FactorModel {
    scores: Array2<f64>,
    loadings: Array2<f64>,
}

impl FactorModel {
    pub fn new(scores: Array2<f64>, loadings: Array2<f64>) -> Result<Self> {
        let r = scores.ncols();
        if loadings.ncols() != r {
            return Err(Error::Dimension(format!(
                "scores have rank {r}, loadings have rank {}",
                loadings.ncols()
            )));
        }
        let (n, p) = (scores.nrows(), loadings.nrows());
        if r == 0 || r > n.min(p) {
            return Err(Error::InvalidParameter(format!(
                "rank {r} must lie in [1, min(N={n}, P={p})]"
            )));
        }
        if !scores.iter().chain(loadings.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("factor model".into()));
        }
        Ok(Self { scores, loadings })
    }

    pub fn scores(&self) -> ArrayView2<'_, f64> {
        self.scores.view()
    }

    pub fn loadings(&self) -> ArrayView2<'_, f64> {
        self.loadings.view()
    }

    pub fn rank(&self) -> usize {
        self.scores.ncols()
    }

    pub fn nrows(&self) -> usize {
        self.scores.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.loadings.nrows()
    }

    pub fn into_parts(self) -> (Array2<f64>, Array2<f64>) {
        (self.scores, self.loadings)
    }

    /// θ_t = V·a_t, the natural parameters of row `t`.
    pub fn natural_parameters(&self, t: usize) -> Result<Array1<f64>> {
        if t >= self.nrows() {
            return Err(Error::OutOfRange {
                index: t,
                len: self.nrows(),
            });
        }
        Ok(self.loadings.dot(&self.scores.row(t)))
    }

    pub fn natural_parameter_matrix(&self) -> Array2<f64> {
        self.scores.dot(&self.loadings.t())
    }

    /// Flips each factor column pair so that the first nonzero loading entry
    /// is positive. Θ is unchanged.
    pub fn canonicalize_signs(&mut self) {
        for k in 0..self.rank() {
            let first = self.loadings.column(k).iter().copied().find(|v| *v != 0.0);
            if matches!(first, Some(v) if v < 0.0) {
                self.loadings.column_mut(k).mapv_inplace(|v| -v);
                self.scores.column_mut(k).mapv_inplace(|v| -v);
            }
        }
    }
}

/// Tuning constants for the fitting engines.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    /// Weight of the ½‖a‖² penalty on each score row.
    pub gamma: f64,
    /// Weight of the ½‖V‖² penalty on the loadings (batch only).
    pub lambda: f64,
    /// Newton stops once half the squared Newton decrement is at most this.
    pub newton_tol: f64,
    pub armijo_alpha: f64,
    pub armijo_beta: f64,
    pub initial_step: f64,
    pub schedule_constant: f64,
    pub max_newton_iterations: usize,
    pub max_backtracks: usize,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            gamma: 0.1,
            lambda: 0.1,
            newton_tol: 1e-14,
            armijo_alpha: 0.3,
            armijo_beta: 0.5,
            initial_step: 1.0,
            schedule_constant: 0.2,
            max_newton_iterations: 100,
            max_backtracks: 60,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: String| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidParameter(msg))
            }
        };
        check(
            self.gamma.is_finite() && self.gamma > 0.0,
            format!("gamma must be positive, got {}", self.gamma),
        )?;
        check(
            self.lambda.is_finite() && self.lambda >= 0.0,
            format!("lambda must be nonnegative, got {}", self.lambda),
        )?;
        check(
            self.newton_tol.is_finite() && self.newton_tol > 0.0,
            format!("newton_tol must be positive, got {}", self.newton_tol),
        )?;
        check(
            self.armijo_alpha > 0.0 && self.armijo_alpha < 1.0,
            format!("armijo_alpha must lie in (0,1), got {}", self.armijo_alpha),
        )?;
        check(
            self.armijo_beta > 0.0 && self.armijo_beta < 1.0,
            format!("armijo_beta must lie in (0,1), got {}", self.armijo_beta),
        )?;
        check(
            self.initial_step.is_finite() && self.initial_step > 0.0,
            format!("initial_step must be positive, got {}", self.initial_step),
        )?;
        check(
            self.schedule_constant.is_finite() && self.schedule_constant > 0.0,
            format!(
                "schedule constant must be positive, got {}",
                self.schedule_constant
            ),
        )?;
        check(
            self.max_newton_iterations > 0,
            "max_newton_iterations must be at least 1".into(),
        )
    }

    pub fn schedule(&self, kind: ScheduleKind) -> Result<StepSchedule> {
        StepSchedule::new(kind, self.schedule_constant)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleKind {
    /// η_t = C/√t
    Diminishing,
    /// η_t = C
    Constant,
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScheduleKind::Diminishing => f.write_str("diminishing"),
            ScheduleKind::Constant => f.write_str("constant"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub kind: ScheduleKind,
    pub constant: f64,
}

impl StepSchedule {
    pub fn new(kind: ScheduleKind, constant: f64) -> Result<Self> {
        if !(constant.is_finite() && constant > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "schedule constant must be positive, got {constant}"
            )));
        }
        Ok(Self { kind, constant })
    }

    pub fn diminishing(constant: f64) -> Result<Self> {
        Self::new(ScheduleKind::Diminishing, constant)
    }

    pub fn constant(constant: f64) -> Result<Self> {
        Self::new(ScheduleKind::Constant, constant)
    }

    /// Step size η_t for the 1-based step index `t`.
    pub fn step_size(&self, t: usize) -> Result<f64> {
        if t == 0 {
            return Err(Error::InvalidParameter(
                "step index is 1-based; t = 0 has no step size".into(),
            ));
        }
        Ok(match self.kind {
            ScheduleKind::Diminishing => self.constant / (t as f64).sqrt(),
            ScheduleKind::Constant => self.constant,
        })
    }
}
