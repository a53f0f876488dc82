//! Bernoulli Bregman divergence (the logistic loss), its per-row aggregate
//! h_t(a, V) = Σ_j log(1 + exp(−x*_j ⟨a, v_j⟩)), exact derivatives, and the
//! quadratic surrogate used by the streaming loading update.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::linalg::{frobenius_dot, frobenius_norm_sq, norm_sq};
use crate::model::SignedRow;

/// log(1 + e^z) without overflow.
#[inline]
pub fn log1p_exp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Logistic function 1/(1 + e^−z).
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// σ(z)(1 − σ(z)), evaluated as σ(z)σ(−z).
#[inline]
pub fn logistic_variance(z: f64) -> f64 {
    sigmoid(z) * sigmoid(-z)
}

pub fn bregman_loss(x_signed: f64, theta: f64) -> Result<f64> {
    if x_signed != 1.0 && x_signed != -1.0 {
        return Err(Error::NonSigned {
            index: 0,
            value: x_signed,
        });
    }
    if !theta.is_finite() {
        return Err(Error::NonFinite("natural parameter".into()));
    }
    Ok(log1p_exp(-x_signed * theta))
}

fn check_dims(x: &SignedRow, scores: ArrayView1<f64>, loadings: ArrayView2<f64>) -> Result<()> {
    if loadings.nrows() != x.len() || loadings.ncols() != scores.len() {
        return Err(Error::Dimension(format!(
            "row of length {} with {} scores against {}x{} loadings",
            x.len(),
            scores.len(),
            loadings.nrows(),
            loadings.ncols()
        )));
    }
    Ok(())
}

/// h_t for one signed row. No regularizer.
pub fn row_loss(x: &SignedRow, scores: ArrayView1<f64>, loadings: ArrayView2<f64>) -> Result<f64> {
    check_dims(x, scores, loadings)?;
    Ok(row_loss_unchecked(x.values(), scores, loadings))
}

pub(crate) fn row_loss_unchecked(
    signs: ArrayView1<f64>,
    scores: ArrayView1<f64>,
    loadings: ArrayView2<f64>,
) -> f64 {
    loadings
        .axis_iter(Axis(0))
        .zip(signs.iter())
        .map(|(v, &s)| log1p_exp(-s * v.dot(&scores)))
        .sum()
}

/// Loss, gradients and score Hessian of one row.
#[derive(Clone, Debug, PartialEq)]
pub struct RowLossGradients {
    /// Bare h_t, without the γ term.
    pub loss: f64,
    pub grad_scores: Array1<f64>,
    pub grad_loadings: Array2<f64>,
    pub hessian_scores: Array2<f64>,
}

/// Derivatives of h_t with respect to scores and loadings.
///
/// When `gamma > 0` the score gradient and Hessian carry the γ‖a‖²/2 term
/// of the regularized row problem; the loading gradient and `loss` never do.
pub fn row_gradients(
    x: &SignedRow,
    scores: ArrayView1<f64>,
    loadings: ArrayView2<f64>,
    gamma: f64,
) -> Result<RowLossGradients> {
    check_dims(x, scores, loadings)?;
    if gamma.is_nan() || gamma < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "gamma must be nonnegative, got {gamma}"
        )));
    }
    let (loss, grad_scores, hessian_scores) = score_derivatives(x.values(), scores, loadings, gamma);
    let grad_loadings = loading_gradient_unchecked(x.values(), scores, loadings);
    Ok(RowLossGradients {
        loss,
        grad_scores,
        grad_loadings,
        hessian_scores,
    })
}

/// Bare loss, plus score gradient and Hessian of the γ-regularized row
/// problem. Dimensions are the caller's responsibility.
pub(crate) fn score_derivatives(
    signs: ArrayView1<f64>,
    scores: ArrayView1<f64>,
    loadings: ArrayView2<f64>,
    gamma: f64,
) -> (f64, Array1<f64>, Array2<f64>) {
    let r = scores.len();
    let mut loss = 0.0;
    let mut grad = Array1::<f64>::zeros(r);
    let mut hessian = Array2::<f64>::zeros((r, r));
    for (v, &s) in loadings.axis_iter(Axis(0)).zip(signs.iter()) {
        let z = -s * v.dot(&scores);
        loss += log1p_exp(z);
        // d/dθ log(1+e^{−sθ}) = −s σ(−sθ)
        grad.scaled_add(-s * sigmoid(z), &v);
        let w = logistic_variance(z);
        for i in 0..r {
            for k in 0..r {
                hessian[[i, k]] += w * v[i] * v[k];
            }
        }
    }
    if gamma > 0.0 {
        grad.scaled_add(gamma, &scores);
        for i in 0..r {
            hessian[[i, i]] += gamma;
        }
    }
    (loss, grad, hessian)
}

fn loading_gradient_unchecked(
    signs: ArrayView1<f64>,
    scores: ArrayView1<f64>,
    loadings: ArrayView2<f64>,
) -> Array2<f64> {
    let mut g = Array2::<f64>::zeros(loadings.raw_dim());
    for ((v, &s), mut g_row) in loadings
        .axis_iter(Axis(0))
        .zip(signs.iter())
        .zip(g.axis_iter_mut(Axis(0)))
    {
        let z = -s * v.dot(&scores);
        g_row.scaled_add(-s * sigmoid(z), &scores);
    }
    g
}

/// ∇_V h_t only; the loading update needs nothing else.
pub fn loading_gradient(
    x: &SignedRow,
    scores: ArrayView1<f64>,
    loadings: ArrayView2<f64>,
) -> Result<Array2<f64>> {
    check_dims(x, scores, loadings)?;
    Ok(loading_gradient_unchecked(x.values(), scores, loadings))
}

/// Operator norm of ∇²_V h_t. The Hessian is block diagonal with blocks
/// σ_j(1−σ_j)·a aᵀ, so the norm is max_j σ_j(1−σ_j)·‖a‖².
pub fn loading_hessian_norm(
    x: &SignedRow,
    scores: ArrayView1<f64>,
    loadings: ArrayView2<f64>,
) -> Result<f64> {
    check_dims(x, scores, loadings)?;
    let a2 = norm_sq(scores);
    Ok(loadings
        .axis_iter(Axis(0))
        .zip(x.values().iter())
        .map(|(v, &s)| logistic_variance(-s * v.dot(&scores)) * a2)
        .fold(0.0, f64::max))
}

/// ¼‖a‖², the certified bound on ‖∇²_V h_t‖.
pub fn default_curvature(scores: ArrayView1<f64>) -> f64 {
    0.25 * norm_sq(scores)
}

/// Quadratic model of h_t around a previous loading matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SurrogateAnchor {
    pub anchor_loadings: Array2<f64>,
    pub anchor_loss: f64,
    pub anchor_gradient: Array2<f64>,
    pub curvature: f64,
}

impl SurrogateAnchor {
    /// Anchor at `anchor_loadings` for scores `scores`, with curvature ¼‖a‖².
    pub fn at(x: &SignedRow, scores: ArrayView1<f64>, anchor_loadings: ArrayView2<f64>) -> Result<Self> {
        let g = row_gradients(x, scores, anchor_loadings, 0.0)?;
        Ok(Self {
            anchor_loadings: anchor_loadings.to_owned(),
            anchor_loss: g.loss,
            anchor_gradient: g.grad_loadings,
            curvature: default_curvature(scores),
        })
    }
}

/// h̃(V) = h(anchor) + ⟨∇h(anchor), V − anchor⟩ + (α/2)‖V − anchor‖²_F.
pub fn surrogate_value(anchor: &SurrogateAnchor, loadings: ArrayView2<f64>) -> Result<f64> {
    if loadings.dim() != anchor.anchor_loadings.dim()
        || anchor.anchor_gradient.dim() != anchor.anchor_loadings.dim()
    {
        return Err(Error::Dimension(format!(
            "surrogate anchored at {:?} evaluated at {:?}",
            anchor.anchor_loadings.dim(),
            loadings.dim()
        )));
    }
    let diff = &loadings - &anchor.anchor_loadings;
    Ok(anchor.anchor_loss
        + frobenius_dot(anchor.anchor_gradient.view(), diff.view())
        + 0.5 * anchor.curvature * frobenius_norm_sq(diff.view()))
}
