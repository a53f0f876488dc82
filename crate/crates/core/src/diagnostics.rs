//! Evaluation of a streamed fit: the averaged losses, the regret, their gap
//! against its closed-form bound, prefix curves, and a runtime checker for
//! every per-step inequality the update is known to satisfy.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::batch::{fit_batch, BatchConfig};
use crate::error::{Error, Result};
use crate::linalg::{dot, frobenius_dot, frobenius_norm_sq, norm_sq};
use crate::loss::{
    loading_gradient, loading_hessian_norm, row_gradients, row_loss_unchecked, surrogate_value,
    SurrogateAnchor,
};
use crate::model::{BinaryMatrix, FactorModel, Hyperparams, ScheduleKind, StepSchedule};
use crate::stream::StreamTrace;

const LN2: f64 = std::f64::consts::LN_2;

/// Slack on the loss ordering, absorbing Newton residuals.
pub const ORDERING_SLACK: f64 = 1e-6;
/// Relative tolerance on the per-step inner-product identity.
pub const STEP_INNER_PRODUCT_TOL: f64 = 1e-8;

fn score_view(trace: &StreamTrace, t: usize) -> ArrayView1<'_, f64> {
    ArrayView1::from(&trace.records[t].score[..])
}

/// (1/t) Σ_{s<t} h_s(ã_s, loadings) over the first `t` steps.
fn prefix_mean_loss(trace: &StreamTrace, data: &BinaryMatrix, loadings: ArrayView2<f64>, t: usize) -> f64 {
    let total: f64 = (0..t)
        .map(|s| row_loss_unchecked(data.signed_row(s).values(), score_view(trace, s), loadings))
        .sum();
    total / t as f64
}

fn require_steps(trace: &StreamTrace) -> Result<()> {
    if trace.is_empty() {
        Err(Error::Empty("trace has no steps".into()))
    } else {
        Ok(())
    }
}

/// (1/N) Σ_t h_t(ã_t, loadings) with the stored scores, not re-solved.
pub fn sequential_loss(trace: &StreamTrace, loadings: ArrayView2<f64>, data: &BinaryMatrix) -> Result<f64> {
    require_steps(trace)?;
    trace.check_data(data)?;
    if loadings.dim() != trace.final_loadings.dim() {
        return Err(Error::Dimension(format!(
            "loadings {:?} vs trace loadings {:?}",
            loadings.dim(),
            trace.final_loadings.dim()
        )));
    }
    Ok(prefix_mean_loss(trace, data, loadings, trace.len()))
}

/// (1/N) Σ_t h_t(ã_t, Ṽ^t): each score with the loadings right after its own
/// update.
pub fn regret(trace: &StreamTrace) -> Result<f64> {
    require_steps(trace)?;
    Ok(trace.records.iter().map(|r| r.post_update_loss).sum::<f64>() / trace.len() as f64)
}

fn surrogate_mean(
    trace: &StreamTrace,
    anchors: &[Array2<f64>],
    loadings: ArrayView2<f64>,
    data: &BinaryMatrix,
) -> Result<f64> {
    let mut total = 0.0;
    for (t, anchor) in anchors.iter().take(trace.len()).enumerate() {
        let quad = SurrogateAnchor::at(&data.signed_row(t), score_view(trace, t), anchor.view())?;
        total += surrogate_value(&quad, loadings)?;
    }
    Ok(total / trace.len() as f64)
}

/// (1/N) Σ_t h̃_t(ã_t, loadings), each quadratic anchored at the loadings
/// step t saw. Needs a trace recorded with snapshots.
pub fn surrogate_loss(trace: &StreamTrace, loadings: ArrayView2<f64>, data: &BinaryMatrix) -> Result<f64> {
    require_steps(trace)?;
    trace.check_data(data)?;
    let snaps = trace
        .snapshots
        .as_ref()
        .ok_or(Error::MissingSnapshots("the surrogate loss"))?;
    surrogate_mean(trace, snaps, loadings, data)
}

/// Largest score norm seen; zero for an empty trace.
pub fn omega_hat(trace: &StreamTrace) -> f64 {
    trace.records.iter().map(|r| r.score_norm).fold(0.0, f64::max)
}

/// √(2P·ln2/γ): no optimal score can be longer, since l(a) ≤ l(0) = P·ln2.
pub fn score_certificate(p: usize, gamma: f64) -> f64 {
    (2.0 * p as f64 * LN2 / gamma).sqrt()
}

/// Closed-form bound on |regret − sequential loss| after `n` steps, with
/// `omega` bounding every score norm.
pub fn regret_gap_bound(schedule: &StepSchedule, gamma: f64, omega: f64, n: usize) -> f64 {
    let c = schedule.constant;
    let w2 = omega * omega;
    match schedule.kind {
        ScheduleKind::Constant => gamma * w2 + c * w2,
        ScheduleKind::Diminishing => {
            let nf = n as f64;
            let ln = nf.ln();
            w2 * c / 2.0 * ln / nf + w2 * c / 4.0 * ln / nf.sqrt() + w2 * (2.0 * gamma + c) / (2.0 * nf.sqrt())
                + gamma * w2 / 2.0
        }
    }
}

/// Loss series per prefix length, ready for plotting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseCurves {
    pub t: Vec<usize>,
    /// Batch reference level per prefix.
    pub batch: Vec<f64>,
    /// Stored scores against the loadings at t, averaged over the prefix.
    pub sequential: Vec<f64>,
    /// Running mean of the post-update losses.
    pub regret: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurveOptions {
    /// Evaluate every `stride`-th prefix; the full length is always included.
    pub stride: usize,
    /// Refit the batch model on each evaluated prefix instead of reusing the
    /// full-data fit. Quadratic cost; meant for small N.
    pub refit: Option<(Hyperparams, BatchConfig)>,
}

impl Default for CurveOptions {
    fn default() -> Self {
        Self {
            stride: 1,
            refit: None,
        }
    }
}

fn curve_points(n: usize, stride: usize) -> Vec<usize> {
    let mut pts: Vec<usize> = (1..=n).filter(|t| t % stride == 0 || *t == 1).collect();
    if pts.last() != Some(&n) {
        pts.push(n);
    }
    pts
}

pub fn phase_curves(
    trace: &StreamTrace,
    data: &BinaryMatrix,
    batch: &FactorModel,
    options: &CurveOptions,
) -> Result<PhaseCurves> {
    require_steps(trace)?;
    trace.check_data(data)?;
    if batch.nrows() != data.nrows() || batch.ncols() != data.ncols() {
        return Err(Error::Dimension(format!(
            "batch model is {}x{}, data is {}x{}",
            batch.nrows(),
            batch.ncols(),
            data.nrows(),
            data.ncols()
        )));
    }
    if options.stride == 0 {
        return Err(Error::InvalidParameter("curve stride must be at least 1".into()));
    }
    let n = trace.len();
    let points = curve_points(n, options.stride);
    let sequence = trace.loading_sequence(data)?;

    let mut running_batch = Vec::with_capacity(n);
    let mut running_regret = Vec::with_capacity(n);
    let (mut sb, mut sr) = (0.0, 0.0);
    for t in 0..n {
        sb += row_loss_unchecked(data.signed_row(t).values(), batch.scores().row(t), batch.loadings());
        sr += trace.records[t].post_update_loss;
        running_batch.push(sb / (t + 1) as f64);
        running_regret.push(sr / (t + 1) as f64);
    }

    let sequential: Vec<f64> = points
        .par_iter()
        .map(|&t| prefix_mean_loss(trace, data, sequence[t].view(), t))
        .collect();
    let batch_curve: Vec<f64> = match &options.refit {
        None => points.iter().map(|&t| running_batch[t - 1]).collect(),
        Some((params, config)) => points
            .iter()
            .map(|&t| {
                let prefix = data.prefix(t)?;
                let cfg = BatchConfig {
                    rank: config.rank.min(t),
                    ..config.clone()
                };
                Ok(fit_batch(&prefix, params, &cfg)?.batch_loss)
            })
            .collect::<Result<_>>()?,
    };
    Ok(PhaseCurves {
        regret: points.iter().map(|&t| running_regret[t - 1]).collect(),
        t: points,
        batch: batch_curve,
        sequential,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub n: usize,
    pub p: usize,
    pub schedule: StepSchedule,
    pub gamma: f64,
    pub batch_loss: Option<f64>,
    pub sequential_loss: f64,
    /// Present only when the trace kept its snapshots.
    pub surrogate_loss: Option<f64>,
    pub regret: f64,
    pub omega_hat: f64,
    pub omega_certificate: f64,
    /// |regret − sequential_loss|.
    pub gap: f64,
    pub gap_bound: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub curves: Option<PhaseCurves>,
}

pub fn evaluate(
    trace: &StreamTrace,
    data: &BinaryMatrix,
    batch: Option<&FactorModel>,
    curves: Option<&CurveOptions>,
) -> Result<EvaluationReport> {
    let sequential = sequential_loss(trace, trace.final_loadings.view(), data)?;
    let regret = regret(trace)?;
    let surrogate = match &trace.snapshots {
        Some(_) => Some(surrogate_loss(trace, trace.final_loadings.view(), data)?),
        None => None,
    };
    let batch_loss = batch.map(|m| crate::batch::batch_loss(m, data)).transpose()?;
    let curves = match curves {
        None => None,
        Some(opts) => {
            let model = batch.ok_or_else(|| {
                Error::InvalidParameter("prefix curves need a batch fit on the same data".into())
            })?;
            Some(phase_curves(trace, data, model, opts)?)
        }
    };
    let omega = omega_hat(trace);
    let gamma = trace.params.gamma;
    Ok(EvaluationReport {
        n: trace.len(),
        p: data.ncols(),
        schedule: trace.schedule,
        gamma,
        batch_loss,
        sequential_loss: sequential,
        surrogate_loss: surrogate,
        regret,
        omega_hat: omega,
        omega_certificate: score_certificate(data.ncols(), gamma),
        gap: (regret - sequential).abs(),
        gap_bound: regret_gap_bound(&trace.schedule, gamma, omega, trace.len()),
        curves,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundStatus {
    Pass,
    Fail,
    NotApplicable,
}

/// One checked inequality, reported at its worst step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundEntry {
    pub name: String,
    /// Whether a failure fails the whole report. Non-gating entries are
    /// tighter textbook forms kept for comparison.
    pub gating: bool,
    pub status: BoundStatus,
    /// bound_value − measured_value (plus any tolerance) at the worst step.
    pub margin: f64,
    pub bound_value: f64,
    pub measured_value: f64,
    /// 1-based step of the worst margin, for per-step checks.
    pub at_step: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheckReport {
    pub schedule: ScheduleKind,
    pub steps: usize,
    pub entries: Vec<BoundEntry>,
}

impl BoundCheckReport {
    /// True when no gating entry failed.
    pub fn passed(&self) -> bool {
        self.entries
            .iter()
            .all(|e| !e.gating || e.status != BoundStatus::Fail)
    }

    pub fn entry(&self, name: &str) -> Option<&BoundEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &BoundEntry> {
        self.entries.iter().filter(|e| e.status == BoundStatus::Fail)
    }
}

/// Tracks the smallest margin of an inequality over steps.
struct Worst {
    name: &'static str,
    gating: bool,
    margin: f64,
    bound: f64,
    measured: f64,
    step: Option<usize>,
    seen: bool,
}

impl Worst {
    fn new(name: &'static str, gating: bool) -> Self {
        Self {
            name,
            gating,
            margin: f64::INFINITY,
            bound: f64::NAN,
            measured: f64::NAN,
            step: None,
            seen: false,
        }
    }

    /// Records measured ≤ bound + slack at `step`. NaN counts as a failure.
    fn see(&mut self, bound: f64, measured: f64, slack: f64, step: Option<usize>) {
        let margin = bound + slack - measured;
        let margin = if margin.is_nan() { f64::NEG_INFINITY } else { margin };
        if !self.seen || margin < self.margin {
            self.seen = true;
            self.margin = margin;
            self.bound = bound;
            self.measured = measured;
            self.step = step;
        }
    }

    fn finish(self) -> BoundEntry {
        let status = if !self.seen {
            BoundStatus::NotApplicable
        } else if self.margin >= 0.0 {
            BoundStatus::Pass
        } else {
            BoundStatus::Fail
        };
        BoundEntry {
            name: self.name.to_string(),
            gating: self.gating,
            status,
            margin: if status == BoundStatus::NotApplicable {
                0.0
            } else {
                self.margin
            },
            bound_value: if self.seen { self.bound } else { 0.0 },
            measured_value: if self.seen { self.measured } else { 0.0 },
            at_step: self.step,
        }
    }
}

/// Entry names in report order.
pub const BOUND_NAMES: [&str; 14] = [
    "loading_gradient_norm",
    "loading_gradient_rowwise",
    "loading_gradient_sqrt_p",
    "loading_hessian_norm",
    "inner_product_identity",
    "loading_step",
    "loading_step_sqrt_p",
    "loading_step_consistency",
    "step_inner_product",
    "loading_norm_growth",
    "score_norm",
    "batch_below_sequential",
    "sequential_below_surrogate",
    "regret_gap",
];

/// Evaluates every per-step inequality of the streaming update plus the
/// loss ordering and the regret gap. Violations are reported, not raised;
/// only mismatched inputs are errors.
///
/// The loadings each step saw come from the snapshots when present and are
/// otherwise replayed from the initial loadings. Step sizes are measured
/// both from that sequence and from the recorded norms, keeping the larger,
/// so tampering with either shows up.
pub fn check_all_bounds(
    trace: &StreamTrace,
    data: &BinaryMatrix,
    batch: Option<&FactorModel>,
) -> Result<BoundCheckReport> {
    trace.validate()?;
    let mut w: Vec<Worst> = vec![
        Worst::new(BOUND_NAMES[0], false),
        Worst::new(BOUND_NAMES[1], true),
        Worst::new(BOUND_NAMES[2], true),
        Worst::new(BOUND_NAMES[3], true),
        Worst::new(BOUND_NAMES[4], true),
        Worst::new(BOUND_NAMES[5], false),
        Worst::new(BOUND_NAMES[6], true),
        Worst::new(BOUND_NAMES[7], true),
        Worst::new(BOUND_NAMES[8], true),
        Worst::new(BOUND_NAMES[9], true),
        Worst::new(BOUND_NAMES[10], true),
        Worst::new(BOUND_NAMES[11], true),
        Worst::new(BOUND_NAMES[12], true),
        Worst::new(BOUND_NAMES[13], true),
    ];
    let report = |w: Vec<Worst>| BoundCheckReport {
        schedule: trace.schedule.kind,
        steps: trace.len(),
        entries: w.into_iter().map(Worst::finish).collect(),
    };
    if trace.is_empty() {
        return Ok(report(w));
    }
    trace.check_data(data)?;
    if let Some(m) = batch {
        if m.nrows() != data.nrows() || m.ncols() != data.ncols() {
            return Err(Error::Dimension(format!(
                "batch model is {}x{}, data is {}x{}",
                m.nrows(),
                m.ncols(),
                data.nrows(),
                data.ncols()
            )));
        }
    }

    let p = data.ncols();
    let sqrt_p = (p as f64).sqrt();
    let gamma = trace.params.gamma;
    let omega = omega_hat(trace);
    let seq = trace.loading_sequence(data)?;
    let v0_sq = frobenius_norm_sq(seq[0].view());
    let (mut sum_eta_sq, mut sum_eta) = (0.0, 0.0);
    let rel = |x: f64| 1e-12 * x.abs();

    for (i, rec) in trace.records.iter().enumerate() {
        let t = Some(rec.t);
        let x = data.signed_row(i);
        let a = score_view(trace, i);
        let a_norm = norm_sq(a).sqrt();
        let prev = &seq[i];
        let next = &seq[i + 1];
        let grad = loading_gradient(&x, a, prev.view())?;
        let grad_norm = frobenius_norm_sq(grad.view()).sqrt().max(rec.grad_loadings_norm);
        let seq_delta = frobenius_norm_sq((next - prev).view()).sqrt();
        let delta = seq_delta.max(rec.loading_delta_norm);

        w[0].see(a_norm, grad_norm, rel(a_norm), t);
        let row_max = grad
            .axis_iter(Axis(0))
            .map(|r| norm_sq(r).sqrt())
            .fold(0.0, f64::max);
        w[1].see(a_norm, row_max, rel(a_norm), t);
        w[2].see(sqrt_p * a_norm, grad_norm, rel(sqrt_p * a_norm), t);
        let hess = loading_hessian_norm(&x, a, prev.view())?;
        w[3].see(0.25 * a_norm * a_norm, hess, rel(a_norm * a_norm), t);

        let g = row_gradients(&x, a, prev.view(), 0.0)?;
        let lhs = dot(a, g.grad_scores.view());
        let rhs = frobenius_dot(prev.view(), g.grad_loadings.view());
        let scale = a_norm * norm_sq(g.grad_scores.view()).sqrt() + frobenius_norm_sq(prev.view()).sqrt() * grad_norm;
        w[4].see(0.0, (lhs - rhs).abs(), 1e-10 * (1.0 + scale), t);

        w[5].see(rec.eta * a_norm, delta, rel(rec.eta * a_norm), t);
        w[6].see(rec.eta * sqrt_p * a_norm, delta, rel(rec.eta * sqrt_p * a_norm), t);

        // stored loadings must be exactly the update applied to the previous
        // ones, and the recorded norms must describe them
        let expected = prev - &(&grad * rec.eta);
        let matrix_err = frobenius_norm_sq((next - &expected).view()).sqrt();
        let mat_scale = frobenius_norm_sq(prev.view()).sqrt() + rec.eta * grad_norm + f64::MIN_POSITIVE;
        let rec_err = (rec.loading_delta_norm - seq_delta).abs() / (seq_delta + mat_scale)
            + (rec.loading_norm_sq - frobenius_norm_sq(next.view())).abs() / (frobenius_norm_sq(next.view()) + 1.0);
        w[7].see(0.0, (matrix_err / mat_scale).max(rec_err), 1e-9, t);

        // the step is −η∇, so ⟨Ṽ^{t−1}, Ṽ^t − Ṽ^{t−1}⟩ = −η⟨Ṽ^{t−1}, ∇⟩,
        // which equals ηγ‖a‖² at the score optimum
        let inner = -rec.eta * frobenius_dot(prev.view(), grad.view());
        let target = rec.eta * gamma * a_norm * a_norm;
        let tol = STEP_INNER_PRODUCT_TOL * inner.abs().max(target.abs());
        w[8].see(0.0, (inner - target).abs(), tol, t);

        sum_eta_sq += rec.eta * rec.eta;
        sum_eta += rec.eta;
        let growth = omega * omega * sum_eta_sq + 2.0 * gamma * omega * omega * sum_eta + v0_sq;
        let norm_now = frobenius_norm_sq(next.view()).max(rec.loading_norm_sq);
        w[9].see(growth, norm_now, 1e-9 * growth, t);

        let cap = 2.0 * p as f64 * LN2 / gamma;
        w[10].see(cap, a_norm * a_norm, rel(cap), t);
    }

    let n = trace.len();
    let last = &seq[n];
    let sequential = prefix_mean_loss(trace, data, last.view(), n);
    if let Some(m) = batch {
        let c = crate::batch::batch_loss(m, data)?;
        w[11].see(sequential, c, ORDERING_SLACK, None);
    }
    let surrogate = surrogate_mean(trace, &seq[..n], last.view(), data)?;
    w[12].see(surrogate, sequential, ORDERING_SLACK, None);

    let gap = (regret(trace)? - sequential).abs();
    w[13].see(regret_gap_bound(&trace.schedule, gamma, omega, n), gap, 0.0, None);
    Ok(report(w))
}
