//! Sequential logistic PCA.
//!
//! Each arriving row is scored against the current loadings by an exact
//! Newton solve, then the loadings take one gradient step on that row's loss
//! at the fresh score. The step is the minimizer of the quadratic surrogate
//! anchored at the previous loadings.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::frobenius_norm_sq;
use crate::loss::{default_curvature, loading_gradient, row_loss_unchecked};
use crate::model::{signed_transform, BinaryMatrix, Hyperparams, SignedRow, StepSchedule};
use crate::newton::solve_row;

/// Half-width of the uniform loading initialization.
pub const INIT_SCALE: f64 = 1e-2;

/// Everything recorded about one processed row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// 1-based arrival index.
    pub t: usize,
    pub eta: f64,
    pub score: Vec<f64>,
    pub score_norm: f64,
    /// h_t(ã_t, Ṽ^{t−1}).
    pub loss_at_anchor: f64,
    /// h_t(ã_t, Ṽ^t).
    pub post_update_loss: f64,
    /// ‖∇_V h_t(ã_t, Ṽ^{t−1})‖_F.
    #[serde(rename = "grad_norm")]
    pub grad_loadings_norm: f64,
    /// ‖Ṽ^t‖²_F.
    pub loading_norm_sq: f64,
    /// ‖Ṽ^t − Ṽ^{t−1}‖_F, measured from the matrices.
    pub loading_delta_norm: f64,
    pub curvature: f64,
    #[serde(default)]
    pub newton_iterations: usize,
    #[serde(default = "default_true")]
    pub converged: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq)]
pub struct StreamState {
    pub loadings: Array2<f64>,
    pub step_index: usize,
    pub schedule: StepSchedule,
    pub params: Hyperparams,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StreamTrace {
    pub records: Vec<StepRecord>,
    pub schedule: StepSchedule,
    pub params: Hyperparams,
    /// Loadings before the first processed row.
    pub initial_loadings: Array2<f64>,
    /// Loadings after the last processed row.
    pub final_loadings: Array2<f64>,
    /// Ṽ^{t−1} for every step, when retained.
    pub snapshots: Option<Vec<Array2<f64>>>,
}

pub fn init_stream(
    p: usize,
    rank: usize,
    schedule: StepSchedule,
    params: Hyperparams,
    seed: u64,
) -> Result<StreamState> {
    params.validate()?;
    if p == 0 || rank == 0 || rank > p {
        return Err(Error::InvalidParameter(format!(
            "stream needs P >= 1 and 1 <= rank <= P, got P={p}, rank={rank}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let loadings = Array2::from_shape_fn((p, rank), |_| rng.random_range(-INIT_SCALE..=INIT_SCALE));
    Ok(StreamState {
        loadings,
        step_index: 0,
        schedule,
        params,
    })
}

/// Ṽ − η·∇_V h(a, Ṽ), together with the gradient norm.
pub fn loading_step(
    x: &SignedRow,
    score: ArrayView1<f64>,
    loadings: ArrayView2<f64>,
    eta: f64,
) -> Result<(Array2<f64>, f64)> {
    let grad = loading_gradient(x, score, loadings)?;
    let grad_norm = frobenius_norm_sq(grad.view()).sqrt();
    let next = &loadings - &(grad * eta);
    Ok((next, grad_norm))
}

impl StreamState {
    pub fn nfeatures(&self) -> usize {
        self.loadings.nrows()
    }

    pub fn rank(&self) -> usize {
        self.loadings.ncols()
    }

    pub fn process_row(&mut self, row: ArrayView1<u8>) -> Result<StepRecord> {
        let values: Vec<u8> = row.iter().copied().collect();
        self.process_signed(&signed_transform(&values)?)
    }

    pub fn process_signed(&mut self, x: &SignedRow) -> Result<StepRecord> {
        if x.len() != self.nfeatures() {
            return Err(Error::Dimension(format!(
                "row has {} entries, stream has P = {}",
                x.len(),
                self.nfeatures()
            )));
        }
        let t = self.step_index + 1;
        let rep = solve_row(x, self.loadings.view(), self.params.gamma, &self.params)?;
        let score = rep.solution;
        let eta = self.schedule.step_size(t)?;
        let loss_at_anchor = row_loss_unchecked(x.values(), score.view(), self.loadings.view());
        let (next, grad_norm) = loading_step(x, score.view(), self.loadings.view(), eta)?;
        if !next.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite(format!("loadings after step {t}")));
        }
        let delta = frobenius_norm_sq((&next - &self.loadings).view()).sqrt();
        let post_update_loss = row_loss_unchecked(x.values(), score.view(), next.view());
        let record = StepRecord {
            t,
            eta,
            score_norm: score.dot(&score).sqrt(),
            curvature: default_curvature(score.view()),
            score: score.to_vec(),
            loss_at_anchor,
            post_update_loss,
            grad_loadings_norm: grad_norm,
            loading_norm_sq: frobenius_norm_sq(next.view()),
            loading_delta_norm: delta,
            newton_iterations: rep.iterations,
            converged: rep.converged,
        };
        self.loadings = next;
        self.step_index = t;
        Ok(record)
    }
}

/// Feeds every row of `data` in order. With `snapshots` the loadings seen by
/// each row are kept, which the surrogate and per-step reconstructions need.
pub fn run_stream(
    state: StreamState,
    data: &BinaryMatrix,
    snapshots: bool,
) -> Result<(StreamState, StreamTrace)> {
    if data.ncols() != state.nfeatures() {
        return Err(Error::Dimension(format!(
            "data has {} columns, stream has P = {}",
            data.ncols(),
            state.nfeatures()
        )));
    }
    let rows: Vec<SignedRow> = (0..data.nrows()).map(|t| data.signed_row(t)).collect();
    run_stream_rows(state, &rows, snapshots)
}

/// As [`run_stream`], over already signed rows. An empty slice leaves the
/// state untouched.
pub fn run_stream_rows(
    mut state: StreamState,
    rows: &[SignedRow],
    snapshots: bool,
) -> Result<(StreamState, StreamTrace)> {
    let initial = state.loadings.clone();
    let mut kept = snapshots.then(|| Vec::with_capacity(rows.len()));
    let mut records = Vec::with_capacity(rows.len());
    for x in rows {
        if let Some(k) = kept.as_mut() {
            k.push(state.loadings.clone());
        }
        records.push(state.process_signed(x)?);
    }
    let trace = StreamTrace {
        records,
        schedule: state.schedule,
        params: state.params.clone(),
        initial_loadings: initial,
        final_loadings: state.loadings.clone(),
        snapshots: kept,
    };
    Ok((state, trace))
}

impl StreamTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.final_loadings.ncols()
    }

    pub fn nfeatures(&self) -> usize {
        self.final_loadings.nrows()
    }

    /// Stored scores stacked into an N×r matrix.
    pub fn score_matrix(&self) -> Array2<f64> {
        let r = self.rank();
        let mut out = Array2::zeros((self.len(), r));
        for (mut row, rec) in out.rows_mut().into_iter().zip(&self.records) {
            row.assign(&ArrayView1::from(&rec.score[..]));
        }
        out
    }

    pub fn score(&self, t: usize) -> Result<ArrayView1<'_, f64>> {
        self.records
            .get(t)
            .map(|r| ArrayView1::from(&r.score[..]))
            .ok_or(Error::OutOfRange {
                index: t,
                len: self.len(),
            })
    }

    /// Structural consistency: ranks, lengths and finiteness.
    pub fn validate(&self) -> Result<()> {
        let (p, r) = self.final_loadings.dim();
        if self.initial_loadings.dim() != (p, r) || p == 0 || r == 0 {
            return Err(Error::Dimension(format!(
                "initial loadings {:?} vs final loadings {:?}",
                self.initial_loadings.dim(),
                (p, r)
            )));
        }
        for (i, rec) in self.records.iter().enumerate() {
            if rec.t != i + 1 {
                return Err(Error::InvalidParameter(format!(
                    "trace record {i} has t = {}, expected {}",
                    rec.t,
                    i + 1
                )));
            }
            if rec.score.len() != r {
                return Err(Error::Dimension(format!(
                    "step {} score has length {}, rank is {r}",
                    rec.t,
                    rec.score.len()
                )));
            }
            let scalars = [
                rec.eta,
                rec.score_norm,
                rec.loss_at_anchor,
                rec.post_update_loss,
                rec.grad_loadings_norm,
                rec.loading_norm_sq,
                rec.loading_delta_norm,
                rec.curvature,
            ];
            if !scalars.iter().chain(rec.score.iter()).all(|v| v.is_finite()) {
                return Err(Error::NonFinite(format!("trace step {}", rec.t)));
            }
        }
        if let Some(snaps) = &self.snapshots {
            if snaps.len() != self.len() {
                return Err(Error::Dimension(format!(
                    "{} snapshots for {} steps",
                    snaps.len(),
                    self.len()
                )));
            }
            if snaps.iter().any(|s| s.dim() != (p, r)) {
                return Err(Error::Dimension("snapshot shape differs from loadings".into()));
            }
        }
        let all = self
            .initial_loadings
            .iter()
            .chain(self.final_loadings.iter())
            .chain(self.snapshots.iter().flatten().flat_map(|s| s.iter()));
        if !all.into_iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("trace loadings".into()));
        }
        Ok(())
    }

    /// Ṽ^0, …, Ṽ^N. Taken from the snapshots when present, otherwise
    /// rebuilt by replaying the loading updates from the initial loadings
    /// with the stored scores, which reproduces the run exactly.
    pub fn loading_sequence(&self, data: &BinaryMatrix) -> Result<Vec<Array2<f64>>> {
        if let Some(snaps) = &self.snapshots {
            let mut seq = snaps.clone();
            seq.push(self.final_loadings.clone());
            return Ok(seq);
        }
        self.check_data(data)?;
        let mut seq = Vec::with_capacity(self.len() + 1);
        seq.push(self.initial_loadings.clone());
        for (i, rec) in self.records.iter().enumerate() {
            let prev = seq.last().expect("sequence starts non-empty");
            let (next, _) = loading_step(&data.signed_row(i), ArrayView1::from(&rec.score[..]), prev.view(), rec.eta)?;
            seq.push(next);
        }
        Ok(seq)
    }

    pub(crate) fn check_data(&self, data: &BinaryMatrix) -> Result<()> {
        if data.nrows() != self.len() || data.ncols() != self.nfeatures() {
            return Err(Error::Dimension(format!(
                "trace covers {} steps over P = {}, data is {}x{}",
                self.len(),
                self.nfeatures(),
                data.nrows(),
                data.ncols()
            )));
        }
        Ok(())
    }
}

/// Score norms as a plain series, for plotting or trend checks.
pub fn score_norms(trace: &StreamTrace) -> Array1<f64> {
    trace.records.iter().map(|r| r.score_norm).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius_dot, norm_sq};
    use crate::simgen::{gen_correlated_bernoulli, CorrelatedBernoulliSpec};

    const LN2: f64 = std::f64::consts::LN_2;

    fn params() -> Hyperparams {
        Hyperparams::default()
    }

    fn state(p: usize, seed: u64) -> StreamState {
        init_stream(p, 1, StepSchedule::diminishing(0.2).unwrap(), params(), seed).unwrap()
    }

    fn reference_data(n: usize) -> BinaryMatrix {
        gen_correlated_bernoulli(&CorrelatedBernoulliSpec {
            length: n,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn initialization_is_small_and_seeded() {
        let a = state(8, 3);
        let norm = frobenius_norm_sq(a.loadings.view()).sqrt();
        assert!(norm > 0.0 && norm <= 0.03);
        assert!(a.loadings.iter().all(|v| v.abs() <= INIT_SCALE));
        assert_eq!(a.loadings, state(8, 3).loadings);
        assert_eq!(a.step_index, 0);
        assert!(init_stream(0, 1, a.schedule, params(), 0).is_err());
        assert!(init_stream(2, 3, a.schedule, params(), 0).is_err());
    }

    #[test]
    fn zero_loadings_are_a_fixed_point() {
        let mut s = state(4, 0);
        s.loadings.fill(0.0);
        let rec = s.process_row(ndarray::array![1u8, 0, 1, 1].view()).unwrap();
        assert!(rec.score.iter().all(|&v| v == 0.0));
        assert_eq!(rec.grad_loadings_norm, 0.0);
        assert!(s.loadings.iter().all(|&v| v == 0.0));
        assert_eq!(s.step_index, 1);
        assert!((rec.loss_at_anchor - 4.0 * LN2).abs() < 1e-14);
    }

    #[test]
    fn first_step_loss_is_near_uninformative() {
        let data = reference_data(20);
        for t in 0..20 {
            let mut s = state(8, t as u64);
            let rec = s.process_signed(&data.signed_row(t)).unwrap();
            let rel = (rec.loss_at_anchor - 8.0 * LN2).abs() / (8.0 * LN2);
            assert!(rel < 0.01, "{rel}");
        }
    }

    #[test]
    fn step_matches_gradient_and_score_bound() {
        let data = reference_data(300);
        let (_, trace) = run_stream(state(8, 1), &data, true).unwrap();
        let snaps = trace.snapshots.as_ref().unwrap();
        for (i, rec) in trace.records.iter().enumerate() {
            let expected = rec.eta * rec.grad_loadings_norm;
            assert!((rec.loading_delta_norm - expected).abs() <= 1e-12 * expected.max(1e-300));
            // row-wise the gradient is a σ-scaled copy of the score, so the
            // step is at most η√P‖a‖
            assert!(rec.loading_delta_norm <= rec.eta * (8f64).sqrt() * rec.score_norm * (1.0 + 1e-12));
            assert!(rec.score_norm.powi(2) <= 2.0 * 8.0 * LN2 / 0.1);
            let a = ArrayView1::from(&rec.score[..]);
            let grad = loading_gradient(&data.signed_row(i), a, snaps[i].view()).unwrap();
            let next = snaps.get(i + 1).unwrap_or(&trace.final_loadings);
            assert_eq!(next, &(&snaps[i] - &(&grad * rec.eta)));
            // the step is −η∇, so ⟨Ṽ, step⟩ = −η⟨Ṽ, ∇⟩ = ηγ‖a‖² at the score optimum
            let inner = -rec.eta * frobenius_dot(snaps[i].view(), grad.view());
            let expected = rec.eta * 0.1 * norm_sq(a);
            assert!((inner - expected).abs() <= 1e-8 * expected.abs().max(inner.abs()), "{inner} vs {expected}");
        }
    }

    #[test]
    fn empty_stream_is_unchanged() {
        let s = state(3, 0);
        let (after, trace) = run_stream_rows(s.clone(), &[], true).unwrap();
        assert_eq!(after, s);
        assert!(trace.is_empty());
        assert_eq!(trace.snapshots, Some(vec![]));
        assert_eq!(trace.final_loadings, s.loadings);
    }

    #[test]
    fn reference_run_completes_below_uninformative_loss() {
        let data = reference_data(1000);
        let (end, trace) = run_stream(state(8, 0), &data, false).unwrap();
        assert_eq!(end.step_index, 1000);
        assert_eq!(trace.len(), 1000);
        let regret: f64 = trace.records.iter().map(|r| r.post_update_loss).sum::<f64>() / 1000.0;
        assert!(regret.is_finite() && regret < 8.0 * LN2);
        assert!(trace.records.iter().all(|r| r.converged));
    }

    #[test]
    fn reruns_are_bitwise_identical() {
        let data = reference_data(200);
        let (_, a) = run_stream(state(8, 5), &data, true).unwrap();
        let (_, b) = run_stream(state(8, 5), &data, true).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn replay_reproduces_snapshots() {
        let data = reference_data(150);
        let (_, with) = run_stream(state(8, 2), &data, true).unwrap();
        let without = StreamTrace {
            snapshots: None,
            ..with.clone()
        };
        assert_eq!(with.loading_sequence(&data).unwrap(), without.loading_sequence(&data).unwrap());
        without.validate().unwrap();
        with.validate().unwrap();
    }

    #[test]
    fn rejects_wrong_width() {
        let mut s = state(3, 0);
        assert!(s.process_row(ndarray::array![1u8, 0].view()).is_err());
        assert!(s.process_row(ndarray::array![1u8, 0, 2].view()).is_err());
        assert_eq!(s.step_index, 0);
    }
}
