//! Binary state reconstruction through the logistic link, plus the
//! aggregate on-count series and a few periodicity helpers.

use std::fmt;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::sigmoid;
use crate::model::{BinaryMatrix, FactorModel};
use crate::stream::StreamTrace;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pairing {
    /// Batch scores with batch loadings.
    Batch,
    /// Streamed scores with the loadings after the last row.
    SequentialFinal,
    /// Each streamed score with the loadings right after its own update.
    Regret,
}

impl Pairing {
    pub const ALL: [Pairing; 3] = [Pairing::Batch, Pairing::SequentialFinal, Pairing::Regret];
}

impl fmt::Display for Pairing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pairing::Batch => "batch",
            Pairing::SequentialFinal => "sequential-final",
            Pairing::Regret => "regret",
        })
    }
}

/// Where the natural parameters come from.
#[derive(Clone, Copy, Debug)]
pub enum Factors<'a> {
    Batch(&'a FactorModel),
    SequentialFinal(&'a StreamTrace),
    /// Needs a trace recorded with snapshots.
    Regret(&'a StreamTrace),
}

impl Factors<'_> {
    pub fn pairing(&self) -> Pairing {
        match self {
            Factors::Batch(_) => Pairing::Batch,
            Factors::SequentialFinal(_) => Pairing::SequentialFinal,
            Factors::Regret(_) => Pairing::Regret,
        }
    }

    pub fn natural_parameters(&self) -> Result<Array2<f64>> {
        match *self {
            Factors::Batch(model) => Ok(model.natural_parameter_matrix()),
            Factors::SequentialFinal(trace) => {
                if trace.is_empty() {
                    return Err(Error::Empty("trace has no steps to reconstruct".into()));
                }
                Ok(trace.score_matrix().dot(&trace.final_loadings.t()))
            }
            Factors::Regret(trace) => {
                if trace.is_empty() {
                    return Err(Error::Empty("trace has no steps to reconstruct".into()));
                }
                let snaps = trace
                    .snapshots
                    .as_ref()
                    .ok_or(Error::MissingSnapshots("regret-paired reconstruction"))?;
                let n = trace.len();
                let mut theta = Array2::zeros((n, trace.nfeatures()));
                for (t, mut row) in theta.rows_mut().into_iter().enumerate() {
                    // loadings right after step t are the ones seen by step t+1
                    let after = snaps.get(t + 1).unwrap_or(&trace.final_loadings);
                    row.assign(&after.dot(&trace.score(t)?));
                }
                Ok(theta)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReconstructionSeries {
    pub probabilities: Array2<f64>,
    pub states: BinaryMatrix,
    /// Row sums of `states`.
    pub aggregate: Vec<usize>,
    pub pairing: Pairing,
}

pub fn reconstruct(factors: Factors<'_>) -> Result<ReconstructionSeries> {
    from_natural_parameters(factors.natural_parameters()?, factors.pairing())
}

/// σ(θ) elementwise, thresholded at ½ with ties going to 1.
pub fn from_natural_parameters(theta: Array2<f64>, pairing: Pairing) -> Result<ReconstructionSeries> {
    if !theta.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("natural parameters".into()));
    }
    let probabilities = theta.mapv(sigmoid);
    let states = BinaryMatrix::from_array(probabilities.mapv(|p| u8::from(p >= 0.5)))?;
    let aggregate = states.row_sums();
    Ok(ReconstructionSeries {
        probabilities,
        states,
        aggregate,
        pairing,
    })
}

/// Fraction of cells where the two matrices disagree.
pub fn hamming_error(states: &BinaryMatrix, reference: &BinaryMatrix) -> Result<f64> {
    if states.as_array().dim() != reference.as_array().dim() {
        return Err(Error::Dimension(format!(
            "states are {}x{}, reference is {}x{}",
            states.nrows(),
            states.ncols(),
            reference.nrows(),
            reference.ncols()
        )));
    }
    let differ = states
        .as_array()
        .iter()
        .zip(reference.as_array().iter())
        .filter(|(a, b)| a != b)
        .count();
    Ok(differ as f64 / (states.nrows() * states.ncols()) as f64)
}

/// Sample autocorrelation at lags 0..=max_lag (lag 0 is 1). A constant
/// series gives zeros past lag 0.
pub fn autocorrelation(series: &[f64], max_lag: usize) -> Vec<f64> {
    let n = series.len();
    if n == 0 {
        return vec![0.0; max_lag + 1];
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let centred: Vec<f64> = series.iter().map(|v| v - mean).collect();
    let var: f64 = centred.iter().map(|v| v * v).sum();
    (0..=max_lag)
        .map(|lag| {
            if lag == 0 {
                1.0
            } else if var == 0.0 || lag >= n {
                0.0
            } else {
                centred[..n - lag]
                    .iter()
                    .zip(&centred[lag..])
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    / var
            }
        })
        .collect()
}

/// Lag in `min_lag..=max_lag` with the largest autocorrelation, searched
/// only past the first lag where the autocorrelation turns negative so that
/// slow decay near lag 0 is not mistaken for a cycle.
pub fn dominant_period(series: &[f64], min_lag: usize, max_lag: usize) -> Option<usize> {
    if min_lag == 0 || min_lag > max_lag || max_lag >= series.len() {
        return None;
    }
    let acf = autocorrelation(series, max_lag);
    let start = (min_lag..=max_lag).find(|&l| acf[l] < 0.0)?;
    (start..=max_lag).max_by(|&a, &b| acf[a].total_cmp(&acf[b]))
}

pub fn aggregate_as_f64(aggregate: &[usize]) -> Vec<f64> {
    aggregate.iter().map(|&v| v as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Hyperparams, StepSchedule};
    use crate::simgen::gen_planted_lowrank;
    use crate::stream::{init_stream, run_stream};
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn zero_parameters_tie_to_one() {
        let series = from_natural_parameters(Array2::zeros((3, 4)), Pairing::Batch).unwrap();
        assert!(series.probabilities.iter().all(|&p| p == 0.5));
        assert!(series.states.as_array().iter().all(|&s| s == 1));
        assert_eq!(series.aggregate, vec![4, 4, 4]);
    }

    #[test]
    fn negative_three_maps_to_zero_state() {
        let series = from_natural_parameters(array![[-3.0]], Pairing::Batch).unwrap();
        assert!((series.probabilities[[0, 0]] - 0.047_425_873_177_566_78).abs() < 1e-15);
        assert_eq!(series.states.get(0, 0), 0);
    }

    #[test]
    fn saturated_truth_reconstructs_exactly() {
        let (data, truth) = gen_planted_lowrank(60, 8, 1, 50.0, 1.0, 6).unwrap();
        let series = reconstruct(Factors::Batch(&truth)).unwrap();
        assert_eq!(series.states, data);
    }

    #[test]
    fn hamming_counts() {
        let a = BinaryMatrix::from_rows(&vec![vec![1, 0, 1, 0]; 4]).unwrap();
        let b = BinaryMatrix::from_rows(&vec![vec![0, 1, 0, 1]; 4]).unwrap();
        assert_eq!(hamming_error(&a, &a).unwrap(), 0.0);
        assert_eq!(hamming_error(&a, &b).unwrap(), 1.0);
        let mut flipped = a.as_array().to_owned();
        flipped[[2, 3]] = 1;
        let flipped = BinaryMatrix::from_array(flipped).unwrap();
        assert_eq!(hamming_error(&a, &flipped).unwrap(), 1.0 / 16.0);
        let short = BinaryMatrix::from_rows(&[vec![1, 0, 1, 0]]).unwrap();
        assert!(hamming_error(&a, &short).is_err());
    }

    #[test]
    fn regret_pairing_needs_snapshots() {
        let (data, _) = gen_planted_lowrank(30, 4, 1, 3.0, 1.0, 1).unwrap();
        let state = init_stream(4, 1, StepSchedule::constant(0.05).unwrap(), Hyperparams::default(), 0).unwrap();
        let (_, without) = run_stream(state.clone(), &data, false).unwrap();
        assert!(matches!(
            reconstruct(Factors::Regret(&without)),
            Err(Error::MissingSnapshots(_))
        ));
        let (_, with) = run_stream(state, &data, true).unwrap();
        let regret = reconstruct(Factors::Regret(&with)).unwrap();
        let last = reconstruct(Factors::SequentialFinal(&with)).unwrap();
        // the final step pairs with the final loadings in both
        assert_eq!(regret.probabilities.row(29), last.probabilities.row(29));
        let snaps = with.snapshots.as_ref().unwrap();
        let expected = snaps[4].dot(&with.score(3).unwrap()).mapv(sigmoid);
        assert_eq!(regret.probabilities.row(3), expected);
    }

    #[test]
    fn autocorrelation_of_square_wave() {
        let series: Vec<f64> = (0..200).map(|t| if t % 20 < 10 { 1.0 } else { 0.0 }).collect();
        assert_eq!(dominant_period(&series, 2, 30), Some(20));
        let acf = autocorrelation(&series, 10);
        assert_eq!(acf[0], 1.0);
        assert!(acf[10] < -0.9);
        assert!(autocorrelation(&[2.0; 5], 2).iter().skip(1).all(|&v| v == 0.0));
        assert_eq!(dominant_period(&series, 0, 10), None);
        // never negative within the window
        assert_eq!(dominant_period(&series, 2, 4), None);
    }

    proptest! {
        #[test]
        fn states_invariant_to_positive_scaling(
            a in prop::collection::vec(-3.0f64..3.0, 6),
            v in prop::collection::vec(-3.0f64..3.0, 4),
            c in 0.01f64..100.0,
        ) {
            let scores = Array2::from_shape_vec((3, 2), a).unwrap();
            let loadings = Array2::from_shape_vec((2, 2), v).unwrap();
            let base = FactorModel::new(scores.clone(), loadings.clone()).unwrap();
            let scaled = FactorModel::new(scores * c, loadings).unwrap();
            let s1 = reconstruct(Factors::Batch(&base)).unwrap();
            let s2 = reconstruct(Factors::Batch(&scaled)).unwrap();
            let theta = base.natural_parameter_matrix();
            for ((idx, &th), &s) in theta.indexed_iter().zip(s2.states.as_array().iter()) {
                // rounding can move θ across zero only when it is essentially zero
                if th.abs() > 1e-12 {
                    prop_assert_eq!(s, u8::from(th > 0.0));
                    prop_assert_eq!(s1.states.get(idx.0, idx.1), s);
                }
            }
            for (t, &agg) in s1.aggregate.iter().enumerate() {
                let sum: usize = s1.states.row(t).iter().map(|&v| usize::from(v)).sum();
                prop_assert_eq!(agg, sum);
                prop_assert!(agg <= 2);
            }
            prop_assert!(s1.probabilities.iter().all(|p| (0.0..=1.0).contains(p)));
        }
    }
}
