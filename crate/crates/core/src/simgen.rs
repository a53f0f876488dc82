//! Synthetic binary data: correlated Bernoulli streams, planted low-rank
//! logistic data with known factors, and a day/night occupancy stream.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::sigmoid;
use crate::model::{BinaryMatrix, FactorModel};

fn check_prob(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must lie in [0,1], got {p}")))
    }
}

fn check_shape(n: usize, p: usize) -> Result<()> {
    if n == 0 || p == 0 {
        return Err(Error::InvalidParameter(format!(
            "generator shape must be at least 1x1, got {n}x{p}"
        )));
    }
    Ok(())
}

/// Common-variable mixture: each cell copies a shared draw Z_t with
/// probability `mixing_prob`, otherwise takes its own independent draw.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelatedBernoulliSpec {
    pub dims: usize,
    pub length: usize,
    pub marginal_p: f64,
    pub mixing_prob: f64,
    pub seed: u64,
}

impl Default for CorrelatedBernoulliSpec {
    fn default() -> Self {
        Self {
            dims: 8,
            length: 1000,
            marginal_p: 0.5,
            mixing_prob: 0.7,
            seed: 0,
        }
    }
}

/// X_tj = U_tj·Z_t + (1 − U_tj)·Y_tj with Z, Y ~ Bernoulli(p) and
/// U ~ Bernoulli(ρ). Marginals stay Bernoulli(p); the pairwise correlation
/// of two columns is ρ².
pub fn gen_correlated_bernoulli(spec: &CorrelatedBernoulliSpec) -> Result<BinaryMatrix> {
    check_shape(spec.length, spec.dims)?;
    check_prob("marginal_p", spec.marginal_p)?;
    check_prob("mixing_prob", spec.mixing_prob)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut values = Vec::with_capacity(spec.length * spec.dims);
    for _ in 0..spec.length {
        let z = rng.random_bool(spec.marginal_p);
        for _ in 0..spec.dims {
            let u = rng.random_bool(spec.mixing_prob);
            let y = rng.random_bool(spec.marginal_p);
            values.push(u8::from(if u { z } else { y }));
        }
    }
    BinaryMatrix::from_shape_vec(spec.length, spec.dims, values)
}

/// Draws unit-norm score and loading directions, scales both so that
/// `fraction` of the cells have |θ| ≥ `magnitude`, and samples
/// x ~ Bernoulli(σ(θ)). For rank 1 every cell has |θ| = magnitude exactly.
pub fn gen_planted_lowrank(
    n: usize,
    p: usize,
    rank: usize,
    magnitude: f64,
    fraction: f64,
    seed: u64,
) -> Result<(BinaryMatrix, FactorModel)> {
    check_shape(n, p)?;
    if !(magnitude >= 0.0 && magnitude.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "magnitude must be finite and nonnegative, got {magnitude}"
        )));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "fraction must lie in (0,1], got {fraction}"
        )));
    }
    if rank == 0 || rank > n.min(p) {
        return Err(Error::InvalidParameter(format!(
            "rank {rank} must lie in [1, min(N={n}, P={p})]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut unit_rows = |rows: usize| {
        let mut m = Array2::<f64>::zeros((rows, rank));
        for mut row in m.rows_mut() {
            loop {
                row.mapv_inplace(|_| rng.random_range(-1.0..1.0));
                let norm = row.dot(&row).sqrt();
                if norm > 1e-3 {
                    row /= norm;
                    break;
                }
            }
        }
        m
    };
    let a_dir = unit_rows(n);
    let v_dir = unit_rows(p);

    // |cos| quantile that `fraction` of the cells exceed
    let mut cosines: Vec<f64> = a_dir.dot(&v_dir.t()).iter().map(|c| c.abs()).collect();
    cosines.sort_by(|x, y| x.total_cmp(y));
    let idx = ((1.0 - fraction) * cosines.len() as f64).floor() as usize;
    let q = cosines[idx.min(cosines.len() - 1)].max(1e-12);
    let scale = (magnitude / q).sqrt();
    let scores = a_dir * scale;
    let loadings = v_dir * scale;

    let theta = scores.dot(&loadings.t());
    let values: Vec<u8> = theta
        .iter()
        .map(|&th| u8::from(rng.random::<f64>() < sigmoid(th)))
        .collect();
    let data = BinaryMatrix::from_shape_vec(n, p, values)?;
    Ok((data, FactorModel::new(scores, loadings)?))
}

/// Stand-in for occupant-driven appliance data: every column shares a daily
/// on/off phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DayNightSpec {
    pub dims: usize,
    /// Samples per day.
    pub period: usize,
    pub day_on_prob: f64,
    pub night_on_prob: f64,
    pub day_fraction: f64,
    pub length: usize,
    pub seed: u64,
}

impl Default for DayNightSpec {
    fn default() -> Self {
        Self {
            dims: 6,
            period: 144,
            day_on_prob: 0.85,
            night_on_prob: 0.1,
            day_fraction: 0.5,
            length: 2016,
            seed: 0,
        }
    }
}

pub fn is_day(spec: &DayNightSpec, t: usize) -> bool {
    ((t % spec.period) as f64) / (spec.period as f64) < spec.day_fraction
}

pub fn gen_day_night(spec: &DayNightSpec) -> Result<BinaryMatrix> {
    check_shape(spec.length, spec.dims)?;
    check_prob("day_on_prob", spec.day_on_prob)?;
    check_prob("night_on_prob", spec.night_on_prob)?;
    if spec.period == 0 {
        return Err(Error::InvalidParameter("period must be at least 1".into()));
    }
    if !(spec.day_fraction > 0.0 && spec.day_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "day_fraction must lie in (0,1), got {}",
            spec.day_fraction
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut values = Vec::with_capacity(spec.length * spec.dims);
    for t in 0..spec.length {
        let prob = if is_day(spec, t) {
            spec.day_on_prob
        } else {
            spec.night_on_prob
        };
        for _ in 0..spec.dims {
            values.push(u8::from(rng.random_bool(prob)));
        }
    }
    BinaryMatrix::from_shape_vec(spec.length, spec.dims, values)
}

/// Sample Pearson correlation of two columns; `None` when either is constant.
pub fn column_correlation(data: &BinaryMatrix, i: usize, j: usize) -> Option<f64> {
    let n = data.nrows() as f64;
    let xi: Array1<f64> = data.as_array().column(i).mapv(f64::from);
    let xj: Array1<f64> = data.as_array().column(j).mapv(f64::from);
    let (mi, mj) = (xi.sum() / n, xj.sum() / n);
    let cov = xi.iter().zip(xj.iter()).map(|(a, b)| (a - mi) * (b - mj)).sum::<f64>();
    let vi = xi.iter().map(|a| (a - mi).powi(2)).sum::<f64>();
    let vj = xj.iter().map(|b| (b - mj).powi(2)).sum::<f64>();
    if vi == 0.0 || vj == 0.0 {
        None
    } else {
        Some(cov / (vi * vj).sqrt())
    }
}

/// Mean of the pairwise column correlations over all i < j.
pub fn mean_pairwise_correlation(data: &BinaryMatrix) -> Option<f64> {
    let p = data.ncols();
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..p {
        for j in (i + 1)..p {
            sum += column_correlation(data, i, j)?;
            count += 1;
        }
    }
    (count > 0).then(|| sum / count as f64)
}

pub fn column_means(data: &BinaryMatrix) -> Vec<f64> {
    let n = data.nrows() as f64;
    data.as_array()
        .columns()
        .into_iter()
        .map(|c| c.iter().map(|&v| f64::from(v)).sum::<f64>() / n)
        .collect()
}
