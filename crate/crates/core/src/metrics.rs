//! Reconstruction and forecasting error metrics.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::model::OpinionState;
use crate::observation::{pair_count, pairs, EdgeObservation};
use crate::scalar::Scalar;

fn mean_abs<T: Scalar>(a: impl Iterator<Item = T>, n: usize) -> T {
    a.sum::<T>() / T::lit(n as f64)
}

/// Mean absolute error between opinion vectors.
pub fn reconstruction_error<T: Scalar>(truth: &[T], estimate: &[T]) -> Result<T> {
    check_len("estimate", truth.len(), estimate.len())?;
    Ok(mean_abs(truth.iter().zip(estimate).map(|(&x, &e)| (x - e).abs()), truth.len()))
}

/// Per-agent error up to reflection of the estimate about 1/2.
pub fn symmetric_error<T: Scalar>(truth: &[T], estimate: &[T]) -> Result<T> {
    check_len("estimate", truth.len(), estimate.len())?;
    Ok(mean_abs(
        truth
            .iter()
            .zip(estimate)
            .map(|(&x, &e)| (x - e).abs().min((x - (T::one() - e)).abs())),
        truth.len(),
    ))
}

/// Error between the sorted opinion distributions, ignoring agent identity.
pub fn sorted_error<T: Scalar>(truth: &[T], estimate: &[T]) -> Result<T> {
    check_len("estimate", truth.len(), estimate.len())?;
    let mut a = truth.to_vec();
    let mut b = estimate.to_vec();
    a.sort_by(|x, y| x.partial_cmp(y).expect("finite opinions"));
    b.sort_by(|x, y| x.partial_cmp(y).expect("finite opinions"));
    reconstruction_error(&a, &b)
}

fn check_probs<T: Scalar>(truth_len: usize, probs: &[T]) -> Result<()> {
    check_len("forecast probabilities", truth_len, probs.len())
}

/// `(1/E) sum |y_ij - p_ij|`.
pub fn forecast_edge_error<T: Scalar>(truth: &EdgeObservation, probs: &[T]) -> Result<T> {
    check_probs(truth.indicators.len(), probs)?;
    Ok(mean_abs(
        truth.indicators.iter().zip(probs).map(|(&y, &p)| (indicator::<T>(y) - p).abs()),
        probs.len(),
    ))
}

/// `(1/N) sum_i |y_i - sum_j p_ij|`, the inner sum over pairs containing `i`.
pub fn forecast_node_error<T: Scalar>(truth_counts: &[u32], probs: &[T]) -> Result<T> {
    let n = truth_counts.len();
    check_probs(pair_count(n), probs)?;
    let expected = expected_node_counts(n, probs);
    Ok(mean_abs(
        truth_counts
            .iter()
            .zip(&expected)
            .map(|(&c, &e)| (T::lit(f64::from(c)) - e).abs()),
        n,
    ))
}

/// `|y - sum_ij p_ij|`.
pub fn forecast_global_error<T: Scalar>(truth_total: u64, probs: &[T]) -> T {
    (T::lit(truth_total as f64) - probs.iter().copied().sum::<T>()).abs()
}

/// Mean squared probability error; lower is better.
pub fn brier<T: Scalar>(truth: &EdgeObservation, probs: &[T]) -> Result<T> {
    check_probs(truth.indicators.len(), probs)?;
    Ok(mean_abs(
        truth
            .indicators
            .iter()
            .zip(probs)
            .map(|(&y, &p)| (indicator::<T>(y) - p).powi(2)),
        probs.len(),
    ))
}

/// Expected interaction count of each agent under pair probabilities.
pub fn expected_node_counts<T: Scalar>(n_agents: usize, probs: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); n_agents];
    for ((i, j), &p) in pairs(n_agents).zip(probs) {
        out[i] += p;
        out[j] += p;
    }
    out
}

#[inline]
fn indicator<T: Scalar>(y: bool) -> T {
    if y {
        T::one()
    } else {
        T::zero()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub e_plain: f64,
    pub e_symm: f64,
    pub e_sort: f64,
    pub time: usize,
}

impl ReconstructionReport {
    pub fn evaluate<T: Scalar>(truth: &OpinionState<T>, estimate: &OpinionState<T>) -> Result<Self> {
        Ok(ReconstructionReport {
            e_plain: reconstruction_error(&truth.opinions, &estimate.opinions)?.as_f64(),
            e_symm: symmetric_error(&truth.opinions, &estimate.opinions)?.as_f64(),
            e_sort: sorted_error(&truth.opinions, &estimate.opinions)?.as_f64(),
            time: truth.time,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastReport {
    pub time: usize,
    pub f_edge: f64,
    pub f_node: f64,
    pub f_global: f64,
    pub brier: f64,
}

impl ForecastReport {
    /// All forecast metrics of one step against observed edges.
    pub fn evaluate<T: Scalar>(truth: &EdgeObservation, probs: &[T]) -> Result<Self> {
        let counts = truth.node_counts()?;
        Ok(ForecastReport {
            time: truth.time,
            f_edge: forecast_edge_error(truth, probs)?.as_f64(),
            f_node: forecast_node_error(&counts, probs)?.as_f64(),
            f_global: forecast_global_error(truth.total(), probs).as_f64(),
            brier: brier(truth, probs)?.as_f64(),
        })
    }
}

/// Reference predictor used to normalize an error series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Baseline<'a, T> {
    None,
    /// Errors of a constant predictor evaluated on the same data, step by step.
    ConstantPredictor(&'a [T]),
}

/// Divides each error by the baseline's error at the same position.
pub fn normalize_errors<T: Scalar>(errors: &[T], baseline: Baseline<'_, T>) -> Result<Vec<T>> {
    match baseline {
        Baseline::None => Ok(errors.to_vec()),
        Baseline::ConstantPredictor(reference) => {
            check_len("baseline errors", errors.len(), reference.len())?;
            errors
                .iter()
                .zip(reference)
                .map(|(&e, &b)| if b == T::zero() { Err(Error::ZeroBaseline) } else { Ok(e / b) })
                .collect()
        }
    }
}
