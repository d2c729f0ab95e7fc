//! Stochastic ensemble Kalman filter over the bounded-confidence dynamics.
//!
//! Members are propagated with the noise-free model plus additive Gaussian
//! model noise, then corrected by the ensemble Kalman gain computed from
//! state anomalies `X` and observation-space anomalies `H`:
//!
//! ```text
//! K = X H^T (H H^T + R)^-1 = X (H^T H + R)^-1 H^T      (R = r^2 I)
//! ```
//!
//! Anomalies are scaled by `1 / sqrt(N_e - 1)`. The right-hand form only
//! inverts an `N_e x N_e` matrix, which is what makes edge-level assimilation
//! (m = N(N-1)/2 observations) tractable.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Error, Result};
use crate::linalg::{dot, Cholesky, Matrix};
use crate::model::{deterministic_update, ModelParams, OpinionState};
use crate::observation::{observe_real, Granularity, Observation, ObservationSeries};
use crate::scalar::Scalar;

/// Where the analysis perturbation enters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Perturbation {
    /// `x + K(y - h(x)) + nu`, with `nu ~ N(0, s^2 I)` drawn in state space.
    State,
    /// `x + K(y + eta - h(x))`, with `eta ~ N(0, R)`.
    Observations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub ensemble_size: usize,
    pub model_noise_std: f64,
    pub obs_noise_std: f64,
    /// Standard deviation of the state-space perturbation used by [`Perturbation::State`].
    pub state_perturbation_std: f64,
    pub inflation: f64,
    pub granularity: Granularity,
    pub epsilon_assumed: f64,
    pub clamp_states: bool,
    pub perturbation: Perturbation,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            ensemble_size: 100,
            model_noise_std: 1e-3,
            obs_noise_std: 0.1,
            state_perturbation_std: 1e-3,
            inflation: 1.0,
            granularity: Granularity::Edge,
            epsilon_assumed: 0.2,
            clamp_states: true,
            perturbation: Perturbation::State,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ensemble_size < 2 {
            return Err(invalid("ensemble_size", format!("{} < 2", self.ensemble_size)));
        }
        if !(self.model_noise_std >= 0.0) {
            return Err(invalid("model_noise_std", "must be >= 0"));
        }
        if !(self.obs_noise_std > 0.0) {
            return Err(invalid("obs_noise_std", "must be > 0"));
        }
        if !(self.state_perturbation_std >= 0.0) {
            return Err(invalid("state_perturbation_std", "must be >= 0"));
        }
        if !(self.inflation >= 1.0) {
            return Err(invalid("inflation", "must be >= 1"));
        }
        if !(self.epsilon_assumed > 0.0 && self.epsilon_assumed <= 1.0) {
            return Err(invalid("epsilon_assumed", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Candidate opinion vectors, one per member.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble<T> {
    pub members: Vec<Vec<T>>,
    pub time: usize,
}

impl<T: Scalar> Ensemble<T> {
    pub fn new(members: Vec<Vec<T>>, time: usize) -> Result<Self> {
        if members.len() < 2 {
            return Err(invalid("members", format!("ensemble needs at least 2 members, got {}", members.len())));
        }
        let n = members[0].len();
        for m in &members {
            check_len("ensemble member", n, m.len())?;
        }
        Ok(Ensemble { members, time })
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn n_agents(&self) -> usize {
        self.members[0].len()
    }

    pub fn mean(&self) -> Vec<T> {
        let scale = T::one() / T::lit(self.size() as f64);
        let mut mean = vec![T::zero(); self.n_agents()];
        for m in &self.members {
            for (acc, &x) in mean.iter_mut().zip(m) {
                *acc += x;
            }
        }
        mean.iter_mut().for_each(|x| *x *= scale);
        mean
    }

    /// Per-agent sample standard deviation.
    pub fn spread(&self) -> Vec<T> {
        let mean = self.mean();
        let denom = T::lit((self.size() - 1) as f64);
        (0..self.n_agents())
            .map(|i| {
                let ss: T = self.members.iter().map(|m| (m[i] - mean[i]).powi(2)).sum();
                (ss / denom).sqrt()
            })
            .collect()
    }

    pub fn mean_state(&self) -> OpinionState<T> {
        OpinionState::new(self.mean(), self.time)
    }

    /// Rows `(x_k - mean) / sqrt(N_e - 1)`.
    pub fn scaled_anomalies(&self) -> Matrix<T> {
        anomalies(&self.members)
    }

    /// `h(x_k)` for every member.
    pub fn predict(&self, epsilon: T, granularity: Granularity) -> Vec<Vec<T>> {
        self.members
            .par_iter()
            .map(|m| {
                let mut out = Vec::with_capacity(granularity.dim(m.len()));
                observe_real(m, epsilon, granularity, &mut out);
                out
            })
            .collect()
    }

    fn clamp(&mut self) {
        for m in &mut self.members {
            for x in m.iter_mut() {
                *x = x.clamp_unit();
            }
        }
    }
}

fn anomalies<T: Scalar>(rows: &[Vec<T>]) -> Matrix<T> {
    let n_e = rows.len();
    let dim = rows[0].len();
    let inv_n = T::one() / T::lit(n_e as f64);
    let mut mean = vec![T::zero(); dim];
    for r in rows {
        for (acc, &x) in mean.iter_mut().zip(r) {
            *acc += x;
        }
    }
    mean.iter_mut().for_each(|x| *x *= inv_n);
    let scale = T::one() / T::lit((n_e - 1) as f64).sqrt();
    let mut out = Matrix::zeros(n_e, dim);
    for (k, r) in rows.iter().enumerate() {
        for ((o, &x), &m) in out.row_mut(k).iter_mut().zip(r).zip(&mean) {
            *o = (x - m) * scale;
        }
    }
    out
}

/// Draws the prior ensemble, i.i.d. uniform on `[0, 1]^N`.
pub fn init_ensemble<T: Scalar, R: Rng + ?Sized>(config: &FilterConfig, n_agents: usize, rng: &mut R) -> Result<Ensemble<T>> {
    if config.ensemble_size < 2 {
        return Err(invalid("ensemble_size", format!("{} < 2", config.ensemble_size)));
    }
    if n_agents == 0 {
        return Err(invalid("n_agents", "must be positive"));
    }
    let members = (0..config.ensemble_size)
        .map(|_| (0..n_agents).map(|_| T::sample_unit(rng)).collect())
        .collect();
    Ensemble::new(members, 0)
}

/// Propagates every member one model step under `config.epsilon_assumed`,
/// adds model noise and applies multiplicative inflation.
pub fn forecast_step<T: Scalar, R: Rng + ?Sized>(
    ensemble: &Ensemble<T>,
    params: &ModelParams,
    config: &FilterConfig,
    rng: &mut R,
) -> Ensemble<T> {
    let epsilon = T::lit(config.epsilon_assumed);
    let mu = T::lit(params.mu);
    let mut members: Vec<Vec<T>> = ensemble
        .members
        .par_iter()
        .map(|m| {
            let mut next = vec![T::zero(); m.len()];
            deterministic_update(m, epsilon, mu, &mut next);
            next
        })
        .collect();
    if config.model_noise_std > 0.0 {
        let s = T::lit(config.model_noise_std);
        for m in &mut members {
            for x in m.iter_mut() {
                *x += s * T::sample_standard_normal(rng);
            }
        }
    }
    let mut next = Ensemble {
        members,
        time: ensemble.time + 1,
    };
    if config.inflation > 1.0 {
        let lambda = T::lit(config.inflation);
        let mean = next.mean();
        for m in &mut next.members {
            for (x, &c) in m.iter_mut().zip(&mean) {
                *x = c + lambda * (*x - c);
            }
        }
    }
    if config.clamp_states {
        next.clamp();
    }
    next
}

/// Explicit `N x m` gain for the configured granularity. Uses the
/// ensemble-subspace form when `m` exceeds the ensemble size.
pub fn kalman_gain<T: Scalar>(forecast: &Ensemble<T>, config: &FilterConfig) -> Result<Matrix<T>> {
    config.validate()?;
    let predictions = forecast.predict(T::lit(config.epsilon_assumed), config.granularity);
    let state = forecast.scaled_anomalies();
    let obs = anomalies(&predictions);
    let r2 = T::lit(config.obs_noise_std * config.obs_noise_std);
    if obs.cols() > forecast.size() {
        kalman_gain_subspace(&state, &obs, r2)
    } else {
        kalman_gain_dense(&state, &obs, r2)
    }
}

/// `K = X H^T (H H^T + r^2 I_m)^-1`, with anomaly matrices stored one member
/// per row (`state`: N_e x N, `obs`: N_e x m).
pub fn kalman_gain_dense<T: Scalar>(state: &Matrix<T>, obs: &Matrix<T>, r2: T) -> Result<Matrix<T>> {
    check_len("anomaly members", state.rows(), obs.rows())?;
    // H^T H in member-row layout is (m x m): S = obs^T obs + r2 I.
    let obs_t = obs.transpose();
    let mut s = obs_t.gram_rows();
    for i in 0..s.rows() {
        s[(i, i)] += r2;
    }
    let chol = Cholesky::new(&s)?;
    // K^T = S^-1 (H X^T)
    let cross = obs_t.matmul(state); // m x N
    Ok(chol.solve_matrix(&cross).transpose())
}

/// Same gain via `X (H^T H + r^2 I_Ne)^-1 H^T`, inverting only `N_e x N_e`.
pub fn kalman_gain_subspace<T: Scalar>(state: &Matrix<T>, obs: &Matrix<T>, r2: T) -> Result<Matrix<T>> {
    check_len("anomaly members", state.rows(), obs.rows())?;
    let chol = Cholesky::new(&ensemble_gram(obs, r2))?;
    let weights = chol.solve_matrix(obs); // N_e x m
    Ok(state.transpose().matmul(&weights))
}

fn ensemble_gram<T: Scalar>(obs: &Matrix<T>, r2: T) -> Matrix<T> {
    let mut g = obs.gram_rows();
    for i in 0..g.rows() {
        g[(i, i)] += r2;
    }
    g
}

/// Corrects a forecast ensemble with one observation.
///
/// The gain is never formed: with `d_k = y - h(x_k)` the update is
/// `K d_k = X G^-1 H^T d_k`, `G = H^T H + R`, an `N_e x N_e` solve.
pub fn analysis_step<T: Scalar, R: Rng + ?Sized>(
    forecast: &Ensemble<T>,
    observation: &Observation,
    config: &FilterConfig,
    rng: &mut R,
) -> Result<Ensemble<T>> {
    config.validate()?;
    if observation.granularity() != config.granularity {
        return Err(Error::GranularityMismatch {
            expected: config.granularity.to_string(),
            actual: observation.granularity().to_string(),
        });
    }
    let n_e = forecast.size();
    let m = config.granularity.dim(forecast.n_agents());
    check_len("observation", m, observation.dim())?;

    let y: Vec<T> = observation.to_vector();
    let predictions = forecast.predict(T::lit(config.epsilon_assumed), config.granularity);
    let obs = anomalies(&predictions);
    let state = forecast.scaled_anomalies();
    let r = T::lit(config.obs_noise_std);
    let gram = obs.gram_rows();
    let mut g = gram.clone();
    for i in 0..n_e {
        g[(i, i)] += r * r;
    }
    let chol = Cholesky::new(&g)?;

    // d_k = (y - mean_h) - sqrt(N_e - 1) H_k, so H d_k needs one pass over
    // the observations plus a column of the Gram matrix.
    let inv_n = T::one() / T::lit(n_e as f64);
    let mut centred = y.clone();
    for p in &predictions {
        for (c, &h) in centred.iter_mut().zip(p) {
            *c -= h * inv_n;
        }
    }
    let base: Vec<T> = (0..n_e).map(|l| dot(obs.row(l), &centred)).collect();
    let root = T::lit((n_e - 1) as f64).sqrt();
    let mut rhs = Matrix::zeros(n_e, n_e);
    let mut eta = vec![T::zero(); m];
    for k in 0..n_e {
        if config.perturbation == Perturbation::Observations {
            for e in eta.iter_mut() {
                *e = r * T::sample_standard_normal(rng);
            }
        }
        let row = rhs.row_mut(k);
        for (l, slot) in row.iter_mut().enumerate() {
            *slot = base[l] - root * gram[(l, k)];
            if config.perturbation == Perturbation::Observations {
                *slot += dot(obs.row(l), &eta);
            }
        }
    }

    let n = forecast.n_agents();
    let mut members = Vec::with_capacity(n_e);
    for k in 0..n_e {
        let mut w = rhs.row(k).to_vec();
        chol.solve_in_place(&mut w);
        let mut x = forecast.members[k].clone();
        for (l, &wl) in w.iter().enumerate() {
            if wl == T::zero() {
                continue;
            }
            for (xi, &a) in x.iter_mut().zip(state.row(l)) {
                *xi += a * wl;
            }
        }
        members.push(x);
    }
    debug_assert!(members.iter().all(|x| x.len() == n));

    if config.perturbation == Perturbation::State && config.state_perturbation_std > 0.0 {
        let s = T::lit(config.state_perturbation_std);
        for x in &mut members {
            for xi in x.iter_mut() {
                *xi += s * T::sample_standard_normal(rng);
            }
        }
    }
    let mut next = Ensemble {
        members,
        time: forecast.time,
    };
    if config.clamp_states {
        next.clamp();
    }
    Ok(next)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterResult<T> {
    /// Ensemble mean after each analysis, one per observed step.
    pub estimate_series: Vec<OpinionState<T>>,
    pub spread_series: Vec<Vec<T>>,
    pub final_ensemble: Ensemble<T>,
}

/// Runs the filter over `observations`, assimilating `y(0)` into the prior
/// and alternating forecast and analysis for every later step.
pub fn assimilate<T: Scalar, R: Rng + ?Sized>(
    observations: &ObservationSeries,
    params: &ModelParams,
    config: &FilterConfig,
    rng: &mut R,
) -> Result<FilterResult<T>> {
    config.validate()?;
    if observations.granularity != config.granularity {
        return Err(Error::GranularityMismatch {
            expected: config.granularity.to_string(),
            actual: observations.granularity.to_string(),
        });
    }
    observations.check_dim(params.n_agents)?;

    let mut ensemble = init_ensemble(config, params.n_agents, rng)?;
    let mut estimate_series = Vec::with_capacity(observations.len().max(1));
    let mut spread_series = Vec::with_capacity(observations.len().max(1));
    if observations.is_empty() {
        estimate_series.push(ensemble.mean_state());
        spread_series.push(ensemble.spread());
    }
    for (t, y) in observations.values.iter().enumerate() {
        if t > 0 {
            ensemble = forecast_step(&ensemble, params, config, rng);
        }
        ensemble = analysis_step(&ensemble, y, config, rng)?;
        ensemble.time = t;
        estimate_series.push(ensemble.mean_state());
        spread_series.push(ensemble.spread());
    }
    Ok(FilterResult {
        estimate_series,
        spread_series,
        final_ensemble: ensemble,
    })
}
