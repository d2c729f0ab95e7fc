//! Likelihood-based recovery of initial opinions.
//!
//! The free variables are unconstrained `z` with `x(0) = logistic(z)`. Each
//! iteration rolls the noise-free model forward from `x(0)`, scores every
//! observed pair with a logistic relaxation of the confidence rule, and
//! back-propagates the cross-entropy to `z`. Several random restarts run
//! independently; the one with the lowest final loss wins.

mod loss;
mod tape;

pub use loss::{gradient, interaction_logits, interaction_probabilities, loss, loss_and_gradient};
pub use tape::{rollout, RolloutTape};

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adam::Adam;
use crate::error::{invalid, Error, Result};
use crate::model::OpinionState;
use crate::observation::{EdgeObservation, ObservationSeries};
use crate::rng::{substream, Stream};
use crate::scalar::{logistic, logit, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LbiConfig {
    pub epsilon_assumed: f64,
    pub mu: f64,
    /// Logit scale `k`.
    pub sharpness: f64,
    pub learning_rate: f64,
    pub iterations: usize,
    pub restarts: usize,
    pub weight_decay: f64,
    pub seed: u64,
    pub horizon_train: usize,
    /// Stop a restart early once the loss improved by less than this
    /// relative amount over the last `patience` iterations; 0 disables.
    pub tolerance: f64,
    pub patience: usize,
    /// Logit scale at the first iteration; raised geometrically to
    /// `sharpness` over the first `anneal_fraction` of the iterations.
    pub initial_sharpness: f64,
    pub anneal_fraction: f64,
}

impl Default for LbiConfig {
    fn default() -> Self {
        LbiConfig {
            epsilon_assumed: 0.2,
            mu: 1e-4,
            sharpness: 50.0,
            learning_rate: 0.05,
            iterations: 2000,
            restarts: 5,
            weight_decay: 0.0,
            seed: 0,
            horizon_train: 250,
            tolerance: 0.0,
            patience: 50,
            initial_sharpness: 50.0,
            anneal_fraction: 0.0,
        }
    }
}

impl LbiConfig {
    /// Logit scale used at `iteration`.
    pub fn sharpness_at(&self, iteration: usize) -> f64 {
        let ramp = (self.anneal_fraction * self.iterations as f64).floor();
        if ramp < 1.0 || iteration as f64 >= ramp {
            return self.sharpness;
        }
        let progress = iteration as f64 / ramp;
        self.initial_sharpness * (self.sharpness / self.initial_sharpness).powf(progress)
    }

    fn annealing_done(&self, iteration: usize) -> bool {
        iteration as f64 >= (self.anneal_fraction * self.iterations as f64).floor()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sharpness > 0.0) {
            return Err(invalid("sharpness", "must be > 0"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(invalid("learning_rate", "must be > 0"));
        }
        if self.restarts == 0 {
            return Err(invalid("restarts", "must be >= 1"));
        }
        if self.iterations == 0 {
            return Err(invalid("iterations", "must be >= 1"));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(invalid("weight_decay", "must be >= 0"));
        }
        if !(self.epsilon_assumed > 0.0 && self.epsilon_assumed <= 1.0) {
            return Err(invalid("epsilon_assumed", "must lie in (0, 1]"));
        }
        if !(0.0..=0.5).contains(&self.mu) {
            return Err(invalid("mu", "must lie in [0, 0.5]"));
        }
        if !(self.initial_sharpness > 0.0) {
            return Err(invalid("initial_sharpness", "must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.anneal_fraction) {
            return Err(invalid("anneal_fraction", "must lie in [0, 1]"));
        }
        if !(self.tolerance >= 0.0) {
            return Err(invalid("tolerance", "must be >= 0"));
        }
        Ok(())
    }
}

/// Outcome of one restart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartOutcome {
    pub restart: usize,
    /// Loss at the returned parameters; `None` when the restart diverged.
    pub final_loss: Option<f64>,
    pub iterations_run: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbiResult<T> {
    pub x0_estimate: OpinionState<T>,
    /// Noise-free rollout of `x0_estimate`, `t = 0 ..= horizon_train`.
    pub trajectory: Vec<OpinionState<T>>,
    pub loss_history: Vec<T>,
    pub best_restart: usize,
    pub restarts: Vec<RestartOutcome>,
}

impl<T: Scalar> LbiResult<T> {
    pub fn final_state(&self) -> &OpinionState<T> {
        self.trajectory.last().expect("trajectory holds x(0)")
    }
}

struct Fit<T> {
    x0: Vec<T>,
    tape: RolloutTape<T>,
    final_loss: T,
    history: Vec<T>,
}

fn optimize<T: Scalar>(edges: &[&EdgeObservation], n_agents: usize, config: &LbiConfig, restart: usize) -> Option<Fit<T>> {
    let mut rng = substream(config.seed, Stream::Restart(restart as u32));
    let margin = T::lit(1e-3);
    let mut z: Vec<T> = (0..n_agents)
        .map(|_| logit(margin + (T::one() - margin - margin) * T::sample_unit(&mut rng)))
        .collect();
    let mut adam = Adam::new(n_agents, T::lit(config.learning_rate));
    let mut history = Vec::with_capacity(config.iterations + 1);
    let tolerance = T::lit(config.tolerance);
    let patience = config.patience.max(1);

    let mut stage = config.clone();
    for iter in 0..config.iterations {
        stage.sharpness = config.sharpness_at(iter);
        let x0: Vec<T> = z.iter().map(|&v| logistic(v)).collect();
        let tape = rollout(&x0, config);
        let (value, grad_x) = loss_and_gradient(&tape, edges, &stage).expect("observations validated");
        if !value.is_finite() || grad_x.iter().any(|g| !g.is_finite()) {
            warn!("restart {restart} aborted at iteration {iter}: non-finite loss");
            return None;
        }
        history.push(value);
        if config.tolerance > 0.0 && config.annealing_done(iter) && history.len() > patience {
            let before = history[history.len() - 1 - patience];
            if before - value <= tolerance * before.abs() {
                break;
            }
        }
        let grad_z: Vec<T> = grad_x
            .iter()
            .zip(&x0)
            .map(|(&g, &x)| g * x * (T::one() - x))
            .collect();
        adam.step(&mut z, &grad_z);
    }

    let x0: Vec<T> = z.iter().map(|&v| logistic(v)).collect();
    let tape = rollout(&x0, config);
    let final_loss = loss(&tape, edges, config).expect("observations validated");
    if !final_loss.is_finite() {
        warn!("restart {restart} ended with a non-finite loss");
        return None;
    }
    history.push(final_loss);
    Some(Fit {
        x0,
        tape,
        final_loss,
        history,
    })
}

/// Maximum-likelihood estimate of `x(0)` from edge observations covering
/// `t = 0 ..= config.horizon_train`.
pub fn infer<T: Scalar>(observations: &ObservationSeries, config: &LbiConfig) -> Result<LbiResult<T>> {
    config.validate()?;
    let all = observations.edges()?;
    let needed = config.horizon_train + 1;
    if all.len() < needed {
        return Err(Error::DimensionMismatch {
            context: "observed steps",
            expected: needed,
            actual: all.len(),
        });
    }
    let edges = &all[..needed];
    let n_agents = edges[0].n_agents()?;
    for e in edges {
        crate::error::check_len("edge indicators", edges[0].indicators.len(), e.indicators.len())?;
    }

    let fits: Vec<Option<Fit<T>>> = (0..config.restarts)
        .into_par_iter()
        .map(|r| optimize(edges, n_agents, config, r))
        .collect();

    let restarts: Vec<RestartOutcome> = fits
        .iter()
        .enumerate()
        .map(|(r, f)| RestartOutcome {
            restart: r,
            final_loss: f.as_ref().map(|f| f.final_loss.as_f64()),
            iterations_run: f.as_ref().map_or(0, |f| f.history.len() - 1),
        })
        .collect();

    let (best_restart, best) = fits
        .into_iter()
        .enumerate()
        .filter_map(|(r, f)| f.map(|f| (r, f)))
        .min_by(|a, b| a.1.final_loss.partial_cmp(&b.1.final_loss).expect("finite losses"))
        .ok_or(Error::AllRestartsDiverged {
            restarts: config.restarts,
        })?;

    Ok(LbiResult {
        x0_estimate: OpinionState::new(best.x0, 0),
        trajectory: best.tape.to_states(),
        loss_history: best.history,
        best_restart,
        restarts,
    })
}
