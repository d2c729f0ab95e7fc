//! Synchronous bounded-confidence dynamics on the complete graph.
//!
//! Every agent moves towards the opinions of all agents within distance
//! `epsilon` (the boundary counts as inside):
//!
//! ```text
//! x_i(t+1) = x_i(t) + mu * sum_{j : |x_i - x_j| <= eps} (x_j(t) - x_i(t))
//! ```
//!
//! With `noise_sigma > 0` an independent `N(0, sigma^2)` term is added to each
//! agent after the update and the result is clamped to `[0, 1]`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::observation::{observe, Granularity, ObservationSeries};
use crate::rng::{substream, Stream};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub epsilon: f64,
    pub mu: f64,
    pub n_agents: usize,
    pub noise_sigma: f64,
    pub horizon: usize,
    pub seed: u64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            epsilon: 0.2,
            mu: 1e-4,
            n_agents: 100,
            noise_sigma: 0.0,
            horizon: 1000,
            seed: 0,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(invalid("epsilon", format!("{} is outside (0, 1]", self.epsilon)));
        }
        if !(0.0..=0.5).contains(&self.mu) {
            return Err(invalid("mu", format!("{} is outside [0, 0.5]", self.mu)));
        }
        if self.n_agents < 2 {
            return Err(invalid("n_agents", format!("{} < 2", self.n_agents)));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(invalid("noise_sigma", format!("{} is negative or not finite", self.noise_sigma)));
        }
        Ok(())
    }
}

/// Opinions of all agents at one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpinionState<T> {
    pub opinions: Vec<T>,
    pub time: usize,
}

impl<T: Scalar> OpinionState<T> {
    pub fn new(opinions: Vec<T>, time: usize) -> Self {
        OpinionState { opinions, time }
    }

    /// `n` opinions drawn i.i.d. from U[0, 1).
    pub fn uniform<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        OpinionState::new((0..n).map(|_| T::sample_unit(rng)).collect(), 0)
    }

    pub fn len(&self) -> usize {
        self.opinions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.opinions.is_empty()
    }

    /// Reflection `1 - x` about the midpoint of the opinion space.
    pub fn mirrored(&self) -> Self {
        OpinionState::new(self.opinions.iter().map(|&x| T::one() - x).collect(), self.time)
    }

    pub fn min(&self) -> T {
        self.opinions.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max(&self) -> T {
        self.opinions.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn mean(&self) -> T {
        self.opinions.iter().copied().sum::<T>() / T::lit(self.len() as f64)
    }
}

/// The confidence rule shared by dynamics, observations and inference.
#[inline]
pub fn interacts<T: Scalar>(a: T, b: T, epsilon: T) -> bool {
    (a - b).abs() <= epsilon
}

/// Agents within `epsilon` of `agent`, including itself, in ascending order.
pub fn confidence_set<T: Scalar>(state: &OpinionState<T>, agent: usize, epsilon: T) -> Vec<usize> {
    let xi = state.opinions[agent];
    state
        .opinions
        .iter()
        .enumerate()
        .filter(|&(_, &xj)| interacts(xi, xj, epsilon))
        .map(|(j, _)| j)
        .collect()
}

/// Noise-free update of all agents into `out`, without clamping.
///
/// Each agent's pull is accumulated over `j` in ascending order; the
/// vectorized rollout in [`crate::lbi`] reproduces this order exactly.
pub fn deterministic_update<T: Scalar>(opinions: &[T], epsilon: T, mu: T, out: &mut [T]) {
    debug_assert_eq!(opinions.len(), out.len());
    for (i, slot) in out.iter_mut().enumerate() {
        let xi = opinions[i];
        let mut pull = T::zero();
        for &xj in opinions {
            let d = xj - xi;
            if d.abs() <= epsilon {
                pull += d;
            }
        }
        *slot = xi + mu * pull;
    }
}

/// One step of the model, `x(t) -> x(t+1)`.
pub fn step<T: Scalar, R: Rng + ?Sized>(state: &OpinionState<T>, params: &ModelParams, rng: &mut R) -> OpinionState<T> {
    let mut next = vec![T::zero(); state.len()];
    deterministic_update(&state.opinions, T::lit(params.epsilon), T::lit(params.mu), &mut next);
    if params.noise_sigma > 0.0 {
        let sigma = T::lit(params.noise_sigma);
        for x in next.iter_mut() {
            *x += sigma * T::sample_standard_normal(rng);
        }
    }
    for x in next.iter_mut() {
        *x = x.clamp_unit();
    }
    OpinionState::new(next, state.time + 1)
}

/// Observations of a trajectory at all three granularities.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryObservations {
    pub edge: ObservationSeries,
    pub node: ObservationSeries,
    pub global: ObservationSeries,
}

impl TrajectoryObservations {
    pub fn at(&self, granularity: Granularity) -> &ObservationSeries {
        match granularity {
            Granularity::Edge => &self.edge,
            Granularity::Node => &self.node,
            Granularity::Global => &self.global,
        }
    }

    /// Derives all granularities from observed states.
    pub fn from_states<T: Scalar>(states: &[OpinionState<T>], epsilon: T) -> Self {
        let mut obs = TrajectoryObservations {
            edge: ObservationSeries::new(Granularity::Edge),
            node: ObservationSeries::new(Granularity::Node),
            global: ObservationSeries::new(Granularity::Global),
        };
        for s in states {
            obs.push_state(s, epsilon);
        }
        obs
    }

    fn push_state<T: Scalar>(&mut self, state: &OpinionState<T>, epsilon: T) {
        let edge = observe(state, epsilon, Granularity::Edge);
        let node = edge.aggregate(Granularity::Node).expect("edge aggregates to node");
        let global = node.aggregate(Granularity::Global).expect("node aggregates to global");
        self.edge.values.push(edge);
        self.node.values.push(node);
        self.global.values.push(global);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub params: ModelParams,
    pub states: Vec<OpinionState<T>>,
    pub observations: TrajectoryObservations,
}

/// Initial opinions for `params.seed`, uniform on `[0, 1)`.
pub fn initial_state<T: Scalar>(params: &ModelParams) -> OpinionState<T> {
    let mut rng = substream(params.seed, Stream::InitialOpinions);
    OpinionState::uniform(params.n_agents, &mut rng)
}

/// Rolls `x0` forward `params.horizon` steps, observing every state.
///
/// Noise comes from the seed's dynamics substream, drawn step by step, so a
/// longer horizon extends a shorter one without altering it.
pub fn simulate<T: Scalar>(x0: &OpinionState<T>, params: &ModelParams) -> Result<Trajectory<T>> {
    params.validate()?;
    crate::error::check_len("initial state", params.n_agents, x0.len())?;
    if x0.opinions.iter().any(|&x| !(x >= T::zero() && x <= T::one())) {
        return Err(invalid("x0", "initial opinions must lie in [0, 1]"));
    }
    let epsilon = T::lit(params.epsilon);
    let mut rng = substream(params.seed, Stream::DynamicsNoise);
    let mut states = Vec::with_capacity(params.horizon + 1);
    let mut current = OpinionState::new(x0.opinions.clone(), 0);
    for _ in 0..params.horizon {
        let next = step(&current, params, &mut rng);
        states.push(std::mem::replace(&mut current, next));
    }
    states.push(current);
    let observations = TrajectoryObservations::from_states(&states, epsilon);
    Ok(Trajectory {
        params: params.clone(),
        states,
        observations,
    })
}

/// Ground truth for `params`: seeded initial opinions plus [`simulate`].
pub fn generate<T: Scalar>(params: &ModelParams) -> Result<Trajectory<T>> {
    params.validate()?;
    simulate(&initial_state(params), params)
}
