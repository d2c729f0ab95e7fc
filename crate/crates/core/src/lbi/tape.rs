use serde::{Deserialize, Serialize};

use crate::model::OpinionState;
use crate::scalar::Scalar;

use super::LbiConfig;

/// Forward pass of the noise-free model, retaining what the adjoint needs.
///
/// In matrix form each step is `x(t+1) = mu A(t)^T x(t) + (1 - mu A(t)^T 1) o x(t)`
/// with `A(t)` the symmetric interaction matrix (unit diagonal). Only the
/// off-diagonal pairs of `A(t)` and the per-agent retained fractions
/// `1 - mu * deg_i(t)` are stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutTape<T> {
    /// `x(0) ..= x(T)`.
    pub states: Vec<Vec<T>>,
    /// Interacting pairs `(i, j)`, `i < j`, for each transition `t -> t+1`.
    pub adjacency: Vec<Vec<(u32, u32)>>,
    /// `1 - mu * deg_i(t)` for each transition.
    pub retained: Vec<Vec<T>>,
}

impl<T: Scalar> RolloutTape<T> {
    pub fn horizon(&self) -> usize {
        self.states.len() - 1
    }

    pub fn n_agents(&self) -> usize {
        self.states[0].len()
    }

    pub fn final_state(&self) -> &[T] {
        self.states.last().expect("tape holds x(0)")
    }

    /// Dense `A(t)` including the unit diagonal.
    pub fn dense_adjacency(&self, t: usize) -> Vec<Vec<bool>> {
        let n = self.n_agents();
        let mut a = vec![vec![false; n]; n];
        for (i, row) in a.iter_mut().enumerate() {
            row[i] = true;
        }
        for &(i, j) in &self.adjacency[t] {
            a[i as usize][j as usize] = true;
            a[j as usize][i as usize] = true;
        }
        a
    }

    pub fn to_states(&self) -> Vec<OpinionState<T>> {
        self.states
            .iter()
            .enumerate()
            .map(|(t, x)| OpinionState::new(x.clone(), t))
            .collect()
    }
}

/// Rolls `x0` forward `config.horizon_train` steps with `epsilon_assumed`.
///
/// Per-agent pulls are accumulated pair by pair in ascending partner order,
/// so states agree bit for bit with [`crate::model::deterministic_update`].
pub fn rollout<T: Scalar>(x0: &[T], config: &LbiConfig) -> RolloutTape<T> {
    rollout_steps(x0, T::lit(config.epsilon_assumed), T::lit(config.mu), config.horizon_train)
}

pub(crate) fn rollout_steps<T: Scalar>(x0: &[T], epsilon: T, mu: T, steps: usize) -> RolloutTape<T> {
    let n = x0.len();
    let mut states = Vec::with_capacity(steps + 1);
    let mut adjacency = Vec::with_capacity(steps);
    let mut retained = Vec::with_capacity(steps);
    states.push(x0.to_vec());
    let mut pull = vec![T::zero(); n];
    let mut degree = vec![0u32; n];
    for _ in 0..steps {
        let x = states.last().expect("non-empty");
        pull.iter_mut().for_each(|p| *p = T::zero());
        degree.iter_mut().for_each(|d| *d = 0);
        let mut pairs = Vec::new();
        for i in 0..n {
            let xi = x[i];
            for j in i + 1..n {
                let d = x[j] - xi;
                if d.abs() <= epsilon {
                    pull[i] += d;
                    pull[j] -= d;
                    degree[i] += 1;
                    degree[j] += 1;
                    pairs.push((i as u32, j as u32));
                }
            }
        }
        let next: Vec<T> = x.iter().zip(&pull).map(|(&xi, &p)| xi + mu * p).collect();
        retained.push(degree.iter().map(|&d| T::one() - mu * T::lit(f64::from(d))).collect());
        adjacency.push(pairs);
        states.push(next);
    }
    RolloutTape {
        states,
        adjacency,
        retained,
    }
}
