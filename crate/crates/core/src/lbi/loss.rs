//! Binary cross-entropy of observed interactions under logits
//! `s_ij = k (eps - |x_i - x_j|)`, and its exact adjoint through the rollout
//! with the interaction structure held fixed.

use crate::error::{check_len, Result};
use crate::observation::{pair_count, EdgeObservation};
use crate::scalar::{logistic, softplus, Scalar};


use super::tape::RolloutTape;
use super::LbiConfig;

/// `k (eps - |x_i - x_j|)` for every pair `i < j`.
pub fn interaction_logits<T: Scalar>(opinions: &[T], config: &LbiConfig) -> Vec<T> {
    let k = T::lit(config.sharpness);
    let eps = T::lit(config.epsilon_assumed);
    let n = opinions.len();
    let mut out = Vec::with_capacity(pair_count(n));
    for i in 0..n {
        for j in i + 1..n {
            out.push(k * (eps - (opinions[i] - opinions[j]).abs()));
        }
    }
    out
}

/// Predicted interaction probabilities `logistic(s_ij)`.
pub fn interaction_probabilities<T: Scalar>(opinions: &[T], config: &LbiConfig) -> Vec<T> {
    interaction_logits(opinions, config).into_iter().map(logistic).collect()
}

fn weight_decay_term<T: Scalar>(x0: &[T], weight_decay: T) -> T {
    let half = T::half();
    weight_decay * x0.iter().map(|&x| (x - half) * (x - half)).sum::<T>()
}

fn check_observations<T: Scalar>(tape: &RolloutTape<T>, edges: &[&EdgeObservation]) -> Result<()> {
    check_len("observed steps", tape.states.len(), edges.len())?;
    let e = pair_count(tape.n_agents());
    for obs in edges {
        check_len("edge indicators", e, obs.indicators.len())?;
    }
    Ok(())
}

/// Mean cross-entropy over all steps and pairs plus `weight_decay * |x0 - 1/2|^2`.
pub fn loss<T: Scalar>(tape: &RolloutTape<T>, edges: &[&EdgeObservation], config: &LbiConfig) -> Result<T> {
    check_observations(tape, edges)?;
    let k = T::lit(config.sharpness);
    let eps = T::lit(config.epsilon_assumed);
    let n = tape.n_agents();
    let mut total = T::zero();
    for (x, obs) in tape.states.iter().zip(edges) {
        let mut p = 0;
        for i in 0..n {
            for j in i + 1..n {
                let s = k * (eps - (x[i] - x[j]).abs());
                total += if obs.indicators[p] { softplus(-s) } else { softplus(s) };
                p += 1;
            }
        }
    }
    let count = T::lit((tape.states.len() * pair_count(n)) as f64);
    Ok(total / count + weight_decay_term(&tape.states[0], T::lit(config.weight_decay)))
}

/// `d loss / d x(0)`.
pub fn gradient<T: Scalar>(tape: &RolloutTape<T>, edges: &[&EdgeObservation], config: &LbiConfig) -> Result<Vec<T>> {
    loss_and_gradient(tape, edges, config).map(|(_, g)| g)
}

/// Loss and its gradient with respect to `x(0)` in one reverse sweep.
///
/// The adjoint `l(t)` obeys `l(t) = g(t) + J(t)^T l(t+1)` where `g(t)` is the
/// direct derivative of the step-`t` cross-entropy and
/// `J(t) = diag(1 - mu deg(t)) + mu A_offdiag(t)` is symmetric.
pub fn loss_and_gradient<T: Scalar>(
    tape: &RolloutTape<T>,
    edges: &[&EdgeObservation],
    config: &LbiConfig,
) -> Result<(T, Vec<T>)> {
    check_observations(tape, edges)?;
    let k = T::lit(config.sharpness);
    let eps = T::lit(config.epsilon_assumed);
    let mu = T::lit(config.mu);
    let n = tape.n_agents();
    let count = T::lit((tape.states.len() * pair_count(n)) as f64);
    let scale = k / count;

    let mut total = T::zero();
    let mut adjoint = vec![T::zero(); n];
    let mut carried = vec![T::zero(); n];
    for t in (0..tape.states.len()).rev() {
        // Propagate l(t+1) back through the transition t -> t+1.
        if t < tape.horizon() {
            for ((c, &a), &r) in carried.iter_mut().zip(&adjoint).zip(&tape.retained[t]) {
                *c = r * a;
            }
            for &(i, j) in &tape.adjacency[t] {
                let (i, j) = (i as usize, j as usize);
                carried[i] += mu * adjoint[j];
                carried[j] += mu * adjoint[i];
            }
            std::mem::swap(&mut adjoint, &mut carried);
        } else {
            adjoint.iter_mut().for_each(|a| *a = T::zero());
        }

        let x = &tape.states[t];
        let y = &edges[t].indicators;
        let mut p = 0;
        for i in 0..n {
            let xi = x[i];
            let mut gi = T::zero();
            for j in i + 1..n {
                let diff = xi - x[j];
                let s = k * (eps - diff.abs());
                let observed = y[p];
                p += 1;
                // softplus and logistic share exp(-|s|)
                let e = (-s.abs()).exp();
                let inv = T::one() / (T::one() + e);
                let softplus_s = s.max(T::zero()) + e.ln_1p();
                let prob = if s >= T::zero() { inv } else { e * inv };
                // d/ds = logistic(s) - y ; ds/dx_i = -k sign(x_i - x_j)
                let residual = if observed {
                    total += softplus_s - s;
                    prob - T::one()
                } else {
                    total += softplus_s;
                    prob
                };
                let g = if diff > T::zero() {
                    -residual
                } else if diff < T::zero() {
                    residual
                } else {
                    T::zero()
                };
                gi += g;
                adjoint[j] -= g * scale;
            }
            adjoint[i] += gi * scale;
        }
    }

    let wd = T::lit(config.weight_decay);
    let x0 = &tape.states[0];
    let value = total / count + weight_decay_term(x0, wd);
    let two = T::lit(2.0);
    for (a, &x) in adjoint.iter_mut().zip(x0) {
        *a += two * wd * (x - T::half());
    }
    Ok((value, adjoint))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lbi::tape::rollout;

    fn config(sharpness: f64, epsilon: f64, mu: f64, steps: usize) -> LbiConfig {
        LbiConfig {
            sharpness,
            epsilon_assumed: epsilon,
            mu,
            horizon_train: steps,
            ..LbiConfig::default()
        }
    }

    fn edges(bits: &[&[bool]]) -> Vec<EdgeObservation> {
        bits.iter()
            .enumerate()
            .map(|(t, b)| EdgeObservation { indicators: b.to_vec(), time: t })
            .collect()
    }

    #[test]
    fn logit_examples() {
        let cfg = config(50.0, 0.2, 0.0, 0);
        let s = interaction_logits(&[0.1f64, 0.25], &cfg);
        assert!((s[0] - 2.5).abs() < 1e-12);
        let p = interaction_probabilities(&[0.1f64, 0.25], &cfg);
        assert!((p[0] - 0.924_141_819_978_756_7).abs() < 1e-12);
        let b = interaction_logits(&[0.3f64, 0.5], &config(50.0, 0.2, 0.0, 0));
        assert!(b[0].abs() < 1e-12);
    }

    #[test]
    fn single_pair_cross_entropy() {
        let cfg = config(50.0, 0.2, 0.0, 0);
        let tape = rollout(&[0.1f64, 0.25], &cfg);
        let obs = edges(&[&[true]]);
        let refs: Vec<_> = obs.iter().collect();
        let l = loss(&tape, &refs, &cfg).unwrap();
        assert!((l - 0.0789).abs() < 1e-4, "{l}");
        assert!((l + 0.924_141_819_978_756_7f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn zero_sharpness_gives_ln2_and_zero_gradient() {
        let cfg = config(0.0, 0.2, 0.01, 3);
        let tape = rollout(&[0.1f64, 0.3, 0.8], &cfg);
        let row: &[bool] = &[true, false, false];
        let obs = edges(&[row; 4]);
        let refs: Vec<_> = obs.iter().collect();
        let (l, g) = loss_and_gradient(&tape, &refs, &cfg).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn closed_form_single_pair_gradient() {
        // mu = 0, T = 1: two identical steps, each contributing
        // softplus(-s) with s = k (eps - (x1 - x0)) for x1 > x0.
        let cfg = config(50.0, 0.2, 0.0, 1);
        let x0 = [0.1f64, 0.25];
        let tape = rollout(&x0, &cfg);
        let obs = edges(&[&[true], &[true]]);
        let refs: Vec<_> = obs.iter().collect();
        let g = gradient(&tape, &refs, &cfg).unwrap();
        let s: f64 = 50.0 * (0.2 - 0.15);
        let dl_ds = logistic(s) - 1.0;
        // mean over two steps of identical terms: d/dx0 = dl_ds * ds/dx0 = dl_ds * k
        assert!((g[0] - dl_ds * 50.0).abs() < 1e-12);
        assert!((g[1] + dl_ds * 50.0).abs() < 1e-12);
    }

    #[test]
    fn weight_decay_adds_quadratic_term() {
        let mut cfg = config(0.0, 0.2, 0.0, 0);
        cfg.weight_decay = 2.0;
        let tape = rollout(&[0.1f64, 0.7], &cfg);
        let obs = edges(&[&[false]]);
        let refs: Vec<_> = obs.iter().collect();
        let (l, g) = loss_and_gradient(&tape, &refs, &cfg).unwrap();
        assert!((l - (std::f64::consts::LN_2 + 2.0 * (0.16 + 0.04))).abs() < 1e-12);
        assert!((g[0] - 4.0 * -0.4).abs() < 1e-12);
        assert!((g[1] - 4.0 * 0.2).abs() < 1e-12);
    }

    #[test]
    fn rejects_short_observation_series() {
        let cfg = config(50.0, 0.2, 0.0, 2);
        let tape = rollout(&[0.1f64, 0.25], &cfg);
        let obs = edges(&[&[true]]);
        let refs: Vec<_> = obs.iter().collect();
        assert!(loss(&tape, &refs, &cfg).is_err());
    }

    #[test]
    fn loss_is_finite_for_extreme_logits() {
        let cfg = config(1e6, 0.2, 0.0, 0);
        let tape = rollout(&[0.0f64, 1.0], &cfg);
        let obs = edges(&[&[true]]);
        let refs: Vec<_> = obs.iter().collect();
        let (l, g) = loss_and_gradient(&tape, &refs, &cfg).unwrap();
        assert!(l.is_finite() && g.iter().all(|v| v.is_finite()));
        assert!((l - 8e5).abs() < 1e-6);
    }
}
