use bcm_core::lbi::{loss, loss_and_gradient, rollout};
use bcm_core::model::deterministic_update;
use bcm_core::observation::pair_count;
use bcm_core::{generate, infer, EdgeObservation, LbiConfig, LbiResult, ModelParams, Trajectory};
use proptest::prelude::*;

/// Forward pass with the interaction sets fixed in advance, written out
/// independently of the library rollout.
fn frozen_loss(x0: &[f64], adjacency: &[Vec<Vec<bool>>], y: &[Vec<bool>], cfg: &LbiConfig) -> f64 {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut total = 0.0;
    for t in 0..y.len() {
        let mut p = 0;
        for i in 0..n {
            for j in i + 1..n {
                let s = cfg.sharpness * (cfg.epsilon_assumed - (x[i] - x[j]).abs());
                // -ln p and -ln (1 - p) for p = 1 / (1 + e^-s); |s| stays small enough here
                total += if y[t][p] { (-s).exp().ln_1p() } else { s.exp().ln_1p() };
                p += 1;
            }
        }
        if t + 1 < y.len() {
            let next: Vec<f64> = (0..n)
                .map(|i| x[i] + cfg.mu * (0..n).filter(|&j| adjacency[t][i][j]).map(|j| x[j] - x[i]).sum::<f64>())
                .collect();
            x = next;
        }
    }
    let decay: f64 = x0.iter().map(|v| (v - 0.5) * (v - 0.5)).sum();
    total / (y.len() * pair_count(n)) as f64 + cfg.weight_decay * decay
}

fn adjacency_along(x0: &[f64], steps: usize, cfg: &LbiConfig) -> Vec<Vec<Vec<bool>>> {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut out = Vec::new();
    for _ in 0..steps {
        let a: Vec<Vec<bool>> = (0..n)
            .map(|i| (0..n).map(|j| (x[i] - x[j]).abs() <= cfg.epsilon_assumed).collect())
            .collect();
        x = (0..n)
            .map(|i| x[i] + cfg.mu * (0..n).filter(|&j| a[i][j]).map(|j| x[j] - x[i]).sum::<f64>())
            .collect();
        out.push(a);
    }
    out
}

fn case() -> impl Strategy<Value = (Vec<f64>, Vec<Vec<bool>>, LbiConfig)> {
    (3usize..9, 1usize..12).prop_flat_map(|(n, steps)| {
        (
            prop::collection::vec(0.05f64..0.95, n),
            prop::collection::vec(prop::collection::vec(any::<bool>(), pair_count(n)), steps + 1),
            0.0f64..0.05,
            1.0f64..60.0,
            0.1f64..0.5,
            prop::sample::select(vec![0.0, 0.01, 0.1]),
        )
            .prop_map(move |(x0, y, mu, sharpness, epsilon, weight_decay)| {
                let cfg = LbiConfig {
                    mu,
                    sharpness,
                    epsilon_assumed: epsilon,
                    weight_decay,
                    horizon_train: steps,
                    ..LbiConfig::default()
                };
                (x0, y, cfg)
            })
    })
}

fn edges(y: &[Vec<bool>]) -> Vec<EdgeObservation> {
    y.iter()
        .enumerate()
        .map(|(t, b)| EdgeObservation { indicators: b.clone(), time: t })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn gradient_matches_central_differences((x0, y, cfg) in case()) {
        let obs = edges(&y);
        let refs: Vec<&EdgeObservation> = obs.iter().collect();
        let tape = rollout(&x0, &cfg);
        let (value, grad) = loss_and_gradient(&tape, &refs, &cfg).unwrap();
        let adjacency = adjacency_along(&x0, cfg.horizon_train, &cfg);
        prop_assert!((value - frozen_loss(&x0, &adjacency, &y, &cfg)).abs() < 1e-10);

        let h = 1e-6;
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for i in 0..x0.len() {
            let mut up = x0.clone();
            let mut down = x0.clone();
            up[i] += h;
            down[i] -= h;
            let fd = (frozen_loss(&up, &adjacency, &y, &cfg) - frozen_loss(&down, &adjacency, &y, &cfg)) / (2.0 * h);
            num += (fd - grad[i]).powi(2);
            den += fd.powi(2);
        }
        let rel = num.sqrt() / den.sqrt().max(1e-8);
        prop_assert!(rel < 1e-5, "relative gradient error {rel}");
    }

    #[test]
    fn rollout_reproduces_the_model_update(
        x0 in prop::collection::vec(0.0f64..=1.0, 2..30),
        steps in 1usize..40,
        epsilon in 0.05f64..0.6,
        mu in 0.0f64..0.02,
    ) {
        let cfg = LbiConfig { mu, epsilon_assumed: epsilon, horizon_train: steps, ..LbiConfig::default() };
        let tape = rollout(&x0, &cfg);
        let mut x = x0.clone();
        let mut next = vec![0.0; x.len()];
        for t in 0..=steps {
            for (a, b) in tape.states[t].iter().zip(&x) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
            deterministic_update(&x, epsilon, mu, &mut next);
            std::mem::swap(&mut x, &mut next);
        }
    }

    #[test]
    fn loss_is_mirror_symmetric((x0, y, cfg) in case()) {
        let cfg = LbiConfig { weight_decay: 0.0, ..cfg };
        let obs = edges(&y);
        let refs: Vec<&EdgeObservation> = obs.iter().collect();
        let flipped: Vec<f64> = x0.iter().map(|v| 1.0 - v).collect();
        let a = loss(&rollout(&x0, &cfg), &refs, &cfg).unwrap();
        let b = loss(&rollout(&flipped, &cfg), &refs, &cfg).unwrap();
        prop_assert!((a - b).abs() < 1e-9 * a.abs().max(1.0));
    }
}

fn small_truth() -> Trajectory {
    generate(&ModelParams {
        n_agents: 10,
        horizon: 40,
        mu: 0.01,
        epsilon: 0.3,
        seed: 21,
        ..ModelParams::default()
    })
    .unwrap()
}

fn small_config() -> LbiConfig {
    LbiConfig {
        epsilon_assumed: 0.3,
        mu: 0.01,
        horizon_train: 40,
        iterations: 150,
        restarts: 3,
        seed: 5,
        ..LbiConfig::default()
    }
}

#[test]
fn restarts_are_deterministic() {
    let truth = small_truth();
    let cfg = small_config();
    let a: LbiResult = infer(&truth.observations.edge, &cfg).unwrap();
    let b: LbiResult = infer(&truth.observations.edge, &cfg).unwrap();
    assert_eq!(a.x0_estimate, b.x0_estimate);
    assert_eq!(a.loss_history, b.loss_history);
    assert_eq!(a.restarts, b.restarts);
}

#[test]
fn best_restart_has_the_lowest_loss() {
    let truth = small_truth();
    let r: LbiResult = infer(&truth.observations.edge, &small_config()).unwrap();
    let best = r.restarts[r.best_restart].final_loss.unwrap();
    assert!(r.restarts.iter().all(|o| o.final_loss.unwrap() >= best));
    assert_eq!(*r.loss_history.last().unwrap(), best);
    assert_eq!(r.trajectory.len(), 41);
}

#[test]
fn clean_small_problem_is_recovered_up_to_mirroring() {
    let truth = small_truth();
    let r: LbiResult = infer(&truth.observations.edge, &LbiConfig { iterations: 400, ..small_config() }).unwrap();
    let e = bcm_core::metrics::symmetric_error(&truth.states[40].opinions, &r.final_state().opinions).unwrap();
    assert!(e < 0.05, "E_symm = {e}");
}
