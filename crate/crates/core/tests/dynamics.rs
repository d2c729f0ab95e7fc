use bcm_core::model::{deterministic_update, simulate, OpinionState};
use bcm_core::observation::{pair_count, pairs};
use bcm_core::rng::{substream, Stream};
use bcm_core::{generate, observe, step, Granularity, ModelParams, Observation, Trajectory};
use proptest::prelude::*;

fn opinions(max_n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..=1.0, 2..max_n)
}

fn params_for(n: usize, epsilon: f64, mu: f64) -> ModelParams {
    ModelParams {
        epsilon,
        mu,
        n_agents: n,
        noise_sigma: 0.0,
        horizon: 1,
        seed: 0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn noise_free_step_conserves_the_mean(x in opinions(40), epsilon in 0.01f64..=1.0, rate in 0.0f64..=1.0) {
        let n = x.len();
        let mu = rate / n as f64;
        let state = OpinionState::new(x.clone(), 0);
        let next = step(&state, &params_for(n, epsilon, mu), &mut substream(0, Stream::DynamicsNoise));
        let before: f64 = x.iter().sum();
        let after: f64 = next.opinions.iter().sum();
        prop_assert!((before - after).abs() <= 1e-9, "{before} vs {after}");
    }

    #[test]
    fn step_stays_in_the_convex_hull(x in opinions(40), epsilon in 0.01f64..=1.0, rate in 0.0f64..=1.0) {
        let n = x.len();
        let mu = rate / n as f64;
        let state = OpinionState::new(x, 0);
        let next = step(&state, &params_for(n, epsilon, mu), &mut substream(0, Stream::DynamicsNoise));
        prop_assert!(next.min() >= state.min() - 1e-12);
        prop_assert!(next.max() <= state.max() + 1e-12);
    }

    #[test]
    fn mirrored_states_evolve_mirrored(x in opinions(30), epsilon in 0.01f64..=0.99, rate in 0.0f64..=1.0) {
        let n = x.len();
        let mu = rate / n as f64;
        let p = params_for(n, epsilon, mu);
        let state = OpinionState::new(x, 0);
        let direct = step(&state, &p, &mut substream(0, Stream::DynamicsNoise));
        let flipped = step(&state.mirrored(), &p, &mut substream(0, Stream::DynamicsNoise));
        for (a, b) in direct.opinions.iter().zip(&flipped.opinions) {
            prop_assert!((a - (1.0 - b)).abs() <= 1e-12);
        }
    }

    // Dyadic opinions keep 1 - x and every difference exact.
    #[test]
    fn mirrored_states_give_identical_observations(
        k in prop::collection::vec(0u32..=1024, 2..30),
        epsilon in 0.0f64..=1.0,
    ) {
        let state = OpinionState::new(k.iter().map(|&k| k as f64 / 1024.0).collect(), 5);
        let mirrored = state.mirrored();
        for g in Granularity::ALL {
            prop_assert_eq!(observe(&state, epsilon, g), observe(&mirrored, epsilon, g));
        }
    }

    #[test]
    fn granularities_are_consistent(x in opinions(25), epsilon in 0.0f64..=1.0) {
        let n = x.len();
        let state = OpinionState::new(x.clone(), 3);
        let Observation::Edge(edge) = observe(&state, epsilon, Granularity::Edge) else {
            panic!("edge observation expected");
        };
        prop_assert_eq!(edge.indicators.len(), pair_count(n));
        for (p, (i, j)) in pairs(n).enumerate() {
            prop_assert_eq!(edge.indicators[p], (x[i] - x[j]).abs() <= epsilon);
        }
        let Observation::Node { counts, .. } = observe(&state, epsilon, Granularity::Node) else {
            panic!("node observation expected");
        };
        let Observation::Global { total, .. } = observe(&state, epsilon, Granularity::Global) else {
            panic!("global observation expected");
        };
        prop_assert_eq!(counts.iter().map(|&c| c as u64).sum::<u64>(), 2 * total);
        prop_assert_eq!(&counts, &edge.node_counts().unwrap());
        prop_assert_eq!(total, edge.total());
        for (i, &c) in counts.iter().enumerate() {
            let direct = (0..n).filter(|&j| j != i && (x[i] - x[j]).abs() <= epsilon).count();
            prop_assert_eq!(c as usize, direct);
        }
    }

    #[test]
    fn noisy_trajectories_are_reproducible(seed in any::<u64>(), sigma in 0.0f64..0.01) {
        let p = ModelParams { n_agents: 12, horizon: 20, noise_sigma: sigma, seed, ..ModelParams::default() };
        let a: Trajectory = generate(&p).unwrap();
        let b: Trajectory = generate(&p).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn params_json_round_trips_bit_exactly(
        epsilon in 1e-6f64..=1.0,
        mu in 0.0f64..1.0,
        n in 1usize..500,
        sigma in 0.0f64..0.1,
        horizon in 0usize..5000,
        seed in any::<u64>(),
    ) {
        let p = ModelParams { epsilon, mu, n_agents: n, noise_sigma: sigma, horizon, seed };
        let back: ModelParams = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        prop_assert_eq!(back.epsilon.to_bits(), epsilon.to_bits());
        prop_assert_eq!(back.mu.to_bits(), mu.to_bits());
        prop_assert_eq!(back.noise_sigma.to_bits(), sigma.to_bits());
        prop_assert_eq!(back, p);
    }
}

#[test]
fn default_trajectory_shape() {
    let t: Trajectory = generate(&ModelParams::default()).unwrap();
    assert_eq!(t.states.len(), 1001);
    assert_eq!(t.observations.edge.len(), 1001);
    let Observation::Edge(e) = &t.observations.edge.values[0] else {
        panic!("edge observation expected");
    };
    assert_eq!(e.indicators.len(), 4950);
}

#[test]
fn f32_and_f64_agree_on_short_runs() {
    let p = ModelParams { n_agents: 20, horizon: 50, mu: 0.01, ..ModelParams::default() };
    let x0: Vec<f64> = (0..20).map(|i| i as f64 / 19.0).collect();
    let wide: Trajectory = simulate(&OpinionState::new(x0.clone(), 0), &p).unwrap();
    let narrow: bcm_core::TrajectoryF32 =
        simulate(&OpinionState::new(x0.iter().map(|&v| v as f32).collect(), 0), &p).unwrap();
    for (a, b) in wide.states.last().unwrap().opinions.iter().zip(&narrow.states.last().unwrap().opinions) {
        assert!((a - *b as f64).abs() < 1e-4);
    }
}

#[test]
fn deterministic_update_matches_confidence_sets() {
    let x = [0.1, 0.25, 0.3, 0.8, 0.95];
    let state = OpinionState::new(x.to_vec(), 0);
    let mut out = [0.0; 5];
    deterministic_update(&x, 0.2, 0.1, &mut out);
    for i in 0..5 {
        let pull: f64 = bcm_core::confidence_set(&state, i, 0.2).iter().map(|&j| x[j] - x[i]).sum();
        assert!((out[i] - (x[i] + 0.1 * pull)).abs() < 1e-15);
    }
}
