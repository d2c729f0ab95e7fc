use bcm_core::Granularity;
use bcm_harness::io::{read_edges_csv, read_json, read_states_csv, write_edges_csv};
use bcm_harness::{
    aggregate, generate_ground_truth, run_forecast, run_inference, GroupField, Inference, MethodConfigs,
    Reconstruction, ResolvedConfig, RunStatus, ScenarioGrid, SpecMatrix, Store, Sweep,
};
use bcm_core::{FilterConfig, LbiConfig, ModelParams};

fn tiny_grid() -> ScenarioGrid {
    ScenarioGrid {
        epsilons: vec![0.2, 0.3],
        noise_levels: vec![0.0, 1e-3],
        seeds: vec![1],
        n_agents: 8,
        horizon: 30,
        train_cutoff: 10,
        mu: 0.01,
    }
}

fn tiny_configs() -> MethodConfigs {
    MethodConfigs {
        filter: FilterConfig {
            ensemble_size: 6,
            ..FilterConfig::default()
        },
        lbi: LbiConfig {
            iterations: 20,
            restarts: 2,
            ..LbiConfig::default()
        },
    }
}

#[test]
fn default_grid_and_matrix_sizes() {
    let grid = ScenarioGrid::default();
    assert_eq!(grid.len(), 120);
    let specs = SpecMatrix::default().expand(&grid).unwrap();
    assert_eq!(specs.len(), 960);
    let lbi = specs.iter().filter(|s| s.method == bcm_harness::Method::Lbi).count();
    assert_eq!(lbi, 240);
    assert!(specs
        .iter()
        .filter(|s| s.method == bcm_harness::Method::Lbi)
        .all(|s| s.granularity == Granularity::Edge));
    let empty = SpecMatrix { methods: vec![], ..SpecMatrix::default() };
    assert!(empty.expand(&grid).unwrap().is_empty());
}

#[test]
fn misspecification_swaps_the_two_regimes() {
    let grid = ScenarioGrid::default();
    assert_eq!(grid.swapped_epsilon(0.2).unwrap(), 0.3);
    assert_eq!(grid.swapped_epsilon(0.3).unwrap(), 0.2);
    let single = ScenarioGrid { epsilons: vec![0.25], ..ScenarioGrid::default() };
    assert!(single.swapped_epsilon(0.25).is_err());
}

#[test]
fn ground_truth_matches_grid() {
    let grid = ScenarioGrid { seeds: vec![0], noise_levels: vec![0.0], epsilons: vec![0.2], ..ScenarioGrid::default() };
    let truths = generate_ground_truth(&grid).unwrap();
    assert_eq!(truths.len(), 1);
    assert_eq!(truths[0].states.len(), 1001);
    let bad = ScenarioGrid { epsilons: vec![1.5], ..tiny_grid() };
    let err = bad.validate().unwrap_err().to_string();
    assert!(err.contains("epsilon"), "{err}");
}

#[test]
fn truth_files_round_trip_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::new(dir.path());
    let grid = ScenarioGrid { noise_levels: vec![2e-3], ..tiny_grid() };
    let cell = grid.cells()[0];
    let summary = store.write_truth(&cell, true).unwrap();
    assert!(summary.created);
    assert!(!store.write_truth(&cell, true).unwrap().created);

    let truth = store.load_truth(&cell).unwrap();
    let params: ModelParams = read_json(&store.truth_dir(&cell).join("params.json")).unwrap();
    assert_eq!(params, cell.params());
    let states = read_states_csv(&store.truth_dir(&cell).join("states.csv")).unwrap();
    assert_eq!(states, truth.states);
    let edges = read_edges_csv(&store.truth_dir(&cell).join("edges.csv"), 8).unwrap();
    assert_eq!(edges, truth.observations.edge);

    let copy = dir.path().join("copy.csv");
    write_edges_csv(&copy, &edges).unwrap();
    assert_eq!(
        std::fs::read(&copy).unwrap(),
        std::fs::read(store.truth_dir(&cell).join("edges.csv")).unwrap()
    );
}

#[test]
fn missing_truth_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::new(dir.path());
    let err = store.load_truth(&tiny_grid().cells()[0]).unwrap_err().to_string();
    assert!(err.contains("simulate"), "{err}");
}

#[test]
fn forecast_starts_from_the_reconstruction() {
    let grid = tiny_grid();
    let configs = tiny_configs();
    let truths = generate_ground_truth(&grid).unwrap();
    for spec in SpecMatrix::default().expand(&grid).unwrap() {
        let truth = truths.iter().find(|t| t.params == spec.scenario.params()).unwrap();
        let inference = run_inference(&spec, truth, &configs).unwrap();
        let forecast = run_forecast(&inference, truth).unwrap();
        let cut = spec.scenario.train_cutoff;
        assert_eq!(forecast.states[0], inference.reconstruction.estimates()[cut]);
        assert_eq!(forecast.reports.len(), spec.scenario.horizon - cut);
        assert_eq!(forecast.reports[0].time, cut + 1);
        assert_eq!(inference.reports.len(), 2);
        assert_eq!(inference.reports[1].time, cut);
    }
}

#[test]
fn perfect_reconstruction_forecasts_without_error() {
    let grid = ScenarioGrid { noise_levels: vec![0.0], ..tiny_grid() };
    let truths = generate_ground_truth(&grid).unwrap();
    let configs = tiny_configs();
    let matrix = SpecMatrix {
        methods: vec![bcm_harness::Method::Lbi],
        specifications: vec![bcm_harness::Specification::Correct],
        ..SpecMatrix::default()
    };
    for (spec, truth) in matrix.expand(&grid).unwrap().into_iter().zip(&truths) {
        let cut = spec.scenario.train_cutoff;
        let inference = Inference {
            run_id: "exact".into(),
            spec,
            config: ResolvedConfig::Lbi(configs.lbi_for(&spec)),
            reconstruction: Reconstruction::Lbi {
                trajectory: truth.states[..=cut].to_vec(),
                loss_history: vec![],
                restarts: vec![],
                best_restart: 0,
            },
            reports: vec![],
            seconds: 0.0,
        };
        let forecast = run_forecast(&inference, truth).unwrap();
        for r in &forecast.reports {
            assert_eq!((r.f_edge, r.f_node, r.f_global, r.brier), (0.0, 0.0, 0.0, 0.0));
        }
        for (f, t) in forecast.states.iter().zip(&truth.states[cut..]) {
            assert_eq!(f, t);
        }
    }
}

#[test]
fn sweep_resumes_and_isolates_failures() {
    let dir = tempfile::tempdir().unwrap();
    let grid = tiny_grid();
    let specs = SpecMatrix::default().expand(&grid).unwrap();
    let sweep = Sweep::new(Store::new(dir.path()), tiny_configs(), 2);

    let err = sweep.run(&specs[..1]).unwrap();
    assert_eq!(err.failed.len(), 1, "no truth yet");
    assert!(err.failed[0].1.contains("simulate"));

    assert_eq!(sweep.simulate(&grid, false).unwrap().len(), 4);
    let first = sweep.infer(&specs).unwrap();
    assert!(first.is_success(), "{:?}", first.failed);
    assert_eq!(first.executed, specs.len());
    assert!(first.records.iter().all(|r| r.status == RunStatus::Inferred));

    // Corrupt one inferred run; the others still complete.
    let broken = sweep.run_id(&specs[0]);
    std::fs::write(sweep.store.run_dir(&broken).join("reconstruction.csv"), "t,agent,estimate\nx,y,z\n").unwrap();
    let second = sweep.forecast(&specs).unwrap();
    assert_eq!(second.failed.len(), 1);
    assert_eq!(second.failed[0].0, broken);
    assert_eq!(second.executed, specs.len() - 1);

    // The failed run is redone from scratch; everything else is skipped.
    let third = sweep.run(&specs).unwrap();
    assert!(third.is_success());
    assert_eq!(third.executed, 1);
    assert_eq!(third.skipped, specs.len() - 1);
    let fourth = sweep.run(&specs).unwrap();
    assert_eq!(fourth.executed, 0);

    let manifest = sweep.store.read_manifest().unwrap();
    assert_eq!(manifest.runs.len(), specs.len());
    assert!(manifest.runs.iter().all(|e| e.status == Some(RunStatus::Complete)));
    for entry in &manifest.runs {
        for a in ["params.json", "states.csv", "metrics.csv"] {
            assert!(sweep.store.run_dir(&entry.run_id).join(a).exists());
        }
    }
    let rows = aggregate(&sweep.store.records().unwrap(), &GroupField::ALL);
    // 4 cells x 8 specs, one run per group, 10 metrics each
    assert_eq!(rows.len(), 4 * 8 * 10);
}

#[test]
fn interrupted_and_uninterrupted_sweeps_agree() {
    let grid = tiny_grid();
    let specs = SpecMatrix::default().expand(&grid).unwrap();

    let a = tempfile::tempdir().unwrap();
    let whole = Sweep::new(Store::new(a.path()), tiny_configs(), 1);
    whole.simulate(&grid, false).unwrap();
    whole.run(&specs).unwrap();

    let b = tempfile::tempdir().unwrap();
    let pieces = Sweep::new(Store::new(b.path()), tiny_configs(), 3);
    pieces.simulate(&grid, false).unwrap();
    pieces.run(&specs[..5]).unwrap();
    pieces.infer(&specs[5..]).unwrap();
    pieces.run(&specs).unwrap();

    let strip = |mut r: bcm_harness::RunRecord| {
        r.timing = Default::default();
        r
    };
    let ra: Vec<_> = whole.store.records().unwrap().into_iter().map(strip).collect();
    let rb: Vec<_> = pieces.store.records().unwrap().into_iter().map(strip).collect();
    assert_eq!(ra, rb);
    for r in &ra {
        let metrics = |root: &std::path::Path| std::fs::read(root.join("runs").join(&r.run_id).join("metrics.csv")).unwrap();
        assert_eq!(metrics(a.path()), metrics(b.path()));
    }
}
