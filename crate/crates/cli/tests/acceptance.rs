//! Acceptance report: one PASS/FAIL line per criterion.
//!
//! Inference results are cached in a resumable results directory,
//! `$BCM_ACCEPTANCE_DIR` or `target/tmp/acceptance`, built with
//! `configs/sweep.json`; missing runs are computed on first use. The full
//! sweep check reads the same directory, which is filled by
//! `bcm-infer run-all --config configs/sweep.json --out <dir>`.
//!
//! The target reports rather than asserts; set `BCM_ACCEPTANCE_STRICT=1`
//! to make any FAIL line fail the test.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use bcm_cli::commands::Selection;
use bcm_cli::figures::default_specs;
use bcm_cli::AppConfig;
use bcm_core::Granularity;
use bcm_harness::{
    aggregate, stats, GroupField, GroupKey, Method, RunSpec, RunStatus, SpecMatrix, Specification, Store, Sweep,
};

const EPSILONS: [f64; 2] = [0.2, 0.3];
const NOISE_FREE: f64 = 0.0;
const STRONG_NOISE: f64 = 0.0016;

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn results_dir() -> PathBuf {
    std::env::var_os("BCM_ACCEPTANCE_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance"))
}

struct Report {
    lines: Vec<(usize, bool, String)>,
}

impl Report {
    fn record(&mut self, criterion: usize, pass: bool, detail: String) {
        let line = format!("criterion {criterion}: {} {detail}", if pass { "PASS" } else { "FAIL" });
        println!("{line}");
        self.lines.push((criterion, pass, line));
    }
}

struct Means {
    rows: Vec<bcm_harness::AggregateStats>,
}

impl Means {
    fn get(&self, method: Method, eps: f64, sigma: f64, spec: Specification, metric: &str) -> f64 {
        let key = GroupKey {
            method: Some(method),
            epsilon: Some(eps),
            noise_sigma: Some(sigma),
            granularity: Some(Granularity::Edge),
            specification: Some(spec),
        };
        let s = stats::find(&self.rows, &key, metric)
            .unwrap_or_else(|| panic!("no {metric} for {method} eps={eps} sigma={sigma} {spec}"));
        assert_eq!(s.n, 10, "{method} eps={eps} sigma={sigma} {spec}: expected 10 seeds");
        s.mean
    }
}

/// LBI correct and mis-specified plus DA on edges, at the two noise levels
/// the criteria use.
fn criterion_specs(config: &AppConfig) -> Vec<RunSpec> {
    let mut grid = config.grid.clone();
    grid.epsilons = EPSILONS.to_vec();
    grid.noise_levels = vec![NOISE_FREE, STRONG_NOISE];
    grid.seeds = (0..10).collect();
    let lbi = SpecMatrix {
        methods: vec![Method::Lbi],
        granularities: vec![Granularity::Edge],
        specifications: vec![Specification::Correct, Specification::Misspecified],
    };
    let da = SpecMatrix {
        methods: vec![Method::Da],
        granularities: vec![Granularity::Edge],
        specifications: vec![Specification::Correct],
    };
    let mut specs = lbi.expand(&grid).unwrap();
    specs.extend(da.expand(&grid).unwrap());
    specs
}

fn reproduction_criteria(report: &mut Report, config: &AppConfig, dir: &Path) {
    let store = Store::new(dir);
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let sweep = Sweep::new(store, config.method_configs(), workers);
    let mut grid = config.grid.clone();
    grid.epsilons = EPSILONS.to_vec();
    grid.noise_levels = vec![NOISE_FREE, STRONG_NOISE];
    grid.seeds = (0..10).collect();
    sweep.simulate(&grid, false).unwrap();
    let specs = criterion_specs(config);
    let started = Instant::now();
    let outcome = sweep.run(&specs).unwrap();
    println!(
        "criteria 1-5 use {} runs from {} ({} computed now in {:.0}s, {} cached, {} failed)",
        specs.len(),
        dir.display(),
        outcome.executed,
        started.elapsed().as_secs_f64(),
        outcome.skipped,
        outcome.failed.len()
    );
    assert!(outcome.is_success(), "runs failed: {:?}", outcome.failed);
    let ids: HashSet<String> = specs.iter().map(|s| sweep.run_id(s)).collect();
    let records: Vec<_> = sweep
        .store
        .records()
        .unwrap()
        .into_iter()
        .filter(|r| ids.contains(&r.run_id))
        .collect();
    let m = Means {
        rows: aggregate(&records, &GroupField::ALL),
    };
    use Method::{Da, Lbi};
    use Specification::{Correct, Misspecified};

    println!("mean over 10 seeds (edge observations):");
    println!("{:>5} {:>7} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}", "eps", "sigma", "LBI symm", "DA symm", "LBI sort", "DA sort", "LBI mis", "LBI fedg", "DA fedg");
    for eps in EPSILONS {
        for sigma in [NOISE_FREE, STRONG_NOISE] {
            println!(
                "{eps:>5} {sigma:>7} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
                m.get(Lbi, eps, sigma, Correct, "e_symm"),
                m.get(Da, eps, sigma, Correct, "e_symm"),
                m.get(Lbi, eps, sigma, Correct, "e_sort"),
                m.get(Da, eps, sigma, Correct, "e_sort"),
                m.get(Lbi, eps, sigma, Misspecified, "e_symm"),
                m.get(Lbi, eps, sigma, Correct, "f_edge"),
                m.get(Da, eps, sigma, Correct, "f_edge"),
            );
        }
    }

    // 1. Ordering, noise-free, correct epsilon.
    let bands = [(0.2, (0.02, 0.15), (0.18, 0.38)), (0.3, (0.02, 0.15), (0.12, 0.30))];
    let mut pass = true;
    let mut detail = Vec::new();
    for (eps, (llo, lhi), (dlo, dhi)) in bands {
        let lbi = m.get(Lbi, eps, NOISE_FREE, Correct, "e_symm");
        let da = m.get(Da, eps, NOISE_FREE, Correct, "e_symm");
        pass &= (llo..=lhi).contains(&lbi) && (dlo..=dhi).contains(&da) && lbi < da;
        detail.push(format!(
            "eps={eps}: LBI {lbi:.4} in [{llo}, {lhi}], DA {da:.4} in [{dlo}, {dhi}], LBI < DA"
        ));
    }
    report.record(1, pass, detail.join("; "));

    // 2. Strong noise degrades both methods; LBI stays ahead.
    let mut pass = true;
    let mut detail = Vec::new();
    for eps in EPSILONS {
        let l0 = m.get(Lbi, eps, NOISE_FREE, Correct, "e_symm");
        let l1 = m.get(Lbi, eps, STRONG_NOISE, Correct, "e_symm");
        let d0 = m.get(Da, eps, NOISE_FREE, Correct, "e_symm");
        let d1 = m.get(Da, eps, STRONG_NOISE, Correct, "e_symm");
        pass &= l1 > l0 && d1 > d0 && l1 < d1;
        detail.push(format!(
            "eps={eps}: LBI {l0:.4} -> {l1:.4}, DA {d0:.4} -> {d1:.4}"
        ));
    }
    report.record(2, pass, detail.join("; "));

    // 3. Mis-specified LBI within 0.05 of the correct one, both swaps.
    let mut pass = true;
    let mut detail = Vec::new();
    for eps in EPSILONS {
        let c = m.get(Lbi, eps, NOISE_FREE, Correct, "e_symm");
        let w = m.get(Lbi, eps, NOISE_FREE, Misspecified, "e_symm");
        pass &= (w - c).abs() <= 0.05;
        detail.push(format!("true eps={eps}: correct {c:.4}, swapped {w:.4}, |diff| {:.4} <= 0.05", (w - c).abs()));
    }
    report.record(3, pass, detail.join("; "));

    // 4. Time-averaged edge forecast error.
    let lp = m.get(Lbi, 0.2, NOISE_FREE, Correct, "f_edge");
    let dp = m.get(Da, 0.2, NOISE_FREE, Correct, "f_edge");
    let lc = m.get(Lbi, 0.3, NOISE_FREE, Correct, "f_edge");
    let dc = m.get(Da, 0.3, NOISE_FREE, Correct, "f_edge");
    report.record(
        4,
        lp < 0.15 && dp > 0.35 && lc < 0.30 && dc < 0.30 && lc <= dc,
        format!(
            "polarization LBI {lp:.4} < 0.15, DA {dp:.4} > 0.35; consensus LBI {lc:.4} <= DA {dc:.4}, both < 0.30"
        ),
    );

    // 5. Sorted metric narrows the gap.
    let sort_gap = (m.get(Da, 0.2, NOISE_FREE, Correct, "e_sort") - m.get(Lbi, 0.2, NOISE_FREE, Correct, "e_sort")).abs();
    let symm_gap = (m.get(Da, 0.2, NOISE_FREE, Correct, "e_symm") - m.get(Lbi, 0.2, NOISE_FREE, Correct, "e_symm")).abs();
    report.record(
        5,
        sort_gap < symm_gap,
        format!("eps=0.2 sigma=0: E_sort gap {sort_gap:.4} < E_symm gap {symm_gap:.4}"),
    );
}

/// Runs the core property suite in its own target directory and sums the
/// reported test durations.
fn property_suite(report: &mut Report) {
    let target = Path::new(env!("CARGO_TARGET_TMPDIR")).join("property-suite");
    let output = Command::new(env!("CARGO"))
        .current_dir(workspace())
        .args(["test", "-p", "bcm-core", "--tests", "--target-dir"])
        .arg(&target)
        .env_remove("RUSTFLAGS")
        .output()
        .expect("cargo runs");
    let text = String::from_utf8_lossy(&output.stdout).into_owned() + &String::from_utf8_lossy(&output.stderr);
    let (mut passed, mut failed, mut seconds) = (0usize, 0usize, 0f64);
    for line in text.lines().filter(|l| l.starts_with("test result:")) {
        let field = |label: &str| -> usize {
            line.split(';')
                .find_map(|part| part.trim().trim_start_matches("test result: ok.").trim_start_matches("test result: FAILED.").trim().strip_suffix(label))
                .and_then(|n| n.trim().parse().ok())
                .unwrap_or(0)
        };
        passed += field("passed");
        failed += field("failed");
        if let Some(s) = line.rsplit("finished in ").next().and_then(|s| s.trim_end_matches('s').parse::<f64>().ok()) {
            seconds += s;
        }
    }
    report.record(
        6,
        output.status.success() && failed == 0 && passed > 0 && seconds < 120.0,
        format!("{passed} passed, {failed} failed, {seconds:.1}s of test time (< 120s)"),
    );
}

fn bcm(args: &[&str], out: &Path) -> bool {
    Command::new(env!("CARGO_BIN_EXE_bcm-infer"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("BCM_INFER_OUT")
        .status()
        .expect("binary runs")
        .success()
}

fn pipeline(report: &mut Report, config: &AppConfig, dir: &Path) {
    let reduced = workspace().join("configs/reduced.json");
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let args = ["run-all", "--config", reduced.to_str().unwrap()];
    let ran = bcm(&args, &a) && bcm(&args, &b);
    let same = ran && fs::read(a.join("aggregate.csv")).ok() == fs::read(b.join("aggregate.csv")).ok();
    let reduced_runs = Store::new(&a).records().map_or(0, |r| r.len());

    // Full sweep: every default run complete and every standard figure present.
    let store = Store::new(dir);
    let sweep = Sweep::new(store.clone(), config.method_configs(), 1);
    let specs = Selection::default().matrix().unwrap().expand(&config.grid).unwrap();
    let records: Vec<_> = specs.iter().filter_map(|s| store.read_record(&sweep.run_id(s))).collect();
    let complete = records.iter().filter(|r| r.status == RunStatus::Complete).count();
    let figures = default_specs(&records);
    let missing: Vec<_> = figures
        .iter()
        .filter(|f| !store.figures_dir().join(&f.output).exists())
        .map(|f| f.output.display().to_string())
        .collect();
    let full = complete == specs.len() && store.aggregate_path().exists() && missing.is_empty();
    report.record(
        7,
        same && full,
        format!(
            "reduced grid run-all twice ({reduced_runs} runs each): aggregate.csv identical = {same}; \
             full sweep in {}: {complete}/{} runs complete, {} of {} standard figures present",
            dir.display(),
            specs.len(),
            figures.len() - missing.len(),
            figures.len()
        ),
    );
}

fn main() {
    let config = AppConfig::from_file(&workspace().join("configs/sweep.json")).unwrap();
    let dir = results_dir();
    fs::create_dir_all(&dir).unwrap();
    let mut report = Report { lines: Vec::new() };
    reproduction_criteria(&mut report, &config, &dir);
    property_suite(&mut report);
    pipeline(&mut report, &config, &dir);

    println!("\nsummary");
    for (_, _, line) in &report.lines {
        println!("{line}");
    }
    if std::env::var("BCM_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        let failed: Vec<_> = report.lines.iter().filter(|l| !l.1).map(|l| l.0).collect();
        if !failed.is_empty() {
            eprintln!("failed criteria: {failed:?}");
            std::process::exit(1);
        }
    }
}
