//! One function per subcommand. Each returns an error when any requested
//! unit of work failed.

use std::path::Path;

use bcm_core::Granularity;
use bcm_harness::io::{ensure_dir, read_json};
use bcm_harness::{
    aggregate, write_aggregate_csv, GroupField, Method, RunSpec, RunStatus, SpecMatrix, Specification, Store, Sweep,
    SweepReport,
};
use log::{error, info};

use crate::config::AppConfig;
use crate::error::{CliError, Result};
use crate::figures::{default_specs, draw, FigureSpec};

/// Which runs `infer` builds per grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Selection {
    /// `None` runs both methods.
    pub method: Option<Method>,
    /// `None` means every granularity.
    pub granularity: Option<Granularity>,
    /// Only mis-specified runs instead of both specifications.
    pub misspecify: bool,
}

impl Selection {
    pub fn matrix(&self) -> Result<SpecMatrix> {
        if self.method == Some(Method::Lbi) && self.granularity.is_some_and(|g| g != Granularity::Edge) {
            return Err(CliError::Usage(format!(
                "lbi only supports edge-level observations, not --granularity {}",
                self.granularity.expect("checked above")
            )));
        }
        let methods = match self.method {
            Some(m) => vec![m],
            None => vec![Method::Lbi, Method::Da],
        };
        let granularities = match self.granularity {
            Some(g) => vec![g],
            None => Granularity::ALL.to_vec(),
        };
        let specifications = if self.misspecify {
            vec![Specification::Misspecified]
        } else {
            vec![Specification::Correct, Specification::Misspecified]
        };
        Ok(SpecMatrix {
            methods,
            granularities,
            specifications,
        })
    }
}

fn sweep(config: &AppConfig) -> Result<Sweep> {
    let store = Store::new(&config.out_dir);
    ensure_dir(store.root())?;
    let mut sweep = Sweep::new(store, config.method_configs(), config.workers);
    sweep.settings = serde_json::to_value(config).expect("config serializes");
    Ok(sweep)
}

fn conclude(phase: &str, report: &SweepReport) -> Result<()> {
    println!(
        "{phase}: {} executed, {} already done, {} failed",
        report.executed,
        report.skipped,
        report.failed.len()
    );
    for (id, msg) in &report.failed {
        error!("{id}: {msg}");
    }
    if report.is_success() {
        Ok(())
    } else {
        Err(CliError::RunsFailed(report.failed.len()))
    }
}

pub fn simulate(config: &AppConfig) -> Result<()> {
    let sweep = sweep(config)?;
    let written = sweep.simulate(&config.grid, config.export_edges)?;
    println!("{:<36} {:>6} {:>12} {:>8}", "cell", "steps", "bytes", "status");
    let mut total = 0;
    for t in &written {
        total += t.bytes;
        println!(
            "{:<36} {:>6} {:>12} {:>8}",
            t.cell,
            t.steps,
            t.bytes,
            if t.created { "written" } else { "kept" }
        );
    }
    println!("{} cells, {} bytes under {}", written.len(), total, sweep.store.root().join("truth").display());
    Ok(())
}

pub fn infer(config: &AppConfig, selection: Selection) -> Result<()> {
    let specs = selection.matrix()?.expand(&config.grid)?;
    let sweep = sweep(config)?;
    // Refuse early rather than failing every run of a missing cell.
    for cell in config.grid.cells() {
        let dir = sweep.store.truth_dir(&cell);
        if !dir.join("params.json").exists() {
            return Err(bcm_harness::HarnessError::MissingTruth {
                cell: cell.key(),
                dir,
            }
            .into());
        }
    }
    info!("{} inference runs requested", specs.len());
    conclude("infer", &sweep.infer(&specs)?)
}

/// Forecasts every run in the results directory whose inference finished.
pub fn forecast(config: &AppConfig) -> Result<()> {
    let sweep = sweep(config)?;
    let records = sweep.store.records()?;
    let pending: Vec<RunSpec> = records
        .iter()
        .filter(|r| r.status == RunStatus::Inferred)
        .map(|r| r.spec)
        .collect();
    if pending.is_empty() {
        let complete = records.iter().filter(|r| r.status == RunStatus::Complete).count();
        println!("forecast: no pending runs ({complete} already complete)");
        return Ok(());
    }
    conclude("forecast", &sweep.forecast(&pending)?)
}

pub fn report(config: &AppConfig, figure_specs: Option<&Path>) -> Result<()> {
    let store = Store::new(&config.out_dir);
    let records = store.records()?;
    let done = records.iter().filter(|r| r.status == RunStatus::Complete).count();
    if done == 0 {
        return Err(CliError::Usage(format!(
            "no completed runs under {}; run infer and forecast first",
            store.root().display()
        )));
    }
    let rows = aggregate(&records, &GroupField::ALL);
    write_aggregate_csv(&store.aggregate_path(), &rows)?;
    println!("aggregate: {} rows from {done} completed runs", rows.len());
    let specs: Vec<FigureSpec> = match figure_specs {
        Some(path) => read_json(path)?,
        None => default_specs(&records),
    };
    let dir = store.figures_dir();
    let mut failures = 0;
    for spec in &specs {
        match draw(spec, &store, &records, &dir) {
            Ok(path) => info!("wrote {}", path.display()),
            Err(e @ CliError::EmptySelection { .. }) if figure_specs.is_some() => return Err(e),
            Err(e) => {
                error!("{}: {e}", spec.output.display());
                failures += 1;
            }
        }
    }
    println!("figures: {} written to {}", specs.len() - failures, dir.display());
    if failures > 0 {
        return Err(CliError::Usage(format!("{failures} figure(s) could not be drawn")));
    }
    Ok(())
}

/// simulate, infer, forecast and report in sequence. Later stages still run
/// after isolated run failures so that everything that can finish does.
pub fn run_all(config: &AppConfig, selection: Selection, figure_specs: Option<&Path>) -> Result<()> {
    simulate(config)?;
    let infer_result = infer(config, selection);
    let forecast_result = forecast(config);
    let report_result = report(config, figure_specs);
    infer_result.and(forecast_result).and(report_result)
}
