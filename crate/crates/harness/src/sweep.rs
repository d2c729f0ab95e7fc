//! Resumable execution of many runs on a bounded worker pool.

use log::{info, warn};
use rayon::prelude::*;

use crate::error::{HarnessError, Result};
use crate::grid::{RunSpec, ScenarioGrid};
use crate::run::{run_forecast, run_id, run_inference, MethodConfigs, RunRecord, RunStatus};
use crate::store::{Store, TruthSummary};

/// Per-phase tally. Failures are listed rather than aborting the phase.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepReport {
    pub executed: usize,
    pub skipped: usize,
    pub failed: Vec<(String, String)>,
    pub records: Vec<RunRecord>,
}

impl SweepReport {
    pub fn is_success(&self) -> bool {
        self.failed.is_empty()
    }

    fn absorb(&mut self, outcome: Outcome) {
        match outcome {
            Outcome::Executed(r) => {
                self.executed += 1;
                self.records.push(r);
            }
            Outcome::Skipped(r) => {
                self.skipped += 1;
                self.records.push(r);
            }
            Outcome::Failed(r) => {
                self.failed.push((r.run_id.clone(), r.error.clone().unwrap_or_default()));
                self.records.push(r);
            }
        }
    }
}

enum Outcome {
    Executed(RunRecord),
    Skipped(RunRecord),
    Failed(RunRecord),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Infer,
    Forecast,
    Both,
}

pub struct Sweep {
    pub store: Store,
    pub configs: MethodConfigs,
    pub workers: usize,
    /// Resolved application settings, echoed into every run's params.json.
    pub settings: serde_json::Value,
}

impl Sweep {
    pub fn new(store: Store, configs: MethodConfigs, workers: usize) -> Self {
        Sweep {
            store,
            configs,
            workers: workers.max(1),
            settings: serde_json::Value::Null,
        }
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| HarnessError::Config(format!("cannot start worker pool: {e}")))
    }

    pub fn run_id(&self, spec: &RunSpec) -> String {
        run_id(spec, &self.configs.resolve(spec))
    }

    /// Writes the ground truth of every cell; existing cells are kept.
    pub fn simulate(&self, grid: &ScenarioGrid, with_edges: bool) -> Result<Vec<TruthSummary>> {
        grid.validate()?;
        let cells = grid.cells();
        self.pool()?
            .install(|| cells.par_iter().map(|c| self.store.write_truth(c, with_edges)).collect())
    }

    pub fn infer(&self, specs: &[RunSpec]) -> Result<SweepReport> {
        self.execute(specs, Phase::Infer)
    }

    /// Completes forecasts for the given specs that have finished inference.
    pub fn forecast(&self, specs: &[RunSpec]) -> Result<SweepReport> {
        self.execute(specs, Phase::Forecast)
    }

    /// Inference and forecast for every spec, skipping completed runs.
    pub fn run(&self, specs: &[RunSpec]) -> Result<SweepReport> {
        self.execute(specs, Phase::Both)
    }

    fn execute(&self, specs: &[RunSpec], phase: Phase) -> Result<SweepReport> {
        let ids: Vec<(String, RunSpec)> = specs.iter().map(|s| (self.run_id(s), *s)).collect();
        let total = ids.len();
        let done = std::sync::atomic::AtomicUsize::new(0);
        let outcomes: Vec<Option<Outcome>> = self.pool()?.install(|| {
            ids.par_iter()
                .map(|(id, spec)| {
                    let outcome = self.one(id, spec, phase);
                    let k = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
                    match &outcome {
                        Some(Outcome::Executed(_)) => info!("[{k}/{total}] {id} {}", spec.label()),
                        Some(Outcome::Failed(r)) => {
                            warn!("[{k}/{total}] {id} {} failed: {}", spec.label(), r.error.as_deref().unwrap_or(""))
                        }
                        _ => {}
                    }
                    outcome
                })
                .collect()
        });
        let mut report = SweepReport::default();
        for o in outcomes.into_iter().flatten() {
            report.absorb(o);
        }
        self.store.write_manifest(&ids)?;
        Ok(report)
    }

    fn one(&self, id: &str, spec: &RunSpec, phase: Phase) -> Option<Outcome> {
        let existing = self.store.read_record(id);
        let status = existing.as_ref().map(|r| r.status);
        let fail = |e: HarnessError| {
            let err = HarnessError::Run {
                run_id: id.to_string(),
                label: spec.label(),
                source: Box::new(e),
            };
            let record = RunRecord::failed(id.to_string(), *spec, err.to_string());
            if let Err(e) = self.store.write_record(&record) {
                warn!("cannot record failure of {id}: {e}");
            }
            Outcome::Failed(record)
        };
        match (phase, status) {
            (_, Some(RunStatus::Complete)) => existing.map(Outcome::Skipped),
            (Phase::Infer, Some(RunStatus::Inferred)) => existing.map(Outcome::Skipped),
            (Phase::Forecast, None | Some(RunStatus::Failed)) => existing.map(Outcome::Skipped),
            (Phase::Forecast | Phase::Both, Some(RunStatus::Inferred)) => {
                let record = existing.expect("status read from record");
                Some(self.finish(record).map_or_else(fail, Outcome::Executed))
            }
            (Phase::Infer, _) => Some(self.start(spec).map_or_else(fail, Outcome::Executed)),
            (Phase::Both, _) => Some(
                self.start(spec)
                    .and_then(|r| self.finish(r))
                    .map_or_else(fail, Outcome::Executed),
            ),
        }
    }

    fn start(&self, spec: &RunSpec) -> Result<RunRecord> {
        let truth = self.store.load_truth(&spec.scenario)?;
        let inference = run_inference(spec, &truth, &self.configs)?;
        self.store.write_inference(&inference, &self.settings)
    }

    fn finish(&self, record: RunRecord) -> Result<RunRecord> {
        let truth = self.store.load_truth(&record.spec.scenario)?;
        let inference = self.store.load_inference(&record)?;
        let forecast = run_forecast(&inference, &truth)?;
        self.store.write_forecast(record, &inference, &forecast)
    }
}
