//! On-disk layout of a results directory.
//!
//! ```text
//! <root>/truth/<cell>/{params.json, states.csv[, edges.csv]}
//! <root>/runs/<run_id>/{params.json, states.csv, metrics.csv, record.json, ...}
//! <root>/manifest.json
//! <root>/aggregate.csv
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use bcm_core::enkf::Ensemble;
use bcm_core::model::OpinionState;
use bcm_core::{generate, ModelParams, Trajectory};
use serde::{Deserialize, Serialize};

use crate::error::{io_err, HarnessError, Result};
use crate::grid::{RunSpec, Scenario};
use crate::io::{
    read_ensemble_csv, read_json, read_states_csv, relative, write_edges_csv, write_ensemble_csv, write_estimates_csv,
    write_json, write_metrics_csv, write_states_csv, LbiSummary,
};
use crate::run::{Forecast, Inference, Reconstruction, ResolvedConfig, RunRecord, RunStatus};

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

/// What `simulate` wrote for one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthSummary {
    pub cell: String,
    pub steps: usize,
    pub bytes: u64,
    pub created: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RunParams {
    run_id: String,
    spec: RunSpec,
    model: ModelParams,
    config: ResolvedConfig,
    /// Fully resolved application settings, echoed for provenance.
    settings: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub run_id: String,
    pub spec: RunSpec,
    pub status: Option<RunStatus>,
    pub artifacts: Vec<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub runs: Vec<ManifestEntry>,
}

impl Store {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Store { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn truth_dir(&self, scenario: &Scenario) -> PathBuf {
        self.root.join("truth").join(scenario.key())
    }

    pub fn run_dir(&self, run_id: &str) -> PathBuf {
        self.root.join("runs").join(run_id)
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    pub fn aggregate_path(&self) -> PathBuf {
        self.root.join("aggregate.csv")
    }

    pub fn figures_dir(&self) -> PathBuf {
        self.root.join("figures")
    }

    /// Writes ground truth for `scenario` unless an identical one exists.
    pub fn write_truth(&self, scenario: &Scenario, with_edges: bool) -> Result<TruthSummary> {
        let dir = self.truth_dir(scenario);
        let params_path = dir.join("params.json");
        let states_path = dir.join("states.csv");
        let edges_path = dir.join("edges.csv");
        let params = scenario.params();
        let existing = params_path.exists()
            && states_path.exists()
            && (!with_edges || edges_path.exists())
            && read_json::<ModelParams>(&params_path).map(|p| p == params).unwrap_or(false);
        if !existing {
            let truth: Trajectory = generate(&params)?;
            write_states_csv(&states_path, &truth.states)?;
            if with_edges {
                write_edges_csv(&edges_path, &truth.observations.edge)?;
            }
            // params last: its presence marks a finished cell
            write_json(&params_path, &params)?;
        }
        let mut bytes = 0;
        for p in [&params_path, &states_path, &edges_path] {
            if let Ok(meta) = fs::metadata(p) {
                bytes += meta.len();
            }
        }
        Ok(TruthSummary {
            cell: scenario.key(),
            steps: scenario.horizon,
            bytes,
            created: !existing,
        })
    }

    /// Regenerates the stored ground truth from its parameters and checks it
    /// against the stored states.
    pub fn load_truth(&self, scenario: &Scenario) -> Result<Trajectory> {
        let dir = self.truth_dir(scenario);
        let params_path = dir.join("params.json");
        if !params_path.exists() {
            return Err(HarnessError::MissingTruth {
                cell: scenario.key(),
                dir: self.root.join("truth"),
            });
        }
        let params: ModelParams = read_json(&params_path)?;
        if params != scenario.params() {
            return Err(HarnessError::Corrupt {
                path: params_path,
                reason: "parameters differ from the requested scenario".into(),
            });
        }
        let truth: Trajectory = generate(&params)?;
        let states_path = dir.join("states.csv");
        let stored = read_states_csv(&states_path)?;
        if stored != truth.states {
            return Err(HarnessError::Corrupt {
                path: states_path,
                reason: "stored states differ from the regenerated trajectory".into(),
            });
        }
        Ok(truth)
    }

    pub fn read_record(&self, run_id: &str) -> Option<RunRecord> {
        read_json(&self.run_dir(run_id).join("record.json")).ok()
    }

    pub fn write_record(&self, record: &RunRecord) -> Result<()> {
        write_json(&self.run_dir(&record.run_id).join("record.json"), record)
    }

    /// Persists an inference and returns its record (status `inferred`).
    pub fn write_inference(&self, inference: &Inference, settings: &serde_json::Value) -> Result<RunRecord> {
        let dir = self.run_dir(&inference.run_id);
        write_json(
            &dir.join("params.json"),
            &RunParams {
                run_id: inference.run_id.clone(),
                spec: inference.spec,
                model: inference.spec.scenario.params(),
                config: inference.config.clone(),
                settings: settings.clone(),
            },
        )?;
        let mut artifacts = vec![dir.join("params.json")];
        let recon = dir.join("reconstruction.csv");
        match &inference.reconstruction {
            Reconstruction::Da {
                estimates,
                spreads,
                final_ensemble,
            } => {
                write_estimates_csv(&recon, estimates, Some(spreads))?;
                let ens = dir.join("ensemble.csv");
                write_ensemble_csv(&ens, &final_ensemble.members)?;
                artifacts.push(ens);
                write_json(&dir.join("filter.json"), &inference.config)?;
                artifacts.push(dir.join("filter.json"));
            }
            Reconstruction::Lbi {
                trajectory,
                loss_history,
                restarts,
                best_restart,
            } => {
                write_estimates_csv(&recon, trajectory, None)?;
                let ResolvedConfig::Lbi(config) = &inference.config else {
                    unreachable!("lbi reconstruction comes from an lbi config")
                };
                let summary = LbiSummary {
                    config: config.clone(),
                    best_restart: *best_restart,
                    restarts: restarts.clone(),
                    loss_history: loss_history.clone(),
                    wall_seconds: inference.seconds,
                };
                write_json(&dir.join("lbi.json"), &summary)?;
                artifacts.push(dir.join("lbi.json"));
            }
        }
        artifacts.push(recon);
        let mut record = RunRecord::inferred(inference);
        record.artifacts = artifacts.iter().map(|p| relative(&self.root, p)).collect();
        self.write_record(&record)?;
        Ok(record)
    }

    /// Rebuilds an inference from its artifacts.
    pub fn load_inference(&self, record: &RunRecord) -> Result<Inference> {
        let dir = self.run_dir(&record.run_id);
        let params: RunParams = read_json(&dir.join("params.json"))?;
        if params.spec != record.spec {
            return Err(HarnessError::Corrupt {
                path: dir.join("params.json"),
                reason: "spec differs from record".into(),
            });
        }
        let recon_path = dir.join("reconstruction.csv");
        let estimates = read_states_csv(&recon_path)?;
        let expected = record.spec.scenario.train_cutoff + 1;
        if estimates.len() != expected || estimates.iter().any(|s| s.len() != record.spec.scenario.n_agents) {
            return Err(HarnessError::Corrupt {
                path: recon_path,
                reason: format!("expected {expected} steps of {} agents", record.spec.scenario.n_agents),
            });
        }
        let reconstruction = match &params.config {
            ResolvedConfig::Da(_) => {
                let members = read_ensemble_csv(&dir.join("ensemble.csv"))?;
                let final_ensemble = Ensemble::new(members, record.spec.scenario.train_cutoff)?;
                Reconstruction::Da {
                    spreads: read_spreads_csv(&recon_path)?,
                    estimates,
                    final_ensemble,
                }
            }
            ResolvedConfig::Lbi(_) => {
                let summary: LbiSummary = read_json(&dir.join("lbi.json"))?;
                Reconstruction::Lbi {
                    trajectory: estimates,
                    loss_history: summary.loss_history,
                    restarts: summary.restarts,
                    best_restart: summary.best_restart,
                }
            }
        };
        Ok(Inference {
            run_id: record.run_id.clone(),
            spec: record.spec,
            config: params.config,
            reconstruction,
            reports: record.reconstruction.clone(),
            seconds: record.timing.inference_seconds,
        })
    }

    /// Persists the forecast and marks the record complete.
    pub fn write_forecast(&self, record: RunRecord, inference: &Inference, forecast: &Forecast) -> Result<RunRecord> {
        let dir = self.run_dir(&record.run_id);
        let mut states: Vec<OpinionState<f64>> = inference.reconstruction.estimates().to_vec();
        states.extend(forecast.states.iter().skip(1).cloned());
        let states_path = dir.join("states.csv");
        match (&inference.reconstruction, &forecast.spreads) {
            (Reconstruction::Da { spreads, .. }, Some(forecast_spreads)) => {
                let mut all = spreads.clone();
                all.extend(forecast_spreads.iter().skip(1).cloned());
                write_estimates_csv(&states_path, &states, Some(&all))?;
            }
            _ => write_estimates_csv(&states_path, &states, None)?,
        }
        let mut record = record.complete(forecast);
        let metrics_path = dir.join("metrics.csv");
        write_metrics_csv(&metrics_path, &record)?;
        for p in [&states_path, &metrics_path] {
            let rel = relative(&self.root, p);
            if !record.artifacts.contains(&rel) {
                record.artifacts.push(rel);
            }
        }
        self.write_record(&record)?;
        Ok(record)
    }

    /// All records under `runs/`, sorted by run id.
    pub fn records(&self) -> Result<Vec<RunRecord>> {
        let runs = self.root.join("runs");
        if !runs.exists() {
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        for entry in fs::read_dir(&runs).map_err(io_err(&runs))? {
            let entry = entry.map_err(io_err(&runs))?;
            if let Some(r) = self.read_record(&entry.file_name().to_string_lossy()) {
                out.push(r);
            }
        }
        out.sort_by(|a, b| a.run_id.cmp(&b.run_id));
        Ok(out)
    }

    /// Refreshes the entries of `specs` and keeps the other entries of an
    /// existing manifest. Entries are ordered by run id.
    pub fn write_manifest(&self, specs: &[(String, RunSpec)]) -> Result<Manifest> {
        let mut entries: BTreeMap<String, ManifestEntry> = match self.manifest_path().exists() {
            true => self.read_manifest()?.runs.into_iter().map(|e| (e.run_id.clone(), e)).collect(),
            false => BTreeMap::new(),
        };
        for (id, spec) in specs {
            let record = self.read_record(id);
            entries.insert(
                id.clone(),
                ManifestEntry {
                    run_id: id.clone(),
                    spec: *spec,
                    status: record.as_ref().map(|r| r.status),
                    artifacts: record.as_ref().map(|r| r.artifacts.clone()).unwrap_or_default(),
                    error: record.and_then(|r| r.error),
                },
            );
        }
        let manifest = Manifest {
            runs: entries.into_values().collect(),
        };
        write_json(&self.manifest_path(), &manifest)?;
        Ok(manifest)
    }

    pub fn read_manifest(&self) -> Result<Manifest> {
        read_json(&self.manifest_path())
    }
}

/// The `spread` column of a `t,agent,estimate,spread` file, grouped by `t`.
fn read_spreads_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::Reader::from_path(path).map_err(|source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out: Vec<Vec<f64>> = Vec::new();
    let mut last_t = None;
    for row in reader.records() {
        let row = row.map_err(|source| HarnessError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        let parse = |k: usize| -> Result<f64> {
            row.get(k).and_then(|v| v.parse().ok()).ok_or_else(|| HarnessError::Corrupt {
                path: path.to_path_buf(),
                reason: format!("bad column {k}"),
            })
        };
        let t = parse(0)?;
        if last_t != Some(t) {
            out.push(Vec::new());
            last_t = Some(t);
        }
        out.last_mut().expect("pushed above").push(parse(3)?);
    }
    Ok(out)
}
