//! Single runs: inference up to the training cutoff, then an open-loop
//! forecast to the horizon.

use std::time::Instant;

use bcm_core::enkf::Ensemble;
use bcm_core::metrics::{ForecastReport, ReconstructionReport};
use bcm_core::model::{deterministic_update, OpinionState};
use bcm_core::observation::{pair_count, EdgeObservation, Observation};
use bcm_core::rng::{substream, Stream};
use bcm_core::{assimilate, infer, FilterConfig, LbiConfig, RestartOutcome, Trajectory};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};
use crate::grid::{Method, RunSpec};

/// Method settings shared by every run; per-run fields (assumed epsilon,
/// granularity, seed, training window) are filled in from the [`RunSpec`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MethodConfigs {
    pub filter: FilterConfig,
    pub lbi: LbiConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum ResolvedConfig {
    Da(FilterConfig),
    Lbi(LbiConfig),
}

impl MethodConfigs {
    pub fn filter_for(&self, spec: &RunSpec) -> FilterConfig {
        FilterConfig {
            granularity: spec.granularity,
            epsilon_assumed: spec.epsilon_assumed,
            ..self.filter.clone()
        }
    }

    pub fn lbi_for(&self, spec: &RunSpec) -> LbiConfig {
        LbiConfig {
            epsilon_assumed: spec.epsilon_assumed,
            mu: spec.scenario.mu,
            horizon_train: spec.scenario.train_cutoff,
            seed: spec.scenario.seed,
            ..self.lbi.clone()
        }
    }

    pub fn resolve(&self, spec: &RunSpec) -> ResolvedConfig {
        match spec.method {
            Method::Da => ResolvedConfig::Da(self.filter_for(spec)),
            Method::Lbi => ResolvedConfig::Lbi(self.lbi_for(spec)),
        }
    }
}

/// Content hash of the run specification and its resolved method config.
pub fn run_id(spec: &RunSpec, config: &ResolvedConfig) -> String {
    let payload = serde_json::to_vec(&(spec, config)).expect("specs serialize");
    let digest = Sha256::digest(&payload);
    hex::encode(&digest[..8])
}

#[derive(Debug, Clone, PartialEq)]
pub enum Reconstruction {
    Da {
        estimates: Vec<OpinionState<f64>>,
        spreads: Vec<Vec<f64>>,
        final_ensemble: Ensemble<f64>,
    },
    Lbi {
        trajectory: Vec<OpinionState<f64>>,
        loss_history: Vec<f64>,
        restarts: Vec<RestartOutcome>,
        best_restart: usize,
    },
}

impl Reconstruction {
    /// Estimated opinions for `t = 0 ..= train_cutoff`.
    pub fn estimates(&self) -> &[OpinionState<f64>] {
        match self {
            Reconstruction::Da { estimates, .. } => estimates,
            Reconstruction::Lbi { trajectory, .. } => trajectory,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    pub run_id: String,
    pub spec: RunSpec,
    pub config: ResolvedConfig,
    pub reconstruction: Reconstruction,
    /// Reports at `t = 0` and `t = train_cutoff`.
    pub reports: Vec<ReconstructionReport>,
    pub seconds: f64,
}

fn check_truth(spec: &RunSpec, truth: &Trajectory) -> Result<()> {
    if truth.params != spec.scenario.params() {
        return Err(HarnessError::Config(format!(
            "ground truth parameters {:?} do not match scenario {}",
            truth.params,
            spec.scenario.key()
        )));
    }
    Ok(())
}

pub fn run_inference(spec: &RunSpec, truth: &Trajectory, configs: &MethodConfigs) -> Result<Inference> {
    check_truth(spec, truth)?;
    let config = configs.resolve(spec);
    let id = run_id(spec, &config);
    let cutoff = spec.scenario.train_cutoff;
    let observed = truth.observations.at(spec.granularity).truncated(cutoff + 1);
    let started = Instant::now();
    let reconstruction = match &config {
        ResolvedConfig::Da(cfg) => {
            let mut rng = substream(spec.scenario.seed, Stream::EnsemblePrior);
            let result = assimilate(&observed, &truth.params, cfg, &mut rng)?;
            Reconstruction::Da {
                estimates: result.estimate_series,
                spreads: result.spread_series,
                final_ensemble: result.final_ensemble,
            }
        }
        ResolvedConfig::Lbi(cfg) => {
            let result = infer(&observed, cfg)?;
            Reconstruction::Lbi {
                trajectory: result.trajectory,
                loss_history: result.loss_history,
                restarts: result.restarts,
                best_restart: result.best_restart,
            }
        }
    };
    let seconds = started.elapsed().as_secs_f64();
    let estimates = reconstruction.estimates();
    let reports = [0, cutoff]
        .iter()
        .map(|&t| ReconstructionReport::evaluate(&truth.states[t], &estimates[t]))
        .collect::<bcm_core::Result<Vec<_>>>()?;
    Ok(Inference {
        run_id: id,
        spec: *spec,
        config,
        reconstruction,
        reports,
        seconds,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forecast {
    /// Point forecast for `t = train_cutoff ..= horizon`; the first entry is
    /// the reconstruction itself.
    pub states: Vec<OpinionState<f64>>,
    /// Ensemble spread alongside `states` (DA only).
    pub spreads: Option<Vec<Vec<f64>>>,
    /// One report per step in `(train_cutoff, horizon]`.
    pub reports: Vec<ForecastReport>,
    pub seconds: f64,
}

fn edge_at(truth: &Trajectory, t: usize) -> &EdgeObservation {
    match &truth.observations.edge.values[t] {
        Observation::Edge(e) => e,
        _ => unreachable!("edge series holds edge observations"),
    }
}

fn advance(opinions: &[f64], epsilon: f64, mu: f64) -> Vec<f64> {
    let mut next = vec![0.0; opinions.len()];
    deterministic_update(opinions, epsilon, mu, &mut next);
    next.iter_mut().for_each(|x| *x = x.clamp(0.0, 1.0));
    next
}

fn indicator_probs(opinions: &[f64], epsilon: f64) -> Vec<f64> {
    let n = opinions.len();
    let mut out = Vec::with_capacity(pair_count(n));
    for i in 0..n {
        for j in i + 1..n {
            out.push(if (opinions[i] - opinions[j]).abs() <= epsilon { 1.0 } else { 0.0 });
        }
    }
    out
}

fn spread_of(members: &[Vec<f64>]) -> Vec<f64> {
    Ensemble::new(members.to_vec(), 0).expect("ensemble has members").spread()
}

/// Noise-free forecast under the assumed epsilon, started from the
/// reconstruction at the training cutoff.
///
/// LBI predicts hard 0/1 interactions from its point estimate. DA predicts
/// the fraction of forecast members that interact, while its reported state
/// is the ensemble mean propagated on its own.
pub fn run_forecast(inference: &Inference, truth: &Trajectory) -> Result<Forecast> {
    check_truth(&inference.spec, truth)?;
    let scenario = inference.spec.scenario;
    let cutoff = scenario.train_cutoff;
    let epsilon = inference.spec.epsilon_assumed;
    let mu = scenario.mu;
    let started = Instant::now();
    let start = inference.reconstruction.estimates()[cutoff].clone();
    let steps = scenario.horizon - cutoff;
    let mut states = Vec::with_capacity(steps + 1);
    let mut reports = Vec::with_capacity(steps);
    let mut spreads = None;

    match &inference.reconstruction {
        Reconstruction::Lbi { .. } => {
            let mut x = start.opinions.clone();
            states.push(start);
            for t in cutoff + 1..=scenario.horizon {
                x = advance(&x, epsilon, mu);
                reports.push(ForecastReport::evaluate(edge_at(truth, t), &indicator_probs(&x, epsilon))?);
                states.push(OpinionState::new(x.clone(), t));
            }
        }
        Reconstruction::Da { final_ensemble, .. } => {
            let mut members = final_ensemble.members.clone();
            let mut mean = start.opinions.clone();
            let mut spread_series = vec![spread_of(&members)];
            states.push(start);
            let e = pair_count(scenario.n_agents);
            let weight = 1.0 / members.len() as f64;
            for t in cutoff + 1..=scenario.horizon {
                mean = advance(&mean, epsilon, mu);
                let mut probs = vec![0.0; e];
                for m in members.iter_mut() {
                    *m = advance(m, epsilon, mu);
                    let mut p = 0;
                    for i in 0..m.len() {
                        for j in i + 1..m.len() {
                            if (m[i] - m[j]).abs() <= epsilon {
                                probs[p] += weight;
                            }
                            p += 1;
                        }
                    }
                }
                reports.push(ForecastReport::evaluate(edge_at(truth, t), &probs)?);
                spread_series.push(spread_of(&members));
                states.push(OpinionState::new(mean.clone(), t));
            }
            spreads = Some(spread_series);
        }
    }
    Ok(Forecast {
        states,
        spreads,
        reports,
        seconds: started.elapsed().as_secs_f64(),
    })
}

/// Forecast errors averaged uniformly over the forecast window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastSummary {
    pub f_edge: f64,
    pub f_node: f64,
    pub f_global: f64,
    pub brier: f64,
}

impl ForecastSummary {
    pub fn from_reports(reports: &[ForecastReport]) -> Option<Self> {
        if reports.is_empty() {
            return None;
        }
        let n = reports.len() as f64;
        let avg = |f: fn(&ForecastReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        Some(ForecastSummary {
            f_edge: avg(|r| r.f_edge),
            f_node: avg(|r| r.f_node),
            f_global: avg(|r| r.f_global),
            brier: avg(|r| r.brier),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Inferred,
    Complete,
    Failed,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub inference_seconds: f64,
    pub forecast_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub spec: RunSpec,
    pub status: RunStatus,
    pub reconstruction: Vec<ReconstructionReport>,
    pub forecast: Vec<ForecastReport>,
    pub forecast_summary: Option<ForecastSummary>,
    pub timing: Timing,
    pub artifacts: Vec<String>,
    pub error: Option<String>,
}

impl RunRecord {
    pub fn inferred(inference: &Inference) -> Self {
        RunRecord {
            run_id: inference.run_id.clone(),
            spec: inference.spec,
            status: RunStatus::Inferred,
            reconstruction: inference.reports.clone(),
            forecast: Vec::new(),
            forecast_summary: None,
            timing: Timing {
                inference_seconds: inference.seconds,
                forecast_seconds: 0.0,
            },
            artifacts: Vec::new(),
            error: None,
        }
    }

    pub fn failed(run_id: String, spec: RunSpec, error: String) -> Self {
        RunRecord {
            run_id,
            spec,
            status: RunStatus::Failed,
            reconstruction: Vec::new(),
            forecast: Vec::new(),
            forecast_summary: None,
            timing: Timing::default(),
            artifacts: Vec::new(),
            error: Some(error),
        }
    }

    pub fn complete(mut self, forecast: &Forecast) -> Self {
        self.status = RunStatus::Complete;
        self.forecast = forecast.reports.clone();
        self.forecast_summary = ForecastSummary::from_reports(&forecast.reports);
        self.timing.forecast_seconds = forecast.seconds;
        self
    }

    /// Reconstruction report at the training cutoff.
    pub fn at_cutoff(&self) -> Option<&ReconstructionReport> {
        self.reconstruction.last()
    }

    pub fn at_start(&self) -> Option<&ReconstructionReport> {
        self.reconstruction.first()
    }
}
