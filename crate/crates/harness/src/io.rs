//! CSV and JSON artifacts. Floats are written in their shortest round-trip
//! form so that reading a file back reproduces the values bit for bit.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use bcm_core::metrics::ForecastReport;
use bcm_core::model::OpinionState;
use bcm_core::observation::{pairs, Observation, ObservationSeries};
use bcm_core::{LbiConfig, RestartOutcome};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, HarnessError, Result};
use crate::run::RunRecord;

/// Writes through a temporary sibling and renames, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, contents: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let tmp = path.with_extension("partial");
    {
        let file = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        let mut w = BufWriter::new(file);
        contents(&mut w).map_err(io_err(&tmp))?;
        w.flush().map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|source| HarnessError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    write_atomic(path, |w| {
        w.write_all(text.as_bytes())?;
        w.write_all(b"\n")
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| HarnessError::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> HarnessError + '_ {
    move |source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn corrupt(path: &Path, reason: impl Into<String>) -> HarnessError {
    HarnessError::Corrupt {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// `t,agent,opinion` rows.
pub fn write_states_csv(path: &Path, states: &[OpinionState<f64>]) -> Result<()> {
    write_atomic(path, |w| {
        writeln!(w, "t,agent,opinion")?;
        for s in states {
            for (i, x) in s.opinions.iter().enumerate() {
                writeln!(w, "{},{},{}", s.time, i, x)?;
            }
        }
        Ok(())
    })
}

/// `t,agent,estimate[,spread]` rows; the spread column appears when given.
pub fn write_estimates_csv(path: &Path, states: &[OpinionState<f64>], spreads: Option<&[Vec<f64>]>) -> Result<()> {
    write_atomic(path, |w| match spreads {
        Some(spreads) => {
            writeln!(w, "t,agent,estimate,spread")?;
            for (s, sd) in states.iter().zip(spreads) {
                for (i, (x, d)) in s.opinions.iter().zip(sd).enumerate() {
                    writeln!(w, "{},{},{},{}", s.time, i, x, d)?;
                }
            }
            Ok(())
        }
        None => {
            writeln!(w, "t,agent,estimate")?;
            for s in states {
                for (i, x) in s.opinions.iter().enumerate() {
                    writeln!(w, "{},{},{}", s.time, i, x)?;
                }
            }
            Ok(())
        }
    })
}

/// Reads `t,agent,value[,...]` rows back into states; extra columns are
/// ignored. Rows must be grouped by `t` with agents in order.
pub fn read_states_csv(path: &Path) -> Result<Vec<OpinionState<f64>>> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let mut states: Vec<OpinionState<f64>> = Vec::new();
    for row in reader.records() {
        let row = row.map_err(csv_err(path))?;
        let field = |k: usize| row.get(k).ok_or_else(|| corrupt(path, format!("missing column {k}")));
        let t: usize = field(0)?.parse().map_err(|_| corrupt(path, "bad time index"))?;
        let agent: usize = field(1)?.parse().map_err(|_| corrupt(path, "bad agent index"))?;
        let x: f64 = field(2)?.parse().map_err(|_| corrupt(path, "bad value"))?;
        match states.last_mut() {
            Some(s) if s.time == t => {
                if agent != s.opinions.len() {
                    return Err(corrupt(path, format!("agent {agent} out of order at t = {t}")));
                }
                s.opinions.push(x);
            }
            _ => {
                if agent != 0 {
                    return Err(corrupt(path, format!("t = {t} does not start at agent 0")));
                }
                states.push(OpinionState::new(vec![x], t));
            }
        }
    }
    Ok(states)
}

/// `t,i,j,indicator` rows for every pair `i < j`.
pub fn write_edges_csv(path: &Path, series: &ObservationSeries) -> Result<()> {
    let edges = series.edges()?;
    write_atomic(path, |w| {
        writeln!(w, "t,i,j,indicator")?;
        for e in edges {
            let n = e.n_agents().map_err(|err| std::io::Error::new(std::io::ErrorKind::InvalidData, err))?;
            for ((i, j), &y) in pairs(n).zip(&e.indicators) {
                writeln!(w, "{},{},{},{}", e.time, i, j, u8::from(y))?;
            }
        }
        Ok(())
    })
}

/// `member,agent,value` rows.
pub fn write_ensemble_csv(path: &Path, members: &[Vec<f64>]) -> Result<()> {
    write_atomic(path, |w| {
        writeln!(w, "member,agent,value")?;
        for (k, m) in members.iter().enumerate() {
            for (i, x) in m.iter().enumerate() {
                writeln!(w, "{k},{i},{x}")?;
            }
        }
        Ok(())
    })
}

pub fn read_ensemble_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    // Same grouping rules as a state file, keyed by member.
    Ok(read_states_csv(path)?.into_iter().map(|s| s.opinions).collect())
}

/// `run_id,metric,t,value` rows: reconstruction errors at their report
/// times, then every forecast metric per step.
pub fn write_metrics_csv(path: &Path, record: &RunRecord) -> Result<()> {
    write_atomic(path, |w| {
        writeln!(w, "run_id,metric,t,value")?;
        let id = &record.run_id;
        for r in &record.reconstruction {
            writeln!(w, "{id},e_plain,{},{}", r.time, r.e_plain)?;
            writeln!(w, "{id},e_symm,{},{}", r.time, r.e_symm)?;
            writeln!(w, "{id},e_sort,{},{}", r.time, r.e_sort)?;
        }
        for f in &record.forecast {
            write_forecast_rows(w, id, f)?;
        }
        Ok(())
    })
}

fn write_forecast_rows(w: &mut dyn Write, id: &str, f: &ForecastReport) -> std::io::Result<()> {
    writeln!(w, "{id},f_edge,{},{}", f.time, f.f_edge)?;
    writeln!(w, "{id},f_node,{},{}", f.time, f.f_node)?;
    writeln!(w, "{id},f_global,{},{}", f.time, f.f_global)?;
    writeln!(w, "{id},brier,{},{}", f.time, f.brier)
}

/// Sidecar of an LBI run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LbiSummary {
    pub config: LbiConfig,
    pub best_restart: usize,
    pub restarts: Vec<RestartOutcome>,
    pub loss_history: Vec<f64>,
    pub wall_seconds: f64,
}

/// Parsed form of an edge CSV, for checks on exported files.
pub fn read_edges_csv(path: &Path, n_agents: usize) -> Result<ObservationSeries> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let mut series = ObservationSeries::new(bcm_core::Granularity::Edge);
    let mut current: Option<bcm_core::EdgeObservation> = None;
    for row in reader.records() {
        let row = row.map_err(csv_err(path))?;
        let t: usize = row.get(0).and_then(|v| v.parse().ok()).ok_or_else(|| corrupt(path, "bad time index"))?;
        let y = match row.get(3) {
            Some("1") => true,
            Some("0") => false,
            _ => return Err(corrupt(path, "indicator must be 0 or 1")),
        };
        match &mut current {
            Some(e) if e.time == t => e.indicators.push(y),
            _ => {
                if let Some(done) = current.take() {
                    series.push(Observation::Edge(done))?;
                }
                let mut indicators = Vec::with_capacity(bcm_core::observation::pair_count(n_agents));
                indicators.push(y);
                current = Some(bcm_core::EdgeObservation { indicators, time: t });
            }
        }
    }
    if let Some(done) = current {
        series.push(Observation::Edge(done))?;
    }
    Ok(series)
}

pub fn relative(root: &Path, path: &Path) -> String {
    path.strip_prefix(root).unwrap_or(path).to_string_lossy().into_owned()
}

pub fn ensure_dir(path: &Path) -> Result<PathBuf> {
    fs::create_dir_all(path).map_err(io_err(path))?;
    Ok(path.to_path_buf())
}
