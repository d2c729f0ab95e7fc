//! Figure selection and rendering from completed runs.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use bcm_core::Granularity;
use bcm_harness::io::{read_states_csv, write_atomic};
use bcm_harness::stats::metric;
use bcm_harness::{quantile, Method, RunRecord, RunStatus, Specification, Store};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::svg::{render, Band, BoxPanel, BoxStats, LinePanel, Panel, Series, PALETTE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FigureKind {
    TrajectoryTraces,
    ReconstructionBoxplot,
    ForecastBoxplot,
    ForecastTimeseries,
}

/// One figure: what to draw, which runs to draw it from, and where.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FigureSpec {
    pub kind: FigureKind,
    #[serde(default)]
    pub method: Option<Method>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub noise_sigma: Option<f64>,
    #[serde(default)]
    pub granularity: Option<Granularity>,
    #[serde(default)]
    pub specification: Option<Specification>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Metric for box and time-series figures; each kind has a default.
    #[serde(default)]
    pub metric: Option<String>,
    /// Relative paths resolve against the figures directory.
    pub output: PathBuf,
}

impl FigureSpec {
    fn new(kind: FigureKind, output: String) -> Self {
        FigureSpec {
            kind,
            method: None,
            epsilon: None,
            noise_sigma: None,
            granularity: None,
            specification: None,
            seed: None,
            metric: None,
            output: PathBuf::from(output),
        }
    }

    fn matches(&self, r: &RunRecord) -> bool {
        let s = &r.spec;
        self.method.is_none_or(|m| m == s.method)
            && self.epsilon.is_none_or(|e| e == s.scenario.epsilon)
            && self.noise_sigma.is_none_or(|n| n == s.scenario.noise_sigma)
            && self.granularity.is_none_or(|g| g == s.granularity)
            && self.specification.is_none_or(|p| p == s.specification)
            && self.seed.is_none_or(|k| k == s.scenario.seed)
    }

    fn selector(&self) -> String {
        let mut parts = Vec::new();
        if let Some(m) = self.method {
            parts.push(format!("method={m}"));
        }
        if let Some(e) = self.epsilon {
            parts.push(format!("epsilon={e}"));
        }
        if let Some(n) = self.noise_sigma {
            parts.push(format!("noise_sigma={n}"));
        }
        if let Some(g) = self.granularity {
            parts.push(format!("granularity={g}"));
        }
        if let Some(p) = self.specification {
            parts.push(format!("specification={p}"));
        }
        if let Some(k) = self.seed {
            parts.push(format!("seed={k}"));
        }
        if parts.is_empty() {
            "every run".to_string()
        } else {
            parts.join(", ")
        }
    }

    /// Completed runs matching every selector, in run order.
    pub fn select<'a>(&self, records: &'a [RunRecord]) -> Result<Vec<&'a RunRecord>> {
        let mut hits: Vec<&RunRecord> = records
            .iter()
            .filter(|r| r.status == RunStatus::Complete && self.matches(r))
            .collect();
        if hits.is_empty() {
            return Err(CliError::EmptySelection {
                selector: self.selector(),
                available: available_keys(records),
            });
        }
        hits.sort_by(|a, b| order(a).partial_cmp(&order(b)).expect("finite grid values"));
        Ok(hits)
    }
}

type Order = (f64, f64, Method, Granularity, Specification, u64);

fn order(r: &RunRecord) -> Order {
    let s = &r.spec;
    (s.scenario.epsilon, s.scenario.noise_sigma, s.method, s.granularity, s.specification, s.scenario.seed)
}

/// Distinct selector values over the completed runs.
pub fn available_keys(records: &[RunRecord]) -> String {
    let done: Vec<&RunRecord> = records.iter().filter(|r| r.status == RunStatus::Complete).collect();
    if done.is_empty() {
        return "no completed runs".to_string();
    }
    fn list<T: ToString>(values: impl Iterator<Item = T>) -> String {
        let set: BTreeSet<String> = values.map(|v| v.to_string()).collect();
        set.into_iter().collect::<Vec<_>>().join("|")
    }
    let floats = |f: fn(&RunRecord) -> f64| {
        let mut v: Vec<f64> = done.iter().map(|r| f(r)).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v.iter().map(f64::to_string).collect::<Vec<_>>().join("|")
    };
    format!(
        "method={} epsilon={} noise_sigma={} granularity={} specification={} seed={}",
        list(done.iter().map(|r| r.spec.method)),
        floats(|r| r.spec.scenario.epsilon),
        floats(|r| r.spec.scenario.noise_sigma),
        list(done.iter().map(|r| r.spec.granularity)),
        list(done.iter().map(|r| r.spec.specification)),
        {
            let mut s: Vec<u64> = done.iter().map(|r| r.spec.scenario.seed).collect();
            s.sort_unstable();
            s.dedup();
            s.iter().map(u64::to_string).collect::<Vec<_>>().join("|")
        }
    )
}

fn method_label(method: Method, granularity: Granularity) -> String {
    match method {
        Method::Lbi => "LBI".to_string(),
        Method::Da => format!("DA-{granularity}"),
    }
}

fn color(method: Method, granularity: Granularity) -> &'static str {
    match (method, granularity) {
        (Method::Lbi, _) => PALETTE[0],
        (Method::Da, Granularity::Edge) => PALETTE[1],
        (Method::Da, Granularity::Node) => PALETTE[2],
        (Method::Da, Granularity::Global) => PALETTE[3],
    }
}

/// Runs sharing everything but the seed.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
struct GroupId {
    epsilon: f64,
    noise_sigma: f64,
    method: Method,
    granularity: Granularity,
    specification: Specification,
}

impl GroupId {
    fn of(r: &RunRecord) -> Self {
        let s = &r.spec;
        GroupId {
            epsilon: s.scenario.epsilon,
            noise_sigma: s.scenario.noise_sigma,
            method: s.method,
            granularity: s.granularity,
            specification: s.specification,
        }
    }

    fn key(&self) -> (u64, u64, Method, Granularity, Specification) {
        (
            self.epsilon.to_bits(),
            self.noise_sigma.to_bits(),
            self.method,
            self.granularity,
            self.specification,
        )
    }
}

/// Groups in first-seen order (selections come sorted).
fn groups<'a>(runs: &[&'a RunRecord]) -> Vec<(GroupId, Vec<&'a RunRecord>)> {
    let mut index = BTreeMap::new();
    let mut out: Vec<(GroupId, Vec<&RunRecord>)> = Vec::new();
    for &r in runs {
        let id = GroupId::of(r);
        let k = *index.entry(id.key()).or_insert_with(|| {
            out.push((id, Vec::new()));
            out.len() - 1
        });
        out[k].1.push(r);
    }
    out
}

/// Label naming only the components that vary across `ids`.
fn group_label(id: &GroupId, ids: &[GroupId]) -> String {
    let mut parts = vec![method_label(id.method, id.granularity)];
    if ids.iter().any(|o| o.epsilon != id.epsilon) {
        parts.push(format!("ε={}", id.epsilon));
    }
    if ids.iter().any(|o| o.noise_sigma != id.noise_sigma) {
        parts.push(format!("σ={}", id.noise_sigma));
    }
    if ids.iter().any(|o| o.specification != id.specification) {
        parts.push(id.specification.to_string());
    }
    parts.join(" ")
}

fn common_title(runs: &[&RunRecord]) -> String {
    let ids: Vec<GroupId> = runs.iter().map(|r| GroupId::of(r)).collect();
    let first = ids[0];
    let mut parts = Vec::new();
    if ids.iter().all(|i| i.epsilon == first.epsilon) {
        parts.push(format!("ε={}", first.epsilon));
    }
    if ids.iter().all(|i| i.noise_sigma == first.noise_sigma) {
        parts.push(format!("σ={}", first.noise_sigma));
    }
    if ids.iter().all(|i| i.specification == first.specification) {
        parts.push(first.specification.to_string());
    }
    parts.join(", ")
}

fn metric_boxes(runs: &[&RunRecord], name: &str) -> Vec<BoxStats> {
    let gs = groups(runs);
    let ids: Vec<GroupId> = gs.iter().map(|g| g.0).collect();
    gs.iter()
        .filter_map(|(id, members)| {
            let values: Vec<f64> = members.iter().filter_map(|r| metric(r, name)).collect();
            BoxStats::from_values(group_label(id, &ids), color(id.method, id.granularity), &values)
        })
        .collect()
}

fn metric_title(name: &str) -> &str {
    match name {
        "e_plain" => "reconstruction error E at cutoff",
        "e_symm" => "symmetric reconstruction error at cutoff",
        "e_sort" => "sorted reconstruction error at cutoff",
        "f_edge" => "edge forecast error",
        "f_node" => "node forecast error",
        "f_global" => "global forecast error",
        "brier" => "Brier score",
        other => other,
    }
}

fn check_metric(name: &str) -> Result<()> {
    if bcm_harness::stats::METRICS.contains(&name) {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "unknown metric `{name}`; available: {}",
            bcm_harness::stats::METRICS.join("|")
        )))
    }
}

/// Renders one figure to its output path and returns that path.
pub fn draw(spec: &FigureSpec, store: &Store, records: &[RunRecord], figures_dir: &Path) -> Result<PathBuf> {
    let runs = spec.select(records)?;
    let svg = match spec.kind {
        FigureKind::TrajectoryTraces => traces(store, runs[0])?,
        FigureKind::ReconstructionBoxplot => {
            let name = spec.metric.as_deref().unwrap_or("e_symm");
            check_metric(name)?;
            let panel = BoxPanel {
                title: common_title(&runs),
                y_label: metric_title(name).to_string(),
                boxes: metric_boxes(&runs, name),
            };
            render("Reconstruction", &[Panel::Box(panel)], 1)
        }
        FigureKind::ForecastBoxplot => {
            let names: Vec<&str> = match spec.metric.as_deref() {
                Some(name) => {
                    check_metric(name)?;
                    vec![name]
                }
                None => vec!["f_edge", "f_node", "f_global"],
            };
            let panels: Vec<Panel> = names
                .iter()
                .map(|name| {
                    Panel::Box(BoxPanel {
                        title: metric_title(name).to_string(),
                        y_label: format!("time-averaged {name}"),
                        boxes: metric_boxes(&runs, name),
                    })
                })
                .collect();
            render(&format!("Forecast, {}", common_title(&runs)), &panels, names.len())
        }
        FigureKind::ForecastTimeseries => {
            let name = spec.metric.as_deref().unwrap_or("f_edge");
            if !["f_edge", "f_node", "f_global", "brier"].contains(&name) {
                return Err(CliError::Usage(format!(
                    "forecast time series need one of f_edge|f_node|f_global|brier, not `{name}`"
                )));
            }
            render(
                &format!("Forecast, {}", common_title(&runs)),
                &[Panel::Line(timeseries(&runs, name))],
                1,
            )
        }
    };
    let path = if spec.output.is_absolute() {
        spec.output.clone()
    } else {
        figures_dir.join(&spec.output)
    };
    write_atomic(&path, |w| w.write_all(svg.as_bytes()))?;
    Ok(path)
}

/// Keeps at most about 200 points per agent line.
fn stride(len: usize) -> usize {
    len.div_ceil(200).max(1)
}

fn traces(store: &Store, run: &RunRecord) -> Result<String> {
    let truth = store.load_truth(&run.spec.scenario)?;
    let estimate = read_states_csv(&store.run_dir(&run.run_id).join("states.csv"))?;
    let step = stride(truth.states.len());
    let lines = |states: &[bcm_core::OpinionState], color: &str, width: f64, opacity: f64| -> Vec<Series> {
        let n = states.first().map_or(0, |s| s.len());
        (0..n)
            .map(|i| Series {
                label: None,
                color: color.to_string(),
                points: states
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| k % step == 0 || *k + 1 == states.len())
                    .map(|(_, s)| (s.time as f64, s.opinions[i]))
                    .collect(),
                width,
                opacity,
                dashed: false,
            })
            .collect()
    };
    let s = &run.spec;
    let c = color(s.method, s.granularity);
    let cutoff = s.scenario.train_cutoff as f64;
    let panel = |title: &str, series: Vec<Series>| {
        Panel::Line(LinePanel {
            title: title.to_string(),
            x_label: "t".into(),
            y_label: "opinion".into(),
            series,
            bands: Vec::new(),
            markers: vec![cutoff],
            y_range: Some((0.0, 1.0)),
        })
    };
    let mut overlay = lines(&truth.states, "#999999", 0.8, 0.6);
    overlay.extend(lines(&estimate, c, 0.8, 0.7));
    if let Some(first) = overlay.first_mut() {
        first.label = Some("truth".into());
    }
    let est_label = method_label(s.method, s.granularity);
    if let Some(last) = overlay.last_mut() {
        last.label = Some(est_label.clone());
    }
    let title = format!(
        "{} ε={} σ={} seed={} ({})",
        est_label, s.scenario.epsilon, s.scenario.noise_sigma, s.scenario.seed, s.specification
    );
    Ok(render(
        &title,
        &[
            panel("truth", lines(&truth.states, "#555555", 0.8, 0.8)),
            panel("estimate", lines(&estimate, c, 0.8, 0.8)),
            panel("overlay", overlay),
        ],
        3,
    ))
}

fn per_step(r: &RunRecord, name: &str) -> Vec<(usize, f64)> {
    r.forecast
        .iter()
        .map(|f| {
            let v = match name {
                "f_edge" => f.f_edge,
                "f_node" => f.f_node,
                "f_global" => f.f_global,
                _ => f.brier,
            };
            (f.time, v)
        })
        .collect()
}

/// Median over seeds with an interquartile band, per group.
fn timeseries(runs: &[&RunRecord], name: &str) -> LinePanel {
    let gs = groups(runs);
    let ids: Vec<GroupId> = gs.iter().map(|g| g.0).collect();
    let mut panel = LinePanel {
        title: metric_title(name).to_string(),
        x_label: "t".into(),
        y_label: name.to_string(),
        ..Default::default()
    };
    for (id, members) in &gs {
        let mut by_t: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for r in members {
            for (t, v) in per_step(r, name) {
                by_t.entry(t).or_default().push(v);
            }
        }
        let (mut xs, mut lo, mut mid, mut hi) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        let step = stride(by_t.len());
        let last = by_t.len().saturating_sub(1);
        for (k, (t, mut v)) in by_t.into_iter().enumerate() {
            if k % step != 0 && k != last {
                continue;
            }
            v.sort_by(f64::total_cmp);
            xs.push(t as f64);
            lo.push(quantile(&v, 0.25));
            mid.push(quantile(&v, 0.5));
            hi.push(quantile(&v, 0.75));
        }
        let c = color(id.method, id.granularity);
        panel.bands.push(Band {
            color: c.to_string(),
            x: xs.clone(),
            lower: lo,
            upper: hi,
            opacity: 0.2,
        });
        panel.series.push(Series {
            label: Some(group_label(id, &ids)),
            color: c.to_string(),
            points: xs.into_iter().zip(mid).collect(),
            width: 1.5,
            opacity: 1.0,
            dashed: id.specification == Specification::Misspecified && ids.iter().any(|o| o.specification != id.specification),
        });
    }
    panel
}

fn tag(v: f64) -> String {
    v.to_string()
}

/// The standard figure set for whatever completed runs exist: traces of one
/// seed, reconstruction boxplots per regime, and forecast boxplots and
/// time series per regime and noise level.
pub fn default_specs(records: &[RunRecord]) -> Vec<FigureSpec> {
    let done: Vec<&RunRecord> = records.iter().filter(|r| r.status == RunStatus::Complete).collect();
    let mut cells: Vec<(f64, Specification)> = Vec::new();
    let mut noise: BTreeMap<u64, f64> = BTreeMap::new();
    for r in &done {
        let c = (r.spec.scenario.epsilon, r.spec.specification);
        if !cells.contains(&c) {
            cells.push(c);
        }
        noise.insert(r.spec.scenario.noise_sigma.to_bits(), r.spec.scenario.noise_sigma);
    }
    cells.sort_by(|a, b| a.partial_cmp(b).expect("finite epsilon"));
    let mut noise: Vec<f64> = noise.into_values().collect();
    noise.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    for &(eps, spec) in &cells {
        let in_cell = |r: &&&RunRecord| r.spec.scenario.epsilon == eps && r.spec.specification == spec;
        // Traces: lowest noise level and seed available per method.
        for (method, granularity) in [(Method::Lbi, Granularity::Edge), (Method::Da, Granularity::Edge)] {
            let pick = done
                .iter()
                .filter(in_cell)
                .filter(|r| r.spec.method == method && r.spec.granularity == granularity)
                .min_by(|a, b| {
                    (a.spec.scenario.noise_sigma, a.spec.scenario.seed)
                        .partial_cmp(&(b.spec.scenario.noise_sigma, b.spec.scenario.seed))
                        .expect("finite noise")
                });
            if let Some(r) = pick {
                let sc = &r.spec.scenario;
                let mut f = FigureSpec::new(
                    FigureKind::TrajectoryTraces,
                    format!(
                        "traces_{}_eps{}_sigma{}_seed{}_{spec}.svg",
                        method_label(method, granularity).to_lowercase(),
                        tag(eps),
                        tag(sc.noise_sigma),
                        sc.seed
                    ),
                );
                f.method = Some(method);
                f.granularity = Some(granularity);
                f.epsilon = Some(eps);
                f.noise_sigma = Some(sc.noise_sigma);
                f.seed = Some(sc.seed);
                f.specification = Some(spec);
                out.push(f);
            }
        }
        for name in ["e_symm", "e_sort"] {
            let mut f = FigureSpec::new(
                FigureKind::ReconstructionBoxplot,
                format!("reconstruction_{name}_eps{}_{spec}.svg", tag(eps)),
            );
            f.epsilon = Some(eps);
            f.specification = Some(spec);
            f.metric = Some(name.to_string());
            out.push(f);
        }
        for &sigma in &noise {
            if !done.iter().filter(in_cell).any(|r| r.spec.scenario.noise_sigma == sigma) {
                continue;
            }
            for (kind, stem) in [
                (FigureKind::ForecastBoxplot, "forecast_boxplot"),
                (FigureKind::ForecastTimeseries, "forecast_timeseries"),
            ] {
                let mut f = FigureSpec::new(kind, format!("{stem}_eps{}_sigma{}_{spec}.svg", tag(eps), tag(sigma)));
                f.epsilon = Some(eps);
                f.noise_sigma = Some(sigma);
                f.specification = Some(spec);
                out.push(f);
            }
        }
    }
    out
}
