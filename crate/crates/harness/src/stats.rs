//! Group statistics over completed runs.

use std::collections::BTreeMap;
use std::path::Path;

use bcm_core::Granularity;
use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::{Method, Specification};
use crate::io::write_atomic;
use crate::run::{RunRecord, RunStatus};

/// Quantile by linear interpolation between order statistics
/// (`h = (n - 1) q`). `sorted` must be ascending and non-empty.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Some(Summary {
            n: values.len(),
            mean: values.iter().sum::<f64>() / values.len() as f64,
            median: quantile(&sorted, 0.5),
            q1: quantile(&sorted, 0.25),
            q3: quantile(&sorted, 0.75),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupField {
    Method,
    Epsilon,
    Noise,
    Granularity,
    Specification,
}

impl GroupField {
    pub const ALL: [GroupField; 5] = [
        GroupField::Method,
        GroupField::Epsilon,
        GroupField::Noise,
        GroupField::Granularity,
        GroupField::Specification,
    ];
}

type SortKey = (Option<Method>, Option<u64>, Option<u64>, Option<Granularity>, Option<Specification>);

/// Group identity; fields left out of the grouping are `None`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct GroupKey {
    pub method: Option<Method>,
    pub epsilon: Option<f64>,
    pub noise_sigma: Option<f64>,
    pub granularity: Option<Granularity>,
    pub specification: Option<Specification>,
}

impl GroupKey {
    pub fn of(record: &RunRecord, fields: &[GroupField]) -> Self {
        let s = &record.spec;
        let has = |f| fields.contains(&f);
        GroupKey {
            method: has(GroupField::Method).then_some(s.method),
            epsilon: has(GroupField::Epsilon).then_some(s.scenario.epsilon),
            noise_sigma: has(GroupField::Noise).then_some(s.scenario.noise_sigma),
            granularity: has(GroupField::Granularity).then_some(s.granularity),
            specification: has(GroupField::Specification).then_some(s.specification),
        }
    }

    fn sort_key(&self) -> SortKey {
        (
            self.method,
            self.epsilon.map(f64::to_bits),
            self.noise_sigma.map(f64::to_bits),
            self.granularity,
            self.specification,
        )
    }
}

/// Scalar metrics extracted from every completed record, in output order.
pub const METRICS: [&str; 10] = [
    "e_plain_0", "e_symm_0", "e_sort_0", "e_plain", "e_symm", "e_sort", "f_edge", "f_node", "f_global", "brier",
];

pub fn metric(record: &RunRecord, name: &str) -> Option<f64> {
    let start = record.at_start();
    let cut = record.at_cutoff();
    let f = record.forecast_summary.as_ref();
    match name {
        "e_plain_0" => start.map(|r| r.e_plain),
        "e_symm_0" => start.map(|r| r.e_symm),
        "e_sort_0" => start.map(|r| r.e_sort),
        "e_plain" => cut.map(|r| r.e_plain),
        "e_symm" => cut.map(|r| r.e_symm),
        "e_sort" => cut.map(|r| r.e_sort),
        "f_edge" => f.map(|s| s.f_edge),
        "f_node" => f.map(|s| s.f_node),
        "f_global" => f.map(|s| s.f_global),
        "brier" => f.map(|s| s.brier),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateStats {
    pub key: GroupKey,
    pub metric: String,
    pub summary: Summary,
}

/// Mean, median and quartiles of every metric per group of completed runs.
/// Rows are ordered by group key, then by [`METRICS`] order.
pub fn aggregate(records: &[RunRecord], group_by: &[GroupField]) -> Vec<AggregateStats> {
    let mut groups: BTreeMap<_, (GroupKey, Vec<&RunRecord>)> = BTreeMap::new();
    for r in records.iter().filter(|r| r.status == RunStatus::Complete) {
        let key = GroupKey::of(r, group_by);
        groups.entry(key.sort_key()).or_insert_with(|| (key, Vec::new())).1.push(r);
    }
    let mut out = Vec::new();
    for (key, members) in groups.into_values() {
        for name in METRICS {
            let values: Vec<f64> = members.iter().filter_map(|r| metric(r, name)).collect();
            match Summary::of(&values) {
                Some(summary) => out.push(AggregateStats {
                    key,
                    metric: name.to_string(),
                    summary,
                }),
                None => warn!("no values of {name} for group {key:?}; omitted"),
            }
        }
    }
    out
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_aggregate_csv(path: &Path, rows: &[AggregateStats]) -> Result<()> {
    write_atomic(path, |w| {
        writeln!(w, "method,epsilon,noise_sigma,granularity,specification,metric,n,mean,median,q1,q3")?;
        for r in rows {
            let k = &r.key;
            let s = &r.summary;
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{}",
                opt(k.method),
                opt(k.epsilon),
                opt(k.noise_sigma),
                opt(k.granularity),
                opt(k.specification),
                r.metric,
                s.n,
                s.mean,
                s.median,
                s.q1,
                s.q3
            )?;
        }
        Ok(())
    })
}

/// Looks up one aggregate row.
pub fn find<'a>(rows: &'a [AggregateStats], key: &GroupKey, metric: &str) -> Option<&'a Summary> {
    rows.iter()
        .find(|r| r.metric == metric && r.key.sort_key() == key.sort_key())
        .map(|r| &r.summary)
}
