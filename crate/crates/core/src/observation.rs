//! Observation operators: pairwise interaction indicators and their node and
//! global aggregates.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::model::{interacts, OpinionState};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Edge,
    Node,
    Global,
}

impl Granularity {
    pub const ALL: [Granularity; 3] = [Granularity::Edge, Granularity::Node, Granularity::Global];

    pub fn as_str(self) -> &'static str {
        match self {
            Granularity::Edge => "edge",
            Granularity::Node => "node",
            Granularity::Global => "global",
        }
    }

    /// Length of the observation vector for `n_agents`.
    pub fn dim(self, n_agents: usize) -> usize {
        match self {
            Granularity::Edge => pair_count(n_agents),
            Granularity::Node => n_agents,
            Granularity::Global => 1,
        }
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Granularity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "edge" => Ok(Granularity::Edge),
            "node" => Ok(Granularity::Node),
            "global" => Ok(Granularity::Global),
            other => Err(crate::error::invalid(
                "granularity",
                format!("`{other}` is not one of edge, node, global"),
            )),
        }
    }
}

/// Number of unordered pairs `i < j`.
#[inline]
pub fn pair_count(n_agents: usize) -> usize {
    n_agents * n_agents.saturating_sub(1) / 2
}

/// Position of pair `(i, j)`, `i < j`, in row-major upper-triangular order.
#[inline]
pub fn pair_index(n_agents: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n_agents);
    i * n_agents - i * (i + 1) / 2 + (j - i - 1)
}

/// All pairs `(i, j)` with `i < j`, in the same order as [`pair_index`].
pub fn pairs(n_agents: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n_agents).flat_map(move |i| (i + 1..n_agents).map(move |j| (i, j)))
}

/// Edge indicators for one time step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeObservation {
    pub indicators: Vec<bool>,
    pub time: usize,
}

impl EdgeObservation {
    pub fn from_state<T: Scalar>(state: &OpinionState<T>, epsilon: T) -> Self {
        let x = &state.opinions;
        let indicators = pairs(x.len())
            .map(|(i, j)| interacts(x[i], x[j], epsilon))
            .collect();
        EdgeObservation {
            indicators,
            time: state.time,
        }
    }

    /// Number of agents implied by the indicator length.
    pub fn n_agents(&self) -> Result<usize> {
        agents_for_pairs(self.indicators.len())
    }

    /// Interaction count of every agent (row sums, self excluded).
    pub fn node_counts(&self) -> Result<Vec<u32>> {
        let n = self.n_agents()?;
        let mut counts = vec![0u32; n];
        for ((i, j), &on) in pairs(n).zip(&self.indicators) {
            if on {
                counts[i] += 1;
                counts[j] += 1;
            }
        }
        Ok(counts)
    }

    pub fn total(&self) -> u64 {
        self.indicators.iter().filter(|&&b| b).count() as u64
    }
}

/// Inverse of [`pair_count`].
pub fn agents_for_pairs(n_pairs: usize) -> Result<usize> {
    // n(n-1)/2 = p  =>  n = (1 + sqrt(1 + 8p)) / 2
    let n = ((1.0 + (1.0 + 8.0 * n_pairs as f64).sqrt()) / 2.0).round() as usize;
    if pair_count(n) == n_pairs && n >= 2 {
        Ok(n)
    } else {
        Err(crate::error::invalid(
            "indicators",
            format!("length {n_pairs} is not N(N-1)/2 for any N >= 2"),
        ))
    }
}

/// One observation at a given granularity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Observation {
    Edge(EdgeObservation),
    Node { counts: Vec<u32>, time: usize },
    Global { total: u64, time: usize },
}

impl Observation {
    pub fn granularity(&self) -> Granularity {
        match self {
            Observation::Edge(_) => Granularity::Edge,
            Observation::Node { .. } => Granularity::Node,
            Observation::Global { .. } => Granularity::Global,
        }
    }

    pub fn time(&self) -> usize {
        match self {
            Observation::Edge(e) => e.time,
            Observation::Node { time, .. } | Observation::Global { time, .. } => *time,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Observation::Edge(e) => e.indicators.len(),
            Observation::Node { counts, .. } => counts.len(),
            Observation::Global { .. } => 1,
        }
    }

    /// Real-valued view used by the filter.
    pub fn to_vector<T: Scalar>(&self) -> Vec<T> {
        match self {
            Observation::Edge(e) => e
                .indicators
                .iter()
                .map(|&b| if b { T::one() } else { T::zero() })
                .collect(),
            Observation::Node { counts, .. } => counts.iter().map(|&c| T::lit(f64::from(c))).collect(),
            Observation::Global { total, .. } => vec![T::lit(*total as f64)],
        }
    }

    /// Coarsens an edge observation; identity when the granularity already matches.
    pub fn aggregate(&self, granularity: Granularity) -> Result<Observation> {
        match (self, granularity) {
            (o, g) if o.granularity() == g => Ok(o.clone()),
            (Observation::Edge(e), Granularity::Node) => Ok(Observation::Node {
                counts: e.node_counts()?,
                time: e.time,
            }),
            (Observation::Edge(e), Granularity::Global) => Ok(Observation::Global {
                total: e.total(),
                time: e.time,
            }),
            (Observation::Node { counts, time }, Granularity::Global) => Ok(Observation::Global {
                total: counts.iter().map(|&c| u64::from(c)).sum::<u64>() / 2,
                time: *time,
            }),
            (o, g) => Err(Error::GranularityMismatch {
                expected: g.to_string(),
                actual: o.granularity().to_string(),
            }),
        }
    }
}

/// `h(x)` at the requested granularity.
pub fn observe<T: Scalar>(state: &OpinionState<T>, epsilon: T, granularity: Granularity) -> Observation {
    let edge = EdgeObservation::from_state(state, epsilon);
    match granularity {
        Granularity::Edge => Observation::Edge(edge),
        Granularity::Node => Observation::Node {
            counts: edge.node_counts().expect("state has at least two agents"),
            time: edge.time,
        },
        Granularity::Global => Observation::Global {
            total: edge.total(),
            time: edge.time,
        },
    }
}

/// Real-valued `h(x)` written into `out` (resized to the observation dimension).
pub fn observe_real<T: Scalar>(opinions: &[T], epsilon: T, granularity: Granularity, out: &mut Vec<T>) {
    let n = opinions.len();
    out.clear();
    match granularity {
        Granularity::Edge => {
            out.extend(pairs(n).map(|(i, j)| {
                if interacts(opinions[i], opinions[j], epsilon) {
                    T::one()
                } else {
                    T::zero()
                }
            }));
        }
        Granularity::Node => {
            out.resize(n, T::zero());
            for (i, j) in pairs(n) {
                if interacts(opinions[i], opinions[j], epsilon) {
                    out[i] += T::one();
                    out[j] += T::one();
                }
            }
        }
        Granularity::Global => {
            let total = pairs(n)
                .filter(|&(i, j)| interacts(opinions[i], opinions[j], epsilon))
                .count();
            out.push(T::lit(total as f64));
        }
    }
}

/// Per-step observations at a single granularity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationSeries {
    pub granularity: Granularity,
    pub values: Vec<Observation>,
}

impl ObservationSeries {
    pub fn new(granularity: Granularity) -> Self {
        ObservationSeries {
            granularity,
            values: Vec::new(),
        }
    }

    pub fn push(&mut self, obs: Observation) -> Result<()> {
        if obs.granularity() != self.granularity {
            return Err(Error::GranularityMismatch {
                expected: self.granularity.to_string(),
                actual: obs.granularity().to_string(),
            });
        }
        self.values.push(obs);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, t: usize) -> Option<&Observation> {
        self.values.get(t)
    }

    /// First `len` steps.
    pub fn truncated(&self, len: usize) -> ObservationSeries {
        ObservationSeries {
            granularity: self.granularity,
            values: self.values.iter().take(len).cloned().collect(),
        }
    }

    /// Coarsens every step to `granularity`.
    pub fn aggregate(&self, granularity: Granularity) -> Result<ObservationSeries> {
        Ok(ObservationSeries {
            granularity,
            values: self
                .values
                .iter()
                .map(|o| o.aggregate(granularity))
                .collect::<Result<_>>()?,
        })
    }

    /// Edge indicator vectors, failing for any other granularity.
    pub fn edges(&self) -> Result<Vec<&EdgeObservation>> {
        self.values
            .iter()
            .map(|o| match o {
                Observation::Edge(e) => Ok(e),
                other => Err(Error::GranularityMismatch {
                    expected: Granularity::Edge.to_string(),
                    actual: other.granularity().to_string(),
                }),
            })
            .collect()
    }

    pub(crate) fn check_dim(&self, n_agents: usize) -> Result<()> {
        let dim = self.granularity.dim(n_agents);
        for o in &self.values {
            check_len("observation", dim, o.dim())?;
        }
        Ok(())
    }
}
