//! Scenario grid and the run matrix built on it.

use std::fmt;
use std::str::FromStr;

use bcm_core::{Granularity, ModelParams};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioGrid {
    pub epsilons: Vec<f64>,
    pub noise_levels: Vec<f64>,
    pub seeds: Vec<u64>,
    pub n_agents: usize,
    pub horizon: usize,
    pub train_cutoff: usize,
    pub mu: f64,
}

impl Default for ScenarioGrid {
    fn default() -> Self {
        ScenarioGrid {
            epsilons: vec![0.2, 0.3],
            noise_levels: [0.0, 1.0, 2.0, 4.0, 8.0, 16.0].iter().map(|k| k * 1e-4).collect(),
            seeds: (0..10).collect(),
            n_agents: 100,
            horizon: 1000,
            train_cutoff: 250,
            mu: 1e-4,
        }
    }
}

impl ScenarioGrid {
    pub fn validate(&self) -> Result<()> {
        if self.train_cutoff >= self.horizon {
            return Err(HarnessError::Config(format!(
                "train_cutoff ({}) must be below horizon ({})",
                self.train_cutoff, self.horizon
            )));
        }
        for cell in self.cells() {
            cell.params().validate()?;
        }
        Ok(())
    }

    /// Cells in epsilon-major, then noise, then seed order.
    pub fn cells(&self) -> Vec<Scenario> {
        let mut out = Vec::with_capacity(self.len());
        for &epsilon in &self.epsilons {
            for &noise_sigma in &self.noise_levels {
                for &seed in &self.seeds {
                    out.push(Scenario {
                        epsilon,
                        noise_sigma,
                        seed,
                        n_agents: self.n_agents,
                        horizon: self.horizon,
                        train_cutoff: self.train_cutoff,
                        mu: self.mu,
                    });
                }
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.epsilons.len() * self.noise_levels.len() * self.seeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The confidence bound assumed under mis-specification: 0.2 and 0.3
    /// swap; otherwise the next grid value, cyclically.
    pub fn swapped_epsilon(&self, epsilon: f64) -> Result<f64> {
        if epsilon == 0.2 {
            return Ok(0.3);
        }
        if epsilon == 0.3 {
            return Ok(0.2);
        }
        let mut distinct = self.epsilons.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        match distinct.iter().position(|&e| e == epsilon) {
            Some(i) if distinct.len() > 1 => Ok(distinct[(i + 1) % distinct.len()]),
            _ => Err(HarnessError::Config(format!("no alternative epsilon to swap with {epsilon}"))),
        }
    }
}

/// One ground-truth simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub epsilon: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    pub n_agents: usize,
    pub horizon: usize,
    pub train_cutoff: usize,
    pub mu: f64,
}

impl Scenario {
    /// The seed drives both the initial opinions and the dynamics noise, so
    /// cells sharing a seed start from the same opinions.
    pub fn params(&self) -> ModelParams {
        ModelParams {
            epsilon: self.epsilon,
            mu: self.mu,
            n_agents: self.n_agents,
            noise_sigma: self.noise_sigma,
            horizon: self.horizon,
            seed: self.seed,
        }
    }

    /// Directory name under `truth/`.
    pub fn key(&self) -> String {
        format!("eps{}_sigma{}_seed{}", self.epsilon, self.noise_sigma, self.seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Da,
    Lbi,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Da => "da",
            Method::Lbi => "lbi",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "da" => Ok(Method::Da),
            "lbi" => Ok(Method::Lbi),
            other => Err(HarnessError::Config(format!("unknown method `{other}` (expected da or lbi)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Specification {
    Correct,
    Misspecified,
}

impl Specification {
    pub fn as_str(self) -> &'static str {
        match self {
            Specification::Correct => "correct",
            Specification::Misspecified => "misspecified",
        }
    }
}

impl fmt::Display for Specification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub scenario: Scenario,
    pub method: Method,
    pub granularity: Granularity,
    pub specification: Specification,
    pub epsilon_assumed: f64,
}

impl RunSpec {
    pub fn new(grid: &ScenarioGrid, scenario: Scenario, method: Method, granularity: Granularity, specification: Specification) -> Result<Self> {
        if method == Method::Lbi && granularity != Granularity::Edge {
            return Err(HarnessError::Config(format!(
                "lbi needs edge-level observations, not {granularity}"
            )));
        }
        let epsilon_assumed = match specification {
            Specification::Correct => scenario.epsilon,
            Specification::Misspecified => grid.swapped_epsilon(scenario.epsilon)?,
        };
        Ok(RunSpec {
            scenario,
            method,
            granularity,
            specification,
            epsilon_assumed,
        })
    }

    pub fn label(&self) -> String {
        format!(
            "{} {} {} {}",
            self.scenario.key(),
            self.method,
            self.granularity,
            self.specification
        )
    }
}

/// Which runs to build for every grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecMatrix {
    pub methods: Vec<Method>,
    pub granularities: Vec<Granularity>,
    pub specifications: Vec<Specification>,
}

impl Default for SpecMatrix {
    /// LBI on edges plus DA at every granularity, each correct and
    /// mis-specified: eight runs per cell.
    fn default() -> Self {
        SpecMatrix {
            methods: vec![Method::Lbi, Method::Da],
            granularities: Granularity::ALL.to_vec(),
            specifications: vec![Specification::Correct, Specification::Misspecified],
        }
    }
}

impl SpecMatrix {
    /// Expands over `grid`. LBI silently skips non-edge granularities.
    pub fn expand(&self, grid: &ScenarioGrid) -> Result<Vec<RunSpec>> {
        let mut out = Vec::new();
        for scenario in grid.cells() {
            for &method in &self.methods {
                for &granularity in &self.granularities {
                    if method == Method::Lbi && granularity != Granularity::Edge {
                        continue;
                    }
                    for &specification in &self.specifications {
                        out.push(RunSpec::new(grid, scenario, method, granularity, specification)?);
                    }
                }
            }
        }
        Ok(out)
    }
}
