//! Application configuration: JSON file, environment and flags, merged in
//! that order of increasing precedence.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use bcm_core::{FilterConfig, LbiConfig};
use bcm_harness::{MethodConfigs, ScenarioGrid};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const OUT_ENV: &str = "BCM_INFER_OUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub grid: ScenarioGrid,
    pub filter: FilterConfig,
    pub lbi: LbiConfig,
    pub out_dir: PathBuf,
    pub workers: usize,
    pub log_level: String,
    /// Also export edge indicators of every ground-truth trajectory.
    pub export_edges: bool,
}

impl Default for AppConfig {
    fn default() -> Self {
        AppConfig {
            grid: ScenarioGrid::default(),
            filter: FilterConfig::default(),
            lbi: LbiConfig::default(),
            out_dir: PathBuf::from("results"),
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            log_level: "info".to_string(),
            export_edges: false,
        }
    }
}

/// Flag values that override the file; `None` keeps the file value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out_dir: Option<PathBuf>,
    pub workers: Option<usize>,
    pub epsilons: Option<Vec<f64>>,
    pub noise: Option<Vec<f64>>,
    pub seeds: Option<Seeds>,
}

impl AppConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }

    /// Loads `path` (or the defaults), then applies `BCM_INFER_OUT` and the
    /// flags.
    pub fn resolve(path: Option<&Path>, env_out: Option<PathBuf>, flags: Overrides) -> Result<Self> {
        let mut config = match path {
            Some(p) => AppConfig::from_file(p)?,
            None => AppConfig::default(),
        };
        if let Some(out) = env_out {
            config.out_dir = out;
        }
        if let Some(out) = flags.out_dir {
            config.out_dir = out;
        }
        if let Some(w) = flags.workers {
            config.workers = w;
        }
        if let Some(e) = flags.epsilons {
            config.grid.epsilons = e;
        }
        if let Some(s) = flags.noise {
            config.grid.noise_levels = s;
        }
        if let Some(s) = flags.seeds {
            config.grid.seeds = s.0;
        }
        if config.workers == 0 {
            return Err(CliError::Usage("workers must be at least 1".into()));
        }
        config.grid.validate()?;
        Ok(config)
    }

    pub fn method_configs(&self) -> MethodConfigs {
        MethodConfigs {
            filter: self.filter.clone(),
            lbi: self.lbi.clone(),
        }
    }
}

/// Seed list from the command line: `N` means seeds `0..N`, `a..b` a
/// half-open range, and `a,b,c` an explicit list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Seeds(pub Vec<u64>);

impl FromStr for Seeds {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let int = |v: &str| v.trim().parse::<u64>().map_err(|_| format!("invalid seed `{v}`"));
        if let Some((a, b)) = s.split_once("..") {
            let (a, b) = (int(a)?, int(b)?);
            if a >= b {
                return Err(format!("empty seed range {s}"));
            }
            return Ok(Seeds((a..b).collect()));
        }
        if s.contains(',') {
            return s.split(',').map(int).collect::<std::result::Result<_, _>>().map(Seeds);
        }
        let n = int(s)?;
        if n == 0 {
            return Err("seed count must be at least 1".into());
        }
        Ok(Seeds((0..n).collect()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_forms() {
        assert_eq!("3".parse::<Seeds>().unwrap().0, vec![0, 1, 2]);
        assert_eq!("2..4".parse::<Seeds>().unwrap().0, vec![2, 3]);
        assert_eq!("7,1".parse::<Seeds>().unwrap().0, vec![7, 1]);
        assert!("0".parse::<Seeds>().is_err());
        assert!("x".parse::<Seeds>().is_err());
    }

    #[test]
    fn precedence() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"out_dir": "from_file", "workers": 3}"#).unwrap();
        let c = AppConfig::resolve(Some(&path), None, Overrides::default()).unwrap();
        assert_eq!(c.out_dir, PathBuf::from("from_file"));
        assert_eq!(c.workers, 3);
        let c = AppConfig::resolve(Some(&path), Some("from_env".into()), Overrides::default()).unwrap();
        assert_eq!(c.out_dir, PathBuf::from("from_env"));
        let flags = Overrides {
            out_dir: Some("from_flag".into()),
            workers: Some(2),
            ..Default::default()
        };
        let c = AppConfig::resolve(Some(&path), Some("from_env".into()), flags).unwrap();
        assert_eq!(c.out_dir, PathBuf::from("from_flag"));
        assert_eq!(c.workers, 2);
    }

    #[test]
    fn unknown_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"grdi": {}}"#).unwrap();
        assert!(AppConfig::resolve(Some(&path), None, Overrides::default()).is_err());
    }
}
