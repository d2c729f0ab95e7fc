//! Experiment orchestration: ground-truth grids, inference and forecast
//! runs for both recovery methods, resumable sweeps, and aggregation.

mod error;
pub mod grid;
pub mod io;
pub mod run;
pub mod stats;
pub mod store;
pub mod sweep;

pub use error::{HarnessError, Result};
pub use grid::{Method, RunSpec, Scenario, ScenarioGrid, SpecMatrix, Specification};
pub use run::{
    run_forecast, run_id, run_inference, Forecast, ForecastSummary, Inference, MethodConfigs, Reconstruction,
    ResolvedConfig, RunRecord, RunStatus,
};
pub use stats::{aggregate, quantile, write_aggregate_csv, AggregateStats, GroupField, GroupKey, Summary};
pub use store::{Manifest, ManifestEntry, Store, TruthSummary};
pub use sweep::{Sweep, SweepReport};

/// Ground truth for every grid cell, in [`ScenarioGrid::cells`] order.
pub fn generate_ground_truth(grid: &ScenarioGrid) -> Result<Vec<bcm_core::Trajectory>> {
    grid.validate()?;
    grid.cells()
        .iter()
        .map(|c| bcm_core::generate(&c.params()).map_err(HarnessError::from))
        .collect()
}
