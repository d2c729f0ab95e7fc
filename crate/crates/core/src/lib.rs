//! Bounded-confidence opinion dynamics and two ways of recovering the latent
//! opinions from interaction data: an ensemble Kalman filter and
//! gradient-based maximum likelihood through the model rollout.
//!
//! Numerical routines are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64`, which is what the experiment
//! harness uses.

// `!(x >= 0.0)` style checks deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adam;
pub mod enkf;
mod error;
pub mod lbi;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod observation;
pub mod rng;
mod scalar;

pub use enkf::{assimilate, FilterConfig, Perturbation};
pub use error::{Error, Result};
pub use lbi::{infer, LbiConfig, RestartOutcome};
pub use metrics::{ForecastReport, ReconstructionReport};
pub use model::{confidence_set, generate, simulate, step, ModelParams, TrajectoryObservations};
pub use observation::{observe, EdgeObservation, Granularity, Observation, ObservationSeries};
pub use scalar::{logistic, logit, softplus, Scalar};

pub type OpinionState = model::OpinionState<f64>;
pub type Trajectory = model::Trajectory<f64>;
pub type Ensemble = enkf::Ensemble<f64>;
pub type FilterResult = enkf::FilterResult<f64>;
pub type LbiResult = lbi::LbiResult<f64>;
pub type RolloutTape = lbi::RolloutTape<f64>;
pub type Matrix = linalg::Matrix<f64>;

pub type OpinionStateF32 = model::OpinionState<f32>;
pub type TrajectoryF32 = model::Trajectory<f32>;
