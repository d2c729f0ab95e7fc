//! Command-line front end: configuration, subcommands and SVG figures.

pub mod commands;
pub mod config;
mod error;
pub mod figures;
pub mod svg;

pub use config::{AppConfig, Overrides, Seeds};
pub use error::{CliError, Result};
pub use figures::{FigureKind, FigureSpec};
