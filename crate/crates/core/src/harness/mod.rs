//! Configured sweeps, CSV output and the validation suite.

pub mod config;
pub mod output;
pub mod sweep;
pub mod validate;

use thiserror::Error;

use crate::bounds::BoundsError;
use crate::channel::ChannelError;
use crate::codes::CodeError;
use crate::fim::FimError;
use crate::geometry::GeometryError;

pub use config::{ExperimentConfig, SweepPoint};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error(transparent)]
    Fim(#[from] FimError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
