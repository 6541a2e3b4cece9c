use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid traffic count {requested}: must be in 1..={max}")]
    TrafficCount { requested: usize, max: usize },

    #[error("could not place vehicle {vehicle} without overlap after {attempts} attempts")]
    SpawnFailed { vehicle: usize, attempts: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite loss {loss} at episode {episode}, step {step}")]
    NonFiniteLoss { loss: f64, episode: usize, step: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
