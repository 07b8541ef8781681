use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate PV site at bus {0}")]
    DuplicatePvBus(usize),

    #[error("PV site references bus {0}, which is not a feeder bus")]
    PvBusOutOfRange(usize),

    #[error("network is not a valid radial feeder: {}", .0.join("; "))]
    InvalidNetwork(Vec<String>),

    #[error("{0}")]
    Shape(String),

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("power flow did not converge after {iterations} iterations (mismatch {mismatch:.3e} p.u.)")]
    Divergence { iterations: usize, mismatch: f64 },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("scenario: {0}")]
    Scenario(String),

    #[error("action out of bounds at site {site}: |{value}| > {limit} kvar")]
    ActionOutOfBounds { site: usize, value: f64, limit: f64 },

    #[error("episode is finished; call reset first")]
    EpisodeFinished,

    #[error("replay buffer holds {have} transitions, batch needs {need} (warm-up not finished)")]
    WarmUp { have: usize, need: usize },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
