use std::path::PathBuf;

use thiserror::Error;

use crate::engine::SimTime;

#[derive(Debug, Error)]
pub enum Error {
    #[error("event scheduled in the past: fire_at={fire_at} clock={clock}")]
    ScheduleInPast { fire_at: SimTime, clock: SimTime },

    #[error("invalid configuration: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),

    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("epoch index must be >= 1, got {0}")]
    EpochIndex(u64),

    #[error("reward {0} outside [0, 1]")]
    RewardOutOfRange(f64),

    #[error("reward normalizer must be positive, got {0}")]
    Normalizer(f64),

    #[error("coordination snapshot is missing BSS {0}")]
    MissingBss(usize),

    #[error("carrier-sense threshold {cca_dbm} dBm below OBSS/PD minimum {min_dbm} dBm")]
    CcaBelowMinimum { cca_dbm: f64, min_dbm: f64 },

    #[error("percentile of an empty sample set")]
    EmptySamples,

    #[error("malformed record in {path}: {message}")]
    Record { path: PathBuf, message: String },

    #[error("{failed} of {total} runs failed")]
    BatchFailed { failed: usize, total: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Config problems map to exit code 1, everything else to 2.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig(_) | Error::Parse { .. } | Error::CcaBelowMinimum { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
