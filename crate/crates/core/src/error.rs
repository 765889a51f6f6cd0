use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate quaternion")]
    DegenerateQuaternion,

    #[error("quaternion is not unit norm (‖q‖ = {0})")]
    NonUnitQuaternion(f64),

    #[error("unreliable tilt: accelerometer norm {0:.4} g is below threshold")]
    UnreliableTilt(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("diverged: non-finite state")]
    NonFiniteState,

    #[error("diverged at tick {tick}: non-finite state")]
    Diverged { tick: u64 },

    #[error("closed loop is unstable: characteristic s² + {c1}s + {c0} is not Hurwitz")]
    Unstable { c1: f64, c0: f64 },

    #[error("empty series")]
    EmptySeries,

    #[error("series length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad user configuration rather than runtime failure.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. }
                | Error::Scenario(_)
                | Error::UnknownPreset(_)
                | Error::Json(_)
                | Error::Unstable { .. }
        )
    }
}
