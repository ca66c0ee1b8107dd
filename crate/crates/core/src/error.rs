use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to parse {what}: {message}")]
    Parse { what: String, message: String },

    /// A configuration value broke one of the scenario invariants.
    #[error("{field} out of range: {reason}")]
    Invalid { field: &'static str, reason: String },

    #[error("trace file is missing position for slot {t}, satellite {sat}")]
    TraceGap { t: usize, sat: usize },

    #[error("satellite {sat} altitude {altitude_m:.0} m outside [{min_m:.0}, {max_m:.0}] m")]
    Altitude {
        sat: usize,
        altitude_m: f64,
        min_m: f64,
        max_m: f64,
    },

    #[error("ground user {0} has no associated base station")]
    Unassociated(usize),

    #[error("exhaustive search needs {states} states, budget is {budget}")]
    SearchBudget { states: f64, budget: f64 },

    #[error("no results to emit")]
    EmptyResults,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
