use std::fmt;

use serde::Serialize;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid payload: {0} bytes (allowed 1..=255)")]
    InvalidPayload(usize),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid trace: {0}")]
    InvalidTrace(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid spreading factor pair: {0}")]
    InvalidPair(String),

    #[error("no feasible spreading factor: {0}")]
    NoFeasibleSf(InfeasibleDiagnostics),

    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub fn parse(row: usize, column: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            row,
            column: column.into(),
            message: message.into(),
        }
    }
}

/// Per-rule failure counts reported when every candidate was excluded.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct InfeasibleDiagnostics {
    pub distance: usize,
    pub link_margin: usize,
    pub duty_cycle: usize,
    pub data_rate: usize,
    pub doppler: usize,
}

impl fmt::Display for InfeasibleDiagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "all 6 candidates excluded (distance: {}, link-margin: {}, duty-cycle: {}, data-rate: {}, doppler: {})",
            self.distance, self.link_margin, self.duty_cycle, self.data_rate, self.doppler
        )
    }
}
