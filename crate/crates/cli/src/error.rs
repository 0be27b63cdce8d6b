use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot parse scenario: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("time {t} reaches the blow-up horizon {horizon}")]
    Horizon { t: f64, horizon: f64 },
    #[error(transparent)]
    Core(#[from] patchflow::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("plot: {0}")]
    Plot(String),
    #[error("{0} verification check(s) failed")]
    VerifyFailed(usize),
}

/// Machine-readable error record printed on stderr.
#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub error: &'static str,
    pub message: String,
    pub exit_code: i32,
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Parse(_) => "parse",
            Self::Invalid(_) => "invalid scenario",
            Self::Horizon { .. } | Self::Core(patchflow::Error::BlowUpHorizon { .. }) => "blow-up horizon",
            Self::Core(patchflow::Error::OutsideRadius { .. }) => "outside series radius",
            Self::Core(_) => "numerics",
            Self::Io(_) | Self::Csv(_) | Self::Json(_) | Self::Plot(_) => "io",
            Self::VerifyFailed(_) => "verify",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            "parse" | "invalid scenario" => 2,
            "blow-up horizon" => 3,
            _ => 1,
        }
    }

    pub fn report(&self) -> ErrorReport {
        ErrorReport { error: self.kind(), message: self.to_string(), exit_code: self.exit_code() }
    }
}

pub type CliResult<T> = Result<T, CliError>;
