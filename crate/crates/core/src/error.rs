use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the simulation and analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} = {value} is outside the valid interval [{min}, {max}]")]
    Range {
        what: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("scene construction failed: {0}")]
    Construction(String),

    #[error("LED drive current {current_ma} mA exceeds the safety cap of {cap_ma} mA")]
    Safety { current_ma: f64, cap_ma: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("point ({x:.3}, {y:.3}, {z:.3}) mm lies outside the scene bounds")]
    OutOfBounds { x: f64, y: f64, z: f64 },

    #[error("simulation fault: {0}")]
    SimulationFault(String),

    #[error("no samples in window [{t0}, {t1}] s")]
    EmptyWindow { t0: f64, t1: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("rank-deficient fit: {0}")]
    RankDeficient(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse error classes, mapped onto the CLI exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    InputData,
    Internal,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Config => 2,
            ErrorClass::InputData => 3,
            ErrorClass::Internal => 4,
        }
    }
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Range { .. }
            | Error::Config(_)
            | Error::Construction(_)
            | Error::Safety { .. } => ErrorClass::Config,
            Error::Domain(_)
            | Error::EmptyWindow { .. }
            | Error::Degenerate(_)
            | Error::RankDeficient(_)
            | Error::Parse { .. }
            | Error::Schema(_)
            | Error::Io { .. } => ErrorClass::InputData,
            Error::OutOfBounds { .. } | Error::SimulationFault(_) => ErrorClass::Internal,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
