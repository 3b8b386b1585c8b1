use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value handed to an operation violates its precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A configuration value is out of range or inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("data error: {0}")]
    Data(String),

    /// The Jacobian is singular or its condition estimate exceeds the policy threshold.
    #[error("singular jacobian (condition estimate {condition:e})")]
    Singular { condition: f64 },

    #[error("bias fit: no training sample has |qd|_inf < {velocity_eps}; raise velocity_eps or add dwell segments to the trajectory")]
    NoStationarySamples { velocity_eps: f64 },

    #[error("metric error: {0}")]
    Metric(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Process exit code: 2 config, 3 data, 4 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidInput(_) => 2,
            Error::Parse { .. } | Error::Data(_) | Error::Io { .. } | Error::Json { .. } => 3,
            Error::Singular { .. } | Error::NoStationarySamples { .. } | Error::Metric(_) => 4,
            Error::Stage { source, .. } => source.exit_code(),
        }
    }
}
