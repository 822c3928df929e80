use thiserror::Error;
use wanderode::canard::CanardError;
use wanderode::io::IoError;
use wanderode::spectral::SpectralError;
use wanderode::{IntegrationError, ModelError, WalkError};

/// Exit status of the binary for each failure class.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 2;
    pub const IO: i32 = 3;
    pub const MODEL: i32 = 4;
    pub const INTEGRATION: i32 = 5;
    pub const WALK: i32 = 6;
    pub const SPECTRAL: i32 = 7;
    pub const CANARD: i32 = 8;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{stage} {path}: {source}")]
    Io {
        stage: &'static str,
        path: String,
        source: std::io::Error,
    },
    #[error("{stage}: {source}")]
    Table {
        stage: &'static str,
        source: IoError,
    },
    #[error("model: {0}")]
    Model(#[from] ModelError),
    #[error("integration: {0}")]
    Integration(#[from] IntegrationError),
    #[error("random walk: {0}")]
    Walk(#[from] WalkError),
    #[error("spectral analysis: {0}")]
    Spectral(#[from] SpectralError),
    #[error("canard measurement: {0}")]
    Canard(#[from] CanardError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Io { .. } | CliError::Table { .. } => exit::IO,
            CliError::Model(_) => exit::MODEL,
            CliError::Integration(IntegrationError::Model(_)) => exit::MODEL,
            CliError::Integration(_) => exit::INTEGRATION,
            CliError::Walk(WalkError::Integration(IntegrationError::Model(_))) => exit::MODEL,
            CliError::Walk(_) => exit::WALK,
            CliError::Spectral(_) => exit::SPECTRAL,
            CliError::Canard(_) => exit::CANARD,
        }
    }
}
