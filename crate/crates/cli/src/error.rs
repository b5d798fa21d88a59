use std::process::ExitCode;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical fault: {0}")]
    Numerical(String),
    #[error("check failed: {0}")]
    CheckFailed(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Config(_) => 2,
            CliError::Data(_) | CliError::Io { .. } => 3,
            CliError::Numerical(_) | CliError::CheckFailed(_) => 4,
        })
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

impl From<optree::Error> for CliError {
    fn from(e: optree::Error) -> Self {
        use optree::Error as E;
        match e {
            E::InvalidConfig(_) | E::Bounds(_) | E::MaxLevelExceeded { .. } | E::SplitOutOfRange { .. } => {
                CliError::Config(e.to_string())
            }
            E::InvalidData(_) | E::DimensionMismatch { .. } | E::PointOutsideRegion { .. } | E::RegionKindMismatch => {
                CliError::Data(e.to_string())
            }
            E::NumericalFault(_) | E::RegionNotInTable(_) => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Numerical(format!("serialization failed: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
