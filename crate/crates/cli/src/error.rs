use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("cannot read config {path}: {source}")]
    ConfigRead {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Validation(String),

    #[error("numerical failure: {0}")]
    Numerical(#[source] bns_emm::Error),

    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("verification failed: {0}")]
    VerifyGate(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 64,
            CliError::ConfigRead { .. } => 66,
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Output { .. } => 74,
            CliError::VerifyGate(_) => 4,
        }
    }
}

impl From<bns_emm::Error> for CliError {
    fn from(e: bns_emm::Error) -> Self {
        use bns_emm::Error as E;
        match e {
            E::InvalidParameter { .. } | E::Precondition(_) => CliError::Validation(e.to_string()),
            other => CliError::Numerical(other),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
