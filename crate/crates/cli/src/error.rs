use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("hypothesis failure: {0}")]
    Hypothesis(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    /// 1 config or I/O, 2 failed hypothesis, 3 numerical breakdown.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 1,
            CliError::Hypothesis(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

impl From<phs_core::Error> for CliError {
    fn from(e: phs_core::Error) -> Self {
        use phs_core::Error as E;
        match e {
            E::NotPassive { .. } | E::NoTraceDomination | E::NotDissipative => CliError::Hypothesis(e.to_string()),
            E::Numerical(_) => CliError::Numerical(e.to_string()),
            E::Domain(_) | E::InvalidDensity(_) | E::NotEnergyDensity { .. } | E::Dimension(_) | E::RankDeficient { .. } => {
                CliError::Config(e.to_string())
            }
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
