use thiserror::Error;

/// Errors raised by density, model, condition and certificate routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("not an energy density: lower spectral bound {lower} is not positive")]
    NotEnergyDensity { lower: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("rank-deficient matrix: rows {rows:?} are linearly dependent on earlier rows")]
    RankDeficient { rows: Vec<usize> },

    #[error("hypothesis (i) fails: system is not impedance-passive (residual {residual:e})")]
    NotPassive { residual: f64 },

    #[error("hypothesis (ii) fails: input and output do not dominate a boundary trace")]
    NoTraceDomination,

    #[error("closed loop is not strictly dissipative at either endpoint")]
    NotDissipative,

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
