use thiserror::Error;

#[derive(Debug, Error)]
pub enum MmtfError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("point outside the tubular neighbourhood (|d| = {dist:.3e}, reach = {reach:.3e})")]
    OutsideTube { dist: f64, reach: f64 },
    #[error("infeasible boundary data: {0}")]
    InfeasibleBoundary(String),
    #[error("under-resolved: {0}")]
    Resolution(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl MmtfError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        MmtfError::Invalid(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        MmtfError::Numerical(msg.into())
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            MmtfError::Numerical(_) | MmtfError::Resolution(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, MmtfError>;
