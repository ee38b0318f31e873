use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {what} expected {expected}, got {actual}")]
    Dimension {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("invalid hand model: {0}")]
    InvalidModel(String),
    #[error("invalid object shape: {0}")]
    InvalidShape(String),
    #[error("finger {0} is not in contact with the object")]
    NotInContact(usize),
    #[error("stability query needs at least one active contact")]
    EmptyContacts,
    #[error("brute-force oracle supports at most 4 contacts, got {0}")]
    OracleScope(usize),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("planner setup: {0}")]
    Setup(String),
    #[error("unknown tree node {0}")]
    UnknownNode(usize),
    #[error("reset set is empty after filtering")]
    EmptyResetSet,
    #[error("stable grasp sampler gave up after {0} attempts")]
    SamplerExhausted(usize),
    #[error("config error: {0}")]
    Config(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("checkpoint was trained under config hash {checkpoint}, current config hashes to {config}")]
    HashMismatch { checkpoint: String, config: String },
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(what: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Dimension {
            what,
            expected,
            actual,
        })
    }
}

pub(crate) fn check_finite(what: &'static str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}
