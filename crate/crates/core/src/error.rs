use std::path::PathBuf;

/// Errors produced by reconstruction, simulation and file handling.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid value: {0}")]
    Domain(String),

    #[error("reference volume has non-positive maximum ({0})")]
    DegenerateReference(f64),

    #[error("cost became non-finite at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("MRC format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("unsupported MRC mode {0} (only mode 2 is supported)")]
    UnsupportedMode(i32),

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
