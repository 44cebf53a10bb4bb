use std::path::PathBuf;

use spt_core::{ErrorClass, SptError};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] SptError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Config(String),
}

impl CliError {
    /// 0 ok, 2 symmetry absent, 3 numerical, 4 validation, 5 size cap.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) => match e.class() {
                ErrorClass::SymmetryAbsent => 2,
                ErrorClass::Numerical => 3,
                ErrorClass::Validation => 4,
                ErrorClass::SizeCap => 5,
            },
            CliError::Io { .. } | CliError::Config(_) => 4,
        }
    }
}
