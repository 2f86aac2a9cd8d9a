use std::path::PathBuf;

use thiserror::Error;

use crate::figures::FIGURE_IDS;

/// Exit code for an unknown figure id.
pub const EXIT_UNKNOWN_FIGURE: i32 = 2;
/// Exit code when the output location cannot be written.
pub const EXIT_UNWRITABLE: i32 = 3;
/// Exit code for a config that does not match the schema.
pub const EXIT_CONFIG: i32 = 4;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("unknown figure id `{0}` (known: {ids})", ids = FIGURE_IDS.join(", "))]
    UnknownFigure(String),
    #[error("cannot write {path}: {source}")]
    Unwritable { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] erlang_core::Error),
}

impl LabError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::UnknownFigure(_) => EXIT_UNKNOWN_FIGURE,
            Self::Unwritable { .. } => EXIT_UNWRITABLE,
            Self::Config(_) => EXIT_CONFIG,
            Self::Core(_) => 1,
        }
    }
}

pub type LabResult<T> = Result<T, LabError>;
