//! File formats: Matrix Market matrices, JSON reports, TOML run
//! configuration, and seeded random problems.

mod config;
mod generate;
mod matrix_market;
mod report;

use std::path::PathBuf;

pub use config::RunConfig;
pub use generate::{gen_random, MatrixKind};
pub use matrix_market::{format_matrix, parse_matrix, read_matrix, write_matrix};
pub use report::{ReportDocument, ReportFile, Tolerances};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("matrix must be square, got {rows}x{cols}")]
    Dimension { rows: usize, cols: usize },
    #[error("report document: {0}")]
    Report(#[from] serde_json::Error),
    #[error("configuration: {0}")]
    Config(#[from] toml::de::Error),
    #[error("configuration: {0}")]
    Invalid(String),
}

pub(crate) fn read_text(path: &std::path::Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|source| IoError::Io { path: path.to_path_buf(), source })
}

pub(crate) fn write_text(path: &std::path::Path, text: &str) -> Result<(), IoError> {
    std::fs::write(path, text).map_err(|source| IoError::Io { path: path.to_path_buf(), source })
}
