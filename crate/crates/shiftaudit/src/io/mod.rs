//! On-disk formats: CSV datasets, the binary manifest layout, probe model
//! documents and the NDJSON action log.

mod actions;
mod binary;
mod csv_format;
mod model;
mod projection;

use std::path::{Path, PathBuf};

pub use actions::{default_log_path, load_label_store, read_action_log, ActionLog};
pub use binary::{load_binary, write_binary, Manifest};
pub use csv_format::{load_csv, read_csv, write_csv, write_csv_to};
pub use model::{load_model, save_model, Model, ModelDocument, ModelKind, MODEL_FORMAT_VERSION};
pub use projection::{projection_points, write_projection_csv, ProjectionPoint};

use shiftaudit_core::dataset::Dataset;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    File { path: PathBuf, source: std::io::Error },
    #[error("malformed header: {0}")]
    Header(String),
    #[error("ragged row {row}: expected {expected} cells, found {found}")]
    RaggedRow { row: usize, expected: usize, found: usize },
    #[error("row {row}, column `{column}`: `{value}` is not a number")]
    BadNumber { row: usize, column: String, value: String },
    #[error("row {row}: empty id")]
    EmptyId { row: usize },
    #[error("size mismatch: vector file holds {found} bytes, expected {expected}")]
    SizeMismatch { expected: u64, found: u64 },
    #[error("missing vector file {}", .0.display())]
    MissingVectorFile(PathBuf),
    #[error("manifest declares {manifest} rows but metadata has {metadata}")]
    RowCount { manifest: usize, metadata: usize },
    #[error("unsupported manifest: {0}")]
    Manifest(String),
    #[error("invalid model document: {0}")]
    Model(String),
    #[error("action log line {line}: {source}")]
    ActionLine { line: usize, source: serde_json::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Data(#[from] shiftaudit_core::Error),
}

pub type IoResult<T> = Result<T, IoError>;

pub(crate) fn file_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::File {
        path: path.to_path_buf(),
        source,
    }
}

/// Loads a CSV dataset, or a binary one when `path` is a `.json` manifest.
pub fn load_dataset(path: &Path) -> IoResult<Dataset> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        load_binary(path)
    } else {
        load_csv(path)
    }
}
