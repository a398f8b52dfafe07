//! Crate-wide error type.
//!
//! Every fallible operation in the crate returns [`Result`]. Variants carry
//! enough context (sample indices, file positions, expected vs found shapes)
//! that a CLI user can locate the offending input without a debugger.

use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("input is empty")]
    EmptyInput,

    #[error("sample {index} has shape {found_len}x{found_vars}, expected {expected_len}x{expected_vars} like sample 0")]
    ShapeMismatch {
        index: usize,
        expected_len: usize,
        expected_vars: usize,
        found_len: usize,
        found_vars: usize,
    },

    #[error("sample {index} contains a non-finite value")]
    NonFinite { index: usize },

    #[error("series contains a non-finite value")]
    NonFiniteSeries,

    #[error("sample {index} has an empty class label")]
    EmptyLabel { index: usize },

    #[error("series have {left} and {right} variables, expected the same count")]
    VarCountMismatch { left: usize, right: usize },

    #[error("series must have at least one time step")]
    EmptySeries,

    #[error("series shapes {left_len}x{left_vars} and {right_len}x{right_vars} are incompatible for {op}")]
    IncompatibleSeries {
        op: &'static str,
        left_len: usize,
        left_vars: usize,
        right_len: usize,
        right_vars: usize,
    },

    #[error("combined length {total} exceeds the exhaustive-enumeration budget of {budget}")]
    EnumerationBudget { total: usize, budget: usize },

    #[error("class {label:?} not present in the dataset")]
    ClassNotFound { label: String },

    #[error("class {label:?} has {members} member(s), but the operation needs {needed}")]
    InsufficientClassMembers {
        label: String,
        members: usize,
        needed: usize,
    },

    #[error("index {index} is out of bounds for a dataset of {size} samples")]
    IndexOutOfBounds { index: usize, size: usize },

    #[error("{what} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid configuration: {reason}")]
    InvalidConfig { reason: String },

    #[error("training diverged at epoch {epoch} (last finite epoch loss {last_finite})")]
    Diverged { epoch: usize, last_finite: f64 },

    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("model file declares format version {found}, this build reads version {supported}")]
    UnsupportedFormatVersion { found: u32, supported: u32 },

    #[error("invalid model file: {reason}")]
    InvalidModel { reason: String },
}
