use thiserror::Error;

/// Errors produced by diagram parsing and distance computations.
///
/// Contract violations (skew-pair evaluation, double deletion, decreasing a
/// k-d tree weight) are programming errors and panic instead.
#[derive(Debug, Error)]
pub enum Error {
    /// The input text violates the diagram file format. `line` is 1-based.
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Both diagrams are empty; the distance is 0 and there is no instance
    /// to build.
    #[error("both diagrams are empty")]
    EmptyInstance,

    /// A parameter is outside its documented range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
