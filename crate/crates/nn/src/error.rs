use thiserror::Error;

/// Errors produced by tensor ops, model construction, checkpoints, and training.
#[derive(Debug, Error)]
pub enum NnError {
    /// A binary op received operands whose shapes cannot be combined.
    #[error("shape mismatch in {op}: left is {lhs_rows}x{lhs_cols}, right is {rhs_rows}x{rhs_cols}")]
    Shape {
        op: &'static str,
        lhs_rows: usize,
        lhs_cols: usize,
        rhs_rows: usize,
        rhs_cols: usize,
    },

    /// An op precondition unrelated to shape was violated (index bounds,
    /// empty mask, backward from a non-scalar, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Checkpoint serialization or deserialization failed.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// Training diverged or produced non-finite numbers.
    #[error("training error: {0}")]
    Training(String),

    #[error(transparent)]
    Core(#[from] rewire_core::CoreError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, NnError>;

impl NnError {
    pub(crate) fn shape(op: &'static str, lhs: (usize, usize), rhs: (usize, usize)) -> Self {
        NnError::Shape {
            op,
            lhs_rows: lhs.0,
            lhs_cols: lhs.1,
            rhs_rows: rhs.0,
            rhs_cols: rhs.1,
        }
    }
}
