use thiserror::Error;

/// Errors raised by graph construction, tree extraction and the scan kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("non-finite value in {what} at flat index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("graph is disconnected: vertex {unreached} is not reachable from vertex {from}")]
    Disconnected { from: usize, unreached: usize },

    #[error("edge set is not a spanning tree: {0}")]
    NotATree(String),

    #[error("vertex {index} out of range for {len} vertices")]
    VertexOutOfRange { index: usize, len: usize },

    #[error("language scan requires the tree root to be the last token {expected}, got {actual}")]
    CausalRoot { expected: usize, actual: usize },

    #[error("naive scan guard: {len} vertices exceeds limit {limit}")]
    TooLarge { len: usize, limit: usize },

    #[error("non-finite loss encountered during finite differencing")]
    NonFiniteLoss,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn ensure_finite(what: &'static str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { what, index }),
        None => Ok(()),
    }
}
