use thiserror::Error;

/// Errors raised by the inference and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter or argument lies outside its admissible set.
    #[error("domain error: {0}")]
    Domain(String),

    /// Vector or matrix dimensions disagree.
    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    /// Fisher information fails the positive-definiteness check.
    #[error("singular Fisher information: smallest eigenvalue {min_eigenvalue:e} <= floor {floor:e}")]
    SingularInformation { min_eigenvalue: f64, floor: f64 },

    /// A linear map that must be invertible is not.
    #[error("singular map: {0}")]
    SingularMap(String),

    /// An iterative search did not converge.
    #[error("no convergence: {0}")]
    Convergence(String),

    /// A name lookup (model, body kind) failed.
    #[error("unknown {kind}: {name}")]
    Unknown { kind: &'static str, name: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
