use alloc::string::String;


pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("matrix has only zero entries")]
    ZeroMatrix,
    #[error("spectral norm {norm} exceeds 1 + 1e-3; pre-scale before orthogonalizing")]
    NotPreScaled { norm: f64 },
    #[error("GroupSort2 needs an even width, got {0}")]
    OddWidth(usize),
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("class index {index} out of range for {classes} classes")]
    BadClassIndex { index: usize, classes: usize },
    #[error("class {0} is not the arg-max of the logits")]
    NotArgmax(usize),
    #[error("certificates require a network in constrained mode")]
    UnconstrainedNet,
    #[error("balance function has no sign change")]
    NoBracket,
    #[error("exact assignment needs equal atom counts (at most 64) with uniform weights")]
    UnsupportedWeights,
    #[error("rejection sampling exhausted its retry budget after placing {placed} of {requested} points")]
    Unsatisfiable { placed: usize, requested: usize },
    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub(crate) fn shape_err(expected: impl Into<String>, got: impl Into<String>) -> Error {
    Error::ShapeMismatch {
        expected: expected.into(),
        got: got.into(),
    }
}
