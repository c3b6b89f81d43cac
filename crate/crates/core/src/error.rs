//! Error type shared across the crate.

use alloc::string::String;
use core::fmt;

/// Errors produced by network construction, derivative propagation, and the
/// experiment drivers.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A vector or matrix had the wrong length for the requested operation.
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    /// A forward pass produced a non-finite value at the given layer
    /// (layer `L` denotes the output layer).
    NonFinite { layer: usize },
    /// An operation requiring a twice-differentiable activation was invoked
    /// on a spec that uses one with an identically-zero second derivative
    /// almost everywhere.
    NonSmooth { activation: &'static str },
    /// The operation is only defined for a specific architecture.
    WrongArchitecture { expected: &'static str },
    /// A quantity that must be nonzero (kernel norm, gradient norm) vanished.
    ZeroNorm { what: &'static str },
    /// The network description is internally inconsistent.
    InvalidSpec(String),
    /// The loss function is incompatible with the output head.
    LossHeadMismatch { loss: &'static str, head: &'static str },
    /// Gradient descent diverged (non-finite or exploding loss).
    Diverged { epoch: usize, loss: f64 },
    /// An input collection that must be non-empty was empty.
    Empty { what: &'static str },
    /// Scaling fits require strictly positive values.
    NonPositiveValue { what: &'static str, value: f64 },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { what, expected, got } => {
                write!(f, "dimension mismatch for {what}: expected {expected}, got {got}")
            }
            Error::NonFinite { layer } => write!(f, "non-finite value at layer {layer}"),
            Error::NonSmooth { activation } => {
                write!(f, "activation `{activation}` has no usable second derivative")
            }
            Error::WrongArchitecture { expected } => {
                write!(f, "operation requires architecture: {expected}")
            }
            Error::ZeroNorm { what } => write!(f, "{what} has zero norm"),
            Error::InvalidSpec(reason) => write!(f, "invalid network spec: {reason}"),
            Error::LossHeadMismatch { loss, head } => {
                write!(f, "loss `{loss}` is incompatible with output head `{head}`")
            }
            Error::Diverged { epoch, loss } => {
                write!(f, "gradient descent diverged at epoch {epoch} (loss {loss})")
            }
            Error::Empty { what } => write!(f, "{what} must be non-empty"),
            Error::NonPositiveValue { what, value } => {
                write!(f, "{what} must be positive, got {value}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
