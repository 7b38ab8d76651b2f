//! Crate-wide error type.
//!
//! Every fallible operation in this crate returns [`Result`]. Parse errors
//! carry 0-based byte offsets into the source text; pointwise numerical
//! errors carry the offending point so failures can be reproduced.

use thiserror::Error;

use crate::fields::JetOrder;

/// Unified error type for parsing, field evaluation, linear algebra,
/// integration, and flow integration.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed expression text. `offset` is the 0-based byte position.
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    /// An identifier that is neither a coordinate nor a known function.
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { offset: usize, name: String },

    /// A coordinate `x<k>` whose index is 0 or exceeds the chart dimension.
    #[error("coordinate index {index} out of range at byte {offset} (dimension {dim}, valid indices 1..={dim})")]
    CoordinateOutOfRange {
        offset: usize,
        index: usize,
        dim: usize,
    },

    /// Evaluation hit a point outside the mathematical domain of a
    /// subexpression (division by zero, log of a non-positive value, ...).
    /// `node` is the offending subexpression rendered back to text.
    #[error("domain error in `{node}`: {message}")]
    Domain { node: String, message: String },

    /// Two objects that must share a chart dimension do not.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A field was asked for a higher jet order than it can provide, e.g.
    /// a divergence of a field that is itself a Laplacian.
    #[error("jet order {requested:?} requested from a field that only supports {available:?}")]
    DerivativeOrder {
        available: JetOrder,
        requested: JetOrder,
    },

    /// A pointwise linear solve met a matrix with condition estimate above
    /// the ceiling, or an exactly singular matrix.
    #[error("near-singular matrix at point {point:?} (condition estimate {cond:.3e})")]
    NearSingular { point: Vec<f64>, cond: f64 },

    /// A documented precondition of an operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A numerical process produced a non-finite state. Carries the last
    /// finite state and the time at which it was recorded.
    #[error("non-finite state reached at t = {t}; last finite state {state:?}")]
    NonFinite { t: f64, state: Vec<f64> },

    /// A caller-supplied argument is structurally invalid (empty box,
    /// zero quadrature order, mismatched lengths, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
