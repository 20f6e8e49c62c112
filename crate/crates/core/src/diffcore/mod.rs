//! Dense tensors with a recording tape and exact reverse-mode gradients.
//!
//! Only the primitives the protection pipeline needs are provided:
//! elementwise arithmetic, scalar scale/shift, matrix-vector and
//! matrix-matrix products, sigmoid, tanh, sqrt, reductions (sum, mean,
//! dot, guarded norm), scalar broadcast, reshape, gather and concat.

mod tape;
mod tensor;

pub use tape::{Gradients, Tape, Var, NORM_GUARD};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiffError {
    #[error("{op}: shape mismatch {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("shape {shape:?} has a zero dimension")]
    InvalidShape { shape: Vec<usize> },
    #[error("shape {shape:?} does not match data length {len}")]
    LengthMismatch { shape: Vec<usize>, len: usize },
    #[error("{op}: non-finite value at flat index {index}")]
    NonFinite { op: &'static str, index: usize },
    #[error("gather index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("backward root must have one element, got shape {shape:?}")]
    NonScalarRoot { shape: Vec<usize> },
    #[error("concat needs at least one input")]
    EmptyConcat,
    #[error("variable belongs to a different tape")]
    ForeignVar,
    #[error("replay of node {node} did not reproduce the recorded value")]
    ReplayMismatch { node: usize },
}
