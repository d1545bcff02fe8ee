//! Dense tensors with tape-based reverse-mode differentiation.
//!
//! Values live in row-major [`Tensor`]s. Every operation invoked on a [`Tape`]
//! appends a node holding its output and a reverse rule; [`Tape::backward`]
//! walks the nodes in reverse and accumulates gradients into the
//! [`ParamStore`] entries that were recorded with [`Tape::param`].
//!
//! The op set covers what the graph network needs: broadcasting arithmetic,
//! matrix contraction, joint-axis graph aggregation, `K x 1` temporal
//! convolution and max pooling, batch normalisation, activations and
//! cross-entropy. [`grad_check`] compares every reverse rule with central
//! finite differences.

mod checkpoint;
mod gradcheck;
pub mod ops;
mod param;
mod tape;
mod tensor;

pub use checkpoint::{read_checkpoint, write_checkpoint, CheckpointEntry, CheckpointError};
pub use gradcheck::{grad_check, GradCheckConfig, GradCheckReport, ParamReport};
pub use ops::conv::TemporalWindow;
pub use ops::norm::{BatchStats, NormStats};
pub use param::{Buffer, BufferId, ParamId, ParamStore, Parameter};
pub use tape::{BackwardFn, Gradients, Tape, Var};
pub use tensor::{DType, Real, Tensor};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("data length {len} does not match shape {shape:?}")]
    DataLength { shape: Vec<usize>, len: usize },
    #[error("invalid axis {axis} for rank {rank} in {op}")]
    InvalidAxis {
        op: &'static str,
        axis: usize,
        rank: usize,
    },
    #[error("{op} needs at least one input")]
    Empty { op: &'static str },
    #[error("non-finite value produced at node {node}")]
    NonFiniteDetected { node: usize },
    #[error("variable is not recorded on a gradient-tracking tape")]
    NoTape,
}
