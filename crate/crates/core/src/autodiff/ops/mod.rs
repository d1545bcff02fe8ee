//! Differentiable operations, each implemented as methods on [`Tape`](super::Tape).

pub mod conv;
pub mod elementwise;
pub mod linalg;
pub mod loss;
pub mod norm;
pub mod reduce;
pub mod shape;
