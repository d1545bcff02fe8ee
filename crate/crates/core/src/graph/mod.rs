//! Two-person skeleton graphs.
//!
//! Vertices `0..N` belong to the first body and `N..2N` to the second. A
//! [`LabelingStrategy`] decides which edges exist; the resulting weighted
//! adjacency is split by hop distance into `K = D + 1` subsets and each subset
//! is symmetrically degree-normalised for graph convolution.

mod adjacency;
mod partition;
mod topology;

pub use adjacency::{
    build_adjacency, build_geometric, geometric_weights, graph_coordinates, person_swap, GraphOptions, HandLinks,
    LabeledAdjacency, LabelingStrategy,
};
pub use partition::{hop_distances, hop_partition, normalize};
pub use topology::{SkeletonLayout, SkeletonTopology, PART_COUNT};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("geometric labeling needs a skeleton sequence")]
    MissingSequence,
    #[error("joint index {index} out of range for {count} joints")]
    IndexOutOfRange { index: usize, count: usize },
    #[error("adjacency not symmetric at ({i}, {j})")]
    NonSymmetric { i: usize, j: usize },
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("unexpected shape {0:?}")]
    ShapeMismatch(Vec<usize>),
}
