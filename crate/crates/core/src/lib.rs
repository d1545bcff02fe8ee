//! Two-person graph convolutional networks for skeleton interaction recognition.
//!
//! Skeleton captures are read into [`SkeletonSequence`]s, arranged into one- or
//! two-person graphs by a [`GraphScaleMode`], expanded into four input streams and
//! classified by a [`Model`] built on a small reverse-mode autodiff engine.

pub mod autodiff;
pub mod features;
pub mod graph;
pub mod nn;
pub mod skeleton_io;
pub mod train;

pub use autodiff::{ParamStore, Real, Tape, Tensor};
pub use features::{FeatureBundle, GraphScaleMode, MirrorMode, Phase};
pub use graph::{GraphOptions, LabeledAdjacency, LabelingStrategy, SkeletonLayout, SkeletonTopology};
pub use nn::{Model, ModelConfig};
pub use skeleton_io::{DatasetManifest, SampleMeta, SkeletonSequence};
pub use train::{EvalReport, TrainConfig, TrainError};
