//! Input-stream preprocessing.
//!
//! A two-body sequence is first arranged into graphs by a [`GraphScaleMode`],
//! then each graph `[C, T, V]` is expanded into four `2C`-channel streams:
//! joint (raw + center-relative), bone (vectors + axis angles), and the
//! velocity/acceleration of joints and of bones.

mod branches;
mod scale;

pub use branches::{bone_branch, bone_vectors, joint_branch, motion_branch};
pub use scale::{apply_graph_scale, mirror_second_body, GraphScaleMode, MirrorMode, Phase};

use rand::Rng;
use thiserror::Error;

use crate::autodiff::Tensor;
use crate::graph::SkeletonTopology;
use crate::skeleton_io::{BranchTag, FeatureRecord, SampleMeta, SkeletonSequence};

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("{found} vertices is not a whole number of {joints}-joint bodies")]
    VertexCount { found: usize, joints: usize },
    #[error("graph-scale modes need two body slots, found {0}")]
    NeedsTwoBodies(usize),
    #[error("body slot 1 already holds a skeleton")]
    SecondBodyPresent,
    #[error("inconsistent feature records: {0}")]
    Inconsistent(String),
}

/// The four input streams of one sample, each `[2C, T, G, V]` for `G` graphs.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureBundle {
    pub joint: Tensor<f32>,
    pub bone: Tensor<f32>,
    pub joint_motion: Tensor<f32>,
    pub bone_motion: Tensor<f32>,
    pub graphs_per_sample: usize,
}

fn stack_graphs(graphs: &[Tensor<f32>]) -> Tensor<f32> {
    let s = graphs[0].shape();
    let (c, t, v) = (s[0], s[1], s[2]);
    let g = graphs.len();
    Tensor::from_fn(&[c, t, g, v], |k| {
        let vi = k % v;
        let gi = (k / v) % g;
        let ct = k / (g * v);
        graphs[gi].data()[ct * v + vi]
    })
}

fn unstack_graph(x: &Tensor<f32>, gi: usize) -> Tensor<f32> {
    let s = x.shape();
    let (c, t, g, v) = (s[0], s[1], s[2], s[3]);
    Tensor::from_fn(&[c, t, v], |k| {
        let (ct, vi) = (k / v, k % v);
        x.data()[(ct * g + gi) * v + vi]
    })
}

impl FeatureBundle {
    pub fn stream(&self, tag: BranchTag) -> &Tensor<f32> {
        match tag {
            BranchTag::Joint => &self.joint,
            BranchTag::Bone => &self.bone,
            BranchTag::JointMotion => &self.joint_motion,
            BranchTag::BoneMotion => &self.bone_motion,
        }
    }

    pub fn channels(&self) -> usize {
        self.joint.shape()[0]
    }

    pub fn frames(&self) -> usize {
        self.joint.shape()[1]
    }

    pub fn vertices(&self) -> usize {
        self.joint.shape()[3]
    }

    /// One graph of one stream, `[2C, T, V]`.
    pub fn graph_stream(&self, tag: BranchTag, graph: usize) -> Tensor<f32> {
        unstack_graph(self.stream(tag), graph)
    }

    /// Raw vertex coordinates `[C, T, V]` of one graph (the first half of the joint stream).
    pub fn coordinates(&self, graph: usize) -> Tensor<f32> {
        let j = self.graph_stream(BranchTag::Joint, graph);
        let s = j.shape();
        let half = s[0] / 2;
        Tensor::new(&[half, s[1], s[2]], j.data()[..half * s[1] * s[2]].to_vec()).expect("sized")
    }

    pub fn to_records(&self, meta: &SampleMeta) -> Vec<FeatureRecord> {
        BranchTag::ALL
            .into_iter()
            .map(|tag| FeatureRecord {
                tag,
                data: self.stream(tag).clone(),
                meta: meta.clone(),
            })
            .collect()
    }

    pub fn from_records(records: &[FeatureRecord]) -> Result<Self, FeatureError> {
        let find = |tag: BranchTag| {
            records
                .iter()
                .find(|r| r.tag == tag)
                .map(|r| r.data.clone())
                .ok_or_else(|| FeatureError::Inconsistent(format!("missing {} stream", tag.short_name())))
        };
        let b = Self {
            joint: find(BranchTag::Joint)?,
            bone: find(BranchTag::Bone)?,
            joint_motion: find(BranchTag::JointMotion)?,
            bone_motion: find(BranchTag::BoneMotion)?,
            graphs_per_sample: 0,
        };
        let shape = b.joint.shape().to_vec();
        if shape.len() != 4 || BranchTag::ALL.iter().any(|&t| b.stream(t).shape() != shape.as_slice()) {
            return Err(FeatureError::Inconsistent("stream shapes differ".into()));
        }
        Ok(Self {
            graphs_per_sample: shape[2],
            ..b
        })
    }
}

/// Four input streams of a single graph `[C, T, V]`.
pub fn graph_features(x: &Tensor<f32>, topo: &SkeletonTopology) -> Result<[Tensor<f32>; 4], FeatureError> {
    let bones = bone_vectors(x, topo)?;
    Ok([
        joint_branch(x, topo)?,
        bone_branch(x, topo)?,
        motion_branch(x),
        motion_branch(&bones),
    ])
}

/// Full preprocessing of one two-body sample.
pub fn build_features<R: Rng + ?Sized>(
    seq: &SkeletonSequence,
    topo: &SkeletonTopology,
    mode: GraphScaleMode,
    rng: &mut R,
    phase: Phase,
) -> Result<FeatureBundle, FeatureError> {
    let graphs = apply_graph_scale(seq, mode, rng, phase)?;
    let per_graph = graphs
        .iter()
        .map(|g| graph_features(g, topo))
        .collect::<Result<Vec<_>, _>>()?;
    let stream = |i: usize| stack_graphs(&per_graph.iter().map(|f| f[i].clone()).collect::<Vec<_>>());
    Ok(FeatureBundle {
        joint: stream(0),
        bone: stream(1),
        joint_motion: stream(2),
        bone_motion: stream(3),
        graphs_per_sample: graphs.len(),
    })
}
