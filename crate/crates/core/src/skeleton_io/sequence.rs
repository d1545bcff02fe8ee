use crate::autodiff::Tensor;

use super::IoError;

/// Sample metadata carried alongside the coordinate tensor.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SampleMeta {
    pub sample_id: String,
    pub label: u32,
    pub subject_id: u32,
    pub camera_id: u32,
    pub setup_id: u32,
}

/// Multi-body joint coordinates, `[C, T, M, N]` with N fastest.
///
/// Absent bodies are explicit all-zero slices.
#[derive(Clone, Debug, PartialEq)]
pub struct SkeletonSequence {
    pub data: Tensor<f32>,
    pub meta: SampleMeta,
}

impl SkeletonSequence {
    pub fn new(data: Tensor<f32>, meta: SampleMeta) -> Result<Self, IoError> {
        let seq = Self { data, meta };
        seq.validate()?;
        Ok(seq)
    }

    pub fn zeros(channels: usize, frames: usize, bodies: usize, joints: usize, meta: SampleMeta) -> Self {
        Self {
            data: Tensor::zeros(&[channels, frames, bodies, joints]),
            meta,
        }
    }

    pub fn validate(&self) -> Result<(), IoError> {
        let s = self.data.shape();
        if s.len() != 4 {
            return Err(IoError::InvalidSequence(format!("rank {} tensor", s.len())));
        }
        let (c, t, m, n) = (s[0], s[1], s[2], s[3]);
        if !(2..=3).contains(&c) || !(1..=2).contains(&m) || !(n == 15 || n == 25) || t == 0 {
            return Err(IoError::InvalidSequence(format!("shape {s:?}")));
        }
        if !self.data.all_finite() {
            return Err(IoError::InvalidSequence("non-finite coordinate".into()));
        }
        Ok(())
    }

    pub fn channels(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn frames(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn bodies(&self) -> usize {
        self.data.shape()[2]
    }

    pub fn joints(&self) -> usize {
        self.data.shape()[3]
    }

    pub fn label(&self) -> usize {
        self.meta.label as usize
    }

    pub fn get(&self, c: usize, t: usize, m: usize, n: usize) -> f32 {
        self.data.at(&[c, t, m, n])
    }

    pub fn set(&mut self, c: usize, t: usize, m: usize, n: usize, value: f32) {
        self.data.set(&[c, t, m, n], value);
    }

    /// True when body slot `m` is zero in every frame.
    pub fn body_is_empty(&self, m: usize) -> bool {
        let (c, t, _, n) = (self.channels(), self.frames(), self.bodies(), self.joints());
        (0..c).all(|ci| (0..t).all(|ti| (0..n).all(|ni| self.get(ci, ti, m, ni) == 0.0)))
    }
}
