use rand::Rng;

use crate::autodiff::{ParamStore, Real, Tensor, Var};

use super::layers::{BatchNorm, Conv};
use super::{Ctx, NnError};

/// Membership matrix `[G, V]` (1 where vertex `v` belongs to group `g`) for a
/// vertex-to-part assignment with `groups` parts.
pub fn part_membership<T: Real>(vertex_parts: &[usize], groups: usize) -> Result<Tensor<T>, NnError> {
    let v = vertex_parts.len();
    let mut m = Tensor::zeros(&[groups, v]);
    for (vi, &g) in vertex_parts.iter().enumerate() {
        if g >= groups {
            return Err(NnError::PartMapIncomplete(vi));
        }
        m.set(&[g, vi], T::one());
    }
    for g in 0..groups {
        if (0..v).all(|vi| vertex_parts[vi] != g) {
            return Err(NnError::PartMapIncomplete(g));
        }
    }
    Ok(m)
}

/// Spatio-temporal part attention.
///
/// The input `[B, C, T, V]` is pooled to per-frame descriptors `[B, C, T]`
/// (mean over vertices) and per-part descriptors `[B, C, G]` (mean over frames,
/// then over each part's vertices). Both pass through a shared reduction
/// `C -> C/4` with batch norm and ReLU, then separate expansions back to `C`
/// with a sigmoid. The frame score times the part score of each vertex's part
/// rescales the input.
#[derive(Clone, Debug)]
pub struct StPartAtt {
    pub reduce: Conv,
    pub bn: BatchNorm,
    pub frame_fc: Conv,
    pub part_fc: Conv,
    /// `[V, G]`, columns average the vertices of each part.
    pool: Tensor<f64>,
    /// `[G, V]` 0/1 membership.
    expand: Tensor<f64>,
    pub channels: usize,
}

impl StPartAtt {
    pub fn new<T: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        rng: &mut R,
        name: &str,
        channels: usize,
        vertex_parts: &[usize],
    ) -> Result<Self, NnError> {
        let groups = vertex_parts.iter().copied().max().map_or(0, |g| g + 1);
        let expand: Tensor<f64> = part_membership(vertex_parts, groups)?;
        let v = vertex_parts.len();
        let pool = Tensor::from_fn(&[v, groups], |k| {
            let (vi, g) = (k / groups, k % groups);
            let size = vertex_parts.iter().filter(|&&p| p == g).count();
            expand.at(&[g, vi]) / size as f64
        });
        let r = (channels / 4).max(1);
        Ok(Self {
            reduce: Conv::pointwise(store, rng, &format!("{name}.reduce"), channels, r, 1),
            bn: BatchNorm::new(store, &format!("{name}.bn"), r),
            frame_fc: Conv::pointwise(store, rng, &format!("{name}.frame_fc"), r, channels, 1),
            part_fc: Conv::pointwise(store, rng, &format!("{name}.part_fc"), r, channels, 1),
            pool,
            expand,
            channels,
        })
    }

    pub fn groups(&self) -> usize {
        self.expand.shape()[0]
    }

    pub fn vertices(&self) -> usize {
        self.expand.shape()[1]
    }

    /// Attention map `[B, C, T, V]` for input `x`.
    pub fn attention<T: Real>(&self, ctx: &Ctx<'_, T>, x: Var) -> Result<Var, NnError> {
        let tape = ctx.tape;
        let s = tape.shape(x);
        let (b, c, t, v) = (s[0], s[1], s[2], s[3]);
        let g = self.groups();
        if v != self.vertices() || c != self.channels {
            return Err(NnError::ConfigMismatch(format!(
                "attention over {} channels and {} vertices got {s:?}",
                self.channels,
                self.vertices()
            )));
        }
        let frames = tape.reshape(tape.mean_axis(x, 3)?, &[b, c, t])?;
        let joints = tape.reshape(tape.mean_axis(x, 2)?, &[b, c, v])?;
        let parts = tape.matmul_last(joints, tape.constant(self.pool.cast()))?;
        let both = tape.reshape(tape.concat(&[frames, parts], 2)?, &[b, c, t + g, 1])?;
        let z = tape.relu(self.bn.forward(ctx, self.reduce.forward(ctx, both)?)?)?;
        let zf = tape.slice(z, 2, 0..t)?;
        let zp = tape.slice(z, 2, t..t + g)?;
        let frame_score = tape.sigmoid(self.frame_fc.forward(ctx, zf)?)?;
        let part_score = tape.sigmoid(self.part_fc.forward(ctx, zp)?)?;
        let part_score = tape.reshape(part_score, &[b, c, g])?;
        let joint_score = tape.matmul_last(part_score, tape.constant(self.expand.cast()))?;
        let joint_score = tape.reshape(joint_score, &[b, c, 1, v])?;
        Ok(tape.mul(frame_score, joint_score)?)
    }

    pub fn forward<T: Real>(&self, ctx: &Ctx<'_, T>, x: Var) -> Result<Var, NnError> {
        let att = self.attention(ctx, x)?;
        Ok(ctx.tape.mul(x, att)?)
    }

    pub fn macs(&self, t: usize) -> u64 {
        let (c, g, v) = (self.channels, self.groups(), self.vertices());
        let r = self.reduce.cout;
        (c * v * g + c * r * (t + g) + r * c * t + r * c * g + c * g * v) as u64
    }
}
