use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamStore, Real, Var};

use super::attention::StPartAtt;
use super::layers::{BatchNorm, Conv};
use super::sgc::SgcLayer;
use super::tcn::MsTcn;
use super::{Ctx, NnError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemporalKind {
    /// Single `3 x 1` convolution with batch norm.
    Standard,
    MultiScale,
}

#[derive(Clone, Debug)]
enum Temporal {
    Standard(Conv, BatchNorm),
    MultiScale(MsTcn),
}

/// `relu(att(tcn(relu(bn(sgc(x))))) + residual(x))`.
#[derive(Clone, Debug)]
pub struct Block {
    pub sgc: SgcLayer,
    bn: BatchNorm,
    temporal: Temporal,
    pub attention: Option<StPartAtt>,
    residual: Option<(Conv, BatchNorm)>,
    pub cin: usize,
    pub cout: usize,
    pub stride: usize,
}

pub struct BlockSpec<'a> {
    pub cin: usize,
    pub cout: usize,
    pub stride: usize,
    pub temporal: TemporalKind,
    pub subsets: usize,
    pub vertex_parts: &'a [usize],
    pub edge_mask: bool,
    pub attention: bool,
}

impl Block {
    pub fn new<T: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        rng: &mut R,
        name: &str,
        spec: &BlockSpec<'_>,
    ) -> Result<Self, NnError> {
        let v = spec.vertex_parts.len();
        let (cin, cout, stride) = (spec.cin, spec.cout, spec.stride);
        let sgc = SgcLayer::new(store, rng, &format!("{name}.sgc"), cin, cout, spec.subsets, v, spec.edge_mask);
        let bn = BatchNorm::new(store, &format!("{name}.sgc_bn"), cout);
        let temporal = match spec.temporal {
            TemporalKind::Standard => Temporal::Standard(
                Conv::new(store, rng, &format!("{name}.tcn"), cout, cout, 3, stride, 1),
                BatchNorm::new(store, &format!("{name}.tcn_bn"), cout),
            ),
            TemporalKind::MultiScale => Temporal::MultiScale(MsTcn::new(store, rng, &format!("{name}.tcn"), cout, stride)?),
        };
        let attention = if spec.attention {
            Some(StPartAtt::new(store, rng, &format!("{name}.att"), cout, spec.vertex_parts)?)
        } else {
            None
        };
        let residual = (cin != cout || stride != 1).then(|| {
            (
                Conv::pointwise(store, rng, &format!("{name}.residual"), cin, cout, stride),
                BatchNorm::new(store, &format!("{name}.residual_bn"), cout),
            )
        });
        Ok(Self {
            sgc,
            bn,
            temporal,
            attention,
            residual,
            cin,
            cout,
            stride,
        })
    }

    pub fn forward<T: Real>(&self, ctx: &Ctx<'_, T>, x: Var, adj: Var) -> Result<Var, NnError> {
        let tape = ctx.tape;
        let y = tape.relu(self.bn.forward(ctx, self.sgc.forward(ctx, x, adj)?)?)?;
        let y = match &self.temporal {
            Temporal::Standard(conv, bn) => bn.forward(ctx, conv.forward(ctx, y)?)?,
            Temporal::MultiScale(m) => m.forward(ctx, y)?,
        };
        let y = match &self.attention {
            Some(att) => att.forward(ctx, y)?,
            None => y,
        };
        let res = match &self.residual {
            Some((conv, bn)) => bn.forward(ctx, conv.forward(ctx, x)?)?,
            None => x,
        };
        Ok(tape.relu(tape.add(y, res)?)?)
    }

    /// Multiply-accumulates for an input of `t` frames.
    pub fn macs(&self, t: usize) -> u64 {
        let v = self.sgc.vertices;
        let t_out = t.div_ceil(self.stride);
        let temporal = match &self.temporal {
            Temporal::Standard(conv, _) => conv.macs(t, v),
            Temporal::MultiScale(m) => m.macs(t, v),
        };
        self.sgc.macs(t)
            + temporal
            + self.attention.as_ref().map_or(0, |a| a.macs(t_out))
            + self.residual.as_ref().map_or(0, |(c, _)| c.macs(t, v))
    }
}
