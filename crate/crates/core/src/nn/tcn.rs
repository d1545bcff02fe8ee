use rand::Rng;

use crate::autodiff::{ParamStore, Real, TemporalWindow, Var};

use super::layers::{BatchNorm, Conv};
use super::{Ctx, NnError};

#[derive(Clone, Debug)]
enum BranchTail {
    /// `3 x 1` convolution with the given dilation, then batch norm.
    Conv(Conv, BatchNorm),
    /// `3 x 1` max pooling, then batch norm.
    Pool(TemporalWindow, BatchNorm),
    /// Strided bottleneck only.
    None,
}

#[derive(Clone, Debug)]
struct Branch {
    bottleneck: Conv,
    bn: BatchNorm,
    tail: BranchTail,
}

/// Multi-scale temporal convolution: four parallel branches of width `C/4`
/// (dilation 1, dilation 2, max pooling, pointwise) concatenated back to `C`
/// channels, with an identity shortcut when the stride is 1.
#[derive(Clone, Debug)]
pub struct MsTcn {
    branches: Vec<Branch>,
    pub channels: usize,
    pub stride: usize,
}

impl MsTcn {
    pub fn new<T: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        rng: &mut R,
        name: &str,
        channels: usize,
        stride: usize,
    ) -> Result<Self, NnError> {
        if !channels.is_multiple_of(4) || channels == 0 {
            return Err(NnError::ConfigMismatch(format!(
                "multi-scale TCN needs channels divisible by 4, got {channels}"
            )));
        }
        let width = channels / 4;
        let branches = (0..4)
            .map(|i| {
                let n = format!("{name}.branch{i}");
                let b_stride = if i == 3 { stride } else { 1 };
                let bottleneck = Conv::pointwise(store, rng, &format!("{n}.bottleneck"), channels, width, b_stride);
                let bn = BatchNorm::new(store, &format!("{n}.bn0"), width);
                let tail = match i {
                    0 | 1 => BranchTail::Conv(
                        Conv::new(store, rng, &format!("{n}.conv"), width, width, 3, stride, i + 1),
                        BatchNorm::new(store, &format!("{n}.bn1"), width),
                    ),
                    2 => BranchTail::Pool(
                        TemporalWindow::same(3, stride, 1),
                        BatchNorm::new(store, &format!("{n}.bn1"), width),
                    ),
                    _ => BranchTail::None,
                };
                Branch { bottleneck, bn, tail }
            })
            .collect();
        Ok(Self {
            branches,
            channels,
            stride,
        })
    }

    pub fn forward<T: Real>(&self, ctx: &Ctx<'_, T>, x: Var) -> Result<Var, NnError> {
        let tape = ctx.tape;
        let mut outs = Vec::with_capacity(4);
        for b in &self.branches {
            let y = b.bn.forward(ctx, b.bottleneck.forward(ctx, x)?)?;
            let y = match &b.tail {
                BranchTail::Conv(conv, bn) => bn.forward(ctx, conv.forward(ctx, tape.relu(y)?)?)?,
                BranchTail::Pool(window, bn) => bn.forward(ctx, tape.max_pool_t(tape.relu(y)?, *window)?)?,
                BranchTail::None => y,
            };
            outs.push(y);
        }
        let y = tape.concat(&outs, 1)?;
        Ok(if self.stride == 1 { tape.add(y, x)? } else { y })
    }

    pub fn macs(&self, t: usize, v: usize) -> u64 {
        self.branches
            .iter()
            .map(|b| {
                let tb = b.bottleneck.window.out_len(t);
                b.bottleneck.macs(t, v)
                    + match &b.tail {
                        BranchTail::Conv(conv, _) => conv.macs(tb, v),
                        _ => 0,
                    }
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{grad_check, GradCheckConfig, Tape, Tensor};
    use rand::SeedableRng;

    fn build(stride: usize) -> (ParamStore<f64>, MsTcn) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut store = ParamStore::new();
        let m = MsTcn::new(&mut store, &mut rng, "tcn", 8, stride).unwrap();
        (store, m)
    }

    fn out_shape(stride: usize, t: usize) -> Vec<usize> {
        let (store, m) = build(stride);
        let tape = Tape::inference();
        let ctx = Ctx::new(&tape, &store, false);
        let x = tape.constant(Tensor::zeros(&[2, 8, t, 3]));
        tape.shape(m.forward(&ctx, x).unwrap())
    }

    #[test]
    fn stride_shapes() {
        assert_eq!(out_shape(1, 7), vec![2, 8, 7, 3]);
        assert_eq!(out_shape(2, 8), vec![2, 8, 4, 3]);
        assert_eq!(out_shape(2, 7), vec![2, 8, 4, 3]);
    }

    #[test]
    fn rejects_indivisible_width() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let mut store = ParamStore::<f32>::new();
        assert!(MsTcn::new(&mut store, &mut rng, "t", 6, 1).is_err());
    }

    #[test]
    fn constant_in_time_stays_constant() {
        // pooling and the pointwise branch preserve constancy exactly; zero-padding
        // makes the dilated convs differ only near the boundary, so check the interior.
        let (store, m) = build(1);
        let tape = Tape::inference();
        let ctx = Ctx::new(&tape, &store, false);
        let x = Tensor::from_fn(&[1, 8, 9, 2], |k| ((k / 18) % 8) as f64 * 0.3 - 1.0 + (k % 2) as f64);
        let y = tape.value(m.forward(&ctx, tape.constant(x)).unwrap());
        for c in 0..8 {
            for v in 0..2 {
                let mid = y.at(&[0, c, 4, v]);
                for t in 2..7 {
                    assert!((y.at(&[0, c, t, v]) - mid).abs() < 1e-12);
                }
                if (4..6).contains(&c) {
                    // pooling branch is constant everywhere
                    for t in 0..9 {
                        assert!((y.at(&[0, c, t, v]) - mid).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        for stride in [1, 2] {
            let (mut store, m) = build(stride);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
            let x = Tensor::from_fn(&[2, 8, 5, 2], |_| rng.gen_range(-1.0..1.0));
            let target = Tensor::from_fn(&[2, 8, 5usize.div_ceil(stride), 2], |_| rng.gen_range(-1.0..1.0));
            let report = grad_check(
                |tape, store| {
                    let ctx = Ctx::new(tape, store, true);
                    let y = m.forward(&ctx, tape.constant(x.clone())).map_err(|e| match e {
                        NnError::Tensor(t) => t,
                        other => panic!("{other}"),
                    })?;
                    let p = tape.mul(y, tape.constant(target.clone()))?;
                    tape.sum_all(p)
                },
                &mut store,
                GradCheckConfig::default(),
            )
            .unwrap();
            assert!(report.passed(), "stride {stride}: {:?}", report.failures().collect::<Vec<_>>());
        }
    }
}
