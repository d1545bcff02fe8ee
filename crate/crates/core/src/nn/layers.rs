use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::autodiff::{BufferId, NormStats, ParamId, ParamStore, Real, TemporalWindow, Tensor, TensorError, Var};

use super::Ctx;

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

fn kaiming<T: Real, R: Rng + ?Sized>(shape: &[usize], fan_out: usize, rng: &mut R) -> Tensor<T> {
    let normal = Normal::new(0.0, (2.0 / fan_out.max(1) as f64).sqrt()).expect("positive std");
    Tensor::from_fn(shape, |_| T::lit(normal.sample(rng)))
}

/// `K x 1` temporal convolution with bias; `K = 1` gives a pointwise channel map.
#[derive(Clone, Debug)]
pub struct Conv {
    pub weight: ParamId,
    pub bias: ParamId,
    pub window: TemporalWindow,
    pub cin: usize,
    pub cout: usize,
}

impl Conv {
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        rng: &mut R,
        name: &str,
        cin: usize,
        cout: usize,
        kernel: usize,
        stride: usize,
        dilation: usize,
    ) -> Self {
        let weight = store.add(format!("{name}.weight"), kaiming(&[cout, cin, kernel], cout * kernel, rng), true);
        let bias = store.add(format!("{name}.bias"), Tensor::zeros(&[cout]), false);
        Self {
            weight,
            bias,
            window: TemporalWindow::same(kernel, stride, dilation),
            cin,
            cout,
        }
    }

    pub fn pointwise<T: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        rng: &mut R,
        name: &str,
        cin: usize,
        cout: usize,
        stride: usize,
    ) -> Self {
        Self::new(store, rng, name, cin, cout, 1, stride, 1)
    }

    pub fn forward<T: Real>(&self, ctx: &Ctx<'_, T>, x: Var) -> Result<Var, TensorError> {
        ctx.tape
            .conv_t(x, ctx.param(self.weight), Some(ctx.param(self.bias)), self.window)
    }

    /// Multiply-accumulate count for an input of `t` frames and `v` vertices.
    pub fn macs(&self, t: usize, v: usize) -> u64 {
        (self.cin * self.cout * self.window.kernel * self.window.out_len(t) * v) as u64
    }
}

/// Batch normalisation over channel axis 1 with running statistics.
#[derive(Clone, Debug)]
pub struct BatchNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: BufferId,
    pub running_var: BufferId,
}

impl BatchNorm {
    pub fn new<T: Real>(store: &mut ParamStore<T>, name: &str, channels: usize) -> Self {
        Self::with_gamma(store, name, channels, T::one())
    }

    pub fn with_gamma<T: Real>(store: &mut ParamStore<T>, name: &str, channels: usize, gamma: T) -> Self {
        Self {
            gamma: store.add(format!("{name}.gamma"), Tensor::full(&[channels], gamma), false),
            beta: store.add(format!("{name}.beta"), Tensor::zeros(&[channels]), false),
            running_mean: store.add_buffer(format!("{name}.running_mean"), Tensor::zeros(&[channels])),
            running_var: store.add_buffer(format!("{name}.running_var"), Tensor::ones(&[channels])),
        }
    }

    pub fn forward<T: Real>(&self, ctx: &Ctx<'_, T>, x: Var) -> Result<Var, TensorError> {
        let (gamma, beta) = (ctx.param(self.gamma), ctx.param(self.beta));
        let eps = T::lit(BN_EPS);
        if ctx.training {
            let (y, stats) = ctx.tape.batch_norm(x, gamma, beta, NormStats::Batch, eps)?;
            if let Some(s) = stats {
                ctx.record_stats(self.running_mean, self.running_var, s);
            }
            Ok(y)
        } else {
            let stats = NormStats::Running {
                mean: ctx.store.buffer(self.running_mean),
                var: ctx.store.buffer(self.running_var),
            };
            Ok(ctx.tape.batch_norm(x, gamma, beta, stats, eps)?.0)
        }
    }
}

/// Fully connected layer on the last axis: `y = x W + b`, `W` is `[in, out]`.
#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl Linear {
    pub fn new<T: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        rng: &mut R,
        name: &str,
        fan_in: usize,
        fan_out: usize,
    ) -> Self {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let u = Uniform::new_inclusive(-bound, bound);
        let weight = store.add(
            format!("{name}.weight"),
            Tensor::from_fn(&[fan_in, fan_out], |_| T::lit(u.sample(rng))),
            true,
        );
        let bias = store.add(format!("{name}.bias"), Tensor::zeros(&[fan_out]), false);
        Self {
            weight,
            bias,
            fan_in,
            fan_out,
        }
    }

    pub fn forward<T: Real>(&self, ctx: &Ctx<'_, T>, x: Var) -> Result<Var, TensorError> {
        let y = ctx.tape.matmul_last(x, ctx.param(self.weight))?;
        ctx.tape.add(y, ctx.param(self.bias))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tape;
    use rand::SeedableRng;

    #[test]
    fn linear_10_to_5_has_55_params() {
        let mut store = ParamStore::<f32>::new();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        Linear::new(&mut store, &mut rng, "fc", 10, 5);
        assert_eq!(store.count(), 55);
    }

    #[test]
    fn batch_norm_eval_is_affine() {
        let mut store = ParamStore::<f64>::new();
        let bn = BatchNorm::new(&mut store, "bn", 2);
        store.get_mut(bn.gamma).value = Tensor::new(&[2], vec![2.0, 0.5]).unwrap();
        store.get_mut(bn.beta).value = Tensor::new(&[2], vec![1.0, -1.0]).unwrap();
        store.set_buffer(bn.running_mean, Tensor::new(&[2], vec![0.5, -2.0]).unwrap());
        store.set_buffer(bn.running_var, Tensor::new(&[2], vec![4.0, 0.25]).unwrap());
        let tape = Tape::inference();
        let ctx = Ctx::new(&tape, &store, false);
        let x = Tensor::from_fn(&[3, 2, 2, 1], |k| k as f64 - 4.0);
        let y = tape.value(bn.forward(&ctx, tape.constant(x.clone())).unwrap());
        let (g, b, m, v) = ([2.0, 0.5], [1.0, -1.0], [0.5, -2.0], [4.0, 0.25]);
        for bi in 0..3 {
            for c in 0..2 {
                for t in 0..2 {
                    let want = g[c] * (x.at(&[bi, c, t, 0]) - m[c]) / (v[c] + BN_EPS).sqrt() + b[c];
                    assert!((y.at(&[bi, c, t, 0]) - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn training_updates_running_stats() {
        let mut store = ParamStore::<f64>::new();
        let bn = BatchNorm::new(&mut store, "bn", 1);
        let tape = Tape::new();
        let ctx = Ctx::new(&tape, &store, true);
        let x = Tensor::new(&[4, 1, 1, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        bn.forward(&ctx, tape.constant(x)).unwrap();
        let updates = ctx.into_stat_updates();
        super::super::apply_stat_updates(&mut store, updates);
        assert!((store.buffer(bn.running_mean).item() - 0.25).abs() < 1e-12);
        // unbiased variance of 1..4 is 5/3
        assert!((store.buffer(bn.running_var).item() - (0.9 + 0.1 * 5.0 / 3.0)).abs() < 1e-12);
    }
}
