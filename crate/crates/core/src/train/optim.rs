use std::f64::consts::PI;

use crate::autodiff::{ParamStore, Real, Tensor};

use super::{LrSchedule, TrainConfig};

/// SGD with Nesterov momentum and L2 weight decay folded into the gradient.
///
/// Per step, for every parameter: `g = grad + wd * w` (decaying parameters only),
/// `buf = mu * buf + g`, `w -= lr * (g + mu * buf)`.
#[derive(Clone, Debug)]
pub struct Sgd<T> {
    pub momentum: f64,
    pub weight_decay: f64,
    buffers: Vec<Tensor<T>>,
}

impl<T: Real> Sgd<T> {
    pub fn new(momentum: f64, weight_decay: f64) -> Self {
        Self {
            momentum,
            weight_decay,
            buffers: Vec::new(),
        }
    }

    pub fn step(&mut self, store: &mut ParamStore<T>, lr: f64) {
        if self.buffers.is_empty() {
            self.buffers = store.params().iter().map(|p| Tensor::zeros(p.value.shape())).collect();
        }
        let (mu, lr) = (T::lit(self.momentum), T::lit(lr));
        for (p, buf) in store.params_mut().iter_mut().zip(&mut self.buffers) {
            let wd = T::lit(if p.decay { self.weight_decay } else { 0.0 });
            let g = p.grad.data();
            let b = buf.data_mut();
            let w = p.value.data_mut();
            for i in 0..w.len() {
                let gi = g[i] + wd * w[i];
                b[i] = mu * b[i] + gi;
                w[i] -= lr * (gi + mu * b[i]);
            }
        }
    }
}

/// Learning rate for step `step` (0-based within the epoch) of epoch `epoch`.
///
/// Linear warmup `base * (s + 1) / warmup_steps` over the warmup epochs, where `s`
/// is the global step, so the last warmup step runs at exactly `base`. Afterwards
/// either cosine decay to zero or step decay.
pub fn lr_at(epoch: usize, step: usize, steps_per_epoch: usize, config: &TrainConfig) -> f64 {
    let spe = steps_per_epoch.max(1);
    let s = epoch * spe + step;
    let warmup = config.warmup_epochs * spe;
    let base = config.base_lr;
    if s < warmup {
        return base * (s + 1) as f64 / warmup as f64;
    }
    match &config.schedule {
        LrSchedule::Cosine => {
            let total = config.epochs * spe;
            let p = (s - warmup) as f64 / (total - warmup) as f64;
            base * 0.5 * (1.0 + (PI * p).cos())
        }
        LrSchedule::Step { milestones, gamma } => {
            let passed = milestones.iter().filter(|&&m| epoch >= m).count();
            base * gamma.powi(passed as i32)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store(w: &[f64]) -> ParamStore<f64> {
        let mut s = ParamStore::new();
        s.add("w", Tensor::new(&[w.len()], w.to_vec()).unwrap(), true);
        s
    }

    fn w(s: &ParamStore<f64>) -> Vec<f64> {
        s.params()[0].value.data().to_vec()
    }

    #[test]
    fn plain_step_on_quadratic() {
        let mut s = store(&[1.0, -2.0]);
        s.params_mut()[0].grad = s.params()[0].value.clone();
        let mut opt = Sgd::new(0.0, 0.0);
        opt.step(&mut s, 0.1);
        assert_eq!(w(&s), vec![0.9, -1.8]);
    }

    #[test]
    fn nesterov_recursion_two_steps() {
        // constant g = 1, mu = 0.9, lr = 0.1:
        // step 1: buf = 1,    update = 1 + 0.9 * 1    = 1.9
        // step 2: buf = 1.9,  update = 1 + 0.9 * 1.9  = 2.71
        let mut s = store(&[0.0]);
        let mut opt = Sgd::new(0.9, 0.0);
        for _ in 0..2 {
            s.params_mut()[0].grad = Tensor::new(&[1], vec![1.0]).unwrap();
            opt.step(&mut s, 0.1);
        }
        assert!((w(&s)[0] + 0.1 * (1.9 + 2.71)).abs() < 1e-12);
    }

    #[test]
    fn weight_decay_alone_shrinks() {
        let mut s = store(&[2.0]);
        let mut opt = Sgd::new(0.0, 0.5);
        opt.step(&mut s, 0.1);
        assert!((w(&s)[0] - (2.0 - 0.1 * 0.5 * 2.0)).abs() < 1e-12);
    }

    #[test]
    fn no_decay_params_ignore_weight_decay() {
        let mut s = ParamStore::<f64>::new();
        s.add("b", Tensor::new(&[1], vec![3.0]).unwrap(), false);
        Sgd::new(0.9, 0.5).step(&mut s, 0.1);
        assert_eq!(s.params()[0].value.data(), &[3.0]);
    }

    #[test]
    fn schedule_landmarks() {
        let c = TrainConfig::default();
        let spe = 10;
        assert!((lr_at(4, spe - 1, spe, &c) - 0.1).abs() < 1e-15);
        assert!((lr_at(35, 0, spe, &c) - 0.05).abs() < 1e-12);
        let last = lr_at(c.epochs - 1, spe - 1, spe, &c);
        assert!(last > 0.0 && last < 1e-5);
        assert!((lr_at(0, 0, spe, &c) - 0.1 / 50.0).abs() < 1e-15);
    }

    #[test]
    fn schedule_continuous_at_warmup_boundary() {
        let c = TrainConfig::default();
        for spe in [1, 7, 100] {
            let before = lr_at(4, spe - 1, spe, &c);
            let after = lr_at(5, 0, spe, &c);
            assert!((before - after).abs() < 1e-9);
        }
    }

    #[test]
    fn step_schedule() {
        let c = TrainConfig {
            schedule: LrSchedule::Step {
                milestones: vec![30, 50],
                gamma: 0.1,
            },
            ..TrainConfig::default()
        };
        assert!((lr_at(10, 0, 5, &c) - 0.1).abs() < 1e-15);
        assert!((lr_at(40, 0, 5, &c) - 0.01).abs() < 1e-15);
        assert!((lr_at(60, 0, 5, &c) - 0.001).abs() < 1e-15);
    }
}
