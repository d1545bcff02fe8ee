use crate::autodiff::tape::{Tape, Var};
use crate::autodiff::tensor::{Real, Tensor};
use crate::autodiff::TensorError;

use super::shape::split_axis;

impl<T: Real> Tape<T> {
    pub fn sum_all(&self, a: Var) -> Result<Var, TensorError> {
        self.check(a)?;
        let v = self.value(a);
        let shape = v.shape().to_vec();
        let out = Tensor::scalar(v.sum());
        self.record(&[a], out, move |g| vec![Tensor::full(&shape, g.item())])
    }

    pub fn mean_all(&self, a: Var) -> Result<Var, TensorError> {
        let n = self.value(a).len();
        let s = self.sum_all(a)?;
        self.scale(s, T::one() / T::lit(n as f64))
    }

    /// Sums over `axis`, keeping it with extent 1.
    pub fn sum_axis(&self, a: Var, axis: usize) -> Result<Var, TensorError> {
        self.check(a)?;
        let v = self.value(a);
        let shape = v.shape().to_vec();
        if axis >= shape.len() {
            return Err(TensorError::InvalidAxis {
                op: "sum_axis",
                axis,
                rank: shape.len(),
            });
        }
        let (outer, n, inner) = split_axis(&shape, axis);
        let d = v.data();
        let mut out = vec![T::zero(); outer * inner];
        for o in 0..outer {
            for k in 0..n {
                let row = &d[(o * n + k) * inner..(o * n + k + 1) * inner];
                for (acc, &x) in out[o * inner..(o + 1) * inner].iter_mut().zip(row) {
                    *acc += x;
                }
            }
        }
        let mut out_shape = shape.clone();
        out_shape[axis] = 1;
        let out = Tensor::new(&out_shape, out)?;
        self.record(&[a], out, move |g| {
            let gd = g.data();
            let mut full = Vec::with_capacity(outer * n * inner);
            for o in 0..outer {
                for _ in 0..n {
                    full.extend_from_slice(&gd[o * inner..(o + 1) * inner]);
                }
            }
            vec![Tensor::new(&shape, full).unwrap()]
        })
    }

    /// Mean over `axis`, keeping it with extent 1.
    pub fn mean_axis(&self, a: Var, axis: usize) -> Result<Var, TensorError> {
        let n = *self.shape(a).get(axis).ok_or(TensorError::InvalidAxis {
            op: "mean_axis",
            axis,
            rank: self.shape(a).len(),
        })?;
        let s = self.sum_axis(a, axis)?;
        self.scale(s, T::one() / T::lit(n as f64))
    }

    /// Maximum over `axis`, keeping it with extent 1. Gradient goes to the first maximal entry.
    pub fn max_axis(&self, a: Var, axis: usize) -> Result<Var, TensorError> {
        self.check(a)?;
        let v = self.value(a);
        let shape = v.shape().to_vec();
        if axis >= shape.len() || shape[axis] == 0 {
            return Err(TensorError::InvalidAxis {
                op: "max_axis",
                axis,
                rank: shape.len(),
            });
        }
        let (outer, n, inner) = split_axis(&shape, axis);
        let d = v.data();
        let mut out = vec![T::neg_infinity(); outer * inner];
        let mut arg = vec![0usize; outer * inner];
        for o in 0..outer {
            for k in 0..n {
                for i in 0..inner {
                    let x = d[(o * n + k) * inner + i];
                    let slot = o * inner + i;
                    if x > out[slot] {
                        out[slot] = x;
                        arg[slot] = (o * n + k) * inner + i;
                    }
                }
            }
        }
        let mut out_shape = shape.clone();
        out_shape[axis] = 1;
        let out = Tensor::new(&out_shape, out)?;
        self.record(&[a], out, move |g| {
            let mut full = vec![T::zero(); outer * n * inner];
            for (slot, &src) in arg.iter().enumerate() {
                full[src] += g.data()[slot];
            }
            vec![Tensor::new(&shape, full).unwrap()]
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_is_sum_over_extent() {
        let tape = Tape::<f64>::new();
        let x = tape.constant(Tensor::from_fn(&[3, 5, 2], |i| (i as f64 * 0.37).sin()));
        for axis in 0..3 {
            let s = tape.value(tape.sum_axis(x, axis).unwrap());
            let m = tape.value(tape.mean_axis(x, axis).unwrap());
            let n = [3.0, 5.0, 2.0][axis];
            for (a, b) in s.data().iter().zip(m.data()) {
                assert!((a / n - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn max_axis_picks_and_routes() {
        let tape = Tape::<f64>::new();
        let x = tape.constant(Tensor::new(&[2, 3], vec![1.0, 5.0, 2.0, 7.0, 0.0, 7.0]).unwrap());
        let m = tape.max_axis(x, 1).unwrap();
        assert_eq!(tape.value(m).data(), &[5.0, 7.0]);
        let loss = tape.sum_all(m).unwrap();
        let g = tape.gradients(loss).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[0.0, 1.0, 0.0, 1.0, 0.0, 0.0]);
    }
}
