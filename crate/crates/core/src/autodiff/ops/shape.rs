use std::ops::Range;

use crate::autodiff::tape::{Tape, Var};
use crate::autodiff::tensor::{Real, Tensor};
use crate::autodiff::TensorError;

/// (outer, axis extent, inner) decomposition around `axis`.
pub(crate) fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

impl<T: Real> Tape<T> {
    pub fn reshape(&self, a: Var, shape: &[usize]) -> Result<Var, TensorError> {
        self.check(a)?;
        let v = self.value(a);
        let in_shape = v.shape().to_vec();
        let out = (*v).clone().reshape(shape)?;
        self.record(&[a], out, move |g| vec![g.clone().reshape(&in_shape).unwrap()])
    }

    /// Concatenates along `axis`; all other extents must agree.
    pub fn concat(&self, parts: &[Var], axis: usize) -> Result<Var, TensorError> {
        let first = parts.first().ok_or(TensorError::Empty { op: "concat" })?;
        self.check(*first)?;
        let base = self.shape(*first);
        if axis >= base.len() {
            return Err(TensorError::InvalidAxis {
                op: "concat",
                axis,
                rank: base.len(),
            });
        }
        let mut extents = Vec::with_capacity(parts.len());
        for &p in parts {
            self.check(p)?;
            let s = self.shape(p);
            let compatible = s.len() == base.len()
                && s.iter()
                    .zip(&base)
                    .enumerate()
                    .all(|(ax, (x, y))| ax == axis || x == y);
            if !compatible {
                return Err(TensorError::ShapeMismatch {
                    op: "concat",
                    left: base,
                    right: s,
                });
            }
            extents.push(s[axis]);
        }
        let total: usize = extents.iter().sum();
        let (outer, _, inner) = split_axis(&base, axis);
        let mut data = Vec::with_capacity(outer * total * inner);
        let values: Vec<_> = parts.iter().map(|&p| self.value(p)).collect();
        for o in 0..outer {
            for (v, &e) in values.iter().zip(&extents) {
                data.extend_from_slice(&v.data()[o * e * inner..(o + 1) * e * inner]);
            }
        }
        let mut out_shape = base.clone();
        out_shape[axis] = total;
        let out = Tensor::new(&out_shape, data)?;
        self.record(parts, out, move |g| {
            let gd = g.data();
            let mut grads: Vec<Vec<T>> = extents
                .iter()
                .map(|&e| Vec::with_capacity(outer * e * inner))
                .collect();
            for o in 0..outer {
                let mut start = o * total * inner;
                for (gv, &e) in grads.iter_mut().zip(&extents) {
                    gv.extend_from_slice(&gd[start..start + e * inner]);
                    start += e * inner;
                }
            }
            grads
                .into_iter()
                .zip(&extents)
                .map(|(gv, &e)| {
                    let mut s = base.clone();
                    s[axis] = e;
                    Tensor::new(&s, gv).unwrap()
                })
                .collect()
        })
    }

    /// Selects `range` along `axis`.
    pub fn slice(&self, a: Var, axis: usize, range: Range<usize>) -> Result<Var, TensorError> {
        self.check(a)?;
        let v = self.value(a);
        let shape = v.shape().to_vec();
        if axis >= shape.len() {
            return Err(TensorError::InvalidAxis {
                op: "slice",
                axis,
                rank: shape.len(),
            });
        }
        if range.start > range.end || range.end > shape[axis] {
            return Err(TensorError::ShapeMismatch {
                op: "slice",
                left: shape,
                right: vec![range.start, range.end],
            });
        }
        let (outer, n, inner) = split_axis(&shape, axis);
        let len = range.end - range.start;
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * n + range.start) * inner;
            data.extend_from_slice(&v.data()[base..base + len * inner]);
        }
        let mut out_shape = shape.clone();
        out_shape[axis] = len;
        let out = Tensor::new(&out_shape, data)?;
        self.record(&[a], out, move |g| {
            let mut full = vec![T::zero(); outer * n * inner];
            for o in 0..outer {
                let base = (o * n + range.start) * inner;
                full[base..base + len * inner]
                    .copy_from_slice(&g.data()[o * len * inner..(o + 1) * len * inner]);
            }
            vec![Tensor::new(&shape, full).unwrap()]
        })
    }

    /// Reorders axes; `perm[i]` is the source axis of output axis `i`.
    pub fn permute(&self, a: Var, perm: &[usize]) -> Result<Var, TensorError> {
        self.check(a)?;
        let out = self.value(a).permute(perm)?;
        let mut inverse = vec![0; perm.len()];
        for (i, &p) in perm.iter().enumerate() {
            inverse[p] = i;
        }
        self.record(&[a], out, move |g| vec![g.permute(&inverse).unwrap()])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn concat_then_slice_roundtrip() {
        let tape = Tape::<f64>::new();
        let a = tape.constant(Tensor::from_fn(&[2, 2, 3], |i| i as f64));
        let b = tape.constant(Tensor::from_fn(&[2, 1, 3], |i| -(i as f64)));
        let c = tape.concat(&[a, b], 1).unwrap();
        assert_eq!(tape.shape(c), vec![2, 3, 3]);
        let back = tape.slice(c, 1, 0..2).unwrap();
        assert_eq!(*tape.value(back), *tape.value(a));
        let tail = tape.slice(c, 1, 2..3).unwrap();
        assert_eq!(*tape.value(tail), *tape.value(b));
    }

    #[test]
    fn concat_grad_splits() {
        let tape = Tape::<f64>::new();
        let a = tape.constant(Tensor::ones(&[2, 2]));
        let b = tape.constant(Tensor::ones(&[2, 1]));
        let c = tape.concat(&[a, b], 1).unwrap();
        let w = tape.constant(Tensor::from_fn(&[2, 3], |i| i as f64));
        let loss = tape.sum_all(tape.mul(c, w).unwrap()).unwrap();
        let g = tape.gradients(loss).unwrap();
        assert_eq!(g.get(a).unwrap().data(), &[0.0, 1.0, 3.0, 4.0]);
        assert_eq!(g.get(b).unwrap().data(), &[2.0, 5.0]);
    }

    #[test]
    fn concat_rejects_mismatch() {
        let tape = Tape::<f64>::new();
        let a = tape.constant(Tensor::ones(&[2, 2]));
        let b = tape.constant(Tensor::ones(&[3, 1]));
        let err = tape.concat(&[a, b], 1).unwrap_err();
        assert!(err.to_string().contains("[2, 2]") && err.to_string().contains("[3, 1]"));
    }
}
