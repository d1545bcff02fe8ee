use std::rc::Rc;

use crate::autodiff::tape::{Tape, Var};
use crate::autodiff::tensor::{strides_of, Real, Tensor};
use crate::autodiff::TensorError;

/// Numpy-style broadcast of two shapes, aligned on trailing axes.
pub(crate) struct Broadcast {
    pub out: Vec<usize>,
    a_strides: Vec<usize>,
    b_strides: Vec<usize>,
}

impl Broadcast {
    pub fn new(a: &[usize], b: &[usize]) -> Option<Self> {
        let rank = a.len().max(b.len());
        let pad = |s: &[usize]| {
            let mut v = vec![1; rank - s.len()];
            v.extend_from_slice(s);
            v
        };
        let (a, b) = (pad(a), pad(b));
        let mut out = Vec::with_capacity(rank);
        for (&x, &y) in a.iter().zip(&b) {
            out.push(match (x, y) {
                _ if x == y => x,
                (1, _) => y,
                (_, 1) => x,
                _ => return None,
            });
        }
        let masked = |s: &[usize]| {
            strides_of(s)
                .into_iter()
                .zip(s)
                .map(|(st, &e)| if e == 1 { 0 } else { st })
                .collect()
        };
        Some(Self {
            a_strides: masked(&a),
            b_strides: masked(&b),
            out,
        })
    }

    /// Calls `f(out_index, a_offset, b_offset)` for every output element in order.
    pub fn for_each(&self, mut f: impl FnMut(usize, usize, usize)) {
        let rank = self.out.len();
        let n: usize = self.out.iter().product();
        let mut idx = vec![0usize; rank];
        let (mut ao, mut bo) = (0usize, 0usize);
        for k in 0..n {
            f(k, ao, bo);
            let mut ax = rank;
            while ax > 0 {
                ax -= 1;
                idx[ax] += 1;
                ao += self.a_strides[ax];
                bo += self.b_strides[ax];
                if idx[ax] < self.out[ax] {
                    break;
                }
                ao -= self.a_strides[ax] * self.out[ax];
                bo -= self.b_strides[ax] * self.out[ax];
                idx[ax] = 0;
            }
        }
    }
}

#[derive(Clone, Copy)]
enum Binary {
    Add,
    Sub,
    Mul,
}

impl<T: Real> Tape<T> {
    /// Elementwise sum with broadcasting.
    pub fn add(&self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.binary(a, b, Binary::Add)
    }

    pub fn sub(&self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.binary(a, b, Binary::Sub)
    }

    /// Elementwise product with broadcasting.
    pub fn mul(&self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.binary(a, b, Binary::Mul)
    }

    fn binary(&self, a: Var, b: Var, op: Binary) -> Result<Var, TensorError> {
        self.check(a)?;
        self.check(b)?;
        let (av, bv) = (self.value(a), self.value(b));
        let name = match op {
            Binary::Add => "add",
            Binary::Sub => "sub",
            Binary::Mul => "mul",
        };
        let bc = Broadcast::new(av.shape(), bv.shape()).ok_or_else(|| TensorError::ShapeMismatch {
            op: name,
            left: av.shape().to_vec(),
            right: bv.shape().to_vec(),
        })?;
        let (ad, bd) = (av.data(), bv.data());
        let mut out = vec![T::zero(); bc.out.iter().product()];
        if av.shape() == bv.shape() {
            for (k, o) in out.iter_mut().enumerate() {
                *o = apply(op, ad[k], bd[k]);
            }
        } else {
            bc.for_each(|k, i, j| out[k] = apply(op, ad[i], bd[j]));
        }
        let out = Tensor::new(&bc.out, out)?;
        let (a_shape, b_shape) = (av.shape().to_vec(), bv.shape().to_vec());
        let (av, bv) = (Rc::clone(&av), Rc::clone(&bv));
        self.record(&[a, b], out, move |g| {
            let gd = g.data();
            let mut ga = vec![T::zero(); av.len()];
            let mut gb = vec![T::zero(); bv.len()];
            let (ad, bd) = (av.data(), bv.data());
            bc.for_each(|k, i, j| match op {
                Binary::Add => {
                    ga[i] += gd[k];
                    gb[j] += gd[k];
                }
                Binary::Sub => {
                    ga[i] += gd[k];
                    gb[j] -= gd[k];
                }
                Binary::Mul => {
                    ga[i] += gd[k] * bd[j];
                    gb[j] += gd[k] * ad[i];
                }
            });
            vec![
                Tensor::new(&a_shape, ga).unwrap(),
                Tensor::new(&b_shape, gb).unwrap(),
            ]
        })
    }

    pub fn scale(&self, a: Var, c: T) -> Result<Var, TensorError> {
        self.check(a)?;
        let out = self.value(a).scale(c);
        self.record(&[a], out, move |g| vec![g.scale(c)])
    }

    pub fn relu(&self, a: Var) -> Result<Var, TensorError> {
        self.check(a)?;
        let out = self.value(a).map(|x| if x > T::zero() { x } else { T::zero() });
        let mask = Rc::new(out.clone());
        self.record(&[a], out, move |g| {
            vec![g
                .zip_map(&mask, |g, y| if y > T::zero() { g } else { T::zero() })
                .unwrap()]
        })
    }

    pub fn sigmoid(&self, a: Var) -> Result<Var, TensorError> {
        self.check(a)?;
        let out = self.value(a).map(sigmoid);
        let y = Rc::new(out.clone());
        self.record(&[a], out, move |g| {
            vec![g.zip_map(&y, |g, s| g * s * (T::one() - s)).unwrap()]
        })
    }
}

fn apply<T: Real>(op: Binary, a: T, b: T) -> T {
    match op {
        Binary::Add => a + b,
        Binary::Sub => a - b,
        Binary::Mul => a * b,
    }
}

pub(crate) fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}
