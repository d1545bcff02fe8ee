use crate::autodiff::tape::{Tape, Var};
use crate::autodiff::tensor::{Real, Tensor};
use crate::autodiff::TensorError;

/// `out[r, :] += sum_k x[r, k] * m[k, :]` over `rows` rows.
fn gemm_acc<T: Real>(x: &[T], m: &[T], out: &mut [T], rows: usize, k: usize, n: usize) {
    for r in 0..rows {
        let orow = &mut out[r * n..(r + 1) * n];
        for kk in 0..k {
            let a = x[r * k + kk];
            if a == T::zero() {
                continue;
            }
            for (o, &b) in orow.iter_mut().zip(&m[kk * n..(kk + 1) * n]) {
                *o += a * b;
            }
        }
    }
}

impl<T: Real> Tape<T> {
    /// Matrix product of `[m, k]` and `[k, n]`.
    pub fn matmul(&self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.check(a)?;
        self.check(b)?;
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                left: sa,
                right: sb,
            });
        }
        self.matmul_last(a, b)
    }

    /// Contracts the last axis of `x` (`[..., k]`) with matrix `m` (`[k, n]`).
    pub fn matmul_last(&self, x: Var, m: Var) -> Result<Var, TensorError> {
        self.check(x)?;
        self.check(m)?;
        let (xv, mv) = (self.value(x), self.value(m));
        let (sx, sm) = (xv.shape().to_vec(), mv.shape().to_vec());
        if sx.is_empty() || sm.len() != 2 || sx[sx.len() - 1] != sm[0] {
            return Err(TensorError::ShapeMismatch {
                op: "matmul_last",
                left: sx,
                right: sm,
            });
        }
        let (k, n) = (sm[0], sm[1]);
        let rows = xv.len() / k.max(1);
        let mut out = vec![T::zero(); rows * n];
        gemm_acc(xv.data(), mv.data(), &mut out, rows, k, n);
        let mut out_shape = sx.clone();
        *out_shape.last_mut().unwrap() = n;
        let out = Tensor::new(&out_shape, out)?;
        self.record(&[x, m], out, move |g| {
            let gd = g.data();
            let (xd, md) = (xv.data(), mv.data());
            let mut gx = vec![T::zero(); rows * k];
            for r in 0..rows {
                let grow = &gd[r * n..(r + 1) * n];
                for kk in 0..k {
                    let mrow = &md[kk * n..(kk + 1) * n];
                    gx[r * k + kk] = grow.iter().zip(mrow).map(|(&a, &b)| a * b).sum();
                }
            }
            let mut gm = vec![T::zero(); k * n];
            for r in 0..rows {
                let grow = &gd[r * n..(r + 1) * n];
                for kk in 0..k {
                    let a = xd[r * k + kk];
                    for (o, &b) in gm[kk * n..(kk + 1) * n].iter_mut().zip(grow) {
                        *o += a * b;
                    }
                }
            }
            vec![
                Tensor::new(&sx, gx).unwrap(),
                Tensor::new(&sm, gm).unwrap(),
            ]
        })
    }

    /// Neighbourhood aggregation over the joint axis for a stack of adjacency matrices.
    ///
    /// `x` is `[B, C, T, V]`; `adj` is `[K, V, V]` (shared) or `[B, K, V, V]` (per sample).
    /// Output is `[B, K*C, T, V]` with `out[b, k*C + c, t, i] = sum_j adj[(b,) k, i, j] * x[b, c, t, j]`.
    pub fn graph_aggregate(&self, x: Var, adj: Var) -> Result<Var, TensorError> {
        self.check(x)?;
        self.check(adj)?;
        let (xv, av) = (self.value(x), self.value(adj));
        let (sx, sa) = (xv.shape().to_vec(), av.shape().to_vec());
        let mismatch = || TensorError::ShapeMismatch {
            op: "graph_aggregate",
            left: sx.clone(),
            right: sa.clone(),
        };
        if sx.len() != 4 {
            return Err(mismatch());
        }
        let (b, c, t, v) = (sx[0], sx[1], sx[2], sx[3]);
        let (per_sample, k) = match *sa.as_slice() {
            [k, v1, v2] if v1 == v && v2 == v => (false, k),
            [b2, k, v1, v2] if b2 == b && v1 == v && v2 == v => (true, k),
            _ => return Err(mismatch()),
        };
        let a_off = move |bi: usize, d: usize| if per_sample { (bi * k + d) * v * v } else { d * v * v };
        let xd = xv.data();
        let ad = av.data();
        let mut out = vec![T::zero(); b * k * c * t * v];
        // out row (as a [V] vector) = A_d * x row, i.e. x_row * A_d^T
        for bi in 0..b {
            for d in 0..k {
                let a = &ad[a_off(bi, d)..a_off(bi, d) + v * v];
                for ci in 0..c {
                    for ti in 0..t {
                        let xrow = &xd[((bi * c + ci) * t + ti) * v..][..v];
                        let orow = &mut out[((bi * k * c + d * c + ci) * t + ti) * v..][..v];
                        for (i, o) in orow.iter_mut().enumerate() {
                            let arow = &a[i * v..(i + 1) * v];
                            *o = arow.iter().zip(xrow).map(|(&p, &q)| p * q).sum();
                        }
                    }
                }
            }
        }
        let out = Tensor::new(&[b, k * c, t, v], out)?;
        self.record(&[x, adj], out, move |g| {
            let gd = g.data();
            let (xd, ad) = (xv.data(), av.data());
            let mut gx = vec![T::zero(); xd.len()];
            let mut ga = vec![T::zero(); ad.len()];
            for bi in 0..b {
                for d in 0..k {
                    let base = a_off(bi, d);
                    let a = &ad[base..base + v * v];
                    for ci in 0..c {
                        for ti in 0..t {
                            let xoff = ((bi * c + ci) * t + ti) * v;
                            let grow = &gd[((bi * k * c + d * c + ci) * t + ti) * v..][..v];
                            let xrow = &xd[xoff..xoff + v];
                            // gx[j] += sum_i a[i,j] g[i];  ga[i,j] += g[i] x[j]
                            for (i, &gi) in grow.iter().enumerate() {
                                if gi == T::zero() {
                                    continue;
                                }
                                let arow = &a[i * v..(i + 1) * v];
                                for (gxj, &aij) in gx[xoff..xoff + v].iter_mut().zip(arow) {
                                    *gxj += aij * gi;
                                }
                                for (gaij, &xj) in ga[base + i * v..base + (i + 1) * v].iter_mut().zip(xrow) {
                                    *gaij += gi * xj;
                                }
                            }
                        }
                    }
                }
            }
            vec![
                Tensor::new(&sx, gx).unwrap(),
                Tensor::new(&sa, ga).unwrap(),
            ]
        })
    }
}
