use crate::autodiff::tape::{Tape, Var};
use crate::autodiff::tensor::{Real, Tensor};
use crate::autodiff::TensorError;

/// Geometry of a `K x 1` temporal window sliding over the frame axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TemporalWindow {
    pub kernel: usize,
    pub stride: usize,
    pub dilation: usize,
    pub padding: usize,
}

impl TemporalWindow {
    /// Stride-1 windows with this padding preserve the frame count.
    pub fn same(kernel: usize, stride: usize, dilation: usize) -> Self {
        Self {
            kernel,
            stride,
            dilation,
            padding: (kernel - 1) * dilation / 2,
        }
    }

    pub fn out_len(&self, t: usize) -> usize {
        let span = self.dilation * (self.kernel - 1) + 1;
        if t + 2 * self.padding < span {
            return 0;
        }
        (t + 2 * self.padding - span) / self.stride + 1
    }

    /// Range of output frames whose tap `k` lands inside `[0, t)`.
    fn valid(&self, k: usize, t: usize, t_out: usize) -> (usize, usize) {
        let shift = (k * self.dilation) as isize - self.padding as isize;
        let s = self.stride as isize;
        // to * s + shift >= 0  and  to * s + shift < t
        let lo = if shift >= 0 { 0 } else { ((-shift) + s - 1) / s };
        let hi = ((t as isize - shift) + s - 1).div_euclid(s).clamp(0, t_out as isize);
        (lo.min(t_out as isize) as usize, hi.max(0) as usize)
    }

    fn src(&self, to: usize, k: usize) -> usize {
        to * self.stride + k * self.dilation - self.padding
    }
}

fn axpy<T: Real>(a: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn dot<T: Real>(x: &[T], y: &[T]) -> T {
    x.iter().zip(y).map(|(&a, &b)| a * b).sum()
}

impl<T: Real> Tape<T> {
    /// Convolution along the frame axis with a `K x 1` kernel.
    ///
    /// `x` is `[B, C_in, T, V]`, `weight` is `[C_out, C_in, K]`, `bias` is `[C_out]`.
    pub fn conv_t(
        &self,
        x: Var,
        weight: Var,
        bias: Option<Var>,
        window: TemporalWindow,
    ) -> Result<Var, TensorError> {
        self.check(x)?;
        self.check(weight)?;
        let (xv, wv) = (self.value(x), self.value(weight));
        let (sx, sw) = (xv.shape().to_vec(), wv.shape().to_vec());
        if sx.len() != 4 || sw.len() != 3 || sw[1] != sx[1] || sw[2] != window.kernel {
            return Err(TensorError::ShapeMismatch {
                op: "conv_t",
                left: sx,
                right: sw,
            });
        }
        let (b, cin, t, v) = (sx[0], sx[1], sx[2], sx[3]);
        let cout = sw[0];
        let bias_v = match bias {
            Some(bv) => {
                self.check(bv)?;
                let val = self.value(bv);
                if val.shape() != [cout] {
                    return Err(TensorError::ShapeMismatch {
                        op: "conv_t bias",
                        left: sw,
                        right: val.shape().to_vec(),
                    });
                }
                Some(val)
            }
            None => None,
        };
        let t_out = window.out_len(t);
        let kn = window.kernel;
        let plane_in = t * v;
        let plane_out = t_out * v;
        let xd = xv.data();
        let wd = wv.data();
        let mut out = vec![T::zero(); b * cout * plane_out];
        for bi in 0..b {
            for co in 0..cout {
                let oplane = &mut out[(bi * cout + co) * plane_out..][..plane_out];
                if let Some(bias) = &bias_v {
                    oplane.iter_mut().for_each(|o| *o = bias.data()[co]);
                }
                for ci in 0..cin {
                    let xplane = &xd[(bi * cin + ci) * plane_in..][..plane_in];
                    for k in 0..kn {
                        let w = wd[(co * cin + ci) * kn + k];
                        let (lo, hi) = window.valid(k, t, t_out);
                        if lo >= hi {
                            continue;
                        }
                        if window.stride == 1 {
                            let src = window.src(lo, k);
                            let n = (hi - lo) * v;
                            axpy(w, &xplane[src * v..src * v + n], &mut oplane[lo * v..lo * v + n]);
                        } else {
                            for to in lo..hi {
                                let src = window.src(to, k);
                                axpy(w, &xplane[src * v..(src + 1) * v], &mut oplane[to * v..(to + 1) * v]);
                            }
                        }
                    }
                }
            }
        }
        let out = Tensor::new(&[b, cout, t_out, v], out)?;
        let mut inputs = vec![x, weight];
        inputs.extend(bias);
        let has_bias = bias.is_some();
        self.record(&inputs, out, move |g| {
            let gd = g.data();
            let (xd, wd) = (xv.data(), wv.data());
            let mut gx = vec![T::zero(); xd.len()];
            let mut gw = vec![T::zero(); wd.len()];
            for bi in 0..b {
                for co in 0..cout {
                    let gplane = &gd[(bi * cout + co) * plane_out..][..plane_out];
                    for ci in 0..cin {
                        let xoff = (bi * cin + ci) * plane_in;
                        for k in 0..kn {
                            let widx = (co * cin + ci) * kn + k;
                            let (lo, hi) = window.valid(k, t, t_out);
                            if lo >= hi {
                                continue;
                            }
                            if window.stride == 1 {
                                let src = window.src(lo, k);
                                let n = (hi - lo) * v;
                                let grows = &gplane[lo * v..lo * v + n];
                                axpy(wd[widx], grows, &mut gx[xoff + src * v..xoff + src * v + n]);
                                gw[widx] += dot(grows, &xd[xoff + src * v..xoff + src * v + n]);
                            } else {
                                for to in lo..hi {
                                    let src = window.src(to, k);
                                    let grow = &gplane[to * v..(to + 1) * v];
                                    let xs = xoff + src * v;
                                    axpy(wd[widx], grow, &mut gx[xs..xs + v]);
                                    gw[widx] += dot(grow, &xd[xs..xs + v]);
                                }
                            }
                        }
                    }
                }
            }
            let mut grads = vec![
                Tensor::new(&sx, gx).unwrap(),
                Tensor::new(&sw, gw).unwrap(),
            ];
            if has_bias {
                let mut gb = vec![T::zero(); cout];
                for bi in 0..b {
                    for (co, acc) in gb.iter_mut().enumerate() {
                        *acc += gd[(bi * cout + co) * plane_out..][..plane_out].iter().copied().sum();
                    }
                }
                grads.push(Tensor::new(&[cout], gb).unwrap());
            }
            grads
        })
    }

    /// Max pooling along the frame axis; padded taps never win.
    pub fn max_pool_t(&self, x: Var, window: TemporalWindow) -> Result<Var, TensorError> {
        self.check(x)?;
        let xv = self.value(x);
        let sx = xv.shape().to_vec();
        if sx.len() != 4 {
            return Err(TensorError::ShapeMismatch {
                op: "max_pool_t",
                left: sx,
                right: vec![window.kernel],
            });
        }
        let (b, c, t, v) = (sx[0], sx[1], sx[2], sx[3]);
        let t_out = window.out_len(t);
        let xd = xv.data();
        let mut out = vec![T::neg_infinity(); b * c * t_out * v];
        let mut arg = vec![usize::MAX; out.len()];
        for plane in 0..b * c {
            for k in 0..window.kernel {
                let (lo, hi) = window.valid(k, t, t_out);
                for to in lo..hi {
                    let src = window.src(to, k);
                    for j in 0..v {
                        let si = (plane * t + src) * v + j;
                        let oi = (plane * t_out + to) * v + j;
                        if xd[si] > out[oi] || arg[oi] == usize::MAX {
                            out[oi] = xd[si];
                            arg[oi] = si;
                        }
                    }
                }
            }
        }
        let out = Tensor::new(&[b, c, t_out, v], out)?;
        let len = xd.len();
        self.record(&[x], out, move |g| {
            let mut gx = vec![T::zero(); len];
            for (oi, &si) in arg.iter().enumerate() {
                if si != usize::MAX {
                    gx[si] += g.data()[oi];
                }
            }
            vec![Tensor::new(&sx, gx).unwrap()]
        })
    }
}
