use crate::autodiff::tape::{Tape, Var};
use crate::autodiff::tensor::{Real, Tensor};
use crate::autodiff::TensorError;

/// Statistics source for [`Tape::batch_norm`].
pub enum NormStats<'a, T> {
    /// Normalise with the statistics of the current batch.
    Batch,
    /// Normalise with frozen running statistics.
    Running { mean: &'a Tensor<T>, var: &'a Tensor<T> },
}

/// Per-channel batch statistics: mean and unbiased variance.
pub struct BatchStats<T> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
}

impl<T: Real> Tape<T> {
    /// Batch normalisation over every axis except axis 1 of `x` (`[B, C, ...]`).
    pub fn batch_norm(
        &self,
        x: Var,
        gamma: Var,
        beta: Var,
        stats: NormStats<'_, T>,
        eps: T,
    ) -> Result<(Var, Option<BatchStats<T>>), TensorError> {
        self.check(x)?;
        self.check(gamma)?;
        self.check(beta)?;
        let xv = self.value(x);
        let sx = xv.shape().to_vec();
        let (gv, bv) = (self.value(gamma), self.value(beta));
        if sx.len() < 2 || gv.shape() != [sx[1]] || bv.shape() != [sx[1]] {
            return Err(TensorError::ShapeMismatch {
                op: "batch_norm",
                left: sx,
                right: gv.shape().to_vec(),
            });
        }
        let (b, c) = (sx[0], sx[1]);
        let inner: usize = sx[2..].iter().product();
        let count = b * inner;
        let xd = xv.data();
        let chan = move |bi: usize, ci: usize| (bi * c + ci) * inner;

        let (mean, var_biased, batch_stats) = match stats {
            NormStats::Batch => {
                let n = T::lit(count as f64);
                let mut mean = vec![T::zero(); c];
                let mut var = vec![T::zero(); c];
                for ci in 0..c {
                    let mut s = T::zero();
                    for bi in 0..b {
                        s += xd[chan(bi, ci)..][..inner].iter().copied().sum::<T>();
                    }
                    let m = s / n;
                    let mut q = T::zero();
                    for bi in 0..b {
                        q += xd[chan(bi, ci)..][..inner].iter().map(|&x| (x - m) * (x - m)).sum::<T>();
                    }
                    mean[ci] = m;
                    var[ci] = q / n;
                }
                let unbiased = if count > 1 {
                    let f = n / T::lit((count - 1) as f64);
                    var.iter().map(|&v| v * f).collect()
                } else {
                    var.clone()
                };
                let stats = BatchStats {
                    mean: mean.clone(),
                    var: unbiased,
                };
                (mean, var, Some(stats))
            }
            NormStats::Running { mean, var } => {
                if mean.shape() != [c] || var.shape() != [c] {
                    return Err(TensorError::ShapeMismatch {
                        op: "batch_norm running stats",
                        left: sx,
                        right: mean.shape().to_vec(),
                    });
                }
                (mean.data().to_vec(), var.data().to_vec(), None)
            }
        };
        let training = batch_stats.is_some();
        let inv_std: Vec<T> = var_biased.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
        let mut xhat = vec![T::zero(); xd.len()];
        let mut out = vec![T::zero(); xd.len()];
        for bi in 0..b {
            for ci in 0..c {
                let off = chan(bi, ci);
                let (g, be) = (gv.data()[ci], bv.data()[ci]);
                for i in off..off + inner {
                    let h = (xd[i] - mean[ci]) * inv_std[ci];
                    xhat[i] = h;
                    out[i] = g * h + be;
                }
            }
        }
        let out = Tensor::new(&sx, out)?;
        let var = self.record(&[x, gamma, beta], out, move |g| {
            let gd = g.data();
            let mut gx = vec![T::zero(); gd.len()];
            let mut ggamma = vec![T::zero(); c];
            let mut gbeta = vec![T::zero(); c];
            let n = T::lit(count as f64);
            for ci in 0..c {
                let (mut sg, mut sgh) = (T::zero(), T::zero());
                for bi in 0..b {
                    let off = chan(bi, ci);
                    for i in off..off + inner {
                        sg += gd[i];
                        sgh += gd[i] * xhat[i];
                    }
                }
                ggamma[ci] = sgh;
                gbeta[ci] = sg;
                let scale = gv.data()[ci] * inv_std[ci];
                for bi in 0..b {
                    let off = chan(bi, ci);
                    for i in off..off + inner {
                        gx[i] = if training {
                            scale * (gd[i] - sg / n - xhat[i] * sgh / n)
                        } else {
                            scale * gd[i]
                        };
                    }
                }
            }
            vec![
                Tensor::new(&sx, gx).unwrap(),
                Tensor::new(&[c], ggamma).unwrap(),
                Tensor::new(&[c], gbeta).unwrap(),
            ]
        })?;
        Ok((var, batch_stats))
    }
}
