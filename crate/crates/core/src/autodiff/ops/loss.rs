use crate::autodiff::tape::{Tape, Var};
use crate::autodiff::tensor::{Real, Tensor};
use crate::autodiff::TensorError;

/// Row-wise log-softmax over the last axis of a flat buffer.
pub(crate) fn log_softmax_rows<T: Real>(data: &[T], k: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(data.len());
    for row in data.chunks(k) {
        let m = row.iter().copied().fold(T::neg_infinity(), T::max);
        let lse = m + row.iter().map(|&x| (x - m).exp()).sum::<T>().ln();
        out.extend(row.iter().map(|&x| x - lse));
    }
    out
}

impl<T: Real> Tape<T> {
    /// Softmax over the last axis.
    pub fn softmax(&self, a: Var) -> Result<Var, TensorError> {
        self.check(a)?;
        let v = self.value(a);
        let shape = v.shape().to_vec();
        let k = *shape.last().ok_or(TensorError::Empty { op: "softmax" })?;
        let probs: Vec<T> = log_softmax_rows(v.data(), k).into_iter().map(T::exp).collect();
        let out = Tensor::new(&shape, probs)?;
        let y = out.clone();
        self.record(&[a], out, move |g| {
            let mut gx = Vec::with_capacity(y.len());
            for (yr, gr) in y.data().chunks(k).zip(g.data().chunks(k)) {
                let dot: T = yr.iter().zip(gr).map(|(&p, &q)| p * q).sum();
                gx.extend(yr.iter().zip(gr).map(|(&p, &q)| p * (q - dot)));
            }
            vec![Tensor::new(&shape, gx).unwrap()]
        })
    }

    /// Mean cross-entropy of `logits` (`[B, K]`) against integer class labels.
    pub fn cross_entropy(&self, logits: Var, labels: &[usize]) -> Result<Var, TensorError> {
        self.check(logits)?;
        let v = self.value(logits);
        let shape = v.shape().to_vec();
        if shape.len() != 2 || shape[0] != labels.len() || labels.iter().any(|&l| l >= shape[1]) {
            return Err(TensorError::ShapeMismatch {
                op: "cross_entropy",
                left: shape,
                right: vec![labels.len()],
            });
        }
        let (b, k) = (shape[0], shape[1]);
        let logp = log_softmax_rows(v.data(), k);
        let nll: T = labels.iter().enumerate().map(|(i, &l)| -logp[i * k + l]).sum();
        let inv_b = T::one() / T::lit(b as f64);
        let labels = labels.to_vec();
        self.record(&[logits], Tensor::scalar(nll * inv_b), move |g| {
            let scale = g.item() * inv_b;
            let mut gx: Vec<T> = logp.iter().map(|&lp| lp.exp() * scale).collect();
            for (i, &l) in labels.iter().enumerate() {
                gx[i * k + l] -= scale;
            }
            vec![Tensor::new(&shape, gx).unwrap()]
        })
    }
}
