use crate::autodiff::Tensor;

use super::sequence::SkeletonSequence;
use super::IoError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResampleMode {
    /// Linear interpolation onto evenly spaced positions spanning the original frames.
    Interpolate,
    /// Keep frames and append zero frames.
    Pad,
}

pub fn resample_temporal(
    seq: &SkeletonSequence,
    target: usize,
    mode: ResampleMode,
) -> Result<SkeletonSequence, IoError> {
    if target == 0 {
        return Err(IoError::InvalidSequence("target frame count must be positive".into()));
    }
    let (c, t, m, n) = (seq.channels(), seq.frames(), seq.bodies(), seq.joints());
    let plane = m * n;
    let src = seq.data.data();
    let mut out = vec![0f32; c * target * plane];
    match mode {
        ResampleMode::Pad => {
            if t > target {
                return Err(IoError::PadOverflow { frames: t, target });
            }
            for ci in 0..c {
                let from = &src[ci * t * plane..(ci + 1) * t * plane];
                out[ci * target * plane..][..t * plane].copy_from_slice(from);
            }
        }
        ResampleMode::Interpolate => {
            for k in 0..target {
                let pos = if target == 1 {
                    0.0
                } else {
                    k as f64 * (t - 1) as f64 / (target - 1) as f64
                };
                let lo = (pos.floor() as usize).min(t - 1);
                let hi = (lo + 1).min(t - 1);
                let w = (pos - lo as f64) as f32;
                for ci in 0..c {
                    let a = &src[(ci * t + lo) * plane..][..plane];
                    let b = &src[(ci * t + hi) * plane..][..plane];
                    let o = &mut out[(ci * target + k) * plane..][..plane];
                    for ((o, &a), &b) in o.iter_mut().zip(a).zip(b) {
                        *o = if w == 0.0 { a } else { a + (b - a) * w };
                    }
                }
            }
        }
    }
    Ok(SkeletonSequence {
        data: Tensor::new(&[c, target, m, n], out).expect("sized above"),
        meta: seq.meta.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton_io::SampleMeta;

    fn seq_from(t: usize, f: impl Fn(usize, usize, usize, usize) -> f32) -> SkeletonSequence {
        let mut s = SkeletonSequence::zeros(3, t, 2, 25, SampleMeta::default());
        for c in 0..3 {
            for ti in 0..t {
                for m in 0..2 {
                    for n in 0..25 {
                        s.set(c, ti, m, n, f(c, ti, m, n));
                    }
                }
            }
        }
        s
    }

    #[test]
    fn constant_stays_constant() {
        let s = seq_from(7, |c, _, m, n| (c + m * 10 + n) as f32 * 0.1);
        for target in [1, 3, 7, 64] {
            let r = resample_temporal(&s, target, ResampleMode::Interpolate).unwrap();
            assert_eq!(r.frames(), target);
            for ti in 0..target {
                assert_eq!(r.get(2, ti, 1, 4), s.get(2, 0, 1, 4));
            }
        }
    }

    #[test]
    fn two_frames_to_three() {
        let s = seq_from(2, |_, t, _, _| t as f32);
        let r = resample_temporal(&s, 3, ResampleMode::Interpolate).unwrap();
        let vals: Vec<f32> = (0..3).map(|t| r.get(0, t, 0, 0)).collect();
        assert_eq!(vals, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn identity_when_lengths_match() {
        let s = seq_from(9, |c, t, m, n| ((c * 7 + t * 3 + m + n) as f32).sin());
        let r = resample_temporal(&s, 9, ResampleMode::Interpolate).unwrap();
        for (a, b) in r.data.data().iter().zip(s.data.data()) {
            assert!((a - b).abs() <= 1e-6);
        }
    }

    #[test]
    fn pad_appends_zero_frames() {
        let s = seq_from(3, |_, _, _, _| 1.0);
        let r = resample_temporal(&s, 5, ResampleMode::Pad).unwrap();
        for t in 0..5 {
            let want = if t < 3 { 1.0 } else { 0.0 };
            assert!((0..25).all(|n| r.get(1, t, 1, n) == want));
        }
        assert!(matches!(
            resample_temporal(&r, 4, ResampleMode::Pad),
            Err(IoError::PadOverflow { frames: 5, target: 4 })
        ));
    }
}
