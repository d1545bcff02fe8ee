use crate::autodiff::Tensor;

use super::sequence::{SampleMeta, SkeletonSequence};
use super::IoError;

pub const SBU_JOINTS: usize = 15;
const COORDS_PER_LINE: usize = 2 * SBU_JOINTS * 3;

/// Line layout of an SBU `skeleton_pos.txt` file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SbuLayout {
    /// Each line starts with a frame index before the 90 coordinates.
    pub has_index: bool,
}

impl Default for SbuLayout {
    fn default() -> Self {
        Self { has_index: true }
    }
}

/// Parses one SBU interaction; coordinates per line are ordered person, joint, axis.
pub fn parse_sbu(text: &str, layout: SbuLayout, meta: SampleMeta) -> Result<SkeletonSequence, IoError> {
    let expected = COORDS_PER_LINE + usize::from(layout.has_index);
    let mut rows: Vec<Vec<f32>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != expected {
            return Err(IoError::FieldCountMismatch {
                line: i + 1,
                found: fields.len(),
                expected,
            });
        }
        let coords = fields[usize::from(layout.has_index)..]
            .iter()
            .map(|tok| match tok.parse::<f32>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(IoError::MalformedNumber {
                    line: i + 1,
                    token: tok.to_string(),
                }),
            })
            .collect::<Result<Vec<f32>, _>>()?;
        rows.push(coords);
    }
    if rows.is_empty() {
        return Err(IoError::InvalidSequence("no frames".into()));
    }
    let t = rows.len();
    let mut data = Tensor::zeros(&[3, t, 2, SBU_JOINTS]);
    for (ti, row) in rows.iter().enumerate() {
        for m in 0..2 {
            for n in 0..SBU_JOINTS {
                for c in 0..3 {
                    data.set(&[c, ti, m, n], row[(m * SBU_JOINTS + n) * 3 + c]);
                }
            }
        }
    }
    SkeletonSequence::new(data, meta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(index: usize, f: impl Fn(usize) -> f32) -> String {
        let mut parts = vec![index.to_string()];
        parts.extend((0..COORDS_PER_LINE).map(|i| format!("{:?}", f(i))));
        parts.join(",")
    }

    #[test]
    fn single_zero_line() {
        let seq = parse_sbu(&line(1, |_| 0.0), SbuLayout::default(), SampleMeta::default()).unwrap();
        assert_eq!(seq.data.shape(), &[3, 1, 2, 15]);
        assert!(seq.data.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn short_line_rejected() {
        let mut text = line(1, |_| 0.0);
        text.truncate(text.rfind(',').unwrap());
        let err = parse_sbu(&text, SbuLayout::default(), SampleMeta::default()).unwrap_err();
        assert!(matches!(err, IoError::FieldCountMismatch { found: 90, expected: 91, line: 1 }));
    }

    #[test]
    fn values_land_at_computed_indices() {
        let gen = |t: usize| move |i: usize| (t * 1000 + i) as f32 * 1e-3;
        let text = format!("{}\n{}\n", line(1, gen(0)), line(2, gen(1)));
        let seq = parse_sbu(&text, SbuLayout::default(), SampleMeta::default()).unwrap();
        for t in 0..2 {
            for m in 0..2 {
                for n in 0..15 {
                    for c in 0..3 {
                        let flat = m * 45 + n * 3 + c;
                        assert_eq!(seq.get(c, t, m, n), gen(t)(flat));
                    }
                }
            }
        }
    }

    #[test]
    fn bad_token() {
        let text = line(1, |_| 0.0).replacen(",0.0", ",x", 1);
        assert!(matches!(
            parse_sbu(&text, SbuLayout::default(), SampleMeta::default()),
            Err(IoError::MalformedNumber { line: 1, .. })
        ));
    }
}
