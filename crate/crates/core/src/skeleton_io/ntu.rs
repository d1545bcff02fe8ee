use std::fmt::Write as _;

use crate::autodiff::Tensor;

use super::sequence::{SampleMeta, SkeletonSequence};
use super::IoError;

pub const NTU_JOINTS: usize = 25;
const BODY_INFO_FIELDS: usize = 10;
const JOINT_FIELDS: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RawJoint {
    /// Camera-space position in metres.
    pub position: [f32; 3],
    pub tracking_state: i32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RawBodyFrame {
    pub body_id: u64,
    pub joints: Vec<RawJoint>,
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            inner: text.lines().enumerate(),
            last: 0,
        }
    }

    /// Next non-blank line as (1-based line number, whitespace-split fields).
    fn next(&mut self, expected: &'static str) -> Result<(usize, Vec<&'a str>), IoError> {
        for (i, line) in self.inner.by_ref() {
            self.last = i + 1;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if !fields.is_empty() {
                return Ok((i + 1, fields));
            }
        }
        Err(IoError::TruncatedFile {
            line: self.last + 1,
            expected,
        })
    }

    fn count(&mut self, expected: &'static str) -> Result<(usize, usize), IoError> {
        let (line, fields) = self.next(expected)?;
        if fields.len() != 1 {
            return Err(IoError::FieldCountMismatch {
                line,
                found: fields.len(),
                expected: 1,
            });
        }
        let n = fields[0].parse::<usize>().map_err(|_| IoError::MalformedNumber {
            line,
            token: fields[0].to_string(),
        })?;
        Ok((line, n))
    }
}

fn real(line: usize, token: &str) -> Result<f32, IoError> {
    match token.parse::<f32>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(IoError::MalformedNumber {
            line,
            token: token.to_string(),
        }),
    }
}

/// Parses the NTU RGB+D `.skeleton` text layout.
///
/// Only camera-space `(x, y, z)` and the tracking state are kept per joint;
/// depth, colour and orientation fields are validated and dropped.
pub fn parse_ntu_skeleton(text: &str) -> Result<Vec<Vec<RawBodyFrame>>, IoError> {
    let mut lines = Lines::new(text);
    let (_, frame_count) = lines.count("frame count")?;
    let mut frames = Vec::new();
    for _ in 0..frame_count {
        let (_, body_count) = lines.count("body count")?;
        let mut bodies = Vec::new();
        for _ in 0..body_count {
            let (line, info) = lines.next("body info")?;
            if info.len() != BODY_INFO_FIELDS {
                return Err(IoError::FieldCountMismatch {
                    line,
                    found: info.len(),
                    expected: BODY_INFO_FIELDS,
                });
            }
            let body_id = info[0].parse::<u64>().map_err(|_| IoError::MalformedNumber {
                line,
                token: info[0].to_string(),
            })?;
            for tok in &info[1..] {
                real(line, tok)?;
            }
            let (line, joint_count) = lines.count("joint count")?;
            if joint_count != NTU_JOINTS {
                return Err(IoError::JointCountMismatch {
                    line,
                    found: joint_count,
                    expected: NTU_JOINTS,
                });
            }
            let mut joints = Vec::with_capacity(NTU_JOINTS);
            for _ in 0..NTU_JOINTS {
                let (line, f) = lines.next("joint record")?;
                if f.len() != JOINT_FIELDS {
                    return Err(IoError::FieldCountMismatch {
                        line,
                        found: f.len(),
                        expected: JOINT_FIELDS,
                    });
                }
                let position = [real(line, f[0])?, real(line, f[1])?, real(line, f[2])?];
                for tok in &f[3..11] {
                    real(line, tok)?;
                }
                let tracking_state = f[11].parse::<i32>().map_err(|_| IoError::MalformedNumber {
                    line,
                    token: f[11].to_string(),
                })?;
                joints.push(RawJoint {
                    position,
                    tracking_state,
                });
            }
            bodies.push(RawBodyFrame { body_id, joints });
        }
        frames.push(bodies);
    }
    Ok(frames)
}

/// Byte-level entry point; invalid UTF-8 is replaced before parsing.
pub fn parse_ntu_bytes(bytes: &[u8]) -> Result<Vec<Vec<RawBodyFrame>>, IoError> {
    parse_ntu_skeleton(&String::from_utf8_lossy(bytes))
}

/// Renders frames in the NTU text layout, zero-filling the dropped fields.
pub fn write_ntu_skeleton(frames: &[Vec<RawBodyFrame>]) -> String {
    let mut out = String::new();
    writeln!(out, "{}", frames.len()).unwrap();
    for bodies in frames {
        writeln!(out, "{}", bodies.len()).unwrap();
        for body in bodies {
            writeln!(out, "{} 0 1 1 1 1 0 0.0 0.0 2", body.body_id).unwrap();
            writeln!(out, "{}", body.joints.len()).unwrap();
            for j in &body.joints {
                let [x, y, z] = j.position;
                writeln!(out, "{x:?} {y:?} {z:?} 0 0 0 0 0 0 0 0 {}", j.tracking_state).unwrap();
            }
        }
    }
    out
}

/// Builds a two-slot sequence; slots follow first appearance of each body id.
pub fn to_sequence(frames: &[Vec<RawBodyFrame>], meta: SampleMeta) -> Result<SkeletonSequence, IoError> {
    if frames.is_empty() {
        return Err(IoError::InvalidSequence("capture has no frames".into()));
    }
    let mut ids: Vec<u64> = Vec::new();
    for body in frames.iter().flatten() {
        if !ids.contains(&body.body_id) {
            ids.push(body.body_id);
        }
    }
    if ids.len() > 2 {
        return Err(IoError::TooManyBodies { found: ids.len() });
    }
    let t = frames.len();
    let mut data = Tensor::zeros(&[3, t, 2, NTU_JOINTS]);
    for (ti, bodies) in frames.iter().enumerate() {
        for body in bodies {
            let slot = ids.iter().position(|&id| id == body.body_id).unwrap();
            if body.joints.len() != NTU_JOINTS {
                return Err(IoError::InvalidSequence(format!(
                    "body {} has {} joints",
                    body.body_id,
                    body.joints.len()
                )));
            }
            for (n, joint) in body.joints.iter().enumerate() {
                for c in 0..3 {
                    data.set(&[c, ti, slot, n], joint.position[c]);
                }
            }
        }
    }
    SkeletonSequence::new(data, meta)
}

/// Reads setup/camera/performer/action ids from an NTU file stem like `S001C002P003R002A050`.
///
/// The label is the zero-based action index.
pub fn parse_ntu_name(stem: &str) -> Option<SampleMeta> {
    let field = |tag: char| -> Option<u32> {
        let start = stem.find(tag)? + 1;
        let digits: String = stem[start..].chars().take_while(|c| c.is_ascii_digit()).collect();
        digits.parse().ok()
    };
    let action = field('A')?;
    Some(SampleMeta {
        sample_id: stem.to_string(),
        label: action.checked_sub(1)?,
        subject_id: field('P')?,
        camera_id: field('C')?,
        setup_id: field('S')?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn body(id: u64, f: impl Fn(usize) -> [f32; 3]) -> RawBodyFrame {
        RawBodyFrame {
            body_id: id,
            joints: (0..NTU_JOINTS)
                .map(|n| RawJoint {
                    position: f(n),
                    tracking_state: 2,
                })
                .collect(),
        }
    }

    #[test]
    fn zero_fixture() {
        let mut text = String::from("1\n1\n72057594037931101 0 1 1 1 1 0 0.1 0.2 2\n25\n");
        for _ in 0..25 {
            text.push_str("0 0 0 0 0 0 0 0 0 0 0 2\n");
        }
        let frames = parse_ntu_skeleton(&text).unwrap();
        assert_eq!(frames.len(), 1);
        assert_eq!(frames[0].len(), 1);
        assert_eq!(frames[0][0].body_id, 72057594037931101);
        assert!(frames[0][0].joints.iter().all(|j| j.position == [0.0; 3]));
    }

    #[test]
    fn declared_frames_missing() {
        let text = write_ntu_skeleton(&[vec![body(1, |_| [0.0; 3])]]).replacen("1\n", "2\n", 1);
        assert!(matches!(parse_ntu_skeleton(&text), Err(IoError::TruncatedFile { .. })));
    }

    #[test]
    fn generated_fixture_roundtrips() {
        let frames: Vec<Vec<RawBodyFrame>> = (0..3)
            .map(|t| {
                vec![
                    body(10, |n| [n as f32 * 0.01, t as f32, -1.0]),
                    body(20, |n| {
                        if t == 2 && n == 0 {
                            [0.1, 0.2, 0.3]
                        } else {
                            [1.0, n as f32 * -0.5, t as f32 * 0.25]
                        }
                    }),
                ]
            })
            .collect();
        let parsed = parse_ntu_skeleton(&write_ntu_skeleton(&frames)).unwrap();
        assert_eq!(parsed, frames);
        assert_eq!(parsed[2][1].joints[0].position, [0.1, 0.2, 0.3]);
    }

    #[test]
    fn joint_count_must_be_25() {
        let text = write_ntu_skeleton(&[vec![body(1, |_| [0.0; 3])]]).replacen("\n25\n", "\n24\n", 1);
        match parse_ntu_skeleton(&text) {
            Err(IoError::JointCountMismatch { line, found, .. }) => {
                assert_eq!((line, found), (4, 24));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_number_reports_line() {
        let text = write_ntu_skeleton(&[vec![body(1, |_| [0.0; 3])]]);
        let bad: String = text
            .lines()
            .enumerate()
            .map(|(i, l)| if i == 6 { "0 abc 0 0 0 0 0 0 0 0 0 2".to_string() } else { l.to_string() })
            .collect::<Vec<_>>()
            .join("\n");
        match parse_ntu_skeleton(&bad) {
            Err(IoError::MalformedNumber { line, token }) => assert_eq!((line, token.as_str()), (7, "abc")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn nan_coordinates_rejected() {
        let text = write_ntu_skeleton(&[vec![body(1, |_| [0.0; 3])]]).replacen("0.0 0.0 0.0 0 0", "NaN 0.0 0.0 0 0", 1);
        assert!(matches!(parse_ntu_skeleton(&text), Err(IoError::MalformedNumber { .. })));
    }

    #[test]
    fn single_body_fills_second_slot_with_zeros() {
        let frames = vec![vec![body(5, |n| [1.0, n as f32, 2.0])]; 2];
        let seq = to_sequence(&frames, SampleMeta::default()).unwrap();
        assert_eq!(seq.data.shape(), &[3, 2, 2, 25]);
        assert!(seq.body_is_empty(1));
        assert_eq!(seq.get(1, 1, 0, 7), 7.0);
    }

    #[test]
    fn late_body_gets_zero_frames() {
        let frames = vec![
            vec![body(1, |_| [1.0; 3])],
            vec![body(1, |_| [1.0; 3]), body(2, |n| [n as f32, 0.5, 0.25])],
            vec![body(2, |n| [n as f32, 0.5, 0.25]), body(1, |_| [1.0; 3])],
        ];
        let seq = to_sequence(&frames, SampleMeta::default()).unwrap();
        for c in 0..3 {
            for n in 0..25 {
                assert_eq!(seq.get(c, 0, 1, n), 0.0);
            }
        }
        assert_eq!(seq.get(0, 1, 1, 3), 3.0);
        // slot order is by first appearance, not by position within a frame
        assert_eq!(seq.get(0, 2, 1, 3), 3.0);
        assert_eq!(seq.get(2, 2, 0, 3), 1.0);
    }

    #[test]
    fn three_bodies_rejected() {
        let frames = vec![vec![body(1, |_| [0.0; 3]), body(2, |_| [0.0; 3])], vec![body(3, |_| [0.0; 3])]];
        assert!(matches!(to_sequence(&frames, SampleMeta::default()), Err(IoError::TooManyBodies { found: 3 })));
    }

    #[test]
    fn ntu_names() {
        let meta = parse_ntu_name("S001C002P003R002A050").unwrap();
        assert_eq!((meta.setup_id, meta.camera_id, meta.subject_id, meta.label), (1, 2, 3, 49));
        assert!(parse_ntu_name("garbage").is_none());
    }
}
