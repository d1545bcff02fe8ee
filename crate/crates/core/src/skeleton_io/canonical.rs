//! Binary sample container.
//!
//! All integers and floats are little-endian:
//!
//! ```text
//! "2PGC" | u32 version | u32 C | u32 T | u32 M | u32 N
//!        | u32 label | u32 subject_id | u32 camera_id | u32 setup_id
//!        [ | u32 branch_tag ]            (version 2 only)
//!        | C*T*M*N x f32, [C][T][M][N] row-major
//! ```
//!
//! Version 1 stores raw skeleton sequences. Version 2 stores one preprocessed
//! input stream and adds a branch tag; for those, `C` is the expanded channel
//! count, `M` the graphs per sample and `N` the vertices per graph.

use crate::autodiff::Tensor;

use super::sequence::{SampleMeta, SkeletonSequence};
use super::IoError;

const MAGIC: &[u8; 4] = b"2PGC";
const SEQUENCE_VERSION: u32 = 1;
const FEATURE_VERSION: u32 = 2;

/// Which preprocessed input stream a feature record holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum BranchTag {
    #[serde(rename = "J")]
    Joint,
    #[serde(rename = "B")]
    Bone,
    #[serde(rename = "JM")]
    JointMotion,
    #[serde(rename = "BM")]
    BoneMotion,
}

impl BranchTag {
    pub const ALL: [BranchTag; 4] = [BranchTag::Joint, BranchTag::Bone, BranchTag::JointMotion, BranchTag::BoneMotion];

    pub fn code(self) -> u32 {
        match self {
            BranchTag::Joint => 0,
            BranchTag::Bone => 1,
            BranchTag::JointMotion => 2,
            BranchTag::BoneMotion => 3,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn short_name(self) -> &'static str {
        match self {
            BranchTag::Joint => "J",
            BranchTag::Bone => "B",
            BranchTag::JointMotion => "JM",
            BranchTag::BoneMotion => "BM",
        }
    }
}

impl std::str::FromStr for BranchTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|b| b.short_name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown branch {s:?} (expected J, B, JM or BM)"))
    }
}

/// One cached input stream, `[2C, T, graphs, V]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureRecord {
    pub tag: BranchTag,
    pub data: Tensor<f32>,
    pub meta: SampleMeta,
}

fn header(out: &mut Vec<u8>, version: u32, shape: &[usize], meta: &SampleMeta) {
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&version.to_le_bytes());
    for &e in shape {
        out.extend_from_slice(&(e as u32).to_le_bytes());
    }
    for v in [meta.label, meta.subject_id, meta.camera_id, meta.setup_id] {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn payload(out: &mut Vec<u8>, data: &[f32]) {
    out.reserve(data.len() * 4);
    for &x in data {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

pub fn write_canonical(seq: &SkeletonSequence) -> Vec<u8> {
    let mut out = Vec::with_capacity(40 + seq.data.len() * 4);
    header(&mut out, SEQUENCE_VERSION, seq.data.shape(), &seq.meta);
    payload(&mut out, seq.data.data());
    out
}

pub fn write_feature(record: &FeatureRecord) -> Vec<u8> {
    let mut out = Vec::with_capacity(44 + record.data.len() * 4);
    header(&mut out, FEATURE_VERSION, record.data.shape(), &record.meta);
    out.extend_from_slice(&record.tag.code().to_le_bytes());
    payload(&mut out, record.data.data());
    out
}

struct Parsed {
    version: u32,
    shape: [usize; 4],
    meta: SampleMeta,
    tag: Option<u32>,
    data: Vec<f32>,
}

fn parse(bytes: &[u8], sample_id: &str) -> Result<Parsed, IoError> {
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err(IoError::BadMagic);
    }
    let word = |i: usize| -> Option<u32> {
        bytes
            .get(4 + 4 * i..8 + 4 * i)
            .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    };
    let version = word(0).unwrap();
    let header_words = match version {
        SEQUENCE_VERSION => 9,
        FEATURE_VERSION => 10,
        v => return Err(IoError::UnsupportedVersion(v)),
    };
    let header_len = 8 + 4 * (header_words - 1);
    let mut words = [0u32; 10];
    for (i, w) in words.iter_mut().enumerate().take(header_words) {
        *w = word(i).ok_or(IoError::LengthMismatch {
            expected: header_len,
            found: bytes.len(),
        })?;
    }
    let shape = [words[1] as usize, words[2] as usize, words[3] as usize, words[4] as usize];
    let count = shape
        .iter()
        .try_fold(1usize, |a, &e| a.checked_mul(e))
        .and_then(|n| n.checked_mul(4));
    let body = &bytes[header_len..];
    match count {
        Some(n) if n == body.len() => {}
        _ => {
            return Err(IoError::LengthMismatch {
                expected: count.unwrap_or(usize::MAX),
                found: body.len(),
            })
        }
    }
    Ok(Parsed {
        version,
        shape,
        meta: SampleMeta {
            sample_id: sample_id.to_string(),
            label: words[5],
            subject_id: words[6],
            camera_id: words[7],
            setup_id: words[8],
        },
        tag: (version == FEATURE_VERSION).then_some(words[9]),
        data: body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect(),
    })
}

/// Decodes a version-1 container. The sample id is not stored in the file;
/// callers pass the manifest key or file stem.
pub fn read_canonical(bytes: &[u8], sample_id: &str) -> Result<SkeletonSequence, IoError> {
    let p = parse(bytes, sample_id)?;
    if p.version != SEQUENCE_VERSION {
        return Err(IoError::UnsupportedVersion(p.version));
    }
    let data = Tensor::new(&p.shape, p.data).expect("length checked");
    SkeletonSequence::new(data, p.meta)
}

pub fn read_feature(bytes: &[u8], sample_id: &str) -> Result<FeatureRecord, IoError> {
    let p = parse(bytes, sample_id)?;
    let code = p.tag.ok_or(IoError::UnsupportedVersion(p.version))?;
    let tag = BranchTag::from_code(code).ok_or_else(|| IoError::InvalidSequence(format!("branch tag {code}")))?;
    Ok(FeatureRecord {
        tag,
        data: Tensor::new(&p.shape, p.data).expect("length checked"),
        meta: p.meta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn meta() -> SampleMeta {
        SampleMeta {
            sample_id: "S001C001P001R001A050".into(),
            label: 7,
            subject_id: 1,
            camera_id: 2,
            setup_id: 3,
        }
    }

    #[test]
    fn zero_sequence_roundtrip() {
        let s = SkeletonSequence::zeros(3, 4, 2, 25, meta());
        let bytes = write_canonical(&s);
        assert_eq!(bytes.len(), 40 + 3 * 4 * 2 * 25 * 4);
        assert_eq!(&bytes[..4], b"2PGC");
        assert_eq!(read_canonical(&bytes, &s.meta.sample_id).unwrap(), s);
    }

    #[test]
    fn header_fields_in_order() {
        let s = SkeletonSequence::zeros(3, 4, 2, 15, meta());
        let bytes = write_canonical(&s);
        let words: Vec<u32> = bytes[4..40]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        assert_eq!(words, vec![1, 3, 4, 2, 15, 7, 1, 2, 3]);
    }

    #[test]
    fn corrupt_inputs() {
        let s = SkeletonSequence::zeros(3, 2, 2, 25, meta());
        let mut bytes = write_canonical(&s);
        assert!(matches!(read_canonical(&bytes[..bytes.len() - 4], ""), Err(IoError::LengthMismatch { .. })));
        bytes[4] = 9;
        assert!(matches!(read_canonical(&bytes, ""), Err(IoError::UnsupportedVersion(9))));
        bytes[0] = b'X';
        assert!(matches!(read_canonical(&bytes, ""), Err(IoError::BadMagic)));
        assert!(matches!(read_canonical(b"2P", ""), Err(IoError::BadMagic)));
    }

    #[test]
    fn feature_record_roundtrip() {
        let rec = FeatureRecord {
            tag: BranchTag::BoneMotion,
            data: Tensor::from_fn(&[6, 3, 2, 50], |i| i as f32 * 0.5),
            meta: meta(),
        };
        let bytes = write_feature(&rec);
        assert_eq!(u32::from_le_bytes(bytes[40..44].try_into().unwrap()), 3);
        assert_eq!(read_feature(&bytes, &rec.meta.sample_id).unwrap(), rec);
        assert!(read_canonical(&bytes, "").is_err());
    }

    proptest! {
        #[test]
        fn random_sequences_roundtrip_bit_exact(
            seed in any::<u64>(),
            t in 1usize..6,
            n in prop_oneof![Just(15usize), Just(25usize)],
            m in 1usize..=2,
            c in 2usize..=3,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let data = Tensor::from_fn(&[c, t, m, n], |_| rng.gen_range(-5.0f32..5.0));
            let mut md = meta();
            md.label = rng.gen();
            let s = SkeletonSequence::new(data, md).unwrap();
            let back = read_canonical(&write_canonical(&s), &s.meta.sample_id).unwrap();
            prop_assert_eq!(&back.meta, &s.meta);
            let bits = |x: &SkeletonSequence| x.data.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&back), bits(&s));
        }
    }
}
