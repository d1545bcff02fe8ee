//! Skeleton capture ingestion.
//!
//! Raw NTU (`.skeleton` text) and SBU (comma-separated) captures are parsed
//! into [`SkeletonSequence`]s laid out as `[C, T, M, N]`: coordinate channels,
//! frames, body slots and joints. Sequences serialise to a small
//! little-endian container (see [`canonical`]) and datasets are indexed by a
//! JSON [`DatasetManifest`].

pub mod canonical;
mod manifest;
mod ntu;
mod resample;
mod sbu;
mod sequence;

pub use canonical::{read_canonical, read_feature, write_canonical, write_feature, BranchTag, FeatureRecord};
pub use manifest::{load_samples, DatasetManifest, ManifestEntry, SplitFilter};
pub use ntu::{
    parse_ntu_bytes, parse_ntu_name, parse_ntu_skeleton, to_sequence, write_ntu_skeleton, RawBodyFrame, RawJoint, NTU_JOINTS,
};
pub use resample::{resample_temporal, ResampleMode};
pub use sbu::{parse_sbu, SbuLayout, SBU_JOINTS};
pub use sequence::{SampleMeta, SkeletonSequence};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("file truncated: expected {expected} at line {line}")]
    TruncatedFile { line: usize, expected: &'static str },
    #[error("malformed number {token:?} at line {line}")]
    MalformedNumber { line: usize, token: String },
    #[error("joint count {found} at line {line}, expected {expected}")]
    JointCountMismatch {
        line: usize,
        found: usize,
        expected: usize,
    },
    #[error("line {line} has {found} fields, expected {expected}")]
    FieldCountMismatch {
        line: usize,
        found: usize,
        expected: usize,
    },
    #[error("{found} distinct bodies in capture, at most 2 supported")]
    TooManyBodies { found: usize },
    #[error("cannot pad {frames} frames into {target}")]
    PadOverflow { frames: usize, target: usize },
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unsupported container version {0}")]
    UnsupportedVersion(u32),
    #[error("payload holds {found} bytes, header implies {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("invalid sequence: {0}")]
    InvalidSequence(String),
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
