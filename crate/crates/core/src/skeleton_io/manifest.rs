use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::canonical::read_canonical;
use super::sequence::SkeletonSequence;
use super::IoError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub sample_id: String,
    /// Canonical container path, relative to the manifest's directory unless absolute.
    pub path: PathBuf,
    pub label: u32,
    pub subject_id: u32,
    pub camera_id: u32,
    pub setup_id: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub num_classes: usize,
    pub joint_count: usize,
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<(), IoError> {
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(e.sample_id.as_str()) {
                return Err(IoError::InvalidManifest(format!("duplicate sample id {}", e.sample_id)));
            }
            if e.label as usize >= self.num_classes {
                return Err(IoError::InvalidManifest(format!(
                    "label {} of {} outside {} classes",
                    e.label, e.sample_id, self.num_classes
                )));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, IoError> {
        let m: Self = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> Result<String, IoError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// A manifest restricted to the entries accepted by `filter`.
    pub fn filtered(&self, filter: &SplitFilter) -> Self {
        Self {
            entries: self.entries.iter().filter(|e| filter.accepts(e)).cloned().collect(),
            num_classes: self.num_classes,
            joint_count: self.joint_count,
        }
    }
}

/// Benchmark split definition read from a user-supplied JSON file.
///
/// Every non-empty list must contain the entry's field for it to be accepted,
/// so `{"subjects": [1, 2]}` selects a cross-subject training split.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitFilter {
    pub subjects: Vec<u32>,
    pub cameras: Vec<u32>,
    pub setups: Vec<u32>,
    pub sample_ids: Vec<String>,
}

impl SplitFilter {
    pub fn accepts(&self, e: &ManifestEntry) -> bool {
        (self.subjects.is_empty() || self.subjects.contains(&e.subject_id))
            && (self.cameras.is_empty() || self.cameras.contains(&e.camera_id))
            && (self.setups.is_empty() || self.setups.contains(&e.setup_id))
            && (self.sample_ids.is_empty() || self.sample_ids.contains(&e.sample_id))
    }
}

/// Reads every sample named by the manifest; relative paths resolve against `base`.
pub fn load_samples(manifest: &DatasetManifest, base: &Path) -> Result<Vec<SkeletonSequence>, IoError> {
    manifest
        .entries
        .iter()
        .map(|e| {
            let path = if e.path.is_absolute() { e.path.clone() } else { base.join(&e.path) };
            let mut seq = read_canonical(&std::fs::read(&path)?, &e.sample_id)?;
            seq.meta.label = e.label;
            Ok(seq)
        })
        .collect()
}
