use std::f32::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::skeleton_io::{write_canonical, DatasetManifest, IoError, ManifestEntry, SampleMeta, SkeletonSequence, SplitFilter};

pub const TOY_CLASSES: [&str; 4] = ["approach", "depart", "kick", "hand_oscillation"];
pub const TOY_FRAMES: usize = 64;
const JOINTS: usize = 25;

/// Setup id of held-out samples; training samples use setup 1.
pub const TOY_HELD_OUT_SETUP: u32 = 2;

/// Standing pose in the 25-joint layout, facing +z, metres.
const REST_POSE: [[f32; 3]; JOINTS] = [
    [0.0, 0.0, 0.0],
    [0.0, 0.3, 0.0],
    [0.0, 0.65, 0.0],
    [0.0, 0.8, 0.0],
    [-0.2, 0.55, 0.0],
    [-0.25, 0.3, 0.0],
    [-0.27, 0.08, 0.0],
    [-0.28, 0.0, 0.0],
    [0.2, 0.55, 0.0],
    [0.25, 0.3, 0.0],
    [0.27, 0.08, 0.0],
    [0.28, 0.0, 0.0],
    [-0.1, -0.05, 0.0],
    [-0.12, -0.45, 0.0],
    [-0.12, -0.85, 0.0],
    [-0.12, -0.9, 0.1],
    [0.1, -0.05, 0.0],
    [0.12, -0.45, 0.0],
    [0.12, -0.85, 0.0],
    [0.12, -0.9, 0.1],
    [0.0, 0.55, 0.0],
    [-0.29, -0.06, 0.0],
    [-0.25, 0.0, 0.03],
    [0.29, -0.06, 0.0],
    [0.25, 0.0, 0.03],
];

/// Right knee, ankle, foot with their share of a kick displacement.
const KICK_LEG: [(usize, f32); 3] = [(17, 0.5), (18, 1.0), (19, 1.0)];
/// Right elbow, wrist, hand, hand tip, thumb.
const WAVE_ARM: [(usize, f32); 5] = [(9, 0.4), (10, 1.0), (11, 1.0), (23, 1.0), (24, 1.0)];

/// Horizontal distance between the two body centers at each frame, before noise.
pub fn toy_center_distance(class: usize, params: &ToyParams, t: usize) -> f32 {
    let s = t as f32 / (TOY_FRAMES - 1) as f32;
    match class {
        0 => params.far + (params.near - params.far) * s,
        1 => params.near + (params.far - params.near) * s,
        _ => params.near + 0.3,
    }
}

/// Per-sample random draws shaping one toy sequence.
#[derive(Clone, Debug)]
pub struct ToyParams {
    pub near: f32,
    pub far: f32,
    pub amplitude: f32,
    pub phase: f32,
    pub cycles: f32,
    pub kick_start: f32,
    pub offset: [f32; 3],
    pub noise: f32,
}

impl ToyParams {
    fn draw<R: Rng>(rng: &mut R) -> Self {
        Self {
            near: rng.gen_range(0.45..0.7),
            far: rng.gen_range(1.6..2.2),
            amplitude: rng.gen_range(0.25..0.4),
            phase: rng.gen_range(0.0..2.0 * PI),
            cycles: rng.gen_range(2.0..4.0),
            kick_start: rng.gen_range(0.1..0.4),
            offset: [rng.gen_range(-0.5..0.5), rng.gen_range(-0.1..0.1), rng.gen_range(2.0..3.5)],
            noise: 0.01,
        }
    }
}

/// One two-body toy sequence `[3, 64, 2, 25]` of `class` (index into [`TOY_CLASSES`]).
pub fn toy_sequence<R: Rng>(class: usize, rng: &mut R, meta: SampleMeta) -> SkeletonSequence {
    let p = ToyParams::draw(rng);
    let noise = Normal::new(0.0f32, p.noise).expect("positive sigma");
    let mut seq = SkeletonSequence::zeros(3, TOY_FRAMES, 2, JOINTS, meta);
    for t in 0..TOY_FRAMES {
        let d = toy_center_distance(class, &p, t);
        let s = t as f32 / (TOY_FRAMES - 1) as f32;
        let kick = {
            let u = ((s - p.kick_start) / 0.45).clamp(0.0, 1.0);
            (PI * u).sin().powi(2)
        };
        let wave = (2.0 * PI * p.cycles * s + p.phase).sin();
        for m in 0..2 {
            // body 0 on the left facing right, body 1 mirrored facing left
            let side = if m == 0 { -1.0 } else { 1.0 };
            for n in 0..JOINTS {
                let mut x = REST_POSE[n];
                x[0] *= -side;
                if class == 2 && m == 0 {
                    if let Some(&(_, w)) = KICK_LEG.iter().find(|(j, _)| *j == n) {
                        x[0] += w * p.amplitude * 1.2 * kick;
                        x[1] += w * p.amplitude * 0.8 * kick;
                    }
                }
                if class == 3 {
                    if let Some(&(_, w)) = WAVE_ARM.iter().find(|(j, _)| *j == n) {
                        x[1] += w * p.amplitude * wave;
                    }
                }
                let center = [side * d / 2.0, 0.0, 0.0];
                for c in 0..3 {
                    let v = x[c] + center[c] + p.offset[c] + noise.sample(rng);
                    seq.set(c, t, m, n, v);
                }
            }
        }
    }
    seq
}

/// Deterministic toy set: `samples_per_class` sequences per class, the last quarter of
/// each class marked held out (setup [`TOY_HELD_OUT_SETUP`]).
pub fn make_toy_dataset(seed: u64, classes: usize, samples_per_class: usize) -> Vec<SkeletonSequence> {
    assert!(classes <= TOY_CLASSES.len(), "at most {} toy classes", TOY_CLASSES.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let held_out_from = samples_per_class - samples_per_class / 4;
    let mut out = Vec::with_capacity(classes * samples_per_class);
    for i in 0..samples_per_class {
        for class in 0..classes {
            let meta = SampleMeta {
                sample_id: format!("toy_{}_{i:03}", TOY_CLASSES[class]),
                label: class as u32,
                subject_id: i as u32 + 1,
                camera_id: 1,
                setup_id: if i >= held_out_from { TOY_HELD_OUT_SETUP } else { 1 },
            };
            out.push(toy_sequence(class, &mut rng, meta));
        }
    }
    out
}

/// Splits by setup: (training, held out).
pub fn toy_splits() -> (SplitFilter, SplitFilter) {
    let f = |s| SplitFilter {
        setups: vec![s],
        ..SplitFilter::default()
    };
    (f(1), f(TOY_HELD_OUT_SETUP))
}

/// Writes canonical containers, `manifest.json`, `train_split.json` and `val_split.json` to `dir`.
pub fn write_toy_dataset(dir: &Path, seed: u64, classes: usize, samples_per_class: usize) -> Result<DatasetManifest, IoError> {
    std::fs::create_dir_all(dir)?;
    let mut entries = Vec::new();
    for seq in make_toy_dataset(seed, classes, samples_per_class) {
        let file = format!("{}.2pgc", seq.meta.sample_id);
        std::fs::write(dir.join(&file), write_canonical(&seq))?;
        entries.push(ManifestEntry {
            sample_id: seq.meta.sample_id.clone(),
            path: file.into(),
            label: seq.meta.label,
            subject_id: seq.meta.subject_id,
            camera_id: seq.meta.camera_id,
            setup_id: seq.meta.setup_id,
        });
    }
    let manifest = DatasetManifest {
        entries,
        num_classes: classes,
        joint_count: JOINTS,
    };
    std::fs::write(dir.join("manifest.json"), manifest.to_json()?)?;
    let (train, val) = toy_splits();
    std::fs::write(dir.join("train_split.json"), serde_json::to_string_pretty(&train)?)?;
    std::fs::write(dir.join("val_split.json"), serde_json::to_string_pretty(&val)?)?;
    Ok(manifest)
}
