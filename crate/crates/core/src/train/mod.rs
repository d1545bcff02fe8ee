//! Optimisation, evaluation, the synthetic toy set and multi-seed ablations.

mod ablate;
mod eval;
mod fit;
mod optim;
mod toy;

pub use ablate::{mode_grid, run_ablation, strategy_grid, AblationRow, Variant};
pub use eval::{argmax, mean_std, EvalReport};
pub use fit::{condition_sequence, evaluate, evaluate_prepared, train, MetricRecord, PreparedSplit, TrainOutcome};
pub use optim::{lr_at, Sgd};
pub use toy::{
    make_toy_dataset, toy_center_distance, toy_sequence, toy_splits, write_toy_dataset, ToyParams, TOY_CLASSES,
    TOY_FRAMES, TOY_HELD_OUT_SETUP,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{CheckpointError, TensorError};
use crate::features::{FeatureError, MirrorMode};
use crate::nn::NnError;
use crate::skeleton_io::IoError;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("no training samples")]
    DataEmpty,
    #[error("label {label} outside {classes} classes")]
    ClassCountMismatch { label: usize, classes: usize },
    #[error("loss is not finite at epoch {epoch}, step {step}")]
    Diverged { epoch: usize, step: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Io(#[from] IoError),
}

impl From<TensorError> for TrainError {
    fn from(e: TensorError) -> Self {
        Self::Nn(NnError::Tensor(e))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LrSchedule {
    /// Cosine decay to zero after warmup.
    #[default]
    Cosine,
    /// Multiply by `gamma` at each milestone epoch.
    Step { milestones: Vec<usize>, gamma: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub warmup_epochs: usize,
    pub base_lr: f64,
    /// Nesterov momentum.
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub schedule: LrSchedule,
    pub mirror: MirrorMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 65,
            warmup_epochs: 5,
            base_lr: 0.1,
            momentum: 0.9,
            weight_decay: 2e-4,
            batch_size: 16,
            seed: 0,
            schedule: LrSchedule::Cosine,
            mirror: MirrorMode::Reflect,
        }
    }
}

impl TrainConfig {
    /// Settings for the synthetic toy set.
    pub fn toy(seed: u64) -> Self {
        Self {
            epochs: 30,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if self.warmup_epochs >= self.epochs {
            return Err(TrainError::Config(format!(
                "warmup_epochs ({}) must be below epochs ({})",
                self.warmup_epochs, self.epochs
            )));
        }
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch_size must be at least 1".into()));
        }
        if !(self.base_lr > 0.0) {
            return Err(TrainError::Config("base_lr must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_validation() {
        let c = TrainConfig::default();
        assert_eq!((c.epochs, c.warmup_epochs, c.batch_size), (65, 5, 16));
        assert_eq!((c.base_lr, c.momentum, c.weight_decay), (0.1, 0.9, 2e-4));
        assert!(TrainConfig { warmup_epochs: 65, ..c.clone() }.validate().is_err());
        assert!(TrainConfig { batch_size: 0, ..c }.validate().is_err());
    }

    #[test]
    fn config_json_round_trip() {
        let c = TrainConfig {
            schedule: LrSchedule::Step {
                milestones: vec![10],
                gamma: 0.5,
            },
            ..TrainConfig::toy(3)
        };
        let back: TrainConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        let partial: TrainConfig = serde_json::from_str(r#"{"epochs": 12}"#).unwrap();
        assert_eq!(partial.warmup_epochs, 5);
    }
}
