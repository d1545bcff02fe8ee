use serde::{Deserialize, Serialize};

use crate::features::GraphScaleMode;
use crate::graph::LabelingStrategy;
use crate::nn::ModelConfig;
use crate::skeleton_io::SkeletonSequence;

use super::eval::mean_std;
use super::fit::train;
use super::{TrainConfig, TrainError};

/// One cell of an ablation table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variant {
    pub mode: GraphScaleMode,
    pub strategy: LabelingStrategy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub mode: GraphScaleMode,
    pub strategy: LabelingStrategy,
    pub seeds: Vec<u64>,
    /// Best held-out top-1 of each seed.
    pub top1: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    /// FLOP estimate of one sample at the configured frame count.
    pub flops: u64,
    pub params: usize,
}

/// Every graph-scale mode under one labeling strategy.
pub fn mode_grid(strategy: LabelingStrategy) -> Vec<Variant> {
    GraphScaleMode::ALL.iter().map(|&mode| Variant { mode, strategy }).collect()
}

/// Every labeling strategy under one graph-scale mode.
pub fn strategy_grid(mode: GraphScaleMode) -> Vec<Variant> {
    LabelingStrategy::ALL.iter().map(|&strategy| Variant { mode, strategy }).collect()
}

/// Trains every variant once per seed and aggregates held-out accuracy.
pub fn run_ablation(
    base: &ModelConfig,
    cfg: &TrainConfig,
    variants: &[Variant],
    seeds: &[u64],
    train_set: &[SkeletonSequence],
    val_set: &[SkeletonSequence],
    on_row: &mut dyn FnMut(&AblationRow),
) -> Result<Vec<AblationRow>, TrainError> {
    let mut rows = Vec::with_capacity(variants.len());
    for v in variants {
        let model_cfg = ModelConfig {
            mode: v.mode,
            strategy: v.strategy,
            ..base.clone()
        };
        let mut top1 = Vec::with_capacity(seeds.len());
        let mut shape = (0, 0);
        for &seed in seeds {
            let run_cfg = TrainConfig { seed, ..cfg.clone() };
            let out = train(&model_cfg, &run_cfg, train_set, val_set, &mut |_| {})?;
            shape = (out.model.estimate_flops(model_cfg.frames), out.best.count());
            top1.push(out.best_top1);
        }
        let (mean, std) = mean_std(&top1);
        let row = AblationRow {
            mode: v.mode,
            strategy: v.strategy,
            seeds: seeds.to_vec(),
            top1,
            mean,
            std,
            flops: shape.0,
            params: shape.1,
        };
        on_row(&row);
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_cover_all_variants() {
        assert_eq!(mode_grid(LabelingStrategy::Geometric).len(), 4);
        let s = strategy_grid(GraphScaleMode::Symmetry);
        assert_eq!(s.len(), 6);
        assert!(s.iter().all(|v| v.mode == GraphScaleMode::Symmetry));
    }
}
