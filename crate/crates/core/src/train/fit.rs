use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamStore, Tape};
use crate::features::{build_features, mirror_second_body, FeatureBundle, GraphScaleMode, MirrorMode, Phase};
use crate::nn::{apply_stat_updates, Ctx, Model, ModelConfig};
use crate::skeleton_io::{resample_temporal, ResampleMode, SkeletonSequence};

use super::eval::{argmax, EvalReport};
use super::optim::{lr_at, Sgd};
use super::{TrainConfig, TrainError};

/// One line of the metrics log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub epoch: usize,
    pub split: String,
    pub loss: f64,
    pub top1: f64,
}

/// Resamples to the model's frame count and synthesises a mirrored partner for
/// single-person captures.
pub fn condition_sequence(seq: &SkeletonSequence, model: &ModelConfig, mirror: MirrorMode) -> Result<SkeletonSequence, TrainError> {
    let topo = model.topology();
    if seq.joints() != topo.joint_count {
        return Err(TrainError::Config(format!(
            "sample {} has {} joints, layout expects {}",
            seq.meta.sample_id,
            seq.joints(),
            topo.joint_count
        )));
    }
    let seq = resample_temporal(seq, model.frames, ResampleMode::Interpolate)?;
    if seq.bodies() == 1 || seq.body_is_empty(1) {
        Ok(mirror_second_body(&seq, &topo, mirror)?)
    } else {
        Ok(seq)
    }
}

/// Conditioned samples with their evaluation-phase features.
#[derive(Clone, Debug)]
pub struct PreparedSplit {
    pub sequences: Vec<SkeletonSequence>,
    pub bundles: Vec<FeatureBundle>,
    pub labels: Vec<usize>,
}

impl PreparedSplit {
    pub fn new(samples: &[SkeletonSequence], model: &ModelConfig, mirror: MirrorMode) -> Result<Self, TrainError> {
        let topo = model.topology();
        let mut sequences = Vec::with_capacity(samples.len());
        let mut bundles = Vec::with_capacity(samples.len());
        let mut labels = Vec::with_capacity(samples.len());
        // evaluation features never draw from the rng
        let mut unused = ChaCha8Rng::seed_from_u64(0);
        for s in samples {
            let label = s.label();
            if label >= model.num_classes {
                return Err(TrainError::ClassCountMismatch {
                    label,
                    classes: model.num_classes,
                });
            }
            let seq = condition_sequence(s, model, mirror)?;
            bundles.push(build_features(&seq, &topo, model.mode, &mut unused, Phase::Eval)?);
            sequences.push(seq);
            labels.push(label);
        }
        Ok(Self {
            sequences,
            bundles,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Result of a training run.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: Model,
    /// Parameters of the epoch with the best held-out top-1 (the last epoch without a held-out split).
    pub best: ParamStore<f32>,
    /// Parameters after the final epoch.
    pub last: ParamStore<f32>,
    pub best_epoch: usize,
    pub best_top1: f64,
    pub metrics: Vec<MetricRecord>,
}

/// Trains `model_cfg` on `train`, evaluating on `val` after every epoch.
///
/// `on_metric` sees each record as soon as it is produced.
pub fn train(
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    train: &[SkeletonSequence],
    val: &[SkeletonSequence],
    on_metric: &mut dyn FnMut(&MetricRecord),
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    model_cfg.validate()?;
    if train.is_empty() {
        return Err(TrainError::DataEmpty);
    }
    let train_split = PreparedSplit::new(train, model_cfg, cfg.mirror)?;
    let val_split = PreparedSplit::new(val, model_cfg, cfg.mirror)?;
    let mut store = ParamStore::<f32>::new();
    let model = Model::build(model_cfg, &mut store, cfg.seed)?;
    let topo = model_cfg.topology();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0f_7a1e);
    let mut sgd = Sgd::new(cfg.momentum, cfg.weight_decay);
    let steps = train_split.len().div_ceil(cfg.batch_size);
    let mut order: Vec<usize> = (0..train_split.len()).collect();
    let mut metrics = Vec::new();
    let mut best = (store.clone(), 0usize, f64::NEG_INFINITY);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let (mut loss_sum, mut correct, mut seen) = (0.0f64, 0usize, 0usize);
        for (step, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let bundles: Vec<FeatureBundle> = if model_cfg.mode == GraphScaleMode::RandomSwap {
                chunk
                    .iter()
                    .map(|&i| build_features(&train_split.sequences[i], &topo, model_cfg.mode, &mut rng, Phase::Train))
                    .collect::<Result<_, _>>()?
            } else {
                chunk.iter().map(|&i| train_split.bundles[i].clone()).collect()
            };
            let labels: Vec<usize> = chunk.iter().map(|&i| train_split.labels[i]).collect();
            let input = model.prepare::<f32>(&bundles)?;
            let tape = Tape::new();
            let ctx = Ctx::new(&tape, &store, true);
            // each person ordering counts as its own training sample
            let (logits, targets) = if model_cfg.mode == GraphScaleMode::Symmetry {
                let g = input.graphs;
                let expanded: Vec<usize> = labels.iter().flat_map(|&l| std::iter::repeat_n(l, g)).collect();
                (model.forward_graphs(&ctx, &input)?, expanded)
            } else {
                (model.forward(&ctx, &input)?, labels)
            };
            let loss = tape.cross_entropy(logits, &targets)?;
            let loss_value = tape.value(loss).item() as f64;
            if !loss_value.is_finite() {
                return Err(TrainError::Diverged { epoch, step });
            }
            let values = tape.value(logits);
            let k = model_cfg.num_classes;
            for (row, &t) in values.data().chunks(k).zip(&targets) {
                let row: Vec<f64> = row.iter().map(|&x| x as f64).collect();
                correct += usize::from(argmax(&row) == t);
            }
            loss_sum += loss_value * targets.len() as f64;
            seen += targets.len();
            let updates = ctx.into_stat_updates();
            store.zero_grad();
            tape.backward(loss, &mut store)?;
            sgd.step(&mut store, lr_at(epoch, step, steps, cfg));
            apply_stat_updates(&mut store, updates);
        }
        let record = MetricRecord {
            epoch,
            split: "train".into(),
            loss: loss_sum / seen as f64,
            top1: correct as f64 / seen as f64,
        };
        on_metric(&record);
        metrics.push(record);
        let score = if val_split.is_empty() {
            f64::NEG_INFINITY
        } else {
            let report = evaluate_prepared(&model, &store, &val_split, cfg.batch_size)?;
            let record = MetricRecord {
                epoch,
                split: "val".into(),
                loss: report.loss.unwrap_or(f64::NAN),
                top1: report.top1,
            };
            on_metric(&record);
            metrics.push(record);
            report.top1
        };
        if score >= best.2 {
            best = (store.clone(), epoch, score);
        }
    }
    Ok(TrainOutcome {
        model,
        best: best.0,
        last: store,
        best_epoch: best.1,
        best_top1: best.2,
        metrics,
    })
}

/// Evaluation-mode accuracy of `store` on already prepared samples.
pub fn evaluate_prepared(model: &Model, store: &ParamStore<f32>, split: &PreparedSplit, batch_size: usize) -> Result<EvalReport, TrainError> {
    if split.is_empty() {
        return Err(TrainError::DataEmpty);
    }
    let k = model.config.num_classes;
    let mut predictions = Vec::with_capacity(split.len());
    let mut loss_sum = 0.0;
    for start in (0..split.len()).step_by(batch_size.max(1)) {
        let end = (start + batch_size.max(1)).min(split.len());
        let input = model.prepare::<f32>(&split.bundles[start..end])?;
        let tape = Tape::inference();
        let ctx = Ctx::new(&tape, store, false);
        let logits = model.forward(&ctx, &input)?;
        let loss = tape.cross_entropy(logits, &split.labels[start..end])?;
        loss_sum += tape.value(loss).item() as f64 * (end - start) as f64;
        for row in tape.value(logits).data().chunks(k) {
            let row: Vec<f64> = row.iter().map(|&x| x as f64).collect();
            predictions.push(argmax(&row));
        }
    }
    let mut report = EvalReport::from_predictions(&predictions, &split.labels, k);
    report.loss = Some(loss_sum / split.len() as f64);
    Ok(report)
}

/// Conditions `samples` and evaluates `store` on them.
pub fn evaluate(
    model: &Model,
    store: &ParamStore<f32>,
    samples: &[SkeletonSequence],
    mirror: MirrorMode,
    batch_size: usize,
) -> Result<EvalReport, TrainError> {
    let split = PreparedSplit::new(samples, &model.config, mirror)?;
    evaluate_prepared(model, store, &split, batch_size)
}
