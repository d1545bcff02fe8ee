use pgcn_core::autodiff::{write_checkpoint, ParamStore, Tape};
use pgcn_core::features::{build_features, GraphScaleMode, Phase};
use pgcn_core::graph::LabelingStrategy;
use pgcn_core::nn::{Ctx, Model, ModelConfig};
use pgcn_core::skeleton_io::SkeletonSequence;
use pgcn_core::train::{
    evaluate, make_toy_dataset, train, MetricRecord, PreparedSplit, TrainConfig, TrainError,
};

fn small_config(mode: GraphScaleMode) -> ModelConfig {
    ModelConfig {
        mode,
        strategy: LabelingStrategy::Interactive,
        frames: 16,
        ..ModelConfig::tiny(4)
    }
}

fn split(per_class: usize) -> (Vec<SkeletonSequence>, Vec<SkeletonSequence>) {
    make_toy_dataset(11, 4, per_class).into_iter().partition(|s| s.meta.setup_id == 1)
}

fn short(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        warmup_epochs: 1,
        batch_size: 8,
        ..TrainConfig::toy(7)
    }
}

#[test]
fn same_seed_same_metrics() {
    let (tr, va) = split(4);
    let cfg = small_config(GraphScaleMode::RandomSwap);
    let run = || train(&cfg, &short(2), &tr, &va, &mut |_| {}).unwrap();
    let (a, b) = (run(), run());
    assert_eq!(a.metrics, b.metrics);
    assert_eq!(write_checkpoint(&a.last), write_checkpoint(&b.last));
}

#[test]
fn training_loss_falls() {
    let (tr, _) = split(8);
    let mut seen: Vec<MetricRecord> = Vec::new();
    train(&small_config(GraphScaleMode::Mutual), &short(10), &tr, &[], &mut |r| seen.push(r.clone())).unwrap();
    let losses: Vec<f64> = seen.iter().filter(|r| r.split == "train").map(|r| r.loss).collect();
    assert_eq!(losses.len(), 10);
    assert!(losses[9] < losses[0], "{losses:?}");
}

#[test]
fn empty_training_set_is_an_error() {
    let (_, va) = split(4);
    let err = train(&small_config(GraphScaleMode::Mutual), &short(2), &[], &va, &mut |_| {}).unwrap_err();
    assert!(matches!(err, TrainError::DataEmpty));
}

#[test]
fn label_outside_class_count_is_an_error() {
    let (mut tr, _) = split(4);
    tr[0].meta.label = 9;
    let err = train(&small_config(GraphScaleMode::Mutual), &short(2), &tr, &[], &mut |_| {}).unwrap_err();
    assert!(matches!(err, TrainError::ClassCountMismatch { label: 9, classes: 4 }));
}

#[test]
fn invalid_schedule_is_an_error() {
    let (tr, _) = split(4);
    let cfg = TrainConfig {
        warmup_epochs: 3,
        ..short(3)
    };
    assert!(matches!(
        train(&small_config(GraphScaleMode::Mutual), &cfg, &tr, &[], &mut |_| {}),
        Err(TrainError::Config(_))
    ));
}

#[test]
fn checkpoint_reload_evaluates_identically() {
    let (tr, va) = split(4);
    let model_cfg = small_config(GraphScaleMode::Symmetry);
    let out = train(&model_cfg, &short(2), &tr, &va, &mut |_| {}).unwrap();
    let before = evaluate(&out.model, &out.best, &va, Default::default(), 4).unwrap();
    let mut store = ParamStore::<f32>::new();
    let model = Model::build(&model_cfg, &mut store, 123).unwrap();
    store.load_checkpoint(&write_checkpoint(&out.best)).unwrap();
    let after = evaluate(&model, &store, &va, Default::default(), 4).unwrap();
    assert_eq!(before, after);
    assert_eq!(before.top1, out.best_top1);
}

#[test]
fn symmetry_logits_ignore_person_order() {
    let model_cfg = ModelConfig {
        strategy: LabelingStrategy::Geometric,
        ..small_config(GraphScaleMode::Symmetry)
    };
    let mut store = ParamStore::<f32>::new();
    let model = Model::build(&model_cfg, &mut store, 5).unwrap();
    let samples: Vec<SkeletonSequence> = make_toy_dataset(2, 4, 2);
    let swapped: Vec<SkeletonSequence> = samples
        .iter()
        .map(|s| {
            let mut t = s.clone();
            for c in 0..s.channels() {
                for f in 0..s.frames() {
                    for n in 0..s.joints() {
                        t.set(c, f, 0, n, s.get(c, f, 1, n));
                        t.set(c, f, 1, n, s.get(c, f, 0, n));
                    }
                }
            }
            t
        })
        .collect();
    let logits = |set: &[SkeletonSequence]| {
        let prepared = PreparedSplit::new(set, &model_cfg, Default::default()).unwrap();
        let input = model.prepare::<f32>(&prepared.bundles).unwrap();
        let tape = Tape::inference();
        let ctx = Ctx::new(&tape, &store, false);
        let y = model.forward(&ctx, &input).unwrap();
        tape.value(y)
    };
    let (a, b) = (logits(&samples), logits(&swapped));
    let worst = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0f32, f32::max);
    assert!(worst < 1e-5, "{worst}");
}

#[test]
fn features_shape_through_model() {
    let cfg = small_config(GraphScaleMode::Baseline);
    let mut store = ParamStore::<f32>::new();
    let model = Model::build(&cfg, &mut store, 0).unwrap();
    let topo = cfg.topology();
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
    let bundles: Vec<_> = make_toy_dataset(0, 4, 1)
        .iter()
        .map(|s| {
            let s = pgcn_core::train::condition_sequence(s, &cfg, Default::default()).unwrap();
            build_features(&s, &topo, cfg.mode, &mut rng, Phase::Eval).unwrap()
        })
        .collect();
    assert_eq!(bundles[0].joint.shape(), &[6, 16, 2, 25]);
    let input = model.prepare::<f32>(&bundles).unwrap();
    let tape = Tape::inference();
    let ctx = Ctx::new(&tape, &store, false);
    assert_eq!(tape.value(model.forward_graphs(&ctx, &input).unwrap()).shape(), &[8, 4]);
    assert_eq!(tape.value(model.forward(&ctx, &input).unwrap()).shape(), &[4, 4]);
}
