use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pgcn_core::autodiff::{ParamStore, Tape, TemporalWindow, Tensor};
use pgcn_core::features::{build_features, GraphScaleMode, Phase};
use pgcn_core::graph::{build_adjacency, geometric_weights, graph_coordinates, GraphOptions, LabelingStrategy, SkeletonTopology};
use pgcn_core::nn::{Ctx, Model, ModelConfig, SgcLayer};
use pgcn_core::skeleton_io::{parse_ntu_skeleton, write_ntu_skeleton, RawBodyFrame, RawJoint, NTU_JOINTS};
use pgcn_core::train::make_toy_dataset;

fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f32> {
    Tensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0))
}

fn conv_t(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut group = c.benchmark_group("conv_t");
    for &ch in &[16usize, 64] {
        let x = random(&mut rng, &[4, ch, 32, 50]);
        let w = random(&mut rng, &[ch, ch, 3]);
        group.bench_with_input(BenchmarkId::from_parameter(ch), &ch, |b, _| {
            b.iter(|| {
                let tape = Tape::inference();
                let y = tape.conv_t(tape.constant(x.clone()), tape.constant(w.clone()), None, TemporalWindow::same(3, 1, 1));
                black_box(tape.value(y.unwrap()));
            })
        });
    }
    group.finish();
}

fn sgc_forward_backward(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let topo = SkeletonTopology::ntu25();
    let adj = build_adjacency(LabelingStrategy::Interactive, &topo, true, None, &GraphOptions::default())
        .unwrap()
        .stacked::<f32>();
    let mut store = ParamStore::<f32>::new();
    let layer = SgcLayer::new(&mut store, &mut rng, "sgc", 32, 32, 3, 50, true);
    let x = random(&mut rng, &[4, 32, 32, 50]);
    c.bench_function("sgc_forward_backward", |b| {
        b.iter(|| {
            let tape = Tape::new();
            let ctx = Ctx::new(&tape, &store, true);
            let y = layer.forward(&ctx, tape.constant(x.clone()), tape.constant(adj.clone())).unwrap();
            let loss = tape.sum_all(y).unwrap();
            black_box(tape.gradients(loss).unwrap());
        })
    });
}

fn adjacency(c: &mut Criterion) {
    let topo = SkeletonTopology::ntu25();
    let seq = make_toy_dataset(0, 4, 1).remove(3);
    let coords = graph_coordinates(&seq, true).unwrap();
    c.bench_function("adjacency_interactive", |b| {
        b.iter(|| build_adjacency(LabelingStrategy::Interactive, &topo, true, None, &GraphOptions::default()).unwrap())
    });
    c.bench_function("adjacency_geometric", |b| {
        b.iter(|| build_adjacency(LabelingStrategy::Geometric, &topo, true, Some(&seq), &GraphOptions::default()).unwrap())
    });
    c.bench_function("geometric_weights_64x50", |b| b.iter(|| geometric_weights(black_box(&coords))));
}

fn features(c: &mut Criterion) {
    let topo = SkeletonTopology::ntu25();
    let seq = make_toy_dataset(0, 1, 1).remove(0);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    c.bench_function("features_symmetry", |b| {
        b.iter(|| build_features(&seq, &topo, GraphScaleMode::Symmetry, &mut rng, Phase::Eval).unwrap())
    });
}

fn parse_ntu(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let frames: Vec<Vec<RawBodyFrame>> = (0..100)
        .map(|_| {
            (0..2)
                .map(|id| RawBodyFrame {
                    body_id: 72057594037931101 + id,
                    joints: (0..NTU_JOINTS)
                        .map(|_| RawJoint {
                            position: [rng.gen(), rng.gen(), rng.gen()],
                            tracking_state: 2,
                        })
                        .collect(),
                })
                .collect()
        })
        .collect();
    let text = write_ntu_skeleton(&frames);
    c.bench_function("parse_ntu_100_frames", |b| b.iter(|| parse_ntu_skeleton(black_box(&text)).unwrap()));
}

fn tiny_model_step(c: &mut Criterion) {
    let cfg = ModelConfig {
        mode: GraphScaleMode::Mutual,
        strategy: LabelingStrategy::Interactive,
        ..ModelConfig::tiny(4)
    };
    let mut store = ParamStore::<f32>::new();
    let model = Model::build(&cfg, &mut store, 0).unwrap();
    let topo = cfg.topology();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let bundles: Vec<_> = make_toy_dataset(0, 4, 4)
        .iter()
        .map(|s| {
            let s = pgcn_core::skeleton_io::resample_temporal(s, cfg.frames, pgcn_core::skeleton_io::ResampleMode::Interpolate).unwrap();
            build_features(&s, &topo, cfg.mode, &mut rng, Phase::Eval).unwrap()
        })
        .collect();
    let input = model.prepare::<f32>(&bundles).unwrap();
    let labels: Vec<usize> = (0..16).map(|i| i % 4).collect();
    c.bench_function("tiny_model_train_step_b16", |b| {
        b.iter(|| {
            let tape = Tape::new();
            let ctx = Ctx::new(&tape, &store, true);
            let logits = model.forward(&ctx, &input).unwrap();
            let loss = tape.cross_entropy(logits, &labels).unwrap();
            black_box(tape.gradients(loss).unwrap());
        })
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = conv_t, sgc_forward_backward, adjacency, features, parse_ntu, tiny_model_step
}
criterion_main!(benches);
