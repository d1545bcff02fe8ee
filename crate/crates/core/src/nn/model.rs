use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamStore, Real, Tensor, Var};
use crate::features::{FeatureBundle, GraphScaleMode};
use crate::graph::{build_adjacency, build_geometric, GraphOptions, LabelingStrategy, SkeletonLayout, SkeletonTopology};
use crate::skeleton_io::BranchTag;

use super::block::{Block, BlockSpec, TemporalKind};
use super::layers::Linear;
use super::{Ctx, NnError};

/// Where geometric adjacencies are averaged.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometricScope {
    /// One adjacency per graph, from that graph's own coordinates.
    #[default]
    PerSample,
    /// One adjacency per batch, from the batch-mean coordinates.
    PerBatch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub num_classes: usize,
    pub layout: SkeletonLayout,
    /// Coordinate channels `C` of the raw skeleton; every input stream has `2C`.
    pub coord_channels: usize,
    pub strategy: LabelingStrategy,
    pub mode: GraphScaleMode,
    pub graph: GraphOptions,
    pub geometric_scope: GeometricScope,
    /// `(C_in, C_out)` of each block in every input branch.
    pub input_plan: Vec<(usize, usize)>,
    /// `(C_in, C_out)` of each main-branch block.
    pub main_plan: Vec<(usize, usize)>,
    /// Temporal stride of each main-branch block.
    pub main_strides: Vec<usize>,
    pub attention: bool,
    pub edge_mask: bool,
    /// Frame count assumed by [`Model::estimate_flops`] and by preprocessing.
    pub frames: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::full(11)
    }
}

impl ModelConfig {
    /// Full-size network: input branches 6-64, 64-64, 64-32 and main branch
    /// 128-128 x3, 128-256, 256-256 x2 with stride 2 at main blocks 1 and 4.
    pub fn full(num_classes: usize) -> Self {
        Self {
            num_classes,
            layout: SkeletonLayout::Ntu,
            coord_channels: 3,
            strategy: LabelingStrategy::Geometric,
            mode: GraphScaleMode::Symmetry,
            graph: GraphOptions::default(),
            geometric_scope: GeometricScope::PerSample,
            input_plan: vec![(6, 64), (64, 64), (64, 32)],
            main_plan: vec![(128, 128), (128, 128), (128, 128), (128, 256), (256, 256), (256, 256)],
            main_strides: vec![2, 1, 1, 2, 1, 1],
            attention: true,
            edge_mask: true,
            frames: 64,
        }
    }

    /// Narrow variant with the same topology, for CPU-scale experiments and tests.
    pub fn tiny(num_classes: usize) -> Self {
        Self {
            input_plan: vec![(6, 8), (8, 8), (8, 4)],
            main_plan: vec![(16, 16), (16, 32)],
            main_strides: vec![2, 2],
            frames: 32,
            ..Self::full(num_classes)
        }
    }

    pub fn topology(&self) -> SkeletonTopology {
        self.layout.topology()
    }

    pub fn vertices(&self) -> usize {
        self.mode.vertices(self.topology().joint_count)
    }

    pub fn validate(&self) -> Result<(), NnError> {
        let bad = |m: String| Err(NnError::ConfigMismatch(m));
        if self.num_classes == 0 {
            return bad("num_classes must be positive".into());
        }
        if self.input_plan.is_empty() || self.main_plan.is_empty() {
            return bad("channel plans must be non-empty".into());
        }
        if self.input_plan[0].0 != 2 * self.coord_channels {
            return bad(format!(
                "first input block takes {} channels, streams carry {}",
                self.input_plan[0].0,
                2 * self.coord_channels
            ));
        }
        for plan in [&self.input_plan, &self.main_plan] {
            for w in plan.windows(2) {
                if w[0].1 != w[1].0 {
                    return bad(format!("channel plan breaks between {:?} and {:?}", w[0], w[1]));
                }
            }
        }
        let fused = 4 * self.input_plan.last().unwrap().1;
        if fused != self.main_plan[0].0 {
            return bad(format!("4 branches give {fused} channels, main branch expects {}", self.main_plan[0].0));
        }
        if self.main_strides.len() != self.main_plan.len() || self.main_strides.contains(&0) {
            return bad("one positive stride per main block required".into());
        }
        let multiscale = self.input_plan.iter().skip(1).chain(&self.main_plan);
        if let Some(&(_, c)) = multiscale.clone().find(|&&(_, c)| c % 4 != 0) {
            return bad(format!("multi-scale blocks need channels divisible by 4, got {c}"));
        }
        if self.frames == 0 {
            return bad("frames must be positive".into());
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, NnError> {
        let c: Self = serde_json::from_str(text).map_err(|e| NnError::ConfigMismatch(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }
}

/// Adjacency fed to every graph convolution.
#[derive(Clone, Debug, PartialEq)]
pub enum AdjacencyInput<T> {
    /// `[K, V, V]` shared by the whole batch.
    Shared(Tensor<T>),
    /// `[B*G, K, V, V]`, one per graph.
    PerGraph(Tensor<T>),
}

/// A batch ready for the network: four streams `[B*G, 2C, T, V]`, graph-major within each sample.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelInput<T> {
    pub streams: [Tensor<T>; 4],
    pub graphs: usize,
    pub adjacency: AdjacencyInput<T>,
}

impl<T: Real> ModelInput<T> {
    pub fn batch_size(&self) -> usize {
        self.streams[0].shape()[0] / self.graphs
    }
}

/// The four-branch two-person graph network.
#[derive(Clone, Debug)]
pub struct Model {
    pub config: ModelConfig,
    branches: Vec<Vec<Block>>,
    main: Vec<Block>,
    head: Linear,
    /// Normalised `[K, V, V]` stack for data-independent strategies.
    fixed_adjacency: Option<Tensor<f64>>,
}

impl Model {
    pub fn build<T: Real>(config: &ModelConfig, store: &mut ParamStore<T>, seed: u64) -> Result<Self, NnError> {
        config.validate()?;
        let topo = config.topology();
        let two_person = config.mode.two_person();
        let parts = topo.vertex_parts(if two_person { 2 } else { 1 });
        let subsets = config.graph.max_hop + 1;
        let fixed_adjacency = if config.strategy.is_data_dependent() {
            None
        } else {
            let g = build_adjacency(config.strategy, &topo, two_person, None, &config.graph)
                .map_err(|e| NnError::ConfigMismatch(e.to_string()))?;
            Some(g.stacked::<f64>())
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = |cin, cout, stride, temporal| BlockSpec {
            cin,
            cout,
            stride,
            temporal,
            subsets,
            vertex_parts: &parts,
            edge_mask: config.edge_mask,
            attention: config.attention,
        };
        let mut branches = Vec::with_capacity(4);
        for tag in BranchTag::ALL {
            let mut blocks = Vec::with_capacity(config.input_plan.len());
            for (i, &(cin, cout)) in config.input_plan.iter().enumerate() {
                let kind = if i == 0 { TemporalKind::Standard } else { TemporalKind::MultiScale };
                let name = format!("input.{}.{i}", tag.short_name());
                blocks.push(Block::new(store, &mut rng, &name, &spec(cin, cout, 1, kind))?);
            }
            branches.push(blocks);
        }
        let mut main = Vec::with_capacity(config.main_plan.len());
        for (i, (&(cin, cout), &stride)) in config.main_plan.iter().zip(&config.main_strides).enumerate() {
            main.push(Block::new(store, &mut rng, &format!("main.{i}"), &spec(cin, cout, stride, TemporalKind::MultiScale))?);
        }
        let width = config.main_plan.last().unwrap().1;
        let head = Linear::new(store, &mut rng, "head", width, config.num_classes);
        Ok(Self {
            config: config.clone(),
            branches,
            main,
            head,
            fixed_adjacency,
        })
    }

    /// Stacks preprocessed samples into a batch and builds the matching adjacency.
    pub fn prepare<T: Real>(&self, bundles: &[FeatureBundle]) -> Result<ModelInput<T>, NnError> {
        let first = bundles
            .first()
            .ok_or_else(|| NnError::ConfigMismatch("empty batch".into()))?;
        let (g, v) = (first.graphs_per_sample, self.config.vertices());
        let shape = first.joint.shape().to_vec();
        if shape[0] != 2 * self.config.coord_channels || shape[2] != self.config.mode.graphs_per_sample() || shape[3] != v {
            return Err(NnError::ConfigMismatch(format!(
                "stream shape {shape:?} does not match {} channels, {} graphs of {v} vertices",
                2 * self.config.coord_channels,
                self.config.mode.graphs_per_sample()
            )));
        }
        if bundles.iter().any(|b| b.joint.shape() != shape.as_slice()) {
            return Err(NnError::ConfigMismatch("samples in a batch differ in shape".into()));
        }
        let (c2, t) = (shape[0], shape[1]);
        let per_graph = c2 * t * v;
        let streams = BranchTag::ALL.map(|tag| {
            let mut data = Vec::with_capacity(bundles.len() * g * per_graph);
            for b in bundles {
                for gi in 0..g {
                    data.extend(b.graph_stream(tag, gi).data().iter().map(|&x| T::lit(x as f64)));
                }
            }
            Tensor::new(&[bundles.len() * g, c2, t, v], data).expect("sized")
        });
        let adjacency = match &self.fixed_adjacency {
            Some(a) => AdjacencyInput::Shared(a.cast()),
            None => self.geometric_adjacency(bundles)?,
        };
        Ok(ModelInput {
            streams,
            graphs: g,
            adjacency,
        })
    }

    fn geometric_adjacency<T: Real>(&self, bundles: &[FeatureBundle]) -> Result<AdjacencyInput<T>, NnError> {
        let topo = self.config.topology();
        let two = self.config.mode.two_person();
        let build = |coords: &Tensor<f32>| -> Result<Tensor<T>, NnError> {
            Ok(build_geometric(coords, &topo, two, &self.config.graph)
                .map_err(|e| NnError::ConfigMismatch(e.to_string()))?
                .stacked())
        };
        match self.config.geometric_scope {
            GeometricScope::PerSample => {
                let mut data = Vec::new();
                let mut k_shape = Vec::new();
                for b in bundles {
                    for gi in 0..b.graphs_per_sample {
                        let a = build(&b.coordinates(gi))?;
                        k_shape = a.shape().to_vec();
                        data.extend_from_slice(a.data());
                    }
                }
                let mut shape = vec![data.len() / k_shape.iter().product::<usize>()];
                shape.extend(k_shape);
                Ok(AdjacencyInput::PerGraph(Tensor::new(&shape, data).expect("sized")))
            }
            GeometricScope::PerBatch => {
                let mut mean = bundles[0].coordinates(0).map(|_| 0.0f32);
                let mut n = 0.0f32;
                for b in bundles {
                    for gi in 0..b.graphs_per_sample {
                        mean.add_assign(&b.coordinates(gi));
                        n += 1.0;
                    }
                }
                Ok(AdjacencyInput::Shared(build(&mean.map(|x| x / n))?))
            }
        }
    }

    /// Logits `[B*G, num_classes]`, one row per graph.
    pub fn forward_graphs<T: Real>(&self, ctx: &Ctx<'_, T>, input: &ModelInput<T>) -> Result<Var, NnError> {
        let tape = ctx.tape;
        let adj = match &input.adjacency {
            AdjacencyInput::Shared(a) | AdjacencyInput::PerGraph(a) => tape.constant(a.clone()),
        };
        let mut fused = Vec::with_capacity(4);
        for (blocks, stream) in self.branches.iter().zip(&input.streams) {
            let mut h = tape.constant(stream.clone());
            for b in blocks {
                h = b.forward(ctx, h, adj)?;
            }
            fused.push(h);
        }
        let mut h = tape.concat(&fused, 1)?;
        for b in &self.main {
            h = b.forward(ctx, h, adj)?;
        }
        let s = tape.shape(h);
        let pooled = tape.mean_axis(tape.mean_axis(h, 3)?, 2)?;
        let features = tape.reshape(pooled, &[s[0], s[1]])?;
        Ok(self.head.forward(ctx, features)?)
    }

    /// Logits `[B, num_classes]`: the mean of each sample's per-graph logits.
    pub fn forward<T: Real>(&self, ctx: &Ctx<'_, T>, input: &ModelInput<T>) -> Result<Var, NnError> {
        let tape = ctx.tape;
        let logits = self.forward_graphs(ctx, input)?;
        if input.graphs == 1 {
            return Ok(logits);
        }
        let b = input.batch_size();
        let k = self.config.num_classes;
        let grouped = tape.reshape(logits, &[b, input.graphs, k])?;
        Ok(tape.reshape(tape.mean_axis(grouped, 1)?, &[b, k])?)
    }

    /// Floating-point operations (2 x multiply-accumulates) of one sample's forward pass,
    /// counting convolutions, graph aggregation, attention and the classifier.
    pub fn estimate_flops(&self, frames: usize) -> u64 {
        let mut macs = 0u64;
        for blocks in &self.branches {
            let mut t = frames;
            for b in blocks {
                macs += b.macs(t);
                t = t.div_ceil(b.stride);
            }
        }
        let mut t = frames;
        for b in &self.main {
            macs += b.macs(t);
            t = t.div_ceil(b.stride);
        }
        macs += (self.head.fan_in * self.head.fan_out) as u64;
        2 * macs * self.config.mode.graphs_per_sample() as u64
    }

    pub fn blocks(&self) -> impl Iterator<Item = &Block> {
        self.branches.iter().flatten().chain(&self.main)
    }
}

/// Trainable scalar count of a store.
pub fn count_params<T: Real>(store: &ParamStore<T>) -> usize {
    store.count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{grad_check, GradCheckConfig, Tape};
    use crate::features::{build_features, Phase};
    use crate::skeleton_io::{SampleMeta, SkeletonSequence};
    use rand::Rng;

    fn sample(seed: u64, t: usize, n: usize) -> SkeletonSequence {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = Tensor::from_fn(&[3, t, 2, n], |_| rng.gen_range(-0.5f32..0.5));
        SkeletonSequence::new(data, SampleMeta::default()).unwrap()
    }

    fn bundle(cfg: &ModelConfig, seq: &SkeletonSequence) -> FeatureBundle {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        build_features(seq, &cfg.topology(), cfg.mode, &mut rng, Phase::Eval).unwrap()
    }

    #[test]
    fn full_config_param_count_in_range() {
        let mut store = ParamStore::<f32>::new();
        Model::build(&ModelConfig::full(11), &mut store, 0).unwrap();
        let n = count_params(&store);
        assert!((1_320_000..=1_620_000).contains(&n), "{n}");
    }

    #[test]
    fn symmetry_flops_double_mutual() {
        let mut cfg = ModelConfig::full(11);
        let mut flops = |mode| {
            cfg.mode = mode;
            let mut store = ParamStore::<f32>::new();
            Model::build(&cfg, &mut store, 0).unwrap().estimate_flops(64)
        };
        let (mutual, sym) = (flops(GraphScaleMode::Mutual), flops(GraphScaleMode::Symmetry));
        assert_eq!(sym, 2 * mutual);
    }

    #[test]
    fn full_forward_shape_and_zero_input() {
        let mut cfg = ModelConfig::full(11);
        cfg.mode = GraphScaleMode::Mutual;
        cfg.strategy = LabelingStrategy::Interactive;
        let mut store = ParamStore::<f32>::new();
        let model = Model::build(&cfg, &mut store, 1).unwrap();
        let seqs = [sample(1, 64, 25), SkeletonSequence::zeros(3, 64, 2, 25, SampleMeta::default())];
        let bundles: Vec<_> = seqs.iter().map(|s| bundle(&cfg, s)).collect();
        let input = model.prepare::<f32>(&bundles).unwrap();
        let tape = Tape::inference();
        let ctx = Ctx::new(&tape, &store, false);
        let logits = tape.value(model.forward(&ctx, &input).unwrap());
        assert_eq!(logits.shape(), &[2, 11]);
        assert!(logits.all_finite());
    }

    #[test]
    fn symmetry_prediction_ignores_person_order() {
        let mut cfg = ModelConfig::tiny(5);
        cfg.strategy = LabelingStrategy::Interactive;
        let mut store = ParamStore::<f64>::new();
        let model = Model::build(&cfg, &mut store, 2).unwrap();
        let seq = sample(4, 12, 25);
        let mut swapped = seq.clone();
        for c in 0..3 {
            for t in 0..12 {
                for j in 0..25 {
                    swapped.set(c, t, 0, j, seq.get(c, t, 1, j));
                    swapped.set(c, t, 1, j, seq.get(c, t, 0, j));
                }
            }
        }
        let tape = Tape::inference();
        let ctx = Ctx::new(&tape, &store, false);
        let run = |s: &SkeletonSequence| {
            let input = model.prepare::<f64>(&[bundle(&cfg, s)]).unwrap();
            tape.value(model.forward(&ctx, &input).unwrap())
        };
        let (a, b) = (run(&seq), run(&swapped));
        for (p, q) in a.data().iter().zip(b.data()) {
            assert!((p - q).abs() < 1e-5);
        }
    }

    #[test]
    fn geometric_batches_get_per_graph_adjacency() {
        let cfg = ModelConfig::tiny(3);
        let mut store = ParamStore::<f32>::new();
        let model = Model::build(&cfg, &mut store, 0).unwrap();
        let bundles: Vec<_> = (0..3).map(|i| bundle(&cfg, &sample(i, 8, 25))).collect();
        let input = model.prepare::<f32>(&bundles).unwrap();
        match &input.adjacency {
            AdjacencyInput::PerGraph(a) => assert_eq!(a.shape(), &[6, 3, 50, 50]),
            other => panic!("unexpected {other:?}"),
        }
        let mut batch_cfg = cfg.clone();
        batch_cfg.geometric_scope = GeometricScope::PerBatch;
        let model = Model::build(&batch_cfg, &mut ParamStore::<f32>::new(), 0).unwrap();
        assert!(matches!(model.prepare::<f32>(&bundles).unwrap().adjacency, AdjacencyInput::Shared(_)));
    }

    #[test]
    fn config_validation() {
        let mut cfg = ModelConfig::full(11);
        cfg.main_plan[0].0 = 120;
        assert!(cfg.validate().is_err());
        let json = serde_json::to_string(&ModelConfig::tiny(4)).unwrap();
        assert_eq!(ModelConfig::from_json(&json).unwrap(), ModelConfig::tiny(4));
        assert!(ModelConfig::from_json(r#"{"num_classes": 0}"#).is_err());
    }

    #[test]
    fn tiny_model_gradients_match_finite_differences() {
        let topo_joints = 15;
        let mut cfg = ModelConfig::tiny(3);
        cfg.layout = SkeletonLayout::Sbu;
        cfg.mode = GraphScaleMode::Mutual;
        cfg.strategy = LabelingStrategy::Physical;
        let mut store = ParamStore::<f64>::new();
        let model = Model::build(&cfg, &mut store, 3).unwrap();
        let bundles: Vec<_> = (0..2).map(|i| bundle(&cfg, &sample(10 + i, 6, topo_joints))).collect();
        let input = model.prepare::<f64>(&bundles).unwrap();
        let report = grad_check(
            |tape, store| {
                let ctx = Ctx::new(tape, store, true);
                let logits = model.forward(&ctx, &input).map_err(|e| match e {
                    NnError::Tensor(t) => t,
                    other => panic!("{other}"),
                })?;
                tape.cross_entropy(logits, &[0, 2])
            },
            &mut store,
            GradCheckConfig {
                max_entries: Some(6),
                // many ReLU and max-pool kinks; a small step keeps the central difference on one side
                h: 1e-7,
                ..GradCheckConfig::default()
            },
        )
        .unwrap();
        assert!(report.passed(), "{:?}", report.failures().collect::<Vec<_>>());
    }
}
