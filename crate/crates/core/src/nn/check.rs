use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{grad_check, GradCheckConfig, GradCheckReport, ParamStore, Tape, Tensor, TensorError, Var};
use crate::features::{build_features, GraphScaleMode, Phase};
use crate::graph::{build_adjacency, GraphOptions, LabelingStrategy, SkeletonLayout, SkeletonTopology};
use crate::skeleton_io::{SampleMeta, SkeletonSequence};

use super::block::{Block, BlockSpec, TemporalKind};
use super::{Ctx, Model, ModelConfig, MsTcn, NnError, SgcLayer, StPartAtt};

/// Layer under a finite-difference gradient check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradComponent {
    Sgc,
    MsTcn,
    Attention,
    Block,
    Model,
}

impl GradComponent {
    pub const ALL: [GradComponent; 5] = [Self::Sgc, Self::MsTcn, Self::Attention, Self::Block, Self::Model];

    pub fn name(self) -> &'static str {
        match self {
            Self::Sgc => "sgc",
            Self::MsTcn => "mstcn",
            Self::Attention => "attention",
            Self::Block => "block",
            Self::Model => "model",
        }
    }
}

impl std::str::FromStr for GradComponent {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown component {s:?}"))
    }
}

fn unwrap_tensor(e: NnError) -> TensorError {
    match e {
        NnError::Tensor(t) => t,
        other => unreachable!("fixed check configurations are consistent: {other}"),
    }
}

fn random(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0))
}

/// `sum(y * w)` for a fixed random `w`, so every output entry reaches the loss with its own weight.
fn weighted_sum(tape: &Tape<f64>, y: Var, w: &Tensor<f64>) -> Result<Var, TensorError> {
    tape.sum_all(tape.mul(y, tape.constant(w.clone()))?)
}

/// Central finite-difference check of one component in f64 at tolerance 1e-4.
///
/// Graph layers run on the 30-vertex two-person SBU graph. The assembled model is
/// the narrow configuration on that graph with 8 frames and a cross-entropy loss.
pub fn check_component(component: GradComponent, seed: u64) -> Result<GradCheckReport, NnError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::<f64>::new();
    let topo = SkeletonTopology::sbu15();
    let parts = topo.vertex_parts(2);
    let v = parts.len();
    let adj = build_adjacency(LabelingStrategy::Interactive, &topo, true, None, &GraphOptions::default())
        .map_err(|e| NnError::ConfigMismatch(e.to_string()))?
        .stacked::<f64>();
    let full = GradCheckConfig::default();
    let report = match component {
        GradComponent::Sgc => {
            let layer = SgcLayer::new(&mut store, &mut rng, "sgc", 3, 4, 3, v, true);
            let (x, w) = (random(&mut rng, &[2, 3, 4, v]), random(&mut rng, &[2, 4, 4, v]));
            grad_check(
                |tape, store| {
                    let ctx = Ctx::new(tape, store, true);
                    let y = layer
                        .forward(&ctx, tape.constant(x.clone()), tape.constant(adj.clone()))
                        .map_err(unwrap_tensor)?;
                    weighted_sum(tape, y, &w)
                },
                &mut store,
                full,
            )?
        }
        GradComponent::MsTcn => {
            let layer = MsTcn::new(&mut store, &mut rng, "tcn", 8, 2)?;
            let (x, w) = (random(&mut rng, &[2, 8, 5, 3]), random(&mut rng, &[2, 8, 3, 3]));
            grad_check(
                |tape, store| {
                    let ctx = Ctx::new(tape, store, true);
                    let y = layer.forward(&ctx, tape.constant(x.clone())).map_err(unwrap_tensor)?;
                    weighted_sum(tape, y, &w)
                },
                &mut store,
                full,
            )?
        }
        GradComponent::Attention => {
            let layer = StPartAtt::new(&mut store, &mut rng, "att", 4, &parts)?;
            let (x, w) = (random(&mut rng, &[2, 4, 3, v]), random(&mut rng, &[2, 4, 3, v]));
            grad_check(
                |tape, store| {
                    let ctx = Ctx::new(tape, store, true);
                    let y = layer.forward(&ctx, tape.constant(x.clone())).map_err(unwrap_tensor)?;
                    weighted_sum(tape, y, &w)
                },
                &mut store,
                full,
            )?
        }
        GradComponent::Block => {
            let spec = BlockSpec {
                cin: 4,
                cout: 8,
                stride: 2,
                temporal: TemporalKind::MultiScale,
                subsets: 3,
                vertex_parts: &parts,
                edge_mask: true,
                attention: true,
            };
            let block = Block::new(&mut store, &mut rng, "block", &spec)?;
            let (x, w) = (random(&mut rng, &[2, 4, 4, v]), random(&mut rng, &[2, 8, 2, v]));
            grad_check(
                |tape, store| {
                    let ctx = Ctx::new(tape, store, true);
                    let y = block
                        .forward(&ctx, tape.constant(x.clone()), tape.constant(adj.clone()))
                        .map_err(unwrap_tensor)?;
                    weighted_sum(tape, y, &w)
                },
                &mut store,
                GradCheckConfig {
                    max_entries: Some(40),
                    ..full
                },
            )?
        }
        GradComponent::Model => {
            let cfg = ModelConfig {
                layout: SkeletonLayout::Sbu,
                mode: GraphScaleMode::Mutual,
                strategy: LabelingStrategy::Physical,
                frames: 8,
                ..ModelConfig::tiny(3)
            };
            let model = Model::build(&cfg, &mut store, seed)?;
            let mut bundles = Vec::new();
            for _ in 0..2 {
                let data = Tensor::from_fn(&[3, 8, 2, topo.joint_count], |_| rng.gen_range(-0.5f32..0.5));
                let seq = SkeletonSequence::new(data, SampleMeta::default()).map_err(|e| NnError::ConfigMismatch(e.to_string()))?;
                bundles.push(
                    build_features(&seq, &topo, cfg.mode, &mut rng, Phase::Eval)
                        .map_err(|e| NnError::ConfigMismatch(e.to_string()))?,
                );
            }
            let input = model.prepare::<f64>(&bundles)?;
            grad_check(
                |tape, store| {
                    let ctx = Ctx::new(tape, store, true);
                    let logits = model.forward(&ctx, &input).map_err(unwrap_tensor)?;
                    tape.cross_entropy(logits, &[0, 2])
                },
                &mut store,
                // many ReLU and max-pool kinks; a small step keeps each central difference on one side
                GradCheckConfig {
                    h: 1e-7,
                    max_entries: Some(6),
                    ..full
                },
            )?
        }
    };
    Ok(report)
}
