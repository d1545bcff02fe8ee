use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::skeleton_io::SkeletonSequence;

use super::partition::{hop_partition, normalize};
use super::topology::SkeletonTopology;
use super::GraphError;

/// Edge rule for the two-person graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelingStrategy {
    Physical,
    Pairwise,
    Interactive,
    Geometric,
    #[serde(rename = "fc")]
    FullyConnected,
    OnlyPairwise,
}

impl LabelingStrategy {
    pub const ALL: [LabelingStrategy; 6] = [
        LabelingStrategy::Physical,
        LabelingStrategy::Pairwise,
        LabelingStrategy::Interactive,
        LabelingStrategy::Geometric,
        LabelingStrategy::FullyConnected,
        LabelingStrategy::OnlyPairwise,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LabelingStrategy::Physical => "physical",
            LabelingStrategy::Pairwise => "pairwise",
            LabelingStrategy::Interactive => "interactive",
            LabelingStrategy::Geometric => "geometric",
            LabelingStrategy::FullyConnected => "fc",
            LabelingStrategy::OnlyPairwise => "onlypairwise",
        }
    }

    /// Whether the adjacency depends on the sample's coordinates.
    pub fn is_data_dependent(self) -> bool {
        self == LabelingStrategy::Geometric
    }
}

impl std::fmt::Display for LabelingStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for LabelingStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.to_ascii_lowercase().replace(['-', '_'], "");
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s || (s == "fullyconnected" && *k == LabelingStrategy::FullyConnected))
            .ok_or_else(|| format!("unknown labeling strategy {s:?}"))
    }
}

/// Which inter-body hand pairs the interactive strategy links.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HandLinks {
    /// Left-left and right-right.
    #[default]
    SameSide,
    /// All four left/right combinations.
    AllPairs,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphOptions {
    pub max_hop: usize,
    pub hand_links: HandLinks,
    pub geometric_threshold: f64,
    /// Keep bone edges and the center link in geometric graphs even below threshold.
    pub keep_physical: bool,
}

impl Default for GraphOptions {
    fn default() -> Self {
        Self {
            max_hop: 2,
            hand_links: HandLinks::SameSide,
            geometric_threshold: 0.3,
            keep_physical: true,
        }
    }
}

/// A weighted undirected graph with its hop partition and normalised subsets.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledAdjacency {
    pub strategy: LabelingStrategy,
    /// `[V, V]`, symmetric, zero diagonal.
    pub a: Tensor<f64>,
    /// Hop distances on the support of `a`; `None` when unreachable.
    pub hops: Vec<Vec<Option<usize>>>,
    /// `K = max_hop + 1` subsets, each `[V, V]`.
    pub subsets: Vec<Tensor<f64>>,
    pub normalized: Vec<Tensor<f64>>,
}

impl LabeledAdjacency {
    pub fn from_matrix(strategy: LabelingStrategy, a: Tensor<f64>, max_hop: usize) -> Result<Self, GraphError> {
        let (hops, subsets) = hop_partition(&a, max_hop)?;
        let normalized = subsets.iter().map(normalize).collect();
        Ok(Self {
            strategy,
            a,
            hops,
            subsets,
            normalized,
        })
    }

    pub fn vertices(&self) -> usize {
        self.a.shape()[0]
    }

    pub fn subset_count(&self) -> usize {
        self.subsets.len()
    }

    /// Undirected edge count of `a`.
    pub fn edge_count(&self) -> usize {
        let v = self.vertices();
        let d = self.a.data();
        (0..v).map(|i| (i + 1..v).filter(|&j| d[i * v + j] != 0.0).count()).sum()
    }

    /// Normalised stack as one `[K, V, V]` tensor.
    pub fn stacked<T: crate::autodiff::Real>(&self) -> Tensor<T> {
        let v = self.vertices();
        let k = self.subset_count();
        let mut data = Vec::with_capacity(k * v * v);
        for m in &self.normalized {
            data.extend(m.data().iter().map(|&x| T::lit(x)));
        }
        Tensor::new(&[k, v, v], data).expect("square subsets")
    }

    pub fn to_json(&self) -> serde_json::Value {
        let v = self.vertices();
        let rows = |m: &Tensor<f64>| -> Vec<Vec<f64>> { m.data().chunks(v).map(|r| r.to_vec()).collect() };
        serde_json::json!({
            "strategy": self.strategy.name(),
            "V": v,
            "K": self.subset_count(),
            "matrices": self.normalized.iter().map(rows).collect::<Vec<_>>(),
            "adjacency": rows(&self.a),
        })
    }
}

fn link(a: &mut Tensor<f64>, i: usize, j: usize, w: f64) {
    a.set(&[i, j], w);
    a.set(&[j, i], w);
}

/// Structural edges (weight 1) for every non-geometric strategy; also the
/// physical skeleton used to seed geometric graphs.
fn structural(strategy: LabelingStrategy, topo: &SkeletonTopology, two_person: bool, opts: &GraphOptions) -> Tensor<f64> {
    let n = topo.joint_count;
    let persons = if two_person { 2 } else { 1 };
    let v = n * persons;
    let mut a = Tensor::zeros(&[v, v]);
    let bones = |a: &mut Tensor<f64>| {
        for p in 0..persons {
            for &(i, j) in &topo.bones {
                link(a, p * n + i, p * n + j, 1.0);
            }
        }
        if two_person {
            link(a, topo.center, n + topo.center, 1.0);
        }
    };
    match strategy {
        LabelingStrategy::Physical | LabelingStrategy::Geometric => bones(&mut a),
        LabelingStrategy::Pairwise => {
            bones(&mut a);
            if two_person {
                for i in 0..n {
                    link(&mut a, i, n + i, 1.0);
                }
            }
        }
        LabelingStrategy::Interactive => {
            bones(&mut a);
            let (l, r) = topo.hands;
            for p in 0..persons {
                link(&mut a, p * n + l, p * n + r, 1.0);
            }
            if two_person {
                link(&mut a, l, n + l, 1.0);
                link(&mut a, r, n + r, 1.0);
                if opts.hand_links == HandLinks::AllPairs {
                    link(&mut a, l, n + r, 1.0);
                    link(&mut a, r, n + l, 1.0);
                }
            }
        }
        LabelingStrategy::FullyConnected => {
            for i in 0..v {
                for j in 0..v {
                    if i != j {
                        a.set(&[i, j], 1.0);
                    }
                }
            }
        }
        LabelingStrategy::OnlyPairwise => {
            if two_person {
                for i in 0..n {
                    link(&mut a, i, n + i, 1.0);
                }
            }
        }
    }
    a
}

/// Mean Gaussian correlation `(1/T) Σ_t exp(-|x_i - x_j|^2 / C)` for every vertex pair of `coords` `[C, T, V]`.
pub fn geometric_weights(coords: &Tensor<f32>) -> Tensor<f64> {
    let s = coords.shape();
    let (c, t, v) = (s[0], s[1], s[2]);
    let x = coords.data();
    let mut a = Tensor::zeros(&[v, v]);
    let mut frame = vec![0.0f64; c * v];
    for ti in 0..t {
        for ci in 0..c {
            for vi in 0..v {
                frame[ci * v + vi] = x[(ci * t + ti) * v + vi] as f64;
            }
        }
        let out = a.data_mut();
        for i in 0..v {
            for j in i + 1..v {
                let d2: f64 = (0..c).map(|ci| (frame[ci * v + i] - frame[ci * v + j]).powi(2)).sum();
                out[i * v + j] += (-d2 / c as f64).exp();
            }
        }
    }
    let data = a.data_mut();
    for i in 0..v {
        for j in i + 1..v {
            let w = data[i * v + j] / t as f64;
            data[i * v + j] = w;
            data[j * v + i] = w;
        }
    }
    a
}

/// Vertex coordinates `[C, T, V]` for the graph built from `seq`: body 0, then body 1 when `two_person`.
pub fn graph_coordinates(seq: &SkeletonSequence, two_person: bool) -> Result<Tensor<f32>, GraphError> {
    let (c, t, m, n) = (seq.channels(), seq.frames(), seq.bodies(), seq.joints());
    let persons = if two_person { 2 } else { 1 };
    if m < persons {
        return Err(GraphError::ShapeMismatch(seq.data.shape().to_vec()));
    }
    let v = persons * n;
    Ok(Tensor::from_fn(&[c, t, v], |k| {
        let (ci, rest) = (k / (t * v), k % (t * v));
        let (ti, vi) = (rest / v, rest % v);
        seq.get(ci, ti, vi / n, vi % n)
    }))
}

/// Geometric adjacency from precomputed vertex coordinates `[C, T, V]`.
pub fn build_geometric(
    coords: &Tensor<f32>,
    topo: &SkeletonTopology,
    two_person: bool,
    opts: &GraphOptions,
) -> Result<LabeledAdjacency, GraphError> {
    topo.validate()?;
    let v = topo.joint_count * if two_person { 2 } else { 1 };
    if coords.rank() != 3 || coords.shape()[2] != v {
        return Err(GraphError::ShapeMismatch(coords.shape().to_vec()));
    }
    let mut a = geometric_weights(coords);
    let physical = structural(LabelingStrategy::Physical, topo, two_person, opts);
    let keep = physical.data();
    for (k, w) in a.data_mut().iter_mut().enumerate() {
        if *w < opts.geometric_threshold && !(opts.keep_physical && keep[k] != 0.0) {
            *w = 0.0;
        }
    }
    LabeledAdjacency::from_matrix(LabelingStrategy::Geometric, a, opts.max_hop)
}

/// Builds the labelled graph. `sequence` is required for [`LabelingStrategy::Geometric`]
/// and ignored otherwise; `two_person = false` yields a single-body graph with `V = N`.
pub fn build_adjacency(
    strategy: LabelingStrategy,
    topo: &SkeletonTopology,
    two_person: bool,
    sequence: Option<&SkeletonSequence>,
    opts: &GraphOptions,
) -> Result<LabeledAdjacency, GraphError> {
    topo.validate()?;
    if strategy == LabelingStrategy::Geometric {
        let seq = sequence.ok_or(GraphError::MissingSequence)?;
        if seq.joints() != topo.joint_count {
            return Err(GraphError::ShapeMismatch(seq.data.shape().to_vec()));
        }
        return build_geometric(&graph_coordinates(seq, two_person)?, topo, two_person, opts);
    }
    LabeledAdjacency::from_matrix(strategy, structural(strategy, topo, two_person, opts), opts.max_hop)
}

/// Vertex permutation exchanging the two bodies (`i <-> i + N`).
pub fn person_swap(n: usize) -> Vec<usize> {
    (0..2 * n).map(|i| (i + n) % (2 * n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skeleton_io::SampleMeta;

    fn opts() -> GraphOptions {
        GraphOptions::default()
    }

    fn ntu(strategy: LabelingStrategy) -> LabeledAdjacency {
        build_adjacency(strategy, &SkeletonTopology::ntu25(), true, None, &opts()).unwrap()
    }

    #[test]
    fn physical_ntu_has_49_edges() {
        let g = ntu(LabelingStrategy::Physical);
        assert_eq!(g.vertices(), 50);
        assert_eq!(g.edge_count(), 49);
        assert_eq!(g.a.at(&[1, 26]), 1.0);
    }

    #[test]
    fn only_pairwise_is_the_matching() {
        let g = ntu(LabelingStrategy::OnlyPairwise);
        assert_eq!(g.edge_count(), 25);
        for i in 0..25 {
            assert_eq!(g.a.at(&[i, i + 25]), 1.0);
        }
    }

    #[test]
    fn edge_counts_per_strategy() {
        assert_eq!(ntu(LabelingStrategy::Pairwise).edge_count(), 49 + 24);
        assert_eq!(ntu(LabelingStrategy::Interactive).edge_count(), 49 + 4);
        assert_eq!(ntu(LabelingStrategy::FullyConnected).edge_count(), 50 * 49 / 2);
        let all = GraphOptions {
            hand_links: HandLinks::AllPairs,
            ..opts()
        };
        let g = build_adjacency(LabelingStrategy::Interactive, &SkeletonTopology::ntu25(), true, None, &all).unwrap();
        assert_eq!(g.edge_count(), 49 + 6);
    }

    #[test]
    fn single_person_graph() {
        let g = build_adjacency(LabelingStrategy::Physical, &SkeletonTopology::sbu15(), false, None, &opts()).unwrap();
        assert_eq!(g.vertices(), 15);
        assert_eq!(g.edge_count(), 14);
    }

    #[test]
    fn geometric_requires_sequence() {
        let r = build_adjacency(LabelingStrategy::Geometric, &SkeletonTopology::ntu25(), true, None, &opts());
        assert!(matches!(r, Err(GraphError::MissingSequence)));
    }

    #[test]
    fn geometric_spot_values() {
        // two vertices, constant squared distance 3 ln 2 along x
        let d = (3.0f64 * 2f64.ln()).sqrt() as f32;
        let coords = Tensor::from_fn(&[3, 4, 3], |k| {
            let (c, v) = (k / 12, k % 3);
            if c == 0 && v == 1 {
                d
            } else {
                0.0
            }
        });
        let a = geometric_weights(&coords);
        let expect = (-(d as f64).powi(2) / 3.0).exp();
        assert!((a.at(&[0, 1]) - expect).abs() < 1e-15);
        assert!((expect - 0.5).abs() < 1e-7);
        assert_eq!(a.at(&[0, 2]), 1.0);
        assert_eq!(a.at(&[0, 0]), 0.0);
    }

    #[test]
    fn geometric_threshold_keeps_bones() {
        let topo = SkeletonTopology::sbu15();
        let mut seq = SkeletonSequence::zeros(3, 2, 2, 15, SampleMeta::default());
        for t in 0..2 {
            for j in 0..15 {
                seq.set(0, t, 0, j, j as f32 * 2.0);
                seq.set(0, t, 1, j, 5.0 + j as f32 * 2.0);
            }
        }
        let g = build_adjacency(LabelingStrategy::Geometric, &topo, true, Some(&seq), &opts()).unwrap();
        // joints 0 and 1 are a bone 2 units apart: exp(-4/3) < 0.3 but retained
        let w = g.a.at(&[0, 1]);
        assert!((w - (-4.0f64 / 3.0).exp()).abs() < 1e-12);
        // non-bone pair 4 units apart is dropped
        assert_eq!(g.a.at(&[0, 2]), 0.0);
        // center link retained at exp(-25/3)
        assert!((g.a.at(&[2, 17]) - (-25.0f64 / 3.0).exp()).abs() < 1e-12);
        let no_keep = GraphOptions {
            keep_physical: false,
            ..opts()
        };
        let g = build_adjacency(LabelingStrategy::Geometric, &topo, true, Some(&seq), &no_keep).unwrap();
        assert_eq!(g.a.at(&[0, 1]), 0.0);
    }

    #[test]
    fn a2_matches_boolean_matrix_power() {
        let g = ntu(LabelingStrategy::Physical);
        let v = g.vertices();
        let s = |i: usize, j: usize| g.a.at(&[i, j]) != 0.0;
        let mut expected = 0;
        for i in 0..v {
            for j in 0..v {
                let sq = (0..v).any(|k| s(i, k) && s(k, j));
                let want = sq && !s(i, j) && i != j;
                assert_eq!(g.subsets[2].at(&[i, j]) != 0.0, want, "pair ({i},{j})");
                expected += want as usize;
            }
        }
        assert!(expected > 0);
    }

    #[test]
    fn swap_symmetry_for_structural_strategies() {
        let perm = person_swap(25);
        for s in LabelingStrategy::ALL.into_iter().filter(|s| !s.is_data_dependent()) {
            let g = ntu(s);
            for i in 0..50 {
                for j in 0..50 {
                    assert_eq!(g.a.at(&[i, j]), g.a.at(&[perm[i], perm[j]]), "{s}");
                }
            }
        }
    }

    #[test]
    fn strategy_names_parse() {
        for s in LabelingStrategy::ALL {
            assert_eq!(s.name().parse::<LabelingStrategy>().unwrap(), s);
            let json = serde_json::to_string(&s).unwrap();
            assert_eq!(json, format!("\"{}\"", s.name()));
        }
        assert!("bogus".parse::<LabelingStrategy>().is_err());
    }

    #[test]
    fn json_export_shape() {
        let j = ntu(LabelingStrategy::Pairwise).to_json();
        assert_eq!(j["V"], 50);
        assert_eq!(j["K"], 3);
        assert_eq!(j["matrices"].as_array().unwrap().len(), 3);
        assert_eq!(j["matrices"][0][3][3], 1.0);
    }

    fn check_invariants(g: &LabeledAdjacency) {
        let v = g.vertices();
        assert_eq!(g.subsets[0], Tensor::eye(v));
        for i in 0..v {
            assert_eq!(g.a.at(&[i, i]), 0.0);
            for j in 0..v {
                let w = g.a.at(&[i, j]);
                assert_eq!(w, g.a.at(&[j, i]));
                assert!((0.0..=1.0).contains(&w));
                let owners = g.subsets.iter().filter(|m| m.at(&[i, j]) != 0.0).count();
                assert!(owners <= 1, "subsets overlap at ({i},{j})");
                for (d, m) in g.subsets.iter().enumerate().skip(1) {
                    assert_eq!(m.at(&[i, j]) != 0.0, g.hops[i][j] == Some(d));
                    if m.at(&[i, j]) != 0.0 && w != 0.0 {
                        assert_eq!(m.at(&[i, j]), w);
                    }
                }
                for n in &g.normalized {
                    assert_eq!(n.at(&[i, j]), n.at(&[j, i]));
                }
            }
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
        #[test]
        fn geometric_graphs_satisfy_invariants(seed in proptest::prelude::any::<u64>(), scale in 0.05f32..2.0) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let data = Tensor::from_fn(&[3, 6, 2, 15], |_| rng.gen_range(-scale..scale));
            let seq = SkeletonSequence::new(data, SampleMeta::default()).unwrap();
            let topo = SkeletonTopology::sbu15();
            let g = build_adjacency(LabelingStrategy::Geometric, &topo, true, Some(&seq), &opts()).unwrap();
            check_invariants(&g);
            let physical = ntu_like_physical(&topo);
            for i in 0..30 {
                for j in 0..30 {
                    let w = g.a.at(&[i, j]);
                    if w != 0.0 && physical.at(&[i, j]) == 0.0 {
                        proptest::prop_assert!((0.3..=1.0).contains(&w));
                    }
                }
            }
        }

        #[test]
        fn normalization_is_scale_invariant(seed in proptest::prelude::any::<u64>(), c in 0.01f64..100.0) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let v = 12;
            let mut a = Tensor::zeros(&[v, v]);
            for i in 0..v {
                for j in i + 1..v {
                    if rng.gen_bool(0.3) {
                        let w = rng.gen_range(0.0..1.0);
                        link(&mut a, i, j, w);
                    }
                }
            }
            let n1 = normalize(&a);
            let n2 = normalize(&a.map(|x| x * c));
            for (x, y) in n1.data().iter().zip(n2.data()) {
                proptest::prop_assert!((x - y).abs() < 1e-6);
            }
        }
    }

    fn ntu_like_physical(topo: &SkeletonTopology) -> Tensor<f64> {
        structural(LabelingStrategy::Physical, topo, true, &opts())
    }

    #[test]
    fn structural_strategies_satisfy_invariants() {
        for s in LabelingStrategy::ALL.into_iter().filter(|s| !s.is_data_dependent()) {
            for two in [true, false] {
                for topo in [SkeletonTopology::ntu25(), SkeletonTopology::sbu15()] {
                    check_invariants(&build_adjacency(s, &topo, two, None, &opts()).unwrap());
                }
            }
        }
    }
}
