use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{ParamId, ParamStore, Real, Tape, Tensor, Var};
use crate::graph::{hop_partition, normalize};

use super::layers::Conv;
use super::{Ctx, NnError};

/// Spatial graph convolution: per-subset joint aggregation followed by a
/// shared pointwise map over the stacked `K * C_in` channels, which is the
/// same as one `[C_in, C_out]` transform per subset summed over subsets.
#[derive(Clone, Debug)]
pub struct SgcLayer {
    pub conv: Conv,
    /// Learnable `[K, V, V]` edge importance, initialised to ones.
    pub mask: Option<ParamId>,
    pub subsets: usize,
    pub vertices: usize,
}

impl SgcLayer {
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        rng: &mut R,
        name: &str,
        cin: usize,
        cout: usize,
        subsets: usize,
        vertices: usize,
        edge_mask: bool,
    ) -> Self {
        let conv = Conv::pointwise(store, rng, &format!("{name}.conv"), subsets * cin, cout, 1);
        let mask = edge_mask
            .then(|| store.add(format!("{name}.edge_mask"), Tensor::ones(&[subsets, vertices, vertices]), true));
        Self {
            conv,
            mask,
            subsets,
            vertices,
        }
    }

    /// `x` is `[B, C_in, T, V]`; `adj` is the normalised stack `[K, V, V]` or `[B, K, V, V]`.
    pub fn forward<T: Real>(&self, ctx: &Ctx<'_, T>, x: Var, adj: Var) -> Result<Var, NnError> {
        let sa = ctx.tape.shape(adj);
        let tail = &sa[sa.len().saturating_sub(3)..];
        if tail != [self.subsets, self.vertices, self.vertices] {
            return Err(NnError::ConfigMismatch(format!(
                "adjacency {sa:?} for {} subsets over {} vertices",
                self.subsets, self.vertices
            )));
        }
        let adj = match self.mask {
            Some(m) => ctx.tape.mul(adj, ctx.param(m))?,
            None => adj,
        };
        let agg = ctx.tape.graph_aggregate(x, adj)?;
        Ok(self.conv.forward(ctx, agg)?)
    }

    /// Multiply-accumulates of aggregation plus channel map for `[*, C_in, t, V]` input.
    pub fn macs(&self, t: usize) -> u64 {
        let cin = self.conv.cin / self.subsets;
        (self.subsets * cin * t * self.vertices * self.vertices) as u64 + self.conv.macs(t, self.vertices)
    }
}

/// Vertex-neighbourhood form of the graph convolution, used as a test oracle.
///
/// For every vertex `i`, neighbours `j` with hop distance `d(i, j) <= max_hop`
/// are labelled by `d(i, j)`. Each contributes
/// `w_ij / sqrt(deg_d(i) deg_d(j)) * x_j W_d`, where `w_ij` is the raw edge
/// weight (1 for the self loop and for non-adjacent pairs) and `deg_d` sums
/// those weights over the vertex's label-`d` neighbours. Distances come from
/// Floyd-Warshall on the support of `a`. `weights[d]` is `[C_in, C_out]`;
/// `mask[d]`, when given, scales each coefficient.
pub fn sgc_reference(
    x: &Tensor<f64>,
    a: &Tensor<f64>,
    max_hop: usize,
    weights: &[Tensor<f64>],
    bias: &[f64],
    mask: Option<&[Tensor<f64>]>,
) -> Tensor<f64> {
    let s = x.shape();
    let (b, cin, t, v) = (s[0], s[1], s[2], s[3]);
    let cout = weights[0].shape()[1];

    let inf = usize::MAX / 4;
    let mut dist = vec![vec![inf; v]; v];
    for (i, row) in dist.iter_mut().enumerate() {
        row[i] = 0;
        for (j, d) in row.iter_mut().enumerate() {
            if i != j && a.at(&[i, j]) != 0.0 {
                *d = 1;
            }
        }
    }
    for k in 0..v {
        for i in 0..v {
            for j in 0..v {
                if dist[i][k] + dist[k][j] < dist[i][j] {
                    dist[i][j] = dist[i][k] + dist[k][j];
                }
            }
        }
    }
    let weight = |i: usize, j: usize| {
        let w = a.at(&[i, j]);
        if i == j || w == 0.0 {
            1.0
        } else {
            w
        }
    };
    let degree = |i: usize, d: usize| -> f64 { (0..v).filter(|&j| dist[i][j] == d).map(|j| weight(i, j)).sum() };

    let mut out = Tensor::zeros(&[b, cout, t, v]);
    for bi in 0..b {
        for ti in 0..t {
            for i in 0..v {
                for j in 0..v {
                    let d = dist[i][j];
                    if d > max_hop {
                        continue;
                    }
                    let mut coef = weight(i, j) / (degree(i, d) * degree(j, d)).sqrt();
                    if let Some(m) = mask {
                        coef *= m[d].at(&[i, j]);
                    }
                    for co in 0..cout {
                        let mut acc = 0.0;
                        for ci in 0..cin {
                            acc += x.at(&[bi, ci, ti, j]) * weights[d].at(&[ci, co]);
                        }
                        let cur = out.at(&[bi, co, ti, i]);
                        out.set(&[bi, co, ti, i], cur + coef * acc);
                    }
                }
                for (co, &bv) in bias.iter().enumerate() {
                    let cur = out.at(&[bi, co, ti, i]);
                    out.set(&[bi, co, ti, i], cur + bv);
                }
            }
        }
    }
    out
}

/// Symmetric random graph with unit or fractional edge weights.
pub fn random_graph(rng: &mut ChaCha8Rng, v: usize) -> Tensor<f64> {
    let mut a = Tensor::zeros(&[v, v]);
    for i in 0..v {
        for j in i + 1..v {
            if rng.gen_bool(0.35) {
                let w = if rng.gen_bool(0.5) { 1.0 } else { rng.gen_range(0.3..1.0) };
                a.set(&[i, j], w);
                a.set(&[j, i], w);
            }
        }
    }
    a
}

/// Hop partition of `a` at distance 2, each subset symmetrically normalised, as `[3, V, V]`.
pub fn stack_partition(a: &Tensor<f64>) -> Tensor<f64> {
    let (_, subsets) = hop_partition(a, 2).unwrap();
    let v = a.shape()[0];
    let mut data = Vec::new();
    for m in &subsets {
        data.extend_from_slice(normalize(m).data());
    }
    Tensor::new(&[3, v, v], data).unwrap()
}

/// Splits the stacked `[C_out, K*C_in, 1]` weight into per-subset `[C_in, C_out]` matrices.
fn per_subset(w: &Tensor<f64>, k: usize) -> Vec<Tensor<f64>> {
    let (cout, kc) = (w.shape()[0], w.shape()[1]);
    let cin = kc / k;
    (0..k)
        .map(|d| Tensor::from_fn(&[cin, cout], |idx| w.at(&[idx % cout, d * cin + idx / cout, 0])))
        .collect()
}

fn run_layer<T: Real>(layer: &SgcLayer, store: &ParamStore<T>, x: &Tensor<f64>, adj: &Tensor<f64>) -> Tensor<f64> {
    let tape = Tape::inference();
    let ctx = Ctx::new(&tape, store, false);
    let y = layer
        .forward(&ctx, tape.constant(x.cast()), tape.constant(adj.cast()))
        .unwrap();
    tape.value(y).cast()
}

/// Runs the layer against [`sgc_reference`] on `trials` random weighted graphs with
/// up to 12 vertices and returns the worst absolute error in f32 and in f64.
pub fn oracle_equivalence(seed: u64, trials: usize) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst32, mut worst64) = (0.0f64, 0.0f64);
    for trial in 0..trials {
        let v = rng.gen_range(1..=12);
        let (cin, cout, t, b) = (rng.gen_range(1..=4), rng.gen_range(1..=4), rng.gen_range(1..=3), 2);
        let a = random_graph(&mut rng, v);
        let mut store = ParamStore::<f64>::new();
        let layer = SgcLayer::new(&mut store, &mut rng, "sgc", cin, cout, 3, v, trial % 2 == 0);
        let bias: Vec<f64> = (0..cout).map(|_| rng.gen_range(-1.0..1.0)).collect();
        store.get_mut(layer.conv.bias).value = Tensor::new(&[cout], bias.clone()).expect("bias shape");
        let mask_t = layer.mask.map(|m| {
            let t = Tensor::from_fn(&[3, v, v], |_| rng.gen_range(0.5..1.5));
            store.get_mut(m).value = t.clone();
            (0..3)
                .map(|d| Tensor::new(&[v, v], t.data()[d * v * v..(d + 1) * v * v].to_vec()).expect("mask shape"))
                .collect::<Vec<_>>()
        });
        let x = Tensor::from_fn(&[b, cin, t, v], |_| rng.gen_range(-1.0..1.0));
        let w = per_subset(&store.get(layer.conv.weight).value, 3);
        let oracle = sgc_reference(&x, &a, 2, &w, &bias, mask_t.as_deref());
        let adj = stack_partition(&a);
        let y64 = run_layer(&layer, &store, &x, &adj);
        let y32 = run_layer(&layer, &store.cast::<f32>(), &x, &adj);
        for ((o, p), q) in oracle.data().iter().zip(y64.data()).zip(y32.data()) {
            worst64 = worst64.max((o - p).abs());
            worst32 = worst32.max((o - q).abs());
        }
    }
    (worst32, worst64)
}
