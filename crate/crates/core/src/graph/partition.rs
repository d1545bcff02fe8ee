use std::collections::VecDeque;

use crate::autodiff::Tensor;

use super::GraphError;

/// All-pairs hop counts on the unweighted support of `a` (breadth-first; `None` = unreachable).
pub fn hop_distances(a: &Tensor<f64>) -> Vec<Vec<Option<usize>>> {
    let v = a.shape()[0];
    let d = a.data();
    let neighbours: Vec<Vec<usize>> = (0..v)
        .map(|i| (0..v).filter(|&j| j != i && d[i * v + j] != 0.0).collect())
        .collect();
    (0..v)
        .map(|src| {
            let mut dist = vec![None; v];
            dist[src] = Some(0);
            let mut queue = VecDeque::from([src]);
            while let Some(u) = queue.pop_front() {
                let du = dist[u].unwrap();
                for &w in &neighbours[u] {
                    if dist[w].is_none() {
                        dist[w] = Some(du + 1);
                        queue.push_back(w);
                    }
                }
            }
            dist
        })
        .collect()
}

fn check_square_symmetric(a: &Tensor<f64>) -> Result<usize, GraphError> {
    let s = a.shape();
    if s.len() != 2 || s[0] != s[1] {
        return Err(GraphError::ShapeMismatch(s.to_vec()));
    }
    let v = s[0];
    for i in 0..v {
        for j in i + 1..v {
            if a.at(&[i, j]) != a.at(&[j, i]) {
                return Err(GraphError::NonSymmetric { i, j });
            }
        }
    }
    Ok(v)
}

/// Distance partition: `A_0 = I` and, for `1 <= d <= max_hop`, `A_d` keeps the
/// weights of `a` on pairs exactly `d` hops apart.
pub fn hop_partition(
    a: &Tensor<f64>,
    max_hop: usize,
) -> Result<(Vec<Vec<Option<usize>>>, Vec<Tensor<f64>>), GraphError> {
    let v = check_square_symmetric(a)?;
    if max_hop == 0 {
        return Err(GraphError::InvalidTopology("max hop must be at least 1".into()));
    }
    let hops = hop_distances(a);
    let mut subsets = vec![Tensor::eye(v)];
    for d in 1..=max_hop {
        let mut m = Tensor::zeros(&[v, v]);
        for i in 0..v {
            for j in 0..v {
                if hops[i][j] == Some(d) {
                    // hop-2+ pairs carry no direct weight in sparse labelings; use 1
                    let w = a.at(&[i, j]);
                    m.set(&[i, j], if w != 0.0 { w } else { 1.0 });
                }
            }
        }
        subsets.push(m);
    }
    Ok((hops, subsets))
}

/// Symmetric degree normalisation `L^{-1/2} A L^{-1/2}`; zero-degree rows stay zero.
pub fn normalize(a: &Tensor<f64>) -> Tensor<f64> {
    let v = a.shape()[0];
    let d = a.data();
    let inv: Vec<f64> = (0..v)
        .map(|i| {
            let deg: f64 = d[i * v..(i + 1) * v].iter().sum();
            if deg > 0.0 {
                1.0 / deg.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    Tensor::from_fn(&[v, v], |k| {
        let (i, j) = (k / v, k % v);
        d[k] * (inv[i] * inv[j])
    })
}
