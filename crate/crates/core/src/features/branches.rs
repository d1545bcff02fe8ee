use std::f64::consts::FRAC_PI_2;

use crate::autodiff::Tensor;
use crate::graph::SkeletonTopology;

use super::FeatureError;

fn dims(x: &Tensor<f32>, topo: &SkeletonTopology) -> Result<(usize, usize, usize, usize), FeatureError> {
    let s = x.shape();
    let n = topo.joint_count;
    if s.len() != 3 || s[2] == 0 || !s[2].is_multiple_of(n) {
        return Err(FeatureError::VertexCount {
            found: s.get(2).copied().unwrap_or(0),
            joints: n,
        });
    }
    Ok((s[0], s[1], s[2], n))
}

/// Raw coordinates followed by coordinates relative to each person's center joint.
pub fn joint_branch(x: &Tensor<f32>, topo: &SkeletonTopology) -> Result<Tensor<f32>, FeatureError> {
    let (c, t, v, n) = dims(x, topo)?;
    let d = x.data();
    let mut out = vec![0.0f32; 2 * c * t * v];
    for ci in 0..c {
        for ti in 0..t {
            let row = (ci * t + ti) * v;
            for vi in 0..v {
                let center = (vi / n) * n + topo.center;
                out[row + vi] = d[row + vi];
                out[c * t * v + row + vi] = d[row + vi] - d[row + center];
            }
        }
    }
    Ok(Tensor::new(&[2 * c, t, v], out).expect("sized"))
}

/// Bone vectors `x_i - x_parent(i)` (zero at the center) and the per-axis
/// angles `arccos(l_c / |l|)`; a zero-length bone gets `pi/2` on every axis.
pub fn bone_branch(x: &Tensor<f32>, topo: &SkeletonTopology) -> Result<Tensor<f32>, FeatureError> {
    let (c, t, v, _) = dims(x, topo)?;
    let bones = bone_vectors(x, topo)?;
    let l = bones.data();
    let mut out = vec![0.0f32; 2 * c * t * v];
    out[..c * t * v].copy_from_slice(l);
    for ti in 0..t {
        for vi in 0..v {
            let at = |ci: usize| (ci * t + ti) * v + vi;
            let norm = (0..c).map(|ci| (l[at(ci)] as f64).powi(2)).sum::<f64>().sqrt();
            for ci in 0..c {
                let theta = if norm > 0.0 {
                    (l[at(ci)] as f64 / norm).clamp(-1.0, 1.0).acos()
                } else {
                    FRAC_PI_2
                };
                out[c * t * v + at(ci)] = theta as f32;
            }
        }
    }
    Ok(Tensor::new(&[2 * c, t, v], out).expect("sized"))
}

/// Bone vectors `[C, T, V]`, each joint minus its parent toward the center.
pub fn bone_vectors(x: &Tensor<f32>, topo: &SkeletonTopology) -> Result<Tensor<f32>, FeatureError> {
    let (c, t, v, n) = dims(x, topo)?;
    let parents = topo.parents();
    let d = x.data();
    Ok(Tensor::from_fn(&[c, t, v], |k| {
        let vi = k % v;
        let row = k - vi;
        match parents[vi % n] {
            Some(p) => d[k] - d[row + (vi / n) * n + p],
            None => 0.0,
        }
    }))
}

/// Velocity and acceleration of a `[C', T, V]` stream, concatenated on the channel axis.
/// Frame 0 carries the stream value itself in both halves.
pub fn motion_branch(stream: &Tensor<f32>) -> Tensor<f32> {
    let s = stream.shape();
    let (c, t, v) = (s[0], s[1], s[2]);
    let d = stream.data();
    let mut out = vec![0.0f32; 2 * c * t * v];
    let (vel, acc) = out.split_at_mut(c * t * v);
    for ci in 0..c {
        for ti in 0..t {
            for vi in 0..v {
                let k = (ci * t + ti) * v + vi;
                if ti == 0 {
                    vel[k] = d[k];
                    acc[k] = d[k];
                } else {
                    vel[k] = d[k] - d[k - v];
                    acc[k] = vel[k] - vel[k - v];
                }
            }
        }
    }
    Tensor::new(&[2 * c, t, v], out).expect("sized")
}
