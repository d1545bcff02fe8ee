use serde::{Deserialize, Serialize};

use super::GraphError;

pub const PART_COUNT: usize = 5;

/// Joint layouts with a built-in topology table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SkeletonLayout {
    Ntu,
    Sbu,
}

impl SkeletonLayout {
    pub fn topology(self) -> SkeletonTopology {
        match self {
            SkeletonLayout::Ntu => SkeletonTopology::ntu25(),
            SkeletonLayout::Sbu => SkeletonTopology::sbu15(),
        }
    }
}

/// Single-body joint graph with body-part and hand annotations.
///
/// Part ids: 0 torso, 1 left arm, 2 right arm, 3 left leg, 4 right leg.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkeletonTopology {
    pub joint_count: usize,
    pub bones: Vec<(usize, usize)>,
    pub center: usize,
    pub parts: Vec<usize>,
    /// (left, right) hand joints used by interactive labeling.
    pub hands: (usize, usize),
    /// Lateral axis used by the mirror skeleton.
    pub lateral_axis: usize,
}

impl SkeletonTopology {
    /// Kinect v2 25-joint layout (0-based):
    /// 0 spine base, 1 spine mid, 2 neck, 3 head, 4-7 left shoulder/elbow/wrist/hand,
    /// 8-11 right shoulder/elbow/wrist/hand, 12-15 left hip/knee/ankle/foot,
    /// 16-19 right hip/knee/ankle/foot, 20 spine shoulder, 21 left hand tip,
    /// 22 left thumb, 23 right hand tip, 24 right thumb.
    pub fn ntu25() -> Self {
        let bones = vec![
            (0, 1), (1, 20), (2, 20), (3, 2), (4, 20), (5, 4), (6, 5), (7, 6),
            (8, 20), (9, 8), (10, 9), (11, 10), (12, 0), (13, 12), (14, 13), (15, 14),
            (16, 0), (17, 16), (18, 17), (19, 18), (21, 22), (22, 7), (23, 24), (24, 11),
        ];
        let mut parts = vec![0; 25];
        for j in [4, 5, 6, 7, 21, 22] {
            parts[j] = 1;
        }
        for j in [8, 9, 10, 11, 23, 24] {
            parts[j] = 2;
        }
        for j in 12..16 {
            parts[j] = 3;
        }
        for j in 16..20 {
            parts[j] = 4;
        }
        Self {
            joint_count: 25,
            bones,
            center: 1,
            parts,
            hands: (7, 11),
            lateral_axis: 0,
        }
    }

    /// SBU 15-joint layout (0-based):
    /// 0 head, 1 neck, 2 torso, 3-5 left shoulder/elbow/hand, 6-8 right shoulder/elbow/hand,
    /// 9-11 left hip/knee/foot, 12-14 right hip/knee/foot.
    pub fn sbu15() -> Self {
        let bones = vec![
            (0, 1), (1, 2), (1, 3), (3, 4), (4, 5), (1, 6), (6, 7), (7, 8),
            (2, 9), (9, 10), (10, 11), (2, 12), (12, 13), (13, 14),
        ];
        let parts = vec![0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3, 4, 4, 4];
        Self {
            joint_count: 15,
            bones,
            center: 2,
            parts,
            hands: (5, 8),
            lateral_axis: 0,
        }
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        let n = self.joint_count;
        let check = |i: usize| {
            if i >= n {
                Err(GraphError::IndexOutOfRange { index: i, count: n })
            } else {
                Ok(())
            }
        };
        check(self.center)?;
        check(self.hands.0)?;
        check(self.hands.1)?;
        for &(a, b) in &self.bones {
            check(a)?;
            check(b)?;
        }
        if self.bones.len() + 1 != n || self.parents().iter().enumerate().any(|(j, p)| p.is_none() && j != self.center) {
            return Err(GraphError::InvalidTopology("bones must form a spanning tree".into()));
        }
        if self.parts.len() != n {
            return Err(GraphError::InvalidTopology("every joint needs a part id".into()));
        }
        let mut used = [false; PART_COUNT];
        for &p in &self.parts {
            if p >= PART_COUNT {
                return Err(GraphError::InvalidTopology(format!("part id {p}")));
            }
            used[p] = true;
        }
        if !used.iter().all(|&u| u) {
            return Err(GraphError::InvalidTopology("all five parts must be used".into()));
        }
        Ok(())
    }

    /// Parent of each joint on the path toward the center joint (`None` for the center).
    pub fn parents(&self) -> Vec<Option<usize>> {
        let n = self.joint_count;
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in &self.bones {
            if a < n && b < n {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        let mut parent = vec![None; n];
        let mut seen = vec![false; n];
        let mut queue = std::collections::VecDeque::from([self.center.min(n.saturating_sub(1))]);
        if let Some(&c) = queue.front() {
            seen[c] = true;
        }
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    parent[v] = Some(u);
                    queue.push_back(v);
                }
            }
        }
        parent
    }

    pub fn leg_joints(&self) -> Vec<usize> {
        (0..self.joint_count).filter(|&j| self.parts[j] >= 3).collect()
    }

    /// Part id of every vertex in a graph of `persons` stacked bodies; person `p` uses ids `p*5..p*5+5`.
    pub fn vertex_parts(&self, persons: usize) -> Vec<usize> {
        (0..persons)
            .flat_map(|p| self.parts.iter().map(move |&part| p * PART_COUNT + part))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_layouts_are_valid() {
        SkeletonTopology::ntu25().validate().unwrap();
        SkeletonTopology::sbu15().validate().unwrap();
    }

    #[test]
    fn parents_point_toward_center() {
        let t = SkeletonTopology::ntu25();
        let p = t.parents();
        assert_eq!(p[1], None);
        assert_eq!(p[0], Some(1));
        assert_eq!(p[20], Some(1));
        assert_eq!(p[3], Some(2));
        assert_eq!(p[21], Some(22));
        assert_eq!(p[22], Some(7));
    }

    #[test]
    fn cyclic_bones_rejected() {
        let mut t = SkeletonTopology::sbu15();
        t.bones[13] = (0, 2);
        assert!(t.validate().is_err());
        let mut t = SkeletonTopology::sbu15();
        t.center = 15;
        assert!(matches!(t.validate(), Err(GraphError::IndexOutOfRange { index: 15, .. })));
    }
}
