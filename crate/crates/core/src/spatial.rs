//! A small k-d tree over 3D points for nearest-vertex queries.

use crate::Vec3;

struct Node {
    point_idx: usize,
    axis: usize,
    left: Option<Box<Node>>,
    right: Option<Box<Node>>,
}

/// Static k-d tree built once over a point set.
pub struct KdTree {
    points: Vec<Vec3>,
    root: Option<Box<Node>>,
}

impl KdTree {
    pub fn build(points: &[Vec3]) -> Self {
        let mut indices: Vec<usize> = (0..points.len()).collect();
        let root = Self::build_node(points, &mut indices, 0);
        KdTree {
            points: points.to_vec(),
            root,
        }
    }

    fn build_node(points: &[Vec3], indices: &mut [usize], depth: usize) -> Option<Box<Node>> {
        if indices.is_empty() {
            return None;
        }
        let axis = depth % 3;
        indices.sort_by(|&a, &b| points[a][axis].total_cmp(&points[b][axis]));
        let mid = indices.len() / 2;
        let point_idx = indices[mid];
        let (left_slice, rest) = indices.split_at_mut(mid);
        let right_slice = &mut rest[1..];
        Some(Box::new(Node {
            point_idx,
            axis,
            left: Self::build_node(points, left_slice, depth + 1),
            right: Self::build_node(points, right_slice, depth + 1),
        }))
    }

    /// Index and squared distance of the stored point closest to `query`.
    pub fn nearest(&self, query: &Vec3) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        if let Some(root) = &self.root {
            self.search(root, query, &mut best);
        }
        best
    }

    fn search(&self, node: &Node, query: &Vec3, best: &mut Option<(usize, f64)>) {
        let p = &self.points[node.point_idx];
        let d2 = (p - query).norm_squared();
        if best.is_none_or(|(_, bd)| d2 < bd) {
            *best = Some((node.point_idx, d2));
        }
        let delta = query[node.axis] - p[node.axis];
        let (near, far) = if delta < 0.0 {
            (&node.left, &node.right)
        } else {
            (&node.right, &node.left)
        };
        if let Some(n) = near {
            self.search(n, query, best);
        }
        if let Some(f) = far {
            if best.is_none_or(|(_, bd)| delta * delta < bd) {
                self.search(f, query, best);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn nearest_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let points: Vec<Vec3> = (0..200)
            .map(|_| {
                Vec3::new(
                    rng.random::<f64>() * 10.0,
                    rng.random::<f64>() * 10.0,
                    rng.random::<f64>() * 10.0,
                )
            })
            .collect();
        let tree = KdTree::build(&points);
        for _ in 0..50 {
            let q = Vec3::new(
                rng.random::<f64>() * 10.0,
                rng.random::<f64>() * 10.0,
                rng.random::<f64>() * 10.0,
            );
            let (idx, d2) = tree.nearest(&q).unwrap();
            let brute = points
                .iter()
                .map(|p| (p - q).norm_squared())
                .fold(f64::INFINITY, f64::min);
            assert!((d2 - brute).abs() < 1e-12, "tree {d2} vs brute {brute}");
            assert!(((points[idx] - q).norm_squared() - brute).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_tree_returns_none() {
        let tree = KdTree::build(&[]);
        assert!(tree.nearest(&Vec3::zeros()).is_none());
    }
}
