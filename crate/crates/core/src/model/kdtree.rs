//! Static kd-tree for exact nearest-neighbour queries under norm-1 and
//! norm-2. The per-axis gap is a lower bound on both distances, which is
//! all the pruning needs.

use super::space::{Metric, PointSet};

const LEAF_SIZE: usize = 8;

#[derive(Debug)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

#[derive(Debug)]
pub struct KdTree {
    dim: usize,
    metric: Metric,
    ids: Vec<usize>,
    coords: Vec<f64>,
    root: Option<Node>,
}

/// A neighbour returned by a query: caller id and distance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub id: usize,
    pub distance: f64,
}

impl KdTree {
    /// Builds a tree over the given objects of `points`.
    pub fn from_points(points: &PointSet, ids: &[usize]) -> Self {
        let dim = points.dim();
        let mut coords = Vec::with_capacity(ids.len() * dim);
        for &id in ids {
            coords.extend_from_slice(points.point(id));
        }
        KdTree::build(dim, points.metric(), ids.to_vec(), coords)
    }

    pub fn build(dim: usize, metric: Metric, ids: Vec<usize>, coords: Vec<f64>) -> Self {
        assert_eq!(ids.len() * dim, coords.len());
        let mut order: Vec<usize> = (0..ids.len()).collect();
        let root = if order.is_empty() {
            None
        } else {
            let n = order.len();
            Some(build_node(&mut order, 0, n, dim, &coords))
        };
        let ids_sorted: Vec<usize> = order.iter().map(|&k| ids[k]).collect();
        let mut coords_sorted = Vec::with_capacity(coords.len());
        for &k in &order {
            coords_sorted.extend_from_slice(&coords[k * dim..(k + 1) * dim]);
        }
        KdTree {
            dim,
            metric,
            ids: ids_sorted,
            coords: coords_sorted,
            root,
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// The `k` nearest points, closest first; equal distances are ordered
    /// by id.
    pub fn nearest(&self, query: &[f64], k: usize) -> Vec<Neighbor> {
        assert_eq!(query.len(), self.dim);
        let mut best: Vec<Neighbor> = Vec::with_capacity(k + 1);
        if let Some(root) = &self.root {
            if k > 0 {
                self.search(root, query, k, &mut best);
            }
        }
        best
    }

    fn search(&self, node: &Node, query: &[f64], k: usize, best: &mut Vec<Neighbor>) {
        match node {
            Node::Leaf { start, end } => {
                for slot in *start..*end {
                    let p = &self.coords[slot * self.dim..(slot + 1) * self.dim];
                    let cand = Neighbor {
                        id: self.ids[slot],
                        distance: self.metric.distance(query, p),
                    };
                    insert_bounded(best, cand, k);
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let gap = query[*axis] - value;
                let (near, far) = if gap <= 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search(near, query, k, best);
                let bound = if best.len() < k {
                    f64::INFINITY
                } else {
                    best[k - 1].distance
                };
                if gap.abs() <= bound {
                    self.search(far, query, k, best);
                }
            }
        }
    }
}

fn insert_bounded(best: &mut Vec<Neighbor>, cand: Neighbor, k: usize) {
    let pos = best
        .iter()
        .position(|b| (cand.distance, cand.id) < (b.distance, b.id))
        .unwrap_or(best.len());
    if pos < k {
        best.insert(pos, cand);
        best.truncate(k);
    }
}

fn build_node(order: &mut [usize], start: usize, end: usize, dim: usize, coords: &[f64]) -> Node {
    let n = end - start;
    if n <= LEAF_SIZE {
        return Node::Leaf { start, end };
    }
    let slice = &mut order[start..end];
    let axis = widest_axis(slice, dim, coords);
    let mid = n / 2;
    slice.select_nth_unstable_by(mid, |&a, &b| {
        coords[a * dim + axis].total_cmp(&coords[b * dim + axis])
    });
    let value = coords[slice[mid] * dim + axis];
    let left = build_node(order, start, start + mid, dim, coords);
    let right = build_node(order, start + mid, end, dim, coords);
    Node::Split {
        axis,
        value,
        left: Box::new(left),
        right: Box::new(right),
    }
}

fn widest_axis(slice: &[usize], dim: usize, coords: &[f64]) -> usize {
    (0..dim)
        .map(|axis| {
            let (lo, hi) = slice.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &k| {
                let v = coords[k * dim + axis];
                (lo.min(v), hi.max(v))
            });
            (axis, hi - lo)
        })
        .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(axis, _)| axis)
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(points: &PointSet, ids: &[usize], q: &[f64], k: usize) -> Vec<Neighbor> {
        let mut all: Vec<Neighbor> = ids
            .iter()
            .map(|&id| Neighbor {
                id,
                distance: points.metric().distance(q, points.point(id)),
            })
            .collect();
        all.sort_by(|a, b| (a.distance, a.id).partial_cmp(&(b.distance, b.id)).unwrap());
        all.truncate(k);
        all
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for metric in [Metric::Norm1, Metric::Norm2] {
            for dim in [1, 2, 5] {
                let n = 300;
                let coords: Vec<f64> = (0..n * dim).map(|_| rng.random_range(-10.0..10.0)).collect();
                let points = PointSet::new(dim, coords, metric, 1.0).unwrap();
                let ids: Vec<usize> = (0..n).filter(|i| i % 3 != 0).collect();
                let tree = KdTree::from_points(&points, &ids);
                for _ in 0..50 {
                    let q: Vec<f64> = (0..dim).map(|_| rng.random_range(-12.0..12.0)).collect();
                    for k in [1, 2, 5] {
                        assert_eq!(tree.nearest(&q, k), brute(&points, &ids, &q, k));
                    }
                }
            }
        }
    }

    #[test]
    fn grid_ties_break_by_id() {
        let points = PointSet::grid(5, Metric::Norm1, 1.0).unwrap();
        let ids: Vec<usize> = (0..25).collect();
        let tree = KdTree::from_points(&points, &ids);
        let hits = tree.nearest(&[2.5, 2.0], 2);
        assert_eq!(hits[0].id, 12);
        assert_eq!(hits[1].id, 13);
        assert!(KdTree::from_points(&points, &[]).nearest(&[0.0, 0.0], 1).is_empty());
    }
}
