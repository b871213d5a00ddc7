//! K-d tree with per-point weights and subtree minima, for queries that
//! minimize `distance^q + weight`.

use super::{box_linf_dist, build_nodes, Node, NodeKind, NO_PARENT};
use crate::instance::{linf, pow_q};

/// Visitor for pruned traversals. A subtree is skipped when the best total
/// it could possibly offer (`box_distance^q + min_weight`) is at least
/// [`prune_bound`](Self::prune_bound).
pub trait WeightedVisitor {
    fn prune_bound(&self) -> f64;
    fn visit(&mut self, id: usize, dist_pow: f64, weight: f64);
}

/// A 2-d tree whose points carry non-decreasing weights (prices). Each node
/// records the minimum weight in its subtree.
#[derive(Debug, Clone)]
pub struct WeightedKdTree {
    points: Vec<[f64; 2]>,
    ids: Vec<usize>,
    nodes: Vec<Node>,
    leaf_of: Vec<usize>,
    weights: Vec<f64>,
    min_weight: Vec<f64>,
}

impl WeightedKdTree {
    /// Builds the tree with all weights 0.
    pub fn build(points: &[[f64; 2]]) -> Self {
        let mut ids: Vec<usize> = (0..points.len()).collect();
        let (nodes, leaf_of) = build_nodes(points, 1, &mut ids);
        let min_weight = vec![0.0; nodes.len()];
        WeightedKdTree {
            points: points.to_vec(),
            ids,
            nodes,
            leaf_of,
            weights: vec![0.0; points.len()],
            min_weight,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Total node count; the structural footprint of the tree.
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn weight(&self, id: usize) -> f64 {
        self.weights[id]
    }

    pub fn point(&self, id: usize) -> [f64; 2] {
        self.points[id]
    }

    /// Raises the weight of `id` and repairs subtree minima along the root
    /// path, stopping as soon as a node's minimum is unchanged. Panics if
    /// the new weight is below the current one.
    pub fn increase_weight(&mut self, id: usize, new_weight: f64) {
        assert!(
            new_weight >= self.weights[id],
            "weight of point {id} may not decrease ({} -> {new_weight})",
            self.weights[id]
        );
        if new_weight == self.weights[id] {
            return;
        }
        self.weights[id] = new_weight;
        let mut node = self.leaf_of[id];
        loop {
            let m = match self.nodes[node].kind {
                NodeKind::Leaf { start, end } => self.ids[start..end]
                    .iter()
                    .map(|&i| self.weights[i])
                    .fold(f64::INFINITY, f64::min),
                NodeKind::Internal { left, right } => {
                    self.min_weight[left].min(self.min_weight[right])
                }
            };
            if m == self.min_weight[node] {
                break;
            }
            self.min_weight[node] = m;
            let parent = self.nodes[node].parent;
            if parent == NO_PARENT {
                break;
            }
            node = parent;
        }
    }

    /// Pruned traversal delivering `(id, distance^q, weight)` for candidate
    /// points, nearest subtree first.
    pub fn search(&self, query: [f64; 2], q: f64, visitor: &mut impl WeightedVisitor) {
        if self.nodes.is_empty() {
            return;
        }
        self.search_rec(0, query, q, visitor);
    }

    fn search_rec(&self, node: usize, query: [f64; 2], q: f64, visitor: &mut impl WeightedVisitor) {
        let bound = pow_q(box_linf_dist(query, &self.nodes[node].bbox), q) + self.min_weight[node];
        if bound >= visitor.prune_bound() {
            return;
        }
        match self.nodes[node].kind {
            NodeKind::Leaf { start, end } => {
                for &id in &self.ids[start..end] {
                    let d = pow_q(linf(query, self.points[id]), q);
                    visitor.visit(id, d, self.weights[id]);
                }
            }
            NodeKind::Internal { left, right } => {
                let (first, second) = if box_linf_dist(query, &self.nodes[left].bbox)
                    <= box_linf_dist(query, &self.nodes[right].bbox)
                {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search_rec(first, query, q, visitor);
                self.search_rec(second, query, q, visitor);
            }
        }
    }

    /// The point minimizing `linf(query, p)^q + weight(p)` and the distinct
    /// runner-up, as `(id, total)` pairs. Ties break toward the smaller id.
    /// `exclude` is skipped entirely. Panics on an empty tree.
    pub fn best_two(
        &self,
        query: [f64; 2],
        q: f64,
        exclude: Option<usize>,
    ) -> ((usize, f64), Option<(usize, f64)>) {
        assert!(!self.is_empty(), "best_two on an empty tree");
        let mut v = BestTwo {
            exclude,
            best: None,
            second: None,
        };
        self.search(query, q, &mut v);
        let best = v.best.expect("tree holds at least one eligible point");
        ((best.1, best.0), v.second.map(|(total, id)| (id, total)))
    }

    /// Recomputes every subtree minimum from scratch and compares; panics on
    /// mismatch.
    pub fn check_invariants(&self) {
        for (i, node) in self.nodes.iter().enumerate() {
            let want = match node.kind {
                NodeKind::Leaf { start, end } => self.ids[start..end]
                    .iter()
                    .map(|&id| self.weights[id])
                    .fold(f64::INFINITY, f64::min),
                NodeKind::Internal { left, right } => {
                    self.min_weight[left].min(self.min_weight[right])
                }
            };
            assert_eq!(self.min_weight[i], want, "node {i} min weight stale");
        }
    }
}

struct BestTwo {
    exclude: Option<usize>,
    best: Option<(f64, usize)>,
    second: Option<(f64, usize)>,
}

impl WeightedVisitor for BestTwo {
    fn prune_bound(&self) -> f64 {
        match self.second {
            Some((total, _)) => total,
            None => f64::INFINITY,
        }
    }

    fn visit(&mut self, id: usize, dist_pow: f64, weight: f64) {
        if self.exclude == Some(id) {
            return;
        }
        let cand = (dist_pow + weight, id);
        match self.best {
            None => self.best = Some(cand),
            Some(best) if cand < best => {
                self.second = Some(best);
                self.best = Some(cand);
            }
            Some(_) => match self.second {
                None => self.second = Some(cand),
                Some(second) if cand < second => self.second = Some(cand),
                Some(_) => {}
            },
        }
    }
}
