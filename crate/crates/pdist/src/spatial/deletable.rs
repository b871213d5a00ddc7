//! K-d tree with point deletion for radius queries.

use super::{box_linf_dist, build_nodes, Node, NodeKind, NO_PARENT};
use crate::instance::linf;

/// A balanced 2-d tree over a fixed point set. Points are deleted by
/// marking; per-node live counters prune emptied subtrees from searches.
/// The structure is exactly the build-time tree: deletion never rebalances,
/// and `reset` restores all points.
#[derive(Debug, Clone)]
pub struct DeletableKdTree {
    points: Vec<[f64; 2]>,
    ids: Vec<usize>,
    nodes: Vec<Node>,
    leaf_of: Vec<usize>,
    live: Vec<usize>,
    deleted: Vec<bool>,
    live_total: usize,
    labels: Vec<usize>,
    label_min: Vec<usize>,
    label_max: Vec<usize>,
}

impl DeletableKdTree {
    /// Builds the tree with single-point leaves. An empty input yields an
    /// empty-tree sentinel whose queries return `None`.
    pub fn build(points: &[[f64; 2]]) -> Self {
        Self::build_with_leaf_size(points, 1)
    }

    /// `leaf_size` > 1 stores leaf buckets; a tuning knob, off by default.
    pub fn build_with_leaf_size(points: &[[f64; 2]], leaf_size: usize) -> Self {
        let mut ids: Vec<usize> = (0..points.len()).collect();
        let (nodes, leaf_of) = build_nodes(points, leaf_size, &mut ids);
        let mut tree = DeletableKdTree {
            points: points.to_vec(),
            ids,
            nodes,
            leaf_of,
            live: Vec::new(),
            deleted: vec![false; points.len()],
            live_total: points.len(),
            labels: Vec::new(),
            label_min: Vec::new(),
            label_max: Vec::new(),
        };
        tree.live = tree.full_counts();
        tree
    }

    fn full_counts(&self) -> Vec<usize> {
        let mut live = vec![0usize; self.nodes.len()];
        // Nodes are stored preorder, so children follow their parent.
        for i in (0..self.nodes.len()).rev() {
            live[i] = match self.nodes[i].kind {
                NodeKind::Leaf { start, end } => end - start,
                NodeKind::Internal { left, right } => live[left] + live[right],
            };
        }
        live
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Number of points not yet deleted.
    pub fn live_count(&self) -> usize {
        self.live_total
    }

    pub fn is_live(&self, id: usize) -> bool {
        !self.deleted[id]
    }

    pub fn point(&self, id: usize) -> [f64; 2] {
        self.points[id]
    }

    /// Returns some live point within L-infinity distance `r` of `query`,
    /// or `None` if none exists. Any satisfying point is a valid answer.
    pub fn query_within(&self, query: [f64; 2], r: f64) -> Option<usize> {
        self.query_within_where(query, r, |_| true)
    }

    /// Like [`query_within`](Self::query_within) but only points accepted by
    /// `pred` qualify. Rejected points are left untouched.
    pub fn query_within_where(
        &self,
        query: [f64; 2],
        r: f64,
        mut pred: impl FnMut(usize) -> bool,
    ) -> Option<usize> {
        if self.nodes.is_empty() || self.live_total == 0 {
            return None;
        }
        self.query_rec(0, query, r, &mut pred)
    }

    fn query_rec(
        &self,
        node: usize,
        query: [f64; 2],
        r: f64,
        pred: &mut impl FnMut(usize) -> bool,
    ) -> Option<usize> {
        if self.live[node] == 0 || box_linf_dist(query, &self.nodes[node].bbox) > r {
            return None;
        }
        match self.nodes[node].kind {
            NodeKind::Leaf { start, end } => {
                for &id in &self.ids[start..end] {
                    if !self.deleted[id] && linf(query, self.points[id]) <= r && pred(id) {
                        return Some(id);
                    }
                }
                None
            }
            NodeKind::Internal { left, right } => {
                let (first, second) = if box_linf_dist(query, &self.nodes[left].bbox)
                    <= box_linf_dist(query, &self.nodes[right].bbox)
                {
                    (left, right)
                } else {
                    (right, left)
                };
                self.query_rec(first, query, r, pred)
                    .or_else(|| self.query_rec(second, query, r, pred))
            }
        }
    }

    /// Attaches an integer label to every point and records per-node label
    /// ranges, enabling subtree pruning in
    /// [`query_within_labeled`](Self::query_within_labeled). Labels stay
    /// valid until the next call; deletions in between only make the
    /// ranges conservative.
    pub fn relabel(&mut self, labels: &[usize]) {
        assert_eq!(labels.len(), self.points.len());
        self.labels.clear();
        self.labels.extend_from_slice(labels);
        if self.label_min.len() != self.nodes.len() {
            self.label_min = vec![usize::MAX; self.nodes.len()];
            self.label_max = vec![0; self.nodes.len()];
        }
        for i in (0..self.nodes.len()).rev() {
            let (lo, hi) = match self.nodes[i].kind {
                NodeKind::Leaf { start, end } => self.ids[start..end]
                    .iter()
                    .fold((usize::MAX, 0), |(lo, hi), &id| {
                        (lo.min(labels[id]), hi.max(labels[id]))
                    }),
                NodeKind::Internal { left, right } => (
                    self.label_min[left].min(self.label_min[right]),
                    self.label_max[left].max(self.label_max[right]),
                ),
            };
            self.label_min[i] = lo;
            self.label_max[i] = hi;
        }
    }

    /// Returns some live point within `r` carrying `label` (or, when
    /// `accept_unlabeled` is set, the `usize::MAX` sentinel). Requires a
    /// preceding [`relabel`](Self::relabel).
    pub fn query_within_labeled(
        &self,
        query: [f64; 2],
        r: f64,
        label: usize,
        accept_unlabeled: bool,
    ) -> Option<usize> {
        if self.nodes.is_empty() || self.live_total == 0 {
            return None;
        }
        debug_assert_eq!(self.labels.len(), self.points.len(), "relabel first");
        self.query_labeled_rec(0, query, r, label, accept_unlabeled)
    }

    fn query_labeled_rec(
        &self,
        node: usize,
        query: [f64; 2],
        r: f64,
        label: usize,
        accept_unlabeled: bool,
    ) -> Option<usize> {
        if self.live[node] == 0 || box_linf_dist(query, &self.nodes[node].bbox) > r {
            return None;
        }
        let in_range = self.label_min[node] <= label && label <= self.label_max[node];
        let has_unlabeled = accept_unlabeled && self.label_max[node] == usize::MAX;
        if !in_range && !has_unlabeled {
            return None;
        }
        match self.nodes[node].kind {
            NodeKind::Leaf { start, end } => {
                for &id in &self.ids[start..end] {
                    let l = self.labels[id];
                    if !self.deleted[id]
                        && (l == label || (accept_unlabeled && l == usize::MAX))
                        && linf(query, self.points[id]) <= r
                    {
                        return Some(id);
                    }
                }
                None
            }
            NodeKind::Internal { left, right } => {
                let (first, second) = if box_linf_dist(query, &self.nodes[left].bbox)
                    <= box_linf_dist(query, &self.nodes[right].bbox)
                {
                    (left, right)
                } else {
                    (right, left)
                };
                self.query_labeled_rec(first, query, r, label, accept_unlabeled)
                    .or_else(|| self.query_labeled_rec(second, query, r, label, accept_unlabeled))
            }
        }
    }

    /// Marks `id` as removed and decrements the live counters up to the
    /// root. Panics if `id` was already deleted.
    pub fn delete(&mut self, id: usize) {
        assert!(!self.deleted[id], "point {id} deleted twice");
        self.deleted[id] = true;
        self.live_total -= 1;
        let mut node = self.leaf_of[id];
        loop {
            self.live[node] -= 1;
            let parent = self.nodes[node].parent;
            if parent == NO_PARENT {
                break;
            }
            node = parent;
        }
    }

    /// Restores every deleted point; the tree is again the build-time tree.
    pub fn reset(&mut self) {
        self.deleted.iter_mut().for_each(|d| *d = false);
        self.live = self.full_counts();
        self.live_total = self.points.len();
    }

    /// Maximum leaf depth (root = 0); the tree is empty-safe.
    pub fn depth(&self) -> usize {
        fn rec(nodes: &[Node], i: usize, d: usize) -> usize {
            match nodes[i].kind {
                NodeKind::Leaf { .. } => d,
                NodeKind::Internal { left, right } => {
                    rec(nodes, left, d + 1).max(rec(nodes, right, d + 1))
                }
            }
        }
        if self.nodes.is_empty() {
            0
        } else {
            rec(&self.nodes, 0, 0)
        }
    }

    /// Structural audit: counter consistency, bbox containment, and
    /// reachability of every live point. Panics on violation.
    pub fn check_invariants(&self) {
        let mut seen = 0usize;
        for (i, node) in self.nodes.iter().enumerate() {
            match node.kind {
                NodeKind::Leaf { start, end } => {
                    let alive = self.ids[start..end]
                        .iter()
                        .filter(|&&id| !self.deleted[id])
                        .count();
                    assert_eq!(self.live[i], alive, "leaf {i} live counter");
                    seen += alive;
                    for &id in &self.ids[start..end] {
                        let p = self.points[id];
                        assert!(
                            p[0] >= node.bbox[0]
                                && p[1] >= node.bbox[1]
                                && p[0] <= node.bbox[2]
                                && p[1] <= node.bbox[3],
                            "point {id} outside leaf bbox"
                        );
                    }
                }
                NodeKind::Internal { left, right } => {
                    assert_eq!(
                        self.live[i],
                        self.live[left] + self.live[right],
                        "internal {i} live counter"
                    );
                    assert_eq!(self.nodes[left].parent, i);
                    assert_eq!(self.nodes[right].parent, i);
                }
            }
        }
        assert_eq!(seen, self.live_total, "total live count");
        for id in 0..self.points.len() {
            if !self.deleted[id] {
                assert!(
                    self.query_within(self.points[id], 0.0).is_some(),
                    "live point {id} unreachable"
                );
            }
        }
    }
}
