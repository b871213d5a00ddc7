//! Planar near-neighbor structures used by the matching algorithms: a
//! deletable k-d tree for radius queries and a weighted k-d tree for
//! distance-plus-weight minimization.
//!
//! Both trees split at the median of the cycling coordinate (x first),
//! store tight per-node bounding boxes, and are never rebalanced.

mod deletable;
mod weighted;

pub use deletable::DeletableKdTree;
pub use weighted::{WeightedKdTree, WeightedVisitor};

/// Node storage shared by both trees.
#[derive(Debug, Clone)]
pub(crate) enum NodeKind {
    /// Range into the permuted point-id array.
    Leaf {
        start: usize,
        end: usize,
    },
    Internal {
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
pub(crate) struct Node {
    /// [min_x, min_y, max_x, max_y], shrunk to the points below the node.
    pub bbox: [f64; 4],
    pub parent: usize,
    pub kind: NodeKind,
}

pub(crate) const NO_PARENT: usize = usize::MAX;

/// Minimal L-infinity distance from `q` to any point of `bbox`.
#[inline]
pub(crate) fn box_linf_dist(q: [f64; 2], bbox: &[f64; 4]) -> f64 {
    let dx = (bbox[0] - q[0]).max(q[0] - bbox[2]).max(0.0);
    let dy = (bbox[1] - q[1]).max(q[1] - bbox[3]).max(0.0);
    dx.max(dy)
}

/// Builds the node array over `points`, permuting `ids` in place.
/// Returns (nodes, root, leaf_of_point).
pub(crate) fn build_nodes(
    points: &[[f64; 2]],
    leaf_size: usize,
    ids: &mut [usize],
) -> (Vec<Node>, Vec<usize>) {
    assert!(leaf_size >= 1);
    let mut nodes = Vec::with_capacity(2 * points.len());
    let mut leaf_of = vec![usize::MAX; points.len()];
    if points.is_empty() {
        return (nodes, leaf_of);
    }
    let n = ids.len();
    build_rec(
        points,
        leaf_size,
        ids,
        0,
        n,
        0,
        NO_PARENT,
        &mut nodes,
        &mut leaf_of,
    );
    (nodes, leaf_of)
}

#[allow(clippy::too_many_arguments)]
fn build_rec(
    points: &[[f64; 2]],
    leaf_size: usize,
    ids: &mut [usize],
    start: usize,
    end: usize,
    axis: usize,
    parent: usize,
    nodes: &mut Vec<Node>,
    leaf_of: &mut [usize],
) -> usize {
    let mut bbox = [
        f64::INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::NEG_INFINITY,
    ];
    for &id in &ids[start..end] {
        let p = points[id];
        bbox[0] = bbox[0].min(p[0]);
        bbox[1] = bbox[1].min(p[1]);
        bbox[2] = bbox[2].max(p[0]);
        bbox[3] = bbox[3].max(p[1]);
    }
    let me = nodes.len();
    nodes.push(Node {
        bbox,
        parent,
        kind: NodeKind::Leaf { start, end },
    });
    let len = end - start;
    if len <= leaf_size {
        for &id in &ids[start..end] {
            leaf_of[id] = me;
        }
        return me;
    }
    let mid = start + len / 2;
    // (coordinate, id) is a total order, so the two halves are the same
    // point sets regardless of how equal coordinates land.
    ids[start..end].select_nth_unstable_by(len / 2, |&a, &b| {
        points[a][axis].total_cmp(&points[b][axis]).then(a.cmp(&b))
    });
    let next = (axis + 1) % 2;
    let left = build_rec(points, leaf_size, ids, start, mid, next, me, nodes, leaf_of);
    let right = build_rec(points, leaf_size, ids, mid, end, next, me, nodes, leaf_of);
    nodes[me].kind = NodeKind::Internal { left, right };
    me
}
