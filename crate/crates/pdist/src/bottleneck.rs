//! Bottleneck distance via Hopcroft–Karp feasibility tests.
//!
//! `feasible` decides whether the threshold subgraph G[r] (edges of weight
//! at most r) has a perfect matching. The geometric engine never enumerates
//! edges: BFS layering and DFS augmentation discover a bidder's neighbors
//! through radius queries on a deletable k-d tree (off-diagonal objects),
//! an O(1) pool of diagonal objects, and a direct check of the bidder's own
//! projection partner. The non-geometric engine answers the same queries by
//! linear scans with per-bidder resume cursors.
//!
//! The distance itself is found by binary search: a 3-approximation of the
//! largest bidder/object distance brackets the search, the search yields an
//! interval (a, b] with (b - a) < delta * a, and an exact post-processing
//! step collects every edge weight inside (a, b] by coordinate sweeps and
//! binary-searches the candidate list.

use std::collections::VecDeque;

use crate::diagram::PersistenceDiagram;
use crate::error::{Error, Result};
use crate::instance::{build_instance, linf, MatchingInstance, PointKind};
use crate::spatial::DeletableKdTree;

const UNREACHED: usize = usize::MAX;

/// Which feasibility engine drives the searches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BottleneckEngine {
    Geometric,
    NonGeometric,
}

/// Matching state carried through a binary search. The matching is a partial
/// bijection; callers prune overweight edges before shrinking the radius.
#[derive(Debug, Clone)]
pub struct HkState {
    /// Object matched to each bidder.
    pub pair_bidder: Vec<Option<usize>>,
    /// Bidder matched to each object.
    pub pair_object: Vec<Option<usize>>,
    dist: Vec<usize>,
    obj_layer: Vec<usize>,
}

impl HkState {
    pub fn new(instance: &MatchingInstance) -> Self {
        let n = instance.len();
        HkState {
            pair_bidder: vec![None; n],
            pair_object: vec![None; n],
            dist: vec![UNREACHED; n],
            obj_layer: vec![UNREACHED; n],
        }
    }

    pub fn matching_size(&self) -> usize {
        self.pair_bidder.iter().filter(|p| p.is_some()).count()
    }

    /// Drops matching edges heavier than `r` (the warm-start rule when the
    /// search interval shrinks).
    pub fn prune(&mut self, instance: &MatchingInstance, r: f64) {
        for u in 0..self.pair_bidder.len() {
            if let Some(v) = self.pair_bidder[u] {
                if instance.distance(u, v) > r {
                    self.pair_bidder[u] = None;
                    self.pair_object[v] = None;
                }
            }
        }
    }

    /// Audit: every matched edge weighs at most `r` and the matching is
    /// injective both ways. Panics on violation.
    pub fn check_matching(&self, instance: &MatchingInstance, r: f64) {
        let mut seen = vec![false; self.pair_object.len()];
        for u in 0..self.pair_bidder.len() {
            if let Some(v) = self.pair_bidder[u] {
                assert_eq!(self.pair_object[v], Some(u), "pair arrays disagree");
                assert!(!seen[v], "object {v} matched twice");
                seen[v] = true;
                let w = instance.distance(u, v);
                assert!(w <= r, "edge ({u},{v}) weight {w} exceeds radius {r}");
            }
        }
        for v in 0..self.pair_object.len() {
            if let Some(u) = self.pair_object[v] {
                assert_eq!(self.pair_bidder[u], Some(v), "pair arrays disagree");
            }
        }
    }
}

/// Source of "next unvisited neighbor within r" answers. Both phases of a
/// Hopcroft–Karp round start with every object live and consume objects as
/// they are visited.
trait NeighborSource {
    fn begin_phase(&mut self);
    /// Claims any live admissible object within `r` of `bidder`.
    fn take_any(&mut self, instance: &MatchingInstance, bidder: usize, r: f64) -> Option<usize>;
    /// Bucket diagonal objects by BFS layer before the DFS part.
    fn prepare_dfs(&mut self, obj_layer: &[usize]);
    /// Claims a live admissible object within `r` whose BFS layer equals
    /// `layer`. When `accept_unlayered` is set (the final layer of the
    /// phase), objects the BFS never labeled qualify too: they are only
    /// adjacent to final-layer bidders, so their layer is the final one.
    fn take_in_layer(
        &mut self,
        instance: &MatchingInstance,
        bidder: usize,
        r: f64,
        layer: usize,
        obj_layer: &[usize],
        accept_unlayered: bool,
    ) -> Option<usize>;
}

/// Geometric neighbor source: k-d tree over off-diagonal objects plus a
/// constant-time pool of diagonal objects. Built once per feasibility call;
/// phases reset deletion flags only.
struct GeometricSource {
    tree: DeletableKdTree,
    n_off: usize,
    n: usize,
    pool_live: Vec<bool>,
    pool_stack: Vec<usize>,
    pool_buckets: Vec<Vec<usize>>,
    pool_unlayered: Vec<usize>,
}

impl GeometricSource {
    fn new(instance: &MatchingInstance) -> Self {
        let n = instance.len();
        let n_off = instance.off_objects();
        let coords: Vec<[f64; 2]> = instance.objects[..n_off].iter().map(|o| o.coords).collect();
        GeometricSource {
            tree: DeletableKdTree::build(&coords),
            n_off,
            n,
            pool_live: vec![true; n - n_off],
            pool_stack: Vec::new(),
            pool_buckets: Vec::new(),
            pool_unlayered: Vec::new(),
        }
    }

    fn pool_is_live(&self, object: usize) -> bool {
        self.pool_live[object - self.n_off]
    }

    fn pool_take(&mut self, object: usize) {
        self.pool_live[object - self.n_off] = false;
    }
}

impl NeighborSource for GeometricSource {
    fn begin_phase(&mut self) {
        self.tree.reset();
        self.pool_live.iter_mut().for_each(|l| *l = true);
        self.pool_stack = (self.n_off..self.n).rev().collect();
        self.pool_buckets.clear();
        self.pool_unlayered.clear();
    }

    fn take_any(&mut self, instance: &MatchingInstance, bidder: usize, r: f64) -> Option<usize> {
        let b = &instance.bidders[bidder];
        match b.kind {
            PointKind::OffDiagonal => {
                let partner = b.partner;
                if self.pool_is_live(partner) && instance.distance(bidder, partner) <= r {
                    self.pool_take(partner);
                    return Some(partner);
                }
                if let Some(v) = self.tree.query_within(b.coords, r) {
                    self.tree.delete(v);
                    return Some(v);
                }
                None
            }
            PointKind::DiagonalProjection => {
                let partner = b.partner;
                if self.tree.is_live(partner) && instance.distance(bidder, partner) <= r {
                    self.tree.delete(partner);
                    return Some(partner);
                }
                // Any diagonal object is admissible at weight 0.
                while let Some(v) = self.pool_stack.pop() {
                    if self.pool_is_live(v) {
                        self.pool_take(v);
                        return Some(v);
                    }
                }
                None
            }
        }
    }

    fn prepare_dfs(&mut self, obj_layer: &[usize]) {
        self.tree.relabel(&obj_layer[..self.n_off]);
        let max_layer = (self.n_off..self.n)
            .map(|v| obj_layer[v])
            .filter(|&l| l != UNREACHED)
            .max();
        self.pool_buckets.clear();
        self.pool_unlayered = (self.n_off..self.n)
            .rev()
            .filter(|&v| obj_layer[v] == UNREACHED)
            .collect();
        let Some(max_layer) = max_layer else {
            return;
        };
        self.pool_buckets = vec![Vec::new(); max_layer + 1];
        for v in (self.n_off..self.n).rev() {
            if obj_layer[v] != UNREACHED {
                self.pool_buckets[obj_layer[v]].push(v);
            }
        }
    }

    fn take_in_layer(
        &mut self,
        instance: &MatchingInstance,
        bidder: usize,
        r: f64,
        layer: usize,
        obj_layer: &[usize],
        accept_unlayered: bool,
    ) -> Option<usize> {
        let pred = |l: usize| l == layer || (accept_unlayered && l == UNREACHED);
        let b = &instance.bidders[bidder];
        match b.kind {
            PointKind::OffDiagonal => {
                let partner = b.partner;
                if self.pool_is_live(partner)
                    && pred(obj_layer[partner])
                    && instance.distance(bidder, partner) <= r
                {
                    self.pool_take(partner);
                    return Some(partner);
                }
                if let Some(v) =
                    self.tree
                        .query_within_labeled(b.coords, r, layer, accept_unlayered)
                {
                    self.tree.delete(v);
                    return Some(v);
                }
                None
            }
            PointKind::DiagonalProjection => {
                let partner = b.partner;
                if self.tree.is_live(partner)
                    && pred(obj_layer[partner])
                    && instance.distance(bidder, partner) <= r
                {
                    self.tree.delete(partner);
                    return Some(partner);
                }
                if let Some(bucket) = self.pool_buckets.get_mut(layer) {
                    while let Some(v) = bucket.pop() {
                        if self.pool_live[v - self.n_off] {
                            self.pool_live[v - self.n_off] = false;
                            return Some(v);
                        }
                    }
                }
                if accept_unlayered {
                    while let Some(v) = self.pool_unlayered.pop() {
                        if self.pool_live[v - self.n_off] && obj_layer[v] == UNREACHED {
                            self.pool_live[v - self.n_off] = false;
                            return Some(v);
                        }
                    }
                }
                None
            }
        }
    }
}

/// Combinatorial neighbor source: linear scans over the bidder's admissible
/// objects, resumed from a per-bidder cursor so every (bidder, object) pair
/// is examined at most once per phase.
struct ScanSource {
    n_off: usize,
    n: usize,
    visited: Vec<bool>,
    cursor: Vec<usize>,
}

impl ScanSource {
    fn new(instance: &MatchingInstance) -> Self {
        let n = instance.len();
        ScanSource {
            n_off: instance.off_objects(),
            n,
            visited: vec![false; n],
            cursor: vec![0; n],
        }
    }

    /// The bidder's admissible objects as a virtual list: its projection
    /// partner first, then the objects of matching kind.
    fn admissible(&self, instance: &MatchingInstance, bidder: usize, idx: usize) -> Option<usize> {
        let b = &instance.bidders[bidder];
        if idx == 0 {
            return Some(b.partner);
        }
        let k = idx - 1;
        match b.kind {
            PointKind::OffDiagonal => (k < self.n_off).then_some(k),
            PointKind::DiagonalProjection => (self.n_off + k < self.n).then_some(self.n_off + k),
        }
    }

    fn scan(
        &mut self,
        instance: &MatchingInstance,
        bidder: usize,
        r: f64,
        mut accept: impl FnMut(usize) -> bool,
    ) -> Option<usize> {
        let mut idx = self.cursor[bidder];
        while let Some(v) = self.admissible(instance, bidder, idx) {
            idx += 1;
            if !self.visited[v] && instance.distance(bidder, v) <= r && accept(v) {
                self.cursor[bidder] = idx;
                self.visited[v] = true;
                return Some(v);
            }
        }
        self.cursor[bidder] = idx;
        None
    }
}

impl NeighborSource for ScanSource {
    fn begin_phase(&mut self) {
        self.visited.iter_mut().for_each(|v| *v = false);
        self.cursor.iter_mut().for_each(|c| *c = 0);
    }

    fn take_any(&mut self, instance: &MatchingInstance, bidder: usize, r: f64) -> Option<usize> {
        self.scan(instance, bidder, r, |_| true)
    }

    fn prepare_dfs(&mut self, _obj_layer: &[usize]) {}

    fn take_in_layer(
        &mut self,
        instance: &MatchingInstance,
        bidder: usize,
        r: f64,
        layer: usize,
        obj_layer: &[usize],
        accept_unlayered: bool,
    ) -> Option<usize> {
        self.scan(instance, bidder, r, |v| {
            obj_layer[v] == layer || (accept_unlayered && obj_layer[v] == UNREACHED)
        })
    }
}

/// One BFS layering pass. Returns the layer of the nearest free object, or
/// `UNREACHED` when no augmenting path exists.
fn bfs<S: NeighborSource>(
    src: &mut S,
    instance: &MatchingInstance,
    r: f64,
    state: &mut HkState,
) -> usize {
    src.begin_phase();
    state.dist.iter_mut().for_each(|d| *d = UNREACHED);
    state.obj_layer.iter_mut().for_each(|l| *l = UNREACHED);
    let mut queue = VecDeque::new();
    for u in 0..instance.len() {
        if state.pair_bidder[u].is_none() {
            state.dist[u] = 0;
            queue.push_back(u);
        }
    }
    let mut free_layer = UNREACHED;
    while let Some(u) = queue.pop_front() {
        // Bidders at or beyond the free layer never extend a shortest
        // path, and a final-layer bidder's ball need not be enumerated:
        // the DFS recognizes its candidates as final-layer on sight.
        if state.dist[u] + 1 >= free_layer {
            continue;
        }
        while let Some(v) = src.take_any(instance, u, r) {
            state.obj_layer[v] = state.dist[u] + 1;
            match state.pair_object[v] {
                Some(w) => {
                    state.dist[w] = state.dist[u] + 1;
                    queue.push_back(w);
                }
                None => {
                    free_layer = state.dist[u] + 1;
                    break;
                }
            }
        }
    }
    free_layer
}

/// Finds a maximal set of vertex-disjoint shortest augmenting paths along
/// the BFS layers and flips them.
fn dfs_phase<S: NeighborSource>(
    src: &mut S,
    instance: &MatchingInstance,
    r: f64,
    state: &mut HkState,
    free_layer: usize,
) {
    src.begin_phase();
    src.prepare_dfs(&state.obj_layer);
    let n = instance.len();
    // (bidder, object chosen from it); the object is fixed when descending.
    let mut stack: Vec<(usize, usize)> = Vec::new();
    for start in 0..n {
        if state.pair_bidder[start].is_some() {
            continue;
        }
        stack.clear();
        stack.push((start, UNREACHED));
        while let Some(&(u, _)) = stack.last() {
            let d = state.dist[u];
            let last = d + 1 == free_layer;
            match src.take_in_layer(instance, u, r, d + 1, &state.obj_layer, last) {
                None => {
                    // Dead end: no shortest path through this bidder.
                    state.dist[u] = UNREACHED;
                    stack.pop();
                }
                Some(v) => match state.pair_object[v] {
                    Some(w) => {
                        if !last && state.dist[w] == d + 1 {
                            stack.last_mut().unwrap().1 = v;
                            stack.push((w, UNREACHED));
                        }
                        // Otherwise v is consumed without descending: a
                        // matched final-layer object cannot lie on a
                        // shortest path, and a dead mate ends it too.
                    }
                    None => {
                        // Free object: flip the path recorded on the stack.
                        stack.last_mut().unwrap().1 = v;
                        for &(ub, vb) in stack.iter().rev() {
                            state.pair_object[vb] = Some(ub);
                            state.pair_bidder[ub] = Some(vb);
                        }
                        stack.clear();
                    }
                },
            }
        }
    }
}

fn hk_run<S: NeighborSource>(
    src: &mut S,
    instance: &MatchingInstance,
    r: f64,
    state: &mut HkState,
) -> bool {
    loop {
        let free_layer = bfs(src, instance, r, state);
        if free_layer == UNREACHED {
            break;
        }
        dfs_phase(src, instance, r, state, free_layer);
    }
    state.matching_size() == instance.len()
}

/// Perfect-matchability of G[r] with the geometric engine; the matching in
/// `state` is updated to a maximum matching of G[r]. Requires that `state`
/// holds only edges of weight at most `r`.
pub fn feasible(state: &mut HkState, instance: &MatchingInstance, r: f64) -> bool {
    let mut src = GeometricSource::new(instance);
    hk_run(&mut src, instance, r, state)
}

/// Same contract as [`feasible`], implemented by linear scans over all
/// non-skew pairs.
pub fn feasible_nongeometric(state: &mut HkState, instance: &MatchingInstance, r: f64) -> bool {
    let mut src = ScanSource::new(instance);
    hk_run(&mut src, instance, r, state)
}

fn run_feasible(
    state: &mut HkState,
    instance: &MatchingInstance,
    r: f64,
    engine: BottleneckEngine,
) -> bool {
    match engine {
        BottleneckEngine::Geometric => feasible(state, instance, r),
        BottleneckEngine::NonGeometric => feasible_nongeometric(state, instance, r),
    }
}

/// Linear-time bracket of the largest bidder/object distance: pick a
/// bidder, walk to the farthest object, walk back to the farthest bidder.
/// Returns `(lower, 3 * lower)`; the true maximum lies in between by the
/// triangle inequality.
pub fn max_dist_3approx(instance: &MatchingInstance) -> (f64, f64) {
    assert!(!instance.is_empty());
    let farthest = |from: [f64; 2], pts: &[crate::instance::InstancePoint]| {
        let mut best = (0usize, f64::NEG_INFINITY);
        for (i, p) in pts.iter().enumerate() {
            let d = linf(from, p.coords);
            if d > best.1 {
                best = (i, d);
            }
        }
        best
    };
    let u_a = instance.bidders[0].coords;
    let (v0, _) = farthest(u_a, &instance.objects);
    let (_, lower) = farthest(instance.objects[v0].coords, &instance.bidders);
    (lower, 3.0 * lower)
}

fn validate_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    Ok(())
}

struct ApproxOutcome {
    a: f64,
    b: f64,
    state: HkState,
}

fn approx_core(instance: &MatchingInstance, delta: f64, engine: BottleneckEngine) -> ApproxOutcome {
    let mut state = HkState::new(instance);
    // r = 0 fast path: identical multisets match at radius zero, and it
    // keeps the termination predicate away from a = 0.
    if run_feasible(&mut state, instance, 0.0, engine) {
        return ApproxOutcome {
            a: 0.0,
            b: 0.0,
            state,
        };
    }
    let (_, upper) = max_dist_3approx(instance);
    let mut a = 0.0f64;
    let mut b = upper; // G[upper] is complete, hence feasible
    let mut iterations = 0;
    while (b - a) >= delta * a && iterations < 200 && (b - a) >= 1e-14 * b {
        let mid = 0.5 * (a + b);
        state.prune(instance, mid);
        if run_feasible(&mut state, instance, mid, engine) {
            b = mid;
        } else {
            a = mid;
        }
        iterations += 1;
    }
    ApproxOutcome { a, b, state }
}

/// Interval (a, b] bracketing the bottleneck distance o with
/// `b in [o, (1 + delta) * o)`.
pub fn approx_bottleneck(
    x: &PersistenceDiagram,
    y: &PersistenceDiagram,
    delta: f64,
) -> Result<(f64, f64)> {
    approx_bottleneck_with(x, y, delta, BottleneckEngine::Geometric)
}

pub fn approx_bottleneck_with(
    x: &PersistenceDiagram,
    y: &PersistenceDiagram,
    delta: f64,
    engine: BottleneckEngine,
) -> Result<(f64, f64)> {
    validate_delta(delta)?;
    if x.is_empty() && y.is_empty() {
        return Ok((0.0, 0.0));
    }
    let instance = build_instance(x, y, 1.0)?;
    let out = approx_core(&instance, delta, engine);
    Ok((out.a, out.b))
}

/// Every non-skew edge weight in (a, b], deduplicated and ascending:
/// off/off pairs from an x-sweep and a y-sweep over coordinate differences,
/// plus each point's own projection distance.
pub fn candidate_distances(instance: &MatchingInstance, a: f64, b: f64) -> Vec<f64> {
    assert!(0.0 <= a && a < b, "need 0 <= a < b, got ({a}, {b})");
    let n_off_b = instance.off_bidders();
    let n_off_o = instance.off_objects();
    let bidders: Vec<[f64; 2]> = instance.bidders[..n_off_b]
        .iter()
        .map(|p| p.coords)
        .collect();
    let objects: Vec<[f64; 2]> = instance.objects[..n_off_o]
        .iter()
        .map(|p| p.coords)
        .collect();

    let mut out = Vec::new();

    // Projection edges: every off-diagonal bidder against its own
    // projection, and every diagonal bidder against its partner (the same
    // value as the partner object's projection distance).
    for p in &instance.bidders[..n_off_b] {
        let d = linf(p.coords, instance.objects[p.partner].coords);
        if d > a && d <= b {
            out.push(d);
        }
    }
    for o in &instance.objects[..n_off_o] {
        let d = linf(o.coords, instance.bidders[o.partner].coords);
        if d > a && d <= b {
            out.push(d);
        }
    }

    // Coordinate sweeps over off-diagonal x off-diagonal pairs. A pair with
    // L-inf distance in (a, b] has its dominating coordinate difference in
    // (a, b], so the union of both sweeps is complete.
    for axis in 0..2 {
        let mut sorted: Vec<(f64, usize)> = objects
            .iter()
            .enumerate()
            .map(|(j, o)| (o[axis], j))
            .collect();
        sorted.sort_by(|p, q| p.0.total_cmp(&q.0));
        let coords: Vec<f64> = sorted.iter().map(|&(c, _)| c).collect();
        for bp in &bidders {
            let c = bp[axis];
            // right window: object coord in (c + a, c + b]
            let lo = coords.partition_point(|&o| o <= c + a);
            let hi = coords.partition_point(|&o| o <= c + b);
            // left window: object coord in [c - b, c - a)
            let llo = coords.partition_point(|&o| o < c - b);
            let lhi = coords.partition_point(|&o| o < c - a);
            for &(_, j) in sorted[lo..hi].iter().chain(sorted[llo..lhi].iter()) {
                let d = linf(*bp, objects[j]);
                if d > a && d <= b {
                    out.push(d);
                }
            }
        }
    }

    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// Exact bottleneck distance: the smallest candidate radius whose threshold
/// graph is feasible. Equals some edge weight exactly; `delta` only controls
/// how tight the pre-approximation interval is.
pub fn exact_bottleneck(x: &PersistenceDiagram, y: &PersistenceDiagram, delta: f64) -> Result<f64> {
    exact_bottleneck_with(x, y, delta, BottleneckEngine::Geometric)
}

pub fn exact_bottleneck_with(
    x: &PersistenceDiagram,
    y: &PersistenceDiagram,
    delta: f64,
    engine: BottleneckEngine,
) -> Result<f64> {
    validate_delta(delta)?;
    if x.is_empty() && y.is_empty() {
        return Ok(0.0);
    }
    let instance = build_instance(x, y, 1.0)?;
    let mut out = approx_core(&instance, delta, engine);
    if out.b == 0.0 {
        return Ok(0.0);
    }
    let cands = candidate_distances(&instance, out.a, out.b);
    assert!(
        !cands.is_empty(),
        "the bottleneck value must be an edge weight inside ({}, {}]",
        out.a,
        out.b
    );
    let mut lo = 0usize;
    let mut hi = cands.len() - 1; // cands[hi] >= o, hence feasible
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        out.state.prune(&instance, cands[mid]);
        if run_feasible(&mut out.state, &instance, cands[mid], engine) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(cands[lo])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagram::DiagramPoint;
    use crate::oracle;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn diagram(points: &[(f64, f64)]) -> PersistenceDiagram {
        PersistenceDiagram::new(
            points
                .iter()
                .map(|&(b, d)| DiagramPoint::new(b, d))
                .collect(),
        )
    }

    fn random_diagram(rng: &mut impl Rng, n: usize, scale: f64) -> PersistenceDiagram {
        PersistenceDiagram::new(
            (0..n)
                .map(|_| {
                    let b = rng.gen_range(0.0..scale);
                    let p = rng.gen_range(0.0..scale / 3.0);
                    DiagramPoint::new(b, b + p)
                })
                .collect(),
        )
    }

    fn two_by_two() -> MatchingInstance {
        build_instance(&diagram(&[(0.0, 2.0)]), &diagram(&[(0.0, 4.0)]), 1.0).unwrap()
    }

    #[test]
    fn three_approx_single_pair() {
        let inst =
            build_instance(&diagram(&[(2.0, 6.0)]), &PersistenceDiagram::empty(), 1.0).unwrap();
        let (lower, upper) = max_dist_3approx(&inst);
        assert_eq!(lower, 2.0);
        assert_eq!(upper, 6.0);
    }

    #[test]
    fn three_approx_identical_diagrams() {
        let x = diagram(&[(1.0, 5.0)]);
        let inst = build_instance(&x, &x.clone(), 1.0).unwrap();
        let (lower, upper) = max_dist_3approx(&inst);
        assert!(lower >= 0.0 && upper >= lower);
        // exhaustive d_max over all bidder/object coordinate pairs
        let mut dmax = 0.0f64;
        for b in &inst.bidders {
            for o in &inst.objects {
                dmax = dmax.max(linf(b.coords, o.coords));
            }
        }
        assert!(lower <= dmax && dmax <= upper);
    }

    #[test]
    fn three_approx_brackets_dmax_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..100 {
            let n_x = rng.gen_range(1..=50);
            let x = random_diagram(&mut rng, n_x, 100.0);
            let n_y = rng.gen_range(1..=50);
            let y = random_diagram(&mut rng, n_y, 100.0);
            let inst = build_instance(&x, &y, 1.0).unwrap();
            let (lower, upper) = max_dist_3approx(&inst);
            let mut dmax = 0.0f64;
            for b in &inst.bidders {
                for o in &inst.objects {
                    dmax = dmax.max(linf(b.coords, o.coords));
                }
            }
            assert!(lower <= dmax && dmax <= upper, "{lower} {dmax} {upper}");
        }
    }

    #[test]
    fn feasible_two_by_two() {
        let inst = two_by_two();
        for engine in [BottleneckEngine::Geometric, BottleneckEngine::NonGeometric] {
            let mut st = HkState::new(&inst);
            assert!(run_feasible(&mut st, &inst, 2.0, engine), "{engine:?}");
            st.check_matching(&inst, 2.0);
            let mut st = HkState::new(&inst);
            assert!(!run_feasible(&mut st, &inst, 1.9, engine), "{engine:?}");
        }
    }

    #[test]
    fn feasible_at_upper_bound_is_complete() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let x = random_diagram(&mut rng, 12, 10.0);
        let y = random_diagram(&mut rng, 9, 10.0);
        let inst = build_instance(&x, &y, 1.0).unwrap();
        let (_, upper) = max_dist_3approx(&inst);
        let mut st = HkState::new(&inst);
        assert!(feasible(&mut st, &inst, upper));
    }

    #[test]
    fn engines_agree_with_explicit_graph() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        for trial in 0..40 {
            let n_x = rng.gen_range(1..=16);
            let x = random_diagram(&mut rng, n_x, 10.0);
            let n_y = rng.gen_range(0..=16);
            let y = random_diagram(&mut rng, n_y, 10.0);
            let inst = build_instance(&x, &y, 1.0).unwrap();
            let (_, upper) = max_dist_3approx(&inst);
            for _ in 0..6 {
                let r = rng.gen_range(0.0..upper.max(1e-9));
                let mut sg = HkState::new(&inst);
                let mut sc = HkState::new(&inst);
                let g = feasible(&mut sg, &inst, r);
                let c = feasible_nongeometric(&mut sc, &inst, r);
                assert_eq!(g, c, "trial {trial} r={r}");
                sg.check_matching(&inst, r);
                sc.check_matching(&inst, r);
                assert_eq!(sg.matching_size(), sc.matching_size(), "max matching sizes");
            }
        }
    }

    #[test]
    fn feasibility_is_monotone_in_radius() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        for _ in 0..25 {
            let n_x = rng.gen_range(1..=12);
            let x = random_diagram(&mut rng, n_x, 10.0);
            let n_y = rng.gen_range(1..=12);
            let y = random_diagram(&mut rng, n_y, 10.0);
            let inst = build_instance(&x, &y, 1.0).unwrap();
            let (_, upper) = max_dist_3approx(&inst);
            let mut radii: Vec<f64> = (0..8).map(|_| rng.gen_range(0.0..upper)).collect();
            radii.sort_by(f64::total_cmp);
            let mut last = false;
            for r in radii {
                let mut st = HkState::new(&inst);
                let f = feasible(&mut st, &inst, r);
                assert!(f || !last, "feasibility lost when radius grew");
                last = f;
            }
        }
    }

    #[test]
    fn approx_identical_diagrams_is_zero() {
        let x = diagram(&[(1.0, 4.0), (2.0, 8.0)]);
        assert_eq!(approx_bottleneck(&x, &x.clone(), 0.01).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn approx_two_by_two_interval() {
        let (a, b) =
            approx_bottleneck(&diagram(&[(0.0, 2.0)]), &diagram(&[(0.0, 4.0)]), 0.01).unwrap();
        assert!(a < 2.0 && 2.0 <= b, "o=2 outside ({a}, {b}]");
        assert!((2.0..2.02).contains(&b), "b={b}");
    }

    #[test]
    fn approx_matches_oracle_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        for engine in [BottleneckEngine::Geometric, BottleneckEngine::NonGeometric] {
            for _ in 0..20 {
                let n_x = rng.gen_range(1..=32);
                let x = random_diagram(&mut rng, n_x, 50.0);
                let n_y = rng.gen_range(1..=32);
                let y = random_diagram(&mut rng, n_y, 50.0);
                let inst = build_instance(&x, &y, 1.0).unwrap();
                let o = oracle::oracle_bottleneck(&inst);
                let (a, b) = approx_bottleneck_with(&x, &y, 0.01, engine).unwrap();
                assert!(a < o && o <= b, "o={o} not in ({a}, {b}]");
                assert!(b < (1.0 + 0.01) * o, "b={b} beyond (1+delta)*o");
            }
        }
    }

    #[test]
    fn candidates_bracket_single_pair() {
        let inst = two_by_two();
        // weights are {2, 1, 2, 0}; bracket only the 1
        let c = candidate_distances(&inst, 0.5, 1.5);
        assert_eq!(c, vec![1.0]);
    }

    #[test]
    fn candidates_empty_below_everything() {
        let inst = two_by_two();
        let c = candidate_distances(&inst, 0.0, 0.5);
        assert!(c.is_empty());
    }

    #[test]
    fn candidates_match_quadratic_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(83);
        for _ in 0..20 {
            let x = random_diagram(&mut rng, 50, 20.0);
            let y = random_diagram(&mut rng, 50, 20.0);
            let inst = build_instance(&x, &y, 1.0).unwrap();
            let hi = max_dist_3approx(&inst).0;
            let a = rng.gen_range(0.0..hi * 0.6);
            let b = a + rng.gen_range(hi * 0.05..hi * 0.4);
            let got = candidate_distances(&inst, a, b);
            let mut want = Vec::new();
            for i in 0..inst.len() {
                for j in 0..inst.len() {
                    if !inst.is_skew(i, j) {
                        let d = inst.distance(i, j);
                        if d > a && d <= b {
                            want.push(d);
                        }
                    }
                }
            }
            want.sort_by(f64::total_cmp);
            want.dedup();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn exact_two_by_two() {
        let d = exact_bottleneck(&diagram(&[(0.0, 2.0)]), &diagram(&[(0.0, 4.0)]), 0.01).unwrap();
        assert_eq!(d, 2.0);
    }

    #[test]
    fn exact_single_point_vs_empty() {
        let d =
            exact_bottleneck(&diagram(&[(2.0, 6.0)]), &PersistenceDiagram::empty(), 0.01).unwrap();
        assert_eq!(d, 2.0);
    }

    #[test]
    fn empty_left_diagram_uses_diagonal_bidders_only() {
        // all bidders are projections; objects are the off-diagonal points
        let y = diagram(&[(2.0, 6.0), (0.0, 3.0), (5.0, 5.5)]);
        let inst = build_instance(&PersistenceDiagram::empty(), &y, 1.0).unwrap();
        let want = oracle::oracle_bottleneck(&inst);
        for engine in [BottleneckEngine::Geometric, BottleneckEngine::NonGeometric] {
            let got =
                exact_bottleneck_with(&PersistenceDiagram::empty(), &y, 0.01, engine).unwrap();
            assert_eq!(got, want, "{engine:?}");
        }
        assert_eq!(want, 2.0); // the widest point pays its projection
    }

    #[test]
    fn exact_matches_oracle_bit_for_bit() {
        let mut rng = ChaCha8Rng::seed_from_u64(97);
        for engine in [BottleneckEngine::Geometric, BottleneckEngine::NonGeometric] {
            for trial in 0..25 {
                let n_x = rng.gen_range(1..=32);
                let x = random_diagram(&mut rng, n_x, 50.0);
                let n_y = rng.gen_range(0..=32);
                let y = random_diagram(&mut rng, n_y, 50.0);
                let inst = build_instance(&x, &y, 1.0).unwrap();
                let want = oracle::oracle_bottleneck(&inst);
                let got = exact_bottleneck_with(&x, &y, 0.01, engine).unwrap();
                assert_eq!(got, want, "trial {trial} ({engine:?})");
            }
        }
    }

    #[test]
    fn exact_interval_contract_against_approx() {
        let mut rng = ChaCha8Rng::seed_from_u64(113);
        for _ in 0..15 {
            let n_x = rng.gen_range(1..=24);
            let x = random_diagram(&mut rng, n_x, 50.0);
            let n_y = rng.gen_range(1..=24);
            let y = random_diagram(&mut rng, n_y, 50.0);
            let (a, b) = approx_bottleneck(&x, &y, 0.05).unwrap();
            let o = exact_bottleneck(&x, &y, 0.05).unwrap();
            if b > 0.0 {
                assert!(a < o && o <= b, "o={o} outside ({a}, {b}]");
            } else {
                assert_eq!(o, 0.0);
            }
        }
    }

    #[test]
    fn both_empty_short_circuits() {
        let e = PersistenceDiagram::empty();
        assert_eq!(approx_bottleneck(&e, &e.clone(), 0.01).unwrap(), (0.0, 0.0));
        assert_eq!(exact_bottleneck(&e, &e.clone(), 0.01).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_delta() {
        let x = diagram(&[(0.0, 2.0)]);
        assert!(approx_bottleneck(&x, &x.clone(), 0.0).is_err());
        assert!(exact_bottleneck(&x, &x.clone(), 1.0).is_err());
    }

    #[test]
    fn massed_duplicates_handled() {
        // expanded duplicates stress equal-coordinate handling
        let x = PersistenceDiagram::new(vec![
            DiagramPoint::with_mass(1.0, 4.0, 3),
            DiagramPoint::with_mass(2.0, 2.5, 2),
        ]);
        let y = PersistenceDiagram::new(vec![DiagramPoint::with_mass(1.5, 4.0, 4)]);
        let xe = x.expand();
        let ye = y.expand();
        let inst = build_instance(&xe, &ye, 1.0).unwrap();
        let want = oracle::oracle_bottleneck(&inst);
        assert_eq!(exact_bottleneck(&xe, &ye, 0.01).unwrap(), want);
        assert_eq!(
            exact_bottleneck_with(&xe, &ye, 0.01, BottleneckEngine::NonGeometric).unwrap(),
            want
        );
    }
}
