//! Delta-approximate q-Wasserstein distance via Gauss–Seidel auction with
//! epsilon-scaling.
//!
//! Bidders claim their best-value object (benefit minus price) one bid per
//! iteration, raising the price by the best-to-second-best gap plus the
//! current epsilon. Rounds rerun with epsilon divided by 5 and prices
//! carried over until the round cost d satisfies
//! `d^q <= (1+delta)^q * (d^q - n*epsilon)`, which pins the result inside
//! `[o, (1+delta)*o)` of the exact distance o.
//!
//! Two interchangeable bidding engines answer the best-two-objects query:
//! a weighted k-d tree over the off-diagonal objects (linear memory) and a
//! per-bidder lazy heap over all admissible objects (quadratic memory, the
//! non-geometric baseline). Diagonal objects cost every diagonal bidder the
//! same, so the geometric engine serves them from one heap ordered by
//! price.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use crate::diagram::PersistenceDiagram;
use crate::error::{Error, Result};
use crate::instance::{build_instance, pow_q, MatchingInstance, PointKind};
use crate::spatial::WeightedKdTree;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuctionEngine {
    Geometric,
    LazyHeap,
}

#[derive(Debug, Clone)]
pub struct AuctionParams {
    pub delta: f64,
    pub engine: AuctionEngine,
    /// `Some(seed)` shuffles the initial bidder order; `None` keeps input
    /// order. Evicted owners re-enter at the queue tail either way.
    pub shuffle_seed: Option<u64>,
    /// Bound the initial epsilon by the 3-approximation of the largest
    /// distance instead of the exact O(n^2) scan.
    pub approximate_max_cost: bool,
}

impl AuctionParams {
    pub fn new(delta: f64, engine: AuctionEngine) -> Self {
        AuctionParams {
            delta,
            engine,
            shuffle_seed: None,
            approximate_max_cost: false,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RoundStats {
    pub epsilon: f64,
    /// Sum of assignment costs `w^q` after the round.
    pub cost: f64,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    /// The q-th root of the final round's cost.
    pub value: f64,
    /// The `w^q` bound used to seed the epsilon schedule.
    pub max_edge_cost: f64,
    pub rounds: Vec<RoundStats>,
    pub bids: u64,
    /// Structural count of engine-owned value entries: tree nodes plus the
    /// diagonal heap's peak for the geometric engine, the per-bidder heap
    /// sizes for the lazy engine.
    pub allocated_value_entries: usize,
}

/// Mutable auction state: per-object prices (non-decreasing within a run),
/// the partial assignment, the current epsilon, and the FIFO queue of
/// unassigned bidders.
pub struct AuctionState {
    pub prices: Vec<f64>,
    /// Object assigned to each bidder.
    pub assignment: Vec<Option<usize>>,
    /// Bidder owning each object.
    pub owner: Vec<Option<usize>>,
    pub epsilon: f64,
    pub unassigned: VecDeque<usize>,
    engine: EngineImpl,
    /// Largest best-to-second value gap seen this round; the fallback
    /// increment when a bidder has a single admissible object.
    largest_gap: f64,
    bids: u64,
}

impl AuctionState {
    pub fn new(instance: &MatchingInstance, engine: AuctionEngine) -> Self {
        let n = instance.len();
        let engine = match engine {
            AuctionEngine::Geometric => EngineImpl::Geometric(GeometricEngine::new(instance)),
            AuctionEngine::LazyHeap => EngineImpl::Lazy(LazyEngine::new(n)),
        };
        AuctionState {
            prices: vec![0.0; n],
            assignment: vec![None; n],
            owner: vec![None; n],
            epsilon: 0.0,
            unassigned: VecDeque::new(),
            engine,
            largest_gap: 0.0,
            bids: 0,
        }
    }

    /// Clears the assignment (prices persist), sets the round epsilon, and
    /// refills the queue in the given bidder order.
    pub fn begin_round(&mut self, order: &[usize], epsilon: f64) {
        assert!(epsilon > 0.0, "rounds need a positive epsilon");
        self.assignment.iter_mut().for_each(|a| *a = None);
        self.owner.iter_mut().for_each(|o| *o = None);
        self.unassigned = order.iter().copied().collect();
        self.epsilon = epsilon;
        self.largest_gap = 0.0;
    }

    pub fn bids(&self) -> u64 {
        self.bids
    }

    pub fn allocated_value_entries(&self) -> usize {
        self.engine.allocated_entries()
    }

    /// Sum of `w^q` over the current assignment.
    pub fn assignment_cost(&self, instance: &MatchingInstance) -> f64 {
        self.assignment
            .iter()
            .enumerate()
            .filter_map(|(u, obj)| obj.map(|j| instance.cost(u, j)))
            .sum()
    }
}

/// A candidate object with its total `w^q + price`; lower totals are more
/// valuable, ties break toward the smaller object id.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    total: f64,
    object: usize,
}

/// One bid: the best-value admissible object for `bidder` and the price
/// increment `(v_best - v_second) + epsilon`. With a single admissible
/// object the increment falls back to epsilon plus the largest gap seen
/// this round (plain epsilon when n = 1).
pub fn bid(state: &mut AuctionState, instance: &MatchingInstance, bidder: usize) -> (usize, f64) {
    debug_assert!(
        state.assignment[bidder].is_none(),
        "bidder already assigned"
    );
    let (best, second) = state.engine.best_two(instance, &state.prices, bidder);
    let increment = match second {
        Some(s) => {
            let gap = s.total - best.total;
            if gap > state.largest_gap {
                state.largest_gap = gap;
            }
            gap + state.epsilon
        }
        None if instance.len() == 1 => state.epsilon,
        None => state.largest_gap + state.epsilon,
    };
    (best.object, increment)
}

/// Runs bids until the queue drains; the assignment is then perfect.
/// Panics if called with a non-positive epsilon (see
/// [`AuctionState::begin_round`]).
pub fn run_round(state: &mut AuctionState, instance: &MatchingInstance) {
    while let Some(u) = state.unassigned.pop_front() {
        let (object, increment) = bid(state, instance, u);
        if let Some(prev) = state.owner[object] {
            state.assignment[prev] = None;
            state.unassigned.push_back(prev);
        }
        state.owner[object] = Some(u);
        state.assignment[u] = Some(object);
        let new_price = state.prices[object] + increment;
        state.prices[object] = new_price;
        state.engine.on_price_change(object, new_price);
        state.bids += 1;
    }
}

/// Largest `w^q` over non-skew edges: every off-diagonal bidder against all
/// off-diagonal objects and its own projection, every diagonal bidder
/// against its partner (diagonal pairs cost 0).
pub fn max_edge_cost(instance: &MatchingInstance) -> f64 {
    let n_off_o = instance.off_objects();
    let mut m = 0.0f64;
    for (i, b) in instance.bidders.iter().enumerate() {
        match b.kind {
            PointKind::OffDiagonal => {
                for j in 0..n_off_o {
                    m = m.max(instance.cost(i, j));
                }
                m = m.max(instance.cost(i, b.partner));
            }
            PointKind::DiagonalProjection => {
                m = m.max(instance.cost(i, b.partner));
            }
        }
    }
    m
}

fn qth_root(x: f64, q: f64) -> f64 {
    if q == 1.0 {
        x
    } else if q == 2.0 {
        x.sqrt()
    } else {
        x.powf(1.0 / q)
    }
}

/// The delta-approximate q-Wasserstein distance between two diagrams.
pub fn wasserstein(
    x: &PersistenceDiagram,
    y: &PersistenceDiagram,
    q: f64,
    delta: f64,
    engine: AuctionEngine,
) -> Result<f64> {
    Ok(wasserstein_with(x, y, q, &AuctionParams::new(delta, engine))?.value)
}

/// Full auction run with per-round instrumentation.
pub fn wasserstein_with(
    x: &PersistenceDiagram,
    y: &PersistenceDiagram,
    q: f64,
    params: &AuctionParams,
) -> Result<RunReport> {
    if q < 1.0 || !q.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "cost exponent q must be a finite real >= 1, got {q}"
        )));
    }
    if !(params.delta > 0.0 && params.delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta must lie in (0, 1), got {}",
            params.delta
        )));
    }
    if x.is_empty() && y.is_empty() {
        return Ok(RunReport {
            value: 0.0,
            max_edge_cost: 0.0,
            rounds: Vec::new(),
            bids: 0,
            allocated_value_entries: 0,
        });
    }
    let instance = build_instance(x, y, q)?;
    Ok(run_auction(&instance, params))
}

/// Auction over an already-built instance.
pub fn run_auction(instance: &MatchingInstance, params: &AuctionParams) -> RunReport {
    let n = instance.len();
    let max_cost = if params.approximate_max_cost {
        let (_, upper) = crate::bottleneck::max_dist_3approx(instance);
        pow_q(upper, instance.q)
    } else {
        max_edge_cost(instance)
    };
    let mut state = AuctionState::new(instance, engine_kind(params));
    if max_cost == 0.0 {
        // Every admissible edge is free; any perfect assignment is optimal.
        return RunReport {
            value: 0.0,
            max_edge_cost: 0.0,
            rounds: Vec::new(),
            bids: 0,
            allocated_value_entries: state.allocated_value_entries(),
        };
    }

    let mut order: Vec<usize> = (0..n).collect();
    if let Some(seed) = params.shuffle_seed {
        crate::rng::shuffle(&mut order, seed);
    }

    let one_plus_delta_q = pow_q(1.0 + params.delta, instance.q);
    // Seeding with (5/4) * max and dividing by 5 at the top of each round
    // makes the first effective epsilon exactly max / 4; computing it
    // directly keeps the value bit-exact.
    let mut epsilon = max_cost / 4.0;
    let mut rounds = Vec::new();
    let value;
    loop {
        state.begin_round(&order, epsilon);
        run_round(&mut state, instance);
        let cost = state.assignment_cost(instance);
        rounds.push(RoundStats { epsilon, cost });
        if cost == 0.0 {
            value = 0.0;
            break;
        }
        if cost <= one_plus_delta_q * (cost - (n as f64) * epsilon) {
            value = qth_root(cost, instance.q);
            break;
        }
        epsilon /= 5.0;
    }
    RunReport {
        value,
        max_edge_cost: max_cost,
        rounds,
        bids: state.bids(),
        allocated_value_entries: state.allocated_value_entries(),
    }
}

fn engine_kind(params: &AuctionParams) -> AuctionEngine {
    params.engine
}

enum EngineImpl {
    Geometric(GeometricEngine),
    Lazy(LazyEngine),
}

impl EngineImpl {
    fn best_two(
        &mut self,
        instance: &MatchingInstance,
        prices: &[f64],
        bidder: usize,
    ) -> (Candidate, Option<Candidate>) {
        match self {
            EngineImpl::Geometric(g) => g.best_two(instance, prices, bidder),
            EngineImpl::Lazy(l) => l.best_two(instance, prices, bidder),
        }
    }

    fn on_price_change(&mut self, object: usize, new_price: f64) {
        match self {
            EngineImpl::Geometric(g) => g.on_price_change(object, new_price),
            EngineImpl::Lazy(l) => l.record_change(object),
        }
    }

    fn allocated_entries(&self) -> usize {
        match self {
            EngineImpl::Geometric(g) => g.tree.node_count() + g.heap_peak,
            EngineImpl::Lazy(l) => l.allocated,
        }
    }
}

/// Totally ordered f64 key for the heaps.
#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

struct GeometricEngine {
    tree: WeightedKdTree,
    n_off: usize,
    n_diag: usize,
    /// Min-heap of (price, object) over diagonal objects; stale entries are
    /// dropped at pop time, and the heap is rebuilt when churn doubles it.
    diag_heap: BinaryHeap<std::cmp::Reverse<(OrdF64, usize)>>,
    heap_peak: usize,
}

impl GeometricEngine {
    fn new(instance: &MatchingInstance) -> Self {
        let n = instance.len();
        let n_off = instance.off_objects();
        let coords: Vec<[f64; 2]> = instance.objects[..n_off].iter().map(|o| o.coords).collect();
        let mut diag_heap = BinaryHeap::with_capacity(n - n_off);
        for obj in n_off..n {
            diag_heap.push(std::cmp::Reverse((OrdF64(0.0), obj)));
        }
        let heap_peak = diag_heap.len();
        GeometricEngine {
            tree: WeightedKdTree::build(&coords),
            n_off,
            n_diag: n - n_off,
            diag_heap,
            heap_peak,
        }
    }

    fn on_price_change(&mut self, object: usize, new_price: f64) {
        if object < self.n_off {
            self.tree.increase_weight(object, new_price);
        } else {
            self.diag_heap
                .push(std::cmp::Reverse((OrdF64(new_price), object)));
            self.heap_peak = self.heap_peak.max(self.diag_heap.len());
        }
    }

    /// Top two live diagonal objects by price; stale entries are purged.
    fn top_two_diag(&mut self, prices: &[f64]) -> [Option<Candidate>; 2] {
        let mut found: [Option<Candidate>; 2] = [None, None];
        let mut kept = Vec::with_capacity(2);
        let mut count = 0;
        while count < 2 {
            let Some(std::cmp::Reverse((price, obj))) = self.diag_heap.pop() else {
                break;
            };
            if price.0 == prices[obj] && !kept.contains(&obj) {
                found[count] = Some(Candidate {
                    total: price.0,
                    object: obj,
                });
                kept.push(obj);
                count += 1;
            }
        }
        for &obj in &kept {
            self.diag_heap
                .push(std::cmp::Reverse((OrdF64(prices[obj]), obj)));
        }
        found
    }

    fn maybe_rebuild(&mut self, prices: &[f64]) {
        if self.diag_heap.len() > 2 * self.n_diag.max(16) {
            self.diag_heap.clear();
            #[allow(clippy::needless_range_loop)]
            for obj in self.n_off..self.n_off + self.n_diag {
                self.diag_heap
                    .push(std::cmp::Reverse((OrdF64(prices[obj]), obj)));
            }
        }
    }

    fn best_two(
        &mut self,
        instance: &MatchingInstance,
        prices: &[f64],
        bidder: usize,
    ) -> (Candidate, Option<Candidate>) {
        self.maybe_rebuild(prices);
        let b = &instance.bidders[bidder];
        let partner = Candidate {
            total: instance.cost(bidder, b.partner) + prices[b.partner],
            object: b.partner,
        };
        let mut cands: Vec<Candidate> = vec![partner];
        match b.kind {
            PointKind::OffDiagonal => {
                if self.n_off > 0 {
                    let (best, second) = self.tree.best_two(b.coords, instance.q, None);
                    cands.push(Candidate {
                        total: best.1,
                        object: best.0,
                    });
                    if let Some((id, total)) = second {
                        cands.push(Candidate { total, object: id });
                    }
                }
            }
            PointKind::DiagonalProjection => {
                for c in self.top_two_diag(prices).into_iter().flatten() {
                    cands.push(c);
                }
            }
        }
        pick_best_two(cands)
    }
}

fn pick_best_two(mut cands: Vec<Candidate>) -> (Candidate, Option<Candidate>) {
    assert!(!cands.is_empty(), "bidder with no admissible object");
    cands.sort_by(|a, b| {
        a.total
            .total_cmp(&b.total)
            .then_with(|| a.object.cmp(&b.object))
    });
    (cands[0], cands.get(1).copied())
}

#[derive(Debug, Clone, Copy)]
struct LazyEntry {
    value: f64,
    object: usize,
}

impl PartialEq for LazyEntry {
    fn eq(&self, other: &Self) -> bool {
        self.value == other.value && self.object == other.object
    }
}
impl Eq for LazyEntry {}

impl PartialOrd for LazyEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for LazyEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // max-heap: higher value first, then smaller object id
        self.value
            .total_cmp(&other.value)
            .then_with(|| other.object.cmp(&self.object))
    }
}

/// The non-geometric baseline: one heap per bidder holding every admissible
/// object with a possibly stale value, plus a global price-change log and a
/// per-bidder cursor into it. Before choosing, a bidder refreshes the
/// entries of objects whose price changed since its cursor (or rebuilds its
/// heap outright once the backlog reaches half its size); entries whose
/// value no longer matches the current price are discarded at pop time.
/// Quadratic entries overall, by design.
struct LazyEngine {
    heaps: Vec<Option<BinaryHeap<LazyEntry>>>,
    cursors: Vec<usize>,
    price_log: Vec<usize>,
    allocated: usize,
}

impl LazyEngine {
    fn new(n: usize) -> Self {
        LazyEngine {
            heaps: (0..n).map(|_| None).collect(),
            cursors: vec![0; n],
            price_log: Vec::new(),
            allocated: 0,
        }
    }

    fn record_change(&mut self, object: usize) {
        self.price_log.push(object);
    }

    fn admissible(instance: &MatchingInstance, bidder: usize, object: usize) -> bool {
        let b = &instance.bidders[bidder];
        object == b.partner
            || match b.kind {
                PointKind::OffDiagonal => object < instance.off_objects(),
                PointKind::DiagonalProjection => object >= instance.off_objects(),
            }
    }

    fn fresh_entries(instance: &MatchingInstance, prices: &[f64], bidder: usize) -> Vec<LazyEntry> {
        let mut entries = Vec::new();
        Self::fill_entries(instance, prices, bidder, &mut entries);
        entries
    }

    fn fill_entries(
        instance: &MatchingInstance,
        prices: &[f64],
        bidder: usize,
        entries: &mut Vec<LazyEntry>,
    ) {
        let b = &instance.bidders[bidder];
        let n_off = instance.off_objects();
        let q = instance.q;
        // bulk loops pair like kinds only, so no skew pair can arise; the
        // arithmetic matches MatchingInstance::cost exactly
        match b.kind {
            PointKind::OffDiagonal => {
                entries.reserve(n_off + 1);
                for (j, o) in instance.objects[..n_off].iter().enumerate() {
                    entries.push(LazyEntry {
                        value: -pow_q(crate::instance::linf(b.coords, o.coords), q) - prices[j],
                        object: j,
                    });
                }
            }
            PointKind::DiagonalProjection => {
                entries.reserve(instance.len() - n_off + 1);
                #[allow(clippy::needless_range_loop)]
                for j in n_off..instance.len() {
                    entries.push(LazyEntry {
                        value: -prices[j],
                        object: j,
                    });
                }
            }
        }
        entries.push(LazyEntry {
            value: -instance.cost(bidder, b.partner) - prices[b.partner],
            object: b.partner,
        });
    }

    fn best_two(
        &mut self,
        instance: &MatchingInstance,
        prices: &[f64],
        bidder: usize,
    ) -> (Candidate, Option<Candidate>) {
        let backlog = self.price_log.len() - self.cursors[bidder].min(self.price_log.len());
        let n_off = instance.off_objects();
        let n_adm = match instance.bidders[bidder].kind {
            PointKind::OffDiagonal => n_off + 1,
            PointKind::DiagonalProjection => instance.len() - n_off + 1,
        };
        match &mut self.heaps[bidder] {
            slot @ None => {
                let entries = Self::fresh_entries(instance, prices, bidder);
                self.allocated += entries.len();
                *slot = Some(BinaryHeap::from(entries));
            }
            Some(heap) => {
                // A flat heapify rebuild costs a few ns per entry; replaying
                // a backlog entry costs a push now and a stale pop later, two
                // orders of magnitude more. Rebuild early.
                if backlog >= n_adm / 32 || heap.len() >= 2 * n_adm {
                    // reuse the allocation: drain the old heap and refill
                    let mut entries = std::mem::take(heap).into_vec();
                    entries.clear();
                    Self::fill_entries(instance, prices, bidder, &mut entries);
                    *heap = BinaryHeap::from(entries);
                } else {
                    // refresh each changed admissible object once, at its
                    // current price
                    let mut changed: Vec<usize> = self.price_log[self.cursors[bidder]..]
                        .iter()
                        .copied()
                        .filter(|&object| Self::admissible(instance, bidder, object))
                        .collect();
                    changed.sort_unstable();
                    changed.dedup();
                    for object in changed {
                        heap.push(LazyEntry {
                            value: -instance.cost(bidder, object) - prices[object],
                            object,
                        });
                    }
                }
            }
        }
        self.cursors[bidder] = self.price_log.len();

        let heap = self.heaps[bidder].as_mut().unwrap();
        let mut kept = Vec::with_capacity(2);
        let mut results: Vec<Candidate> = Vec::with_capacity(2);
        while results.len() < 2 {
            let Some(entry) = heap.pop() else { break };
            if results.iter().any(|c| c.object == entry.object) {
                continue; // duplicate snapshot of the object already chosen
            }
            let current = -instance.cost(bidder, entry.object) - prices[entry.object];
            if current == entry.value {
                results.push(Candidate {
                    total: -current,
                    object: entry.object,
                });
                kept.push(entry);
            }
            // stale snapshots (price rose since) are simply dropped; the
            // refreshed entry is already in the heap
        }
        for entry in kept {
            heap.push(entry);
        }
        let mut it = results.into_iter();
        (
            it.next().expect("bidder with no admissible object"),
            it.next(),
        )
    }
}
