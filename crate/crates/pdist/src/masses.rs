//! Auction with integer masses: multi-bidders acquire fractions of
//! multi-objects, which are decomposed lazily into slices (object, mass,
//! price, owner). One aggregated diagonal multi-bidder and multi-object
//! stand in for all projections, which the modified cost function makes
//! interchangeable.
//!
//! A bidding iteration gathers the best-valued slices not owned by the
//! bidder until their mass exceeds the missing amount, splits the leftover
//! of the last slice (price and owner unchanged), identifies the reference
//! slice `s_l` holding the next unit of mass (or the first slice of a
//! different multi-object when everything acquired so far is one object),
//! and lifts each owned slice's price so its value drops to the reference
//! value minus epsilon. Off-diagonal candidates come from a weighted k-d
//! tree keyed by the cheapest slice price per object; the diagonal object's
//! slices stream from a price heap and the diagonal bidder streams every
//! slice from a value heap. Epsilon-scaling and the termination test follow
//! the standard auction with n replaced by the total mass.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use crate::auction::RoundStats;
use crate::diagram::PersistenceDiagram;
use crate::error::{Error, Result};
use crate::instance::{build_mass_instance, pow_q, MassBidderId, MassInstance, MassObjectId};
use crate::rng::{shuffle, SplitMix64};
use crate::spatial::{WeightedKdTree, WeightedVisitor};

const DEFAULT_MASS_SEED: u64 = 0x6d61_7373; // "mass"

#[derive(Debug, Clone)]
pub struct MassAuctionParams {
    pub delta: f64,
    /// Seed for the per-round shuffle of the bidder order.
    pub seed: u64,
    /// Verify slice invariants after every bidding iteration.
    pub audit: bool,
}

impl MassAuctionParams {
    pub fn new(delta: f64) -> Self {
        MassAuctionParams {
            delta,
            seed: DEFAULT_MASS_SEED,
            audit: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MassRunReport {
    pub value: f64,
    pub max_edge_cost: f64,
    pub rounds: Vec<RoundStats>,
    /// Total bidding iterations across all rounds.
    pub iterations: u64,
    /// Largest number of live slices observed.
    pub peak_slices: usize,
}

/// A contiguous fraction of a multi-object: who owns it and at what price.
#[derive(Debug, Clone)]
pub struct Slice {
    pub object: usize,
    pub mass: u64,
    pub price: f64,
    /// Internal bidder index, `None` while unassigned.
    pub owner: Option<usize>,
    alive: bool,
    stamp: u64,
}

/// Heap key ordering f64 totally.
#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdF64(f64);
impl Eq for OrdF64 {}
impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Max-heap entry ordered by (value desc, object asc, slice asc).
type ValueEntry = (OrdF64, Reverse<usize>, Reverse<usize>);

/// Mutable state of the mass auction. Bidders and objects use internal
/// indices with the off-diagonal entities first and the aggregated diagonal
/// entity (when its mass is positive) last.
pub struct MassAuctionState {
    slices: Vec<Slice>,
    obj_slices: Vec<Vec<usize>>,
    owned: Vec<Vec<usize>>,
    owned_mass: Vec<u64>,
    bidder_mass: Vec<u64>,
    object_mass: Vec<u64>,
    n_off_objects: usize,
    diag_bidder: Option<usize>,
    diag_object: Option<usize>,
    pub epsilon: f64,
    unassigned: VecDeque<usize>,
    in_queue: Vec<bool>,
    tree: Option<WeightedKdTree>,
    /// Slices of the diagonal multi-object by (price, slice id).
    diag_price_heap: BinaryHeap<Reverse<(OrdF64, usize)>>,
    /// Every slice by its value for the diagonal bidder.
    value_heap: BinaryHeap<ValueEntry>,
    largest_gap: f64,
    stamp: u64,
    iterations: u64,
    live_slices: usize,
    peak_slices: usize,
}

impl MassAuctionState {
    pub fn new(instance: &MassInstance) -> Self {
        let nb_off = instance.bidders.len();
        let no_off = instance.objects.len();
        let diag_bidder = (instance.diag_bidder_mass > 0).then_some(nb_off);
        let diag_object = (instance.diag_object_mass > 0).then_some(no_off);
        let nb = nb_off + diag_bidder.is_some() as usize;
        let no = no_off + diag_object.is_some() as usize;

        let mut bidder_mass: Vec<u64> = instance.bidders.iter().map(|b| b.mass).collect();
        if diag_bidder.is_some() {
            bidder_mass.push(instance.diag_bidder_mass);
        }
        let mut object_mass: Vec<u64> = instance.objects.iter().map(|o| o.mass).collect();
        if diag_object.is_some() {
            object_mass.push(instance.diag_object_mass);
        }

        let tree = (no_off > 0).then(|| {
            let coords: Vec<[f64; 2]> = instance.objects.iter().map(|o| o.coords).collect();
            WeightedKdTree::build(&coords)
        });

        let mut state = MassAuctionState {
            slices: Vec::new(),
            obj_slices: vec![Vec::new(); no],
            owned: vec![Vec::new(); nb],
            owned_mass: vec![0; nb],
            bidder_mass,
            object_mass,
            n_off_objects: no_off,
            diag_bidder,
            diag_object,
            epsilon: 0.0,
            unassigned: VecDeque::new(),
            in_queue: vec![false; nb],
            tree,
            diag_price_heap: BinaryHeap::new(),
            value_heap: BinaryHeap::new(),
            largest_gap: 0.0,
            stamp: 0,
            iterations: 0,
            live_slices: 0,
            peak_slices: 0,
        };
        for (object, &mass) in state.object_mass.clone().iter().enumerate() {
            state.spawn_slice(instance, object, mass, 0.0, None);
        }
        state
    }

    pub fn bidder_count(&self) -> usize {
        self.bidder_mass.len()
    }

    pub fn iterations(&self) -> u64 {
        self.iterations
    }

    pub fn slices(&self) -> impl Iterator<Item = &Slice> {
        self.slices.iter().filter(|s| s.alive)
    }

    fn bidder_id(&self, i: usize) -> MassBidderId {
        if Some(i) == self.diag_bidder {
            MassBidderId::Diagonal
        } else {
            MassBidderId::Off(i)
        }
    }

    fn object_id(&self, j: usize) -> MassObjectId {
        if Some(j) == self.diag_object {
            MassObjectId::Diagonal
        } else {
            MassObjectId::Off(j)
        }
    }

    fn benefit(&self, instance: &MassInstance, bidder: usize, object: usize) -> f64 {
        instance.benefit(self.bidder_id(bidder), self.object_id(object))
    }

    fn spawn_slice(
        &mut self,
        instance: &MassInstance,
        object: usize,
        mass: u64,
        price: f64,
        owner: Option<usize>,
    ) -> usize {
        let id = self.slices.len();
        self.slices.push(Slice {
            object,
            mass,
            price,
            owner,
            alive: true,
            stamp: 0,
        });
        self.obj_slices[object].push(id);
        if let Some(o) = owner {
            self.owned[o].push(id);
        }
        self.live_slices += 1;
        self.peak_slices = self.peak_slices.max(self.live_slices);
        self.push_heap_entries(instance, id);
        id
    }

    fn kill_slice(&mut self, id: usize) {
        self.slices[id].alive = false;
        self.live_slices -= 1;
    }

    fn push_heap_entries(&mut self, instance: &MassInstance, id: usize) {
        let s = &self.slices[id];
        if Some(s.object) == self.diag_object {
            self.diag_price_heap.push(Reverse((OrdF64(s.price), id)));
        }
        if let Some(db) = self.diag_bidder {
            let value = self.benefit(instance, db, s.object) - s.price;
            self.value_heap
                .push((OrdF64(value), Reverse(s.object), Reverse(id)));
        }
        self.maybe_shrink_heaps(instance);
    }

    fn maybe_shrink_heaps(&mut self, instance: &MassInstance) {
        let cap = 2 * self.live_slices.max(16);
        if self.diag_price_heap.len() > cap {
            let mut fresh = BinaryHeap::new();
            if let Some(dobj) = self.diag_object {
                for &sid in &self.obj_slices[dobj] {
                    if self.slices[sid].alive {
                        fresh.push(Reverse((OrdF64(self.slices[sid].price), sid)));
                    }
                }
            }
            self.diag_price_heap = fresh;
        }
        if self.value_heap.len() > cap {
            if let Some(db) = self.diag_bidder {
                let mut fresh = BinaryHeap::new();
                for (sid, s) in self.slices.iter().enumerate() {
                    if s.alive {
                        let value = instance.benefit(self.bidder_id(db), self.object_id(s.object))
                            - s.price;
                        fresh.push((OrdF64(value), Reverse(s.object), Reverse(sid)));
                    }
                }
                self.value_heap = fresh;
            } else {
                self.value_heap.clear();
            }
        }
    }

    /// Clears ownership (prices persist), merges equal-price slices per
    /// object, reshuffles the bidder order, and rebuilds the heaps.
    pub fn begin_round(&mut self, instance: &MassInstance, epsilon: f64, order: &[usize]) {
        assert!(epsilon > 0.0, "rounds need a positive epsilon");
        self.epsilon = epsilon;
        self.largest_gap = 0.0;
        for owned in &mut self.owned {
            owned.clear();
        }
        self.owned_mass.iter_mut().for_each(|m| *m = 0);
        for object in 0..self.obj_slices.len() {
            let mut ids: Vec<usize> = self.obj_slices[object]
                .iter()
                .copied()
                .filter(|&id| self.slices[id].alive)
                .collect();
            ids.sort_by(|&a, &b| {
                self.slices[a]
                    .price
                    .total_cmp(&self.slices[b].price)
                    .then(a.cmp(&b))
            });
            let mut kept: Vec<usize> = Vec::with_capacity(ids.len());
            for id in ids {
                self.slices[id].owner = None;
                match kept.last() {
                    Some(&prev) if self.slices[prev].price == self.slices[id].price => {
                        self.slices[prev].mass += self.slices[id].mass;
                        self.kill_slice(id);
                    }
                    _ => kept.push(id),
                }
            }
            self.obj_slices[object] = kept;
        }
        // heaps refer to killed slices; rebuild them from scratch
        self.diag_price_heap.clear();
        if let Some(dobj) = self.diag_object {
            for &sid in &self.obj_slices[dobj] {
                self.diag_price_heap
                    .push(Reverse((OrdF64(self.slices[sid].price), sid)));
            }
        }
        self.value_heap.clear();
        if let Some(db) = self.diag_bidder {
            for sid in 0..self.slices.len() {
                if self.slices[sid].alive {
                    let s = &self.slices[sid];
                    let value = self.benefit(instance, db, s.object) - s.price;
                    self.value_heap
                        .push((OrdF64(value), Reverse(s.object), Reverse(sid)));
                }
            }
        }
        self.unassigned = order.iter().copied().collect();
        self.in_queue.iter_mut().for_each(|q| *q = true);
    }

    /// Sum of `mass * cost` over assigned slices.
    pub fn assignment_cost(&self, instance: &MassInstance) -> f64 {
        self.slices
            .iter()
            .filter(|s| s.alive)
            .filter_map(|s| {
                s.owner.map(|o| {
                    s.mass as f64
                        * pow_q(
                            instance.base_distance(self.bidder_id(o), self.object_id(s.object)),
                            instance.q,
                        )
                })
            })
            .sum()
    }

    /// Slice bookkeeping audit: per-object mass conservation, ownership
    /// consistency, equal price for same-owner slices of one object, slice
    /// count bounded by total mass, and tree weights equal to the cheapest
    /// slice price. Panics on violation.
    pub fn check_invariants(&self, instance: &MassInstance) {
        let mut live = 0usize;
        for (object, ids) in self.obj_slices.iter().enumerate() {
            let mut total = 0u64;
            let mut per_owner: Vec<(usize, f64)> = Vec::new();
            for &id in ids {
                let s = &self.slices[id];
                assert!(s.alive, "object list holds dead slice {id}");
                assert!(s.mass >= 1, "slice {id} below unit mass");
                assert_eq!(s.object, object);
                total += s.mass;
                live += 1;
                if let Some(o) = s.owner {
                    match per_owner.iter().find(|&&(ow, _)| ow == o) {
                        Some(&(_, p)) => assert_eq!(
                            p, s.price,
                            "owner {o} holds slices of object {object} at unequal prices"
                        ),
                        None => per_owner.push((o, s.price)),
                    }
                }
            }
            assert_eq!(
                total, self.object_mass[object],
                "object {object} mass not conserved"
            );
        }
        assert!(
            live <= instance.total_mass() as usize,
            "more slices than mass units"
        );
        assert_eq!(live, self.live_slices);
        for (bidder, ids) in self.owned.iter().enumerate() {
            let mut total = 0u64;
            for &id in ids {
                let s = &self.slices[id];
                assert!(s.alive, "owned list holds dead slice {id}");
                assert_eq!(s.owner, Some(bidder));
                total += s.mass;
            }
            assert_eq!(
                total, self.owned_mass[bidder],
                "bidder {bidder} mass ledger"
            );
            assert!(total <= self.bidder_mass[bidder]);
        }
        if let Some(tree) = &self.tree {
            for object in 0..self.n_off_objects {
                let min = self.obj_slices[object]
                    .iter()
                    .map(|&id| self.slices[id].price)
                    .fold(f64::INFINITY, f64::min);
                assert_eq!(
                    tree.weight(object),
                    min,
                    "tree weight stale for object {object}"
                );
            }
            tree.check_invariants();
        }
    }
}

/// One candidate slice during gathering.
#[derive(Debug, Clone, Copy)]
struct Cand {
    value: f64,
    object: usize,
    slice: usize,
    mass: u64,
}

fn cand_before(a: &Cand, b: &Cand) -> bool {
    match a.value.total_cmp(&b.value) {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => (a.object, a.slice) < (b.object, b.slice),
    }
}

/// Best-first candidate set. Keeps the value-sorted prefix covering
/// `need_mass` units plus enough extra to always retain `need_objects`
/// distinct multi-objects (for the reference-slice rule); the worst kept
/// value doubles as the search pruning threshold.
struct CandidateSet {
    entries: Vec<Cand>,
    total_mass: u64,
    need_mass: u64,
    need_objects: usize,
}

impl CandidateSet {
    fn new(need_mass: u64, need_objects: usize) -> Self {
        CandidateSet {
            entries: Vec::new(),
            total_mass: 0,
            need_mass,
            need_objects,
        }
    }

    fn distinct_objects_without_last(&self) -> usize {
        let mut seen: Vec<usize> = Vec::new();
        for c in &self.entries[..self.entries.len() - 1] {
            if !seen.contains(&c.object) {
                seen.push(c.object);
            }
        }
        seen.len()
    }

    fn distinct_objects(&self) -> usize {
        let mut seen: Vec<usize> = Vec::new();
        for c in &self.entries {
            if !seen.contains(&c.object) {
                seen.push(c.object);
            }
        }
        seen.len()
    }

    fn requirement_met(&self) -> bool {
        self.total_mass >= self.need_mass && self.distinct_objects() >= self.need_objects
    }

    /// True when a streamed candidate of this value (and everything after
    /// it) can no longer matter.
    fn stream_stop(&self, value: f64) -> bool {
        self.requirement_met()
            && value
                <= self
                    .entries
                    .last()
                    .map(|c| c.value)
                    .unwrap_or(f64::NEG_INFINITY)
    }

    /// Pruning threshold in `distance^q + price` space.
    fn prune_bound(&self) -> f64 {
        if self.requirement_met() {
            -self.entries.last().unwrap().value
        } else {
            f64::INFINITY
        }
    }

    fn insert(&mut self, cand: Cand) {
        if self.stream_stop(cand.value) {
            return;
        }
        let pos = self.entries.partition_point(|e| cand_before(e, &cand));
        self.entries.insert(pos, cand);
        self.total_mass += cand.mass;
        // trim from the worst end while the requirements survive removal
        while let Some(last) = self.entries.last() {
            if self.total_mass - last.mass < self.need_mass {
                break;
            }
            if self.distinct_objects_without_last() < self.need_objects {
                break;
            }
            self.total_mass -= last.mass;
            self.entries.pop();
        }
    }
}

struct OffDiagGather<'a> {
    slices: &'a [Slice],
    obj_slices: &'a [Vec<usize>],
    bidder: usize,
    cands: &'a mut CandidateSet,
}

impl WeightedVisitor for OffDiagGather<'_> {
    fn prune_bound(&self) -> f64 {
        self.cands.prune_bound()
    }

    fn visit(&mut self, object: usize, dist_pow: f64, _weight: f64) {
        for &sid in &self.obj_slices[object] {
            let s = &self.slices[sid];
            if s.owner == Some(self.bidder) {
                continue;
            }
            self.cands.insert(Cand {
                value: -dist_pow - s.price,
                object,
                slice: sid,
                mass: s.mass,
            });
        }
    }
}

/// One bidding iteration: the bidder acquires its missing mass and lifts the
/// prices of everything it owns.
pub fn mass_bid(state: &mut MassAuctionState, instance: &MassInstance, bidder: usize) {
    state.iterations += 1;
    state.stamp += 1;
    let missing = state.bidder_mass[bidder] - state.owned_mass[bidder];
    debug_assert!(missing >= 1, "bidder {bidder} has nothing to acquire");

    let total_objects = state.obj_slices.len();
    let mut cands = CandidateSet::new(missing + 1, total_objects.min(2));

    if Some(bidder) == state.diag_bidder {
        gather_from_value_heap(state, instance, bidder, &mut cands);
    } else {
        gather_off_diagonal(state, instance, bidder, &mut cands);
    }

    let cand_list = cands.entries;
    execute_bid(state, instance, bidder, missing, cand_list);
}

fn gather_off_diagonal(
    state: &mut MassAuctionState,
    instance: &MassInstance,
    bidder: usize,
    cands: &mut CandidateSet,
) {
    // off-diagonal multi-objects through the weighted tree
    if let Some(tree) = state.tree.take() {
        {
            let mut visitor = OffDiagGather {
                slices: &state.slices,
                obj_slices: &state.obj_slices,
                bidder,
                cands,
            };
            tree.search(instance.bidders[bidder].coords, instance.q, &mut visitor);
        }
        state.tree = Some(tree);
    }
    // then the diagonal object's slices, cheapest first
    if let Some(diag_object) = state.diag_object {
        let benefit = state.benefit(instance, bidder, diag_object);
        let mut kept: Vec<Reverse<(OrdF64, usize)>> = Vec::new();
        while let Some(Reverse((price, sid))) = state.diag_price_heap.pop() {
            let s = &state.slices[sid];
            if !s.alive || s.price != price.0 {
                continue; // stale
            }
            if s.stamp == state.stamp {
                kept.push(Reverse((price, sid)));
                continue;
            }
            state.slices[sid].stamp = state.stamp;
            kept.push(Reverse((price, sid)));
            let s = &state.slices[sid];
            if s.owner == Some(bidder) {
                continue;
            }
            let value = benefit - s.price;
            if cands.stream_stop(value) {
                break;
            }
            cands.insert(Cand {
                value,
                object: s.object,
                slice: sid,
                mass: s.mass,
            });
        }
        for e in kept {
            state.diag_price_heap.push(e);
        }
    }
}

fn gather_from_value_heap(
    state: &mut MassAuctionState,
    instance: &MassInstance,
    bidder: usize,
    cands: &mut CandidateSet,
) {
    let mut kept: Vec<ValueEntry> = Vec::new();
    while let Some(entry) = state.value_heap.pop() {
        let (OrdF64(value), Reverse(_object), Reverse(sid)) = entry;
        let s = &state.slices[sid];
        if !s.alive {
            continue;
        }
        let current = state.benefit(instance, bidder, s.object) - s.price;
        if current != value {
            continue; // stale
        }
        if s.stamp == state.stamp {
            kept.push(entry);
            continue;
        }
        state.slices[sid].stamp = state.stamp;
        kept.push(entry);
        let s = &state.slices[sid];
        if s.owner == Some(bidder) {
            continue;
        }
        if cands.stream_stop(value) {
            break;
        }
        cands.insert(Cand {
            value,
            object: s.object,
            slice: sid,
            mass: s.mass,
        });
    }
    for e in kept {
        state.value_heap.push(e);
    }
}

fn execute_bid(
    state: &mut MassAuctionState,
    instance: &MassInstance,
    bidder: usize,
    missing: u64,
    cand_list: Vec<Cand>,
) {
    // take the best-valued prefix covering the missing mass
    let mut cum = 0u64;
    let mut k = 0usize;
    while cum < missing {
        assert!(
            k < cand_list.len(),
            "candidate gathering must cover the missing mass"
        );
        cum += cand_list[k].mass;
        k += 1;
    }

    // split the leftover of the last taken slice
    let mut leftover_value: Option<f64> = None;
    if cum > missing {
        let extra = cum - missing;
        let c = cand_list[k - 1];
        let (price, owner) = {
            let s = &state.slices[c.slice];
            (s.price, s.owner)
        };
        state.spawn_slice(instance, c.object, extra, price, owner);
        state.slices[c.slice].mass -= extra;
        leftover_value = Some(c.value);
    }
    let taken = &cand_list[..k];

    // the set of objects the bidder now touches (owned before + taken)
    let mut obj_set: Vec<usize> = Vec::new();
    for c in taken {
        if !obj_set.contains(&c.object) {
            obj_set.push(c.object);
        }
    }
    for &sid in &state.owned[bidder] {
        let o = state.slices[sid].object;
        if !obj_set.contains(&o) {
            obj_set.push(o);
        }
    }

    // reference value v_l
    let v_l_found: Option<f64> = if obj_set.len() >= 2 {
        leftover_value.or_else(|| cand_list.get(k).map(|c| c.value))
    } else {
        let lone = obj_set[0];
        cand_list[k..]
            .iter()
            .find(|c| c.object != lone)
            .map(|c| c.value)
    };
    let v_l = v_l_found.unwrap_or_else(|| {
        // Degenerate market: no reference slice exists. Fall back to the
        // worst value the bidder holds minus the largest gap seen this
        // round; any increment of at least epsilon keeps the epsilon-CS
        // argument intact.
        let mut vmin = taken.iter().map(|c| c.value).fold(f64::INFINITY, f64::min);
        for &sid in &state.owned[bidder] {
            let s = &state.slices[sid];
            let v = state.benefit(instance, bidder, s.object) - s.price;
            vmin = vmin.min(v);
        }
        vmin - state.largest_gap
    });
    if let (Some(vl), Some(best)) = (v_l_found, taken.first()) {
        let gap = best.value - vl;
        if gap > state.largest_gap {
            state.largest_gap = gap;
        }
    }

    // transfer ownership of the taken slices, evicting previous owners
    for c in taken {
        let prev = state.slices[c.slice].owner;
        let mass = state.slices[c.slice].mass;
        if let Some(o) = prev {
            debug_assert_ne!(o, bidder, "own slices are never candidates");
            state.owned_mass[o] -= mass;
            state.owned[o].retain(|&sid| sid != c.slice);
            if !state.in_queue[o] {
                state.unassigned.push_back(o);
                state.in_queue[o] = true;
            }
        }
        state.slices[c.slice].owner = Some(bidder);
        state.owned[bidder].push(c.slice);
        state.owned_mass[bidder] += mass;
    }
    debug_assert_eq!(state.owned_mass[bidder], state.bidder_mass[bidder]);

    // lift every owned slice to value v_l - epsilon: price = benefit - v_l + eps,
    // computed once per object so equal-owner prices are bit-identical
    let eps = state.epsilon;
    for &object in &obj_set {
        let new_price = state.benefit(instance, bidder, object) - v_l + eps;
        let mut changed = false;
        for idx in 0..state.owned[bidder].len() {
            let sid = state.owned[bidder][idx];
            if state.slices[sid].object != object {
                continue;
            }
            let old = state.slices[sid].price;
            debug_assert!(
                new_price >= old,
                "price of slice {sid} would drop: {old} -> {new_price}"
            );
            if new_price != old {
                state.slices[sid].price = new_price;
                changed = true;
            }
        }
        merge_owned(state, bidder, object);
        if changed || cum > missing {
            refresh_object(state, instance, object);
        }
    }
}

/// Merges the bidder's slices of one object (their prices are equal after a
/// bid) into the slice with the smallest creation index.
fn merge_owned(state: &mut MassAuctionState, bidder: usize, object: usize) {
    let mut mine: Vec<usize> = state.obj_slices[object]
        .iter()
        .copied()
        .filter(|&sid| state.slices[sid].owner == Some(bidder))
        .collect();
    if mine.len() < 2 {
        return;
    }
    mine.sort_unstable();
    let survivor = mine[0];
    let mut extra = 0u64;
    for &sid in &mine[1..] {
        extra += state.slices[sid].mass;
        state.kill_slice(sid);
    }
    state.slices[survivor].mass += extra;
    state.obj_slices[object].retain(|&sid| state.slices[sid].alive);
    state.owned[bidder].retain(|&sid| state.slices[sid].alive);
}

/// Re-publishes an object's slices after price changes: fresh heap entries
/// and, for off-diagonal objects, the tree weight (its cheapest price).
fn refresh_object(state: &mut MassAuctionState, instance: &MassInstance, object: usize) {
    for i in 0..state.obj_slices[object].len() {
        let sid = state.obj_slices[object][i];
        let s = &state.slices[sid];
        if Some(object) == state.diag_object {
            state.diag_price_heap.push(Reverse((OrdF64(s.price), sid)));
        }
        if let Some(db) = state.diag_bidder {
            let value = state.benefit(instance, db, object) - s.price;
            state
                .value_heap
                .push((OrdF64(value), Reverse(object), Reverse(sid)));
        }
    }
    state.maybe_shrink_heaps(instance);
    if object < state.n_off_objects {
        let min = state.obj_slices[object]
            .iter()
            .map(|&sid| state.slices[sid].price)
            .fold(f64::INFINITY, f64::min);
        if let Some(tree) = state.tree.as_mut() {
            tree.increase_weight(object, min);
        }
    }
}

fn run_mass_round(state: &mut MassAuctionState, instance: &MassInstance, audit: bool) {
    while let Some(b) = state.unassigned.pop_front() {
        state.in_queue[b] = false;
        if state.owned_mass[b] < state.bidder_mass[b] {
            mass_bid(state, instance, b);
            if audit {
                state.check_invariants(instance);
            }
        }
    }
}

/// Largest `|benefit|` over all bidder/object pairs.
pub fn mass_max_edge_cost(instance: &MassInstance) -> f64 {
    let mut bidders: Vec<MassBidderId> =
        (0..instance.bidders.len()).map(MassBidderId::Off).collect();
    if instance.diag_bidder_mass > 0 {
        bidders.push(MassBidderId::Diagonal);
    }
    let mut objects: Vec<MassObjectId> =
        (0..instance.objects.len()).map(MassObjectId::Off).collect();
    if instance.diag_object_mass > 0 {
        objects.push(MassObjectId::Diagonal);
    }
    let mut m = 0.0f64;
    for &b in &bidders {
        for &o in &objects {
            m = m.max(pow_q(instance.base_distance(b, o), instance.q));
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

/// Delta-approximate q-Wasserstein distance over aggregated multi-points.
pub fn wasserstein_masses(
    x: &PersistenceDiagram,
    y: &PersistenceDiagram,
    q: f64,
    delta: f64,
) -> Result<f64> {
    Ok(wasserstein_masses_with(x, y, q, &MassAuctionParams::new(delta))?.value)
}

pub fn wasserstein_masses_with(
    x: &PersistenceDiagram,
    y: &PersistenceDiagram,
    q: f64,
    params: &MassAuctionParams,
) -> Result<MassRunReport> {
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
        return Ok(MassRunReport {
            value: 0.0,
            max_edge_cost: 0.0,
            rounds: Vec::new(),
            iterations: 0,
            peak_slices: 0,
        });
    }
    let instance = build_mass_instance(x, y, q)?;
    Ok(run_mass_auction(&instance, params))
}

/// Mass auction over an already-built instance.
pub fn run_mass_auction(instance: &MassInstance, params: &MassAuctionParams) -> MassRunReport {
    let max_cost = mass_max_edge_cost(instance);
    let mut state = MassAuctionState::new(instance);
    if max_cost == 0.0 {
        return MassRunReport {
            value: 0.0,
            max_edge_cost: 0.0,
            rounds: Vec::new(),
            iterations: 0,
            peak_slices: state.peak_slices,
        };
    }
    let n = instance.total_mass() as f64;
    let one_plus_delta_q = pow_q(1.0 + params.delta, instance.q);
    let mut order: Vec<usize> = (0..state.bidder_count()).collect();
    let mut order_rng = SplitMix64::new(params.seed);
    let mut epsilon = max_cost / 4.0;
    let mut rounds = Vec::new();
    let value;
    loop {
        shuffle(&mut order, order_rng.next_u64());
        state.begin_round(instance, epsilon, &order);
        run_mass_round(&mut state, instance, params.audit);
        let cost = state.assignment_cost(instance);
        rounds.push(RoundStats { epsilon, cost });
        if cost == 0.0 {
            value = 0.0;
            break;
        }
        if cost <= one_plus_delta_q * (cost - n * epsilon) {
            value = qth_root(cost, instance.q);
            break;
        }
        epsilon /= 5.0;
    }
    MassRunReport {
        value,
        max_edge_cost: max_cost,
        rounds,
        iterations: state.iterations(),
        peak_slices: state.peak_slices,
    }
}
