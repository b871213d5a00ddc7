//! Exact reference solvers for small instances. These are the ground truth
//! for every approximation and engine-agreement test; they favor clarity
//! over speed and refuse instances beyond n = 512.

use crate::instance::{pow_q, MassBidderId, MassInstance, MassObjectId, MatchingInstance};

/// Hard ceiling for the dense solvers.
pub const ORACLE_MAX_N: usize = 512;

/// Dense n-by-n matrix of edge costs. Skew entries hold a finite sentinel
/// strictly larger than `n * max_finite_cost + 1`, so they can never appear
/// in an optimal solution (a skew-free perfect matching always exists).
#[derive(Debug, Clone)]
pub struct DenseCostMatrix {
    n: usize,
    costs: Vec<f64>,
    sentinel: f64,
}

impl DenseCostMatrix {
    /// Realizes the instance graph explicitly with costs `c^exponent`.
    /// Pass `exponent = 1.0` for bottleneck use.
    pub fn from_instance(instance: &MatchingInstance, exponent: f64) -> Self {
        let n = instance.len();
        assert!(n <= ORACLE_MAX_N, "oracle instance too large: {n}");
        let mut finite = Vec::with_capacity(n * n);
        let mut max_cost = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                if instance.is_skew(i, j) {
                    finite.push(f64::NAN); // placeholder, replaced below
                } else {
                    let c = pow_q(instance.distance(i, j), exponent);
                    max_cost = max_cost.max(c);
                    finite.push(c);
                }
            }
        }
        let sentinel = (n as f64) * max_cost.max(1.0) + 2.0;
        for v in &mut finite {
            if v.is_nan() {
                *v = sentinel;
            }
        }
        DenseCostMatrix {
            n,
            costs: finite,
            sentinel,
        }
    }

    /// Expands a mass instance to unit entities under the modified cost
    /// (which has no skew pairs) raised to `exponent`.
    pub fn from_mass_instance(instance: &MassInstance, exponent: f64) -> Self {
        let n = instance.total_mass() as usize;
        assert!(n <= ORACLE_MAX_N, "oracle instance too large: {n}");
        let mut bidders = Vec::with_capacity(n);
        for (i, b) in instance.bidders.iter().enumerate() {
            for _ in 0..b.mass {
                bidders.push(MassBidderId::Off(i));
            }
        }
        for _ in 0..instance.diag_bidder_mass {
            bidders.push(MassBidderId::Diagonal);
        }
        let mut objects = Vec::with_capacity(n);
        for (j, o) in instance.objects.iter().enumerate() {
            for _ in 0..o.mass {
                objects.push(MassObjectId::Off(j));
            }
        }
        for _ in 0..instance.diag_object_mass {
            objects.push(MassObjectId::Diagonal);
        }
        let mut costs = Vec::with_capacity(n * n);
        let mut max_cost = 0.0f64;
        for &b in &bidders {
            for &o in &objects {
                let c = pow_q(instance.base_distance(b, o), exponent);
                max_cost = max_cost.max(c);
                costs.push(c);
            }
        }
        let sentinel = (n as f64) * max_cost.max(1.0) + 2.0;
        DenseCostMatrix { n, costs, sentinel }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.costs[i * self.n + j]
    }

    /// True for entries that represent actual edges.
    #[inline]
    pub fn is_edge(&self, i: usize, j: usize) -> bool {
        self.at(i, j) < self.sentinel
    }
}

/// Exact q-Wasserstein cost of the instance: the q-th root of the minimum
/// sum of `c^q` over perfect matchings, via an O(n^3) assignment solver.
pub fn oracle_wasserstein(instance: &MatchingInstance) -> f64 {
    let m = DenseCostMatrix::from_instance(instance, instance.q);
    pow_q(solve_assignment(&m), 1.0 / instance.q)
}

/// Exact bottleneck cost: the smallest edge weight r such that the subgraph
/// of edges with weight at most r has a perfect matching.
pub fn oracle_bottleneck(instance: &MatchingInstance) -> f64 {
    let m = DenseCostMatrix::from_instance(instance, 1.0);
    solve_bottleneck(&m)
}

/// Minimum-cost perfect matching value by shortest augmenting paths with
/// potentials (the classic O(n^3) Hungarian scheme on a dense matrix).
pub fn solve_assignment(matrix: &DenseCostMatrix) -> f64 {
    let n = matrix.n;
    if n == 0 {
        return 0.0;
    }
    let none = n; // sentinel row id
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut row_of = vec![none; n + 1]; // row matched to each column; index n is virtual
    let mut way = vec![0usize; n + 1];

    for i in 0..n {
        row_of[n] = i;
        let mut j0 = n;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = n;
            for j in 0..n {
                if !used[j] {
                    let cur = matrix.at(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == none {
                break;
            }
        }
        // Augment along the recorded alternating path.
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == n {
                break;
            }
        }
    }
    sorted_sum((0..n).map(|j| matrix.at(row_of[j], j)))
}

/// Sums in ascending order so the result depends only on the multiset of
/// edge costs, not on the instance layout.
fn sorted_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.iter().sum()
}

/// Smallest edge weight whose threshold subgraph is perfectly matchable,
/// found by binary search over the sorted distinct weights with an explicit
/// Hopcroft–Karp feasibility test.
pub fn solve_bottleneck(matrix: &DenseCostMatrix) -> f64 {
    let n = matrix.n;
    if n == 0 {
        return 0.0;
    }
    let mut weights: Vec<f64> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if matrix.is_edge(i, j) {
                weights.push(matrix.at(i, j));
            }
        }
    }
    weights.sort_by(f64::total_cmp);
    weights.dedup();
    let feasible = |r: f64| {
        let adj: Vec<Vec<usize>> = (0..n)
            .map(|i| (0..n).filter(|&j| matrix.at(i, j) <= r).collect())
            .collect();
        hopcroft_karp_size(&adj, n) == n
    };
    let mut lo = 0usize;
    let mut hi = weights.len() - 1;
    debug_assert!(feasible(weights[hi]), "complete graph must be matchable");
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if feasible(weights[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    weights[lo]
}

/// Maximum matching size of a bipartite graph given as left-side adjacency.
fn hopcroft_karp_size(adj: &[Vec<usize>], n_right: usize) -> usize {
    let n_left = adj.len();
    const INF: usize = usize::MAX;
    let mut pair_left = vec![None::<usize>; n_left];
    let mut pair_right = vec![None::<usize>; n_right];
    let mut dist = vec![INF; n_left];
    let mut size = 0;

    loop {
        // BFS layering from free left vertices.
        let mut queue = std::collections::VecDeque::new();
        for (u, d) in dist.iter_mut().enumerate() {
            if pair_left[u].is_none() {
                *d = 0;
                queue.push_back(u);
            } else {
                *d = INF;
            }
        }
        let mut dist_nil = INF;
        while let Some(u) = queue.pop_front() {
            if dist[u] >= dist_nil {
                continue;
            }
            for &v in &adj[u] {
                match pair_right[v] {
                    None => {
                        if dist_nil == INF {
                            dist_nil = dist[u] + 1;
                        }
                    }
                    Some(w) => {
                        if dist[w] == INF {
                            dist[w] = dist[u] + 1;
                            queue.push_back(w);
                        }
                    }
                }
            }
        }
        if dist_nil == INF {
            break;
        }

        fn dfs(
            u: usize,
            adj: &[Vec<usize>],
            pair_left: &mut [Option<usize>],
            pair_right: &mut [Option<usize>],
            dist: &mut [usize],
            dist_nil: usize,
        ) -> bool {
            for idx in 0..adj[u].len() {
                let v = adj[u][idx];
                let ok = match pair_right[v] {
                    None => dist_nil == dist[u] + 1,
                    Some(w) => {
                        dist[w] == dist[u] + 1 && dfs(w, adj, pair_left, pair_right, dist, dist_nil)
                    }
                };
                if ok {
                    pair_right[v] = Some(u);
                    pair_left[u] = Some(v);
                    return true;
                }
            }
            dist[u] = usize::MAX;
            false
        }

        for u in 0..n_left {
            if pair_left[u].is_none()
                && dist[u] == 0
                && dfs(u, adj, &mut pair_left, &mut pair_right, &mut dist, dist_nil)
            {
                size += 1;
            }
        }
    }
    size
}

/// Brute-force minimum assignment cost over all n! permutations (n <= 8).
pub fn exhaustive_wasserstein(matrix: &DenseCostMatrix) -> f64 {
    assert!(matrix.n <= 8, "exhaustive solver limited to n <= 8");
    let mut cols: Vec<usize> = (0..matrix.n).collect();
    let mut best = f64::INFINITY;
    permute(&mut cols, 0, &mut |perm| {
        let cost = sorted_sum(perm.iter().enumerate().map(|(i, &j)| matrix.at(i, j)));
        if cost < best {
            best = cost;
        }
    });
    best
}

/// Brute-force minimum over matchings of the maximum edge weight (n <= 8).
pub fn exhaustive_bottleneck(matrix: &DenseCostMatrix) -> f64 {
    assert!(matrix.n <= 8, "exhaustive solver limited to n <= 8");
    let mut cols: Vec<usize> = (0..matrix.n).collect();
    let mut best = f64::INFINITY;
    permute(&mut cols, 0, &mut |perm| {
        let mut worst = 0.0f64;
        let mut skew = false;
        for (i, &j) in perm.iter().enumerate() {
            if !matrix.is_edge(i, j) {
                skew = true;
                break;
            }
            worst = worst.max(matrix.at(i, j));
        }
        if !skew && worst < best {
            best = worst;
        }
    });
    best
}

fn permute(items: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        f(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, f);
        items.swap(k, i);
    }
}
