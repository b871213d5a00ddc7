//! Acceptance gate: one test per criterion, each printing a PASS line.
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines
//! as they complete. Tests serialize on a global lock so the timing
//! measurements never contend with each other.

use std::sync::Mutex;
use std::time::Instant;

use pdist::auction::{AuctionEngine, AuctionParams};
use pdist::bottleneck::{feasible, max_dist_3approx, BottleneckEngine, HkState};
use pdist::diagram::PersistenceDiagram;
use pdist::instance::{build_instance, linf, pow_q};
use pdist::masses::MassAuctionParams;
use pdist::oracle;
use pdist::spatial::{DeletableKdTree, WeightedKdTree};
use pdist_cli::{gen_massed, gen_normal, run_bench, BenchConfig, BenchRecord};

static GATE: Mutex<()> = Mutex::new(());

fn serialize() -> std::sync::MutexGuard<'static, ()> {
    GATE.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

/// The shared corpus: 100 `normal` pairs with n in {4..64} and 100
/// mass-expanded pairs (average mass 3, expanded to unit copies).
fn corpus() -> Vec<(PersistenceDiagram, PersistenceDiagram)> {
    let mut pairs = Vec::with_capacity(200);
    for i in 0..20 {
        let n = 4 + 3 * i;
        for seed in 0..5u64 {
            let s = 1000 + (i as u64) * 10 + seed;
            pairs.push((gen_normal(n, 100.0, 2 * s), gen_normal(n, 100.0, 2 * s + 1)));
        }
    }
    for i in 0..20 {
        let n = 2 + i;
        for seed in 0..5u64 {
            let s = 5000 + (i as u64) * 10 + seed;
            pairs.push((
                gen_massed(n, 100.0, 3, 2 * s).expand(),
                gen_massed(n, 100.0, 3, 2 * s + 1).expand(),
            ));
        }
    }
    pairs
}

#[test]
fn criterion_1_exact_bottleneck_equals_oracle() {
    let _g = serialize();
    let start = Instant::now();
    let pairs = corpus();
    assert_eq!(pairs.len(), 200);
    for (i, (x, y)) in pairs.iter().enumerate() {
        let instance = build_instance(x, y, 1.0).unwrap();
        let want = oracle::oracle_bottleneck(&instance);
        let got = pdist::exact_bottleneck(x, y, 0.01).unwrap();
        assert!(got == want, "pair {i}: exact {got} != oracle {want}");
    }
    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 60.0,
        "criterion 1 exceeded its runtime budget: {elapsed:?}"
    );
    println!("criterion 1 (exact bottleneck = oracle, 200 pairs, {elapsed:?}): PASS");
}

#[test]
fn criterion_2_bottleneck_approximation_contract() {
    let _g = serialize();
    let pairs = corpus();
    for delta in [0.1, 0.01] {
        for engine in [BottleneckEngine::Geometric, BottleneckEngine::NonGeometric] {
            for (i, (x, y)) in pairs.iter().enumerate() {
                let instance = build_instance(x, y, 1.0).unwrap();
                let o = oracle::oracle_bottleneck(&instance);
                let (_, b) = pdist::approx_bottleneck_with(x, y, delta, engine).unwrap();
                if o == 0.0 {
                    assert_eq!(b, 0.0, "pair {i}");
                } else {
                    assert!(
                        o <= b && b < (1.0 + delta) * o,
                        "pair {i} delta={delta} {engine:?}: b={b} outside [{o}, {})",
                        (1.0 + delta) * o
                    );
                }
            }
        }
    }
    println!("criterion 2 (bottleneck approximation contract): PASS");
}

#[test]
fn criterion_3_wasserstein_approximation_contract() {
    let _g = serialize();
    let start = Instant::now();
    let pairs = &corpus()[..100]; // the normal half; n <= 64 per diagram
    for q in [1.0, 2.0] {
        for (i, (x, y)) in pairs.iter().enumerate() {
            let instance = build_instance(x, y, q).unwrap();
            let o = oracle::oracle_wasserstein(&instance);
            for delta in [0.1, 0.01] {
                for engine in [AuctionEngine::Geometric, AuctionEngine::LazyHeap] {
                    let d = pdist::wasserstein(x, y, q, delta, engine).unwrap();
                    if o == 0.0 {
                        assert_eq!(d, 0.0, "pair {i}");
                    } else {
                        let ratio = d / o;
                        assert!(
                            (1.0 - 1e-9..1.0 + delta).contains(&ratio),
                            "pair {i} q={q} delta={delta} {engine:?}: ratio {ratio}"
                        );
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 120.0,
        "criterion 3 exceeded its runtime budget: {elapsed:?}"
    );
    println!("criterion 3 (Wasserstein approximation contract, {elapsed:?}): PASS");
}

#[test]
fn criterion_4_masses_standard_equivalence() {
    let _g = serialize();
    for i in 0..50u64 {
        let n = 2 + (i as usize) % 9;
        let x = gen_massed(n, 100.0, 3, 9000 + 2 * i);
        let y = gen_massed(n, 100.0, 3, 9000 + 2 * i + 1);
        assert!(x.total_mass() <= 64 && y.total_mass() <= 64);
        let xe = x.expand();
        let ye = y.expand();
        for q in [1.0, 2.0] {
            let instance = build_instance(&xe, &ye, q).unwrap();
            let o = oracle::oracle_wasserstein(&instance);
            for delta in [0.1, 0.01] {
                let via_masses = pdist::wasserstein_masses(&x, &y, q, delta).unwrap();
                let via_standard =
                    pdist::wasserstein(&xe, &ye, q, delta, AuctionEngine::Geometric).unwrap();
                for (tag, d) in [("masses", via_masses), ("standard", via_standard)] {
                    if o == 0.0 {
                        assert_eq!(d, 0.0);
                    } else {
                        let ratio = d / o;
                        assert!(
                            (1.0 - 1e-9..1.0 + delta).contains(&ratio),
                            "pair {i} q={q} delta={delta} {tag}: ratio {ratio}"
                        );
                    }
                }
            }
        }
    }
    println!("criterion 4 (masses <-> standard equivalence, 50 massed pairs): PASS");
}

#[test]
fn criterion_5_epsilon_schedule_fidelity() {
    let _g = serialize();
    for (i, q, delta) in [
        (0u64, 1.0, 0.01),
        (1, 2.0, 0.01),
        (2, 1.0, 0.1),
        (3, 2.0, 0.05),
    ] {
        let x = gen_normal(24, 100.0, 7700 + 2 * i);
        let y = gen_normal(20, 100.0, 7700 + 2 * i + 1);
        let n = build_instance(&x, &y, q).unwrap().len() as f64;
        let mut params = AuctionParams::new(delta, AuctionEngine::Geometric);
        params.engine = if i % 2 == 0 {
            AuctionEngine::Geometric
        } else {
            AuctionEngine::LazyHeap
        };
        let report = pdist::wasserstein_with(&x, &y, q, &params).unwrap();
        // first effective epsilon is exactly maxEdgeCost / 4
        assert_eq!(report.rounds[0].epsilon, report.max_edge_cost / 4.0);
        // each subsequent epsilon is exactly the previous divided by 5
        for w in report.rounds.windows(2) {
            assert_eq!(w[1].epsilon, w[0].epsilon / 5.0);
        }
        // the loop exits exactly when the termination test first holds
        let bound = pow_q(1.0 + delta, q);
        for (r_idx, round) in report.rounds.iter().enumerate() {
            let holds = round.cost <= bound * (round.cost - n * round.epsilon);
            if r_idx + 1 < report.rounds.len() {
                assert!(
                    !holds,
                    "run {i}: round {r_idx} satisfied the exit test early"
                );
            } else {
                assert!(
                    holds || round.cost == 0.0,
                    "run {i}: final round fails the exit test"
                );
            }
        }
    }
    // the mass auction shares the schedule, with n = total mass
    for (i, q) in [(0u64, 1.0), (1, 2.0)] {
        let x = gen_massed(8, 100.0, 4, 8800 + 2 * i);
        let y = gen_massed(6, 100.0, 4, 8800 + 2 * i + 1);
        let n = (x.total_mass() + y.total_mass()) as f64;
        let report =
            pdist::wasserstein_masses_with(&x, &y, q, &MassAuctionParams::new(0.01)).unwrap();
        assert_eq!(report.rounds[0].epsilon, report.max_edge_cost / 4.0);
        for w in report.rounds.windows(2) {
            assert_eq!(w[1].epsilon, w[0].epsilon / 5.0);
        }
        let bound = pow_q(1.01, q);
        for (r_idx, round) in report.rounds.iter().enumerate() {
            let holds = round.cost <= bound * (round.cost - n * round.epsilon);
            if r_idx + 1 < report.rounds.len() {
                assert!(!holds, "mass run {i}: early exit at round {r_idx}");
            } else {
                assert!(
                    holds || round.cost == 0.0,
                    "mass run {i}: final round fails"
                );
            }
        }
    }
    println!("criterion 5 (epsilon schedule and termination fidelity): PASS");
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    values[values.len() / 2]
}

/// Least-squares slope of log(seconds) against log(n).
fn fitted_exponent(records: &[&BenchRecord]) -> f64 {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .map(|r| ((r.n as f64).ln(), r.seconds.max(1e-9).ln()))
        .collect();
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

#[test]
fn criterion_6_geometric_speedup_and_scaling() {
    let _g = serialize();

    // median-of-5 speedup at n = 5000 for both algorithm families
    let mut cfg = BenchConfig::new(vec![5000]);
    cfg.reps = 5;
    cfg.qs = vec![1.0];
    let records = run_bench(&cfg, |r| {
        eprintln!(
            "criterion 6: {} {} n={} {:.3}s",
            r.algorithm, r.engine, r.n, r.seconds
        )
    });
    let times = |alg: &str, eng: &str| -> Vec<f64> {
        records
            .iter()
            .filter(|r| r.algorithm == alg && r.engine == eng)
            .map(|r| r.seconds)
            .collect()
    };
    let b_geo = median(times("bottleneck", "geometric"));
    let b_non = median(times("bottleneck", "nongeometric"));
    let w_geo = median(times("wasserstein", "geometric"));
    let w_lazy = median(times("wasserstein", "lazyheap"));
    assert!(
        b_non >= 2.0 * b_geo,
        "bottleneck speedup below 2x: geometric {b_geo:.3}s vs non-geometric {b_non:.3}s"
    );
    assert!(
        w_lazy >= 2.0 * w_geo,
        "auction speedup below 2x: geometric {w_geo:.3}s vs lazy heap {w_lazy:.3}s"
    );

    // fitted exponents over n in {1000..10000} from the bench harness
    let mut cfg = BenchConfig::new(vec![1000, 2154, 4642, 10000]);
    cfg.reps = 1;
    cfg.engines = vec!["geometric".into(), "nongeometric".into()];
    let scaling = run_bench(&cfg, |r| {
        eprintln!(
            "criterion 6: {} {} n={} {:.3}s",
            r.algorithm, r.engine, r.n, r.seconds
        )
    });
    let slope = |eng: &str| {
        fitted_exponent(
            &scaling
                .iter()
                .filter(|r| r.algorithm == "bottleneck" && r.engine == eng)
                .collect::<Vec<_>>(),
        )
    };
    let geo_alpha = slope("geometric");
    let non_alpha = slope("nongeometric");
    assert!(
        geo_alpha < non_alpha,
        "fitted exponents: geometric {geo_alpha:.2} not below non-geometric {non_alpha:.2}"
    );
    println!(
        "criterion 6 (speedup {:.1}x bottleneck / {:.1}x auction at n=5000; \
         exponents {geo_alpha:.2} < {non_alpha:.2}): PASS",
        b_non / b_geo,
        w_lazy / w_geo
    );
}

#[test]
fn criterion_7_memory_asymmetry() {
    let _g = serialize();
    let x = gen_normal(512, 100.0, 3100);
    let y = gen_normal(512, 100.0, 3101);
    let n = 1024usize; // instance cardinality
    let lazy = pdist::wasserstein_with(
        &x,
        &y,
        1.0,
        &AuctionParams::new(0.05, AuctionEngine::LazyHeap),
    )
    .unwrap();
    let geo = pdist::wasserstein_with(
        &x,
        &y,
        1.0,
        &AuctionParams::new(0.05, AuctionEngine::Geometric),
    )
    .unwrap();
    assert!(
        lazy.allocated_value_entries >= n * n / 4,
        "lazy heap allocated only {} entries",
        lazy.allocated_value_entries
    );
    assert!(
        geo.allocated_value_entries <= 8 * n,
        "geometric engine allocated {} entries",
        geo.allocated_value_entries
    );
    println!(
        "criterion 7 (value entries: lazy {} vs geometric {} at n={n}): PASS",
        lazy.allocated_value_entries, geo.allocated_value_entries
    );
}

#[test]
fn criterion_8_property_suites() {
    let _g = serialize();
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE);

    // (a) spatial oracle-equivalence replay, >= 1e5 mixed operations
    let mut ops = 0usize;
    {
        let pts: Vec<[f64; 2]> = (0..1500)
            .map(|_| [rng.gen_range(0.0..100.0), rng.gen_range(0.0..100.0)])
            .collect();
        let mut tree = DeletableKdTree::build(&pts);
        let mut deleted = vec![false; pts.len()];
        for step in 0..60_000 {
            ops += 1;
            match step % 10 {
                0..=2 => {
                    let live: Vec<usize> = (0..pts.len()).filter(|&i| !deleted[i]).collect();
                    if let Some(&id) = live.as_slice().choose(&mut rng) {
                        tree.delete(id);
                        deleted[id] = true;
                    }
                }
                9 if step % 7000 == 6999 => {
                    tree.reset();
                    deleted.iter_mut().for_each(|d| *d = false);
                    tree.check_invariants();
                }
                _ => {
                    let q = [rng.gen_range(0.0..100.0), rng.gen_range(0.0..100.0)];
                    let r = rng.gen_range(0.0..20.0);
                    let got = tree.query_within(q, r);
                    let want = (0..pts.len()).find(|&i| !deleted[i] && linf(q, pts[i]) <= r);
                    assert_eq!(got.is_some(), want.is_some(), "replay step {step}");
                    if let Some(id) = got {
                        assert!(!deleted[id] && linf(q, pts[id]) <= r);
                    }
                }
            }
        }
        tree.check_invariants();

        let pts: Vec<[f64; 2]> = (0..800)
            .map(|_| [rng.gen_range(0.0..50.0), rng.gen_range(0.0..50.0)])
            .collect();
        let mut wtree = WeightedKdTree::build(&pts);
        let mut weights = vec![0.0f64; pts.len()];
        for step in 0..45_000 {
            ops += 1;
            if step % 3 == 0 {
                let i = rng.gen_range(0..pts.len());
                weights[i] += rng.gen_range(0.0..2.0);
                wtree.increase_weight(i, weights[i]);
            } else {
                let q = [rng.gen_range(0.0..50.0), rng.gen_range(0.0..50.0)];
                let qexp = if step % 2 == 0 { 1.0 } else { 2.0 };
                let (best, second) = wtree.best_two(q, qexp, None);
                let mut totals: Vec<f64> = (0..pts.len())
                    .map(|i| pow_q(linf(q, pts[i]), qexp) + weights[i])
                    .collect();
                totals.sort_by(f64::total_cmp);
                assert_eq!(best.1, totals[0], "weighted replay step {step}");
                assert_eq!(second.unwrap().1, totals[1], "weighted replay step {step}");
            }
            if step % 15_000 == 14_999 {
                wtree.check_invariants();
            }
        }
    }
    assert!(ops >= 100_000);

    // (b) 3-approximation bound on 100 random instances
    for i in 0..100u64 {
        let x = gen_normal(10 + (i as usize) % 80, 100.0, 40_000 + 2 * i);
        let y = gen_normal(10 + (i as usize * 7) % 80, 100.0, 40_000 + 2 * i + 1);
        let instance = build_instance(&x, &y, 1.0).unwrap();
        let (lower, upper) = max_dist_3approx(&instance);
        let mut dmax = 0.0f64;
        for b in &instance.bidders {
            for o in &instance.objects {
                dmax = dmax.max(linf(b.coords, o.coords));
            }
        }
        assert!(
            lower <= dmax && dmax <= upper && upper == 3.0 * lower,
            "instance {i}: {lower} {dmax} {upper}"
        );
    }

    // (c) W1 invariance under common-point removal
    for i in 0..20u64 {
        let base_x = gen_normal(12, 100.0, 51_000 + 3 * i);
        let base_y = gen_normal(12, 100.0, 51_000 + 3 * i + 1);
        let common = gen_massed(6, 100.0, 2, 51_000 + 3 * i + 2);
        let mut xp = base_x.points().to_vec();
        xp.extend_from_slice(common.points());
        let mut yp = common.points().to_vec();
        yp.extend_from_slice(base_y.points());
        let x = PersistenceDiagram::new(xp);
        let y = PersistenceDiagram::new(yp);
        let (xr, yr) = pdist::remove_common_points(&x, &y);
        assert_eq!(
            x.total_mass() - xr.total_mass(),
            y.total_mass() - yr.total_mass()
        );
        let instance = build_instance(&x.expand(), &y.expand(), 1.0).unwrap();
        let o = oracle::oracle_wasserstein(&instance);
        let delta = 0.01;
        let d_full = pdist::wasserstein(&x, &y, 1.0, delta, AuctionEngine::Geometric).unwrap();
        let d_removed = pdist::wasserstein(&xr, &yr, 1.0, delta, AuctionEngine::Geometric).unwrap();
        for d in [d_full, d_removed] {
            if o == 0.0 {
                assert_eq!(d, 0.0);
            } else {
                let ratio = d / o;
                assert!(
                    (1.0 - 1e-9..1.0 + delta).contains(&ratio),
                    "pair {i}: ratio {ratio}"
                );
            }
        }
    }

    // (d) G[r] feasibility monotonicity
    for i in 0..20u64 {
        let x = gen_normal(16, 100.0, 61_000 + 2 * i);
        let y = gen_normal(16, 100.0, 61_000 + 2 * i + 1);
        let instance = build_instance(&x, &y, 1.0).unwrap();
        let (_, upper) = max_dist_3approx(&instance);
        let mut radii: Vec<f64> = (0..10).map(|_| rng.gen_range(0.0..upper)).collect();
        radii.sort_by(f64::total_cmp);
        let mut last = false;
        for r in radii {
            let mut state = HkState::new(&instance);
            let ok = feasible(&mut state, &instance, r);
            state.check_matching(&instance, r);
            assert!(ok || !last, "instance {i}: feasibility lost as r grew");
            last = ok;
        }
    }

    // (e) slice invariants audited after every masses iteration
    for i in 0..10u64 {
        let x = gen_massed(6, 100.0, 5, 71_000 + 2 * i);
        let y = gen_massed(5, 100.0, 5, 71_000 + 2 * i + 1);
        let mut params = MassAuctionParams::new(0.05);
        params.audit = true;
        let report = pdist::wasserstein_masses_with(&x, &y, 2.0, &params).unwrap();
        assert!(report.iterations > 0);
    }

    println!("criterion 8 (property suites, {ops} spatial replay ops): PASS");
}
