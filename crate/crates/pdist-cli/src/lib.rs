//! Synthetic diagram generation and the benchmark harness behind the
//! `pdist` binary.

use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pdist::auction::{AuctionEngine, AuctionParams};
use pdist::bottleneck::BottleneckEngine;
use pdist::diagram::{DiagramPoint, PersistenceDiagram};
use pdist::masses::MassAuctionParams;

/// One standard normal variate by the Marsaglia polar method: draw (u, v)
/// uniformly in the square until 0 < s = u^2 + v^2 < 1, then return
/// `u * sqrt(-2 ln s / s)`. The partner variate is discarded, so each call
/// consumes a deterministic prefix of the stream.
fn polar_normal(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let u = 2.0 * rng.gen::<f64>() - 1.0;
        let v = 2.0 * rng.gen::<f64>() - 1.0;
        let s = u * u + v * v;
        if s > 0.0 && s < 1.0 {
            return u * (-2.0 * s.ln() / s).sqrt();
        }
    }
}

/// `n` points of the form `(a - |b|/2, a + |b|/2)` with `a ~ Uniform[0, s]`
/// and `b ~ Normal(0, s)` (standard deviation s); the persistence |b| is
/// half-normal. Deterministic under the seed.
pub fn gen_normal(n: usize, s: f64, seed: u64) -> PersistenceDiagram {
    gen_massed(n, s, 1, seed)
}

/// [`gen_normal`] points with integer masses drawn uniformly from
/// `[ceil(k/2), floor(3k/2)]`, so the average mass is k.
pub fn gen_massed(n: usize, s: f64, k: u64, seed: u64) -> PersistenceDiagram {
    assert!(n >= 1, "need at least one point");
    assert!(s > 0.0, "scale must be positive");
    assert!(k >= 1, "average mass must be at least 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lo = k.div_ceil(2);
    let hi = 3 * k / 2;
    let points = (0..n)
        .map(|_| {
            let a = rng.gen_range(0.0..s);
            let b = s * polar_normal(&mut rng);
            let half = 0.5 * b.abs();
            let mass = if k == 1 { 1 } else { rng.gen_range(lo..=hi) };
            DiagramPoint::with_mass(a - half, a + half, mass)
        })
        .collect();
    PersistenceDiagram::new(points)
}

/// Renders a diagram in the text file format; the mass column appears only
/// on lines with mass above 1.
pub fn format_diagram(diagram: &PersistenceDiagram) -> String {
    let mut out = String::new();
    for p in diagram.points() {
        if p.mass == 1 {
            let _ = writeln!(out, "{} {}", p.birth, p.death);
        } else {
            let _ = writeln!(out, "{} {} {}", p.birth, p.death, p.mass);
        }
    }
    out
}

pub const CSV_HEADER: &str = "algorithm,engine,n,q,delta,seconds,peak_bytes,result,seed";

/// One benchmark measurement; a CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub algorithm: String,
    pub engine: String,
    pub n: usize,
    /// `"inf"` for bottleneck rows.
    pub q: String,
    pub delta: f64,
    pub seconds: f64,
    pub peak_bytes: u64,
    pub result: f64,
    pub seed: u64,
}

impl BenchRecord {
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.algorithm,
            self.engine,
            self.n,
            self.q,
            self.delta,
            self.seconds,
            self.peak_bytes,
            self.result,
            self.seed
        )
    }

    pub fn parse_csv_row(row: &str) -> Option<BenchRecord> {
        let mut f = row.split(',');
        let rec = BenchRecord {
            algorithm: f.next()?.to_string(),
            engine: f.next()?.to_string(),
            n: f.next()?.parse().ok()?,
            q: f.next()?.to_string(),
            delta: f.next()?.parse().ok()?,
            seconds: f.next()?.parse().ok()?,
            peak_bytes: f.next()?.parse().ok()?,
            result: f.next()?.parse().ok()?,
            seed: f.next()?.parse().ok()?,
        };
        f.next().is_none().then_some(rec)
    }
}

pub fn records_to_csv(records: &[BenchRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&r.to_csv_row());
        out.push('\n');
    }
    out
}

pub fn records_from_csv(text: &str) -> Option<Vec<BenchRecord>> {
    let mut lines = text.lines();
    if lines.next()? != CSV_HEADER {
        return None;
    }
    lines.map(BenchRecord::parse_csv_row).collect()
}

/// Process peak RSS in bytes via `getrusage` (kilobytes on Linux); 0 where
/// unavailable. The counter is monotone over the process lifetime, so
/// per-run values are best-effort only.
pub fn peak_memory_bytes() -> u64 {
    #[cfg(unix)]
    {
        let mut usage = std::mem::MaybeUninit::<libc::rusage>::zeroed();
        if unsafe { libc::getrusage(libc::RUSAGE_SELF, usage.as_mut_ptr()) } == 0 {
            let usage = unsafe { usage.assume_init() };
            return (usage.ru_maxrss.max(0) as u64) * 1024;
        }
        0
    }
    #[cfg(not(unix))]
    {
        0
    }
}

/// Algorithm/engine pairs the bench harness knows how to run.
pub const BENCH_ENGINES: [(&str, &str); 5] = [
    ("bottleneck", "geometric"),
    ("bottleneck", "nongeometric"),
    ("wasserstein", "geometric"),
    ("wasserstein", "lazyheap"),
    ("wasserstein", "masses"),
];

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub reps: usize,
    pub qs: Vec<f64>,
    /// Engine names to run; empty means all.
    pub engines: Vec<String>,
    pub delta: f64,
    pub scale: f64,
    pub base_seed: u64,
}

impl BenchConfig {
    pub fn new(sizes: Vec<usize>) -> Self {
        BenchConfig {
            sizes,
            reps: 10,
            qs: vec![1.0],
            engines: Vec::new(),
            delta: 0.01,
            scale: 100.0,
            base_seed: 42,
        }
    }

    fn wants(&self, engine: &str) -> bool {
        self.engines.is_empty() || self.engines.iter().any(|e| e == engine)
    }
}

/// Times `f` and returns (seconds, value).
pub fn time_call<T>(f: impl FnOnce() -> T) -> (f64, T) {
    let start = Instant::now();
    let value = f();
    (start.elapsed().as_secs_f64(), value)
}

/// Runs the configured measurements; one record per (pair, algorithm,
/// engine, q). Wall time covers the distance call only.
pub fn run_bench(cfg: &BenchConfig, mut progress: impl FnMut(&BenchRecord)) -> Vec<BenchRecord> {
    let mut records = Vec::new();
    for &n in &cfg.sizes {
        for rep in 0..cfg.reps {
            let seed = cfg
                .base_seed
                .wrapping_add((n as u64).wrapping_mul(0x9E37))
                .wrapping_add(2 * rep as u64);
            let x = gen_normal(n, cfg.scale, seed);
            let y = gen_normal(n, cfg.scale, seed + 1);

            let mut push = |algorithm: &str, engine: &str, q: &str, seconds: f64, result: f64| {
                let rec = BenchRecord {
                    algorithm: algorithm.into(),
                    engine: engine.into(),
                    n,
                    q: q.into(),
                    delta: cfg.delta,
                    seconds,
                    peak_bytes: peak_memory_bytes(),
                    result,
                    seed,
                };
                progress(&rec);
                records.push(rec);
            };

            for engine in ["geometric", "nongeometric"] {
                if !cfg.wants(engine) {
                    continue;
                }
                let kind = if engine == "geometric" {
                    BottleneckEngine::Geometric
                } else {
                    BottleneckEngine::NonGeometric
                };
                let (secs, value) = time_call(|| {
                    pdist::approx_bottleneck_with(&x, &y, cfg.delta, kind)
                        .expect("generated diagrams are valid")
                        .1
                });
                push("bottleneck", engine, "inf", secs, value);
            }

            for &q in &cfg.qs {
                for engine in ["geometric", "lazyheap"] {
                    if !cfg.wants(engine) {
                        continue;
                    }
                    let kind = if engine == "geometric" {
                        AuctionEngine::Geometric
                    } else {
                        AuctionEngine::LazyHeap
                    };
                    let mut params = AuctionParams::new(cfg.delta, kind);
                    params.approximate_max_cost = true;
                    let (secs, value) = time_call(|| {
                        pdist::wasserstein_with(&x, &y, q, &params)
                            .expect("generated diagrams are valid")
                            .value
                    });
                    push("wasserstein", engine, &format!("{q}"), secs, value);
                }
                if cfg.wants("masses") {
                    let params = MassAuctionParams::new(cfg.delta);
                    let (secs, value) = time_call(|| {
                        pdist::wasserstein_masses_with(&x, &y, q, &params)
                            .expect("generated diagrams are valid")
                            .value
                    });
                    push("wasserstein", "masses", &format!("{q}"), secs, value);
                }
            }
        }
    }
    records
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_points_lie_above_diagonal() {
        let d = gen_normal(500, 100.0, 3);
        for p in d.points() {
            assert!(p.birth <= p.death);
            assert_eq!(p.mass, 1);
        }
    }

    #[test]
    fn half_normal_mean_persistence() {
        // persistence |b| with b ~ N(0, s): mean = s * sqrt(2/pi)
        let s = 100.0;
        let mut total = 0.0;
        let mut count = 0usize;
        for seed in 0..5 {
            let d = gen_normal(1000, s, seed);
            total += d.points().iter().map(|p| p.persistence()).sum::<f64>();
            count += d.points().len();
        }
        let mean = total / count as f64;
        let expected = s * (2.0 / std::f64::consts::PI).sqrt();
        assert!(
            (mean - expected).abs() <= 0.1 * expected,
            "mean {mean} vs expected {expected}"
        );
    }

    #[test]
    fn massed_masses_in_documented_range() {
        let d = gen_massed(2000, 50.0, 10, 9);
        let mut total = 0u64;
        for p in d.points() {
            assert!((5..=15).contains(&p.mass));
            total += p.mass;
        }
        let mean = total as f64 / 2000.0;
        assert!((mean - 10.0).abs() <= 0.5, "mean mass {mean}");
    }

    #[test]
    fn unit_average_mass_collapses_to_one() {
        let d = gen_massed(100, 10.0, 1, 4);
        assert!(d.points().iter().all(|p| p.mass == 1));
    }

    #[test]
    fn generation_is_deterministic() {
        let a = gen_massed(64, 100.0, 5, 1234);
        let b = gen_massed(64, 100.0, 5, 1234);
        assert_eq!(a, b);
        assert_eq!(format_diagram(&a), format_diagram(&b));
        let c = gen_massed(64, 100.0, 5, 1235);
        assert_ne!(a, c);
    }

    #[test]
    fn diagram_text_round_trips() {
        let d = gen_massed(32, 10.0, 4, 7);
        let text = format_diagram(&d);
        let back = pdist::parse_diagram(&text).unwrap();
        assert_eq!(d, back);
    }

    #[test]
    fn csv_rows_round_trip() {
        let rec = BenchRecord {
            algorithm: "wasserstein".into(),
            engine: "lazyheap".into(),
            n: 1000,
            q: "2".into(),
            delta: 0.01,
            seconds: 1.25,
            peak_bytes: 123456,
            result: 99.5,
            seed: 7,
        };
        let text = records_to_csv(&[rec.clone()]);
        let parsed = records_from_csv(&text).unwrap();
        assert_eq!(parsed, vec![rec]);
    }

    #[test]
    fn bench_smoke_run_produces_consistent_rows() {
        let mut cfg = BenchConfig::new(vec![16]);
        cfg.reps = 2;
        cfg.qs = vec![1.0];
        let records = run_bench(&cfg, |_| {});
        // 2 reps x (2 bottleneck + 2 auction + 1 masses)
        assert_eq!(records.len(), 10);
        let text = records_to_csv(&records);
        let parsed = records_from_csv(&text).unwrap();
        assert_eq!(parsed, records);
        // the engines agree on the value up to the approximation bounds
        for pair in records.chunks(5) {
            let b_geo = &pair[0];
            let b_non = &pair[1];
            assert!((b_geo.result - b_non.result).abs() <= 0.011 * b_geo.result.abs());
        }
    }
}
