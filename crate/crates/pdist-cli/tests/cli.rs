//! End-to-end checks of the binary: output formatting, exit codes, and
//! determinism.

use std::path::Path;
use std::process::{Command, Output};

fn pdist(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pdist"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

#[test]
fn exact_bottleneck_prints_bare_value() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("A.txt");
    let b = dir.path().join("B.txt");
    write(&a, "0 2\n");
    write(&b, "0 4\n");
    let out = pdist(&[
        "bottleneck",
        a.to_str().unwrap(),
        b.to_str().unwrap(),
        "--delta",
        "0.01",
        "--exact",
    ]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout), "2\n");
}

#[test]
fn wasserstein_of_identical_files_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("A.txt");
    write(&a, "1 5\n2 3\n");
    let out = pdist(&[
        "wasserstein",
        a.to_str().unwrap(),
        a.to_str().unwrap(),
        "--q",
        "2",
    ]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout), "0\n");
}

#[test]
fn engines_agree_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("A.txt");
    let b = dir.path().join("B.txt");
    let out = pdist(&["gen", "--n", "30", "--seed", "5", "-o", a.to_str().unwrap()]);
    assert!(out.status.success());
    let out = pdist(&["gen", "--n", "30", "--seed", "6", "-o", b.to_str().unwrap()]);
    assert!(out.status.success());
    let mut values = Vec::new();
    for engine in ["geometric", "lazyheap", "masses"] {
        let out = pdist(&[
            "wasserstein",
            a.to_str().unwrap(),
            b.to_str().unwrap(),
            "--engine",
            engine,
        ]);
        assert!(out.status.success(), "{engine}");
        let v: f64 = String::from_utf8_lossy(&out.stdout).trim().parse().unwrap();
        values.push(v);
    }
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(0.0f64, f64::max);
    // all engines return a value inside [o, 1.01 o)
    assert!(hi / lo < 1.011, "engine spread too wide: {values:?}");
}

#[test]
fn gen_is_reproducible_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("d1.txt");
    let b = dir.path().join("d2.txt");
    for path in [&a, &b] {
        let out = pdist(&[
            "gen",
            "--n",
            "100",
            "--s",
            "100",
            "--seed",
            "7",
            "-o",
            path.to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn parse_error_names_file_and_line_with_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("bad.txt");
    let b = dir.path().join("ok.txt");
    write(&a, "1 2\n0 inf\n");
    write(&b, "1 2\n");
    let out = pdist(&["bottleneck", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.txt:2"), "stderr: {err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn bad_flags_exit_2() {
    let out = pdist(&["bottleneck", "--nonsense"]);
    assert_eq!(out.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("A.txt");
    write(&a, "0 2\n");
    // delta outside (0, 1) is a usage error as well
    let out = pdist(&[
        "wasserstein",
        a.to_str().unwrap(),
        a.to_str().unwrap(),
        "--delta",
        "2.0",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_file_exits_1() {
    let out = pdist(&["bottleneck", "/nonexistent/x.txt", "/nonexistent/y.txt"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bench_writes_parseable_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bench.csv");
    let out = pdist(&[
        "bench",
        "--sizes",
        "12,16",
        "--reps",
        "1",
        "--q",
        "1,2",
        "-o",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("algorithm,engine,n,q,delta,seconds,peak_bytes,result,seed\n"));
    let records = pdist_cli::records_from_csv(&text).expect("csv round-trips");
    // 2 sizes x (2 bottleneck + 2 q x (2 auction + 1 masses))
    assert_eq!(records.len(), 2 * (2 + 2 * 3));
    assert!(records.iter().all(|r| r.seconds >= 0.0));
}

#[test]
fn bench_engine_filter() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bench.csv");
    let out = pdist(&[
        "bench",
        "--sizes",
        "10",
        "--reps",
        "1",
        "--engines",
        "geometric",
        "-o",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let records = pdist_cli::records_from_csv(&std::fs::read_to_string(&csv).unwrap()).unwrap();
    assert!(!records.is_empty());
    assert!(records.iter().all(|r| r.engine == "geometric"));
}
