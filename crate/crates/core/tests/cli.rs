//! End-to-end behaviour of the command-line entry point.

use std::path::Path;

use lrring::cli::{run, EXIT_IO, EXIT_NUMERICAL, EXIT_USAGE};

fn run_args(args: &[&str]) -> i32 {
    run(std::iter::once("lrring").chain(args.iter().copied()))
}

fn run_to(dir: &Path, name: &str, args: &[&str]) -> (i32, Vec<u8>) {
    let out = dir.join(name);
    let mut full = args.to_vec();
    let out_s = out.to_str().unwrap().to_owned();
    full.extend(["--output", &out_s]);
    let code = run_args(&full);
    (code, std::fs::read(&out).unwrap_or_default())
}

#[test]
fn spectrum_csv_for_two_sites() {
    let dir = tempfile::tempdir().unwrap();
    let (code, bytes) = run_to(
        dir.path(),
        "s.csv",
        &["spectrum", "--n", "2", "--alpha", "1"],
    );
    assert_eq!(code, 0);
    let text = String::from_utf8(bytes).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 3, "{text}");
    assert!(
        rows[1].contains("-3.0") && rows[1].ends_with(",1"),
        "{text}"
    );
    assert!(rows[2].contains("1.0") && rows[2].ends_with(",3"), "{text}");
}

#[test]
fn json_output_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "concurrence",
        "--n",
        "6",
        "--alpha",
        "2",
        "--alpha",
        "inf",
        "--format",
        "json",
    ];
    let (code, bytes) = run_to(dir.path(), "c.json", &args);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
    let again = serde_json::to_vec_pretty(&v).unwrap();
    let w: serde_json::Value = serde_json::from_slice(&again).unwrap();
    assert_eq!(v, w);
    assert!(v.is_object() || v.is_array());
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["report", "--n", "6", "--grid", "0.1:8:60:log"];
    let (c1, first) = run_to(dir.path(), "a.json", &args);
    let (c2, second) = run_to(dir.path(), "b.json", &args);
    assert_eq!((c1, c2), (0, 0));
    assert!(!first.is_empty());
    assert_eq!(first, second);
}

#[test]
fn cache_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let cache_s = cache.to_str().unwrap();
    let args = [
        "concurrence",
        "--n",
        "6",
        "--grid",
        "0.5:4:9:lin",
        "--format",
        "json",
    ];
    let (_, plain) = run_to(dir.path(), "plain.json", &args);
    let mut cached_args = args.to_vec();
    cached_args.extend(["--cache-dir", cache_s]);
    let (c1, cold) = run_to(dir.path(), "cold.json", &cached_args);
    let (c2, warm) = run_to(dir.path(), "warm.json", &cached_args);
    assert_eq!((c1, c2), (0, 0));
    assert!(std::fs::read_dir(&cache).unwrap().next().is_some());
    assert_eq!(plain, cold);
    assert_eq!(cold, warm);
}

#[test]
fn usage_errors_exit_two_and_leave_no_file() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["spectrum", "--n", "8", "--cluster-tolerance", "0"][..],
        &["spectrum", "--n", "1", "--alpha", "1"],
        &["spectrum", "--n", "40", "--alpha", "1"],
        &["report", "--n", "6", "--format", "csv"],
        &["nonsense"],
    ] {
        let (code, bytes) = run_to(dir.path(), "x.out", args);
        assert_eq!(code, EXIT_USAGE, "{args:?}");
        assert!(bytes.is_empty(), "{args:?}");
    }
}

#[test]
fn structure_failure_exits_three_without_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let (code, bytes) = run_to(
        dir.path(),
        "c.csv",
        &[
            "concurrence",
            "--n",
            "6",
            "--alpha",
            "1.3",
            "--structure-tolerance",
            "1e-300",
        ],
    );
    assert_eq!(code, EXIT_NUMERICAL);
    assert!(bytes.is_empty());
    assert_eq!(
        std::fs::read_dir(dir.path()).unwrap().count(),
        0,
        "temporary file left behind"
    );
}

#[test]
fn unwritable_output_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("no/such/dir/out.csv");
    let code = run_args(&[
        "spectrum",
        "--n",
        "2",
        "--alpha",
        "1",
        "--output",
        missing.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_IO);
}
