use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn klnmf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_klnmf"))
        .args(args)
        .env("KLNMF_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = klnmf(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn data_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn synth_then_nmf_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let v = dir.path().join("v.txt");
    let v = v.to_str().unwrap();
    ok(&["synth", "--rows", "12", "--cols", "15", "--seed", "4", "--out", v]);
    let text = fs::read_to_string(v).unwrap();
    assert!(text.starts_with("12 15\n"));
    assert_eq!(text.lines().count(), 13);

    let out = dir.path().join("run");
    let stdout = ok(&["nmf", "--input", v, "--rank", "3", "--budget", "50", "--out", out.to_str().unwrap()]);
    assert!(stdout.contains("fpa"), "{stdout}");
    let rows = data_rows(&out.join("fpa.csv"));
    // row 0 plus one per outer iteration of 5 accesses
    assert_eq!(rows.len(), 11);
    assert_eq!(rows.last().unwrap()[0], "50");
    assert!(out.join("summary.json").exists());
}

#[test]
fn binary_input() {
    let dir = tempfile::tempdir().unwrap();
    let v = dir.path().join("v.bin");
    let v = v.to_str().unwrap();
    ok(&["synth", "--rows", "8", "--cols", "9", "--format", "binary", "--out", v]);
    assert_eq!(fs::metadata(v).unwrap().len(), 16 + 72 * 8);
    let out = dir.path().join("run");
    ok(&["nmf", "--input", v, "--format", "binary", "--rank", "2", "--budget", "10", "--out", out.to_str().unwrap()]);
}

#[test]
fn nd_stops_on_gap_and_writes_distances() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nd");
    ok(&[
        "nd", "--rows", "15", "--cols", "20", "--rank", "3", "--side", "W", "--gap-tol", "1e-6", "--budget", "20000",
        "--reference-iters", "300", "--out", out.to_str().unwrap(),
    ]);
    let rows = data_rows(&out.join("fpa.csv"));
    let last: u64 = rows.last().unwrap()[0].parse().unwrap();
    assert!(last < 20000, "stopped at {last}");
    assert!(out.join("fpa_distance.csv").exists());
}

#[test]
fn bench_runs_every_method_on_one_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bench");
    ok(&[
        "bench", "--rows", "15", "--cols", "20", "--rank", "3", "--budget", "40", "--trace-stride", "2", "--rho",
        "0.15,1", "--out", out.to_str().unwrap(),
    ]);
    let grid = |f: &str| -> Vec<String> { data_rows(&out.join(f)).into_iter().map(|r| r[0].clone()).collect() };
    let fpa = grid("fpa.csv");
    assert_eq!(fpa, ["0", "10", "20", "30", "40"]);
    for f in ["mu.csv", "admm_rho0.15.csv", "admm_rho1.csv"] {
        assert_eq!(grid(f), fpa, "{f}");
    }
}

#[test]
fn warm_restart_records_restart_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("warm");
    ok(&[
        "warm", "--rows", "20", "--cols", "30", "--rank", "2", "--rank2", "4", "--budget", "100", "--method", "fpa",
        "--out", out.to_str().unwrap(),
    ]);
    let text = fs::read_to_string(out.join("fpa.csv")).unwrap();
    assert!(text.contains("# restart_access: 100"));
    assert!(text.contains("# restart_objective: "));
    assert_eq!(data_rows(&out.join("fpa.csv")).last().unwrap()[0], "200");
}

#[test]
fn errors_exit_nonzero_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "2 2\n1 2\n3 -4\n").unwrap();
    let out = klnmf(&[
        "nmf",
        "--input",
        bad.to_str().unwrap(),
        "--rank",
        "1",
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("row 1") && err.contains("col 1"), "{err}");
    assert!(!dir.path().join("o").exists());

    let missing = dir.path().join("nope.txt");
    let out = klnmf(&["nmf", "--input", missing.to_str().unwrap(), "--rank", "1", "--out", "x"]);
    assert!(!out.status.success());

    let out = klnmf(&["nmf", "--rows", "5", "--cols", "5", "--rank", "9", "--out", dir.path().join("r").to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("rank"));

    let out = klnmf(&["nd", "--rank", "2", "--side", "Q", "--out", "x"]);
    assert!(!out.status.success());

    let out = klnmf(&["nmf", "--rank", "2", "--method", "admm", "--rho", "-1", "--out", "x"]);
    assert!(!out.status.success());
}

#[test]
fn bad_thread_env_is_reported() {
    let out = Command::new(env!("CARGO_BIN_EXE_klnmf"))
        .args(["synth", "--rows", "2", "--cols", "2", "--out", "/dev/null"])
        .env("KLNMF_THREADS", "lots")
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("KLNMF_THREADS"));
}
