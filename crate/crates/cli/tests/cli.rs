use std::path::Path;
use std::process::{Command, Output};

use kmr_core::instance::Instance;
use kmr_core::io::{from_json, read_json, SolutionRecord};
use serde_json::Value;

fn kmr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kmr"))
        .args(args)
        .env_remove("KMR_THREADS")
        .output()
        .expect("binary runs")
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

fn generate_pair(dir: &Path, name: &str, seed: &str) -> String {
    let out = path(dir, name);
    let o = kmr(&[
        "generate", "--layout", "pair", "--delta", "3.5", "--m", "2", "--n", "50", "--seed", seed, "--out", &out,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn generate_then_solve_achieves_recovery() {
    let dir = tempfile::tempdir().unwrap();
    let inst = generate_pair(dir.path(), "i.json", "1");
    let sol = path(dir.path(), "s.json");
    let o = kmr(&["solve", "--instance", &inst, "--out", &sol]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rec: SolutionRecord = read_json(Path::new(&sol)).unwrap();
    assert_eq!(rec.verdict.unwrap().status.as_str(), "achieved");
    assert_eq!(rec.y.iter().filter(|&&v| v > 0.5).count(), 2);
}

#[test]
fn certify_reports_four_margins() {
    let dir = tempfile::tempdir().unwrap();
    let inst = generate_pair(dir.path(), "i.json", "1");
    let o = kmr(&["certify", "--instance", &inst]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["format"], 1);
    for c in ["cond_a", "cond_b", "cond_c", "cond_d"] {
        assert!(v["verdict"][c]["margin"].is_number(), "{c}");
    }
    assert_eq!(v["verdict"]["implies"], "unique_optimum");
}

#[test]
fn generated_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let file = generate_pair(dir.path(), "i.json", "5");
    let text = std::fs::read_to_string(&file).unwrap();
    let inst: Instance = from_json(&text).unwrap();
    assert_eq!(inst.seed, 5);
    assert_eq!(inst.points.len(), 100);
    let again = kmr(&["generate", "--layout", "pair", "--delta", "3.5", "--m", "2", "--n", "50", "--seed", "5"]);
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);
    assert_eq!(kmr_core::io::to_json(&inst).unwrap(), text);
}

#[test]
fn identical_arguments_give_identical_outputs() {
    let args = [
        "recovery-rate", "--layout", "pair", "--delta", "3.2", "--m", "2", "--n", "20", "--seed", "4", "--seeds", "6",
        "--method", "auto",
    ];
    let a = kmr(&args);
    let b = kmr(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("delta,m,k,n,seed,verdict,margin,wall_ms"));
    let seeds: Vec<&str> = lines.map(|l| l.split(',').nth(4).unwrap()).collect();
    assert_eq!(seeds, ["4", "5", "6", "7", "8", "9"]);
}

#[test]
fn thread_count_does_not_change_output() {
    let args = [
        "scan-delta", "--layout", "line", "--k", "3", "--m", "1", "--n", "15", "--seeds", "4", "--grid", "2.5,4.2",
    ];
    let one = Command::new(env!("CARGO_BIN_EXE_kmr")).args(args).env("KMR_THREADS", "1").output().unwrap();
    let four = Command::new(env!("CARGO_BIN_EXE_kmr")).args(args).env("KMR_THREADS", "4").output().unwrap();
    assert_eq!(one.status.code(), Some(0), "{}", String::from_utf8_lossy(&one.stderr));
    assert_eq!(one.stdout, four.stdout);
}

#[test]
fn config_file_matches_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = path(dir.path(), "c.json");
    std::fs::write(
        &cfg,
        r#"{"format": 1, "layout": {"kind": "pair", "delta": 3.2}, "m": 2, "n": 20,
            "seeds": {"start": 4, "count": 3}, "method": "auto"}"#,
    )
    .unwrap();
    let a = kmr(&["recovery-rate", "--config", &cfg]);
    let b = kmr(&[
        "recovery-rate", "--layout", "pair", "--delta", "3.2", "--m", "2", "--n", "20", "--seed", "4", "--seeds", "3",
    ]);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let mixed = kmr(&["recovery-rate", "--config", &cfg, "--m", "3"]);
    assert_eq!(mixed.status.code(), Some(2));
}

#[test]
fn tfn_scan_csv() {
    let o = kmr(&["tfn-scan", "--alpha", "1.29", "--m", "2", "--grid", "20"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "t,T");
    assert_eq!(rows.len(), 21);
    for r in &rows[1..] {
        let v: f64 = r.split(',').nth(1).unwrap().parse().unwrap();
        assert!(v > 0.0);
    }
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        vec!["generate", "--layout", "pair", "--m", "2", "--n", "5"],
        vec!["generate", "--layout", "pair", "--delta", "3", "--m", "2", "--n", "5", "--bogus"],
        vec!["order-mismatch-a", "--n", "100", "--n2", "0"],
        vec!["counterexample-b", "--eps", "0.01", "--seeds", "1"],
        vec!["tfn-scan", "--alpha", "0.5", "--m", "2"],
        vec!["scan-delta", "--layout", "pair", "--m", "2", "--n", "5", "--grid", "3,2"],
        vec!["solve", "--instance", "/nonexistent/i.json"],
        vec!["nonsense"],
    ] {
        let o = kmr(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn counterexample_refusal_reports_margin() {
    let o = kmr(&["counterexample-b", "--eps", "0.01", "--interior-mass", "0.001"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("margin"));
}

#[test]
fn size_guard_is_a_computational_failure() {
    let dir = tempfile::tempdir().unwrap();
    let inst = generate_pair(dir.path(), "i.json", "2");
    let o = kmr(&["solve", "--instance", &inst, "--size-guard", "50"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn selftest_passes() {
    let o = kmr(&["selftest"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn help_lists_every_subcommand() {
    let o = kmr(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    for c in [
        "generate", "solve", "certify", "tfn-scan", "scan-delta", "counterexample-b", "order-mismatch-a",
        "recovery-rate", "selftest",
    ] {
        assert!(text.contains(c), "{c}");
    }
}
