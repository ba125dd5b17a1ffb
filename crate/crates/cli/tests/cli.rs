mod common;

use std::process::Command;

use common::{a2mm, run_all, stdout};

#[test]
fn every_subcommand_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = run_all(a.path());
    let second = run_all(b.path());
    for ((name, x), (_, y)) in first.iter().zip(&second) {
        assert!(x == y, "output differs between runs: {name}");
    }
}

#[test]
fn documented_examples() {
    let d = tempfile::tempdir().unwrap();
    let o = a2mm(&["swap", "--x", "1000000", "--y", "1000000", "--in", "100000"], d.path());
    assert_eq!(stdout(&o), "90661\n");

    let o = a2mm(&["arb", "--pool1", "1000000,2000000", "--pool2", "1000000,1000000"], d.path());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let delta: f64 = v["delta"].as_str().unwrap().parse().unwrap();
    assert!((delta - 137_342.0).abs() / 137_342.0 < 0.005, "{delta}");
    assert!(v["profit"].as_str().unwrap().parse::<i64>().unwrap() > 0);

    let o = a2mm(&["netsim", "--bandwidths", "10,20,30,40,50,60,70,80,90,100", "--blocks", "2000"], d.path());
    let text = stdout(&o);
    assert!(text.starts_with("bandwidth,stale_rate,stderr\n"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 11);
    assert!(text.lines().last().unwrap().starts_with("# fit {"));
}

#[test]
fn exit_codes_and_error_stream() {
    let d = tempfile::tempdir().unwrap();
    let usage = a2mm(&["swap", "--nope"], d.path());
    assert_eq!(usage.status.code(), Some(2));

    let domain = a2mm(&["swap", "--x", "10", "--y", "10", "--in", "5", "--min-out", "100"], d.path());
    assert_eq!(domain.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&domain.stderr).unwrap();
    assert_eq!(err["error"], "amm");

    let io = a2mm(&["analyze", "--trace", "missing.jsonl"], d.path());
    assert_eq!(io.status.code(), Some(1));
    let err: serde_json::Value = serde_json::from_slice(&io.stderr).unwrap();
    assert_eq!(err["error"], "io");

    assert_eq!(a2mm(&["netsim", "--bandwidth", "0", "--blocks", "100"], d.path()).status.code(), Some(1));
    assert_eq!(a2mm(&["--help"], d.path()).status.code(), Some(0));
}

#[test]
fn help_documents_units_and_environment() {
    let d = tempfile::tempdir().unwrap();
    let top = stdout(&a2mm(&["--help"], d.path()));
    assert!(top.contains("A2MM_SEED") && top.contains("A2MM_TOLERANCE"));
    assert!(top.contains("base units") && top.contains("Mbit/s"));
    let net = stdout(&a2mm(&["netsim", "--help"], d.path()));
    assert!(net.contains("Mbit/s") && net.contains("ms"));
    let swap = stdout(&a2mm(&["swap", "--help"], d.path()));
    assert!(swap.contains("base units"));
}

#[test]
fn oracle_fixtures_round_trip_through_check() {
    let d = tempfile::tempdir().unwrap();
    let gen = a2mm(&["oracle", "--kind", "arb", "--count", "5", "--out", "arb.json"], d.path());
    assert!(gen.status.success());
    let check = a2mm(&["oracle", "--kind", "arb", "--check", "arb.json"], d.path());
    assert!(check.status.success(), "{}", String::from_utf8_lossy(&check.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&check)).unwrap();
    assert_eq!(v["checked"], 5);
}

#[test]
fn seed_comes_from_the_environment() {
    let d = tempfile::tempdir().unwrap();
    let run = |seed: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_a2mm"));
        c.args(["oracle", "--kind", "arb", "--count", "2"]).current_dir(d.path()).env_remove("A2MM_SEED");
        if let Some(s) = seed {
            c.env("A2MM_SEED", s);
        }
        c.output().unwrap().stdout
    };
    assert_eq!(run(None), run(Some("7")));
    assert_ne!(run(None), run(Some("8")));
}
