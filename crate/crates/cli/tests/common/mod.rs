#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

pub fn a2mm(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_a2mm"))
        .args(args)
        .current_dir(dir)
        .env_remove("A2MM_SEED")
        .env_remove("A2MM_TOLERANCE")
        .output()
        .expect("binary runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

pub const STREAM: &str = r#"{"seq":1,"market_hint":"pool0","direction":"x_to_y","amount_in":"1000"}
{"seq":2,"market_hint":"pool1","direction":"y_to_x","amount_in":"50000"}
garbage
{"seq":3,"market_hint":"pool0","direction":"x_to_y","amount_in":"250000"}
"#;

/// Every subcommand, with any file outputs it writes.
pub fn invocations() -> Vec<(Vec<&'static str>, Vec<&'static str>)> {
    let pools = ["--pool", "1000000,2000000", "--pool", "1000000,1000000", "--pool", "3000000,4000000"];
    let with = |head: &[&'static str], tail: &[&'static str]| -> Vec<&'static str> {
        head.iter().chain(pools.iter()).chain(tail.iter()).copied().collect()
    };
    vec![
        (vec!["swap", "--x", "1000000", "--y", "1000000", "--in", "100000", "--format", "json"], vec![]),
        (with(&["route"], &["--in", "70000", "--direction", "y-to-x"]), vec![]),
        (vec!["arb", "--pool1", "1000000,2000000", "--pool2", "1000000,1000000"], vec![]),
        (with(&["arb", "--n-pool"], &[]), vec![]),
        (with(&["plan"], &["--in", "5000", "--execute"]), vec![]),
        (with(&["replay"], &["--stream", "stream.jsonl", "--format", "csv"]), vec![]),
        (with(&["replay"], &["--stream", "stream.jsonl", "--mode", "amm"]), vec![]),
        (vec!["oracle", "--kind", "arb", "--count", "4", "--seed", "3"], vec![]),
        (vec!["oracle", "--kind", "route", "--count", "3", "--pools-per-instance", "3"], vec![]),
        (
            vec!["gen-trace", "--opportunities", "10", "--blockspace", "30", "--network", "50", "--out", "t.jsonl", "--key", "k.json"],
            vec!["t.jsonl", "k.json"],
        ),
        (vec!["analyze", "--trace", "t.jsonl", "--histogram-csv", "h.csv"], vec!["h.csv"]),
        (vec!["netsim", "--bandwidths", "10,40,70,100", "--blocks", "2000"], vec![]),
        (vec!["netsim", "--bandwidth", "40.5", "--blocks", "2000", "--format", "json"], vec![]),
        (vec!["netsim", "--flood", "70,1.92,13,200"], vec![]),
    ]
}

pub fn run_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    std::fs::write(dir.join("stream.jsonl"), STREAM).unwrap();
    let mut out = Vec::new();
    for (args, files) in invocations() {
        let o = a2mm(&args, dir);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        out.push((args.join(" "), o.stdout));
        for f in files {
            out.push((f.to_string(), std::fs::read(dir.join(f)).unwrap()));
        }
    }
    out
}
