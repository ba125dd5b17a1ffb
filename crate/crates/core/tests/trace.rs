use std::collections::{BTreeMap, BTreeSet};

use a2mm_core::trace::{
    blockspace_reduction, classify, detect_arbitrages, generate, is_successful_arb, ChainState, GenConfig, Label, Trace,
    TraceRecord,
};

fn small(seed: u64) -> GenConfig {
    GenConfig {
        seed,
        opportunities: 12,
        blockspace_overhead: 30,
        network_overhead: 40,
        ..GenConfig::default()
    }
}

fn parse(records: &[TraceRecord]) -> Trace {
    Trace::parse(&Trace::to_jsonl(records)).unwrap()
}

#[test]
fn generated_corpus_matches_answer_key() {
    for seed in [1, 2, 3] {
        let (records, key) = generate(&small(seed));
        let trace = parse(&records);
        let report = classify(&trace);
        assert!(trace.malformed.is_empty());
        assert_eq!(report.counters.replay_mismatches, 0);
        assert_eq!(report.counters.unclassifiable, 0);

        let found: BTreeSet<_> = report.opportunities.iter().map(|o| o.tx_id.clone()).collect();
        let planted: BTreeSet<_> = key.arbitrages.iter().cloned().collect();
        assert_eq!(found, planted, "seed {seed}");
        assert_eq!(detect_arbitrages(&trace).into_iter().collect::<BTreeSet<_>>(), planted);

        let got: BTreeMap<_, _> = report
            .all_blockspace()
            .map(|h| (h.tx_id.clone(), (h.label, h.distance, h.target.clone())))
            .collect();
        let want: BTreeMap<_, _> = key
            .blockspace
            .iter()
            .map(|p| (p.tx_id.clone(), (p.label, p.distance, Some(p.target.clone()))))
            .collect();
        assert_eq!(got, want, "seed {seed}");

        let got: BTreeSet<_> = report
            .opportunities
            .iter()
            .flat_map(|o| o.network.iter().map(move |n| (n.clone(), o.tx_id.clone())))
            .collect();
        let want: BTreeSet<_> = key.network.iter().map(|p| (p.tx_id.clone(), p.target.clone())).collect();
        assert_eq!(got, want, "seed {seed}");

        for (arb, victim) in &key.victims {
            let o = report.opportunities.iter().find(|o| &o.tx_id == arb).unwrap();
            assert_eq!(o.victim.as_ref(), Some(victim));
        }
        let hist: Vec<(usize, usize)> = report.histogram.iter().map(|r| (r.front, r.back)).collect();
        assert_eq!(hist, key.histogram);
    }
}

#[test]
fn report_is_deterministic() {
    let (records, _) = generate(&small(9));
    let a = serde_json::to_string(&classify(&parse(&records))).unwrap();
    let b = serde_json::to_string(&classify(&parse(&records))).unwrap();
    assert_eq!(a, b);
}

#[test]
fn arbitrage_replayed_after_extraction_fails() {
    let (records, key) = generate(&small(4));
    let trace = parse(&records);
    let chain = ChainState::build(&trace);
    let id = &key.arbitrages[0];
    let pos = trace.mined.iter().position(|m| m == id).unwrap();
    let tx = trace.tx(id).unwrap();
    assert!(is_successful_arb(&chain, pos, tx));
    assert!(!is_successful_arb(&chain, pos + 1, tx));
    let mut empty = tx.clone();
    empty.legs.clear();
    assert!(!is_successful_arb(&chain, pos, &empty));
}

/// One victim + back-running arb in block 8, a duplicate mined in block 9,
/// three unmined same-nonce duplicates and two badly timed sightings.
fn handmade() -> String {
    let (records, _) = generate(&GenConfig {
        seed: 0,
        opportunities: 0,
        blockspace_overhead: 0,
        network_overhead: 0,
        noise_markets: 2,
        noise_per_block: 1,
        decoys: false,
    });
    let mut lines: Vec<String> = records
        .iter()
        .filter(|r| matches!(r, TraceRecord::Market(_)))
        .map(|r| serde_json::to_string(r).unwrap())
        .collect();
    lines.push(r#"{"kind":"market","market_id":"A","x":"1000000000","y":"1000000000","fee_num":997,"fee_den":1000}"#.into());
    lines.push(r#"{"kind":"market","market_id":"B","x":"2000000000","y":"2000000000","fee_num":997,"fee_den":1000}"#.into());
    for h in 1..=10u64 {
        lines.push(format!(r#"{{"kind":"block","height":{h},"ts_ms":{},"size_bytes":30000}}"#, h * 13_000));
    }
    // Victim pushes A's Y price up; the arb buys Y on B and sells it into A.
    let swap = |tx: &str, m: &str, d: &str, a: u128, min: u128| {
        format!(r#"{{"kind":"swap_event","tx_id":"{tx}","market_id":"{m}","direction":"{d}","amount_in":"{a}","min_amount_out":"{min}"}}"#)
    };
    let tx = |id: &str, h: Option<u64>, i: u32, gas: u64, nonce: u64| match h {
        Some(h) => format!(
            r#"{{"kind":"tx","id":"{id}","block_height":{h},"index":{i},"gas_price":{gas},"sender":"s","nonce":{nonce},"size_bytes":300}}"#
        ),
        None => format!(
            r#"{{"kind":"tx","id":"{id}","block_height":null,"index":null,"gas_price":{gas},"sender":"bot","nonce":{nonce},"size_bytes":300}}"#
        ),
    };
    let pools = [
        a2mm_core::PoolState::new("A", 1_000_000_000, 1_000_000_000),
        a2mm_core::PoolState::new("B", 2_000_000_000, 2_000_000_000),
    ];
    let v_amt = 100_000_000u128;
    let (a_after, _) =
        a2mm_core::amm::apply_swap(&pools[0], &a2mm_core::SwapAction::new("A", a2mm_core::Direction::XToY, v_amt)).unwrap();
    let delta = a2mm_core::arbitrage::optimal_input(&pools[1], &a_after).unwrap().0;
    let mid = a2mm_core::amm::quote(&pools[1], a2mm_core::Direction::XToY, a2mm_core::AssetAmount(delta)).unwrap().0;
    lines.push(tx("victim", Some(8), 0, 40, 0));
    lines.push(swap("victim", "A", "x_to_y", v_amt, 0));
    lines.push(tx("arb", Some(8), 1, 40, 7));
    lines.push(swap("arb", "B", "x_to_y", delta, 0));
    lines.push(swap("arb", "A", "y_to_x", mid, delta + 1));
    lines.push(tx("dup", Some(9), 0, 40, 8));
    lines.push(swap("dup", "B", "x_to_y", delta, 0));
    lines.push(swap("dup", "A", "y_to_x", mid, delta + 1));
    lines.push(tx("plain", Some(9), 1, 90, 9));
    lines.push(swap("plain", "B", "y_to_x", 1000, 0));
    for (id, seen) in [("u1", 95_000), ("u2", 100_000), ("u3", 103_999), ("late", 104_500), ("early", 80_000)] {
        lines.push(tx(id, None, 0, 40, 7));
        lines.push(swap(id, "B", "x_to_y", delta, 0));
        lines.push(swap(id, "A", "y_to_x", mid, delta + 1));
        lines.push(format!(r#"{{"kind":"p2p_sighting","tx_id":"{id}","first_seen_ms":{seen}}}"#));
    }
    lines.push(r#"{"kind":"p2p_sighting","tx_id":"victim","first_seen_ms":94000}"#.into());
    lines.push(r#"{"kind":"p2p_sighting","tx_id":"arb","first_seen_ms":96000}"#.into());
    // Recorded outputs come from replaying the trace itself.
    let trace = Trace::parse(&lines.join("\n")).unwrap();
    let chain = ChainState::build(&trace);
    let mut out = Vec::new();
    for line in lines {
        let mut v: serde_json::Value = serde_json::from_str(&line).unwrap();
        if v["kind"] == "swap_event" {
            let id = v["tx_id"].as_str().unwrap().to_string();
            if let Some(pos) = trace.mined.iter().position(|m| *m == id) {
                if let Some(outs) = &chain.outcomes[pos] {
                    let k = trace.tx(&id).unwrap().legs.iter().position(|l| l.market_id == v["market_id"]).unwrap();
                    v["amount_out"] = serde_json::Value::String(outs[k].0.to_string());
                }
            }
        }
        out.push(v.to_string());
    }
    out.join("\n")
}

#[test]
fn handmade_back_run_and_flooding() {
    let trace = Trace::parse(&handmade()).unwrap();
    let report = classify(&trace);
    assert_eq!(report.counters.replay_mismatches, 0);
    assert_eq!(detect_arbitrages(&trace), vec!["arb".to_string()]);
    let o = &report.opportunities[0];
    assert_eq!(o.tx_id, "arb");
    assert_eq!(o.victim.as_deref(), Some("victim"));
    assert_eq!(o.blockspace.len(), 1);
    assert_eq!((o.blockspace[0].tx_id.as_str(), o.blockspace[0].label, o.blockspace[0].distance), ("dup", Label::Back, 1));
    assert_eq!(o.network, vec!["u1", "u2", "u3"]);
    assert_eq!(o.network_bytes, 900);
    assert!(!o.low_confidence);
}

#[test]
fn split_and_losing_round_trips_are_not_arbitrage() {
    let base = r#"{"kind":"market","market_id":"A","x":"1000000","y":"1000000","fee_num":997,"fee_den":1000}
{"kind":"market","market_id":"B","x":"1000000","y":"1000000","fee_num":997,"fee_den":1000}
{"kind":"block","height":1,"ts_ms":1,"size_bytes":1}"#;
    let planted = format!(
        r#"{base}
{{"kind":"tx","id":"t","block_height":1,"index":0,"gas_price":1,"sender":"s","nonce":0,"size_bytes":1}}
{{"kind":"swap_event","tx_id":"t","market_id":"A","direction":"x_to_y","amount_in":"100000","amount_out":"90661"}}
{{"kind":"swap_event","tx_id":"t","market_id":"B","direction":"y_to_x","amount_in":"90661","amount_out":"100950"}}"#
    );
    assert_eq!(detect_arbitrages(&Trace::parse(&planted).unwrap()), vec!["t".to_string()]);
    let split = format!(
        r#"{base}
{{"kind":"tx","id":"t","block_height":1,"index":0,"gas_price":1,"sender":"s","nonce":0,"size_bytes":1}}
{{"kind":"swap_event","tx_id":"t","market_id":"A","direction":"x_to_y","amount_in":"100000","amount_out":"90661"}}
{{"kind":"tx","id":"u","block_height":1,"index":1,"gas_price":1,"sender":"s","nonce":1,"size_bytes":1}}
{{"kind":"swap_event","tx_id":"u","market_id":"B","direction":"y_to_x","amount_in":"90661","amount_out":"100950"}}"#
    );
    assert!(detect_arbitrages(&Trace::parse(&split).unwrap()).is_empty());
    let loss = planted.replace("100950", "99000");
    assert!(detect_arbitrages(&Trace::parse(&loss).unwrap()).is_empty());
}

#[test]
fn reduction_formula_limits_and_monotonicity() {
    let eps = 1e-12;
    assert!(blockspace_reduction(5.0, 5.0, eps, eps).unwrap().abs() < 1e-9);
    let r = blockspace_reduction(127.0, 228.0, 193.0, 6.0 * 193.0 * 0.29).unwrap();
    assert!(r > 0.0 && r < 1.0);
    let mut last = f64::NEG_INFINITY;
    for k in 1..50 {
        let r = blockspace_reduction(127.0, 228.0, 193.0, k as f64 * 10.0).unwrap();
        assert!(r > last);
        last = r;
    }
    assert!(blockspace_reduction(1.0, 0.0, 0.0, 0.0).is_err());
    assert!(blockspace_reduction(0.0, 1.0, 1.0, 1.0).is_err());
}
