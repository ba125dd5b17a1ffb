//! Arbitrage detection and block-space / network overhead classification.

use std::collections::{BTreeMap, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::TraceError;

use super::chain::{arb_amounts, check_known, ChainState, ReplayOutcome};
use super::{Trace, Tx};

/// Look-back window in blocks for repositioning replays.
pub const WINDOW_BLOCKS: u64 = 5;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Front,
    Back,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockspaceHit {
    pub tx_id: String,
    pub label: Label,
    /// Blocks between the overhead tx and the point where it would have succeeded.
    pub distance: u64,
    /// The successful arbitrage that took the opportunity, when one is found.
    pub target: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpportunityReport {
    pub tx_id: String,
    pub block_height: u64,
    pub profit_x: String,
    pub victim: Option<String>,
    pub blockspace: Vec<BlockspaceHit>,
    pub network: Vec<String>,
    pub blockspace_bytes: u64,
    pub network_bytes: u64,
    /// The arbitrage was never sighted, so the sighting window starts at its block time.
    pub low_confidence: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub mined_txs: usize,
    pub successful_arbitrages: usize,
    pub blockspace_overhead: usize,
    pub network_overhead: usize,
    pub blockspace_bytes: u64,
    pub network_bytes: u64,
    pub unclassifiable: usize,
    pub malformed: usize,
    pub replay_mismatches: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub distance: u64,
    pub front: usize,
    pub back: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverheadReport {
    pub opportunities: Vec<OpportunityReport>,
    /// Block-space overhead whose opportunity was never taken on chain.
    pub unattributed: Vec<BlockspaceHit>,
    pub histogram: Vec<HistogramRow>,
    pub counters: Counters,
}

impl OverheadReport {
    pub fn histogram_csv(&self) -> String {
        let mut s = String::from("distance,front,back\n");
        for r in &self.histogram {
            s.push_str(&format!("{},{},{}\n", r.distance, r.front, r.back));
        }
        s
    }

    pub fn all_blockspace(&self) -> impl Iterator<Item = &BlockspaceHit> {
        self.opportunities.iter().flat_map(|o| o.blockspace.iter()).chain(self.unattributed.iter())
    }
}

/// Mined txs whose recorded swap events satisfy the arbitrage heuristics.
pub fn detect_arbitrages(trace: &Trace) -> Vec<String> {
    trace
        .mined
        .iter()
        .filter(|id| {
            let tx = &trace.txs[*id];
            let outs: Option<Vec<_>> = tx.legs.iter().map(|l| l.amount_out).collect();
            outs.is_some_and(|o| arb_amounts(&tx.legs, &o).is_some())
        })
        .cloned()
        .collect()
}

/// Whether `tx`, replayed on the state just before mined position `pos`,
/// performs a profitable arbitrage.
pub fn is_successful_arb(chain: &ChainState, pos: usize, tx: &Tx) -> bool {
    profit_at(chain, pos, None, tx).is_some()
}

fn profit_at(chain: &ChainState, pos: usize, prefix: Option<&Tx>, tx: &Tx) -> Option<u128> {
    match chain.replay_at(pos, prefix, tx) {
        ReplayOutcome::Executed(outs) => arb_amounts(&tx.legs, &outs),
        _ => None,
    }
}

fn in_place_profit(chain: &ChainState, pos: usize, tx: &Tx) -> Option<u128> {
    chain.outcomes[pos].as_ref().and_then(|o| arb_amounts(&tx.legs, o))
}

fn first_height(trace: &Trace) -> u64 {
    let b = trace.blocks.keys().next().copied();
    let t = trace.mined.first().and_then(|id| trace.height_of(id));
    match (b, t) {
        (Some(b), Some(t)) => b.min(t),
        (b, t) => b.or(t).unwrap_or(0),
    }
}

/// Classifies the mined tx at `pos`. `Ok(None)` means not overhead;
/// `Err` means the tx cannot be judged (unknown market, or too little history).
pub fn classify_blockspace_overhead(
    trace: &Trace,
    chain: &ChainState,
    pos: usize,
) -> Result<Option<(BlockspaceHit, usize)>, TraceError> {
    let tx = &trace.txs[&trace.mined[pos]];
    check_known(trace, tx)?;
    if tx.legs.len() != 2 || in_place_profit(chain, pos, tx).is_some() {
        return Ok(None);
    }
    let i = tx.record.block_height.expect("mined");
    if i < first_height(trace) + WINDOW_BLOCKS {
        return Err(TraceError::Malformed {
            line: 0,
            msg: format!("tx {} lacks {WINDOW_BLOCKS} blocks of history", tx.id()),
        });
    }
    // Front-running: would it have worked as the first tx of a recent block?
    for j in (i - WINDOW_BLOCKS..=i).rev() {
        let start = chain.block_start(j, trace.mined.len()).min(pos);
        if profit_at(chain, start, None, tx).is_some() {
            return Ok(Some((hit(tx, Label::Front, i - j), start)));
        }
    }
    // Back-running: right behind an earlier tx paying at least as much gas.
    for l in (0..pos).rev() {
        let other = &trace.txs[&trace.mined[l]];
        let h = other.record.block_height.expect("mined");
        if h + WINDOW_BLOCKS < i {
            break;
        }
        if tx.record.gas_price <= other.record.gas_price && profit_at(chain, l, Some(other), tx).is_some() {
            return Ok(Some((hit(tx, Label::Back, i - h), l + 1)));
        }
    }
    Ok(None)
}

fn hit(tx: &Tx, label: Label, distance: u64) -> BlockspaceHit {
    BlockspaceHit {
        tx_id: tx.id().to_string(),
        label,
        distance,
        target: None,
    }
}

/// Network overhead for the successful arbitrage at mined position `arb_pos`.
///
/// `related` are ids whose sightings join tx_arb's in the earliest-appearance
/// bound (the victim and the block-space overhead of this opportunity).
/// Returns (overhead ids, low-confidence flag).
pub fn classify_network_overhead(
    trace: &Trace,
    chain: &ChainState,
    arb_pos: usize,
    related: &[String],
    candidates: &[&Tx],
) -> (Vec<String>, bool) {
    let arb = &trace.txs[&trace.mined[arb_pos]];
    let h = arb.record.block_height.expect("mined");
    let block_ts = trace.blocks.get(&h).map(|b| b.ts_ms);
    let (arb_seen, low_confidence) = match (trace.sightings.get(arb.id()), block_ts) {
        (Some(&t), _) => (Some(t), false),
        (None, ts) => (ts, true),
    };
    let earliest = related
        .iter()
        .filter_map(|id| trace.sightings.get(id).copied())
        .chain(arb_seen)
        .min();
    let (Some(earliest), Some(block_ts)) = (earliest, block_ts) else {
        return (Vec::new(), low_confidence);
    };
    let found = candidates
        .iter()
        .filter(|c| c.id() != arb.id())
        .filter(|c| {
            let seen = trace.sightings[c.id()];
            seen >= earliest && seen < block_ts
        })
        .filter(|c| profit_at(chain, arb_pos, None, c).is_some())
        .map(|c| c.id().to_string())
        .collect();
    (found, low_confidence)
}

/// The mined tx that opened the opportunity taken at `arb_pos`: scanning
/// backwards, the first position before which tx_arb no longer profits.
fn find_victim(trace: &Trace, chain: &ChainState, arb_pos: usize) -> Option<String> {
    let arb = &trace.txs[&trace.mined[arb_pos]];
    let markets: HashSet<&str> = arb.markets().into_iter().collect();
    let h = arb.record.block_height?;
    for p in (0..arb_pos).rev() {
        let other = &trace.txs[&trace.mined[p]];
        if other.record.block_height? + WINDOW_BLOCKS < h {
            break;
        }
        if chain.outcomes[p].is_none() || !other.legs.iter().any(|l| markets.contains(l.market_id.as_str())) {
            continue;
        }
        if !is_successful_arb(chain, p, arb) {
            return Some(other.id().to_string());
        }
    }
    None
}

/// Full classification of a trace.
pub fn classify(trace: &Trace) -> OverheadReport {
    let chain = ChainState::build(trace);
    let n = trace.mined.len();

    let arb_positions: Vec<usize> = (0..n)
        .filter(|&p| {
            let tx = &trace.txs[&trace.mined[p]];
            check_known(trace, tx).is_ok() && in_place_profit(&chain, p, tx).is_some()
        })
        .collect();

    let judged: Vec<Result<Option<(BlockspaceHit, usize)>, TraceError>> =
        (0..n).into_par_iter().map(|p| classify_blockspace_overhead(trace, &chain, p)).collect();

    let mut unclassifiable = 0;
    let mut by_arb: BTreeMap<usize, Vec<BlockspaceHit>> = BTreeMap::new();
    let mut unattributed = Vec::new();
    for (p, r) in judged.into_iter().enumerate() {
        match r {
            Err(_) => unclassifiable += 1,
            Ok(None) => {}
            Ok(Some((mut h, from))) => {
                // Attribute to the first successful arb on the same markets
                // between the success point and the overhead itself.
                let tx = &trace.txs[&trace.mined[p]];
                let markets = tx.markets();
                let target = arb_positions
                    .iter()
                    .copied()
                    .filter(|&a| a >= from && a < p)
                    .find(|&a| trace.txs[&trace.mined[a]].markets() == markets);
                match target {
                    Some(a) => {
                        h.target = Some(trace.mined[a].clone());
                        by_arb.entry(a).or_default().push(h);
                    }
                    None => unattributed.push(h),
                }
            }
        }
    }

    let position: HashMap<&str, usize> = trace.mined.iter().enumerate().map(|(p, id)| (id.as_str(), p)).collect();
    let mut candidates: Vec<&Tx> = trace
        .sightings
        .keys()
        .filter_map(|id| trace.txs.get(id))
        .filter(|t| {
            t.legs.len() == 2
                && check_known(trace, t).is_ok()
                && match t.record.block_height {
                    None => true,
                    Some(_) => position.get(t.id()).is_some_and(|&p| chain.outcomes[p].is_none()),
                }
        })
        .collect();
    candidates.sort_by(|a, b| a.id().cmp(b.id()));

    let size = |id: &str| trace.txs.get(id).map_or(0, |t| t.record.size_bytes);
    let opportunities: Vec<OpportunityReport> = arb_positions
        .par_iter()
        .map(|&a| {
            let tx = &trace.txs[&trace.mined[a]];
            let blockspace = by_arb.get(&a).cloned().unwrap_or_default();
            let victim = find_victim(trace, &chain, a);
            let mut related: Vec<String> = blockspace.iter().map(|h| h.tx_id.clone()).collect();
            related.extend(victim.clone());
            let (network, low_confidence) = classify_network_overhead(trace, &chain, a, &related, &candidates);
            OpportunityReport {
                tx_id: tx.id().to_string(),
                block_height: tx.record.block_height.expect("mined"),
                profit_x: in_place_profit(&chain, a, tx).unwrap_or(0).to_string(),
                victim,
                blockspace_bytes: blockspace.iter().map(|h| size(&h.tx_id)).sum(),
                network_bytes: network.iter().map(|id| size(id)).sum(),
                blockspace,
                network,
                low_confidence,
            }
        })
        .collect();

    let mut histogram: Vec<HistogramRow> = (0..=WINDOW_BLOCKS)
        .map(|d| HistogramRow {
            distance: d,
            front: 0,
            back: 0,
        })
        .collect();
    let network_ids: HashSet<String> = opportunities.iter().flat_map(|o| o.network.iter().cloned()).collect();
    let mut report = OverheadReport {
        opportunities,
        unattributed,
        histogram: Vec::new(),
        counters: Counters::default(),
    };
    let mut bs = 0;
    let mut bs_bytes = 0;
    for h in report.all_blockspace() {
        let row = &mut histogram[h.distance as usize];
        match h.label {
            Label::Front => row.front += 1,
            Label::Back => row.back += 1,
        }
        bs += 1;
        bs_bytes += size(&h.tx_id);
    }
    report.histogram = histogram;
    report.counters = Counters {
        mined_txs: n,
        successful_arbitrages: arb_positions.len(),
        blockspace_overhead: bs,
        network_overhead: network_ids.len(),
        blockspace_bytes: bs_bytes,
        network_bytes: network_ids.iter().map(|id| size(id)).sum(),
        unclassifiable,
        malformed: trace.malformed.len(),
        replay_mismatches: chain.mismatches.len(),
    };
    report
}

/// Share of swap cost saved when overhead and arbitrage are folded into the
/// aggregated swap: `1 − c_a2mm / (c_amm + c_arb + c_overhead)`.
pub fn blockspace_reduction(c_a2mm: f64, c_amm: f64, c_arb: f64, c_overhead: f64) -> Result<f64, TraceError> {
    let den = c_amm + c_arb + c_overhead;
    if den == 0.0 {
        return Err(TraceError::ZeroDenominator);
    }
    if [c_a2mm, c_amm, c_arb, c_overhead].iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(TraceError::NonPositive);
    }
    Ok(1.0 - c_a2mm / den)
}
