//! Chain + mempool observation traces: parsing, state reconstruction,
//! arbitrage detection and MEV overhead classification.

mod chain;
mod classify;
mod generate;

pub use chain::{arb_amounts, ChainState, ReplayOutcome};
pub use classify::{
    blockspace_reduction, classify, classify_blockspace_overhead, classify_network_overhead, detect_arbitrages,
    is_successful_arb, BlockspaceHit, Counters, Label, OpportunityReport, OverheadReport,
};
pub use generate::{generate, AnswerKey, GenConfig, PlantedBlockspace, PlantedNetwork};

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::amm::{AssetAmount, Direction, FeeRate, PoolState};
use crate::error::TraceError;

/// A market declaration; must precede any event on that market.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarketRecord {
    pub market_id: String,
    pub x: AssetAmount,
    pub y: AssetAmount,
    pub fee_num: u64,
    pub fee_den: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub height: u64,
    pub ts_ms: u64,
    pub size_bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxRecord {
    pub id: String,
    /// `None` for transactions that were broadcast but never mined.
    pub block_height: Option<u64>,
    pub index: Option<u32>,
    pub gas_price: u64,
    pub sender: String,
    pub nonce: u64,
    pub size_bytes: u64,
}

/// One swap intent of a transaction. `amount_out` is present only when the
/// swap executed on chain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwapEventRecord {
    pub tx_id: String,
    pub market_id: String,
    pub direction: Direction,
    pub amount_in: AssetAmount,
    #[serde(default)]
    pub min_amount_out: AssetAmount,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amount_out: Option<AssetAmount>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SightingRecord {
    pub tx_id: String,
    pub first_seen_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceRecord {
    Market(MarketRecord),
    Block(BlockRecord),
    Tx(TxRecord),
    SwapEvent(SwapEventRecord),
    P2pSighting(SightingRecord),
}

/// A transaction with its swap intents in record order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tx {
    pub record: TxRecord,
    pub legs: Vec<SwapEventRecord>,
}

impl Tx {
    pub fn id(&self) -> &str {
        &self.record.id
    }

    pub fn is_mined(&self) -> bool {
        self.record.block_height.is_some()
    }

    pub fn markets(&self) -> Vec<&str> {
        let mut m: Vec<&str> = self.legs.iter().map(|l| l.market_id.as_str()).collect();
        m.sort_unstable();
        m.dedup();
        m
    }
}

/// A parsed trace.
#[derive(Clone, Debug, Default)]
pub struct Trace {
    pub markets: BTreeMap<String, PoolState>,
    pub blocks: BTreeMap<u64, BlockRecord>,
    pub txs: HashMap<String, Tx>,
    /// Mined transaction ids in (height, index) order.
    pub mined: Vec<String>,
    pub sightings: HashMap<String, u64>,
    /// Lines that failed to parse or referenced unknown entities.
    pub malformed: Vec<String>,
}

impl Trace {
    pub fn parse(text: &str) -> Result<Trace, TraceError> {
        let mut records = Vec::new();
        let mut malformed = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<TraceRecord>(line) {
                Ok(r) => records.push(r),
                Err(e) => malformed.push(format!("line {}: {e}", n + 1)),
            }
        }
        let mut t = Trace::from_records(records)?;
        t.malformed.splice(0..0, malformed);
        Ok(t)
    }

    pub fn from_records(records: Vec<TraceRecord>) -> Result<Trace, TraceError> {
        let mut t = Trace::default();
        let mut order: Vec<(u64, u32, String)> = Vec::new();
        let mut pending_legs: Vec<SwapEventRecord> = Vec::new();
        for r in records {
            match r {
                TraceRecord::Market(m) => {
                    let fee = FeeRate::new(m.fee_num as u128, m.fee_den as u128)?;
                    t.markets
                        .insert(m.market_id.clone(), PoolState::new(m.market_id, m.x.0, m.y.0).with_fee(fee));
                }
                TraceRecord::Block(b) => {
                    t.blocks.insert(b.height, b);
                }
                TraceRecord::Tx(tx) => {
                    if let (Some(h), Some(i)) = (tx.block_height, tx.index) {
                        order.push((h, i, tx.id.clone()));
                    }
                    t.txs.insert(tx.id.clone(), Tx { record: tx, legs: Vec::new() });
                }
                TraceRecord::SwapEvent(e) => pending_legs.push(e),
                TraceRecord::P2pSighting(s) => {
                    let e = t.sightings.entry(s.tx_id).or_insert(s.first_seen_ms);
                    *e = (*e).min(s.first_seen_ms);
                }
            }
        }
        for e in pending_legs {
            if !t.markets.contains_key(&e.market_id) {
                t.malformed.push(format!("swap_event of {} on unknown market {}", e.tx_id, e.market_id));
                continue;
            }
            if e.amount_in.is_zero() {
                t.malformed.push(format!("swap_event of {} with zero input", e.tx_id));
                continue;
            }
            match t.txs.get_mut(&e.tx_id) {
                Some(tx) => tx.legs.push(e),
                None => t.malformed.push(format!("swap_event for unknown tx {}", e.tx_id)),
            }
        }
        order.sort();
        for w in order.windows(2) {
            if w[0].0 == w[1].0 && w[0].1 == w[1].1 {
                return Err(TraceError::Unordered(w[1].2.clone()));
            }
        }
        t.mined = order.into_iter().map(|(_, _, id)| id).collect();
        Ok(t)
    }

    pub fn tx(&self, id: &str) -> Option<&Tx> {
        self.txs.get(id)
    }

    pub fn height_of(&self, id: &str) -> Option<u64> {
        self.txs.get(id).and_then(|t| t.record.block_height)
    }

    /// Renders the trace back to JSON lines (markets, then blocks with their
    /// transactions, then unmined transactions, then sightings).
    pub fn to_jsonl(records: &[TraceRecord]) -> String {
        let mut s = String::new();
        for r in records {
            s.push_str(&serde_json::to_string(r).expect("records serialize"));
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_record_kinds_and_collects_malformed_lines() {
        let text = r#"{"kind":"market","market_id":"a","x":"1000","y":"1000","fee_num":997,"fee_den":1000}
{"kind":"block","height":1,"ts_ms":13000,"size_bytes":40000}
{"kind":"tx","id":"t1","block_height":1,"index":0,"gas_price":10,"sender":"s","nonce":0,"size_bytes":200}
{"kind":"swap_event","tx_id":"t1","market_id":"a","direction":"x_to_y","amount_in":"10","amount_out":"9"}
{"kind":"tx","id":"t2","block_height":null,"index":null,"gas_price":10,"sender":"s","nonce":1,"size_bytes":200}
{"kind":"p2p_sighting","tx_id":"t2","first_seen_ms":12000}
{"kind":"swap_event","tx_id":"t9","market_id":"a","direction":"x_to_y","amount_in":"10"}
garbage
"#;
        let t = Trace::parse(text).unwrap();
        assert_eq!(t.mined, vec!["t1".to_string()]);
        assert_eq!(t.tx("t1").unwrap().legs.len(), 1);
        assert!(!t.tx("t2").unwrap().is_mined());
        assert_eq!(t.sightings["t2"], 12000);
        assert_eq!(t.malformed.len(), 2);
    }

    #[test]
    fn duplicate_positions_are_rejected() {
        let text = r#"{"kind":"tx","id":"a","block_height":1,"index":0,"gas_price":1,"sender":"s","nonce":0,"size_bytes":1}
{"kind":"tx","id":"b","block_height":1,"index":0,"gas_price":1,"sender":"s","nonce":1,"size_bytes":1}"#;
        assert!(matches!(Trace::parse(text), Err(TraceError::Unordered(_))));
    }
}
