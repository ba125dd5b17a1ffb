//! Deterministic state reconstruction and concrete replay of swap intents.

use std::collections::HashMap;

use crate::amm::{apply_swap, AssetAmount, Direction, PoolState, SwapAction};
use crate::error::TraceError;

use super::{SwapEventRecord, Trace, Tx};

/// Pool states at any position of the mined sequence.
///
/// Position `p` means "just before the p-th mined transaction"; a block's
/// start is the position of its first transaction.
#[derive(Clone, Debug)]
pub struct ChainState {
    initial: HashMap<String, PoolState>,
    /// Per market: (position of the tx that changed it, state after).
    history: HashMap<String, Vec<(usize, PoolState)>>,
    /// Replayed amounts per mined tx, `None` when it reverted.
    pub outcomes: Vec<Option<Vec<AssetAmount>>>,
    /// Mined txs whose recorded amounts disagree with the replay.
    pub mismatches: Vec<String>,
    block_starts: Vec<(u64, usize)>,
}

/// Result of replaying a transaction's legs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ReplayOutcome {
    /// All legs executed; outputs in leg order.
    Executed(Vec<AssetAmount>),
    /// A slippage guard or the pool rule rejected a leg; nothing changes.
    Reverted,
    /// A leg references a market the trace never declared.
    Unknown(String),
}

impl ChainState {
    pub fn build(trace: &Trace) -> ChainState {
        let initial: HashMap<String, PoolState> = trace.markets.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        let mut history: HashMap<String, Vec<(usize, PoolState)>> = HashMap::new();
        let mut current = initial.clone();
        let mut outcomes = Vec::with_capacity(trace.mined.len());
        let mut mismatches = Vec::new();
        let mut block_starts = Vec::new();
        for (pos, id) in trace.mined.iter().enumerate() {
            let tx = &trace.txs[id];
            let h = tx.record.block_height.unwrap_or(0);
            if block_starts.last().is_none_or(|&(bh, _)| bh != h) {
                block_starts.push((h, pos));
            }
            let mut scratch: HashMap<String, PoolState> = HashMap::new();
            let res = execute_legs(&tx.legs, |m| current.get(m).cloned(), &mut scratch);
            let recorded: Option<Vec<AssetAmount>> = tx.legs.iter().map(|l| l.amount_out).collect();
            match res {
                ReplayOutcome::Executed(outs) => {
                    if recorded.as_ref() != Some(&outs) {
                        mismatches.push(id.clone());
                    }
                    for (m, s) in scratch {
                        history.entry(m.clone()).or_default().push((pos, s.clone()));
                        current.insert(m, s);
                    }
                    outcomes.push(Some(outs));
                }
                _ => {
                    if tx.legs.iter().any(|l| l.amount_out.is_some()) {
                        mismatches.push(id.clone());
                    }
                    outcomes.push(None);
                }
            }
        }
        ChainState {
            initial,
            history,
            outcomes,
            mismatches,
            block_starts,
        }
    }

    /// State of `market` just before mined position `pos`.
    pub fn pool_before(&self, market: &str, pos: usize) -> Option<PoolState> {
        if let Some(h) = self.history.get(market) {
            let k = h.partition_point(|(p, _)| *p < pos);
            if k > 0 {
                return Some(h[k - 1].1.clone());
            }
        }
        self.initial.get(market).cloned()
    }

    /// Position of the first mined tx of the first block at or after `height`.
    pub fn block_start(&self, height: u64, mined_len: usize) -> usize {
        let k = self.block_starts.partition_point(|&(h, _)| h < height);
        self.block_starts.get(k).map_or(mined_len, |&(_, p)| p)
    }

    /// Replays `tx` on the state before `pos`, optionally after first
    /// applying `prefix` (another tx's legs) at that point.
    pub fn replay_at(&self, pos: usize, prefix: Option<&Tx>, tx: &Tx) -> ReplayOutcome {
        let mut base = HashMap::new();
        if let Some(pre) = prefix {
            // A reverted prefix leaves the state untouched.
            let _ = execute_legs(&pre.legs, |m| self.pool_before(m, pos), &mut base);
        }
        let mut sink = HashMap::new();
        execute_legs(&tx.legs, |m| base.get(m).cloned().or_else(|| self.pool_before(m, pos)), &mut sink)
    }
}

/// Executes legs atomically; on success `scratch` holds every touched market's new state.
pub(crate) fn execute_legs(
    legs: &[SwapEventRecord],
    lookup: impl Fn(&str) -> Option<PoolState>,
    scratch: &mut HashMap<String, PoolState>,
) -> ReplayOutcome {
    let mut local: HashMap<String, PoolState> = HashMap::new();
    let mut outs = Vec::with_capacity(legs.len());
    for leg in legs {
        let pool = match local.get(&leg.market_id).cloned().or_else(|| lookup(&leg.market_id)) {
            Some(p) => p,
            None => return ReplayOutcome::Unknown(leg.market_id.clone()),
        };
        let action = SwapAction {
            market_id: leg.market_id.clone(),
            direction: leg.direction,
            amount_in: leg.amount_in,
            min_amount_out: leg.min_amount_out,
        };
        match apply_swap(&pool, &action) {
            Ok((next, out)) => {
                local.insert(leg.market_id.clone(), next);
                outs.push(out);
            }
            Err(_) => return ReplayOutcome::Reverted,
        }
    }
    scratch.extend(local);
    ReplayOutcome::Executed(outs)
}

/// Applies the arbitrage heuristics to concrete amounts: exactly one
/// X->Y and one Y->X leg on distinct markets (either order), the Y bought
/// covers the Y sold, and more X comes back than went in. Returns the
/// X profit when all hold.
pub fn arb_amounts(legs: &[SwapEventRecord], outs: &[AssetAmount]) -> Option<u128> {
    if legs.len() != 2 || outs.len() != 2 || legs[0].market_id == legs[1].market_id {
        return None;
    }
    let (xy, yx) = match (legs[0].direction, legs[1].direction) {
        (Direction::XToY, Direction::YToX) => (0, 1),
        (Direction::YToX, Direction::XToY) => (1, 0),
        _ => return None,
    };
    let (dx1, dy1) = (legs[xy].amount_in.0, outs[xy].0);
    let (dy2, dx2) = (legs[yx].amount_in.0, outs[yx].0);
    (dy1 >= dy2 && dx2 > dx1).then(|| dx2 - dx1)
}

pub(crate) fn check_known(trace: &Trace, tx: &Tx) -> Result<(), TraceError> {
    for l in &tx.legs {
        if !trace.markets.contains_key(&l.market_id) {
            return Err(TraceError::UnknownMarket(l.market_id.clone()));
        }
    }
    Ok(())
}
