//! The aggregated market maker's front door: decide how to serve a swap,
//! compress the resulting legs to one net swap per market, execute
//! atomically, and replay request streams.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::amm::{apply_exact, apply_swap, Asset, AssetAmount, Direction, PoolState, SwapAction};
use crate::arbitrage::{find_profitable_pair, n_pool_arbitrage};
use crate::error::EngineError;
use crate::routing::{leveling_volume, route};

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct A2mmRequest {
    pub direction: Direction,
    pub amount_in: AssetAmount,
    #[serde(default)]
    pub min_amount_out: AssetAmount,
    #[serde(default = "default_true")]
    pub arbitrage_enabled: bool,
}

impl A2mmRequest {
    pub fn new(direction: Direction, amount_in: u128) -> Self {
        A2mmRequest {
            direction,
            amount_in: AssetAmount(amount_in),
            min_amount_out: AssetAmount::ZERO,
            arbitrage_enabled: true,
        }
    }
}

/// Which branch of the decision tree served a request.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Leaf {
    /// The sandwich predicate fired: route only, no arbitrage.
    Sandwichable,
    /// The swap alone levels every pool: pure routing.
    RoutingSynchronizes,
    /// Routing, then best-effort arbitrage on the post-routing states.
    RoutingThenArbitrage,
    /// Below the leveling volume but arbitrage disabled or nothing to take.
    RoutingOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Routing,
    Arbitrage,
}

/// One uncompressed leg with its simulated output.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedLeg {
    pub action: SwapAction,
    pub amount_out: AssetAmount,
    pub provenance: Provenance,
}

/// The net effect of all legs on one market: `amount_in` of the direction's
/// input asset deposited, `amount_out` of its output withdrawn.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetSwap {
    pub market_id: String,
    pub direction: Direction,
    pub amount_in: AssetAmount,
    pub amount_out: AssetAmount,
    pub provenance: Vec<Provenance>,
    /// True when the merged legs did not all share one direction.
    pub mixed: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineCounters {
    pub swaps: u32,
    pub routing_computations: u32,
    pub arbitrage_computations: u32,
    pub sync_computations: u32,
}

/// Relative costs over one plain swap, per operation.
pub const ROUTING_COST: f64 = 0.1780;
pub const ARBITRAGE_COST: f64 = 0.4242;
pub const SYNC_COST: f64 = 0.1780;

impl EngineCounters {
    pub fn cost_units(&self) -> f64 {
        self.swaps as f64
            + ROUTING_COST * self.routing_computations as f64
            + ARBITRAGE_COST * self.arbitrage_computations as f64
            + SYNC_COST * self.sync_computations as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchPlan {
    pub request: A2mmRequest,
    pub leaf: Leaf,
    /// Volume after which routing alone would level all pools.
    pub leveling_volume: AssetAmount,
    /// Whether some pool pair was profitable after the routing legs.
    pub post_routing_profitable: bool,
    pub legs: Vec<TaggedLeg>,
    /// At most one per market, sorted by market id.
    pub net_swaps: Vec<NetSwap>,
    pub expected_out: AssetAmount,
    pub arb_profit: AssetAmount,
    pub profit_asset: Asset,
    pub counters: EngineCounters,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExecutionReport {
    pub leaf: Leaf,
    pub amount_out: AssetAmount,
    pub arb_profit: AssetAmount,
    pub legs_executed: usize,
    pub pre: Vec<PoolState>,
    pub post: Vec<PoolState>,
    pub counters: EngineCounters,
    pub cost_units: f64,
}

/// Decides whether a request is exposed to sandwiching. The formula lives
/// outside this crate; the default never fires.
pub trait SandwichPredicate {
    fn is_sandwichable(&self, request: &A2mmRequest, pools: &[PoolState]) -> bool;
}

pub struct NeverSandwichable;

impl SandwichPredicate for NeverSandwichable {
    fn is_sandwichable(&self, _: &A2mmRequest, _: &[PoolState]) -> bool {
        false
    }
}

impl<F: Fn(&A2mmRequest, &[PoolState]) -> bool> SandwichPredicate for F {
    fn is_sandwichable(&self, request: &A2mmRequest, pools: &[PoolState]) -> bool {
        self(request, pools)
    }
}

pub fn plan(request: &A2mmRequest, pools: &[PoolState]) -> Result<BatchPlan, EngineError> {
    plan_with(request, pools, &NeverSandwichable)
}

pub fn plan_with(
    request: &A2mmRequest,
    pools: &[PoolState],
    sandwich: &dyn SandwichPredicate,
) -> Result<BatchPlan, EngineError> {
    if request.amount_in.is_zero() {
        return Err(EngineError::ZeroInput);
    }
    let dir = request.direction;
    let mut counters = EngineCounters::default();
    let leveling = leveling_volume(pools, dir)?;
    let sandwichable = sandwich.is_sandwichable(request, pools);

    counters.routing_computations += 1;
    let route_plan = route(pools, dir, request.amount_in)?;
    let mut legs = Vec::new();
    let mut state = pools.to_vec();
    let mut expected_out = AssetAmount::ZERO;
    for leg in route_plan.active_legs() {
        let action = SwapAction::new(leg.market_id.clone(), dir, leg.amount_in.0);
        let out = run_leg(&mut state, &action)?;
        expected_out = expected_out.checked_add(out)?;
        legs.push(TaggedLeg {
            action,
            amount_out: out,
            provenance: Provenance::Routing,
        });
    }
    let post_routing_profitable = pools.len() > 1 && find_profitable_pair(&state).is_some();

    let profit_asset = dir.output_asset();
    let mut arb_profit = AssetAmount::ZERO;
    let leaf = if sandwichable {
        Leaf::Sandwichable
    } else if request.amount_in >= leveling {
        Leaf::RoutingSynchronizes
    } else if request.arbitrage_enabled && post_routing_profitable {
        let arb = n_pool_arbitrage(&state, profit_asset)?;
        counters.arbitrage_computations += arb.counters.arbitrage_computations;
        counters.sync_computations += arb.counters.sync_computations;
        for action in arb.plan.legs {
            let action = SwapAction { min_amount_out: AssetAmount::ZERO, ..action };
            let out = run_leg(&mut state, &action)?;
            legs.push(TaggedLeg {
                action,
                amount_out: out,
                provenance: Provenance::Arbitrage,
            });
        }
        arb_profit = arb.plan.expected_profit;
        Leaf::RoutingThenArbitrage
    } else {
        Leaf::RoutingOnly
    };

    let net_swaps = compress(pools, &legs)?;
    counters.swaps = net_swaps.len() as u32;
    Ok(BatchPlan {
        request: request.clone(),
        leaf,
        leveling_volume: leveling,
        post_routing_profitable,
        legs,
        net_swaps,
        expected_out,
        arb_profit,
        profit_asset,
        counters,
    })
}

fn find(pools: &[PoolState], id: &str) -> Result<usize, EngineError> {
    pools
        .iter()
        .position(|p| p.market_id == id)
        .ok_or_else(|| EngineError::UnknownMarket(id.to_string()))
}

fn run_leg(state: &mut [PoolState], action: &SwapAction) -> Result<AssetAmount, EngineError> {
    let i = find(state, &action.market_id)?;
    let (next, out) = apply_swap(&state[i], action)?;
    state[i] = next;
    Ok(out)
}

/// Executes legs one by one (the uncompressed reference path).
pub fn execute_sequential(pools: &[PoolState], legs: &[TaggedLeg]) -> Result<Vec<PoolState>, EngineError> {
    let mut state = pools.to_vec();
    for leg in legs {
        run_leg(&mut state, &leg.action)?;
    }
    Ok(state)
}

/// Merges legs into one net swap per market from their simulated in/out amounts.
pub fn compress(pools: &[PoolState], legs: &[TaggedLeg]) -> Result<Vec<NetSwap>, EngineError> {
    #[derive(Default)]
    struct Acc {
        dx: i128,
        dy: i128,
        dirs: Vec<Direction>,
        tags: Vec<Provenance>,
    }
    let mut per: BTreeMap<&str, Acc> = BTreeMap::new();
    for leg in legs {
        find(pools, &leg.action.market_id)?;
        let acc = per.entry(leg.action.market_id.as_str()).or_default();
        let (i, o) = (leg.action.amount_in.0 as i128, leg.amount_out.0 as i128);
        match leg.action.direction {
            Direction::XToY => {
                acc.dx += i;
                acc.dy -= o;
            }
            Direction::YToX => {
                acc.dy += i;
                acc.dx -= o;
            }
        }
        if !acc.dirs.contains(&leg.action.direction) {
            acc.dirs.push(leg.action.direction);
        }
        if !acc.tags.contains(&leg.provenance) {
            acc.tags.push(leg.provenance);
        }
    }
    let mut out = Vec::new();
    for (id, mut acc) in per {
        let (direction, amount_in, amount_out) = match (acc.dx.signum(), acc.dy.signum()) {
            (0, 0) => continue,
            (1, s) if s <= 0 => (Direction::XToY, acc.dx, -acc.dy),
            (s, 1) if s <= 0 => (Direction::YToX, acc.dy, -acc.dx),
            _ => return Err(EngineError::Compression(id.to_string())),
        };
        acc.tags.sort();
        out.push(NetSwap {
            market_id: id.to_string(),
            direction,
            amount_in: AssetAmount(amount_in as u128),
            amount_out: AssetAmount(amount_out as u128),
            provenance: acc.tags,
            mixed: acc.dirs.len() > 1,
        });
    }
    Ok(out)
}

/// Applies the plan's net swaps in market-id order. All or nothing: on any
/// failure the caller's pools are untouched.
pub fn execute(plan: &BatchPlan, pools: &[PoolState]) -> Result<(Vec<PoolState>, ExecutionReport), EngineError> {
    execute_swaps(plan, &plan.net_swaps, pools)
}

/// As `execute`, with the net swaps applied in the given order.
pub fn execute_swaps(
    plan: &BatchPlan,
    swaps: &[NetSwap],
    pools: &[PoolState],
) -> Result<(Vec<PoolState>, ExecutionReport), EngineError> {
    if plan.expected_out < plan.request.min_amount_out {
        return Err(EngineError::Slippage {
            got: plan.expected_out,
            min: plan.request.min_amount_out,
        });
    }
    let mut state = pools.to_vec();
    for s in swaps {
        let i = find(&state, &s.market_id)?;
        state[i] = apply_exact(&state[i], s.direction, s.amount_in, s.amount_out)?;
    }
    let report = ExecutionReport {
        leaf: plan.leaf,
        amount_out: plan.expected_out,
        arb_profit: plan.arb_profit,
        legs_executed: swaps.len(),
        pre: pools.to_vec(),
        post: state.clone(),
        counters: plan.counters,
        cost_units: plan.counters.cost_units(),
    };
    Ok((state, report))
}

// ---- replay ----

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Amm,
    A2mm,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "amm" => Ok(Mode::Amm),
            "a2mm" => Ok(Mode::A2mm),
            other => Err(format!("unknown mode {other:?}")),
        }
    }
}

/// One line of a swap stream.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamRecord {
    pub seq: u64,
    pub market_hint: String,
    pub direction: Direction,
    pub amount_in: AssetAmount,
    #[serde(default)]
    pub min_amount_out: AssetAmount,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub seq: Option<u64>,
    pub mode: Mode,
    pub leaf: Option<Leaf>,
    pub amount_in: AssetAmount,
    pub out_amm: AssetAmount,
    pub out_a2mm: AssetAmount,
    /// `out_a2mm - out_amm`, signed.
    pub routing_gain: i128,
    pub arb_profit: AssetAmount,
    pub cost_units: f64,
    pub error: Option<String>,
}

impl ReplayEntry {
    fn failed(seq: Option<u64>, mode: Mode, msg: String) -> Self {
        ReplayEntry {
            seq,
            mode,
            leaf: None,
            amount_in: AssetAmount::ZERO,
            out_amm: AssetAmount::ZERO,
            out_a2mm: AssetAmount::ZERO,
            routing_gain: 0,
            arb_profit: AssetAmount::ZERO,
            cost_units: 0.0,
            error: Some(msg),
        }
    }
}

/// Parses a JSON-lines stream; malformed lines become `Err` items.
pub fn parse_stream(text: &str) -> Vec<Result<StreamRecord, String>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| serde_json::from_str(l).map_err(|e| format!("line {}: {e}", n + 1)))
        .collect()
}

/// Replays requests against `pools`. Both modes are evaluated from the same
/// pre-state for every record; the universe then advances by `mode`.
/// Bad records produce an error entry and leave the state unchanged.
pub fn replay(
    stream: &[Result<StreamRecord, String>],
    pools: &[PoolState],
    mode: Mode,
    arbitrage_enabled: bool,
) -> (Vec<ReplayEntry>, Vec<PoolState>) {
    let mut state = pools.to_vec();
    let mut entries = Vec::with_capacity(stream.len());
    for rec in stream {
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                entries.push(ReplayEntry::failed(None, mode, EngineError::Malformed(e.clone()).to_string()));
                continue;
            }
        };
        match replay_one(rec, &state, mode, arbitrage_enabled) {
            Ok((entry, next)) => {
                entries.push(entry);
                state = next;
            }
            Err(e) => entries.push(ReplayEntry::failed(Some(rec.seq), mode, e.to_string())),
        }
    }
    (entries, state)
}

fn replay_one(
    rec: &StreamRecord,
    state: &[PoolState],
    mode: Mode,
    arbitrage_enabled: bool,
) -> Result<(ReplayEntry, Vec<PoolState>), EngineError> {
    let hint = find(state, &rec.market_hint)?;
    let single = SwapAction {
        market_id: rec.market_hint.clone(),
        direction: rec.direction,
        amount_in: rec.amount_in,
        min_amount_out: rec.min_amount_out,
    };
    let amm = apply_swap(&state[hint], &single);

    let request = A2mmRequest {
        direction: rec.direction,
        amount_in: rec.amount_in,
        min_amount_out: rec.min_amount_out,
        arbitrage_enabled,
    };
    let a2 = plan(&request, state).and_then(|p| execute(&p, state).map(|r| (p, r)));

    let out_amm = amm.as_ref().map(|(_, o)| *o).unwrap_or(AssetAmount::ZERO);
    let (next, leaf, out_a2mm, arb_profit, cost) = match mode {
        Mode::Amm => {
            let (pool, _) = amm?;
            let mut next = state.to_vec();
            next[hint] = pool;
            let (leaf, out, arb, cost) = match &a2 {
                Ok((p, (_, rep))) => (Some(p.leaf), rep.amount_out, rep.arb_profit, 1.0),
                Err(_) => (None, AssetAmount::ZERO, AssetAmount::ZERO, 1.0),
            };
            (next, leaf, out, arb, cost)
        }
        Mode::A2mm => {
            let (p, (next, rep)) = a2?;
            (next, Some(p.leaf), rep.amount_out, rep.arb_profit, rep.cost_units)
        }
    };
    Ok((
        ReplayEntry {
            seq: Some(rec.seq),
            mode,
            leaf,
            amount_in: rec.amount_in,
            out_amm,
            out_a2mm,
            routing_gain: out_a2mm.0 as i128 - out_amm.0 as i128,
            arb_profit,
            cost_units: cost,
            error: None,
        },
        next,
    ))
}
