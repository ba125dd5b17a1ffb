//! Two-point arbitrage between constant-product pools, and the greedy
//! N-pool strategy that narrows the price gap one pool at a time.
//!
//! Orientation: the "rich" pool (higher `y/x`) receives X, the "poor" pool
//! receives the Y obtained and pays X back; profit is denominated in X.
//! Profit in Y is handled by mirroring the pools.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashSet};

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::amm::{amount_in_for, apply_swap, quote_raw, Asset, AssetAmount, Direction, PoolState, SwapAction};
use crate::error::{AmmError, ArbError};
use crate::routing::{apportion, threshold_to_price};
use crate::wide;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArbPlan {
    pub legs: Vec<SwapAction>,
    pub expected_profit: AssetAmount,
    pub profit_asset: Asset,
}

/// Several level pools treated as one market.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VirtualPool {
    pub members: Vec<String>,
    pub x: AssetAmount,
    pub y: AssetAmount,
}

impl VirtualPool {
    pub fn aggregate(pools: &[&PoolState]) -> Result<VirtualPool, AmmError> {
        let mut x = AssetAmount::ZERO;
        let mut y = AssetAmount::ZERO;
        for p in pools {
            x = x.checked_add(p.x)?;
            y = y.checked_add(p.y)?;
        }
        Ok(VirtualPool {
            members: pools.iter().map(|p| p.market_id.clone()).collect(),
            x,
            y,
        })
    }

    pub fn as_pool(&self, fee: crate::amm::FeeRate) -> PoolState {
        PoolState::new(format!("virtual[{}]", self.members.join("+")), self.x.0, self.y.0).with_fee(fee)
    }
}

/// Operation counts of one strategy run, in the units of the cost table.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostCounters {
    pub arbitrage_computations: u32,
    pub sync_computations: u32,
    pub swaps: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NPoolOutcome {
    /// Uncompressed legs in execution order.
    pub plan: ArbPlan,
    /// Final states, in the input order.
    pub final_pools: Vec<PoolState>,
    pub counters: CostCounters,
    pub iterations: u32,
    /// Pools that ended up in an aggregate (touched by at least one leg).
    pub involved: Vec<String>,
}

/// Exact check `y2 * x1 * den^2 < num^2 * y1 * x2`: buying Y on `pool1` and
/// selling it on `pool2` can make money in X.
pub fn is_profitable(pool1: &PoolState, pool2: &PoolState) -> bool {
    if !pool1.is_active() || !pool2.is_active() || pool1.fee != pool2.fee {
        return false;
    }
    let f = pool1.fee;
    wide::cmp_products(&[pool2.y.0, pool1.x.0, f.den(), f.den()], &[f.num(), f.num(), pool1.y.0, pool2.x.0])
        == Ordering::Less
}

/// Some ordered pair `(i, j)` with `is_profitable(pools[i], pools[j])`, if any.
pub fn find_profitable_pair(pools: &[PoolState]) -> Option<(usize, usize)> {
    for i in 0..pools.len() {
        for j in 0..pools.len() {
            if i != j && is_profitable(&pools[i], &pools[j]) {
                return Some((i, j));
            }
        }
    }
    None
}

fn check_pair(pool1: &PoolState, pool2: &PoolState) -> Result<(), ArbError> {
    if pool1.fee != pool2.fee {
        return Err(ArbError::MixedFees(pool1.market_id.clone(), pool2.market_id.clone()));
    }
    if !pool1.is_active() {
        return Err(AmmError::InvalidPool(pool1.market_id.clone()).into());
    }
    if !pool2.is_active() {
        return Err(AmmError::InvalidPool(pool2.market_id.clone()).into());
    }
    Ok(())
}

/// Real-valued optimum with exact fee: returns `(delta*, profit*)`.
///
/// With `A = g^2 y1 x2`, `B = x1 y2`, `C = g (g y1 + y2)`:
/// `delta* = sqrt(B) (sqrt(A) - sqrt(B)) / C`, `profit* = (sqrt(A) - sqrt(B))^2 / C`.
/// `A - B` is formed exactly so near-band pairs keep their precision.
pub fn analytic_optimum(pool1: &PoolState, pool2: &PoolState) -> (f64, f64) {
    let f = pool1.fee;
    let g = f.gamma();
    let (x1, y1, x2, y2) = (pool1.x.0, pool1.y.0, pool2.x.0, pool2.y.0);
    let num = BigInt::from(f.num());
    let den = BigInt::from(f.den());
    let gap = &num * &num * BigInt::from(x2) * BigInt::from(y1) - &den * &den * BigInt::from(x1) * BigInt::from(y2);
    if gap <= BigInt::from(0) {
        return (0.0, 0.0);
    }
    let a_minus_b = gap.to_f64().unwrap_or(f64::INFINITY) / (f.den() as f64).powi(2);
    let a = g * g * y1 as f64 * x2 as f64;
    let b = x1 as f64 * y2 as f64;
    let c = g * (g * y1 as f64 + y2 as f64);
    let diff = a_minus_b / (a.sqrt() + b.sqrt());
    (b.sqrt() * diff / c, diff * diff / c)
}

/// The decimal-constant optimum for the 0.3% fee, kept as a cross-check.
pub fn reference_optimal_input(pool1: &PoolState, pool2: &PoolState) -> f64 {
    let (x1, y1, x2, y2) = (pool1.x.0 as f64, pool1.y.0 as f64, pool2.x.0 as f64, pool2.y.0 as f64);
    1.003 * (-1000.0 * x1 * y2 + 997.0 * (x1 * x2 * y1 * y2).sqrt()) / (997.0 * y1 + 1000.0 * y2)
}

/// The decimal-constant revenue expression (constants 1003.009 and 1000) for the 0.3% fee.
pub fn reference_revenue(pool1: &PoolState, pool2: &PoolState) -> f64 {
    let (x1, y1, x2, y2) = (pool1.x.0 as f64, pool1.y.0 as f64, pool2.x.0 as f64, pool2.y.0 as f64);
    let (c1, c2) = (1003.009, 1000.0);
    let d = (c1 * x1 * y2 - c2 * (x1 * x2 * y1 * y2).sqrt()) / (997.0 * y1 + 1000.0 * y2);
    -(x2 * y2) / (-(0.997 * x1 * y1) / (x1 - 0.997 * d) + 0.997 * y1 + y2) + x2 + d
}

/// Integer profit of the round trip for input `delta`; negative when it loses.
pub fn profit_at(pool1: &PoolState, pool2: &PoolState, delta: u128) -> Result<i128, ArbError> {
    let mid = quote_raw(pool1, Direction::XToY, delta)?;
    let back = quote_raw(pool2, Direction::YToX, mid)?;
    Ok(back as i128 - delta as i128)
}

const REFINE_WINDOW: u128 = 1024;

/// Profit-maximizing integer input for the round trip `pool1 -> pool2`.
pub fn optimal_input(pool1: &PoolState, pool2: &PoolState) -> Result<AssetAmount, ArbError> {
    check_pair(pool1, pool2)?;
    if !is_profitable(pool1, pool2) {
        return Err(ArbError::NotProfitable(pool1.market_id.clone(), pool2.market_id.clone()));
    }
    let (d, _) = analytic_optimum(pool1, pool2);
    Ok(AssetAmount(refine(pool1, pool2, d)))
}

/// Integer search around the real optimum. Integer profit is a noisy
/// plateau near the top, so besides a +-1 climb on the input we scan final
/// outputs `n` near the analytic one, each paired with the least input that
/// reaches it.
fn refine(pool1: &PoolState, pool2: &PoolState, real: f64) -> u128 {
    let start = (real.round().max(1.0)) as u128;
    let eval = |d: u128| profit_at(pool1, pool2, d).ok();
    let mut best = (start, eval(start).unwrap_or(i128::MIN));
    // ties go to the input nearest the real optimum, i.e. the middle of the plateau
    let dist = |d: u128| (d as f64 - real).abs();
    let better = |cand: (u128, i128), best: (u128, i128)| {
        cand.1 > best.1 || (cand.1 == best.1 && dist(cand.0) < dist(best.0))
    };

    if let Ok(mid) = quote_raw(pool1, Direction::XToY, start) {
        if let Ok(n0) = quote_raw(pool2, Direction::YToX, mid) {
            let lo = n0.saturating_sub(REFINE_WINDOW).max(1);
            for n in lo..=n0.saturating_add(REFINE_WINDOW) {
                let Ok(m) = amount_in_for(pool2, Direction::YToX, AssetAmount(n)) else { break };
                let Ok(d) = amount_in_for(pool1, Direction::XToY, m) else { break };
                if d.0 == 0 {
                    continue;
                }
                if let Some(p) = eval(d.0) {
                    if better((d.0, p), best) {
                        best = (d.0, p);
                    }
                }
            }
        }
    }

    loop {
        let mut moved = false;
        for cand in [best.0.saturating_sub(1), best.0 + 1] {
            if cand == 0 {
                continue;
            }
            if let Some(p) = eval(cand) {
                if better((cand, p), best) {
                    best = (cand, p);
                    moved = true;
                }
            }
        }
        if !moved {
            return best.0;
        }
    }
}

/// Runs both legs for input `delta`: X->Y on `pool1`, the proceeds Y->X on `pool2`.
pub fn execute_two_point(
    pool1: &PoolState,
    pool2: &PoolState,
    delta: AssetAmount,
) -> Result<(PoolState, PoolState, i128), ArbError> {
    if delta.is_zero() {
        return Err(ArbError::ZeroInput);
    }
    if pool1.market_id == pool2.market_id {
        return Err(ArbError::DuplicateMarket(pool1.market_id.clone()));
    }
    let (p1, mid) = apply_swap(pool1, &SwapAction::new(pool1.market_id.clone(), Direction::XToY, delta.0))?;
    let (p2, back) = apply_swap(pool2, &SwapAction::new(pool2.market_id.clone(), Direction::YToX, mid.0))?;
    Ok((p1, p2, back.0 as i128 - delta.0 as i128))
}

/// Optimal two-point plan; the second leg's guard asserts the profit.
pub fn two_point_plan(pool1: &PoolState, pool2: &PoolState) -> Result<ArbPlan, ArbError> {
    let delta = optimal_input(pool1, pool2)?;
    let mid = quote_raw(pool1, Direction::XToY, delta.0)?;
    let profit = profit_at(pool1, pool2, delta.0)?;
    if profit <= 0 {
        return Err(ArbError::NotProfitable(pool1.market_id.clone(), pool2.market_id.clone()));
    }
    Ok(ArbPlan {
        legs: vec![
            SwapAction::new(pool1.market_id.clone(), Direction::XToY, delta.0).with_min_out(mid),
            SwapAction::new(pool2.market_id.clone(), Direction::YToX, mid).with_min_out(delta.0 + 1),
        ],
        expected_profit: AssetAmount(profit as u128),
        profit_asset: Asset::X,
    })
}

/// Composite cost of an N-pool arbitrage relative to one plain swap, in percent.
pub fn count_cost(n_pools: usize) -> Result<f64, ArbError> {
    match n_pools {
        0 | 1 => Err(ArbError::TooFewPools(2)),
        2 => Ok(160.22),
        3 => Ok(270.44),
        n => Ok(217.80 + 42.42 * (n - 1) as f64 + 17.80 * (2 * n - 5) as f64),
    }
}

/// Operation counts predicted by the cost table for `n` involved pools.
pub fn predicted_counts(n: usize) -> CostCounters {
    CostCounters {
        arbitrage_computations: n.saturating_sub(1) as u32,
        sync_computations: (2 * n).saturating_sub(5) as u32,
        swaps: n as u32,
    }
}

/// Greedy multi-pool arbitrage with profit taken in `profit_asset`.
///
/// Pools are sorted by `y/x`; the cheapest and dearest form left/right
/// aggregates. Each round computes the optimal two-aggregate arbitrage; if it
/// would push an aggregate past its neighbour's price, only the volume that
/// reaches the neighbour is executed and the neighbour joins the aggregate.
pub fn n_pool_arbitrage(pools: &[PoolState], profit_asset: Asset) -> Result<NPoolOutcome, ArbError> {
    match profit_asset {
        Asset::X => n_pool_for_x(pools),
        Asset::Y => {
            let mirrored: Vec<PoolState> = pools.iter().map(PoolState::mirrored).collect();
            let mut out = n_pool_for_x(&mirrored)?;
            out.final_pools = out.final_pools.iter().map(PoolState::mirrored).collect();
            for leg in &mut out.plan.legs {
                leg.direction = leg.direction.reverse();
            }
            out.plan.profit_asset = Asset::Y;
            Ok(out)
        }
    }
}

fn validate(pools: &[PoolState]) -> Result<(), ArbError> {
    if pools.len() < 2 {
        return Err(ArbError::TooFewPools(2));
    }
    let mut seen = HashSet::new();
    for p in pools {
        if !seen.insert(p.market_id.as_str()) {
            return Err(ArbError::DuplicateMarket(p.market_id.clone()));
        }
        check_pair(&pools[0], p)?;
    }
    Ok(())
}

/// Working state of the greedy strategy; `pools` is sorted by ascending `y/x`.
struct Sweep {
    pools: Vec<PoolState>,
    gamma: f64,
    legs: Vec<SwapAction>,
    profit: i128,
}

impl Sweep {
    fn agg(&self, range: std::ops::Range<usize>) -> Result<PoolState, ArbError> {
        let members: Vec<&PoolState> = self.pools[range].iter().collect();
        Ok(VirtualPool::aggregate(&members)?.as_pool(self.pools[0].fee))
    }

    /// Executes input `delta` of X split over `right` (by x) and the proceeds
    /// split over `left` (by y). Returns the new pool vector, legs and profit.
    fn simulate(
        &self,
        left: std::ops::Range<usize>,
        right: std::ops::Range<usize>,
        delta: u128,
    ) -> Result<(Vec<PoolState>, Vec<SwapAction>, i128), ArbError> {
        let mut pools = self.pools.clone();
        let mut legs = Vec::new();
        let split = |amount: u128, weights: Vec<u128>| -> Vec<u128> {
            let total: f64 = weights.iter().map(|w| *w as f64).sum();
            let alloc: Vec<f64> = weights.iter().map(|w| amount as f64 * *w as f64 / total).collect();
            apportion(&alloc, amount)
        };

        let mut mid = 0u128;
        let shares = split(delta, pools[right.clone()].iter().map(|p| p.x.0).collect());
        for (i, s) in right.zip(shares) {
            if s == 0 {
                continue;
            }
            let out = quote_raw(&pools[i], Direction::XToY, s)?;
            let action = SwapAction::new(pools[i].market_id.clone(), Direction::XToY, s).with_min_out(out);
            pools[i] = apply_swap(&pools[i], &action)?.0;
            legs.push(action);
            mid += out;
        }
        let mut back = 0u128;
        let shares = split(mid, pools[left.clone()].iter().map(|p| p.y.0).collect());
        for (i, s) in left.zip(shares) {
            if s == 0 {
                continue;
            }
            let out = quote_raw(&pools[i], Direction::YToX, s)?;
            let action = SwapAction::new(pools[i].market_id.clone(), Direction::YToX, s).with_min_out(out);
            pools[i] = apply_swap(&pools[i], &action)?.0;
            legs.push(action);
            back += out;
        }
        Ok((pools, legs, back as i128 - delta as i128))
    }

    fn commit(&mut self, step: (Vec<PoolState>, Vec<SwapAction>, i128)) {
        self.pools = step.0;
        self.legs.extend(step.1);
        self.profit += step.2;
    }

    /// X input into the right aggregate that lowers its price to `target`'s.
    fn right_sync(&self, right: &PoolState, target: &PoolState) -> f64 {
        threshold_to_price(right.x.0 as f64, right.y.0 as f64, self.gamma, target.y.0 as f64 / target.x.0 as f64)
    }

    /// X input into the right aggregate whose proceeds lift the left aggregate's price to `target`'s.
    fn left_sync(&self, right: &PoolState, left: &PoolState, target: &PoolState) -> f64 {
        let y_need =
            threshold_to_price(left.y.0 as f64, left.x.0 as f64, self.gamma, target.x.0 as f64 / target.y.0 as f64);
        let (xr, yr) = (right.x.0 as f64, right.y.0 as f64);
        if y_need >= yr {
            return f64::INFINITY;
        }
        y_need * xr / (self.gamma * (yr - y_need))
    }

    /// Post-trade prices `(left, right)` of the real-valued arbitrage with input `delta`.
    fn post_prices(&self, right: &PoolState, left: &PoolState, delta: f64) -> (f64, f64) {
        let g = self.gamma;
        let (xr, yr, xl, yl) = (right.x.0 as f64, right.y.0 as f64, left.x.0 as f64, left.y.0 as f64);
        let o1 = g * delta * yr / (xr + g * delta);
        let o2 = g * o1 * xl / (yl + g * o1);
        ((yl + o1) / (xl - o2), (yr - o1) / (xr + delta))
    }
}

fn to_units(v: f64) -> u128 {
    if v.is_finite() && v > 0.0 {
        v.round().max(1.0) as u128
    } else {
        1
    }
}

fn n_pool_for_x(input: &[PoolState]) -> Result<NPoolOutcome, ArbError> {
    validate(input)?;
    let n = input.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        crate::routing::cmp_price(&input[a], &input[b], Direction::XToY)
            .then_with(|| input[a].market_id.cmp(&input[b].market_id))
    });
    let mut sw = Sweep {
        pools: order.iter().map(|&i| input[i].clone()).collect(),
        gamma: input[0].fee.gamma(),
        legs: Vec::new(),
        profit: 0,
    };
    let mut counters = CostCounters::default();
    let (mut l, mut r) = (0usize, n - 1);
    let mut iterations = 0u32;
    let max_iterations = 2 * (n as u32 - 1);

    loop {
        let left = sw.agg(0..l + 1)?;
        let right = sw.agg(r..n)?;
        if !is_profitable(&right, &left) || iterations >= max_iterations {
            break;
        }
        iterations += 1;
        counters.arbitrage_computations += 1;
        let (full, _) = analytic_optimum(&right, &left);

        enum Step {
            Full,
            AbsorbLeft(f64),
            AbsorbRight(f64),
        }
        let middles = r - l - 1;
        let step = if middles >= 2 {
            counters.sync_computations += 2;
            let dl = sw.left_sync(&right, &left, &sw.pools[l + 1]);
            let dr = sw.right_sync(&right, &sw.pools[r - 1]);
            if full <= dl.min(dr) {
                Step::Full
            } else if dl <= dr {
                Step::AbsorbLeft(dl)
            } else {
                Step::AbsorbRight(dr)
            }
        } else if middles == 1 {
            // A lone middle pool can only be overshot from one side; the
            // post-trade prices tell which, so one sync volume suffices.
            let m = &sw.pools[l + 1];
            let pm = m.y.0 as f64 / m.x.0 as f64;
            let (pl, pr) = sw.post_prices(&right, &left, full);
            if pr < pm {
                counters.sync_computations += 1;
                Step::AbsorbRight(sw.right_sync(&right, m))
            } else if pl > pm {
                counters.sync_computations += 1;
                Step::AbsorbLeft(sw.left_sync(&right, &left, m))
            } else {
                Step::Full
            }
        } else {
            Step::Full
        };

        match step {
            Step::AbsorbLeft(d) => {
                let s = sw.simulate(0..l + 1, r..n, to_units(d))?;
                sw.commit(s);
                l += 1;
            }
            Step::AbsorbRight(d) => {
                let s = sw.simulate(0..l + 1, r..n, to_units(d))?;
                sw.commit(s);
                r -= 1;
            }
            Step::Full => {
                let s = finish(&sw, l, r, full)?;
                sw.commit(s);
                break;
            }
        }
    }

    let touched: BTreeSet<&str> = sw.legs.iter().map(|a| a.market_id.as_str()).collect();
    counters.swaps = touched.len() as u32;
    let involved: Vec<String> = touched.iter().map(|s| s.to_string()).collect();
    let mut final_pools = input.to_vec();
    for (k, &i) in order.iter().enumerate() {
        final_pools[i] = sw.pools[k].clone();
    }
    Ok(NPoolOutcome {
        plan: ArbPlan {
            legs: sw.legs,
            expected_profit: AssetAmount(sw.profit.max(0) as u128),
            profit_asset: Asset::X,
        },
        final_pools,
        counters,
        iterations,
        involved,
    })
}

/// Final two-aggregate trade. Rounding can leave a member pair a hair inside
/// the profitable region, so the input is nudged upward until no pair is.
fn finish(sw: &Sweep, l: usize, r: usize, full: f64) -> Result<(Vec<PoolState>, Vec<SwapAction>, i128), ArbError> {
    let n = sw.pools.len();
    let mut delta = to_units(full);
    let mut step = 1u128;
    let mut last = None;
    for _ in 0..64 {
        let s = sw.simulate(0..l + 1, r..n, delta)?;
        if find_profitable_pair(&s.0).is_none() {
            return Ok(s);
        }
        last = Some(s);
        delta = delta.saturating_add(step);
        step = step.saturating_mul(2);
    }
    Ok(last.expect("loop ran at least once"))
}
