//! Optimal split of one swap across several pools of the same pair.
//!
//! Volume is routed greedily: the best-priced pool receives input until its
//! price meets the next pool, the two are then treated as one virtual pool
//! (splitting proportionally to reserves keeps them level), and so on down
//! the price ladder.

use std::cmp::Ordering;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::amm::{quote_raw, AssetAmount, Direction, FeeRate, PoolState};
use crate::error::RoutingError;
use crate::wide;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteLeg {
    pub market_id: String,
    pub amount_in: AssetAmount,
    pub expected_out: AssetAmount,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutePlan {
    pub direction: Direction,
    /// One leg per input pool, in input order. Legs may carry zero input.
    pub legs: Vec<RouteLeg>,
    pub total_in: AssetAmount,
    pub expected_total_out: AssetAmount,
}

impl RoutePlan {
    pub fn active_legs(&self) -> impl Iterator<Item = &RouteLeg> {
        self.legs.iter().filter(|l| !l.amount_in.is_zero())
    }
}

/// Orders two pools by the rate they offer in `direction` (higher is better).
pub fn cmp_price(a: &PoolState, b: &PoolState, direction: Direction) -> Ordering {
    let (a_in, a_out) = a.reserves(direction);
    let (b_in, b_out) = b.reserves(direction);
    wide::product(a_out, b_in).cmp(&wide::product(b_out, a_in))
}

/// True when the worse of the two prices is strictly inside the `gamma^2` band of the better one.
pub fn within_fee_band(a: &PoolState, b: &PoolState) -> bool {
    let (hi, lo) = match cmp_price(a, b, Direction::XToY) {
        Ordering::Less => (b, a),
        _ => (a, b),
    };
    let fee = hi.fee;
    // lo.y/lo.x > (num/den)^2 * hi.y/hi.x
    wide::cmp_products(&[lo.y.0, hi.x.0, fee.den(), fee.den()], &[fee.num(), fee.num(), hi.y.0, lo.x.0])
        == Ordering::Greater
}

pub(crate) fn ensure_same_fee(pools: &[PoolState]) -> Result<FeeRate, RoutingError> {
    let first = pools.first().ok_or(RoutingError::NoPools)?;
    for p in &pools[1..] {
        if p.fee != first.fee {
            return Err(RoutingError::MixedFees(first.market_id.clone(), p.market_id.clone()));
        }
    }
    Ok(first.fee)
}

/// Input that moves a pool with reserves `(r_in, r_out)` to the price `target`
/// (output per input), i.e. the positive root of
/// `g*P*d^2 + (1+g)*r_in*P*d + r_in^2*P - r_in*r_out = 0`.
///
/// Written in a cancellation-free form; zero when the pool is already at or below `target`.
pub(crate) fn threshold_to_price(r_in: f64, r_out: f64, gamma: f64, target: f64) -> f64 {
    let gap = r_out - target * r_in;
    if gap <= 0.0 {
        return 0.0;
    }
    let a = r_in * target;
    let disc = (1.0 - gamma).powi(2) * a * a + 4.0 * gamma * a * r_out;
    2.0 * r_in * gap / (disc.sqrt() + (1.0 + gamma) * a)
}

/// Volume to swap into `rich` so that its reserve ratio matches `poor`.
///
/// Returns zero if the prices are already equal. Both pools must charge the same fee.
pub fn sync_threshold(rich: &PoolState, poor: &PoolState, direction: Direction) -> Result<AssetAmount, RoutingError> {
    ensure_same_fee(&[rich.clone(), poor.clone()])?;
    if !rich.is_active() {
        return Err(crate::error::AmmError::InvalidPool(rich.market_id.clone()).into());
    }
    if !poor.is_active() {
        return Err(crate::error::AmmError::InvalidPool(poor.market_id.clone()).into());
    }
    match cmp_price(rich, poor, direction) {
        Ordering::Equal => return Ok(AssetAmount::ZERO),
        Ordering::Less => {
            return Err(RoutingError::NotRicher {
                rich: rich.market_id.clone(),
                poor: poor.market_id.clone(),
            })
        }
        Ordering::Greater => {}
    }
    let (x1, y1) = rich.reserves(direction);
    let (x2, y2) = poor.reserves(direction);
    let gamma = rich.fee.gamma();
    // 2*x1*(x2*y1 - x1*y2) / (sqrt((1-g)^2 (x1 y2)^2 + 4 g x1 y2 x2 y1) + (1+g) x1 y2)
    let gap = wide::product(x2, y1) - wide::product(x1, y2);
    let a = x1 as f64 * y2 as f64;
    let b = x2 as f64 * y1 as f64;
    let disc = (1.0 - gamma).powi(2) * a * a + 4.0 * gamma * a * b;
    if !(disc >= 0.0) {
        return Err(RoutingError::Discriminant);
    }
    let delta = 2.0 * x1 as f64 * gap.as_f64() / (disc.sqrt() + (1.0 + gamma) * a);
    Ok(AssetAmount(delta.round() as u128))
}

/// Share of further volume that pool 1 takes when both pools are level: `q / (1 + q)` with `q = x1 / x2`.
pub fn split_ratio(pool1: &PoolState, pool2: &PoolState) -> Result<Ratio<u128>, RoutingError> {
    ensure_same_fee(&[pool1.clone(), pool2.clone()])?;
    if !pool1.is_active() || !pool2.is_active() {
        return Err(RoutingError::NotSynchronized);
    }
    if !within_fee_band(pool1, pool2) {
        return Err(RoutingError::NotSynchronized);
    }
    let total = pool1.x.0.checked_add(pool2.x.0).ok_or(crate::error::AmmError::Overflow)?;
    Ok(Ratio::new(pool1.x.0, total))
}

/// Real-valued allocation produced by the greedy waterfall.
#[derive(Clone, Debug)]
pub(crate) struct Waterfall {
    /// Allocation per pool, indexed like the input slice.
    pub alloc: Vec<f64>,
    /// Volume needed before every pool shares one price.
    pub leveling_volume: f64,
}

/// Runs the waterfall over `pools` for `total` input (pass `f64::INFINITY` to
/// only measure the leveling volume).
pub(crate) fn waterfall(pools: &[PoolState], direction: Direction, gamma: f64, total: f64) -> Waterfall {
    let order = price_order(pools, direction);
    let mut r_in: Vec<f64> = pools.iter().map(|p| p.reserves(direction).0 as f64).collect();
    let mut r_out: Vec<f64> = pools.iter().map(|p| p.reserves(direction).1 as f64).collect();
    let mut alloc = vec![0.0; pools.len()];
    let mut remaining = total;
    let mut leveling = 0.0;
    let mut active: Vec<usize> = vec![order[0]];
    let mut next = 1;

    loop {
        let stage = if next < order.len() {
            let n = order[next];
            let vin: f64 = active.iter().map(|&i| r_in[i]).sum();
            let vout: f64 = active.iter().map(|&i| r_out[i]).sum();
            let need = threshold_to_price(vin, vout, gamma, r_out[n] / r_in[n]);
            leveling += need;
            need.min(remaining)
        } else {
            remaining
        };

        if stage > 0.0 && stage.is_finite() {
            let vin: f64 = active.iter().map(|&i| r_in[i]).sum();
            for &i in &active {
                let share = stage * r_in[i] / vin;
                alloc[i] += share;
                let k = r_in[i] * r_out[i];
                r_in[i] += share;
                r_out[i] = k / (r_in[i] - share + gamma * share);
            }
            remaining -= stage;
        }

        if next >= order.len() || remaining <= 0.0 {
            if next < order.len() && total.is_infinite() {
                active.push(order[next]);
                next += 1;
                continue;
            }
            break;
        }
        active.push(order[next]);
        next += 1;
    }

    Waterfall {
        alloc,
        leveling_volume: leveling,
    }
}

/// Pool indices sorted best price first; ties by market id.
pub(crate) fn price_order(pools: &[PoolState], direction: Direction) -> Vec<usize> {
    let mut order: Vec<usize> = (0..pools.len()).collect();
    order.sort_by(|&a, &b| {
        cmp_price(&pools[b], &pools[a], direction).then_with(|| pools[a].market_id.cmp(&pools[b].market_id))
    });
    order
}

/// Largest-remainder apportionment of `total` units following real weights `alloc`.
pub(crate) fn apportion(alloc: &[f64], total: u128) -> Vec<u128> {
    let mut units: Vec<u128> = alloc.iter().map(|a| if *a > 0.0 { a.floor() as u128 } else { 0 }).collect();
    let assigned: u128 = units.iter().sum();
    let mut rema: Vec<(usize, f64)> = alloc
        .iter()
        .enumerate()
        .map(|(i, a)| (i, if *a > 0.0 { a - a.floor() } else { f64::NEG_INFINITY }))
        .collect();
    rema.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)));

    if assigned < total {
        let mut left = total - assigned;
        let eligible: Vec<usize> = rema.iter().filter(|r| r.1.is_finite()).map(|r| r.0).collect();
        let eligible = if eligible.is_empty() { vec![0] } else { eligible };
        let mut k = 0;
        while left > 0 {
            units[eligible[k % eligible.len()]] += 1;
            left -= 1;
            k += 1;
        }
    } else if assigned > total {
        let mut excess = assigned - total;
        // float overshoot: trim the smallest remainders first
        for &(i, _) in rema.iter().rev() {
            while excess > 0 && units[i] > 0 {
                units[i] -= 1;
                excess -= 1;
            }
            if excess == 0 {
                break;
            }
        }
    }
    units
}

fn validate(pools: &[PoolState]) -> Result<FeeRate, RoutingError> {
    let fee = ensure_same_fee(pools)?;
    for p in pools {
        if !p.is_active() {
            return Err(crate::error::AmmError::InvalidPool(p.market_id.clone()).into());
        }
    }
    Ok(fee)
}

fn plan_from_units(pools: &[PoolState], direction: Direction, units: &[u128], total: u128) -> Result<RoutePlan, RoutingError> {
    let mut legs = Vec::with_capacity(pools.len());
    let mut out_total: u128 = 0;
    for (p, &u) in pools.iter().zip(units) {
        let out = if u == 0 { 0 } else { quote_raw(p, direction, u)? };
        out_total = out_total.checked_add(out).ok_or(crate::error::AmmError::Overflow)?;
        legs.push(RouteLeg {
            market_id: p.market_id.clone(),
            amount_in: AssetAmount(u),
            expected_out: AssetAmount(out),
        });
    }
    Ok(RoutePlan {
        direction,
        legs,
        total_in: AssetAmount(total),
        expected_total_out: AssetAmount(out_total),
    })
}

/// Splits `total_in` across `pools` to maximize total output.
pub fn route(pools: &[PoolState], direction: Direction, total_in: AssetAmount) -> Result<RoutePlan, RoutingError> {
    if pools.is_empty() {
        return Err(RoutingError::NoPools);
    }
    if total_in.is_zero() {
        return Err(RoutingError::ZeroInput);
    }
    let fee = validate(pools)?;
    let wf = waterfall(pools, direction, fee.gamma(), total_in.0 as f64);
    let units = apportion(&wf.alloc, total_in.0);
    let plan = plan_from_units(pools, direction, &units, total_in.0)?;

    // Integer flooring can cost a unit against the best single pool; never do worse than it.
    let mut best_single: Option<(usize, u128)> = None;
    for (i, p) in pools.iter().enumerate() {
        let q = quote_raw(p, direction, total_in.0)?;
        if best_single.is_none_or(|(_, b)| q > b) {
            best_single = Some((i, q));
        }
    }
    if let Some((i, q)) = best_single {
        if q > plan.expected_total_out.0 {
            let mut single = vec![0u128; pools.len()];
            single[i] = total_in.0;
            return plan_from_units(pools, direction, &single, total_in.0);
        }
    }
    Ok(plan)
}

/// Total input after which every pool in `pools` shares one price.
pub fn leveling_volume(pools: &[PoolState], direction: Direction) -> Result<AssetAmount, RoutingError> {
    let fee = validate(pools)?;
    let wf = waterfall(pools, direction, fee.gamma(), f64::INFINITY);
    Ok(AssetAmount(wf.leveling_volume.ceil() as u128))
}

/// Post-execution states of a plan's legs.
pub fn apply_route(pools: &[PoolState], plan: &RoutePlan) -> Result<Vec<PoolState>, RoutingError> {
    let mut out = pools.to_vec();
    for leg in plan.active_legs() {
        let idx = out
            .iter()
            .position(|p| p.market_id == leg.market_id)
            .ok_or(RoutingError::NoPools)?;
        let action = crate::amm::SwapAction {
            market_id: leg.market_id.clone(),
            direction: plan.direction,
            amount_in: leg.amount_in,
            min_amount_out: AssetAmount::ZERO,
        };
        out[idx] = crate::amm::apply_swap(&out[idx], &action)?.0;
    }
    Ok(out)
}
