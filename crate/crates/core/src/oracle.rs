//! Brute-force reference solvers. Nothing here shares code with the closed
//! forms in `routing`/`arbitrage` beyond the integer swap rule itself.

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amm::{quote_raw, AssetAmount, Direction, FeeRate, PoolState, SwapAction};
use crate::error::{AmmError, OracleError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    RouteOutput,
    ArbProfit,
    PriceGap,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchSpec {
    pub lo: AssetAmount,
    pub hi: AssetAmount,
    pub step: AssetAmount,
    pub refine_passes: u32,
    pub objective: Objective,
}

impl SearchSpec {
    pub fn new(objective: Objective, lo: u128, hi: u128, step: u128) -> Self {
        SearchSpec {
            lo: AssetAmount(lo),
            hi: AssetAmount(hi),
            step: AssetAmount(step),
            refine_passes: 16,
            objective,
        }
    }

    fn check(&self) -> Result<(), OracleError> {
        if self.lo.0 >= self.hi.0 {
            return Err(OracleError::InvalidRange { lo: self.lo.0, hi: self.hi.0 });
        }
        if self.step.0 == 0 {
            return Err(OracleError::ZeroStep);
        }
        if self.step.0 > self.hi.0 - self.lo.0 {
            return Err(OracleError::TooCoarse {
                step: self.step.0,
                span: self.hi.0 - self.lo.0,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BruteRoute {
    pub split: Vec<AssetAmount>,
    pub output: AssetAmount,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BruteArb {
    pub delta: AssetAmount,
    pub profit: i128,
    /// First and last maximizing inputs seen in the final unit-step scan.
    pub argmax_lo: AssetAmount,
    pub argmax_hi: AssetAmount,
    pub unimodal: bool,
}

fn out_or_zero(pool: &PoolState, dir: Direction, amount: u128) -> u128 {
    if amount == 0 {
        0
    } else {
        quote_raw(pool, dir, amount).unwrap_or(0)
    }
}

fn total_out(pools: &[PoolState], dir: Direction, split: &[u128]) -> u128 {
    pools.iter().zip(split).map(|(p, &a)| out_or_zero(p, dir, a)).sum()
}

/// Exhaustive split search: a coarse simplex grid at `spec.step`, then
/// pairwise unit transfers with shrinking step down to 1.
pub fn brute_route(
    pools: &[PoolState],
    direction: Direction,
    total_in: AssetAmount,
    spec: &SearchSpec,
) -> Result<BruteRoute, OracleError> {
    if pools.len() > 3 {
        return Err(OracleError::TooManyPools(pools.len()));
    }
    if pools.is_empty() || total_in.is_zero() {
        return Err(OracleError::InvalidRange { lo: 0, hi: total_in.0 });
    }
    for p in pools {
        if !p.is_active() {
            return Err(AmmError::InvalidPool(p.market_id.clone()).into());
        }
    }
    let spec = SearchSpec {
        lo: AssetAmount(0),
        hi: total_in,
        ..*spec
    };
    let total = total_in.0;
    if pools.len() == 1 {
        return Ok(BruteRoute {
            split: vec![total_in],
            output: AssetAmount(out_or_zero(&pools[0], direction, total)),
        });
    }
    spec.check()?;
    let step = spec.step.0;

    let mut grid: Vec<u128> = (0..=total / step).map(|k| k * step).collect();
    if *grid.last().unwrap() != total {
        grid.push(total);
    }
    let candidates: Vec<Vec<u128>> = match pools.len() {
        2 => grid.iter().map(|&a| vec![a, total - a]).collect(),
        _ => grid
            .iter()
            .flat_map(|&a| {
                grid.iter()
                    .take_while(move |&&b| a + b <= total)
                    .map(move |&b| vec![a, b, total - a - b])
            })
            .collect(),
    };
    let mut best = candidates
        .par_iter()
        .map(|s| (total_out(pools, direction, s), s.clone()))
        .reduce(
            || (0, vec![0; pools.len()]),
            |a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a },
        );

    // descent: move `s` units between any two legs while it helps, halving s
    let mut s = step;
    let mut passes = 0;
    while s >= 1 {
        let mut improved = true;
        while improved {
            improved = false;
            for i in 0..pools.len() {
                for j in 0..pools.len() {
                    if i == j || best.1[i] < s {
                        continue;
                    }
                    let mut cand = best.1.clone();
                    cand[i] -= s;
                    cand[j] += s;
                    let out = total_out(pools, direction, &cand);
                    if out > best.0 {
                        best = (out, cand);
                        improved = true;
                    }
                }
            }
        }
        passes += 1;
        if s == 1 || passes > spec.refine_passes.max(64) {
            break;
        }
        s /= 2;
    }
    Ok(BruteRoute {
        split: best.1.into_iter().map(AssetAmount).collect(),
        output: AssetAmount(best.0),
    })
}

fn arb_profit(pool1: &PoolState, pool2: &PoolState, delta: u128) -> i128 {
    let mid = out_or_zero(pool1, Direction::XToY, delta);
    out_or_zero(pool2, Direction::YToX, mid) as i128 - delta as i128
}

/// Exhaustive search for the round-trip input maximizing integer profit.
///
/// Coarse grid over `[lo, hi]`, then repeated zooms of the window around the
/// best point, finishing with a unit-step scan. Also samples the objective at
/// 1000 evenly spaced points and reports whether it has a single peak
/// (ignoring flooring noise of a few units).
pub fn brute_arb(pool1: &PoolState, pool2: &PoolState, spec: &SearchSpec) -> Result<BruteArb, OracleError> {
    spec.check()?;
    for p in [pool1, pool2] {
        if !p.is_active() {
            return Err(AmmError::InvalidPool(p.market_id.clone()).into());
        }
    }
    let (lo, hi) = (spec.lo.0.max(1), spec.hi.0);
    let eval = |d: u128| arb_profit(pool1, pool2, d);

    let mut step = spec.step.0;
    let mut window = (lo, hi);
    let mut best = (lo, eval(lo));
    loop {
        let points: Vec<u128> = {
            let mut v: Vec<u128> = (0..=(window.1 - window.0) / step).map(|k| window.0 + k * step).collect();
            v.push(window.1);
            v
        };
        let local = points
            .par_iter()
            .map(|&d| (d, eval(d)))
            .reduce(|| (lo, i128::MIN), |a, b| if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) { b } else { a });
        if local.1 > best.1 || (local.1 == best.1 && local.0 < best.0) {
            best = local;
        }
        if step == 1 {
            break;
        }
        // plateaus make the grid pick arbitrary; keep a generous margin
        let margin = step.saturating_mul(4);
        window = (best.0.saturating_sub(margin).max(lo), best.0.saturating_add(margin).min(hi));
        step = (step / 16).max(1);
        if step == 1 {
            // final unit scan covers a wide window around the incumbent
            let w = 4096u128.max(margin);
            window = (best.0.saturating_sub(w).max(lo), best.0.saturating_add(w).min(hi));
        }
    }
    let mut argmax_lo = best.0;
    let mut argmax_hi = best.0;
    let (wlo, whi) = window;
    for d in wlo..=whi {
        if eval(d) == best.1 {
            argmax_lo = argmax_lo.min(d);
            argmax_hi = argmax_hi.max(d);
        }
    }

    let samples: Vec<i128> = (0..1000u128).map(|k| eval(lo + (hi - lo) * k / 999)).collect();
    Ok(BruteArb {
        delta: AssetAmount(best.0),
        profit: best.1,
        argmax_lo: AssetAmount(argmax_lo),
        argmax_hi: AssetAmount(argmax_hi),
        unimodal: count_peaks(&samples, 2) <= 1,
    })
}

/// Counts rises followed by falls, treating changes of at most `tol` as flat.
pub fn count_peaks(values: &[i128], tol: i128) -> usize {
    let mut peaks = 0;
    let mut rising = false;
    let mut anchor = values.first().copied().unwrap_or(0);
    for &v in &values[1.min(values.len())..] {
        if v > anchor + tol {
            rising = true;
            anchor = v;
        } else if v < anchor - tol {
            if rising {
                peaks += 1;
            }
            rising = false;
            anchor = v;
        } else if (rising && v > anchor) || (!rising && v < anchor) {
            anchor = v;
        }
    }
    if rising {
        peaks += 1;
    }
    peaks
}

/// Exact output of a swap before flooring: `in * num * r_out / (r_in * den + in * num)`.
pub fn rational_swap(pool: &PoolState, action: &SwapAction) -> Result<BigRational, OracleError> {
    if !pool.is_active() {
        return Err(AmmError::InvalidPool(pool.market_id.clone()).into());
    }
    let (r_in, r_out) = pool.reserves(action.direction);
    rational_out(r_in, r_out, pool.fee, BigRational::from_integer(BigInt::from(action.amount_in.0)))
}

/// The exact rule over rational reserves and input.
pub fn rational_out(r_in: u128, r_out: u128, fee: FeeRate, amount_in: BigRational) -> Result<BigRational, OracleError> {
    rational_out_q(
        &BigRational::from_integer(BigInt::from(r_in)),
        &BigRational::from_integer(BigInt::from(r_out)),
        fee,
        &amount_in,
    )
}

pub fn rational_out_q(
    r_in: &BigRational,
    r_out: &BigRational,
    fee: FeeRate,
    amount_in: &BigRational,
) -> Result<BigRational, OracleError> {
    let num = BigRational::from_integer(BigInt::from(fee.num()));
    let den = BigRational::from_integer(BigInt::from(fee.den()));
    let eff = amount_in * &num;
    Ok(&eff * r_out / (r_in * &den + &eff))
}

// ---- seeded instance generators shared by tests, fixtures and the CLI ----

/// Log-uniform integer in `[lo, hi]`.
pub fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> u128 {
    let e = rng.random_range(lo.ln()..hi.ln());
    e.exp().round() as u128
}

/// A pair with `is_profitable(pool1, pool2)`, all four reserves log-uniform in [1e4, 1e12].
pub fn random_profitable_pair(rng: &mut ChaCha8Rng) -> (PoolState, PoolState) {
    loop {
        let a = PoolState::new("p1", log_uniform(rng, 1e4, 1e12), log_uniform(rng, 1e4, 1e12));
        let b = PoolState::new("p2", log_uniform(rng, 1e4, 1e12), log_uniform(rng, 1e4, 1e12));
        if crate::arbitrage::is_profitable(&a, &b) {
            return (a, b);
        }
    }
}

/// `n` pools for routing: the first has log-uniform reserves in [1e6, 1e12],
/// the others are priced below it by a factor in [1.01, 3] with independent
/// depth. Returns the pools and a total input spanning both sides of the
/// leveling volume.
pub fn random_route_instance(rng: &mut ChaCha8Rng, n: usize) -> (Vec<PoolState>, AssetAmount) {
    let x1 = log_uniform(rng, 1e6, 1e12);
    let y1 = log_uniform(rng, 1e6, 1e12);
    let price = y1 as f64 / x1 as f64;
    let mut pools = vec![PoolState::new("p1", x1, y1)];
    for k in 2..=n {
        let x = log_uniform(rng, 1e6, 1e12);
        let factor = rng.random_range(1.01..3.0);
        let y = ((x as f64 * price / factor).round() as u128).max(1);
        pools.push(PoolState::new(format!("p{k}"), x, y));
    }
    let depth: u128 = pools.iter().map(|p| p.x.0).sum();
    let frac = 10f64.powf(rng.random_range(-3.0..0.0));
    let total = ((depth as f64 * frac).round() as u128).max(1);
    (pools, AssetAmount(total))
}

/// An N-pool universe with prices spread over a factor of up to 4.
pub fn random_universe(rng: &mut ChaCha8Rng, n: usize) -> Vec<PoolState> {
    (0..n)
        .map(|k| {
            let x = log_uniform(rng, 1e6, 1e12);
            let price = 10f64.powf(rng.random_range(-0.3..0.3));
            let y = ((x as f64 * price).round() as u128).max(1);
            PoolState::new(format!("m{k}"), x, y)
        })
        .collect()
}

// ---- committed fixtures ----

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArbFixture {
    pub inputs: (PoolState, PoolState),
    pub oracle_output: BruteArb,
    pub seed: u64,
    pub spec: SearchSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RouteFixture {
    pub inputs: (Vec<PoolState>, Direction, AssetAmount),
    pub oracle_output: BruteRoute,
    pub seed: u64,
    pub spec: SearchSpec,
}

/// Grid step so that the coarse pass has about `cells` points.
pub fn step_for(span: u128, cells: u128) -> u128 {
    (span / cells).max(1)
}

pub fn arb_search_spec(pool1: &PoolState, pool2: &PoolState) -> SearchSpec {
    // the optimum never exceeds the input that would drain pool2's X through the round trip
    let hi = pool1.x.0.max(pool2.x.0).saturating_mul(4).max(16);
    SearchSpec::new(Objective::ArbProfit, 1, hi, step_for(hi, 10_000))
}

pub fn arb_fixtures(seed: u64, count: usize) -> Vec<ArbFixture> {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<_> = (0..count).map(|_| random_profitable_pair(&mut rng)).collect();
    pairs
        .into_par_iter()
        .map(|(a, b)| {
            let spec = arb_search_spec(&a, &b);
            let oracle_output = brute_arb(&a, &b, &spec).expect("valid spec");
            ArbFixture {
                inputs: (a, b),
                oracle_output,
                seed,
                spec,
            }
        })
        .collect()
}

pub fn route_fixtures(seed: u64, count: usize, n: usize) -> Vec<RouteFixture> {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cases: Vec<_> = (0..count).map(|_| random_route_instance(&mut rng, n)).collect();
    cases
        .into_par_iter()
        .map(|(pools, total)| {
            let cells = if pools.len() == 2 { 10_000 } else { 300 };
            let spec = SearchSpec::new(Objective::RouteOutput, 0, total.0, step_for(total.0, cells));
            let oracle_output = brute_route(&pools, Direction::XToY, total, &spec).expect("valid spec");
            RouteFixture {
                inputs: (pools, Direction::XToY, total),
                oracle_output,
                seed,
                spec,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::ToPrimitive;
    use rand::SeedableRng;

    fn p(id: &str, x: u128, y: u128) -> PoolState {
        PoolState::new(id, x, y)
    }

    #[test]
    fn rational_swap_example() {
        let r = rational_swap(&p("a", 1_000_000, 1_000_000), &SwapAction::new("a", Direction::XToY, 100_000)).unwrap();
        let expect = BigRational::new(BigInt::from(99_700u128 * 1_000_000_000), BigInt::from(1_099_700_000u128));
        assert_eq!(r, expect);
        assert_eq!(r.floor().to_integer(), BigInt::from(90_661));
    }

    #[test]
    fn floor_of_rational_is_the_integer_quote() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..2_000 {
            let pool = p("a", log_uniform(&mut rng, 1e3, 1e18), log_uniform(&mut rng, 1e3, 1e18));
            let amount = log_uniform(&mut rng, 1.0, 1e18);
            let r = rational_swap(&pool, &SwapAction::new("a", Direction::XToY, amount)).unwrap();
            let q = quote_raw(&pool, Direction::XToY, amount).unwrap();
            assert_eq!(r.floor().to_integer(), BigInt::from(q));
        }
    }

    #[test]
    fn rational_path_independence_without_fee() {
        let fee = FeeRate::ZERO;
        let (x, y) = (BigRational::from_integer(BigInt::from(1_000u32)), BigRational::from_integer(BigInt::from(5_000u32)));
        let a = BigRational::new(BigInt::from(37), BigInt::from(3));
        let b = BigRational::new(BigInt::from(55), BigInt::from(7));
        let whole = rational_out_q(&x, &y, fee, &(&a + &b)).unwrap();
        let first = rational_out_q(&x, &y, fee, &a).unwrap();
        let second = rational_out_q(&(&x + &a), &(&y - &first), fee, &b).unwrap();
        assert_eq!(whole, first + second);
    }

    #[test]
    fn brute_route_trivial_cases() {
        let spec = SearchSpec::new(Objective::RouteOutput, 0, 1, 10);
        let r = brute_route(&[p("a", 1_000_000, 1_000_000)], Direction::XToY, AssetAmount(1_000), &spec).unwrap();
        assert_eq!(r.split, vec![AssetAmount(1_000)]);
        let spec = SearchSpec::new(Objective::RouteOutput, 0, 10_000, 100);
        let r = brute_route(
            &[p("a", 1_000_000, 1_000_000), p("b", 1_000_000, 1_000_000)],
            Direction::XToY,
            AssetAmount(10_000),
            &spec,
        )
        .unwrap();
        // flooring makes the optimum a plateau; the even split must be on it
        let even = total_out(&[p("a", 1_000_000, 1_000_000), p("b", 1_000_000, 1_000_000)], Direction::XToY, &[5_000, 5_000]);
        assert_eq!(r.output.0, even);
        let four = vec![p("a", 1, 1); 4];
        assert_eq!(brute_route(&four, Direction::XToY, AssetAmount(10), &spec), Err(OracleError::TooManyPools(4)));
        let coarse = SearchSpec::new(Objective::RouteOutput, 0, 10, 1_000);
        assert!(matches!(
            brute_route(&[p("a", 10, 10), p("b", 10, 10)], Direction::XToY, AssetAmount(10), &coarse),
            Err(OracleError::TooCoarse { .. })
        ));
    }

    #[test]
    fn brute_arb_example_and_converse() {
        let a = p("a", 1_000_000, 2_000_000);
        let b = p("b", 1_000_000, 1_000_000);
        let r = brute_arb(&a, &b, &arb_search_spec(&a, &b)).unwrap();
        assert_eq!(r.profit, 56_306);
        assert!(r.argmax_lo.0 <= 137_342 && 137_342 <= r.argmax_hi.0);
        assert!(r.unimodal);

        let r = brute_arb(&b, &a, &arb_search_spec(&b, &a)).unwrap();
        assert!(r.profit <= 0);
    }

    #[test]
    fn peak_counting() {
        assert_eq!(count_peaks(&[0, 5, 10, 7, 3], 0), 1);
        assert_eq!(count_peaks(&[0, 10, 0, 10, 0], 0), 2);
        assert_eq!(count_peaks(&[0, 10, 9, 10, 0], 2), 1);
        assert_eq!(count_peaks(&[5, 4, 3], 0), 0);
    }

    #[test]
    fn generators_are_deterministic() {
        let mut r1 = ChaCha8Rng::seed_from_u64(3);
        let mut r2 = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(random_profitable_pair(&mut r1), random_profitable_pair(&mut r2));
        let (pools, total) = random_route_instance(&mut r1, 3);
        assert_eq!(pools.len(), 3);
        assert!(total.0 > 0);
        assert!(pools[1].y.0.to_f64().unwrap() / pools[1].x.0 as f64 <= pools[0].y.0 as f64 / pools[0].x.0 as f64);
    }
}
