//! Synthetic traces with planted arbitrages, block-space overhead and
//! network overhead, plus the ground truth.
//!
//! Each opportunity lives on its own pair of markets and its own run of
//! blocks, so replays of one opportunity can never succeed against another.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::amm::{quote, AssetAmount, Direction, PoolState};
use crate::arbitrage::{is_profitable, optimal_input, profit_at};
use crate::oracle::log_uniform;

use super::chain::{execute_legs, ReplayOutcome};
use super::classify::{Label, WINDOW_BLOCKS};
use super::{BlockRecord, MarketRecord, SightingRecord, SwapEventRecord, TraceRecord, TxRecord};

const BLOCK_MS: u64 = 13_000;
const GENESIS_MS: u64 = 1_600_000_000_000;
const LEAD_IN: u64 = WINDOW_BLOCKS + 1;
/// Blocks reserved per opportunity: the victim's block, the arb's block and
/// the overhead window after it.
const SEGMENT: u64 = WINDOW_BLOCKS + 2;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenConfig {
    pub seed: u64,
    pub opportunities: usize,
    pub blockspace_overhead: usize,
    pub network_overhead: usize,
    pub noise_markets: usize,
    pub noise_per_block: usize,
    /// Plant transactions that look close to overhead but must not be flagged.
    pub decoys: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 7,
            opportunities: 100,
            blockspace_overhead: 300,
            network_overhead: 500,
            noise_markets: 8,
            noise_per_block: 3,
            decoys: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedBlockspace {
    pub tx_id: String,
    pub label: Label,
    pub distance: u64,
    pub target: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedNetwork {
    pub tx_id: String,
    pub target: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerKey {
    pub arbitrages: Vec<String>,
    pub victims: Vec<(String, String)>,
    pub blockspace: Vec<PlantedBlockspace>,
    pub network: Vec<PlantedNetwork>,
    /// Per distance 0..=5: (front, back) counts.
    pub histogram: Vec<(usize, usize)>,
    pub decoys: Vec<String>,
}

struct Planned {
    tx: TxRecord,
    legs: Vec<SwapEventRecord>,
}

fn legs(tx_id: &str, spec: &[(&str, Direction, u128, u128)]) -> Vec<SwapEventRecord> {
    spec.iter()
        .map(|&(m, d, a, min)| SwapEventRecord {
            tx_id: tx_id.to_string(),
            market_id: m.to_string(),
            direction: d,
            amount_in: AssetAmount(a),
            min_amount_out: AssetAmount(min),
            amount_out: None,
        })
        .collect()
}

struct Builder {
    rng: ChaCha8Rng,
    next_id: u64,
}

impl Builder {
    fn tx(&mut self, prefix: &str, gas: u64, sender: String, nonce: u64, spec: &[(&str, Direction, u128, u128)]) -> Planned {
        self.next_id += 1;
        let id = format!("{prefix}{:06}", self.next_id);
        let size = 150 + 120 * spec.len() as u64 + self.rng.random_range(0..40);
        Planned {
            legs: legs(&id, spec),
            tx: TxRecord {
                id,
                block_height: None,
                index: None,
                gas_price: gas,
                sender,
                nonce,
                size_bytes: size,
            },
        }
    }
}

/// Arb legs with first-leg input `delta` on (rich, poor), guarded to revert
/// unless they return more X than they spend.
fn arb_spec<'a>(rich: &'a PoolState, poor: &'a PoolState, delta: u128) -> Vec<(&'a str, Direction, u128, u128)> {
    let mid = quote(rich, Direction::XToY, AssetAmount(delta)).map_or(0, |a| a.0);
    vec![
        (rich.market_id.as_str(), Direction::XToY, delta, 0),
        (poor.market_id.as_str(), Direction::YToX, mid, delta + 1),
    ]
}

pub fn generate(cfg: &GenConfig) -> (Vec<TraceRecord>, AnswerKey) {
    let mut b = Builder {
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        next_id: 0,
    };
    let mut markets: Vec<PoolState> = Vec::new();
    let mut key = AnswerKey {
        histogram: vec![(0, 0); WINDOW_BLOCKS as usize + 1],
        ..AnswerKey::default()
    };

    let n_opp = cfg.opportunities;
    let last_height = LEAD_IN + SEGMENT * n_opp as u64 + 1;
    let mut blocks: Vec<(Vec<Planned>, Vec<Planned>, Vec<Planned>)> =
        (0..=last_height).map(|_| (Vec::new(), Vec::new(), Vec::new())).collect();
    let mut unmined: Vec<Planned> = Vec::new();
    let mut sightings: Vec<SightingRecord> = Vec::new();
    let ts = |h: u64| GENESIS_MS + BLOCK_MS * h;

    for k in 0..cfg.noise_markets {
        let x = log_uniform(&mut b.rng, 1e9, 1e12);
        let y = (x as f64 * 10f64.powf(b.rng.random_range(-1.0..1.0))) as u128;
        markets.push(PoolState::new(format!("noise{k}"), x, y));
    }

    // Spread overhead counts round-robin over opportunities.
    let per = |total: usize, o: usize| total / n_opp.max(1) + usize::from(o < total % n_opp.max(1));

    for o in 0..n_opp {
        let h = LEAD_IN + 1 + SEGMENT * o as u64;
        let front = b.rng.random_bool(0.5);
        let price = 10f64.powf(b.rng.random_range(-1.0..1.0));
        let xa = log_uniform(&mut b.rng, 1e9, 1e12);
        let xb = (xa as f64 * b.rng.random_range(0.5..2.0)) as u128;
        let pa = PoolState::new(format!("opp{o}a"), xa, (xa as f64 * price) as u128);
        let pb = PoolState::new(format!("opp{o}b"), xb, (xb as f64 * price) as u128);
        markets.push(pa.clone());
        markets.push(pb.clone());

        // The victim pushes market a away from b.
        let v_dir = if b.rng.random_bool(0.5) { Direction::XToY } else { Direction::YToX };
        let (r_in, _) = pa.reserves(v_dir);
        let v_amt = (r_in as f64 * b.rng.random_range(0.03..0.12)) as u128;
        let v_gas = b.rng.random_range(20..80);
        let v = b.tx("v", v_gas, format!("user{o}"), 0, &[(pa.market_id.as_str(), v_dir, v_amt, 0)]);
        let (pa_after, _) = crate::amm::apply_swap(&pa, &crate::amm::SwapAction::new(&pa.market_id, v_dir, v_amt))
            .expect("victim swap executes");
        let (rich, poor) = if is_profitable(&pa_after, &pb) { (pa_after.clone(), pb.clone()) } else { (pb.clone(), pa_after.clone()) };
        let delta = optimal_input(&rich, &poor).expect("victim opens an opportunity").0;
        let arb_gas = if front { v_gas + 50 } else { v_gas };
        let bot = format!("bot{}", b.rng.random_range(0..20));
        let arb_nonce = b.rng.random_range(0..1000);
        let arb = b.tx("a", arb_gas, bot.clone(), arb_nonce, &arb_spec(&rich, &poor, delta));
        let arb_id = arb.tx.id.clone();
        let v_id = v.tx.id.clone();
        key.arbitrages.push(arb_id.clone());
        key.victims.push((arb_id.clone(), v_id.clone()));

        // Alternative first-leg inputs that still profit from the pre-arb state.
        let variant = |rng: &mut ChaCha8Rng| -> u128 {
            let d = (delta as f64 * rng.random_range(0.7..1.0)) as u128;
            if d > 0 && profit_at(&rich, &poor, d).is_ok_and(|p| p > 0) { d } else { delta }
        };

        let v_block = if front { h - 1 } else { h };
        let t_v = ts(v_block) - b.rng.random_range(3_000..9_000);
        let t_a = t_v + b.rng.random_range(100..1_000);
        sightings.push(SightingRecord { tx_id: v_id.clone(), first_seen_ms: t_v });
        if b.rng.random_bool(0.9) {
            sightings.push(SightingRecord { tx_id: arb_id.clone(), first_seen_ms: t_a });
        }
        if front {
            blocks[(h - 1) as usize].2.push(v);
            blocks[h as usize].0.push(arb);
        } else {
            blocks[h as usize].2.push(v);
            blocks[h as usize].2.push(arb);
        }

        for _ in 0..per(cfg.blockspace_overhead, o) {
            let d = b.rng.random_range(0..=WINDOW_BLOCKS);
            let gas = if front { b.rng.random_range(10..arb_gas) } else { v_gas };
            let sender = format!("bot{}", b.rng.random_range(20..60));
            let nonce = b.rng.random_range(0..1000);
            let dd = variant(&mut b.rng);
            let p = b.tx("o", gas, sender, nonce, &arb_spec(&rich, &poor, dd));
            let label = if front { Label::Front } else { Label::Back };
            key.blockspace.push(PlantedBlockspace {
                tx_id: p.tx.id.clone(),
                label,
                distance: d,
                target: arb_id.clone(),
            });
            let row = &mut key.histogram[d as usize];
            if front { row.0 += 1 } else { row.1 += 1 }
            let block = &mut blocks[(h + d) as usize];
            if d == 0 && !front {
                block.2.push(p);
            } else {
                block.1.push(p);
            }
        }

        let window = ts(h) - t_v;
        for n in 0..per(cfg.network_overhead, o) {
            let dd = variant(&mut b.rng);
            // Some duplicates reuse the arbitrageur's own nonce.
            let (sender, nonce) = if n % 3 == 0 {
                (bot.clone(), arb_nonce)
            } else {
                (format!("bot{}", b.rng.random_range(20..60)), b.rng.random_range(0..1000))
            };
            let p = b.tx("n", arb_gas, sender, nonce, &arb_spec(&rich, &poor, dd));
            let seen = t_v + b.rng.random_range(0..window);
            sightings.push(SightingRecord { tx_id: p.tx.id.clone(), first_seen_ms: seen });
            key.network.push(PlantedNetwork {
                tx_id: p.tx.id.clone(),
                target: arb_id.clone(),
            });
            unmined.push(p);
        }

        if cfg.decoys {
            let spec = arb_spec(&rich, &poor, delta);
            let late = b.tx("d", arb_gas, bot.clone(), arb_nonce + 1, &spec);
            sightings.push(SightingRecord {
                tx_id: late.tx.id.clone(),
                first_seen_ms: ts(h) + b.rng.random_range(0..5_000),
            });
            let early = b.tx("d", arb_gas, bot.clone(), arb_nonce + 2, &spec);
            sightings.push(SightingRecord {
                tx_id: early.tx.id.clone(),
                first_seen_ms: t_v - b.rng.random_range(1..5_000),
            });
            // A losing round trip through the same pair, seen inside the window.
            let (_, r_out) = poor.reserves(Direction::XToY);
            let lose_y = quote(&poor, Direction::XToY, AssetAmount(delta)).map_or(1, |a| a.0.min(r_out / 2));
            let lossy = b.tx(
                "d",
                arb_gas,
                format!("user{o}"),
                1,
                &[(poor.market_id.as_str(), Direction::XToY, delta, 0), (rich.market_id.as_str(), Direction::YToX, lose_y, 0)],
            );
            sightings.push(SightingRecord {
                tx_id: lossy.tx.id.clone(),
                first_seen_ms: t_v + b.rng.random_range(0..window),
            });
            for d in [&late, &early, &lossy] {
                key.decoys.push(d.tx.id.clone());
            }
            unmined.extend([late, early, lossy]);
        }
    }

    // Noise: single-leg swaps on noise markets, some with unmeetable guards,
    // and atomic round trips between noise markets are avoided entirely.
    for height in 1..=last_height {
        for _ in 0..cfg.noise_per_block {
            let m = b.rng.random_range(0..cfg.noise_markets.max(1));
            if cfg.noise_markets == 0 {
                break;
            }
            let pool = &markets[m];
            let dir = if b.rng.random_bool(0.5) { Direction::XToY } else { Direction::YToX };
            let amt = (pool.reserves(dir).0 as f64 * b.rng.random_range(0.0001..0.003)) as u128 + 1;
            let min = if b.rng.random_bool(0.1) { u128::MAX / 4 } else { 0 };
            let gas = b.rng.random_range(5..100);
            let sender = format!("user{}", b.rng.random_range(1000..2000));
            let nonce = b.rng.random_range(0..1000);
            let id = pool.market_id.clone();
            let p = b.tx("t", gas, sender, nonce, &[(id.as_str(), dir, amt, min)]);
            if b.rng.random_bool(0.5) {
                sightings.push(SightingRecord {
                    tx_id: p.tx.id.clone(),
                    first_seen_ms: ts(height) - b.rng.random_range(500..12_000),
                });
            }
            blocks[height as usize].1.push(p);
        }
        if cfg.decoys && height % 5 == 0 && cfg.noise_markets >= 2 {
            // Two halves of a would-be arbitrage in separate transactions.
            let (i, j) = (height as usize % cfg.noise_markets, (height as usize + 1) % cfg.noise_markets);
            let amt = markets[i].x.0 / 1000 + 1;
            let out = quote(&markets[i], Direction::XToY, AssetAmount(amt)).map_or(1, |a| a.0.max(1));
            let (mi, mj) = (markets[i].market_id.clone(), markets[j].market_id.clone());
            let p1 = b.tx("s", 30, "split".into(), height * 2, &[(mi.as_str(), Direction::XToY, amt, 0)]);
            let p2 = b.tx("s", 30, "split".into(), height * 2 + 1, &[(mj.as_str(), Direction::YToX, out, 0)]);
            key.decoys.push(p1.tx.id.clone());
            key.decoys.push(p2.tx.id.clone());
            blocks[height as usize].1.push(p1);
            blocks[height as usize].1.push(p2);
        }
    }

    // Assemble in order, executing against a running state to fill in outputs.
    let mut records: Vec<TraceRecord> = markets
        .iter()
        .map(|p| {
            TraceRecord::Market(MarketRecord {
                market_id: p.market_id.clone(),
                x: p.x,
                y: p.y,
                fee_num: p.fee.num() as u64,
                fee_den: p.fee.den() as u64,
            })
        })
        .collect();
    let mut state: HashMap<String, PoolState> = markets.into_iter().map(|p| (p.market_id.clone(), p)).collect();
    for (height, (head, mut mid, tail)) in blocks.into_iter().enumerate().skip(1) {
        mid.shuffle(&mut b.rng);
        let txs: Vec<Planned> = head.into_iter().chain(mid).chain(tail).collect();
        let size = txs.iter().map(|p| p.tx.size_bytes).sum::<u64>() + 600;
        records.push(TraceRecord::Block(BlockRecord {
            height: height as u64,
            ts_ms: ts(height as u64),
            size_bytes: size,
        }));
        for (index, mut p) in txs.into_iter().enumerate() {
            p.tx.block_height = Some(height as u64);
            p.tx.index = Some(index as u32);
            let mut scratch = HashMap::new();
            if let ReplayOutcome::Executed(outs) = execute_legs(&p.legs, |m| state.get(m).cloned(), &mut scratch) {
                for (leg, out) in p.legs.iter_mut().zip(outs) {
                    leg.amount_out = Some(out);
                }
                state.extend(scratch);
            }
            records.push(TraceRecord::Tx(p.tx));
            records.extend(p.legs.into_iter().map(TraceRecord::SwapEvent));
        }
    }
    for p in unmined {
        records.push(TraceRecord::Tx(p.tx));
        records.extend(p.legs.into_iter().map(TraceRecord::SwapEvent));
    }
    sightings.sort_by(|a, b| (a.first_seen_ms, &a.tx_id).cmp(&(b.first_seen_ms, &b.tx_id)));
    records.extend(sightings.into_iter().map(TraceRecord::P2pSighting));
    (records, key)
}
