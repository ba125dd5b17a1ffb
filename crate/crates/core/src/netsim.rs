//! Stale-block simulator for a fully meshed set of miners.
//!
//! Blocks are found as a Poisson race weighted by hashrate. The finder uploads
//! the block to every other miner over its own link, so each peer receives it
//! after `(n-1)·size/bandwidth` plus a sampled one-way latency. A miner that
//! finds a block before hearing about the current tip forks the chain.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::NetSimError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetSimConfig {
    #[serde(default)]
    pub name: String,
    pub block_interval_min: f64,
    pub block_size_mean_kb: f64,
    pub block_size_std_kb: f64,
    /// Truncation floor for sampled block sizes.
    #[serde(default = "default_min_block_kb")]
    pub min_block_kb: f64,
    /// (percentile, latency ms) points, interpolated linearly.
    pub latency_percentiles: Vec<(f64, f64)>,
    /// Hashrate shares of the simulated miners; normalised before use.
    pub hashrate: Vec<f64>,
    pub bandwidth_mbps: f64,
    pub seed: u64,
    pub blocks: usize,
    #[serde(default = "default_batches")]
    pub batches: usize,
}

fn default_min_block_kb() -> f64 {
    1.0
}

fn default_batches() -> usize {
    10
}

impl NetSimConfig {
    pub fn validate(&self) -> Result<(), NetSimError> {
        let bad = |m: &str| Err(NetSimError::InvalidConfig(m.to_string()));
        if !(self.bandwidth_mbps > 0.0) {
            return Err(NetSimError::ZeroBandwidth);
        }
        if !(self.block_interval_min > 0.0) {
            return bad("block interval must be positive");
        }
        if self.block_size_mean_kb < 0.0 || self.block_size_std_kb < 0.0 || self.min_block_kb < 0.0 {
            return bad("block sizes must be non-negative");
        }
        if self.hashrate.is_empty() || self.hashrate.iter().any(|h| !(*h >= 0.0)) {
            return bad("hashrate shares must be non-negative and non-empty");
        }
        let total: f64 = self.hashrate.iter().sum();
        if !(total > 0.0) || total > 1.0 + 1e-9 {
            return bad("hashrate shares must sum to (0, 1]");
        }
        let p = &self.latency_percentiles;
        if p.len() < 2 || p[0].0 != 0.0 || p[p.len() - 1].0 != 100.0 {
            return bad("latency percentiles must span 0..100");
        }
        if p.windows(2).any(|w| w[1].0 <= w[0].0 || w[1].1 < w[0].1) || p[0].1 < 0.0 {
            return bad("latency percentiles must be monotone");
        }
        if self.blocks == 0 || self.batches == 0 || self.blocks < self.batches {
            return bad("need at least one block per batch");
        }
        Ok(())
    }

    /// Latency in ms at quantile `u` in [0, 1].
    pub fn latency_at(&self, u: f64) -> f64 {
        let pct = (u * 100.0).clamp(0.0, 100.0);
        let p = &self.latency_percentiles;
        let k = p.partition_point(|&(q, _)| q <= pct).clamp(1, p.len() - 1);
        let ((q0, l0), (q1, l1)) = (p[k - 1], p[k]);
        l0 + (l1 - l0) * (pct - q0) / (q1 - q0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub stale_rate: f64,
    pub stderr: f64,
    pub blocks: usize,
    pub stale_blocks: usize,
    /// Blocks won per miner, in config order.
    pub wins: Vec<usize>,
}

/// Per-block randomness, drawn independently of bandwidth so that sweep
/// points share the same block arrivals, winners, sizes and latencies.
struct Draw {
    gap_s: f64,
    miner: usize,
    size_bits: f64,
    latency_s: Vec<f64>,
}

fn draws(cfg: &NetSimConfig, seed: u64, count: usize) -> Result<Vec<Draw>, NetSimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total: f64 = cfg.hashrate.iter().sum();
    let mut cdf = Vec::with_capacity(cfg.hashrate.len());
    let mut acc = 0.0;
    for h in &cfg.hashrate {
        acc += h / total;
        cdf.push(acc);
    }
    let exp = Exp::new(1.0 / (cfg.block_interval_min * 60.0)).map_err(|e| NetSimError::InvalidConfig(e.to_string()))?;
    let normal = Normal::new(cfg.block_size_mean_kb, cfg.block_size_std_kb)
        .map_err(|e| NetSimError::InvalidConfig(e.to_string()))?;
    let n = cfg.hashrate.len();
    Ok((0..count)
        .map(|_| {
            let gap_s = exp.sample(&mut rng);
            let u: f64 = rng.random();
            let miner = cdf.partition_point(|&c| c <= u).min(n - 1);
            let kb = normal.sample(&mut rng).max(cfg.min_block_kb);
            let latency_s = (0..n).map(|_| cfg.latency_at(rng.random()) / 1000.0).collect();
            Draw {
                gap_s,
                miner,
                size_bits: kb * 8000.0,
                latency_s,
            }
        })
        .collect())
}

#[derive(PartialEq)]
struct At(f64);

impl Eq for At {}

impl PartialOrd for At {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for At {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

struct Block {
    parent: Option<usize>,
    height: u64,
}

/// Runs one batch; returns (stale blocks, wins per miner).
fn run(cfg: &NetSimConfig, draws: &[Draw]) -> (usize, Vec<usize>) {
    let n = cfg.hashrate.len();
    let bw = cfg.bandwidth_mbps * 1e6;
    let mut blocks: Vec<Block> = Vec::with_capacity(draws.len());
    let mut head: Vec<Option<usize>> = vec![None; n];
    let mut wins = vec![0; n];
    // Pending deliveries: (time, block, receiver).
    let mut queue: BinaryHeap<Reverse<(At, usize, usize)>> = BinaryHeap::new();
    let height = |blocks: &[Block], h: Option<usize>| h.map_or(0, |b| blocks[b].height);
    let mut now = 0.0;
    for d in draws {
        now += d.gap_s;
        while let Some(Reverse((At(t), b, to))) = queue.peek() {
            if *t > now {
                break;
            }
            let (b, to) = (*b, *to);
            queue.pop();
            // First received wins among equal heights.
            if blocks[b].height > height(&blocks, head[to]) {
                head[to] = Some(b);
            }
        }
        let m = d.miner;
        let id = blocks.len();
        blocks.push(Block {
            parent: head[m],
            height: height(&blocks, head[m]) + 1,
        });
        head[m] = Some(id);
        wins[m] += 1;
        let upload = (n - 1) as f64 * d.size_bits / bw;
        for to in (0..n).filter(|&to| to != m) {
            queue.push(Reverse((At(now + upload + d.latency_s[to]), id, to)));
        }
    }
    // Main chain: the highest block, earliest found on ties.
    let mut best = 0;
    for (i, b) in blocks.iter().enumerate() {
        if b.height > blocks[best].height {
            best = i;
        }
    }
    let mut on_chain = 0;
    let mut cur = (!blocks.is_empty()).then_some(best);
    while let Some(c) = cur {
        on_chain += 1;
        cur = blocks[c].parent;
    }
    (blocks.len() - on_chain, wins)
}

fn batch_seed(master: u64, batch: usize) -> u64 {
    master ^ (batch as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

pub fn simulate(cfg: &NetSimConfig) -> Result<SimResult, NetSimError> {
    cfg.validate()?;
    let per = cfg.blocks / cfg.batches;
    let batches: Vec<(usize, Vec<usize>)> = (0..cfg.batches)
        .into_par_iter()
        .map(|b| draws(cfg, batch_seed(cfg.seed, b), per).map(|d| run(cfg, &d)))
        .collect::<Result<_, _>>()?;
    let rates: Vec<f64> = batches.iter().map(|(s, _)| *s as f64 / per as f64).collect();
    let k = rates.len() as f64;
    let mean = rates.iter().sum::<f64>() / k;
    let stderr = if rates.len() > 1 {
        (rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (k - 1.0) / k).sqrt()
    } else {
        0.0
    };
    let mut wins = vec![0; cfg.hashrate.len()];
    for (_, w) in &batches {
        for (a, b) in wins.iter_mut().zip(w) {
            *a += b;
        }
    }
    Ok(SimResult {
        stale_rate: mean,
        stderr,
        blocks: per * cfg.batches,
        stale_blocks: batches.iter().map(|(s, _)| s).sum(),
        wins,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub bandwidth_mbps: f64,
    pub stale_rate: f64,
    pub stderr: f64,
}

/// `stale ≈ a·bw² + b·bw + c`, in stale-rate units (fractions, not percent).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quadratic {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Quadratic {
    pub fn eval(&self, x: f64) -> f64 {
        (self.a * x + self.b) * x + self.c
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StaleRateCurve {
    pub points: Vec<CurvePoint>,
    pub fit: Quadratic,
}

impl StaleRateCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bandwidth,stale_rate,stderr\n");
        for p in &self.points {
            s.push_str(&format!("{},{:.6},{:.6}\n", p.bandwidth_mbps, p.stale_rate, p.stderr));
        }
        s
    }
}

/// Degree-2 least squares via the normal equations.
pub fn fit_quadratic(xy: &[(f64, f64)]) -> Result<Quadratic, NetSimError> {
    let mut xs: Vec<f64> = xy.iter().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    if xs.len() < 3 {
        return Err(NetSimError::DegenerateFit(xs.len()));
    }
    // Centre and scale x for conditioning, then map back.
    let mean = xy.iter().map(|p| p.0).sum::<f64>() / xy.len() as f64;
    let scale = xy.iter().map(|p| (p.0 - mean).abs()).fold(0.0, f64::max);
    let mut m = [[0.0f64; 4]; 3];
    for &(x, y) in xy {
        let t = (x - mean) / scale;
        let pw = [1.0, t, t * t];
        for r in 0..3 {
            for c in 0..3 {
                m[r][c] += pw[r] * pw[c];
            }
            m[r][3] += pw[r] * y;
        }
    }
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())).unwrap();
        m.swap(col, piv);
        if m[col][col].abs() < 1e-12 {
            return Err(NetSimError::DegenerateFit(xs.len()));
        }
        for r in 0..3 {
            if r != col {
                let f = m[r][col] / m[col][col];
                for c in col..4 {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
    }
    let (c0, c1, c2) = (m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2]);
    // y = c0 + c1·t + c2·t², t = (x − mean)/scale
    let a = c2 / (scale * scale);
    let b = c1 / scale - 2.0 * c2 * mean / (scale * scale);
    let c = c0 - c1 * mean / scale + c2 * mean * mean / (scale * scale);
    Ok(Quadratic { a, b, c })
}

/// Simulates every bandwidth with the config's seed (common random numbers
/// across points) and fits a quadratic.
pub fn sweep_and_fit(cfg: &NetSimConfig, bandwidths: &[f64]) -> Result<StaleRateCurve, NetSimError> {
    let points: Vec<CurvePoint> = bandwidths
        .par_iter()
        .map(|&bw| {
            let c = NetSimConfig {
                bandwidth_mbps: bw,
                ..cfg.clone()
            };
            simulate(&c).map(|r| CurvePoint {
                bandwidth_mbps: bw,
                stale_rate: r.stale_rate,
                stderr: r.stderr,
            })
        })
        .collect::<Result<_, _>>()?;
    let fit = fit_quadratic(&points.iter().map(|p| (p.bandwidth_mbps, p.stale_rate)).collect::<Vec<_>>())?;
    Ok(StaleRateCurve { points, fit })
}

/// Bandwidth left after repeated overhead traffic:
/// `base − overhead/interval · amplification`, floored at `floor_mbps`.
pub fn flooding_degradation(
    base_mbps: f64,
    overhead_mbit_per_interval: f64,
    interval_s: f64,
    amplification: f64,
    floor_mbps: f64,
) -> Result<f64, NetSimError> {
    if !(base_mbps > 0.0 && overhead_mbit_per_interval > 0.0 && interval_s > 0.0) || amplification < 0.0 {
        return Err(NetSimError::NonPositive);
    }
    let eff = base_mbps - overhead_mbit_per_interval / interval_s * amplification;
    if eff <= 0.0 {
        return Err(NetSimError::Saturated(eff));
    }
    Ok(eff.max(floor_mbps))
}

/// The Ethereum parameterisation shipped in `fixtures/netsim_eth.json`.
pub fn ethereum() -> NetSimConfig {
    serde_json::from_str(include_str!("../fixtures/netsim_eth.json")).expect("bundled fixture parses")
}
