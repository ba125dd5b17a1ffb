//! Aggregated AMM (A²MM) laboratory: pool arithmetic, on-chain routing and
//! arbitrage across same-pair pools, MEV overhead forensics on traces, and a
//! stale-block network simulator.

pub mod amm;
pub mod arbitrage;
pub mod engine;
pub mod error;
pub mod netsim;
pub mod oracle;
pub mod routing;
pub mod trace;
pub mod wide;

pub use amm::{AssetAmount, Direction, FeeRate, PoolState, SwapAction};
pub use error::*;
