use thiserror::Error;

use crate::amm::AssetAmount;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AmmError {
    #[error("arithmetic overflow")]
    Overflow,
    #[error("arithmetic underflow")]
    Underflow,
    #[error("pool {0} is not active (zero reserve)")]
    InvalidPool(String),
    #[error("swap input must be positive")]
    ZeroInput,
    #[error("invalid fee {num}/{den}")]
    InvalidFee { num: u128, den: u128 },
    #[error("swap reverted on {market_id}: quote {quoted} below minimum {min_out}")]
    Slippage {
        market_id: String,
        quoted: AssetAmount,
        min_out: AssetAmount,
    },
    #[error("withdrawal {requested} on {market_id} exceeds quote {quoted}")]
    ExceedsQuote {
        market_id: String,
        requested: AssetAmount,
        quoted: AssetAmount,
    },
    #[error("requested output drains pool {0}")]
    InsufficientLiquidity(String),
    #[error("action targets market {got}, pool is {expected}")]
    MarketMismatch { expected: String, got: String },
    #[error("parse error: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RoutingError {
    #[error(transparent)]
    Amm(#[from] AmmError),
    #[error("routing needs at least one pool")]
    NoPools,
    #[error("total input must be positive")]
    ZeroInput,
    #[error("pools {0} and {1} charge different fees")]
    MixedFees(String, String),
    #[error("pools are not price-synchronized within the fee band")]
    NotSynchronized,
    #[error("pool {rich} does not offer a better price than {poor}")]
    NotRicher { rich: String, poor: String },
    #[error("negative discriminant in threshold quadratic")]
    Discriminant,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ArbError {
    #[error(transparent)]
    Amm(#[from] AmmError),
    #[error(transparent)]
    Routing(#[from] RoutingError),
    #[error("no profitable arbitrage between {0} and {1}")]
    NotProfitable(String, String),
    #[error("arbitrage input must be positive")]
    ZeroInput,
    #[error("need at least {0} pools")]
    TooFewPools(usize),
    #[error("pools {0} and {1} charge different fees")]
    MixedFees(String, String),
    #[error("duplicate market id {0}")]
    DuplicateMarket(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Amm(#[from] AmmError),
    #[error(transparent)]
    Routing(#[from] RoutingError),
    #[error(transparent)]
    Arb(#[from] ArbError),
    #[error("unknown market {0}")]
    UnknownMarket(String),
    #[error("request amount must be positive")]
    ZeroInput,
    #[error("output {got} below requested minimum {min}")]
    Slippage { got: AssetAmount, min: AssetAmount },
    #[error("legs on market {0} net to a two-sided deposit and cannot be compressed")]
    Compression(String),
    #[error("malformed stream record: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error(transparent)]
    Amm(#[from] AmmError),
    #[error("invalid search range [{lo}, {hi}]")]
    InvalidRange { lo: u128, hi: u128 },
    #[error("grid step must be positive")]
    ZeroStep,
    #[error("brute-force routing supports at most 3 pools, got {0}")]
    TooManyPools(usize),
    #[error("granularity {step} too coarse to refine a range of {span}")]
    TooCoarse { step: u128, span: u128 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TraceError {
    #[error(transparent)]
    Amm(#[from] AmmError),
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("unknown market {0}")]
    UnknownMarket(String),
    #[error("zero denominator")]
    ZeroDenominator,
    #[error("non-positive cost input")]
    NonPositive,
    #[error("trace is not ordered by (height, index) at tx {0}")]
    Unordered(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetSimError {
    #[error("bandwidth must be positive")]
    ZeroBandwidth,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("need at least 3 distinct bandwidths for a quadratic fit, got {0}")]
    DegenerateFit(usize),
    #[error("flooding saturates the link: effective bandwidth {0:.3} Mbit/s")]
    Saturated(f64),
    #[error("flooding parameters must be positive")]
    NonPositive,
}
