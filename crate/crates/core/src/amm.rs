//! Exact-arithmetic constant-product pool state machine.
//!
//! Amounts are unsigned 128-bit integers in base units. Swaps follow the
//! fee-on-input constant product rule
//! `out = floor(in * fee_num * reserve_out / (reserve_in * fee_den + in * fee_num))`,
//! so the reserve product never decreases.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::AmmError;
use crate::wide;

/// An amount of one asset in its smallest indivisible unit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AssetAmount(pub u128);

impl AssetAmount {
    pub const ZERO: AssetAmount = AssetAmount(0);

    pub const fn new(value: u128) -> Self {
        AssetAmount(value)
    }

    pub const fn get(self) -> u128 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn checked_add(self, rhs: AssetAmount) -> Result<AssetAmount, AmmError> {
        self.0.checked_add(rhs.0).map(AssetAmount).ok_or(AmmError::Overflow)
    }

    pub fn checked_sub(self, rhs: AssetAmount) -> Result<AssetAmount, AmmError> {
        self.0.checked_sub(rhs.0).map(AssetAmount).ok_or(AmmError::Underflow)
    }

    pub fn checked_mul(self, rhs: u128) -> Result<AssetAmount, AmmError> {
        self.0.checked_mul(rhs).map(AssetAmount).ok_or(AmmError::Overflow)
    }
}

impl From<u128> for AssetAmount {
    fn from(v: u128) -> Self {
        AssetAmount(v)
    }
}

impl From<u64> for AssetAmount {
    fn from(v: u64) -> Self {
        AssetAmount(v as u128)
    }
}

impl fmt::Display for AssetAmount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for AssetAmount {
    type Err = AmmError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().replace('_', "");
        t.parse::<u128>()
            .map(AssetAmount)
            .map_err(|_| AmmError::Parse(format!("not a base-unit amount: {s:?}")))
    }
}

// 128-bit values exceed the integer precision of most JSON consumers, so
// amounts travel as decimal strings. Plain JSON integers are accepted on input.
impl Serialize for AssetAmount {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0.to_string())
    }
}

impl<'de> Deserialize<'de> for AssetAmount {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Str(String),
            Int(u64),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
            Raw::Int(v) => Ok(AssetAmount(v as u128)),
        }
    }
}

/// Fraction of the input that participates in pricing, `num / den`.
///
/// Both parts must fit in 64 bits (they serialize as plain JSON integers).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawFee", into = "RawFee")]
pub struct FeeRate {
    num: u128,
    den: u128,
}

#[derive(Serialize, Deserialize)]
struct RawFee {
    fee_num: u64,
    fee_den: u64,
}

impl TryFrom<RawFee> for FeeRate {
    type Error = AmmError;

    fn try_from(raw: RawFee) -> Result<Self, Self::Error> {
        FeeRate::new(raw.fee_num as u128, raw.fee_den as u128)
    }
}

impl From<FeeRate> for RawFee {
    fn from(f: FeeRate) -> Self {
        RawFee {
            fee_num: f.num as u64,
            fee_den: f.den as u64,
        }
    }
}

impl FeeRate {
    /// The 0.3% commission used by Uniswap V2 and Sushiswap.
    pub const UNISWAP_V2: FeeRate = FeeRate { num: 997, den: 1000 };
    /// No commission.
    pub const ZERO: FeeRate = FeeRate { num: 1, den: 1 };

    pub fn new(num: u128, den: u128) -> Result<Self, AmmError> {
        if den == 0 || num == 0 || num > den || den > u64::MAX as u128 {
            return Err(AmmError::InvalidFee { num, den });
        }
        Ok(FeeRate { num, den })
    }

    pub fn num(&self) -> u128 {
        self.num
    }

    pub fn den(&self) -> u128 {
        self.den
    }

    /// The retained fraction as a float, e.g. 0.997.
    pub fn gamma(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn as_ratio(&self) -> Ratio<u128> {
        Ratio::new(self.num, self.den)
    }
}

impl Default for FeeRate {
    fn default() -> Self {
        FeeRate::UNISWAP_V2
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "x_to_y")]
    XToY,
    #[serde(rename = "y_to_x")]
    YToX,
}

impl Direction {
    pub fn reverse(self) -> Direction {
        match self {
            Direction::XToY => Direction::YToX,
            Direction::YToX => Direction::XToY,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::XToY => "x_to_y",
            Direction::YToX => "y_to_x",
        })
    }
}

impl FromStr for Direction {
    type Err = AmmError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "x_to_y" | "xy" | "x2y" => Ok(Direction::XToY),
            "y_to_x" | "yx" | "y2x" => Ok(Direction::YToX),
            _ => Err(AmmError::Parse(format!("unknown direction {s:?}"))),
        }
    }
}

/// One of the two assets of a market.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Asset {
    X,
    Y,
}

impl Direction {
    pub fn input_asset(self) -> Asset {
        match self {
            Direction::XToY => Asset::X,
            Direction::YToX => Asset::Y,
        }
    }

    pub fn output_asset(self) -> Asset {
        match self {
            Direction::XToY => Asset::Y,
            Direction::YToX => Asset::X,
        }
    }

    /// The direction that spends `asset`.
    pub fn spending(asset: Asset) -> Direction {
        match asset {
            Asset::X => Direction::XToY,
            Asset::Y => Direction::YToX,
        }
    }
}

/// Reserves of a single two-asset constant-product market.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PoolState {
    pub market_id: String,
    pub x: AssetAmount,
    pub y: AssetAmount,
    #[serde(flatten)]
    pub fee: FeeRate,
}

impl PoolState {
    pub fn new(market_id: impl Into<String>, x: u128, y: u128) -> Self {
        PoolState {
            market_id: market_id.into(),
            x: AssetAmount(x),
            y: AssetAmount(y),
            fee: FeeRate::default(),
        }
    }

    pub fn with_fee(mut self, fee: FeeRate) -> Self {
        self.fee = fee;
        self
    }

    pub fn is_active(&self) -> bool {
        self.x.0 > 0 && self.y.0 > 0
    }

    /// `(reserve_in, reserve_out)` for a swap in `direction`.
    pub fn reserves(&self, direction: Direction) -> (u128, u128) {
        match direction {
            Direction::XToY => (self.x.0, self.y.0),
            Direction::YToX => (self.y.0, self.x.0),
        }
    }

    pub fn reserve_of(&self, asset: Asset) -> u128 {
        match asset {
            Asset::X => self.x.0,
            Asset::Y => self.y.0,
        }
    }

    /// Same pool with the roles of X and Y exchanged.
    pub fn mirrored(&self) -> PoolState {
        PoolState {
            market_id: self.market_id.clone(),
            x: self.y,
            y: self.x,
            fee: self.fee,
        }
    }

    fn ensure_active(&self) -> Result<(), AmmError> {
        if self.is_active() {
            Ok(())
        } else {
            Err(AmmError::InvalidPool(self.market_id.clone()))
        }
    }

    /// Reserve product `x * y`, exact.
    pub fn product(&self) -> ethnum::U256 {
        wide::product(self.x.0, self.y.0)
    }
}

/// A single directed swap request against one market.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SwapAction {
    pub market_id: String,
    pub direction: Direction,
    pub amount_in: AssetAmount,
    #[serde(default)]
    pub min_amount_out: AssetAmount,
}

impl SwapAction {
    pub fn new(market_id: impl Into<String>, direction: Direction, amount_in: u128) -> Self {
        SwapAction {
            market_id: market_id.into(),
            direction,
            amount_in: AssetAmount(amount_in),
            min_amount_out: AssetAmount::ZERO,
        }
    }

    pub fn with_min_out(mut self, min: u128) -> Self {
        self.min_amount_out = AssetAmount(min);
        self
    }
}

/// Maximum output for `amount_in` against `pool`. Pure.
pub fn quote(pool: &PoolState, direction: Direction, amount_in: AssetAmount) -> Result<AssetAmount, AmmError> {
    pool.ensure_active()?;
    if amount_in.is_zero() {
        return Err(AmmError::ZeroInput);
    }
    quote_raw(pool, direction, amount_in.0).map(AssetAmount)
}

/// `quote` on raw integers, without the zero-input precondition (zero in gives zero out).
pub(crate) fn quote_raw(pool: &PoolState, direction: Direction, amount_in: u128) -> Result<u128, AmmError> {
    let (r_in, r_out) = pool.reserves(direction);
    if r_in == 0 || r_out == 0 {
        return Err(AmmError::InvalidPool(pool.market_id.clone()));
    }
    let in_fee = amount_in.checked_mul(pool.fee.num).ok_or(AmmError::Overflow)?;
    let denom = r_in
        .checked_mul(pool.fee.den)
        .and_then(|d| d.checked_add(in_fee))
        .ok_or(AmmError::Overflow)?;
    wide::mul_div_floor(in_fee, r_out, denom).ok_or(AmmError::Overflow)
}

/// Smallest input whose quote is at least `amount_out`.
pub fn amount_in_for(pool: &PoolState, direction: Direction, amount_out: AssetAmount) -> Result<AssetAmount, AmmError> {
    pool.ensure_active()?;
    let (r_in, r_out) = pool.reserves(direction);
    if amount_out.0 == 0 {
        return Ok(AssetAmount::ZERO);
    }
    if amount_out.0 >= r_out {
        return Err(AmmError::InsufficientLiquidity(pool.market_id.clone()));
    }
    // in * num * (r_out - out) >= out * r_in * den
    let lhs = r_in.checked_mul(pool.fee.den).ok_or(AmmError::Overflow)?;
    let rhs = pool.fee.num.checked_mul(r_out - amount_out.0).ok_or(AmmError::Overflow)?;
    wide::mul_div_ceil(amount_out.0, lhs, rhs).map(AssetAmount).ok_or(AmmError::Overflow)
}

/// Executes `action`, returning the next state and the amount withdrawn.
///
/// On slippage violation the error carries the quote and `pool` is untouched.
pub fn apply_swap(pool: &PoolState, action: &SwapAction) -> Result<(PoolState, AssetAmount), AmmError> {
    if action.market_id != pool.market_id {
        return Err(AmmError::MarketMismatch {
            expected: pool.market_id.clone(),
            got: action.market_id.clone(),
        });
    }
    let out = quote(pool, action.direction, action.amount_in)?;
    if out < action.min_amount_out {
        return Err(AmmError::Slippage {
            market_id: pool.market_id.clone(),
            quoted: out,
            min_out: action.min_amount_out,
        });
    }
    let next = settle(pool, action.direction, action.amount_in, out)?;
    Ok((next, out))
}

/// Applies fixed deltas `(+amount_in, -amount_out)` after checking that the
/// withdrawal does not exceed what the pricing rule allows.
pub fn apply_exact(
    pool: &PoolState,
    direction: Direction,
    amount_in: AssetAmount,
    amount_out: AssetAmount,
) -> Result<PoolState, AmmError> {
    pool.ensure_active()?;
    let max_out = quote_raw(pool, direction, amount_in.0)?;
    if amount_out.0 > max_out {
        return Err(AmmError::ExceedsQuote {
            market_id: pool.market_id.clone(),
            requested: amount_out,
            quoted: AssetAmount(max_out),
        });
    }
    settle(pool, direction, amount_in, amount_out)
}

fn settle(pool: &PoolState, direction: Direction, amount_in: AssetAmount, out: AssetAmount) -> Result<PoolState, AmmError> {
    let mut next = pool.clone();
    match direction {
        Direction::XToY => {
            next.x = pool.x.checked_add(amount_in)?;
            next.y = pool.y.checked_sub(out)?;
        }
        Direction::YToX => {
            next.y = pool.y.checked_add(amount_in)?;
            next.x = pool.x.checked_sub(out)?;
        }
    }
    Ok(next)
}

/// Instantaneous exchange rate `reserve_out / reserve_in`, fee excluded.
pub fn marginal_price(pool: &PoolState, direction: Direction) -> Result<Ratio<u128>, AmmError> {
    pool.ensure_active()?;
    let (r_in, r_out) = pool.reserves(direction);
    Ok(Ratio::new(r_out, r_in))
}

/// `y / x` as a float. Only for heuristics and reporting.
pub fn spot_price(pool: &PoolState) -> f64 {
    pool.y.0 as f64 / pool.x.0 as f64
}
