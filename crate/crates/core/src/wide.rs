//! Widened integer helpers for reserve arithmetic.

use std::cmp::Ordering;

use ethnum::U256;
use num_bigint::BigUint;

/// `floor(a * b / c)` with a 256-bit intermediate. `None` on overflow or `c == 0`.
pub fn mul_div_floor(a: u128, b: u128, c: u128) -> Option<u128> {
    if c == 0 {
        return None;
    }
    let prod = U256::from(a).checked_mul(U256::from(b))?;
    let q = prod / U256::from(c);
    u128::try_from(q).ok()
}

/// `ceil(a * b / c)` with a 256-bit intermediate.
pub fn mul_div_ceil(a: u128, b: u128, c: u128) -> Option<u128> {
    if c == 0 {
        return None;
    }
    let prod = U256::from(a).checked_mul(U256::from(b))?;
    let c = U256::from(c);
    let (q, r) = (prod / c, prod % c);
    let q = if r == U256::ZERO { q } else { q + U256::ONE };
    u128::try_from(q).ok()
}

/// Compares the products of two factor lists exactly.
pub fn cmp_products(lhs: &[u128], rhs: &[u128]) -> Ordering {
    let prod = |f: &[u128]| f.iter().fold(BigUint::from(1u8), |acc, v| acc * BigUint::from(*v));
    prod(lhs).cmp(&prod(rhs))
}

/// Exact `a * b` as a 256-bit value.
pub fn product(a: u128, b: u128) -> U256 {
    U256::from(a) * U256::from(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mul_div_handles_wide_intermediates() {
        let big = u128::MAX / 3;
        assert_eq!(mul_div_floor(big, 6, 3), Some(big * 2));
        assert_eq!(mul_div_floor(u128::MAX, u128::MAX, u128::MAX), Some(u128::MAX));
        assert_eq!(mul_div_floor(u128::MAX, 2, 1), None);
        assert_eq!(mul_div_floor(1, 1, 0), None);
    }

    #[test]
    fn ceil_rounds_up_only_on_remainder() {
        assert_eq!(mul_div_ceil(10, 3, 5), Some(6));
        assert_eq!(mul_div_ceil(10, 3, 4), Some(8));
    }

    #[test]
    fn product_comparison_is_exact() {
        let m = u128::MAX;
        assert_eq!(cmp_products(&[m, m, m], &[m, m, m - 1]), Ordering::Greater);
        assert_eq!(cmp_products(&[2, 3], &[6]), Ordering::Equal);
    }
}
