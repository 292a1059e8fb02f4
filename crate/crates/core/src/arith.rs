//! Small arbitrary-precision helpers shared by the other modules.

use num_bigint::{BigInt, BigUint, Sign as BigSign};
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

/// Exact 2-adic valuation. `n` must be nonzero.
pub fn two_adic_valuation(n: &BigInt) -> u64 {
    n.trailing_zeros().expect("valuation of zero")
}

/// Extended Euclid: returns `(g, x, y)` with `a*x + b*y = g = gcd(a, b) >= 0`.
pub fn ext_gcd(a: &BigInt, b: &BigInt) -> (BigInt, BigInt, BigInt) {
    let (mut old_r, mut r) = (a.clone(), b.clone());
    let (mut old_s, mut s) = (BigInt::one(), BigInt::zero());
    let (mut old_t, mut t) = (BigInt::zero(), BigInt::one());
    while !r.is_zero() {
        let quot = old_r.div_floor(&r);
        let next_r = &old_r - &quot * &r;
        old_r = std::mem::replace(&mut r, next_r);
        let next_s = &old_s - &quot * &s;
        old_s = std::mem::replace(&mut s, next_s);
        let next_t = &old_t - &quot * &t;
        old_t = std::mem::replace(&mut t, next_t);
    }
    if old_r.is_negative() {
        (-old_r, -old_s, -old_t)
    } else {
        (old_r, old_s, old_t)
    }
}

/// Inverse of `a` modulo `modulus` in `[0, modulus)`, if it exists.
pub fn mod_inverse(a: &BigInt, modulus: &BigInt) -> Option<BigInt> {
    if modulus.is_one() {
        return Some(BigInt::zero());
    }
    let (g, x, _) = ext_gcd(&a.mod_floor(modulus), modulus);
    g.is_one().then(|| x.mod_floor(modulus))
}

pub fn pow2(e: u64) -> BigUint {
    BigUint::one() << e
}

pub fn pow3(e: usize) -> BigUint {
    num_traits::pow(BigUint::from(3u8), e)
}

/// Natural log of a positive integer of any size, from its top 64 bits and
/// binary exponent.
pub fn ln_biguint(x: &BigUint) -> f64 {
    assert!(!x.is_zero(), "ln of zero");
    let bits = x.bits();
    if bits <= 64 {
        return (x.iter_u64_digits().next().unwrap_or(0) as f64).ln();
    }
    let shift = bits - 64;
    let top = (x >> shift).iter_u64_digits().next().unwrap_or(0);
    (top as f64).ln() + shift as f64 * std::f64::consts::LN_2
}

/// `num / 2^den_bits` as a double, without overflowing for large operands.
pub fn dyadic_to_f64(num: &BigInt, den_bits: u64) -> f64 {
    if num.is_zero() {
        return 0.0;
    }
    let mag = num.magnitude();
    let bits = mag.bits();
    let (top, shift) = if bits > 64 {
        ((mag >> (bits - 64)).iter_u64_digits().next().unwrap_or(0), (bits - 64) as i64)
    } else {
        (mag.iter_u64_digits().next().unwrap_or(0), 0)
    };
    let exp = shift - den_bits as i64;
    let v = (top as f64) * 2f64.powi(exp.clamp(i32::MIN as i64, i32::MAX as i64) as i32);
    if num.sign() == BigSign::Minus {
        -v
    } else {
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ext_gcd_bezout() {
        for (a, b) in [(240i64, 46i64), (17, 5), (0, 9), (9, 0), (-12, 18), (7, -3)] {
            let (a, b) = (BigInt::from(a), BigInt::from(b));
            let (g, x, y) = ext_gcd(&a, &b);
            assert_eq!(&a * &x + &b * &y, g);
            assert_eq!(g, a.gcd(&b));
        }
    }

    #[test]
    fn inverse_mod_power_of_two() {
        let m = BigInt::from(1u64 << 20);
        for a in [1i64, 3, 9, 27 * 9, 12345679] {
            let a = BigInt::from(a);
            let inv = mod_inverse(&a, &m).unwrap();
            assert!((&a * &inv).mod_floor(&m).is_one());
        }
        assert!(mod_inverse(&BigInt::from(6), &BigInt::from(8)).is_none());
        assert_eq!(mod_inverse(&BigInt::from(5), &BigInt::one()), Some(BigInt::zero()));
    }

    #[test]
    fn ln_matches_small_and_huge() {
        assert!((ln_biguint(&BigUint::from(1000u32)) - 1000f64.ln()).abs() < 1e-12);
        let big = pow2(100_000) * BigUint::from(3u8);
        let expect = 100_000.0 * std::f64::consts::LN_2 + 3f64.ln();
        assert!((ln_biguint(&big) - expect).abs() < 1e-9);
    }

    #[test]
    fn dyadic_conversion() {
        assert_eq!(dyadic_to_f64(&BigInt::from(-1), 2), -0.25);
        let n = BigInt::from(pow2(300)) * 3;
        assert!((dyadic_to_f64(&n, 301) - 1.5).abs() < 1e-15);
    }
}
