//! Exact rational scalars and the small combinatorial functions that
//! coefficient formulas are built from.
//!
//! All downstream arithmetic runs over [`Rational`]: arbitrary-precision
//! fractions kept in lowest terms with a positive denominator. Both
//! invariants are maintained by `num_rational::BigRational` on every
//! operation, so a `Rational` is always safe to compare structurally.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

pub type Rational = BigRational;

/// `n/d` as an exact rational. Panics if `d == 0`.
pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// The integer `n` as a rational.
pub fn rat_int(n: i64) -> Rational {
    Rational::from(BigInt::from(n))
}

/// `n!` as a big integer.
pub fn factorial(n: u64) -> BigInt {
    let mut acc = BigInt::one();
    for i in 2..=n {
        acc *= i;
    }
    acc
}

/// Binomial coefficient `C(n, k)`, zero for `k > n`.
pub fn binomial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Double factorial `m!!` of an odd integer `m >= -1`, with `(-1)!! = 1`.
///
/// Panics on even or smaller arguments; those never arise in the coefficient
/// formulas this supports (`(2n - 1)!!` for `n >= 0`).
pub fn odd_double_factorial(m: i64) -> BigInt {
    assert!(m >= -1 && m % 2 != 0, "odd_double_factorial({m})");
    let mut acc = BigInt::one();
    let mut i = m;
    while i >= 3 {
        acc *= i;
        i -= 2;
    }
    acc
}

/// Falling factorial `(s)_t = s (s-1) ... (s-t+1)`, with `(s)_0 = 1`.
///
/// Vanishes exactly when `0 <= s <= t-1`; negative `s` always gives a
/// nonzero value.
pub fn pochhammer(s: i64, t: u32) -> BigInt {
    let mut acc = BigInt::one();
    for i in 0..t as i64 {
        acc *= s - i;
    }
    acc
}
