//! Small helpers over arbitrary-precision rationals.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rational = BigRational;

pub fn rat(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn to_f64(q: &Rational) -> f64 {
    q.to_f64().unwrap_or_else(|| {
        let n = q.numer().to_f64().unwrap_or(f64::NAN);
        let d = q.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

/// `Some(k)` when `q` is a nonnegative integer that fits in `u32`.
pub fn as_u32(q: &Rational) -> Option<u32> {
    if q.is_integer() && !q.is_negative() {
        q.to_integer().to_u32()
    } else {
        None
    }
}

pub fn as_i64(q: &Rational) -> Option<i64> {
    if q.is_integer() {
        q.to_integer().to_i64()
    } else {
        None
    }
}

pub fn binomial(n: u32, k: u32) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc *= BigInt::from(n - i);
        acc /= BigInt::from(i + 1);
    }
    acc
}

pub fn pow_rational(q: &Rational, k: u32) -> Rational {
    num_traits::pow(q.clone(), k as usize)
}

fn exact_root(n: &BigInt, k: u32) -> Option<BigInt> {
    if n.is_negative() {
        if k.is_multiple_of(2) {
            return None;
        }
        return exact_root(&-n, k).map(|r| -r);
    }
    let r = n.nth_root(k);
    if num_traits::pow(r.clone(), k as usize) == *n {
        Some(r)
    } else {
        None
    }
}

/// `base^exponent` when the result is rational.
pub fn rational_power(base: &Rational, exponent: &Rational) -> Option<Rational> {
    if exponent.is_zero() {
        return Some(Rational::one());
    }
    if base.is_zero() {
        return if exponent.is_positive() { Some(Rational::zero()) } else { None };
    }
    let p = exponent.numer().to_i64()?;
    let q = exponent.denom().to_u32()?;
    let n = exact_root(base.numer(), q)?;
    let d = exact_root(base.denom(), q)?;
    let root = Rational::new(n, d);
    let mag = pow_rational(&root, p.unsigned_abs() as u32);
    Some(if p < 0 { mag.recip() } else { mag })
}

/// Renders `q` as `p` or `p/q`.
pub fn render(q: &Rational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Least common multiple of the denominators.
pub fn lcm_denominators<'a>(it: impl IntoIterator<Item = &'a Rational>) -> BigInt {
    it.into_iter().fold(BigInt::one(), |acc, q| acc.lcm(q.denom()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn powers() {
        assert_eq!(rational_power(&ratio(9, 4), &ratio(1, 2)), Some(ratio(3, 2)));
        assert_eq!(rational_power(&ratio(9, 4), &ratio(-3, 2)), Some(ratio(8, 27)));
        assert_eq!(rational_power(&rat(2), &ratio(1, 2)), None);
        assert_eq!(rational_power(&rat(-8), &ratio(1, 3)), Some(rat(-2)));
        assert_eq!(rational_power(&rat(0), &rat(-1)), None);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), BigInt::from(10));
        assert_eq!(binomial(5, 0), BigInt::from(1));
        assert_eq!(binomial(3, 4), BigInt::from(0));
    }
}
