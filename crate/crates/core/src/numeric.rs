//! Small numeric kernels shared across modules: modular arithmetic on `u64`,
//! compensated summation and accurate conversions of big ratios to `f64`.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

#[inline]
pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Neumaier's variant of Kahan summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
    abs: f64,
    terms: u64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
        self.abs += x.abs();
        self.terms += 1;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }

    /// A bound on the accumulated rounding error of [`value`](Self::value).
    pub fn error_bound(&self) -> f64 {
        // Neumaier: |err| <= 2u|sum of |x_i|| + O(n u^2) terms.
        let u = f64::EPSILON / 2.0;
        let n = self.terms as f64;
        2.0 * u * self.abs + 2.0 * n * n * u * u * self.abs
    }
}

/// `num / den` as an `f64`, accurate to a few ulps for arbitrarily large
/// operands.
pub fn ratio_to_f64(num: &BigUint, den: &BigUint) -> f64 {
    assert!(!den.is_zero(), "zero denominator");
    if num.is_zero() {
        return 0.0;
    }
    let (nb, db) = (num.bits() as i64, den.bits() as i64);
    // Scale so that the integer quotient carries at least 64 significant bits.
    let shift = 64 - (nb - db);
    let q = if shift >= 0 {
        (num << (shift as u64)) / den
    } else {
        num / (den << ((-shift) as u64))
    };
    let qb = q.bits() as i64;
    let drop = (qb - 64).max(0);
    let top = (&q >> (drop as u64)).to_u64().unwrap_or(u64::MAX);
    (top as f64) * 2f64.powi((drop - shift) as i32)
}

/// Natural logarithm of a positive big integer.
pub fn ln_biguint(x: &BigUint) -> f64 {
    assert!(!x.is_zero(), "log of zero");
    let bits = x.bits();
    if bits <= 64 {
        return (x.to_u64().unwrap() as f64).ln();
    }
    let drop = bits - 64;
    let top = (x >> drop).to_u64().unwrap() as f64;
    top.ln() + drop as f64 * std::f64::consts::LN_2
}

/// Natural logarithm of a positive rational.
pub fn ln_ratio(x: &BigRational) -> f64 {
    assert!(x.is_positive(), "log of non-positive rational");
    let n = x.numer().magnitude();
    let d = x.denom().magnitude();
    ln_biguint(n) - ln_biguint(d)
}

pub fn ratio(num: u64, den: u64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn big_ratio(num: BigUint, den: BigUint) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Fractional part of a non-negative rational.
pub fn frac(x: &BigRational) -> BigRational {
    x - x.floor()
}

/// Exact binomial coefficient.
pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pow_mod_matches_naive() {
        for m in 1..60u64 {
            for b in 0..20u64 {
                let mut acc = 1 % m;
                for e in 0..30u64 {
                    assert_eq!(pow_mod(b, e, m), acc, "{b}^{e} mod {m}");
                    acc = acc * b % m;
                }
            }
        }
    }

    #[test]
    fn ratio_conversion() {
        let n = BigUint::from(12u32);
        let d = BigUint::from(77u32);
        assert!((ratio_to_f64(&n, &d) - 12.0 / 77.0).abs() < 1e-16);
        let big = BigUint::from(3u32).pow(500);
        let r = ratio_to_f64(&big, &(&big * 7u32));
        assert!((r - 1.0 / 7.0).abs() < 1e-16);
        let r = ratio_to_f64(&(&big * 5u32), &big);
        assert_eq!(r, 5.0);
    }

    #[test]
    fn logs() {
        let x = BigUint::from(10u32).pow(300);
        assert!((ln_biguint(&x) - 300.0 * 10f64.ln()).abs() < 1e-10);
        assert!((ln_biguint(&BigUint::from(7u32)) - 7f64.ln()).abs() < 1e-15);
        assert!((ln_ratio(&ratio(1, 100)) + 100f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), BigUint::from(10u32));
        assert_eq!(binomial(6000, 0), BigUint::one());
        assert_eq!(binomial(3, 4), BigUint::zero());
        // Pascal's rule as an oracle.
        for n in 1..40u64 {
            for k in 1..n {
                assert_eq!(binomial(n, k), binomial(n - 1, k - 1) + binomial(n - 1, k));
            }
        }
    }

    #[test]
    fn compensated_sum_is_accurate() {
        let mut s = CompensatedSum::new();
        s.add(1.0);
        for _ in 0..1000 {
            s.add(1e-17);
        }
        assert!((s.value() - (1.0 + 1e-14)).abs() < 1e-18);
    }
}
