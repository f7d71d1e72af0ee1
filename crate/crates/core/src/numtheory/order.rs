use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};

use super::NumTheoryError;
use crate::numeric::{mul_mod, pow_mod};
use crate::primes::{factor_u64, is_prime};

/// A factorization `∏ p^e` with strictly increasing primes.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Factorization {
    factors: Vec<(u64, u32)>,
}

impl Factorization {
    /// Validates and stores `(prime, exponent)` pairs. Pairs with exponent 0
    /// are dropped.
    pub fn new(mut pairs: Vec<(u64, u32)>) -> Result<Self, NumTheoryError> {
        pairs.retain(|&(_, e)| e > 0);
        for w in pairs.windows(2) {
            if w[0].0 >= w[1].0 {
                return Err(NumTheoryError::InvalidArgument(
                    "factorization primes must increase".into(),
                ));
            }
        }
        if let Some(&(p, _)) = pairs.iter().find(|&&(p, _)| !is_prime(p)) {
            return Err(NumTheoryError::InvalidArgument(format!("{p} is not prime")));
        }
        Ok(Self { factors: pairs })
    }

    pub fn of_u64(n: u64) -> Self {
        Self { factors: factor_u64(n) }
    }

    pub fn factors(&self) -> &[(u64, u32)] {
        &self.factors
    }

    pub fn value(&self) -> BigUint {
        self.factors
            .iter()
            .fold(BigUint::one(), |acc, &(p, e)| acc * BigUint::from(p).pow(e))
    }

    /// The factorization of `φ` of the represented integer.
    pub fn phi_factorization(&self) -> Factorization {
        let mut acc: Vec<(u64, u32)> = Vec::new();
        let mut add = |p: u64, e: u32| {
            if let Some(slot) = acc.iter_mut().find(|(q, _)| *q == p) {
                slot.1 += e;
            } else {
                acc.push((p, e));
            }
        };
        for &(p, e) in &self.factors {
            for (r, f) in factor_u64(p - 1) {
                add(r, f);
            }
            if e > 1 {
                add(p, e - 1);
            }
        }
        acc.sort_unstable();
        Factorization { factors: acc }
    }
}

/// Euler's totient by factorization.
pub fn euler_phi(n: u64) -> u64 {
    factor_u64(n)
        .into_iter()
        .map(|(p, e)| (p - 1) * p.pow(e - 1))
        .product()
}

/// Smallest `m >= 1` with `a^m ≡ 1 (mod n)`, by stepping through powers.
/// Test oracle only.
pub fn brute_force_order(a: u64, n: u64) -> Option<u64> {
    if n == 1 {
        return Some(1);
    }
    if a.gcd(&n) != 1 {
        return None;
    }
    let a = a % n;
    let mut x = a;
    let mut m = 1;
    while x != 1 {
        x = mul_mod(x, a, n);
        m += 1;
    }
    Some(m)
}

/// Order of `a` modulo `n` by descent through the divisor lattice of `φ(n)`:
/// start from `φ(n)` and strip each prime factor while `a^{m/p} ≡ 1`.
pub fn multiplicative_order(a: u64, n: u64) -> Result<u64, NumTheoryError> {
    if n < 2 {
        return Err(NumTheoryError::InvalidArgument("modulus must be at least 2".into()));
    }
    if a.gcd(&n) != 1 {
        return Err(NumTheoryError::NotCoprime { a: a.to_string(), n: n.to_string() });
    }
    let phi = euler_phi(n);
    let mut m = phi;
    for (p, _) in factor_u64(phi) {
        while m % p == 0 && pow_mod(a, m / p, n) == 1 {
            m /= p;
        }
    }
    Ok(m)
}

/// `ord_{p^j}(a)` for an odd prime `p`: with `d = ord_p(a)` and
/// `k = k(a, p)` the largest `k` such that `p^k | a^d − 1`, the order is `d`
/// when `j <= k` and `d·p^{j−k}` otherwise.
pub fn prime_power_order(a: u64, p: u64, j: u32) -> Result<BigUint, NumTheoryError> {
    if p == 2 {
        return Err(NumTheoryError::EvenPrime);
    }
    if !is_prime(p) {
        return Err(NumTheoryError::InvalidArgument(format!("{p} is not prime")));
    }
    if j == 0 {
        return Err(NumTheoryError::InvalidArgument("exponent must be positive".into()));
    }
    if a % p == 0 {
        return Err(NumTheoryError::NotCoprime { a: a.to_string(), n: p.to_string() });
    }
    let d = order_mod_prime(a, p);
    let k = valuation_of_power_minus_one(a, d, p, j);
    let mut ord = BigUint::from(d);
    if j > k {
        ord *= BigUint::from(p).pow(j - k);
    }
    Ok(ord)
}

/// `ord_p(a)` for prime `p` not dividing `a`; allows `a ≡ 1`.
fn order_mod_prime(a: u64, p: u64) -> u64 {
    let a = a % p;
    if a == 1 {
        return 1;
    }
    let mut m = p - 1;
    for (r, _) in factor_u64(p - 1) {
        while m % r == 0 && pow_mod(a, m / r, p) == 1 {
            m /= r;
        }
    }
    m
}

/// `min(v_p(a^d − 1), cap)`.
fn valuation_of_power_minus_one(a: u64, d: u64, p: u64, cap: u32) -> u32 {
    let modulus = BigUint::from(p).pow(cap);
    let x = BigUint::from(a).modpow(&BigUint::from(d), &modulus);
    // x ≡ a^d (mod p^cap); a^d − 1 ≡ x − 1.
    let mut y = if x.is_zero() { &modulus - 1u32 } else { x - 1u32 };
    if y.is_zero() {
        return cap;
    }
    let mut v = 0;
    let pb = BigUint::from(p);
    loop {
        let (q, r) = y.div_rem(&pb);
        if !r.is_zero() {
            return v;
        }
        v += 1;
        y = q;
    }
}

/// `ord_{2^e}(a)` for odd `a`: the order divides `2^{e−1}`, so square until
/// reaching 1.
fn order_mod_two_power(a: &BigUint, e: u32) -> BigUint {
    let modulus = BigUint::one() << e;
    let mut x = a % &modulus;
    let mut ord = BigUint::one();
    while !x.is_one() {
        x = (&x * &x) % &modulus;
        ord <<= 1u32;
    }
    ord
}

/// Order of `a` modulo the integer represented by `f`, as the lcm of the
/// prime-power orders.
pub fn order_by_crt(a: u64, f: &Factorization) -> Result<BigUint, NumTheoryError> {
    order_mod_factored(&BigUint::from(a), f)
}

/// [`order_by_crt`] for a big base `a`.
pub fn order_mod_factored(a: &BigUint, f: &Factorization) -> Result<BigUint, NumTheoryError> {
    let mut acc = BigUint::one();
    for &(p, e) in f.factors() {
        let rem = (a % p).to_u64().unwrap();
        if rem == 0 {
            return Err(NumTheoryError::NotCoprime { a: a.to_string(), n: f.value().to_string() });
        }
        let o = if p == 2 {
            order_mod_two_power(a, e)
        } else {
            let d = order_mod_prime(rem, p);
            let k = valuation_big(a, d, p, e);
            let mut o = BigUint::from(d);
            if e > k {
                o *= BigUint::from(p).pow(e - k);
            }
            o
        };
        acc = acc.lcm(&o);
    }
    Ok(acc)
}

fn valuation_big(a: &BigUint, d: u64, p: u64, cap: u32) -> u32 {
    let modulus = BigUint::from(p).pow(cap);
    let x = a.modpow(&BigUint::from(d), &modulus);
    let mut y = if x.is_zero() { &modulus - 1u32 } else { x - 1u32 };
    if y.is_zero() {
        return cap;
    }
    let pb = BigUint::from(p);
    let mut v = 0;
    loop {
        let (q, r) = y.div_rem(&pb);
        if !r.is_zero() {
            return v;
        }
        v += 1;
        y = q;
    }
}

/// `k(b, q)`: the largest `k` with `q^k | b^{ord_q(b)} − 1`.
pub fn k_of(b: u64, q: u64) -> Result<u32, NumTheoryError> {
    if !is_prime(q) || q == 2 {
        return Err(NumTheoryError::InvalidArgument(format!("{q} is not an odd prime")));
    }
    if b % q == 0 {
        return Err(NumTheoryError::NotCoprime { a: b.to_string(), n: q.to_string() });
    }
    let d = order_mod_prime(b, q);
    let mut x = BigUint::from(b).pow(d as u32) - 1u32;
    let qb = BigUint::from(q);
    let mut k = 0;
    loop {
        let (quot, r) = x.div_rem(&qb);
        if !r.is_zero() {
            return Ok(k);
        }
        k += 1;
        x = quot;
    }
}
