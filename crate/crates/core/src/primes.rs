//! Deterministic primality for 64-bit integers and trial-division
//! factorization of small integers.

use crate::numeric::{mul_mod, pow_mod};

const MR_BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Miller–Rabin with the first twelve prime bases, which is exact for every
/// `n < 3.3 · 10^24` and therefore for all of `u64`.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &p in &MR_BASES {
        if n % p == 0 {
            return n == p;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for &a in &MR_BASES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Smallest prime `>= n`, if one exists below `u64::MAX`.
pub fn next_prime(n: u64) -> Option<u64> {
    let mut c = n.max(2);
    loop {
        if is_prime(c) {
            return Some(c);
        }
        c = c.checked_add(1)?;
    }
}

/// Prime factorization by trial division, primes increasing.
///
/// Intended for the small integers that occur here (`b`, `h`, `q − 1`,
/// moduli in the brute-force range); cost is `O(√n)` in the worst case.
pub fn factor_u64(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    if n < 2 {
        return out;
    }
    let mut push = |p: u64, n: &mut u64| {
        let mut e = 0;
        while *n % p == 0 {
            *n /= p;
            e += 1;
        }
        if e > 0 {
            out.push((p, e));
        }
    };
    push(2, &mut n);
    push(3, &mut n);
    let mut p = 5u64;
    while p.saturating_mul(p) <= n {
        push(p, &mut n);
        push(p + 2, &mut n);
        p += 6;
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

/// Largest prime factor, or 1 for `n <= 1`.
pub fn largest_prime_factor(n: u64) -> u64 {
    factor_u64(n).last().map(|&(p, _)| p).unwrap_or(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sieve(limit: usize) -> Vec<bool> {
        let mut is = vec![true; limit + 1];
        is[0] = false;
        if limit >= 1 {
            is[1] = false;
        }
        let mut i = 2;
        while i * i <= limit {
            if is[i] {
                let mut j = i * i;
                while j <= limit {
                    is[j] = false;
                    j += i;
                }
            }
            i += 1;
        }
        is
    }

    #[test]
    fn agrees_with_sieve() {
        let s = sieve(200_000);
        for (n, &p) in s.iter().enumerate() {
            assert_eq!(is_prime(n as u64), p, "n = {n}");
        }
    }

    #[test]
    fn large_known_values() {
        assert!(is_prime(18_446_744_073_709_551_557)); // largest 64-bit prime
        assert!(!is_prime(18_446_744_073_709_551_559));
        // Strong pseudoprime to bases 2..=37 products would need > 64 bits;
        // a Carmichael number and a base-2 pseudoprime must be rejected.
        assert!(!is_prime(561));
        assert!(!is_prime(2047));
        assert!(!is_prime(3_215_031_751));
    }

    #[test]
    fn factorization_round_trip() {
        for n in 1..5000u64 {
            let f = factor_u64(n);
            let prod: u64 = f.iter().map(|&(p, e)| p.pow(e)).product();
            assert_eq!(prod, n);
            assert!(f.windows(2).all(|w| w[0].0 < w[1].0));
            assert!(f.iter().all(|&(p, _)| is_prime(p)));
        }
    }

    #[test]
    fn next_prime_values() {
        assert_eq!(next_prime(7), Some(7));
        assert_eq!(next_prime(8), Some(11));
        assert_eq!(next_prime(27), Some(29));
        assert_eq!(next_prime(64), Some(67));
    }
}
