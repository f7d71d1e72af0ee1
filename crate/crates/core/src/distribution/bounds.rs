//! Digit-count bounds over well-distributed sets.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::One;
use serde::Serialize;

use super::{check_level, DigitProjection, DistributionError};
use crate::fourier::in_middle_third;
use crate::numeric::{big_ratio, binomial};
use crate::numtheory::{alpha_pow6, c_tilde_lower_bound, BaseContext};

/// `#B_k` for `k = 0..=u`.
#[derive(Clone, Debug, Serialize)]
pub struct BkHistogram {
    pub u: u64,
    pub counts: Vec<u64>,
    /// `#Y_{r0,r}`.
    pub y_size: u64,
}

/// Counts, for each element of a well-distributed `Λ`, how many coordinates
/// of `Π_{r0,r}` fall in `[⌊q/3⌋, 2⌊q/3⌋]`.
pub fn classify_bk(
    lambda: &[u64],
    m: u64,
    ctx: &BaseContext,
    r: usize,
) -> Result<BkHistogram, DistributionError> {
    check_level(ctx, r)?;
    let proj = DigitProjection::pi(ctx, m, ctx.r0, r)?;
    let y_size = proj.target_size().ok_or_else(|| {
        DistributionError::TooLarge("#Y_{r0,r} does not fit in 64 bits".into())
    })?;
    if lambda.len() as u64 != y_size {
        return Err(DistributionError::NotWellDistributed(format!(
            "#Λ = {} but #Y = {y_size}",
            lambda.len()
        )));
    }
    let mut hit = vec![false; y_size as usize];
    let u = proj.positions.len() as u64;
    let mut counts = vec![0u64; u as usize + 1];
    for &n in lambda {
        if n <= m {
            return Err(DistributionError::InvalidRange(format!("{n} is not above m = {m}")));
        }
        let key = proj.key(n);
        if std::mem::replace(&mut hit[key as usize], true) {
            return Err(DistributionError::NotWellDistributed(format!(
                "Π(n) repeats at n = {n}"
            )));
        }
        let k = proj
            .digits(n)
            .iter()
            .zip(&proj.radices)
            .filter(|(&d, &q)| in_middle_third(d, q))
            .count();
        counts[k] += 1;
    }
    Ok(BkHistogram { u, counts, y_size })
}

/// `C(k) = binom(u,k)·#Y·(1/2)^k·(2/3)^{u−k}`.
pub fn c_bound(k: u64, u: u64, y_size: &BigUint) -> BigRational {
    assert!(k <= u, "k = {k} exceeds u = {u}");
    let num = binomial(u, k) * y_size * BigUint::from(2u32).pow((u - k) as u32);
    let den = BigUint::from(2u32).pow(k as u32) * BigUint::from(3u32).pow((u - k) as u32);
    big_ratio(num, den)
}

/// [`c_bound`] with `u` and `#Y` taken from `Π_{r0,r}`.
pub fn c_bound_for(k: u64, ctx: &BaseContext, r: usize) -> Result<BigRational, DistributionError> {
    check_level(ctx, r)?;
    let u = ctx.free_digits(ctx.r0, r);
    if k > u {
        return Err(DistributionError::InvalidRange(format!("k = {k} exceeds u = {u}")));
    }
    Ok(c_bound(k, u, &ctx.free_product(ctx.r0, r)))
}

/// Outcome of comparing `C(k) < C(k+1)` with `7k < 3u − 4`.
#[derive(Clone, Debug, Serialize)]
pub struct MonotonicityReport {
    pub u_max: u64,
    pub pairs_checked: u64,
    /// `(u, k)` pairs where the two sides disagree.
    pub mismatches: Vec<(u64, u64)>,
}

/// Checks the crossover `C(k) < C(k+1) ⟺ 7k < 3u − 4` for all `1 <= u <= u_max`
/// and `0 <= k < u`, with exact rationals. `#Y` cancels, so it is set to 1.
pub fn monotonicity_check(u_max: u64) -> MonotonicityReport {
    let one = BigUint::one();
    let mut mismatches = Vec::new();
    let mut pairs = 0;
    for u in 1..=u_max {
        let cs: Vec<BigRational> = (0..=u).map(|k| c_bound(k, u, &one)).collect();
        for k in 0..u {
            pairs += 1;
            let lhs = cs[k as usize] < cs[k as usize + 1];
            let rhs = (7 * k as i64) < (3 * u as i64 - 4);
            if lhs != rhs {
                mismatches.push((u, k));
            }
        }
    }
    MonotonicityReport { u_max, pairs_checked: pairs, mismatches }
}

/// Both sides of `C(⌊u/6⌋) ≤ C̃·#Y·u·α^u` with `#Y` cancelled.
#[derive(Clone, Debug, Serialize)]
pub struct StirlingCheck {
    pub u: u64,
    /// `binom(u,⌊u/6⌋)·(1/2)^⌊u/6⌋·(2/3)^{u−⌊u/6⌋}` as an `f64` log.
    pub ln_lhs: f64,
    /// Log of the exact lower bound used for the right side.
    pub ln_rhs: f64,
    pub holds: bool,
}

/// Exact check of the `u`-dependent inequality. The right side is replaced by
/// the smaller rational `C̃_lo·u·(α⁶)^⌈u/6⌉` (`α < 1`, and `C̃_lo ≤ C̃`), so
/// `holds` implies the original inequality.
pub fn stirling_check(u: u64) -> StirlingCheck {
    let k = u / 6;
    let lhs = c_bound(k, u, &BigUint::one());
    let a6 = alpha_pow6();
    let e = u.div_ceil(6) as u32;
    let pow = BigRational::new(a6.numer().pow(e), a6.denom().pow(e));
    let rhs = c_tilde_lower_bound() * BigRational::from_integer(BigInt::from(u)) * pow;
    StirlingCheck {
        u,
        ln_lhs: crate::numeric::ln_ratio(&lhs),
        ln_rhs: crate::numeric::ln_ratio(&rhs),
        holds: lhs <= rhs,
    }
}
