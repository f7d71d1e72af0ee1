//! Exact sampling from Cantor–Moran measures, base-`b` digit statistics of the
//! sampled points, and the interval-avoidance test behind the uniqueness
//! criterion.
//!
//! Randomness comes from ChaCha20 keyed by the little-endian seed (see
//! [`rng_from_seed`]); a batch point `i` uses seed `seed ^ i`, so every point
//! can be replayed on its own.

use std::collections::HashMap;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use serde::Serialize;
use thiserror::Error;

use crate::exec::Exec;
use crate::fourier::MoranSystem;
use crate::numeric::big_ratio;
use crate::ErrorClass;

/// Default number of guard digits withheld at the end of a truncated expansion.
pub const DEFAULT_GUARD: u64 = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("schedule too short: {0}")]
    ScheduleTooShort(String),
    #[error("not in support: {0}")]
    NotInSupport(String),
    #[error("invalid interval: {0}")]
    InvalidInterval(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl MeasureError {
    pub fn class(&self) -> ErrorClass {
        ErrorClass::Precondition
    }
}

/// ChaCha20 with key = seed (little endian) followed by zeros.
pub fn rng_from_seed(seed: u64) -> ChaCha20Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    ChaCha20Rng::from_seed(key)
}

/// Uniform integer in `[0, n)` by rejection.
pub fn uniform_below(rng: &mut impl RngCore, n: u64) -> u64 {
    assert!(n > 0);
    let limit = (u64::MAX / n) * n;
    loop {
        let x = rng.next_u64();
        if x < limit {
            return x % n;
        }
    }
}

/// A point `Σ d_n/(M_1⋯M_n)` with `depth` drawn digits.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SamplePoint {
    pub digits: Vec<u64>,
    pub depth: usize,
    pub seed: u64,
    /// `Σ d_n·M_{n+1}⋯M_depth`.
    pub numerator: BigUint,
    /// `M_1⋯M_depth`.
    pub denominator: BigUint,
}

impl SamplePoint {
    pub fn value(&self) -> BigRational {
        big_ratio(self.numerator.clone(), self.denominator.clone())
    }
}

/// Draws `depth` independent digits with the level weights.
pub fn sample_point(sys: &MoranSystem, seed: u64, depth: usize) -> Result<SamplePoint, MeasureError> {
    if depth > sys.depth() {
        return Err(MeasureError::ScheduleTooShort(format!(
            "depth {depth} exceeds the {} levels of the system",
            sys.depth()
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut below = |n: u64| uniform_below(&mut rng, n);
    let digits: Vec<u64> = (1..=depth).map(|n| sys.level(n).sample(&mut below)).collect();
    let (numerator, denominator) = sys.point_from_digits(&digits);
    Ok(SamplePoint { digits, depth, seed, numerator, denominator })
}

/// `count` points with seeds `seed ^ i`, in index order.
pub fn sample_batch(
    sys: &MoranSystem,
    seed: u64,
    depth: usize,
    count: u64,
    exec: Exec,
) -> Result<Vec<SamplePoint>, MeasureError> {
    exec.map_range(0..count, |i| sample_point(sys, seed ^ i, depth)).into_iter().collect()
}

/// Base-`b` digits of a number in `[0, 1)` together with how many of them are
/// reported.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BaseDigits {
    pub base: u64,
    pub requested: u64,
    /// Only the first `trusted` digits are returned.
    pub digits: Vec<u64>,
    pub trusted: u64,
}

/// Long division of `num/den` in base `b`: digits and the remainder before
/// each digit (so the orbit point `{bᵏx}` is `rem[k]/den`).
fn long_division(num: &BigUint, den: &BigUint, b: u64, count: u64) -> (Vec<u64>, Vec<BigUint>) {
    let mut rem = num.clone();
    let mut digits = Vec::with_capacity(count as usize);
    let mut rems = Vec::with_capacity(count as usize);
    for _ in 0..count {
        rems.push(rem.clone());
        let (q, r) = (rem * b).div_rem(den);
        digits.push(q.to_u64().expect("digit < b"));
        rem = r;
    }
    (digits, rems)
}

fn split(x: &BigRational) -> Result<(BigUint, BigUint), MeasureError> {
    if x < &BigRational::zero() || x >= &BigRational::one() {
        return Err(MeasureError::InvalidArgument(format!("{x} is not in [0, 1)")));
    }
    Ok((x.numer().magnitude().clone(), x.denom().magnitude().clone()))
}

/// `⌊log_b n⌋` for `n >= 1`.
fn ilog(n: &BigUint, b: u64) -> u64 {
    let mut k = 0;
    let mut p = BigUint::from(b);
    while &p <= n {
        p *= b;
        k += 1;
    }
    k
}

/// Digits `⌊b^{k+1}x⌋ mod b` for `k < count`.
///
/// With `truncation = None`, `x` is taken as exact and every digit is
/// trusted. With `truncation = Some(P)`, `x` stands for an unknown point of
/// `[x, x + 1/P)`: the trusted count is the smaller of `⌊log_b P⌋ − guard`
/// and the common digit prefix of `x` and `x + 1/P`, so no trusted digit can
/// change under the truncation.
pub fn base_digits(
    x: &BigRational,
    b: u64,
    count: u64,
    truncation: Option<&BigUint>,
    guard: u64,
) -> Result<BaseDigits, MeasureError> {
    if b < 2 {
        return Err(MeasureError::InvalidArgument("base must be at least 2".into()));
    }
    let (num, den) = split(x)?;
    let (mut digits, _) = long_division(&num, &den, b, count);
    let trusted = match truncation {
        None => count,
        Some(p) => {
            let cap = ilog(p, b).saturating_sub(guard).min(count);
            let upper = x + big_ratio(BigUint::one(), p.clone());
            let prefix = if upper >= BigRational::one() {
                // Every digit of x is b − 1 up to the first that is not.
                digits.iter().take_while(|&&d| d == b - 1).count() as u64
            } else {
                let (un, ud) = (upper.numer().magnitude().clone(), upper.denom().magnitude().clone());
                let (up, _) = long_division(&un, &ud, b, cap);
                digits.iter().zip(&up).take_while(|(a, c)| a == c).count() as u64
            };
            cap.min(prefix)
        }
    };
    digits.truncate(trusted as usize);
    Ok(BaseDigits { base: b, requested: count, digits, trusted })
}

/// Finite-sample digit statistics in one base.
#[derive(Clone, Debug, Serialize)]
pub struct NormalityReport {
    pub base: u64,
    pub trusted_digit_count: u64,
    pub counts: Vec<u64>,
    pub frequencies: Vec<f64>,
    /// `max_d |freq_d − 1/b|`.
    pub max_deviation: f64,
    /// Star discrepancy of `{bᵏx}`, `k < trusted`, over a 64-bin grid.
    pub discrepancy: f64,
    /// Whether the expansion was seen to repeat within the examined digits.
    pub periodic: bool,
}

pub const DISCREPANCY_BINS: u64 = 64;

/// Reports for each base. `count` digits are examined per base, of which the
/// trusted prefix enters the statistics.
pub fn normality_report(
    x: &BigRational,
    bases: &[u64],
    count: u64,
    truncation: Option<&BigUint>,
    guard: u64,
) -> Result<Vec<NormalityReport>, MeasureError> {
    let (num, den) = split(x)?;
    let mut out = Vec::with_capacity(bases.len());
    for &b in bases {
        let bd = base_digits(x, b, count, truncation, guard)?;
        let k = bd.trusted;
        let (_, rems) = long_division(&num, &den, b, k);
        let mut counts = vec![0u64; b as usize];
        for &d in &bd.digits {
            counts[d as usize] += 1;
        }
        let frequencies: Vec<f64> = counts
            .iter()
            .map(|&c| if k == 0 { 0.0 } else { c as f64 / k as f64 })
            .collect();
        let max_deviation = frequencies
            .iter()
            .map(|f| (f - 1.0 / b as f64).abs())
            .fold(0.0, f64::max);

        let mut bins = vec![0u64; DISCREPANCY_BINS as usize];
        for r in &rems {
            let bin = (r * DISCREPANCY_BINS / &den).to_u64().unwrap();
            bins[bin as usize] += 1;
        }
        let mut cum = 0u64;
        let mut discrepancy = 0.0f64;
        if k > 0 {
            for (i, c) in bins.iter().enumerate() {
                cum += c;
                let edge = (i + 1) as f64 / DISCREPANCY_BINS as f64;
                discrepancy = discrepancy.max((cum as f64 / k as f64 - edge).abs());
            }
        }

        let mut seen: HashMap<&BigUint, usize> = HashMap::new();
        let periodic = rems.iter().enumerate().any(|(i, r)| seen.insert(r, i).is_some());
        out.push(NormalityReport {
            base: b,
            trusted_digit_count: k,
            counts,
            frequencies,
            max_deviation,
            discrepancy,
            periodic,
        });
    }
    Ok(out)
}

/// The sequence `k_j` and interval `I` of the avoidance criterion.
#[derive(Clone, Debug, PartialEq)]
pub enum AvoidanceRule {
    /// `k_j = M_1⋯M_j`, `I = (2L, 1)` with `L = sup max 𝒟_n / M_n`.
    StepI { l: BigRational },
    /// `k_j = M_1⋯M_{n_j − 1}`, `I = (c + 1/6, 1)` over the levels `n_j` with
    /// `max 𝒟_n / M_n <= c`.
    StepIII { c: BigRational, subsequence: Vec<usize> },
}

impl AvoidanceRule {
    /// Derives `L` from the system.
    pub fn step_one(sys: &MoranSystem) -> Result<Self, MeasureError> {
        let l = sys.max_digit_ratio();
        if BigRational::from_integer(2.into()) * &l >= BigRational::one() {
            return Err(MeasureError::InvalidInterval(format!("2L = 2·{l} >= 1")));
        }
        Ok(AvoidanceRule::StepI { l })
    }

    /// Derives the subsequence of levels with `(a_n + 1)/M_n < 5/6` and its
    /// largest ratio `c`.
    pub fn step_three(sys: &MoranSystem) -> Result<Self, MeasureError> {
        let five_sixths = BigRational::new(5.into(), 6.into());
        let mut c = BigRational::zero();
        let mut subsequence = Vec::new();
        for (i, m) in sys.schedule().bases().take(sys.depth()).enumerate() {
            let rho = BigRational::new(sys.level(i + 1).max_digit().into(), m.into());
            if rho < five_sixths {
                subsequence.push(i + 1);
                if rho > c {
                    c = rho;
                }
            }
        }
        if subsequence.is_empty() {
            return Err(MeasureError::InvalidInterval(
                "no level with (a_n + 1)/M_n < 5/6".into(),
            ));
        }
        Ok(AvoidanceRule::StepIII { c, subsequence })
    }

    /// Lower end of `I = (lo, 1)`.
    pub fn lower(&self) -> BigRational {
        match self {
            AvoidanceRule::StepI { l } => BigRational::from_integer(2.into()) * l,
            AvoidanceRule::StepIII { c, .. } => c + BigRational::new(1.into(), 6.into()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Verdict {
    Pass { checked: usize },
    Violation { j: usize, fractional_part: String },
}

impl Verdict {
    pub fn first_violation(&self) -> Option<usize> {
        match self {
            Verdict::Pass { .. } => None,
            Verdict::Violation { j, .. } => Some(*j),
        }
    }
}

/// Recovers the digits of `x` from `x·M_1⋯M_depth`, where `depth` is the
/// smallest depth making it an integer, and checks them against the system.
pub fn support_digits(x: &BigRational, sys: &MoranSystem) -> Result<Vec<u64>, MeasureError> {
    let (num, den) = split(x)?;
    let mut p = BigUint::one();
    let mut depth = 0;
    let bases: Vec<u64> = sys.schedule().bases().take(sys.depth()).collect();
    while !(&p % &den).is_zero() {
        if depth == bases.len() {
            return Err(MeasureError::NotInSupport(format!(
                "{x} has no finite expansion within {} levels",
                bases.len()
            )));
        }
        p *= bases[depth];
        depth += 1;
    }
    let mut a = num * (&p / &den);
    let mut digits = vec![0u64; depth];
    for i in (0..depth).rev() {
        let (q, r) = a.div_rem(&BigUint::from(bases[i]));
        digits[i] = r.to_u64().unwrap();
        a = q;
    }
    for (i, &d) in digits.iter().enumerate() {
        if !sys.level(i + 1).contains(d) {
            return Err(MeasureError::NotInSupport(format!(
                "digit {d} at level {} is not in the digit set",
                i + 1
            )));
        }
    }
    Ok(digits)
}

/// Checks `{k_j x} ∉ I` for `j = 1..=j_max` exactly.
pub fn uniqueness_avoidance(
    x: &BigRational,
    sys: &MoranSystem,
    j_max: usize,
    rule: &AvoidanceRule,
) -> Result<Verdict, MeasureError> {
    support_digits(x, sys)?;
    let lo = rule.lower();
    if lo >= BigRational::one() {
        return Err(MeasureError::InvalidInterval(format!("({lo}, 1) is empty")));
    }
    let ks: Vec<usize> = match rule {
        AvoidanceRule::StepI { .. } => (1..=j_max.min(sys.depth())).collect(),
        AvoidanceRule::StepIII { subsequence, .. } => {
            subsequence.iter().take(j_max).map(|&n| n - 1).collect()
        }
    };
    let mut p = BigUint::one();
    let mut level = 0usize;
    let bases: Vec<u64> = sys.schedule().bases().take(sys.depth()).collect();
    for (j, &upto) in ks.iter().enumerate() {
        while level < upto {
            p *= bases[level];
            level += 1;
        }
        let kx = BigRational::from_integer(BigInt::from(p.clone())) * x;
        let f = &kx - kx.floor();
        if f > lo {
            return Ok(Verdict::Violation { j: j + 1, fractional_part: f.to_string() });
        }
    }
    Ok(Verdict::Pass { checked: ks.len() })
}
