//! Prime schedules and mixed-radix digits.
//!
//! A schedule is a strictly increasing list of primes `q_1 < q_2 < …` (with
//! `q_1 >= 7`) and multiplicities `ℓ_1, ℓ_2, …`. Writing
//! `L_s = ℓ_1 + … + ℓ_s`, the induced bases are `M_n = q_{s+1}` for
//! `L_s < n <= L_{s+1}`, so `M_1⋯M_{L_r} = N_r = q_1^{ℓ_1}⋯q_r^{ℓ_r}`.
//!
//! Bases are 1-indexed (`M_1, M_2, …`) while digits are 0-indexed
//! (`d_0, d_1, …`): digit index `n` uses base `M_{n+1}`, and
//! `N = d_0 + d_1 M_1 + d_2 M_1 M_2 + …`.

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::primes::{is_prime, next_prime};
use crate::ErrorClass;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RadixError {
    #[error("no prime in window [{lo}, {hi}] for level {level}")]
    NoPrimeInWindow { level: usize, lo: u64, hi: u64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("position {n} outside the schedule (covered range 1..={max})")]
    OutOfRange { n: usize, max: usize },
    #[error("schedule too short: {0}")]
    ScheduleTooShort(String),
}

impl RadixError {
    pub fn class(&self) -> ErrorClass {
        match self {
            RadixError::NoPrimeInWindow { .. }
            | RadixError::InvalidParameter(_)
            | RadixError::OutOfRange { .. }
            | RadixError::ScheduleTooShort(_) => ErrorClass::Precondition,
        }
    }
}

/// How the primes of a schedule were chosen.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScheduleVariant {
    /// Consecutive primes 7, 11, 13, 17, …
    NthPrimeFrom7,
    /// The smallest prime in `[(n+offset)^3, (n+offset+1)^3]` for each level.
    CubeWindow { offset: u64 },
    /// Any strictly increasing primes `>= 7`.
    Custom,
}

impl ScheduleVariant {
    /// True when the variant replaces a constant of the construction with a
    /// user-chosen value and reports must say so.
    pub fn deviates_from_construction(&self) -> bool {
        matches!(self, ScheduleVariant::CubeWindow { .. })
    }

    pub fn label(&self) -> String {
        match self {
            ScheduleVariant::NthPrimeFrom7 => "nth-prime-from-7".into(),
            ScheduleVariant::CubeWindow { offset } => format!("cube-window(offset={offset})"),
            ScheduleVariant::Custom => "custom".into(),
        }
    }
}

/// A finite prime schedule with its partial sums `L_s` and products `N_r`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrimeSchedule {
    d: u32,
    variant: ScheduleVariant,
    q: Vec<u64>,
    ell: Vec<usize>,
    l_sums: Vec<usize>,
    n_prod: Vec<BigUint>,
}

/// On-disk form of a schedule. `L` and `N` are optional on input; when present
/// they must match the values recomputed from `q` and `ell`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleFile {
    pub d: u32,
    pub variant: ScheduleVariant,
    pub q: Vec<u64>,
    pub ell: Vec<usize>,
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub l_sums: Option<Vec<usize>>,
    #[serde(rename = "N", default, skip_serializing_if = "Option::is_none")]
    pub n_prod: Option<Vec<String>>,
}

impl PrimeSchedule {
    /// Builds and validates a schedule from explicit primes and multiplicities.
    pub fn new(
        d: u32,
        variant: ScheduleVariant,
        q: Vec<u64>,
        ell: Vec<usize>,
    ) -> Result<Self, RadixError> {
        if d == 0 {
            return Err(RadixError::InvalidParameter("d must be positive".into()));
        }
        if q.is_empty() {
            return Err(RadixError::InvalidParameter("schedule needs at least one prime".into()));
        }
        if q.len() != ell.len() {
            return Err(RadixError::InvalidParameter(format!(
                "{} primes but {} multiplicities",
                q.len(),
                ell.len()
            )));
        }
        if q[0] < 7 {
            return Err(RadixError::InvalidParameter(format!("q_1 = {} < 7", q[0])));
        }
        for (i, &p) in q.iter().enumerate() {
            if !is_prime(p) {
                return Err(RadixError::InvalidParameter(format!("q_{} = {p} is not prime", i + 1)));
            }
            if i > 0 && q[i - 1] >= p {
                return Err(RadixError::InvalidParameter("primes must be strictly increasing".into()));
            }
        }
        if let Some(i) = ell.iter().position(|&e| e == 0) {
            return Err(RadixError::InvalidParameter(format!("ℓ_{} must be positive", i + 1)));
        }
        match &variant {
            ScheduleVariant::NthPrimeFrom7 => {
                let mut p = 7;
                for (i, &qi) in q.iter().enumerate() {
                    if qi != p {
                        return Err(RadixError::InvalidParameter(format!(
                            "q_{} = {qi} but the consecutive-prime variant requires {p}",
                            i + 1
                        )));
                    }
                    p = next_prime(p + 1).expect("prime below 2^64");
                }
            }
            ScheduleVariant::CubeWindow { offset } => {
                for (i, &qi) in q.iter().enumerate() {
                    let (lo, hi) = cube_window(i + 1, *offset)?;
                    if qi < lo || qi > hi {
                        return Err(RadixError::InvalidParameter(format!(
                            "q_{} = {qi} outside its window [{lo}, {hi}]",
                            i + 1
                        )));
                    }
                }
            }
            ScheduleVariant::Custom => {}
        }
        let mut l_sums = Vec::with_capacity(q.len() + 1);
        let mut n_prod = Vec::with_capacity(q.len() + 1);
        l_sums.push(0);
        n_prod.push(BigUint::one());
        for (i, (&p, &e)) in q.iter().zip(&ell).enumerate() {
            l_sums.push(l_sums[i] + e);
            n_prod.push(&n_prod[i] * BigUint::from(p).pow(e as u32));
        }
        Ok(Self { d, variant, q, ell, l_sums, n_prod })
    }

    /// Growth exponent `d`.
    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn variant(&self) -> &ScheduleVariant {
        &self.variant
    }

    /// The primes `q_1, …, q_r` (index `i` holds `q_{i+1}`).
    pub fn q(&self) -> &[u64] {
        &self.q
    }

    /// The multiplicities `ℓ_1, …, ℓ_r` (index `i` holds `ℓ_{i+1}`).
    pub fn ell(&self) -> &[usize] {
        &self.ell
    }

    /// Partial sums `L_0 = 0, L_1, …, L_r`.
    pub fn l_sums(&self) -> &[usize] {
        &self.l_sums
    }

    /// Products `N_0 = 1, N_1, …, N_r`.
    pub fn n_products(&self) -> &[BigUint] {
        &self.n_prod
    }

    /// Number of primes `r`.
    pub fn count(&self) -> usize {
        self.q.len()
    }

    /// Number of bases `L_r = ℓ_1 + … + ℓ_r`.
    pub fn depth(&self) -> usize {
        *self.l_sums.last().unwrap()
    }

    /// `q_r` for 1-indexed `r`.
    pub fn prime(&self, r: usize) -> u64 {
        self.q[r - 1]
    }

    /// `ℓ_r` for 1-indexed `r`.
    pub fn multiplicity(&self, r: usize) -> usize {
        self.ell[r - 1]
    }

    /// Splits a 1-indexed base position `n = L_s + j + 1` into `(s, j)`.
    pub fn level_of(&self, n: usize) -> Result<(usize, usize), RadixError> {
        if n == 0 || n > self.depth() {
            return Err(RadixError::OutOfRange { n, max: self.depth() });
        }
        // Largest s with L_s < n.
        let s = self.l_sums.partition_point(|&l| l < n) - 1;
        Ok((s, n - self.l_sums[s] - 1))
    }

    /// The base `M_n` (1-indexed).
    pub fn base_at(&self, n: usize) -> Result<u64, RadixError> {
        let (s, _) = self.level_of(n)?;
        Ok(self.q[s])
    }

    /// Iterator over `M_1, …, M_{L_r}`.
    pub fn bases(&self) -> impl Iterator<Item = u64> + '_ {
        self.q
            .iter()
            .zip(&self.ell)
            .flat_map(|(&p, &e)| std::iter::repeat_n(p, e))
    }

    /// `M_1⋯M_n = N_s·q_{s+1}^j` where `n = L_s + j`; `n = 0` gives 1.
    pub fn radix_product(&self, n: usize) -> Result<BigUint, RadixError> {
        if n > self.depth() {
            return Err(RadixError::OutOfRange { n, max: self.depth() });
        }
        if n == self.depth() {
            return Ok(self.n_prod.last().unwrap().clone());
        }
        let s = self.l_sums.partition_point(|&l| l <= n) - 1;
        let j = n - self.l_sums[s];
        Ok(&self.n_prod[s] * BigUint::from(self.q[s]).pow(j as u32))
    }

    /// `max_n q_n / n^d` over the schedule, a witness constant for the growth
    /// condition `q_n <= C·n^d`.
    pub fn growth_constant(&self) -> f64 {
        self.q
            .iter()
            .enumerate()
            .map(|(i, &p)| p as f64 / ((i + 1) as f64).powi(self.d as i32))
            .fold(0.0, f64::max)
    }

    pub fn to_file(&self) -> ScheduleFile {
        ScheduleFile {
            d: self.d,
            variant: self.variant.clone(),
            q: self.q.clone(),
            ell: self.ell.clone(),
            l_sums: Some(self.l_sums.clone()),
            n_prod: Some(self.n_prod.iter().map(|n| n.to_string()).collect()),
        }
    }

    pub fn from_file(f: ScheduleFile) -> Result<Self, RadixError> {
        let s = Self::new(f.d, f.variant, f.q, f.ell)?;
        if let Some(l) = f.l_sums {
            if l != s.l_sums {
                return Err(RadixError::InvalidParameter("stored L does not match q/ell".into()));
            }
        }
        if let Some(n) = f.n_prod {
            let ours: Vec<String> = s.n_prod.iter().map(|x| x.to_string()).collect();
            if n != ours {
                return Err(RadixError::InvalidParameter("stored N does not match q/ell".into()));
            }
        }
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("schedule serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, RadixError> {
        let f: ScheduleFile = serde_json::from_str(s)
            .map_err(|e| RadixError::InvalidParameter(format!("schedule JSON: {e}")))?;
        Self::from_file(f)
    }
}

/// Level multiplicities for [`build_schedule_with`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EllRule {
    /// `ℓ_r = r^d`, the default.
    Power,
    /// `ℓ_r = k` for every level.
    Constant(usize),
    /// Explicit list; its length must equal the prime count.
    Explicit(Vec<usize>),
}

/// `[(n+offset)^3, (n+offset+1)^3]`.
fn cube_window(n: usize, offset: u64) -> Result<(u64, u64), RadixError> {
    let a = (n as u64)
        .checked_add(offset)
        .ok_or_else(|| RadixError::InvalidParameter("window overflow".into()))?;
    let lo = a.checked_pow(3);
    let hi = (a + 1).checked_pow(3);
    match (lo, hi) {
        (Some(lo), Some(hi)) => Ok((lo, hi)),
        _ => Err(RadixError::InvalidParameter("cube window exceeds 64 bits".into())),
    }
}

/// Builds a schedule with the default multiplicities `ℓ_r = r^d`.
pub fn build_schedule(
    d: u32,
    count: usize,
    variant: ScheduleVariant,
) -> Result<PrimeSchedule, RadixError> {
    build_schedule_with(d, count, variant, EllRule::Power)
}

/// Builds a schedule with an explicit multiplicity rule.
pub fn build_schedule_with(
    d: u32,
    count: usize,
    variant: ScheduleVariant,
    ell: EllRule,
) -> Result<PrimeSchedule, RadixError> {
    if count == 0 {
        return Err(RadixError::InvalidParameter("count must be at least 1".into()));
    }
    if d == 0 {
        return Err(RadixError::InvalidParameter("d must be positive".into()));
    }
    let q = match &variant {
        ScheduleVariant::NthPrimeFrom7 => {
            let mut q = Vec::with_capacity(count);
            let mut p = 7;
            for _ in 0..count {
                q.push(p);
                p = next_prime(p + 1).expect("prime below 2^64");
            }
            q
        }
        ScheduleVariant::CubeWindow { offset } => {
            if *offset == 0 {
                return Err(RadixError::InvalidParameter("cube-window offset must be >= 1".into()));
            }
            let mut q = Vec::with_capacity(count);
            for n in 1..=count {
                let (lo, hi) = cube_window(n, *offset)?;
                match next_prime(lo) {
                    Some(p) if p <= hi => q.push(p),
                    _ => return Err(RadixError::NoPrimeInWindow { level: n, lo, hi }),
                }
            }
            q
        }
        ScheduleVariant::Custom => {
            return Err(RadixError::InvalidParameter(
                "custom schedules are built with PrimeSchedule::new".into(),
            ))
        }
    };
    let ell = match ell {
        EllRule::Power => (1..=count)
            .map(|r| {
                (r as u64)
                    .checked_pow(d)
                    .and_then(|v| usize::try_from(v).ok())
                    .ok_or_else(|| RadixError::InvalidParameter("ℓ_r = r^d overflows".into()))
            })
            .collect::<Result<Vec<_>, _>>()?,
        EllRule::Constant(k) => vec![k; count],
        EllRule::Explicit(v) => v,
    };
    PrimeSchedule::new(d, variant, q, ell)
}

/// Mixed-radix digits `d_0, d_1, …` of a non-negative integer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MixedRadixDigits {
    pub digits: Vec<u64>,
}

impl MixedRadixDigits {
    /// `Σ d_n·M_1⋯M_n`, evaluated by Horner's rule.
    pub fn reconstruct(&self, s: &PrimeSchedule) -> Result<BigUint, RadixError> {
        let bases: Vec<u64> = s.bases().take(self.digits.len()).collect();
        if bases.len() + 1 < self.digits.len() {
            return Err(RadixError::ScheduleTooShort(format!(
                "{} digits need {} bases",
                self.digits.len(),
                self.digits.len() - 1
            )));
        }
        let mut acc = BigUint::zero();
        for (i, &d) in self.digits.iter().enumerate().rev() {
            if i < self.digits.len() - 1 {
                acc *= bases[i];
            }
            acc += d;
        }
        Ok(acc)
    }
}

/// Digits of `n` with trailing zeros trimmed (zero has no digits).
pub fn to_digits(n: &BigUint, s: &PrimeSchedule) -> Result<MixedRadixDigits, RadixError> {
    let mut digits = Vec::new();
    let mut rest = n.clone();
    let mut bases = s.bases();
    while !rest.is_zero() {
        match bases.next() {
            Some(m) => {
                let (q, r) = rest.div_rem(&BigUint::from(m));
                digits.push(r.to_u64().unwrap());
                rest = q;
            }
            None => {
                // The last digit may use the full remaining quotient only if it
                // fits below the (non-existent) next base, which never holds.
                return Err(RadixError::ScheduleTooShort(format!(
                    "{n} needs more than {} bases",
                    s.depth()
                )));
            }
        }
    }
    Ok(MixedRadixDigits { digits })
}

/// The first `len` digits of `n`, zero-padded; digits beyond position `len`
/// are discarded, so this is the digit string of `n mod M_1⋯M_len`.
pub fn to_digits_padded(
    n: &BigUint,
    s: &PrimeSchedule,
    len: usize,
) -> Result<MixedRadixDigits, RadixError> {
    if len > s.depth() {
        return Err(RadixError::ScheduleTooShort(format!(
            "{len} digits requested, schedule has {} bases",
            s.depth()
        )));
    }
    let mut digits = Vec::with_capacity(len);
    let mut rest = n.clone();
    for m in s.bases().take(len) {
        if rest.is_zero() {
            digits.push(0);
            continue;
        }
        let (q, r) = rest.div_rem(&BigUint::from(m));
        digits.push(r.to_u64().unwrap());
        rest = q;
    }
    Ok(MixedRadixDigits { digits })
}

/// Whether `a ≡ b (mod M_1⋯M_n)`, which holds exactly when the first `n`
/// digits of `a` and `b` agree.
pub fn digits_congruent(
    a: &BigUint,
    b: &BigUint,
    n: usize,
    s: &PrimeSchedule,
) -> Result<bool, RadixError> {
    let m = s.radix_product(n)?;
    Ok(a % &m == b % &m)
}
