//! Digit maps of `h·bⁿ − h·bᵐ` and exhaustive checks of the well-distributed
//! partition and its fiber counts.
//!
//! Intervals are closed discrete intervals `{start, …, start + length − 1}`.
//! `bⁿ` is never materialized: every map works on residues modulo
//! `M_1⋯M_N`.

mod bounds;

pub use bounds::{
    c_bound, c_bound_for, classify_bk, monotonicity_check, stirling_check, BkHistogram,
    MonotonicityReport, StirlingCheck,
};

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::exec::{chunks, Exec};
use crate::numeric::{mul_mod, pow_mod};
use crate::numtheory::{BaseContext, NumTheoryError};
use crate::radix::to_digits_padded;
use crate::ErrorClass;

/// Largest interval the exhaustive checks will enumerate.
pub const ENUMERATION_GUARD: u64 = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistributionError {
    #[error("invalid range: {0}")]
    InvalidRange(String),
    #[error("too large: {0}")]
    TooLarge(String),
    #[error("counterexample at n = {n:?}: {detail}")]
    CounterexampleFound { n: Option<u64>, detail: String },
    #[error("not well distributed: {0}")]
    NotWellDistributed(String),
    #[error(transparent)]
    NumTheory(#[from] NumTheoryError),
}

impl DistributionError {
    pub fn class(&self) -> ErrorClass {
        match self {
            DistributionError::InvalidRange(_) | DistributionError::NotWellDistributed(_) => {
                ErrorClass::Precondition
            }
            DistributionError::TooLarge(_) => ErrorClass::ResourceGuard,
            DistributionError::CounterexampleFound { .. } => ErrorClass::Certification,
            DistributionError::NumTheory(e) => e.class(),
        }
    }
}

type Result<T> = std::result::Result<T, DistributionError>;

fn check_m(m: u64, ctx: &BaseContext) -> Result<()> {
    if m + 1 < ctx.n0 {
        return Err(DistributionError::InvalidRange(format!(
            "m = {m} is below n0 − 1 = {}",
            ctx.n0 - 1
        )));
    }
    Ok(())
}

/// The first `n_digits` digits of `h·bⁿ − h·bᵐ` (with `|h|`), from its residue
/// modulo `M_1⋯M_{n_digits}`.
pub fn phi_map(n: u64, m: u64, n_digits: usize, ctx: &BaseContext) -> Result<Vec<u64>> {
    if n <= m {
        return Err(DistributionError::InvalidRange(format!("n = {n} must exceed m = {m}")));
    }
    check_m(m, ctx)?;
    let s = &ctx.schedule;
    let p = s.radix_product(n_digits).map_err(NumTheoryError::from)?;
    let b = BigUint::from(ctx.b);
    let h = BigUint::from(ctx.h_abs());
    let hn = (&h * b.modpow(&BigUint::from(n), &p)) % &p;
    let hm = (&h * b.modpow(&BigUint::from(m), &p)) % &p;
    let v = (hn + &p - hm) % &p;
    Ok(to_digits_padded(&v, s, n_digits).map_err(NumTheoryError::from)?.digits)
}

/// `Π_{c,d}(n)`: the digits of `phi_map` at the j-block positions of levels
/// `c+1, …, d`.
pub fn pi_map(n: u64, m: u64, c: usize, d: usize, ctx: &BaseContext) -> Result<Vec<u64>> {
    let pos = ctx.pi_positions(c, d)?;
    let depth = pos.last().map_or(0, |p| p + 1);
    let digits = phi_map(n, m, depth, ctx)?;
    Ok(pos.iter().map(|&i| digits[i]).collect())
}

/// A digit projection evaluated on `u64` residues.
///
/// Keys enumerate the target product set in mixed radix, first position
/// least significant.
#[derive(Clone, Debug)]
pub struct DigitProjection {
    pub m: u64,
    pub b: u64,
    pub h: u64,
    /// Digit positions (0-indexed), strictly increasing.
    pub positions: Vec<usize>,
    /// Base of each projected position.
    pub radices: Vec<u64>,
    bases: Vec<u64>,
    modulus: u64,
    hbm: u64,
}

impl DigitProjection {
    /// `Φ_N`: every position below `n_digits`.
    pub fn phi(ctx: &BaseContext, m: u64, n_digits: usize) -> Result<Self> {
        Self::with_positions(ctx, m, (0..n_digits).collect())
    }

    /// `Π_{c,d}`.
    pub fn pi(ctx: &BaseContext, m: u64, c: usize, d: usize) -> Result<Self> {
        Self::with_positions(ctx, m, ctx.pi_positions(c, d)?)
    }

    fn with_positions(ctx: &BaseContext, m: u64, positions: Vec<usize>) -> Result<Self> {
        check_m(m, ctx)?;
        if positions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(DistributionError::InvalidRange("positions not increasing".into()));
        }
        let depth = positions.last().map_or(0, |p| p + 1);
        let p = ctx.schedule.radix_product(depth).map_err(NumTheoryError::from)?;
        let modulus = p.to_u64().ok_or_else(|| {
            DistributionError::TooLarge(format!("M_1⋯M_{depth} = {p} does not fit in 64 bits"))
        })?;
        let bases: Vec<u64> = ctx.schedule.bases().take(depth).collect();
        let radices = positions.iter().map(|&i| bases[i]).collect();
        let h = ctx.h_abs() % modulus;
        let hbm = mul_mod(h, pow_mod(ctx.b, m, modulus), modulus);
        Ok(Self { m, b: ctx.b, h: ctx.h_abs(), positions, radices, bases, modulus, hbm })
    }

    /// `M_1⋯M_N` for the deepest projected position.
    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    /// Number of points in the target product set, if it fits in `u64`.
    pub fn target_size(&self) -> Option<u64> {
        self.radices.iter().try_fold(1u64, |a, &r| a.checked_mul(r))
    }

    /// `h·bⁿ mod M_1⋯M_N`.
    fn hbn(&self, n: u64) -> u64 {
        mul_mod(self.h % self.modulus, pow_mod(self.b, n, self.modulus), self.modulus)
    }

    /// `(h·bⁿ − h·bᵐ) mod M_1⋯M_N` given `h·bⁿ mod M_1⋯M_N`.
    fn value_from(&self, hbn: u64) -> u64 {
        (hbn + self.modulus - self.hbm) % self.modulus
    }

    /// Residue of `h·bⁿ − h·bᵐ`.
    pub fn residue(&self, n: u64) -> u64 {
        self.value_from(self.hbn(n))
    }

    fn key_of_value(&self, mut v: u64) -> u64 {
        let mut key = 0u64;
        let mut weight = 1u64;
        let mut next = 0usize;
        for (i, &m) in self.bases.iter().enumerate() {
            let d = v % m;
            v /= m;
            if self.positions.get(next) == Some(&i) {
                key += d * weight;
                weight *= m;
                next += 1;
            }
        }
        key
    }

    /// The projected digits of `n`.
    pub fn digits(&self, n: u64) -> Vec<u64> {
        let mut key = self.key(n);
        self.radices
            .iter()
            .map(|&r| {
                let d = key % r;
                key /= r;
                d
            })
            .collect()
    }

    /// The mixed-radix index of the projected digits of `n`.
    pub fn key(&self, n: u64) -> u64 {
        self.key_of_value(self.residue(n))
    }

    /// Keys for `n = start, …, start + len − 1`, computed in chunks.
    pub fn keys(&self, start: u64, len: u64, exec: Exec) -> Vec<u64> {
        self.stream(start, len, exec, |v| self.key_of_value(v))
    }

    /// Residues for `n = start, …, start + len − 1`.
    pub fn residues(&self, start: u64, len: u64, exec: Exec) -> Vec<u64> {
        self.stream(start, len, exec, |v| v)
    }

    fn stream<F>(&self, start: u64, len: u64, exec: Exec, f: F) -> Vec<u64>
    where
        F: Fn(u64) -> u64 + Sync + Send,
    {
        let parts = chunks(len, 1 << 16);
        let out = exec.map(&parts, |r| {
            let mut x = self.hbn(start + r.start);
            let mut v = Vec::with_capacity((r.end - r.start) as usize);
            for _ in r.clone() {
                v.push(f(self.value_from(x)));
                x = mul_mod(x, self.b % self.modulus, self.modulus);
            }
            v
        });
        out.concat()
    }
}

/// The well-distributed partition of an interval.
#[derive(Clone, Debug, Serialize)]
pub struct PartitionCertificate {
    #[serde(rename = "I_start")]
    pub i_start: u64,
    pub length: u64,
    #[serde(rename = "J")]
    pub j: u64,
    /// `#Y_{r0,r}`.
    #[serde(skip)]
    pub y_size: u64,
    pub class_sizes: Vec<u64>,
    pub ok: bool,
    /// Class index of `i_start + i`.
    #[serde(skip)]
    pub class_of: Vec<u32>,
}

impl PartitionCertificate {
    /// The members of class `c`, in increasing order.
    pub fn class_members(&self, c: u32) -> Vec<u64> {
        self.class_of
            .iter()
            .enumerate()
            .filter(|(_, &k)| k == c)
            .map(|(i, _)| self.i_start + i as u64)
            .collect()
    }
}

fn check_level(ctx: &BaseContext, r: usize) -> Result<()> {
    if r <= ctx.r0 || r > ctx.r_max {
        return Err(DistributionError::InvalidRange(format!(
            "r = {r} outside {}..={}",
            ctx.r0 + 1,
            ctx.r_max
        )));
    }
    Ok(())
}

fn enumerable(order: &BigUint) -> Result<u64> {
    match order.to_u64() {
        Some(x) if x <= ENUMERATION_GUARD => Ok(x),
        _ => Err(DistributionError::TooLarge(format!(
            "interval length {order} exceeds the enumeration guard {ENUMERATION_GUARD}"
        ))),
    }
}

/// Splits `[i_start, i_start + ord_{N_r/Q}(b))` into `J` classes, each mapped
/// bijectively onto `Y_{r0,r}` by `Π_{r0,r}`, and verifies every claim by
/// enumeration. Class `c` collects the `(c+1)`-th preimage of every point.
pub fn verify_partition(
    i_start: u64,
    m: u64,
    ctx: &BaseContext,
    r: usize,
    exec: Exec,
) -> Result<PartitionCertificate> {
    check_level(ctx, r)?;
    if i_start <= m {
        return Err(DistributionError::InvalidRange(format!(
            "I_start = {i_start} must exceed m = {m}"
        )));
    }
    let length = enumerable(&ctx.order(r)?)?;
    let (jq, rem) = ctx.j_quotient(r)?;
    if !rem.is_zero() {
        return Err(DistributionError::CounterexampleFound {
            n: None,
            detail: format!("ord_(N_{r}/Q)(b) = {length} is not a multiple of #Y"),
        });
    }
    let j = jq.to_u64().expect("J <= length");
    let proj = DigitProjection::pi(ctx, m, ctx.r0, r)?;
    let y_size = proj.target_size().expect("#Y <= length");
    let keys = proj.keys(i_start, length, exec);

    let mut seen = vec![0u32; y_size as usize];
    let mut class_of = Vec::with_capacity(keys.len());
    for (i, &k) in keys.iter().enumerate() {
        let c = seen[k as usize];
        if c as u64 >= j {
            return Err(DistributionError::CounterexampleFound {
                n: Some(i_start + i as u64),
                detail: format!("point {k} of Y has more than J = {j} preimages"),
            });
        }
        seen[k as usize] += 1;
        class_of.push(c);
    }
    if let Some(k) = seen.iter().position(|&c| c as u64 != j) {
        return Err(DistributionError::CounterexampleFound {
            n: None,
            detail: format!("point {k} of Y has {} preimages, expected J = {j}", seen[k]),
        });
    }

    // Independent check of the bijection: sort (class, key) and require every
    // class to be exactly 0..#Y.
    let mut pairs: Vec<(u32, u64)> = class_of.iter().copied().zip(keys.iter().copied()).collect();
    pairs.sort_unstable();
    let mut class_sizes = vec![0u64; j as usize];
    for (idx, &(c, k)) in pairs.iter().enumerate() {
        let expect_c = (idx as u64 / y_size) as u32;
        let expect_k = idx as u64 % y_size;
        if c != expect_c || k != expect_k {
            return Err(DistributionError::CounterexampleFound {
                n: None,
                detail: format!("class {c} is not a bijection onto Y at key {k}"),
            });
        }
        class_sizes[c as usize] += 1;
    }
    Ok(PartitionCertificate { i_start, length, j, y_size, class_sizes, ok: true, class_of })
}

/// Image size and injectivity of `Φ_{L_s+j}` for one `j`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ImageCheck {
    pub j: usize,
    /// `ord_{N_s q_{s+1}^j / Q}(b)`.
    pub order: u64,
    /// `#{Φ_{L_s+j}(n) : n ∈ I}`.
    pub distinct: u64,
    /// Whether `Φ_{L_s+j}` is injective on the first `order` points of `I`.
    pub injective_prefix: bool,
}

/// Fiber cardinalities of `Π_{r0,s+1}` on an interval of length
/// `ord_{N_{s+1}/Q}(b)`.
#[derive(Clone, Debug, Serialize)]
pub struct FiberTable {
    pub s: usize,
    pub start: u64,
    pub length: u64,
    /// `#Y_{r0,s}`; equals 1 when `s = r0`.
    pub coarse_size: u64,
    /// `q_{s+1}^{j_{s+1}} = #Y_{s,s+1}`.
    pub block_size: u64,
    /// `#(Π_{r0,s+1}⁻¹{(x,y)} ∩ I)` indexed by `x + #Y_{r0,s}·y`.
    pub fine: Vec<u64>,
    /// `#(Π_{r0,s}⁻¹{x} ∩ I)`.
    pub coarse: Vec<u64>,
    /// Whether `coarse[x] = block_size·fine[(x,y)]` for all `x`, `y`.
    pub product_rule_ok: bool,
    pub images: Vec<ImageCheck>,
    pub ok: bool,
}

/// Counts fibers on `[start, start + length)` and checks the fiber identity
/// for every `(x, y)` together with the image sizes and injectivity of
/// `Φ_{L_s+j}` for `0 <= j <= ℓ_{s+1}`. A wrong `length` is an
/// [`DistributionError::InvalidRange`].
pub fn fiber_counts(
    start: u64,
    length: u64,
    m: u64,
    ctx: &BaseContext,
    s: usize,
    exec: Exec,
) -> Result<FiberTable> {
    if s < ctx.r0 || s >= ctx.r_max {
        return Err(DistributionError::InvalidRange(format!(
            "s = {s} outside {}..{}",
            ctx.r0, ctx.r_max
        )));
    }
    if start <= m {
        return Err(DistributionError::InvalidRange(format!("start {start} must exceed m = {m}")));
    }
    let want = enumerable(&ctx.order(s + 1)?)?;
    if length != want {
        return Err(DistributionError::InvalidRange(format!(
            "interval length {length} differs from ord_(N_{}/Q)(b) = {want}",
            s + 1
        )));
    }
    let proj = DigitProjection::pi(ctx, m, ctx.r0, s + 1)?;
    let total = proj.target_size().expect("fits");
    let block_size = ctx.free_product(s, s + 1).to_u64().expect("fits");
    let coarse_size = total / block_size;

    let keys = proj.keys(start, length, exec);
    let mut fine = vec![0u64; total as usize];
    for &k in &keys {
        fine[k as usize] += 1;
    }
    let mut coarse = vec![0u64; coarse_size as usize];
    for (k, &c) in fine.iter().enumerate() {
        coarse[k % coarse_size as usize] += c;
    }
    let product_rule_ok = fine
        .iter()
        .enumerate()
        .all(|(k, &c)| coarse[k % coarse_size as usize] == block_size * c);

    // Residues modulo N_{s+1} determine Φ_{L_s+j} for every j <= ℓ_{s+1}.
    let full = DigitProjection::phi(ctx, m, ctx.schedule.l_sums()[s + 1])?;
    let residues = full.residues(start, length, exec);
    let mut images = Vec::new();
    for j in 0..=ctx.schedule.multiplicity(s + 1) {
        let modulus = ctx.schedule.radix_product(ctx.schedule.l_sums()[s] + j).map_err(NumTheoryError::from)?;
        let modulus = modulus.to_u64().expect("divides a u64 modulus");
        let order = ctx.order_at(s, j)?.to_u64().expect("divides the interval length");
        let mut all: Vec<u64> = residues.iter().map(|v| v % modulus).collect();
        let mut prefix: Vec<u64> = all[..order.min(length) as usize].to_vec();
        all.sort_unstable();
        all.dedup();
        prefix.sort_unstable();
        prefix.dedup();
        images.push(ImageCheck {
            j,
            order,
            distinct: all.len() as u64,
            injective_prefix: prefix.len() as u64 == order,
        });
    }
    let ok = product_rule_ok && images.iter().all(|c| c.distinct == c.order && c.injective_prefix);
    Ok(FiberTable { s, start, length, coarse_size, block_size, fine, coarse, product_rule_ok, images, ok })
}

/// Number of distinct values of `bⁿ mod modulus` for `n` in `[start, start + len)`.
pub fn distinct_powers(b: u64, modulus: u64, start: u64, len: u64) -> u64 {
    let mut x = pow_mod(b, start, modulus);
    let mut v = Vec::with_capacity(len as usize);
    for _ in 0..len {
        v.push(x);
        x = mul_mod(x, b, modulus);
    }
    v.sort_unstable();
    v.dedup();
    v.len() as u64
}
