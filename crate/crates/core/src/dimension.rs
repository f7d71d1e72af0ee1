//! Dimension diagnostics for the convolved constructions: the scale index
//! `h(r)`, the three convolved digit systems, the sparse index set `𝒩`,
//! exact ball-measure bounds, local-dimension series and `h(r)` rates.
//!
//! Scales are handled through `u = ln(1/r)`. Gauges are evaluated as
//! `ln φ`, so very large or very small values never overflow.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::{BigRational, Ratio};
use num_traits::{One, Pow, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Exec;
use crate::fourier::{DigitLevel, FourierError, MoranSystem};
use crate::measure::SamplePoint;
use crate::numeric::{big_ratio, ln_biguint, ln_ratio};
use crate::radix::{PrimeSchedule, ScheduleVariant};
use crate::ErrorClass;

/// Interior verification points per `h`-cell, besides the cell top.
pub const CELL_POINTS: usize = 16;

/// Default burn-in for running minima of local-dimension series.
pub const DEFAULT_BURN_IN: usize = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DimError {
    #[error("schedule too short: {0}")]
    ScheduleTooShort(String),
    #[error("out of range: {0}")]
    OutOfRange(String),
    #[error("gauge too small: {0}")]
    GaugeTooSmall(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Fourier(#[from] FourierError),
}

impl DimError {
    pub fn class(&self) -> ErrorClass {
        match self {
            DimError::Fourier(e) => e.class(),
            _ => ErrorClass::Precondition,
        }
    }
}

/// A gauge function `φ`, evaluated as `ln φ(r)` at `u = ln(1/r)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Gauge {
    /// `r^s`.
    Power { s: f64 },
    /// `r·(ln(1/r))^c`.
    RTimesLogPower { c: f64 },
    /// `r·H(r)` with `H(r) = exp(c·(ln(1/r)/ln ln(1/r))^{1/4})`.
    RTimesH { c: f64 },
    /// Points `(r, φ(r))`, interpolated linearly in log-log coordinates.
    Table { points: Vec<(f64, f64)> },
}

/// `ln H(r)` at `u = ln(1/r)`; needs `u > 1`.
pub fn ln_h_factor(c: f64, u: f64) -> Option<f64> {
    (u > 1.0).then(|| c * (u / u.ln()).powf(0.25))
}

impl Gauge {
    pub fn ln_phi(&self, u: f64) -> Option<f64> {
        if !(u > 0.0) {
            return None;
        }
        match self {
            Gauge::Power { s } => Some(-s * u),
            Gauge::RTimesLogPower { c } => Some(-u + c * u.ln()),
            Gauge::RTimesH { c } => ln_h_factor(*c, u).map(|lh| lh - u),
            Gauge::Table { points } => {
                let mut pts: Vec<(f64, f64)> = points
                    .iter()
                    .filter(|(r, p)| *r > 0.0 && *p > 0.0)
                    .map(|(r, p)| (-r.ln(), p.ln()))
                    .collect();
                pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                let i = pts.partition_point(|p| p.0 < u);
                if i < pts.len() && pts[i].0 == u {
                    return Some(pts[i].1);
                }
                if i == 0 || i == pts.len() {
                    return None;
                }
                let (a, b) = (pts[i - 1], pts[i]);
                Some(a.1 + (b.1 - a.1) * (u - a.0) / (b.0 - a.0))
            }
        }
    }

    /// `ln(φ(r)/r)`.
    pub fn ln_g(&self, u: f64) -> Option<f64> {
        self.ln_phi(u).map(|l| l + u)
    }

    /// Checks on the decades `r = 10^{-k}`, `k = 1..=decades`, that `φ` is
    /// increasing in `r` and `r/φ(r)` decreases towards zero.
    pub fn check_vanishing_ratio(&self, decades: u32) -> bool {
        let us: Vec<f64> = (1..=decades).map(|k| k as f64 * std::f64::consts::LN_10).collect();
        let vals: Option<Vec<(f64, f64)>> =
            us.iter().map(|&u| Some((self.ln_phi(u)?, self.ln_g(u)?))).collect();
        match vals {
            Some(v) if v.len() >= 2 => v.windows(2).all(|w| w[1].0 < w[0].0 && w[1].1 > w[0].1),
            _ => false,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Gauge::Power { s } => format!("r^{s}"),
            Gauge::RTimesLogPower { c } => format!("r*log(1/r)^{c}"),
            Gauge::RTimesH { c } => format!("r*H(r), c={c}"),
            Gauge::Table { points } => format!("table({} points)", points.len()),
        }
    }
}

/// `M_1⋯M_n` for `n = 0..=depth`.
fn products(s: &PrimeSchedule) -> Vec<BigUint> {
    let mut out = Vec::with_capacity(s.depth() + 1);
    let mut p = BigUint::one();
    out.push(p.clone());
    for m in s.bases() {
        p *= m;
        out.push(p.clone());
    }
    out
}

/// `ln(M_1⋯M_n)` for `n = 0..=depth`.
fn log_products(s: &PrimeSchedule) -> Vec<f64> {
    let mut out = vec![0.0];
    let mut acc = 0.0;
    for m in s.bases() {
        acc += (m as f64).ln();
        out.push(acc);
    }
    out
}

/// The integer `h` with `(M_1⋯M_{h+1})^{-1} < r <= (M_1⋯M_h)^{-1}`.
pub fn h_of_r(r: &BigRational, s: &PrimeSchedule) -> Result<usize, DimError> {
    let m1 = BigRational::new(BigInt::one(), BigInt::from(s.prime(1)));
    if r <= &BigRational::zero() || r > &m1 {
        return Err(DimError::OutOfRange(format!("r = {r} is not in (0, 1/M_1]")));
    }
    let num = r.numer().magnitude();
    let den = r.denom().magnitude();
    // r·P <= 1 ⇔ num·P <= den; h is the last n where this holds.
    let mut p = BigUint::one();
    for (n, m) in s.bases().enumerate() {
        p *= m;
        if num * &p > *den {
            return Ok(n);
        }
    }
    Err(DimError::ScheduleTooShort(format!(
        "r = {r} needs more than {} levels",
        s.depth()
    )))
}

/// Which of the three constructions a [`ConvolvedSystem`] follows.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConvolvedVariant {
    /// `a_n = 2⌊M_n/4⌋` on every level.
    DimOne,
    /// `ℰ_n = {0, 2, …, 2⌊M_n/4⌋}` on `𝒩`, `{0, …, M_n − 2}` off it, with
    /// `g = φ/r`.
    Gauge { gauge: Gauge },
    /// `a_n = 2⌊M_n/4⌋` on `𝒩` and `M_n − 3` off it, with `g = φ/(r·H_c)`.
    Extreme { gauge: Gauge, c: f64 },
}

/// One element of `𝒩` and how it was placed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SparseIndex {
    /// Position in `𝒩`, from 1.
    pub k: usize,
    pub n: usize,
    /// The `h`-cell where `g̃` first reaches `2^k`.
    pub cell: usize,
    /// True when the index sits one level later than `cell + 1` because `g̃`
    /// reaches `2^k` only inside the cell.
    pub delayed: bool,
}

/// The set `𝒩` with its certificate `2^{#𝒜_r} <= g(r)` on the verification
/// grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SparseIndexSet {
    pub indices: Vec<SparseIndex>,
    pub depth: usize,
    pub grid_points: usize,
    /// `min (ln g(r) − #𝒜_r·ln 2)` over the grid.
    pub min_slack: f64,
    pub certified: bool,
}

impl SparseIndexSet {
    pub fn contains(&self, n: usize) -> bool {
        self.indices.binary_search_by_key(&n, |i| i.n).is_ok()
    }

    /// `#([1, h + 1] ∩ 𝒩)`.
    pub fn count_upto(&self, h: usize) -> usize {
        self.indices.partition_point(|i| i.n <= h + 1)
    }

    pub fn members(&self) -> Vec<usize> {
        self.indices.iter().map(|i| i.n).collect()
    }
}

/// Grid of `u` values over the cells `h = 1..depth−1`: each cell's top
/// `u = ln(M_1⋯M_h)` and `CELL_POINTS` interior points.
fn cell_grid(logp: &[f64], depth: usize) -> Vec<(usize, f64)> {
    let mut grid = Vec::new();
    for h in 1..depth {
        let (a, b) = (logp[h], logp[h + 1]);
        grid.push((h, a));
        for i in 1..=CELL_POINTS {
            grid.push((h, a + (b - a) * i as f64 / (CELL_POINTS + 1) as f64));
        }
    }
    grid
}

/// Builds `𝒩` up to `depth` for `ln g` given as a function of `u = ln(1/r)`.
///
/// `g` is replaced by its monotone envelope `g̃(r) = inf_{t <= r} g(t)` on
/// the grid. The `k`-th index goes to the first cell (at or after the cell
/// of the previous index) where `g̃ >= 2^k`: to `h + 1` if that already holds
/// at the cell top, to `h + 2` otherwise. Either way every `r` whose `𝒜_r`
/// contains the `k`-th index has `g̃(r) >= 2^k`.
pub fn sparse_index_set(
    ln_g: impl Fn(f64) -> Option<f64>,
    s: &PrimeSchedule,
    depth: usize,
) -> Result<SparseIndexSet, DimError> {
    if depth > s.depth() {
        return Err(DimError::ScheduleTooShort(format!(
            "depth {depth} exceeds the {} levels of the schedule",
            s.depth()
        )));
    }
    if depth < 3 {
        return Err(DimError::InvalidArgument("depth must be at least 3".into()));
    }
    let logp = log_products(s);
    let grid = cell_grid(&logp, depth);
    let raw: Vec<f64> = grid
        .iter()
        .map(|&(_, u)| {
            ln_g(u).ok_or_else(|| DimError::OutOfRange(format!("gauge undefined at ln(1/r) = {u}")))
        })
        .collect::<Result<_, _>>()?;
    let mut env = raw.clone();
    for i in (0..env.len().saturating_sub(1)).rev() {
        env[i] = env[i].min(env[i + 1]);
    }
    let first = env[0];
    let last = *env.last().unwrap();
    if last.is_nan() || last - first < std::f64::consts::LN_2 {
        return Err(DimError::GaugeTooSmall(format!(
            "g grows only from {:.4} to {:.4} over the schedule",
            first.exp(),
            last.exp()
        )));
    }

    let ln2 = std::f64::consts::LN_2;
    let mut indices: Vec<SparseIndex> = Vec::new();
    let mut start = 0usize;
    loop {
        let k = indices.len() + 1;
        let target = k as f64 * ln2;
        let Some(off) = env[start..].iter().position(|&v| v >= target) else { break };
        let i = start + off;
        let (cell, _) = grid[i];
        let at_top = i == 0 || grid[i - 1].0 != cell;
        let n = if at_top { cell + 1 } else { cell + 2 };
        if n > depth {
            break;
        }
        indices.push(SparseIndex { k, n, cell, delayed: !at_top });
        // The next index must land strictly later: search from the cell
        // whose top activates level n + 1.
        let next_cell = n;
        match grid.iter().position(|&(h, _)| h >= next_cell) {
            Some(p) => start = p,
            None => break,
        }
    }
    if indices.is_empty() {
        return Err(DimError::GaugeTooSmall("g never reaches 2 within the schedule".into()));
    }

    let set = SparseIndexSet {
        indices,
        depth,
        grid_points: grid.len(),
        min_slack: f64::INFINITY,
        certified: false,
    };
    let mut min_slack = f64::INFINITY;
    for (&(h, _), &lg) in grid.iter().zip(&raw) {
        let slack = lg - set.count_upto(h) as f64 * ln2;
        min_slack = min_slack.min(slack);
    }
    Ok(SparseIndexSet { min_slack, certified: min_slack >= 0.0, ..set })
}

/// The digit systems of a convolution `μ∗ν` with `μ` the binary half-weight
/// measure.
#[derive(Clone, Debug)]
pub struct ConvolvedSystem {
    pub variant: ConvolvedVariant,
    /// `μ` on `𝒟_n = {0, 1}`.
    pub mu: MoranSystem,
    /// `ν` on `ℰ_n`, uniform.
    pub nu: MoranSystem,
    /// `λ = μ∗ν` on `ℱ_n = 𝒟_n + ℰ_n`.
    pub lambda: MoranSystem,
    /// Equal weights on `ℱ_n`.
    pub eta: MoranSystem,
    pub sparse: Option<SparseIndexSet>,
}

fn quarter(m: u64) -> u64 {
    2 * (m / 4)
}

/// Builds the convolved system on the first `depth` levels of `s`.
pub fn build_convolved(
    s: &PrimeSchedule,
    depth: usize,
    variant: ConvolvedVariant,
) -> Result<ConvolvedSystem, DimError> {
    if depth > s.depth() {
        return Err(DimError::ScheduleTooShort(format!(
            "depth {depth} exceeds the {} levels of the schedule",
            s.depth()
        )));
    }
    let sparse = match &variant {
        ConvolvedVariant::DimOne => None,
        ConvolvedVariant::Gauge { gauge } => Some(sparse_index_set(|u| gauge.ln_g(u), s, depth)?),
        ConvolvedVariant::Extreme { gauge, c } => Some(sparse_index_set(
            |u| Some(gauge.ln_g(u)? - ln_h_factor(*c, u)?),
            s,
            depth,
        )?),
    };
    let in_n = |n: usize| sparse.as_ref().map_or(true, |sp| sp.contains(n));
    let (mut e, mut lam, mut eta) = (Vec::new(), Vec::new(), Vec::new());
    for (i, m) in s.bases().take(depth).enumerate() {
        let n = i + 1;
        if in_n(n) {
            let a = quarter(m);
            e.push(DigitLevel::UniformStep { count: a / 2 + 1, step: 2 });
            lam.push(DigitLevel::UniformStep { count: a + 2, step: 1 });
            eta.push(DigitLevel::UniformStep { count: a + 2, step: 1 });
        } else if matches!(variant, ConvolvedVariant::Gauge { .. }) {
            e.push(DigitLevel::UniformStep { count: m - 1, step: 1 });
            lam.push(DigitLevel::EndpointHalf { m });
            eta.push(DigitLevel::UniformStep { count: m, step: 1 });
        } else {
            let a = m - 3;
            e.push(DigitLevel::UniformStep { count: a / 2 + 1, step: 2 });
            lam.push(DigitLevel::UniformStep { count: a + 2, step: 1 });
            eta.push(DigitLevel::UniformStep { count: a + 2, step: 1 });
        }
    }
    let mu = MoranSystem::new(s.clone(), vec![DigitLevel::binary_half(); depth])?;
    Ok(ConvolvedSystem {
        variant,
        mu,
        nu: MoranSystem::new(s.clone(), e)?,
        lambda: MoranSystem::new(s.clone(), lam)?,
        eta: MoranSystem::new(s.clone(), eta)?,
        sparse,
    })
}

/// Per-level check of `λ_n` against the exact convolution of the uniform
/// weights on `𝒟_n` and `ℰ_n`. Sums are distinct on the even digit sets;
/// the gauge construction's `ℰ_n = {0, …, M_n − 2}` levels reach interior
/// digits twice, which is where the halved endpoint weights come from.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvolutionCheck {
    pub level: usize,
    pub distinct_sums: bool,
    pub weights_match: bool,
}

impl ConvolvedSystem {
    pub fn depth(&self) -> usize {
        self.lambda.depth()
    }

    pub fn schedule(&self) -> &PrimeSchedule {
        self.lambda.schedule()
    }

    pub fn verify_convolution(&self) -> Vec<ConvolutionCheck> {
        (1..=self.depth())
            .map(|n| {
                let d = self.mu.level(n);
                let e = self.nu.level(n);
                let f = self.lambda.level(n);
                let mut sums: Vec<(u64, Ratio<u64>)> = Vec::new();
                for (dd, wd) in d.digits().into_iter().zip(d.weights()) {
                    for (ee, we) in e.digits().into_iter().zip(e.weights()) {
                        sums.push((dd + ee, wd * we));
                    }
                }
                sums.sort_by_key(|p| p.0);
                let distinct_sums = sums.windows(2).all(|w| w[0].0 != w[1].0);
                let mut merged: Vec<(u64, Ratio<u64>)> = Vec::new();
                for (x, w) in sums {
                    match merged.last_mut() {
                        Some(last) if last.0 == x => last.1 += w,
                        _ => merged.push((x, w)),
                    }
                }
                let weights_match = merged.len() as u64 == f.len()
                    && merged.iter().all(|(x, w)| f.weight_of(*x) == Some(*w));
                ConvolutionCheck { level: n, distinct_sums, weights_match }
            })
            .collect()
    }

    /// `#ℱ_n`; every `ℱ_n` here is `{0, …, #ℱ_n − 1}`.
    fn f_count(&self, n: usize) -> u64 {
        self.eta.level(n).len()
    }
}

/// Number of integers `j` in `[0, N]` whose mixed-radix digits over the first
/// `n` bases (most significant first) satisfy `d_k < f_k`.
fn count_admissible_le(nv: &BigInt, bases: &[u64], f: &[u64]) -> BigUint {
    if nv.sign() == num_bigint::Sign::Minus {
        return BigUint::zero();
    }
    let total: BigUint = bases.iter().map(|&m| BigUint::from(m)).product();
    let mut nv = nv.magnitude().clone();
    if nv >= total {
        return f.iter().map(|&c| BigUint::from(c)).product();
    }
    let mut digits = vec![0u64; bases.len()];
    for i in (0..bases.len()).rev() {
        let (q, r) = nv.div_rem(&BigUint::from(bases[i]));
        digits[i] = r.to_u64().unwrap();
        nv = q;
    }
    // suffix[i] = f_{i+1}⋯f_n
    let mut suffix = vec![BigUint::one(); bases.len() + 1];
    for i in (0..bases.len()).rev() {
        suffix[i] = &suffix[i + 1] * f[i];
    }
    let mut count = BigUint::zero();
    for i in 0..bases.len() {
        count += &suffix[i + 1] * digits[i].min(f[i]);
        if digits[i] >= f[i] {
            return count;
        }
    }
    count + 1u32
}

/// Exact upper bound for `η(B(x, r))` by level-`(h(r)+1)` basic intervals.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BallMeasure {
    pub h: usize,
    /// Basic intervals of level `h + 1` overlapping `[x − r, x + r]` in
    /// positive length.
    pub count: String,
    /// `⌈2r·M_1⋯M_{h+1}⌉ + 1`, the most integers an open interval of length
    /// `2rP + 1` can hold. It never exceeds `4rP`.
    pub count_bound: String,
    /// `2(⌊r·M_1⋯M_{h+1}⌋ + 1)`, which a ball can exceed by one when
    /// `{rP} >= 1/2`.
    pub two_floor_count_bound: String,
    #[serde(skip)]
    pub interval_mass: BigRational,
    #[serde(skip)]
    pub bound: BigRational,
    /// Mass of the level-`(h+1)` interval containing `x`, or zero when `x` is
    /// outside the support.
    #[serde(skip)]
    pub own_interval_mass: BigRational,
}

pub fn ball_measure(x: &BigRational, r: &BigRational, cs: &ConvolvedSystem) -> Result<BallMeasure, DimError> {
    if x < &BigRational::zero() || x > &BigRational::one() {
        return Err(DimError::OutOfRange(format!("x = {x} is not in [0, 1]")));
    }
    let h = h_of_r(r, cs.schedule())?;
    let n = h + 1;
    if n > cs.depth() {
        return Err(DimError::ScheduleTooShort(format!(
            "level {n} is beyond the {} levels of the system",
            cs.depth()
        )));
    }
    let bases: Vec<u64> = cs.schedule().bases().take(n).collect();
    let f: Vec<u64> = (1..=n).map(|k| cs.f_count(k)).collect();
    let p: BigUint = bases.iter().map(|&m| BigUint::from(m)).product();
    let pr = BigRational::from_integer(BigInt::from(p.clone()));
    // η has no atoms, so only intervals overlapping the ball in positive
    // length count: (x−r)P − 1 < j < (x+r)P.
    let hi = ((x + r) * &pr).ceil().to_integer() - 1;
    let lo = ((x - r) * &pr).floor().to_integer();
    let count = count_admissible_le(&hi, &bases, &f) - count_admissible_le(&(lo - 1), &bases, &f);
    let fp: BigUint = f.iter().map(|&c| BigUint::from(c)).product();
    let interval_mass = big_ratio(BigUint::one(), fp);
    let bound = BigRational::from_integer(BigInt::from(count.clone())) * &interval_mass;
    let count_bound: BigInt = (r * &pr * BigRational::from_integer(2.into())).ceil().to_integer() + 1;
    let two_floor_count_bound: BigInt = ((r * &pr).floor().to_integer() + 1) * 2;

    // x lies in the interval of its first n digits when they are admissible.
    let j = (x * &pr).floor().to_integer();
    let at = |v: &BigInt| count_admissible_le(v, &bases, &f);
    let own = if j < BigInt::from(p.clone()) && at(&j) != at(&(&j - 1)) {
        interval_mass.clone()
    } else if !j.is_zero() && (x * &pr).is_integer() && at(&(&j - 1)) != at(&(&j - 2)) {
        // x is the right end of the interval j − 1.
        interval_mass.clone()
    } else {
        BigRational::zero()
    };
    Ok(BallMeasure {
        h,
        count: count.to_string(),
        count_bound: count_bound.to_string(),
        two_floor_count_bound: two_floor_count_bound.to_string(),
        interval_mass,
        bound,
        own_interval_mass: own,
    })
}

impl BallMeasure {
    pub fn count_value(&self) -> BigUint {
        self.count.parse().unwrap()
    }

    pub fn count_bound_value(&self) -> BigUint {
        self.count_bound.parse().unwrap()
    }

    pub fn two_floor_count_bound_value(&self) -> BigUint {
        self.two_floor_count_bound.parse().unwrap()
    }
}

/// Exact test of `bound <= C·r^s` for rational `s = p/q`, as
/// `(bound/C)^q <= r^p`.
pub fn power_mass_check(bound: &BigRational, r: &BigRational, constant: u64, s: Ratio<u64>) -> bool {
    let q = *s.denom() as u32;
    let p = *s.numer() as u32;
    let lhs: BigRational = Pow::pow(bound / BigRational::from_integer(BigInt::from(constant)), q);
    let rhs: BigRational = Pow::pow(r.clone(), p);
    lhs <= rhs
}

/// `bound / (C·φ(r))`, in floating point through logarithms.
pub fn gauge_mass_ratio(bound: &BigRational, r: &BigRational, constant: f64, gauge: &Gauge) -> Option<f64> {
    if bound.is_zero() {
        return Some(0.0);
    }
    let u = -ln_ratio(r);
    let lphi = gauge.ln_phi(u)?;
    Some((ln_ratio(bound) - constant.ln() - lphi).exp())
}

/// One row of a mass-distribution grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MassRow {
    pub x_seed: u64,
    pub r_num: String,
    pub r_den: String,
    pub h_r: usize,
    pub ball_measure_num: String,
    pub ball_measure_den: String,
    pub phi_r: f64,
    pub ratio: f64,
}

/// Ball bounds for every `(point, r)` pair, compared with `C·φ(r)`.
pub fn mass_grid(
    points: &[SamplePoint],
    r_grid: &[BigRational],
    cs: &ConvolvedSystem,
    constant: f64,
    gauge: &Gauge,
    exec: Exec,
) -> Result<Vec<MassRow>, DimError> {
    let pairs: Vec<(usize, usize)> =
        (0..points.len()).flat_map(|i| (0..r_grid.len()).map(move |j| (i, j))).collect();
    exec.map(&pairs, |&(i, j)| {
        let r = &r_grid[j];
        let b = ball_measure(&points[i].value(), r, cs)?;
        let u = -ln_ratio(r);
        let lphi = gauge
            .ln_phi(u)
            .ok_or_else(|| DimError::OutOfRange(format!("gauge undefined at r = {r}")))?;
        let ratio = gauge_mass_ratio(&b.bound, r, constant, gauge).unwrap();
        Ok(MassRow {
            x_seed: points[i].seed,
            r_num: r.numer().to_string(),
            r_den: r.denom().to_string(),
            h_r: b.h,
            ball_measure_num: b.bound.numer().to_string(),
            ball_measure_den: b.bound.denom().to_string(),
            phi_r: lphi.exp(),
            ratio,
        })
    })
    .into_iter()
    .collect()
}

/// `ln(1/r)`-spaced grid of `count` rationals `1/⌈e^u⌉` strictly inside the
/// cells `1..depth−1` of the schedule.
pub fn log_spaced_grid(s: &PrimeSchedule, depth: usize, count: usize) -> Result<Vec<BigRational>, DimError> {
    if depth > s.depth() || depth < 2 {
        return Err(DimError::ScheduleTooShort(format!("depth {depth} is not usable")));
    }
    let p = products(s);
    let (lo, hi) = (ln_biguint(&p[1]), ln_biguint(&p[depth]));
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let u = lo + (hi - lo) * (i as f64 + 0.5) / count as f64;
        // e^u as a big integer, built from a 52-bit mantissa.
        let bits = (u / std::f64::consts::LN_2).floor();
        let shift = (bits - 52.0).max(0.0);
        let mant = (u - shift * std::f64::consts::LN_2).exp().round() as u64;
        let den = BigUint::from(mant.max(1)) << (shift as u64);
        let den = den.max(p[1].clone());
        let den = den.min(&p[depth] - 1u32);
        out.push(big_ratio(BigUint::one(), den));
    }
    Ok(out)
}

/// A term of `ln λ(I_n(x)) / ln((M_1⋯M_n)^{-1})`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalDimRow {
    pub n: usize,
    pub term: f64,
    /// Minimum of the terms from the burn-in on, once it is reached.
    pub running_min: Option<f64>,
}

pub fn local_dim_series(x: &SamplePoint, sys: &MoranSystem, burn_in: usize) -> Result<Vec<LocalDimRow>, DimError> {
    if x.depth > sys.depth() {
        return Err(DimError::ScheduleTooShort(format!(
            "point has {} digits but the system {} levels",
            x.depth,
            sys.depth()
        )));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    let mut min: Option<f64> = None;
    let mut rows = Vec::with_capacity(x.depth);
    for (i, (&d, m)) in x.digits.iter().zip(sys.schedule().bases()).enumerate() {
        let n = i + 1;
        let w = sys.level(n).weight_of(d).ok_or_else(|| {
            DimError::InvalidArgument(format!("digit {d} at level {n} is not in the digit set"))
        })?;
        num -= (*w.numer() as f64).ln() - (*w.denom() as f64).ln();
        den += (m as f64).ln();
        let term = num / den;
        if n >= burn_in {
            min = Some(min.map_or(term, |v: f64| v.min(term)));
        }
        rows.push(LocalDimRow { n, term, running_min: min });
    }
    Ok(rows)
}

/// A row of the `h(r)` rate table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HRateRow {
    pub ln_inv_r: f64,
    pub h: usize,
    /// `h(r)/ln(1/r)`.
    pub ratio: f64,
    /// `h(r)·ln ln(1/r)/ln(1/r)`, reported for cube-window schedules.
    pub band: Option<f64>,
}

pub fn h_rate_report(s: &PrimeSchedule, r_grid: &[BigRational]) -> Result<Vec<HRateRow>, DimError> {
    let cube = matches!(s.variant(), ScheduleVariant::CubeWindow { .. });
    r_grid
        .iter()
        .map(|r| {
            let h = h_of_r(r, s)?;
            let u = -ln_ratio(r);
            Ok(HRateRow {
                ln_inv_r: u,
                h,
                ratio: h as f64 / u,
                band: (cube && u > 1.0).then(|| h as f64 * u.ln() / u),
            })
        })
        .collect()
}

/// `r = (M_1⋯M_k)^{-1}` for `k = 1..=k_max`.
pub fn product_grid(s: &PrimeSchedule, k_max: usize) -> Result<Vec<BigRational>, DimError> {
    if k_max > s.depth() {
        return Err(DimError::ScheduleTooShort(format!(
            "k_max {k_max} exceeds the {} levels of the schedule",
            s.depth()
        )));
    }
    let p = products(s);
    Ok((1..=k_max).map(|k| big_ratio(BigUint::one(), p[k].clone())).collect())
}

/// True when the ratios strictly decrease along the rows.
pub fn strictly_decreasing(rows: &[HRateRow]) -> bool {
    rows.windows(2).all(|w| w[1].ratio < w[0].ratio)
}
