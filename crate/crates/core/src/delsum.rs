//! Partial sums of the Davenport–Erdős–LeVeque series
//! `Σ_N N⁻³ Σ_{m,n<N} |μ̂(h(bⁿ − bᵐ))|` and their block decomposition.
//!
//! Fourier moduli are evaluated (possibly in parallel) once per distinct
//! frequency; all accumulation then runs sequentially in a fixed order, so
//! the reported numbers do not depend on the worker count.

use std::collections::HashMap;

use num_bigint::{BigInt, BigUint};
use num_traits::ToPrimitive;
use serde::Serialize;
use thiserror::Error;

use crate::exec::Exec;
use crate::fourier::{mu_hat_modulus, FourierError, MoranSystem};
use crate::numeric::CompensatedSum;
use crate::numtheory::BaseContext;
use crate::ErrorClass;

/// Largest `N_r` for which [`block_trend`] enumerates a block.
pub const BLOCK_GUARD: u64 = 100_000;

/// Label carried by every bound row: the constants are only valid for `r >= r₁`.
pub const REGIME_FLAG: &str = "asymptotic-regime-only";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DelError {
    #[error(transparent)]
    Fourier(#[from] FourierError),
    #[error("too large: {0}")]
    TooLarge(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl DelError {
    pub fn class(&self) -> ErrorClass {
        match self {
            DelError::Fourier(e) => e.class(),
            DelError::TooLarge(_) => ErrorClass::ResourceGuard,
            DelError::InvalidArgument(_) => ErrorClass::Precondition,
        }
    }
}

/// `h·(bⁿ − bᵐ)`.
pub fn frequency(h: i64, b: u64, n: u64, m: u64) -> BigInt {
    let b = BigInt::from(b);
    BigInt::from(h) * (b.pow(n as u32) - b.pow(m as u32))
}

/// One row of the increments table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Increment {
    #[serde(rename = "N")]
    pub n: u64,
    /// `Δ_N = N⁻³ Σ_{m,n<N} |μ̂|`.
    pub increment: f64,
    pub cumulative: f64,
    /// Certified radius of `cumulative`.
    pub radius: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DelReport {
    #[serde(rename = "N_max")]
    pub n_max: u64,
    pub partial_sum: f64,
    pub radius: f64,
    pub increments: Vec<Increment>,
    /// `Σ_{N<=N_max} 1/N²`.
    pub diagonal: f64,
    /// `Σ_{N<=N_max} 2/N³ Σ_{m<n<N} |μ̂|`.
    pub off_diagonal: f64,
    /// Sums of `Δ_N` over `N_{r−1} < N <= N_r`, as `(r, sum)`; the last block
    /// may be cut off at `N_max`.
    pub blocks: Vec<(usize, f64)>,
    /// Number of distinct frequencies evaluated.
    pub distinct_frequencies: usize,
}

/// Interval midpoints and half-widths of `|μ̂(h(bⁿ − bᵐ))|` for `0 <= m < n < n_max`,
/// stored row-major over the strict upper triangle.
struct Table {
    n_max: usize,
    mid: Vec<f64>,
    half: Vec<f64>,
    distinct: usize,
}

impl Table {
    fn idx(&self, m: usize, n: usize) -> usize {
        // Rows m = 0.. hold n = m+1..n_max.
        m * (2 * self.n_max - m - 1) / 2 + (n - m - 1)
    }

    /// `(mid, half)` for any ordered pair; the diagonal is exactly 1.
    fn get(&self, m: usize, n: usize) -> (f64, f64) {
        match m.cmp(&n) {
            std::cmp::Ordering::Equal => (1.0, 0.0),
            std::cmp::Ordering::Less => {
                let i = self.idx(m, n);
                (self.mid[i], self.half[i])
            }
            std::cmp::Ordering::Greater => self.get(n, m),
        }
    }
}

fn build_table(
    sys: &MoranSystem,
    b: u64,
    h: i64,
    n_max: usize,
    term_eps: f64,
    exec: Exec,
) -> Result<Table, DelError> {
    let mut keys: Vec<BigUint> = Vec::new();
    let mut memo: HashMap<BigUint, usize> = HashMap::new();
    let mut slot = Vec::new();
    for m in 0..n_max {
        for n in m + 1..n_max {
            let f = frequency(h, b, n as u64, m as u64).magnitude().clone();
            let next = keys.len();
            let id = *memo.entry(f.clone()).or_insert_with(|| {
                keys.push(f);
                next
            });
            slot.push(id);
        }
    }
    let vals = exec.map(&keys, |f| mu_hat_modulus(&BigInt::from(f.clone()), sys, term_eps));
    let vals: Vec<_> = vals.into_iter().collect::<Result<_, _>>()?;
    let mid = slot.iter().map(|&i| vals[i].mid()).collect();
    let half = slot.iter().map(|&i| 0.5 * vals[i].width()).collect();
    Ok(Table { n_max, mid, half, distinct: keys.len() })
}

/// Harmonic number `H_n`.
fn harmonic(n: u64) -> f64 {
    (1..=n).map(|k| 1.0 / k as f64).sum()
}

/// Partial DEL sum up to `N_max` with a certified radius at most `eps`.
///
/// Each modulus is evaluated to width `eps / H_{N_max}`: the `N`-th
/// increment has `N²` terms weighted by `N⁻³`, so the evaluation error
/// contributes at most `eps/2`, and the rest covers rounding.
pub fn del_partial(
    sys: &MoranSystem,
    b: u64,
    h: i64,
    n_max: u64,
    eps: f64,
    exec: Exec,
) -> Result<DelReport, DelError> {
    if n_max == 0 {
        return Err(DelError::InvalidArgument("N_max must be at least 1".into()));
    }
    if b < 2 || h == 0 {
        return Err(DelError::InvalidArgument(format!("need b >= 2 and h != 0, got b={b}, h={h}")));
    }
    if !(eps > 0.0) {
        return Err(DelError::InvalidArgument(format!("eps = {eps}")));
    }
    let n_max_us = n_max as usize;
    let term_eps = (eps / harmonic(n_max)).min(0.5);
    let t = build_table(sys, b, h, n_max_us, term_eps, exec)?;

    let mut total = CompensatedSum::new();
    let mut eval_radius = 0.0f64;
    let mut increments = Vec::with_capacity(n_max_us);
    for big_n in 1..=n_max_us {
        let mut s = CompensatedSum::new();
        let mut w = 0.0f64;
        for m in 0..big_n {
            for n in 0..big_n {
                let (v, hw) = t.get(m, n);
                s.add(v);
                w += hw;
            }
        }
        let n3 = (big_n as f64).powi(3);
        let inc = s.value() / n3;
        eval_radius += (w + s.error_bound()) / n3 * (1.0 + 4.0 * f64::EPSILON);
        total.add(inc);
        let radius = eval_radius + total.error_bound() + 4.0 * f64::EPSILON * total.value();
        increments.push(Increment { n: big_n as u64, increment: inc, cumulative: total.value(), radius });
    }

    let mut diag = CompensatedSum::new();
    let mut off = CompensatedSum::new();
    for big_n in 1..=n_max_us {
        let n3 = (big_n as f64).powi(3);
        diag.add(1.0 / (big_n as f64).powi(2));
        let mut s = CompensatedSum::new();
        for m in 0..big_n.saturating_sub(1) {
            for n in m + 1..big_n {
                s.add(t.get(m, n).0);
            }
        }
        off.add(2.0 * s.value() / n3);
    }

    let blocks = block_split(sys, &increments);
    let last = increments.last().unwrap();
    Ok(DelReport {
        n_max,
        partial_sum: last.cumulative,
        radius: last.radius,
        diagonal: diag.value(),
        off_diagonal: off.value(),
        increments: increments.clone(),
        blocks,
        distinct_frequencies: t.distinct,
    })
}

fn block_split(sys: &MoranSystem, increments: &[Increment]) -> Vec<(usize, f64)> {
    let nr: Vec<u64> = sys
        .schedule()
        .n_products()
        .iter()
        .map(|x| x.to_u64().unwrap_or(u64::MAX))
        .collect();
    let mut out: Vec<(usize, f64)> = Vec::new();
    for inc in increments {
        // Block r holds N_{r−1} < N <= N_r (N_0 = 1 holds N = 1).
        let r = nr.iter().position(|&x| inc.n <= x).unwrap_or(nr.len());
        match out.last_mut() {
            Some((rr, s)) if *rr == r => *s += inc.increment,
            _ => out.push((r, inc.increment)),
        }
    }
    out
}

/// One row of [`block_trend`].
#[derive(Clone, Debug, Serialize)]
pub struct BlockRow {
    pub r: usize,
    pub m: u64,
    #[serde(rename = "N_r")]
    pub n_r: u64,
    /// `Σ_{n=m+1}^{N_r−1} |μ̂(h bⁿ − h bᵐ)|` (interval midpoint).
    pub block_sum: f64,
    pub radius: f64,
    /// `2A·N_r·e^{−B Σ j_i}`.
    pub block_bound: f64,
    /// `4A·N_r³/N_{r−1}³·e^{−B Σ j_i}`.
    pub bound_with_derived_constants: f64,
    pub regime: &'static str,
}

/// Block sums for every `r` in `r_range` and every `m` in `m_grid`, next to the
/// bounds evaluated with the context's constants. Nothing is asserted.
pub fn block_trend(
    sys: &MoranSystem,
    ctx: &BaseContext,
    r_range: std::ops::RangeInclusive<usize>,
    m_grid: &[u64],
    eps: f64,
    exec: Exec,
) -> Result<Vec<BlockRow>, DelError> {
    let nr = ctx.schedule.n_products();
    let mut rows = Vec::new();
    for r in r_range {
        if r == 0 || r >= nr.len() {
            return Err(DelError::InvalidArgument(format!("r = {r} outside the schedule")));
        }
        let n_r = nr[r].to_u64().filter(|&x| x <= BLOCK_GUARD).ok_or_else(|| {
            DelError::TooLarge(format!("N_{r} = {} exceeds the block guard {BLOCK_GUARD}", nr[r]))
        })?;
        let n_prev = nr[r - 1].to_f64().unwrap();
        let sum_j: f64 =
            (ctx.r0 + 1..=r).map(|i| ctx.j[i - 1].max(0) as f64).sum();
        let decay = (-ctx.b_const * sum_j).exp();
        let key = 2.0 * ctx.a_const * n_r as f64 * decay;
        let block = 4.0 * ctx.a_const * (n_r as f64 / n_prev).powi(3) * decay;
        for &m in m_grid {
            let ns: Vec<u64> = (m + 1..n_r).collect();
            let vals = exec.map(&ns, |&n| {
                mu_hat_modulus(&frequency(ctx.h, ctx.b, n, m), sys, eps)
            });
            let mut s = CompensatedSum::new();
            let mut w = 0.0;
            for v in vals {
                let v = v?;
                s.add(v.mid());
                w += 0.5 * v.width();
            }
            rows.push(BlockRow {
                r,
                m,
                n_r,
                block_sum: s.value(),
                radius: w + s.error_bound(),
                block_bound: key,
                bound_with_derived_constants: block,
                regime: REGIME_FLAG,
            });
        }
    }
    Ok(rows)
}

impl DelReport {
    /// `|full − (diagonal + off_diagonal)|`.
    pub fn symmetry_gap(&self) -> f64 {
        (self.partial_sum - (self.diagonal + self.off_diagonal)).abs()
    }
}
