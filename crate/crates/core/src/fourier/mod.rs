//! Certified evaluation of `|μ̂(ξ)|` for Cantor–Moran measures.
//!
//! `μ̂(ξ) = ∏_n M_n(ξ / (M_1⋯M_n))` where `M_n(t) = Σ_d ω_{d,n} e^{−2πidt}`.
//! Every argument is reduced modulo 1 with big-integer arithmetic before any
//! floating-point trigonometry, so `ξ` may be arbitrarily large.

mod system;

pub use system::{DigitLevel, MaskValue, MoranSystem};

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::exec::Exec;
use crate::numeric::ratio_to_f64;
use crate::numtheory::BaseContext;
use crate::radix::to_digits_padded;
use crate::ErrorClass;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FourierError {
    #[error("invalid system: {0}")]
    InvalidSystem(String),
    #[error("tail not certifiable: {0}")]
    TailNotCertifiable(String),
    #[error("interval width {width:e} exceeds eps = {eps:e} at the f64 precision floor")]
    PrecisionFloor { width: f64, eps: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl FourierError {
    pub fn class(&self) -> ErrorClass {
        match self {
            FourierError::InvalidSystem(_) | FourierError::InvalidArgument(_) => {
                ErrorClass::Precondition
            }
            FourierError::TailNotCertifiable(_) | FourierError::PrecisionFloor { .. } => {
                ErrorClass::Certification
            }
        }
    }
}

/// An interval `[lo, hi]` that contains `|μ̂(ξ)|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CertifiedModulus {
    pub lo: f64,
    pub hi: f64,
    /// Number of factors evaluated.
    pub truncation_level: usize,
    /// Lower bound on the log of the unevaluated tail product.
    pub tail_bound_log: f64,
}

impl CertifiedModulus {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// `|M_n(t)|` for an exact rational `t`, reduced mod 1 first.
pub fn mask_modulus(n: usize, t: &BigRational, sys: &MoranSystem) -> Result<MaskValue, FourierError> {
    if n == 0 || n > sys.depth() {
        return Err(FourierError::InvalidArgument(format!(
            "level {n} outside 1..={}",
            sys.depth()
        )));
    }
    let den = t.denom().magnitude().clone();
    let num = t.numer().mod_floor(t.denom()).magnitude().clone();
    let tf = ratio_to_f64(&num, &den);
    Ok(sys.level(n).mask(tf, t_error(tf)))
}

/// Absolute error of `ratio_to_f64`: truncation to 64 bits then one rounding.
fn t_error(t: f64) -> f64 {
    4.0 * f64::EPSILON * t + f64::MIN_POSITIVE
}

/// Upper bound on `log ∏_{n>k} |M_n(ξ/P_n)|⁻¹` given `z ≥ ξ/P_k` with `ξ < P_k`.
///
/// For any digit set in base `M`, `|M(t)| ≥ 1 − 2π²·Var·t²` and
/// `Var ≤ (M−1)²/4`, so the factor at `n = k+i` loses at most
/// `(π²/2)·z²/49^{i−1}` (every base is at least 7). The bound therefore holds
/// for any continuation of the system past level `k`.
fn tail_log_bound(z: f64) -> Option<f64> {
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    let y_max = (0.5 * pi2 * z * z).next_up();
    if y_max >= 0.5 {
        return None;
    }
    let s = (y_max * (49.0 / 48.0)).next_up();
    Some(-(s / (1.0 - y_max)).next_up())
}

/// Certified interval for `|μ̂(ξ)|` of width at most `eps`.
pub fn mu_hat_modulus(
    xi: &BigInt,
    sys: &MoranSystem,
    eps: f64,
) -> Result<CertifiedModulus, FourierError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(FourierError::InvalidArgument(format!("eps = {eps} not in (0, 1)")));
    }
    let x = xi.abs().to_biguint().expect("non-negative");
    if x.is_zero() {
        return Ok(CertifiedModulus { lo: 1.0, hi: 1.0, truncation_level: 0, tail_bound_log: 0.0 });
    }
    let sched = sys.schedule();
    let depth = sys.depth();
    let digits = to_digits_padded(&x, sched, depth)
        .map_err(|e| FourierError::InvalidSystem(e.to_string()))?
        .digits;

    let mut residue = BigUint::zero();
    let mut p = BigUint::from(1u32);
    let mut prod_lo = 1.0f64;
    let mut prod_hi = 1.0f64;
    for (i, (m, d)) in sched.bases().zip(&digits).enumerate() {
        let n = i + 1;
        residue += &p * *d;
        p *= m;
        let t = ratio_to_f64(&residue, &p);
        let mv = sys.level(n).mask(t, t_error(t));
        prod_lo = (prod_lo * (mv.value - mv.radius).max(0.0)).next_down().max(0.0);
        prod_hi = (prod_hi * (mv.value + mv.radius).min(1.0)).next_up().min(1.0);

        if prod_hi <= eps {
            return Ok(CertifiedModulus {
                lo: 0.0,
                hi: prod_hi,
                truncation_level: n,
                tail_bound_log: f64::NEG_INFINITY,
            });
        }
        if x >= p {
            continue;
        }
        // ξ < P_n: the remaining factors are controlled by z = ξ/P_n.
        let z = (ratio_to_f64(&x, &p) * (1.0 + 4.0 * f64::EPSILON)).next_up();
        let Some(tail_log) = tail_log_bound(z) else { continue };
        let tail_loss = -(tail_log.exp_m1()).next_down();
        if tail_loss > eps / 2.0 {
            continue;
        }
        let lo = (prod_lo * (tail_log.exp().next_down())).next_down().max(0.0);
        let width = prod_hi - lo;
        if width > eps {
            return Err(FourierError::PrecisionFloor { width, eps });
        }
        return Ok(CertifiedModulus { lo, hi: prod_hi, truncation_level: n, tail_bound_log: tail_log });
    }
    Err(FourierError::TailNotCertifiable(format!(
        "{depth} levels are not enough for eps = {eps:e} at xi = {xi}"
    )))
}

/// Result of the middle-third digit count.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayBound {
    /// Number of digit positions in the middle-third window.
    pub w: usize,
    /// The constant used per position (the largest one when levels differ).
    pub gamma: f64,
    /// Upper bound on `|μ̂(ξ)|`.
    pub bound: f64,
    /// Positions `n` (digit index, base `M_{n+1}`) that were counted.
    pub positions: Vec<usize>,
}

/// Whether `d` lies in `[⌊q/3⌋, 2⌊q/3⌋]`.
pub fn in_middle_third(d: u64, q: u64) -> bool {
    let a = q / 3;
    a <= d && d <= 2 * a
}

/// `sup_{t ∈ [1/6, 5/6]} |M(t)|` for one level, or `None` when it is not
/// certifiably below 1.
pub fn level_decay_constant(level: &DigitLevel) -> Option<f64> {
    if let DigitLevel::Binary { omega } = level {
        // The sup is attained at t = 1/6 where 1 − cos 2πt = 1/2.
        let w = *omega.numer() as f64 / *omega.denom() as f64;
        let g = (1.0 - w * (1.0 - w)).sqrt();
        return Some((g * (1.0 + 4.0 * f64::EPSILON)).min(1.0)).filter(|g| *g < 1.0);
    }
    const GRID: usize = 1024;
    let (a, b) = (1.0 / 6.0, 5.0 / 6.0);
    let h = (b - a) / (GRID - 1) as f64;
    let mut best = 0.0f64;
    for i in 0..GRID {
        let t = a + h * i as f64;
        let mv = level.mask(t, 0.0);
        best = best.max(mv.value + mv.radius);
    }
    // Between grid points |M| moves by at most 2π·max digit·h/2.
    let margin = std::f64::consts::PI * level.max_digit() as f64 * h;
    let g = best + margin;
    (g < 1.0).then_some(g)
}

/// Counts digits of `ξ` in the middle-third window and returns the product
/// of the per-level decay constants over those positions.
///
/// For two-digit systems whose per-level constants are all at most `ctx.gamma`
/// the bound is `ctx.gamma^w`; otherwise the per-level constants are used.
pub fn digit_decay_bound(
    xi: &BigInt,
    sys: &MoranSystem,
    ctx: &BaseContext,
) -> Result<DecayBound, FourierError> {
    digit_decay_bound_with(xi, sys, ctx.gamma)
}

/// [`digit_decay_bound`] with the weight-bound constant `γ` given directly.
pub fn digit_decay_bound_with(
    xi: &BigInt,
    sys: &MoranSystem,
    ctx_gamma: f64,
) -> Result<DecayBound, FourierError> {
    let x = xi.abs().to_biguint().expect("non-negative");
    let depth = sys.depth();
    let digits = to_digits_padded(&x, sys.schedule(), depth)
        .map_err(|e| FourierError::InvalidSystem(e.to_string()))?
        .digits;
    let bases: Vec<u64> = sys.schedule().bases().take(depth).collect();
    let mut positions = Vec::new();
    let mut consts = Vec::new();
    // Digit d_n has base M_{n+1} and pins frac(ξ/P_{n+1}) to [d_n, d_n+1]/M_{n+1}.
    for (n, (&d, &m)) in digits.iter().zip(&bases).enumerate() {
        if !in_middle_third(d, m) {
            continue;
        }
        let g = level_decay_constant(sys.level(n + 1)).ok_or_else(|| {
            FourierError::InvalidSystem(format!(
                "level {}: sup of |M| on [1/6, 5/6] is not below 1",
                n + 1
            ))
        })?;
        positions.push(n);
        consts.push(g);
    }
    let w = positions.len();
    let use_ctx = sys.binary_weight_bounds().is_some() && consts.iter().all(|&g| g <= ctx_gamma);
    let (gamma, bound) = if use_ctx {
        (ctx_gamma, ctx_gamma.powi(w as i32))
    } else {
        let gmax = consts.iter().copied().fold(0.0, f64::max);
        (gmax, consts.iter().product::<f64>().next_up().min(1.0))
    };
    if w == 0 {
        return Ok(DecayBound { w, gamma: 1.0, bound: 1.0, positions });
    }
    Ok(DecayBound { w, gamma, bound, positions })
}

/// One row of the batch CSV.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BatchRow {
    pub xi: String,
    pub lo: f64,
    pub hi: f64,
    pub truncation_level: usize,
    pub w: usize,
    pub gamma_pow_w: f64,
}

/// Evaluates many frequencies; the output order matches `xis`.
pub fn batch(
    xis: &[BigInt],
    sys: &MoranSystem,
    ctx: &BaseContext,
    eps: f64,
    exec: Exec,
) -> Result<Vec<BatchRow>, FourierError> {
    exec.map(xis, |xi| {
        let m = mu_hat_modulus(xi, sys, eps)?;
        let d = digit_decay_bound(xi, sys, ctx)?;
        Ok(BatchRow {
            xi: xi.to_string(),
            lo: m.lo,
            hi: m.hi,
            truncation_level: m.truncation_level,
            w: d.w,
            gamma_pow_w: d.bound,
        })
    })
    .into_iter()
    .collect()
}
