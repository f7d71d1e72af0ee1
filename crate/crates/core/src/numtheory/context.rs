use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::order::{k_of, order_mod_factored, Factorization};
use super::NumTheoryError;
use crate::primes::{factor_u64, largest_prime_factor};
use crate::radix::PrimeSchedule;

/// Bounds `C = inf ω_n` and `D = sup ω_n` on the two-digit weights.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightBounds {
    pub c: f64,
    pub d: f64,
}

impl WeightBounds {
    pub fn new(c: f64, d: f64) -> Result<Self, NumTheoryError> {
        if !(c > 0.0 && c <= d && d < 1.0) {
            return Err(NumTheoryError::InvalidArgument(format!(
                "weight bounds need 0 < C <= D < 1, got C = {c}, D = {d}"
            )));
        }
        Ok(Self { c, d })
    }

    pub fn half() -> Self {
        Self { c: 0.5, d: 0.5 }
    }

    /// `γ = sqrt(1 − C(1 − D))`: a two-digit mask at a point whose cosine is
    /// at most 1/2 has modulus at most `γ`.
    pub fn gamma(&self) -> f64 {
        (1.0 - self.c * (1.0 - self.d)).sqrt()
    }
}

/// The constants attached to `(b, h)` and a schedule.
///
/// Levels `r` are 1-indexed throughout; `k[r-1]` holds `k_r`, `j[r-1]` holds
/// `j_r`.
#[derive(Clone, Debug)]
pub struct BaseContext {
    pub b: u64,
    pub h: i64,
    pub schedule: PrimeSchedule,
    /// First level whose prime is at least every prime factor of `b` and `h`.
    pub r0_prime: usize,
    /// First `n` from which `gcd(h·b^n, N_{r0'})` is constant.
    pub n0: u64,
    /// `Q = gcd(h·b^{n0}, N_{r0'})`.
    pub q: BigUint,
    pub k: Vec<u32>,
    pub j: Vec<i64>,
    pub r0: usize,
    /// Largest `r` such that `j_i > 0` for every `r0 < i <= r`.
    pub r_max: usize,
    pub gamma: f64,
    pub alpha: f64,
    pub c_tilde: f64,
    /// `A = max(C̃, 1)`.
    pub a_const: f64,
    /// `B = −max(ln 0.999, ln(γ)/6)`.
    pub b_const: f64,
    /// Smallest integer `R` with `1.001^x >= x^2` for every real `x >= R`.
    pub big_r: u64,
    pub r1: u64,
    /// `v_{q_i}(Q)` for each level.
    q_val: Vec<u32>,
}

/// JSON form of a context.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ContextDump {
    pub b: u64,
    pub h: i64,
    pub r0_prime: usize,
    pub n0: u64,
    #[serde(rename = "Q")]
    pub q: String,
    pub k: Vec<u32>,
    pub j: Vec<i64>,
    pub r0: usize,
    pub gamma: f64,
    pub alpha: f64,
    pub r1: u64,
    pub c_tilde: f64,
    #[serde(rename = "A")]
    pub a_const: f64,
    #[serde(rename = "B")]
    pub b_const: f64,
    #[serde(rename = "R")]
    pub big_r: u64,
}

fn valuation(mut n: u64, p: u64) -> u32 {
    if n == 0 {
        return u32::MAX;
    }
    let mut v = 0;
    while n % p == 0 {
        n /= p;
        v += 1;
    }
    v
}

/// `α = (6000/999)^{1/6}(6/5)^{5/6}(1/2)^{1/6}(2/3)^{5/6}`.
pub fn alpha() -> f64 {
    ((6000.0f64 / 999.0).ln() / 6.0
        + 5.0 * (1.2f64).ln() / 6.0
        + (0.5f64).ln() / 6.0
        + 5.0 * (2.0f64 / 3.0).ln() / 6.0)
        .exp()
}

/// `α^6 = (6000/999)(6/5)^5(1/2)(2/3)^5`, exactly.
pub fn alpha_pow6() -> BigRational {
    let r = |n: u64, d: u64| BigRational::new(BigInt::from(n), BigInt::from(d));
    r(6000, 999) * pow_rat(&r(6, 5), 5) * r(1, 2) * pow_rat(&r(2, 3), 5)
}

fn pow_rat(x: &BigRational, e: u32) -> BigRational {
    let mut acc = BigRational::one();
    for _ in 0..e {
        acc *= x;
    }
    acc
}

/// `C̃ = 2·C₁` with `C₁ = e^{1/12}/√π`.
///
/// From `√(2πn)(n/e)^n <= n! <= √(2πn)(n/e)^n e^{1/(12n)}`, for `1 <= k <= u−1`
/// the binomial coefficient satisfies
/// `binom(u,k) <= e^{1/(12u)} √(u/(2πk(u−k))) · u^u / (k^k (u−k)^{u−k})`,
/// and `u/(k(u−k)) <= 2`, so the prefactor is at most `e^{1/12}/√π`.
pub fn c_tilde() -> f64 {
    2.0 * (1.0f64 / 12.0).exp() / std::f64::consts::PI.sqrt()
}

/// A rational lower bound on [`c_tilde`], for exact inequalities.
///
/// Uses `e^{1/12} >= 1 + 1/12 + 1/288 + 1/10368` (Taylor partial sum) and
/// `1/√π >= 1/s` with `s = 17724539/10^7`, where `s^2 >= 31415927/10^7 > π`.
pub fn c_tilde_lower_bound() -> BigRational {
    let r = |n: u64, d: u64| BigRational::new(BigInt::from(n), BigInt::from(d));
    let exp_lo = r(1, 1) + r(1, 12) + r(1, 288) + r(1, 10368);
    let s = r(17_724_539, 10_000_000);
    let pi_hi = r(31_415_927, 10_000_000);
    assert!(&s * &s >= pi_hi, "s must dominate sqrt(pi)");
    r(2, 1) * exp_lo / s
}

/// Smallest integer `R >= 1` such that `1.001^x >= x^2` for every real
/// `x >= R`.
///
/// `f(x) = x ln 1.001 − 2 ln x` is decreasing below `x* = 2/ln 1.001` and
/// increasing above it, and `f(x*) < 0`, so the answer is the first integer
/// past the larger root.
pub fn solve_big_r() -> u64 {
    let c = 1.001f64.ln();
    let f = |x: f64| x * c - 2.0 * x.ln();
    let turning = 2.0 / c;
    assert!(f(turning) < 0.0);
    let mut x = turning.ceil() as u64;
    while f(x as f64) < 0.0 {
        x += 1;
    }
    x
}

/// Builds the context for `(b, h)` over `schedule` with weight bounds `w`.
pub fn build_context(
    b: u64,
    h: i64,
    schedule: &PrimeSchedule,
    w: WeightBounds,
) -> Result<BaseContext, NumTheoryError> {
    if b < 2 {
        return Err(NumTheoryError::InvalidArgument("b must be at least 2".into()));
    }
    if h == 0 {
        return Err(NumTheoryError::InvalidArgument("h must be non-zero".into()));
    }
    let h_abs = h.unsigned_abs();
    let p_max = largest_prime_factor(b).max(largest_prime_factor(h_abs));
    let r0_prime = schedule
        .q()
        .iter()
        .position(|&q| q >= p_max)
        .map(|i| i + 1)
        .ok_or_else(|| {
            NumTheoryError::ScheduleTooShort(format!("no prime >= {p_max} in the schedule"))
        })?;

    // n0: valuations of h·b^n at each q_i (i <= r0') grow by v_{q_i}(b) per
    // step and are capped by ℓ_i; stop once every capped valuation is fixed.
    let mut n0 = 1u64;
    let mut q_val = vec![0u32; schedule.count()];
    loop {
        let mut saturated = true;
        for i in 0..r0_prime {
            let p = schedule.q()[i];
            let cap = schedule.ell()[i] as u64;
            let vb = valuation(b, p) as u64;
            let vh = valuation(h_abs, p) as u64;
            if vb > 0 && vh + n0 * vb < cap {
                saturated = false;
            }
        }
        if saturated {
            break;
        }
        n0 += 1;
    }
    for (i, slot) in q_val.iter_mut().enumerate().take(r0_prime) {
        let p = schedule.q()[i];
        let cap = schedule.ell()[i] as u64;
        let v = valuation(h_abs, p) as u64 + n0 * valuation(b, p) as u64;
        *slot = v.min(cap) as u32;
    }
    let q = (BigUint::from(h_abs) * BigUint::from(b).pow(n0 as u32))
        .gcd(&schedule.n_products()[r0_prime]);

    let mut k = Vec::with_capacity(schedule.count());
    let mut j = Vec::with_capacity(schedule.count());
    for r in 1..=schedule.count() {
        let kr = if r <= r0_prime { 0 } else { k_of(b, schedule.prime(r))? };
        k.push(kr);
        j.push(schedule.multiplicity(r) as i64 - kr as i64);
    }
    let r0_second = j
        .iter()
        .position(|&x| x > 0)
        .map(|i| i + 1)
        .ok_or_else(|| NumTheoryError::ScheduleTooShort("no level with j_r > 0".into()))?;
    let r0 = r0_prime.max(r0_second);
    let mut r_max = r0;
    while r_max < schedule.count() && j[r_max] > 0 {
        r_max += 1;
    }
    if r_max == r0 {
        return Err(NumTheoryError::ScheduleTooShort(format!(
            "no level r > r0 = {r0} with j_r > 0"
        )));
    }

    let gamma = w.gamma();
    let c_t = c_tilde();
    let big_r = solve_big_r();
    Ok(BaseContext {
        b,
        h,
        schedule: schedule.clone(),
        r0_prime,
        n0,
        q,
        k,
        j,
        r0,
        r_max,
        gamma,
        alpha: alpha(),
        c_tilde: c_t,
        a_const: c_t.max(1.0),
        b_const: -(0.999f64.ln()).max(gamma.ln() / 6.0),
        big_r,
        r1: r0 as u64 + big_r.max(6000),
        q_val,
    })
}

impl BaseContext {
    /// `|h|`.
    pub fn h_abs(&self) -> u64 {
        self.h.unsigned_abs()
    }

    /// Factorization of `N_s·q_{s+1}^extra / Q`, for `r0' <= s`.
    pub fn modulus_factorization(&self, s: usize, extra: usize) -> Result<Factorization, NumTheoryError> {
        let count = self.schedule.count();
        if s < self.r0_prime || s > count || (s == count && extra > 0) {
            return Err(NumTheoryError::OutOfRange { index: s, lo: self.r0_prime, hi: count });
        }
        if extra > 0 && extra > self.schedule.multiplicity(s + 1) {
            return Err(NumTheoryError::InvalidArgument(format!(
                "exponent {extra} exceeds ℓ_{}",
                s + 1
            )));
        }
        let mut pairs = Vec::with_capacity(s + 1);
        for i in 0..s {
            let e = self.schedule.ell()[i] as u32 - self.q_val[i];
            pairs.push((self.schedule.q()[i], e));
        }
        if extra > 0 {
            pairs.push((self.schedule.q()[s], extra as u32 - self.q_val[s]));
        }
        Factorization::new(pairs)
    }

    /// `N_s·q_{s+1}^extra / Q`.
    pub fn modulus(&self, s: usize, extra: usize) -> Result<BigUint, NumTheoryError> {
        Ok(self.modulus_factorization(s, extra)?.value())
    }

    /// `ord_{N_s q_{s+1}^extra / Q}(b)`.
    pub fn order_at(&self, s: usize, extra: usize) -> Result<BigUint, NumTheoryError> {
        order_mod_factored(&BigUint::from(self.b), &self.modulus_factorization(s, extra)?)
    }

    /// `ord_{N_r/Q}(b)`.
    pub fn order(&self, r: usize) -> Result<BigUint, NumTheoryError> {
        self.order_at(r, 0)
    }

    /// Both sides of `ord_{N_{s+1}/Q}(b) = q_{s+1}^{j_{s+1}}·ord_{N_s q_{s+1}^{k_{s+1}}/Q}(b)`
    /// for `r0 <= s < r_max`.
    pub fn ord_ratio_check(&self, s: usize) -> Result<(BigUint, BigUint), NumTheoryError> {
        if s < self.r0 || s >= self.r_max {
            return Err(NumTheoryError::OutOfRange { index: s, lo: self.r0, hi: self.r_max - 1 });
        }
        let lhs = self.order(s + 1)?;
        let rhs = BigUint::from(self.schedule.prime(s + 1)).pow(self.j[s] as u32)
            * self.order_at(s, self.k[s] as usize)?;
        Ok((lhs, rhs))
    }

    /// `∏_{i=c+1}^{d} q_i^{j_i}`, the size of `Y_{c,d}`.
    pub fn free_product(&self, c: usize, d: usize) -> BigUint {
        (c + 1..=d).fold(BigUint::one(), |acc, i| {
            acc * BigUint::from(self.schedule.prime(i)).pow(self.j[i - 1].max(0) as u32)
        })
    }

    /// `u = Σ_{i=c+1}^{d} j_i`.
    pub fn free_digits(&self, c: usize, d: usize) -> u64 {
        (c + 1..=d).map(|i| self.j[i - 1].max(0) as u64).sum()
    }

    /// `J = ord_{N_r/Q}(b) / ∏_{i=r0+1}^{r} q_i^{j_i}` together with the
    /// remainder of that division (zero when `J` is an integer).
    pub fn j_quotient(&self, r: usize) -> Result<(BigUint, BigUint), NumTheoryError> {
        if r <= self.r0 || r > self.r_max {
            return Err(NumTheoryError::OutOfRange { index: r, lo: self.r0 + 1, hi: self.r_max });
        }
        let ord = self.order(r)?;
        Ok(ord.div_rem(&self.free_product(self.r0, r)))
    }

    /// The j-block digit positions of `Π_{c,d}` (0-indexed digit indices):
    /// `L_s + k_{s+1}, …, L_{s+1} − 1` for `c <= s < d`.
    pub fn pi_positions(&self, c: usize, d: usize) -> Result<Vec<usize>, NumTheoryError> {
        if c < self.r0 || c >= d || d > self.r_max {
            return Err(NumTheoryError::OutOfRange { index: d, lo: self.r0 + 1, hi: self.r_max });
        }
        let l = self.schedule.l_sums();
        let mut out = Vec::new();
        for s in c..d {
            out.extend(l[s] + self.k[s] as usize..l[s + 1]);
        }
        Ok(out)
    }

    pub fn dump(&self) -> ContextDump {
        ContextDump {
            b: self.b,
            h: self.h,
            r0_prime: self.r0_prime,
            n0: self.n0,
            q: self.q.to_string(),
            k: self.k.clone(),
            j: self.j.clone(),
            r0: self.r0,
            gamma: self.gamma,
            alpha: self.alpha,
            r1: self.r1,
            c_tilde: self.c_tilde,
            a_const: self.a_const,
            b_const: self.b_const,
            big_r: self.big_r,
        }
    }

    /// `v_{q_r}(Q)`.
    pub fn q_valuation(&self, r: usize) -> u32 {
        self.q_val[r - 1]
    }

    /// Prime factors of `b` and `|h|`, for diagnostics.
    pub fn base_primes(&self) -> Vec<u64> {
        let mut ps: Vec<u64> = factor_u64(self.b)
            .into_iter()
            .chain(factor_u64(self.h_abs()))
            .map(|(p, _)| p)
            .collect();
        ps.sort_unstable();
        ps.dedup();
        ps
    }

    /// `ord_{N_r/Q}(b)` as a `u64` when it fits.
    pub fn order_u64(&self, r: usize) -> Result<Option<u64>, NumTheoryError> {
        Ok(self.order(r)?.to_u64())
    }

    /// Whether `Q == 1`.
    pub fn q_is_one(&self) -> bool {
        self.q.is_one()
    }

    /// Whether `Q` divides `N_{r0'}` (a structural invariant).
    pub fn q_divides_base_product(&self) -> bool {
        (&self.schedule.n_products()[self.r0_prime] % &self.q).is_zero()
    }
}
