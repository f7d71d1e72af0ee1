use num_bigint::{BigInt, BigUint};
use num_rational::{BigRational, Ratio};
use num_traits::{One, Zero};

use super::FourierError;
use crate::radix::PrimeSchedule;

/// The digit set and weights of one level.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum DigitLevel {
    /// `{0, 1}` with weights `(ω, 1 − ω)`.
    Binary { omega: Ratio<u64> },
    /// `{0, step, 2·step, …, (count−1)·step}`, uniform.
    UniformStep { count: u64, step: u64 },
    /// `{0, …, m−1}` with mass `1/(2(m−1))` on `0` and `m−1` and `1/(m−1)` on
    /// every interior digit.
    EndpointHalf { m: u64 },
    /// Arbitrary digits with positive rational weights.
    Explicit { digits: Vec<u64>, weights: Vec<Ratio<u64>> },
}

/// Modulus of a mask together with an absolute error radius.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaskValue {
    pub value: f64,
    pub radius: f64,
}

const U: f64 = f64::EPSILON;

impl DigitLevel {
    pub fn binary_half() -> Self {
        DigitLevel::Binary { omega: Ratio::new(1, 2) }
    }

    pub fn digits(&self) -> Vec<u64> {
        match self {
            DigitLevel::Binary { .. } => vec![0, 1],
            DigitLevel::UniformStep { count, step } => (0..*count).map(|i| i * step).collect(),
            DigitLevel::EndpointHalf { m } => (0..*m).collect(),
            DigitLevel::Explicit { digits, .. } => digits.clone(),
        }
    }

    pub fn weights(&self) -> Vec<Ratio<u64>> {
        match self {
            DigitLevel::Binary { omega } => vec![*omega, Ratio::from_integer(1) - omega],
            DigitLevel::UniformStep { count, .. } => vec![Ratio::new(1, *count); *count as usize],
            DigitLevel::EndpointHalf { m } => (0..*m)
                .map(|d| {
                    if d == 0 || d == m - 1 {
                        Ratio::new(1, 2 * (m - 1))
                    } else {
                        Ratio::new(1, m - 1)
                    }
                })
                .collect(),
            DigitLevel::Explicit { weights, .. } => weights.clone(),
        }
    }

    pub fn max_digit(&self) -> u64 {
        match self {
            DigitLevel::Binary { .. } => 1,
            DigitLevel::UniformStep { count, step } => (count - 1) * step,
            DigitLevel::EndpointHalf { m } => m - 1,
            DigitLevel::Explicit { digits, .. } => digits.iter().copied().max().unwrap_or(0),
        }
    }

    pub fn len(&self) -> u64 {
        match self {
            DigitLevel::Binary { .. } => 2,
            DigitLevel::UniformStep { count, .. } => *count,
            DigitLevel::EndpointHalf { m } => *m,
            DigitLevel::Explicit { digits, .. } => digits.len() as u64,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Weight of digit `d`, or `None` when `d` is not in the set.
    pub fn weight_of(&self, d: u64) -> Option<Ratio<u64>> {
        match self {
            DigitLevel::Binary { omega } => match d {
                0 => Some(*omega),
                1 => Some(Ratio::from_integer(1) - omega),
                _ => None,
            },
            DigitLevel::UniformStep { count, step } => {
                (d % step == 0 && d / step < *count).then(|| Ratio::new(1, *count))
            }
            DigitLevel::EndpointHalf { m } => {
                if d >= *m {
                    None
                } else if d == 0 || d == m - 1 {
                    Some(Ratio::new(1, 2 * (m - 1)))
                } else {
                    Some(Ratio::new(1, m - 1))
                }
            }
            DigitLevel::Explicit { digits, weights } => {
                digits.iter().position(|&x| x == d).map(|i| weights[i])
            }
        }
    }

    pub fn contains(&self, d: u64) -> bool {
        self.weight_of(d).is_some()
    }

    /// Draws a digit with probability equal to its weight. `below(n)` must
    /// return a uniform integer in `[0, n)`.
    pub fn sample(&self, below: &mut impl FnMut(u64) -> u64) -> u64 {
        match self {
            DigitLevel::Binary { omega } => {
                if below(*omega.denom()) < *omega.numer() {
                    0
                } else {
                    1
                }
            }
            DigitLevel::UniformStep { count, step } => below(*count) * step,
            // u = 0 ↦ 0, {2i−1, 2i} ↦ i, 2m−3 ↦ m−1.
            DigitLevel::EndpointHalf { m } => below(2 * (m - 1)).div_ceil(2),
            DigitLevel::Explicit { digits, weights } => {
                let den = weights.iter().fold(1u64, |acc, w| num_integer::lcm(acc, *w.denom()));
                let mut u = below(den);
                for (d, w) in digits.iter().zip(weights) {
                    let share = w.numer() * (den / w.denom());
                    if u < share {
                        return *d;
                    }
                    u -= share;
                }
                *digits.last().unwrap()
            }
        }
    }

    /// `|Σ_d ω_d e^{−2πi d t}|` for `t` in `[0, 1)` given as an `f64` that is
    /// within `t_err` of the exact fractional part.
    pub fn mask(&self, t: f64, t_err: f64) -> MaskValue {
        // |M| is Lipschitz in t with constant 2π·max digit.
        let lip = 2.0 * std::f64::consts::PI * self.max_digit() as f64 * t_err;
        let mut mv = match self {
            DigitLevel::Binary { omega } => {
                let w = *omega.numer() as f64 / *omega.denom() as f64;
                let c = (2.0 * std::f64::consts::PI * t).cos();
                let sq = 1.0 - 2.0 * w * (1.0 - w) * (1.0 - c);
                MaskValue { value: sq.max(0.0).sqrt(), radius: 16.0 * U }
            }
            DigitLevel::UniformStep { count, step } => {
                let u = (*step as f64 * t).fract();
                dirichlet(*count, u)
            }
            DigitLevel::EndpointHalf { m } => {
                let c = (std::f64::consts::PI * t).cos().abs();
                let d = dirichlet(m - 1, t);
                MaskValue { value: c * d.value, radius: d.radius + 8.0 * U }
            }
            DigitLevel::Explicit { digits, weights } => {
                let (mut re, mut im) = (0.0f64, 0.0f64);
                let mut maxd = 0u64;
                for (d, w) in digits.iter().zip(weights) {
                    let wf = *w.numer() as f64 / *w.denom() as f64;
                    let th = 2.0 * std::f64::consts::PI * ((*d as f64 * t).fract());
                    re += wf * th.cos();
                    im -= wf * th.sin();
                    maxd = maxd.max(*d);
                }
                let n = digits.len() as f64;
                MaskValue { value: re.hypot(im), radius: (8.0 + 2.0 * n + 8.0 * maxd as f64) * U }
            }
        };
        mv.radius += lip;
        mv.value = mv.value.min(1.0);
        mv
    }

    /// Exact variance of the digit distribution, as an `f64`.
    pub fn variance(&self) -> f64 {
        let ds = self.digits();
        let ws = self.weights();
        let mean: f64 = ds.iter().zip(&ws).map(|(d, w)| *d as f64 * to_f64(w)).sum();
        ds.iter().zip(&ws).map(|(d, w)| (*d as f64 - mean).powi(2) * to_f64(w)).sum()
    }
}

fn to_f64(w: &Ratio<u64>) -> f64 {
    *w.numer() as f64 / *w.denom() as f64
}

/// `|Σ_{k<c} e^{−2πiku}| / c` for `u` in `[0, 1)`.
fn dirichlet(c: u64, u: f64) -> MaskValue {
    if c == 1 {
        return MaskValue { value: 1.0, radius: 0.0 };
    }
    let cf = c as f64;
    let s = (std::f64::consts::PI * u).sin().abs();
    if s >= 1e-2 {
        let num = (std::f64::consts::PI * ((cf * u).fract())).sin().abs();
        let value = (num / (cf * s)).min(1.0);
        // Relative error of the denominator ~ 4u/s, absolute error of the
        // numerator ~ 4u; the ratio is at most 1.
        MaskValue { value, radius: 16.0 * U / s + 8.0 * U }
    } else {
        let (mut re, mut im) = (0.0f64, 0.0f64);
        for k in 0..c {
            let th = 2.0 * std::f64::consts::PI * ((k as f64 * u).fract());
            re += th.cos();
            im -= th.sin();
        }
        let value = (re.hypot(im) / cf).min(1.0);
        MaskValue { value, radius: (8.0 + 2.0 * cf) * U }
    }
}

/// A Cantor–Moran system: a schedule and one [`DigitLevel`] per base.
#[derive(Clone, Debug)]
pub struct MoranSystem {
    schedule: PrimeSchedule,
    levels: Vec<DigitLevel>,
}

impl MoranSystem {
    /// Validates digits against bases and weights against positivity and
    /// exact unit sum. `levels.len()` may be smaller than the schedule depth.
    pub fn new(schedule: PrimeSchedule, levels: Vec<DigitLevel>) -> Result<Self, FourierError> {
        if levels.len() > schedule.depth() {
            return Err(FourierError::InvalidSystem(format!(
                "{} levels but the schedule has {} bases",
                levels.len(),
                schedule.depth()
            )));
        }
        for (i, (lvl, m)) in levels.iter().zip(schedule.bases()).enumerate() {
            let n = i + 1;
            if lvl.is_empty() {
                return Err(FourierError::InvalidSystem(format!("level {n} has no digits")));
            }
            if lvl.max_digit() >= m {
                return Err(FourierError::InvalidSystem(format!(
                    "level {n}: digit {} >= base {m}",
                    lvl.max_digit()
                )));
            }
            match lvl {
                DigitLevel::Binary { omega } => {
                    if omega.is_zero() || *omega >= Ratio::from_integer(1) {
                        // ω = 1 is allowed only through Explicit (degenerate point mass).
                        return Err(FourierError::InvalidSystem(format!(
                            "level {n}: binary weight must lie in (0, 1)"
                        )));
                    }
                }
                DigitLevel::UniformStep { count, step } => {
                    if *count == 0 || (*count > 1 && *step == 0) {
                        return Err(FourierError::InvalidSystem(format!("level {n}: bad step set")));
                    }
                }
                DigitLevel::EndpointHalf { m: k } => {
                    if *k < 2 {
                        return Err(FourierError::InvalidSystem(format!("level {n}: m < 2")));
                    }
                }
                DigitLevel::Explicit { digits, weights } => {
                    if digits.len() != weights.len() {
                        return Err(FourierError::InvalidSystem(format!(
                            "level {n}: digit/weight length mismatch"
                        )));
                    }
                    let mut sorted = digits.clone();
                    sorted.sort_unstable();
                    sorted.dedup();
                    if sorted.len() != digits.len() {
                        return Err(FourierError::InvalidSystem(format!("level {n}: repeated digit")));
                    }
                    let mut sum = BigRational::zero();
                    for w in weights {
                        if w.is_zero() {
                            return Err(FourierError::InvalidSystem(format!(
                                "level {n}: zero weight"
                            )));
                        }
                        sum += BigRational::new(BigInt::from(*w.numer()), BigInt::from(*w.denom()));
                    }
                    if !sum.is_one() {
                        return Err(FourierError::InvalidSystem(format!(
                            "level {n}: weights sum to {sum}"
                        )));
                    }
                }
            }
        }
        Ok(Self { schedule, levels })
    }

    /// `𝒟_n = {0, 1}` with constant weight `ω` on every base of the schedule.
    pub fn binary(schedule: PrimeSchedule, omega: Ratio<u64>) -> Result<Self, FourierError> {
        let levels = vec![DigitLevel::Binary { omega }; schedule.depth()];
        Self::new(schedule, levels)
    }

    /// `𝒟_n = {0, 1}` with per-level weights.
    pub fn binary_weights(
        schedule: PrimeSchedule,
        omegas: Vec<Ratio<u64>>,
    ) -> Result<Self, FourierError> {
        let levels = omegas.into_iter().map(|omega| DigitLevel::Binary { omega }).collect();
        Self::new(schedule, levels)
    }

    pub fn schedule(&self) -> &PrimeSchedule {
        &self.schedule
    }

    pub fn levels(&self) -> &[DigitLevel] {
        &self.levels
    }

    /// The level for 1-indexed base position `n`.
    pub fn level(&self, n: usize) -> &DigitLevel {
        &self.levels[n - 1]
    }

    /// Number of levels with a digit set.
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// `(inf ω_n, sup ω_n)` when every level is a two-digit level.
    pub fn binary_weight_bounds(&self) -> Option<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for l in &self.levels {
            match l {
                DigitLevel::Binary { omega } => {
                    let w = to_f64(omega);
                    lo = lo.min(w);
                    hi = hi.max(w);
                }
                _ => return None,
            }
        }
        (!self.levels.is_empty()).then_some((lo, hi))
    }

    /// `max_n max 𝒟_n / M_n` over the levels, exactly.
    pub fn max_digit_ratio(&self) -> BigRational {
        self.levels
            .iter()
            .zip(self.schedule.bases())
            .map(|(l, m)| BigRational::new(BigInt::from(l.max_digit()), BigInt::from(m)))
            .fold(BigRational::zero(), |a, b| if b > a { b } else { a })
    }

    /// The exact point `Σ d_n / (M_1⋯M_n)` for a digit string, as
    /// `(numerator, M_1⋯M_len)`.
    pub fn point_from_digits(&self, digits: &[u64]) -> (BigUint, BigUint) {
        let mut num = BigUint::zero();
        let mut den = BigUint::one();
        for (d, m) in digits.iter().zip(self.schedule.bases()) {
            num = num * m + d;
            den *= m;
        }
        (num, den)
    }
}
