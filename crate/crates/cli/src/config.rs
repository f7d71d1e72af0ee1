//! Run configuration, read from a TOML file. Every table and key is
//! optional; unknown keys are rejected.

use moran::dimension::{ConvolvedVariant, Gauge};
use moran::fourier::MoranSystem;
use moran::numtheory::WeightBounds;
use moran::radix::{build_schedule_with, EllRule, PrimeSchedule, ScheduleVariant};
use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    pub schedule: ScheduleCfg,
    pub system: SystemCfg,
    pub context: ContextCfg,
    pub fourier: FourierCfg,
    pub del: DelCfg,
    pub partition: PartitionCfg,
    pub normality: NormalityCfg,
    pub uniqueness: UniquenessCfg,
    pub dimension: DimensionCfg,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleCfg {
    pub d: u32,
    /// `nth-prime-from-7`, `cube-window` or `custom`.
    pub variant: String,
    pub count: usize,
    /// Cube-window offset.
    pub offset: u64,
    /// Primes for the custom variant.
    pub q: Option<Vec<u64>>,
    /// Explicit multiplicities; default `ℓ_r = r^d`.
    pub ell: Option<Vec<usize>>,
    pub ell_constant: Option<usize>,
}

impl Default for ScheduleCfg {
    fn default() -> Self {
        Self {
            d: 1,
            variant: "nth-prime-from-7".into(),
            count: 5,
            offset: 1,
            q: None,
            ell: None,
            ell_constant: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemCfg {
    /// `binary`, `dim-one`, `gauge` or `extreme`.
    pub kind: String,
    /// Weight of digit 0 for `binary`, as `p/q`.
    pub omega: String,
    /// Levels used; default the whole schedule.
    pub depth: Option<usize>,
    pub gauge: Option<Gauge>,
    /// The constant `c` of `H(r)` for `extreme`.
    pub h_c: f64,
}

impl Default for SystemCfg {
    fn default() -> Self {
        Self { kind: "binary".into(), omega: "1/2".into(), depth: None, gauge: None, h_c: 1.0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContextCfg {
    pub b: Vec<u64>,
    pub h: Vec<i64>,
}

impl Default for ContextCfg {
    fn default() -> Self {
        Self { b: vec![2], h: vec![1] }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FourierCfg {
    /// Frequencies as decimal strings, so they may exceed 64 bits.
    pub xi: Vec<String>,
    pub eps: f64,
}

impl Default for FourierCfg {
    fn default() -> Self {
        Self { xi: ["1", "7", "77", "1000"].map(String::from).to_vec(), eps: 1e-9 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DelCfg {
    pub n_max: u64,
    pub eps: f64,
    pub blocks: Option<BlocksCfg>,
}

impl Default for DelCfg {
    fn default() -> Self {
        Self { n_max: 10, eps: 1e-9, blocks: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlocksCfg {
    pub r_from: usize,
    pub r_to: usize,
    pub m: Vec<u64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PartitionCfg {
    pub i_start: u64,
    pub m: u64,
    pub r: usize,
    pub fibers: Option<FibersCfg>,
}

impl Default for PartitionCfg {
    fn default() -> Self {
        Self { i_start: 1, m: 0, r: 2, fibers: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FibersCfg {
    pub start: u64,
    pub length: u64,
    pub s: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NormalityCfg {
    pub samples: u64,
    pub depth: Option<usize>,
    pub bases: Vec<u64>,
    pub guard: u64,
    /// Digits examined per base before the trusted cut.
    pub digits: u64,
}

impl Default for NormalityCfg {
    fn default() -> Self {
        Self { samples: 4, depth: None, bases: vec![2, 3, 10], guard: 8, digits: 8000 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UniquenessCfg {
    pub samples: u64,
    pub depth: Option<usize>,
    pub j_max: Option<usize>,
    /// `auto`, `step-one` or `step-three`.
    pub rule: String,
}

impl Default for UniquenessCfg {
    fn default() -> Self {
        Self { samples: 16, depth: None, j_max: None, rule: "auto".into() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DimensionCfg {
    pub samples: u64,
    pub r_points: usize,
    /// Constant in front of `φ` in the mass ratio; default 8 for `dim-one`,
    /// 4 otherwise.
    pub constant: Option<f64>,
    /// Gauge for the mass ratio; default `r^{1/2}` for `dim-one` and the
    /// system gauge otherwise.
    pub mass_gauge: Option<Gauge>,
    pub burn_in: usize,
    pub h_rate_k: Option<usize>,
}

impl Default for DimensionCfg {
    fn default() -> Self {
        Self {
            samples: 8,
            r_points: 20,
            constant: None,
            mass_gauge: None,
            burn_in: moran::dimension::DEFAULT_BURN_IN,
            h_rate_k: None,
        }
    }
}

pub type ConfigResult<T> = Result<T, String>;

impl RunConfig {
    pub fn parse(text: &str) -> ConfigResult<Self> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// SHA-256 of the canonical JSON form, so formatting of the file does not
    /// matter. The worker count is left out since it never changes results.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_string(&RunConfig { workers: 0, ..self.clone() }).expect("config serializes");
        hex::encode(Sha256::digest(canon.as_bytes()))
    }

    pub fn schedule(&self) -> ConfigResult<PrimeSchedule> {
        let s = &self.schedule;
        let variant = match s.variant.as_str() {
            "nth-prime-from-7" => ScheduleVariant::NthPrimeFrom7,
            "cube-window" => ScheduleVariant::CubeWindow { offset: s.offset },
            "custom" => ScheduleVariant::Custom,
            other => return Err(format!("unknown schedule variant `{other}`")),
        };
        if let ScheduleVariant::Custom = variant {
            let q = s.q.clone().ok_or("custom schedules need `q`")?;
            let ell = s.ell.clone().unwrap_or_else(|| {
                (1..=q.len()).map(|r| r.pow(s.d)).collect()
            });
            return PrimeSchedule::new(s.d, variant, q, ell).map_err(|e| e.to_string());
        }
        if s.q.is_some() {
            return Err("`q` is only valid with the custom variant".into());
        }
        let rule = match (&s.ell, s.ell_constant) {
            (Some(_), Some(_)) => return Err("give at most one of `ell` and `ell_constant`".into()),
            (Some(v), None) => EllRule::Explicit(v.clone()),
            (None, Some(k)) => EllRule::Constant(k),
            (None, None) => EllRule::Power,
        };
        build_schedule_with(s.d, s.count, variant, rule).map_err(|e| e.to_string())
    }

    pub fn omega(&self) -> ConfigResult<Ratio<u64>> {
        let (n, d) = self
            .system
            .omega
            .split_once('/')
            .ok_or_else(|| format!("omega `{}` is not of the form p/q", self.system.omega))?;
        let n: u64 = n.trim().parse().map_err(|_| "bad omega numerator".to_string())?;
        let d: u64 = d.trim().parse().map_err(|_| "bad omega denominator".to_string())?;
        if d == 0 {
            return Err("omega has a zero denominator".into());
        }
        Ok(Ratio::new(n, d))
    }

    pub fn depth(&self, s: &PrimeSchedule) -> ConfigResult<usize> {
        let d = self.system.depth.unwrap_or(s.depth());
        if d == 0 || d > s.depth() {
            return Err(format!("system depth {d} is outside 1..={}", s.depth()));
        }
        Ok(d)
    }

    pub fn is_binary(&self) -> bool {
        self.system.kind == "binary"
    }

    pub fn convolved_variant(&self) -> ConfigResult<ConvolvedVariant> {
        let gauge = || {
            self.system
                .gauge
                .clone()
                .ok_or_else(|| format!("system kind `{}` needs a gauge", self.system.kind))
        };
        match self.system.kind.as_str() {
            "dim-one" => Ok(ConvolvedVariant::DimOne),
            "gauge" => Ok(ConvolvedVariant::Gauge { gauge: gauge()? }),
            "extreme" => Ok(ConvolvedVariant::Extreme { gauge: gauge()?, c: self.system.h_c }),
            "binary" => Err("this command needs a convolved system kind".into()),
            other => Err(format!("unknown system kind `{other}`")),
        }
    }

    /// The binary system, for commands that only make sense on it.
    pub fn binary_system(&self, s: &PrimeSchedule) -> ConfigResult<MoranSystem> {
        let depth = self.depth(s)?;
        let levels = vec![moran::fourier::DigitLevel::Binary { omega: self.omega()? }; depth];
        MoranSystem::new(s.clone(), levels).map_err(|e| e.to_string())
    }

    pub fn weight_bounds(&self) -> ConfigResult<WeightBounds> {
        if !self.is_binary() {
            return Ok(WeightBounds::half());
        }
        let w = self.omega()?;
        let w = *w.numer() as f64 / *w.denom() as f64;
        WeightBounds::new(w, w).map_err(|e| e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_rejection() {
        let c = RunConfig::parse("").unwrap();
        assert_eq!(c.schedule().unwrap().q()[..3], [7, 11, 13]);
        assert!(RunConfig::parse("bogus = 1").is_err());
        assert!(RunConfig::parse("[schedule]\nwhat = 2").is_err());
        let a = RunConfig::parse("seed = 3\n[del]\nn_max = 4").unwrap();
        let b = RunConfig::parse("seed=3\n\n[del]\nn_max    =  4\n").unwrap();
        assert_eq!(a.hash(), b.hash());
        let g = RunConfig::parse("[system]\nkind = \"gauge\"\ngauge = { kind = \"r_times_log_power\", c = 1.0 }")
            .unwrap();
        assert!(matches!(g.convolved_variant().unwrap(), ConvolvedVariant::Gauge { .. }));
    }
}
