//! Command-line front end. Each subcommand reads the run configuration,
//! calls the library and writes `<command>.json` and `<command>.csv` (plus a
//! few extra tables for `dimension`) into the output directory.

mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use moran::dimension::{
    build_convolved, h_rate_report, local_dim_series, log_spaced_grid, mass_grid, product_grid,
    strictly_decreasing, ConvolvedVariant, Gauge,
};
use moran::distribution::{fiber_counts, verify_partition};
use moran::exec::{with_workers, Exec};
use moran::fourier::MoranSystem;
use moran::measure::{
    normality_report, sample_batch, uniqueness_avoidance, AvoidanceRule, Verdict,
};
use moran::numtheory::{build_context, BaseContext};
use moran::radix::PrimeSchedule;
use moran::ErrorClass;
use num_bigint::BigInt;
use serde_json::json;

use config::RunConfig;
use report::{Failure, Reporter};

#[derive(Parser)]
#[command(name = "moran", version, about = "Cantor-Moran measure diagnostics")]
struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "MORAN_OUT", default_value = "out")]
    out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores); overrides the configuration.
    #[arg(long, global = true, env = "MORAN_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Prime schedule table.
    Schedule,
    /// Digit constants for every configured (b, h).
    Context,
    /// Certified Fourier moduli and digit decay bounds.
    Fourier,
    /// Partial DEL sums and optional block trends.
    Del,
    /// Exhaustive partition certificate and optional fiber table.
    Partition,
    /// Digit statistics of sampled points.
    Normality,
    /// Interval-avoidance check of sampled points.
    Uniqueness,
    /// Ball bounds, local-dimension series and h(r) rates.
    Dimension,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Schedule => "schedule",
            Command::Context => "context",
            Command::Fourier => "fourier",
            Command::Del => "del",
            Command::Partition => "partition",
            Command::Normality => "normality",
            Command::Uniqueness => "uniqueness",
            Command::Dimension => "dimension",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}

fn load(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?;
            RunConfig::parse(&text).map_err(Failure::Config)?
        }
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<String, Failure> {
    let cfg = load(cli)?;
    let schedule = cfg.schedule().map_err(Failure::Config)?;
    let out = Reporter::new(&cli.out, cli.command.name(), &cfg)?;
    with_workers(cfg.workers, || match cli.command {
        Command::Schedule => cmd_schedule(&schedule, &out),
        Command::Context => cmd_context(&cfg, &schedule, &out),
        Command::Fourier => cmd_fourier(&cfg, &schedule, &out),
        Command::Del => cmd_del(&cfg, &schedule, &out),
        Command::Partition => cmd_partition(&cfg, &schedule, &out),
        Command::Normality => cmd_normality(&cfg, &schedule, &out),
        Command::Uniqueness => cmd_uniqueness(&cfg, &schedule, &out),
        Command::Dimension => cmd_dimension(&cfg, &schedule, &out),
    })
}

fn lib<E: std::fmt::Display>(class: ErrorClass) -> impl Fn(E) -> Failure {
    move |e| Failure::Lib(class, e.to_string())
}

/// The measure the sampling and Fourier commands work with: the binary
/// system, or `λ = μ∗ν` for convolved kinds.
fn primary_system(cfg: &RunConfig, s: &PrimeSchedule) -> Result<MoranSystem, Failure> {
    if cfg.is_binary() {
        return cfg.binary_system(s).map_err(Failure::Config);
    }
    let depth = cfg.depth(s).map_err(Failure::Config)?;
    let variant = cfg.convolved_variant().map_err(Failure::Config)?;
    let cs = build_convolved(s, depth, variant).map_err(|e| Failure::Lib(e.class(), e.to_string()))?;
    Ok(cs.lambda)
}

fn first_context(cfg: &RunConfig, s: &PrimeSchedule) -> Result<BaseContext, Failure> {
    let b = *cfg.context.b.first().ok_or_else(|| Failure::Config("context.b is empty".into()))?;
    let h = *cfg.context.h.first().ok_or_else(|| Failure::Config("context.h is empty".into()))?;
    let w = cfg.weight_bounds().map_err(Failure::Config)?;
    build_context(b, h, s, w).map_err(|e| Failure::Lib(e.class(), e.to_string()))
}

fn cmd_schedule(s: &PrimeSchedule, out: &Reporter) -> Result<String, Failure> {
    let mut rows = Vec::new();
    let mut n = 0usize;
    for r in 1..=s.count() {
        for _ in 0..s.multiplicity(r) {
            n += 1;
            rows.push(vec![
                n.to_string(),
                r.to_string(),
                s.prime(r).to_string(),
                s.l_sums()[r].to_string(),
                s.n_products()[r].to_string(),
            ]);
        }
    }
    let deviates = s.variant().deviates_from_construction();
    let note = deviates.then_some("offset deviates from the construction's constant");
    out.json(&json!({ "schedule": s.to_file(), "variant": s.variant().label(), "note": note }))?;
    out.csv("schedule", &["n", "r", "M_n", "L_r", "N_r"], &rows)?;
    Ok(format!(
        "schedule: {} primes, depth {}, variant {}{}",
        s.count(),
        s.depth(),
        s.variant().label(),
        note.map(|n| format!(" ({n})")).unwrap_or_default()
    ))
}

fn cmd_context(cfg: &RunConfig, s: &PrimeSchedule, out: &Reporter) -> Result<String, Failure> {
    let w = cfg.weight_bounds().map_err(Failure::Config)?;
    let mut dumps = Vec::new();
    let mut rows = Vec::new();
    for &b in &cfg.context.b {
        for &h in &cfg.context.h {
            let ctx = build_context(b, h, s, w).map_err(|e| Failure::Lib(e.class(), e.to_string()))?;
            for r in 1..=s.count() {
                rows.push(vec![
                    b.to_string(),
                    h.to_string(),
                    r.to_string(),
                    s.prime(r).to_string(),
                    s.multiplicity(r).to_string(),
                    ctx.k[r - 1].to_string(),
                    ctx.j[r - 1].to_string(),
                ]);
            }
            dumps.push(ctx.dump());
        }
    }
    out.json(&dumps)?;
    out.csv("context", &["b", "h", "r", "q_r", "ell_r", "k_r", "j_r"], &rows)?;
    Ok(format!("context: {} (b, h) pairs", dumps.len()))
}

fn cmd_fourier(cfg: &RunConfig, s: &PrimeSchedule, out: &Reporter) -> Result<String, Failure> {
    let sys = primary_system(cfg, s)?;
    let ctx = first_context(cfg, s)?;
    let xis: Vec<BigInt> = cfg
        .fourier
        .xi
        .iter()
        .map(|x| x.trim().parse::<BigInt>().map_err(|_| Failure::Config(format!("bad frequency `{x}`"))))
        .collect::<Result<_, _>>()?;
    let rows = moran::fourier::batch(&xis, &sys, &ctx, cfg.fourier.eps, Exec::default())
        .map_err(|e| Failure::Lib(e.class(), e.to_string()))?;
    out.json(&rows)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.xi.clone(),
                format!("{:e}", r.lo),
                format!("{:e}", r.hi),
                r.truncation_level.to_string(),
                r.w.to_string(),
                format!("{:e}", r.gamma_pow_w),
            ]
        })
        .collect();
    out.csv("fourier", &["xi", "lo", "hi", "truncation_level", "w", "gamma_pow_w"], &table)?;
    Ok(format!("fourier: {} frequencies certified to {:e}", rows.len(), cfg.fourier.eps))
}

fn cmd_del(cfg: &RunConfig, s: &PrimeSchedule, out: &Reporter) -> Result<String, Failure> {
    let sys = primary_system(cfg, s)?;
    let ctx = first_context(cfg, s)?;
    let rep = moran::delsum::del_partial(&sys, ctx.b, ctx.h, cfg.del.n_max, cfg.del.eps, Exec::default())
        .map_err(|e| Failure::Lib(e.class(), e.to_string()))?;
    let blocks = match &cfg.del.blocks {
        Some(b) => Some(
            moran::delsum::block_trend(&sys, &ctx, b.r_from..=b.r_to, &b.m, cfg.del.eps, Exec::default())
                .map_err(|e| Failure::Lib(e.class(), e.to_string()))?,
        ),
        None => None,
    };
    out.json(&json!({ "report": rep, "blocks": blocks }))?;
    let rows: Vec<Vec<String>> = rep
        .increments
        .iter()
        .map(|i| {
            vec![i.n.to_string(), format!("{:e}", i.increment), format!("{:e}", i.cumulative), format!("{:e}", i.radius)]
        })
        .collect();
    out.csv("del", &["N", "increment", "cumulative", "radius"], &rows)?;
    if let Some(blocks) = &blocks {
        let rows: Vec<Vec<String>> = blocks
            .iter()
            .map(|b| {
                vec![
                    b.r.to_string(),
                    b.m.to_string(),
                    format!("{:e}", b.block_sum),
                    format!("{:e}", b.bound_with_derived_constants),
                ]
            })
            .collect();
        out.csv("del_blocks", &["r", "m", "block_sum", "bound_with_derived_constants"], &rows)?;
    }
    Ok(format!("del: N_max = {}, sum = {} ± {:e}", rep.n_max, rep.partial_sum, rep.radius))
}

fn cmd_partition(cfg: &RunConfig, s: &PrimeSchedule, out: &Reporter) -> Result<String, Failure> {
    let ctx = first_context(cfg, s)?;
    let p = &cfg.partition;
    let cert = verify_partition(p.i_start, p.m, &ctx, p.r, Exec::default())
        .map_err(|e| Failure::Lib(e.class(), e.to_string()))?;
    let fibers = match &p.fibers {
        Some(f) => Some(
            fiber_counts(f.start, f.length, p.m, &ctx, f.s, Exec::default())
                .map_err(|e| Failure::Lib(e.class(), e.to_string()))?,
        ),
        None => None,
    };
    out.json(&json!({ "certificate": cert, "fibers": fibers }))?;
    let rows: Vec<Vec<String>> = cert
        .class_sizes
        .iter()
        .enumerate()
        .map(|(c, n)| vec![c.to_string(), n.to_string()])
        .collect();
    out.csv("partition", &["class", "size"], &rows)?;
    let fibers_ok = fibers.as_ref().map_or(true, |f| f.ok);
    if !cert.ok || !fibers_ok {
        return Err(Failure::Lib(ErrorClass::Certification, "partition or fiber check failed".into()));
    }
    Ok(format!("partition: ok, J = {}, length {}", cert.j, cert.length))
}

fn sample_depth(cfg: &RunConfig, sys: &MoranSystem, depth: Option<usize>) -> Result<usize, Failure> {
    let d = depth.unwrap_or(sys.depth());
    if d == 0 || d > sys.depth() {
        return Err(Failure::Config(format!("sample depth {d} is outside 1..={}", sys.depth())));
    }
    let _ = cfg;
    Ok(d)
}

fn cmd_normality(cfg: &RunConfig, s: &PrimeSchedule, out: &Reporter) -> Result<String, Failure> {
    let sys = primary_system(cfg, s)?;
    let n = &cfg.normality;
    let depth = sample_depth(cfg, &sys, n.depth)?;
    let pts = sample_batch(&sys, cfg.seed, depth, n.samples, Exec::default()).map_err(lib(ErrorClass::Precondition))?;
    let reports = Exec::default().map(&pts, |p| {
        normality_report(&p.value(), &n.bases, n.digits, Some(&p.denominator), n.guard).map(|r| (p.seed, r))
    });
    let mut rows = Vec::new();
    let mut records = Vec::new();
    for rep in reports {
        let (seed, reps) = rep.map_err(lib(ErrorClass::Precondition))?;
        for r in reps {
            rows.push(vec![
                seed.to_string(),
                depth.to_string(),
                r.base.to_string(),
                r.trusted_digit_count.to_string(),
                format!("{:e}", r.max_deviation),
                format!("{:e}", r.discrepancy),
            ]);
            records.push(json!({ "seed": seed, "report": r }));
        }
    }
    out.json(&records)?;
    out.csv("normality", &["seed", "depth", "base", "trusted_digits", "max_deviation", "discrepancy"], &rows)?;
    Ok(format!("normality: {} samples, {} rows", pts.len(), rows.len()))
}

fn cmd_uniqueness(cfg: &RunConfig, s: &PrimeSchedule, out: &Reporter) -> Result<String, Failure> {
    let sys = primary_system(cfg, s)?;
    let u = &cfg.uniqueness;
    let depth = sample_depth(cfg, &sys, u.depth)?;
    let rule = match (u.rule.as_str(), cfg.is_binary()) {
        ("step-one", _) | ("auto", true) => AvoidanceRule::step_one(&sys),
        ("step-three", _) | ("auto", false) => AvoidanceRule::step_three(&sys),
        (other, _) => return Err(Failure::Config(format!("unknown avoidance rule `{other}`"))),
    }
    .map_err(lib(ErrorClass::Precondition))?;
    let j_max = u.j_max.unwrap_or(depth.saturating_sub(1));
    let pts = sample_batch(&sys, cfg.seed, depth, u.samples, Exec::default()).map_err(lib(ErrorClass::Precondition))?;
    let verdicts = Exec::default().map(&pts, |p| uniqueness_avoidance(&p.value(), &sys, j_max, &rule));
    let mut rows = Vec::new();
    let mut failures = 0usize;
    for (p, v) in pts.iter().zip(verdicts) {
        let v = v.map_err(lib(ErrorClass::Precondition))?;
        let (label, first) = match &v {
            Verdict::Pass { .. } => ("PASS", String::new()),
            Verdict::Violation { j, .. } => {
                failures += 1;
                ("VIOLATION", j.to_string())
            }
        };
        rows.push(vec![p.seed.to_string(), j_max.to_string(), label.to_string(), first]);
    }
    out.json(&json!({
        "interval_lower": rule.lower().to_string(),
        "samples": pts.len(),
        "violations": failures,
    }))?;
    out.csv("uniqueness", &["seed", "j_max", "verdict", "first_violation_j"], &rows)?;
    if failures > 0 {
        return Err(Failure::Lib(ErrorClass::Certification, format!("{failures} samples hit the interval")));
    }
    Ok(format!("uniqueness: {} samples pass, I = ({}, 1)", pts.len(), rule.lower()))
}

fn cmd_dimension(cfg: &RunConfig, s: &PrimeSchedule, out: &Reporter) -> Result<String, Failure> {
    let depth = cfg.depth(s).map_err(Failure::Config)?;
    let variant = cfg.convolved_variant().map_err(Failure::Config)?;
    let dc = &cfg.dimension;
    let cs = build_convolved(s, depth, variant.clone()).map_err(|e| Failure::Lib(e.class(), e.to_string()))?;
    let dim_one = matches!(variant, ConvolvedVariant::DimOne);
    let gauge = match (&dc.mass_gauge, &variant) {
        (Some(g), _) => g.clone(),
        (None, ConvolvedVariant::DimOne) => Gauge::Power { s: 0.5 },
        (None, ConvolvedVariant::Gauge { gauge } | ConvolvedVariant::Extreme { gauge, .. }) => gauge.clone(),
    };
    let constant = dc.constant.unwrap_or(if dim_one { 8.0 } else { 4.0 });
    let dl = |e: moran::dimension::DimError| Failure::Lib(e.class(), e.to_string());

    let pts = sample_batch(&cs.lambda, cfg.seed, depth, dc.samples, Exec::default()).map_err(lib(ErrorClass::Precondition))?;
    let grid = log_spaced_grid(s, depth, dc.r_points).map_err(dl)?;
    let mass = mass_grid(&pts, &grid, &cs, constant, &gauge, Exec::default()).map_err(dl)?;
    let max_ratio = mass.iter().map(|r| r.ratio).fold(0.0, f64::max);

    let mut local_rows = Vec::new();
    let mut local_min: Option<f64> = None;
    for p in &pts {
        for row in local_dim_series(p, &cs.lambda, dc.burn_in).map_err(dl)? {
            if row.n == p.depth {
                if let Some(m) = row.running_min {
                    local_min = Some(local_min.map_or(m, |v| v.min(m)));
                }
            }
            local_rows.push(vec![
                p.seed.to_string(),
                row.n.to_string(),
                format!("{:e}", row.term),
                row.running_min.map(|m| format!("{m:e}")).unwrap_or_default(),
            ]);
        }
    }

    let k = dc.h_rate_k.unwrap_or(30.min(s.depth().saturating_sub(1)));
    let hr = h_rate_report(s, &product_grid(s, k).map_err(dl)?).map_err(dl)?;
    let checks = cs.verify_convolution();
    let convolution_ok = checks.iter().all(|c| c.weights_match);

    out.json(&json!({
        "variant": variant,
        "depth": depth,
        "mass_gauge": gauge,
        "constant": constant,
        "sparse_index_set": cs.sparse,
        "convolution_ok": convolution_ok,
        "max_mass_ratio": max_ratio,
        "local_dim_running_min": local_min,
        "h_rate_strictly_decreasing": strictly_decreasing(&hr),
    }))?;
    let mass_rows: Vec<Vec<String>> = mass
        .iter()
        .map(|r| {
            vec![
                r.x_seed.to_string(),
                r.r_num.clone(),
                r.r_den.clone(),
                r.h_r.to_string(),
                r.ball_measure_num.clone(),
                r.ball_measure_den.clone(),
                format!("{:e}", r.phi_r),
                format!("{:e}", r.ratio),
            ]
        })
        .collect();
    out.csv(
        "dimension",
        &["x_seed", "r_num", "r_den", "h_r", "ball_measure_num", "ball_measure_den", "phi_r", "ratio"],
        &mass_rows,
    )?;
    out.csv("dimension_local", &["seed", "n", "term", "running_min"], &local_rows)?;
    let hr_rows: Vec<Vec<String>> = hr
        .iter()
        .map(|r| {
            vec![
                format!("{:e}", r.ln_inv_r),
                r.h.to_string(),
                format!("{:e}", r.ratio),
                r.band.map(|b| format!("{b:e}")).unwrap_or_default(),
            ]
        })
        .collect();
    out.csv("dimension_h_rate", &["ln_inv_r", "h", "ratio", "band"], &hr_rows)?;
    if !convolution_ok {
        return Err(Failure::Lib(ErrorClass::Certification, "convolution weights do not match".into()));
    }
    Ok(format!(
        "dimension: max ball ratio {max_ratio:.4} over {} rows, local-dimension minimum {}",
        mass.len(),
        local_min.map(|m| format!("{m:.4}")).unwrap_or_else(|| "n/a".into())
    ))
}
