//! Acceptance run: one PASS/FAIL line per criterion, with the wall-clock
//! budget checked alongside the result. Tolerances and sizes are fixed here.

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use moran::delsum::del_partial;
use moran::dimension::{
    ball_measure, build_convolved, gauge_mass_ratio, h_rate_report, log_spaced_grid, power_mass_check,
    product_grid, strictly_decreasing, ConvolvedVariant, Gauge,
};
use moran::distribution::{
    c_bound_for, classify_bk, fiber_counts, monotonicity_check, stirling_check, verify_partition,
};
use moran::exec::{with_workers, Exec};
use moran::fourier::{mu_hat_modulus, DigitLevel, MoranSystem};
use moran::measure::{
    normality_report, rng_from_seed, sample_batch, uniform_below, uniqueness_avoidance, AvoidanceRule,
    Verdict, DEFAULT_GUARD,
};
use moran::numtheory::{
    alpha, brute_force_order, build_context, multiplicative_order, order_by_crt, prime_power_order,
    BaseContext, Factorization, WeightBounds,
};
use moran::primes::factor_u64;
use moran::radix::{
    build_schedule, build_schedule_with, to_digits_padded, EllRule, PrimeSchedule, ScheduleVariant,
};
use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::{BigRational, Ratio};
use num_traits::{ToPrimitive, Zero};
use rand_core::RngCore;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// `(q, ℓ, b, h, r)`: Q = 1 and Q > 1, prime and composite b, several h.
const MATRIX: &[(&[u64], &[usize], u64, i64, usize)] = &[
    (&[7, 11], &[1, 2], 2, 1, 2),
    (&[7, 11, 13], &[1, 2, 2], 2, 1, 3),
    (&[7, 11, 13], &[1, 2, 2], 2, 7, 2),
    (&[7, 11, 13], &[1, 2, 2], 2, 11, 3),
    (&[7, 11, 13], &[1, 2, 2], 5, 7, 3),
    (&[7, 11], &[1, 2], 14, 1, 2),
    (&[7, 11, 13], &[2, 2, 2], 14, 1, 3),
    (&[7, 11, 13], &[2, 2, 2], 21, 11, 3),
    (&[11, 13], &[1, 2], 10, 3, 2),
    (&[11, 13], &[1, 2], 6, 11, 2),
    (&[7, 17], &[2, 2], 3, 49, 2),
    (&[7, 17], &[2, 2], 7, -1, 2),
    (&[7, 17], &[2, 2], 10, 7, 2),
    (&[7, 13], &[1, 2], 3, 5, 2),
    (&[7, 11], &[2, 2], 6, 49, 2),
];

fn ctx(q: &[u64], ell: &[usize], b: u64, h: i64) -> BaseContext {
    let s = PrimeSchedule::new(1, ScheduleVariant::Custom, q.to_vec(), ell.to_vec()).unwrap();
    build_context(b, h, &s, WeightBounds::half()).unwrap()
}

fn schedule(count: usize) -> PrimeSchedule {
    build_schedule(1, count, ScheduleVariant::NthPrimeFrom7).unwrap()
}

fn dim_one_system(s: PrimeSchedule) -> MoranSystem {
    let levels = s.bases().map(|m| DigitLevel::UniformStep { count: 2 * (m / 4) + 2, step: 1 }).collect();
    MoranSystem::new(s, levels).unwrap()
}

fn order_oracles() -> Outcome {
    let mut pairs = 0u64;
    for n in 2..=2000u64 {
        let f = Factorization::of_u64(n);
        let pp = match factor_u64(n).as_slice() {
            [(p, e)] if *p != 2 => Some((*p, *e)),
            _ => None,
        };
        for a in 2..=50u64 {
            if a.gcd(&n) != 1 {
                continue;
            }
            pairs += 1;
            let want = brute_force_order(a, n).unwrap();
            let got = multiplicative_order(a, n).map_err(|e| format!("a={a} n={n}: {e}"))?;
            check(got == want, || format!("multiplicative_order({a}, {n}) = {got}, want {want}"))?;
            let crt = order_by_crt(a, &f).map_err(|e| format!("a={a} n={n}: {e}"))?;
            check(crt == BigUint::from(want), || format!("order_by_crt({a}, {n}) = {crt}, want {want}"))?;
            if let Some((p, e)) = pp {
                let o = prime_power_order(a, p, e).map_err(|e| e.to_string())?;
                check(o == BigUint::from(want), || format!("prime_power_order({a}, {p}^{e}) = {o}"))?;
            }
        }
    }
    Ok(format!("{pairs} coprime pairs"))
}

fn order_recursion_and_j() -> Outcome {
    let mut q_more = 0;
    let mut checks = 0;
    for &(q, ell, b, h, _) in MATRIX {
        let c = ctx(q, ell, b, h);
        if !c.q_is_one() {
            q_more += 1;
        }
        for s in c.r0..c.r_max {
            let (lhs, rhs) = c.ord_ratio_check(s).map_err(|e| e.to_string())?;
            check(lhs == rhs, || format!("{q:?} b={b} h={h} s={s}: {lhs} vs {rhs}"))?;
            checks += 1;
        }
        for r in c.r0 + 1..=c.r_max {
            let (_, rem) = c.j_quotient(r).map_err(|e| e.to_string())?;
            check(rem.is_zero(), || format!("{q:?} b={b} h={h} r={r}: J not integral"))?;
            // Brute-force order against the factored one.
            let m = c.modulus(r, 0).unwrap().to_u64().unwrap();
            if m <= 5_000_000 {
                let want = brute_force_order(b, m).unwrap();
                check(c.order(r).unwrap() == BigUint::from(want), || format!("ord mod {m}"))?;
            }
            checks += 1;
        }
    }
    let c = ctx(&[7, 11], &[1, 2], 14, 1);
    check(c.q == BigUint::from(7u32), || format!("b=14, q1=7 gives Q = {}", c.q))?;
    let toy = ctx(&[7, 11], &[1, 2], 2, 1);
    check(toy.j_quotient(2).unwrap().0 == BigUint::from(30u32), || "toy J".into())?;
    check(q_more >= 3, || format!("only {q_more} Q > 1 cases"))?;
    Ok(format!("{} configurations, {checks} identities, {q_more} with Q > 1", MATRIX.len()))
}

/// Length of the period of `h·bⁿ mod N_r` by iteration.
fn naive_period(c: &BaseContext, r: usize, start: u64) -> u64 {
    let nr = c.schedule.n_products()[r].to_u64().unwrap() as u128;
    let b = c.b as u128;
    let mut x0 = c.h_abs() as u128 % nr;
    for _ in 0..start {
        x0 = x0 * b % nr;
    }
    let mut x = x0 * b % nr;
    let mut l = 1;
    while x != x0 {
        x = x * b % nr;
        l += 1;
    }
    l
}

/// Mixed-radix digits of `|h|bⁿ − |h|bᵐ` from the full integer.
fn naive_digits(c: &BaseContext, n: u64, m: u64, len: usize) -> Vec<u64> {
    let h = BigUint::from(c.h_abs());
    let b = BigUint::from(c.b);
    let mut v = &h * b.pow(n as u32) - &h * b.pow(m as u32);
    c.schedule
        .bases()
        .take(len)
        .map(|base| {
            let d = (&v % base).to_u64().unwrap();
            v /= base;
            d
        })
        .collect()
}

fn partitions() -> Outcome {
    let toy = ctx(&[7, 11], &[1, 2], 2, 1);
    let ord847 = brute_force_order(2, 847).unwrap();
    check(ord847 == 330, || format!("ord_847(2) = {ord847}"))?;
    let cert = verify_partition(1, 0, &toy, 2, Exec::Parallel).map_err(|e| e.to_string())?;
    check(cert.ok && cert.length == 330 && cert.j == 30, || format!("toy: {cert:?}"))?;
    for &(q, ell, b, h, r) in MATRIX {
        let c = ctx(q, ell, b, h);
        let m = c.n0 - 1;
        let len = naive_period(&c, r, m + 1);
        let cert = verify_partition(m + 1, m, &c, r, Exec::Parallel).map_err(|e| format!("{q:?} b={b} h={h}: {e}"))?;
        check(cert.ok && cert.length == len, || format!("{q:?} b={b} h={h}: length {} vs {len}", cert.length))?;
        let positions = c.pi_positions(c.r0, r).unwrap();
        let depth = positions.last().unwrap() + 1;
        let y = c.free_product(c.r0, r).to_u64().unwrap();
        let mut tally: HashMap<Vec<u64>, u64> = HashMap::new();
        for n in m + 1..m + 1 + len {
            let d = naive_digits(&c, n, m, depth);
            *tally.entry(positions.iter().map(|&i| d[i]).collect()).or_default() += 1;
        }
        check(tally.len() as u64 == y && tally.values().all(|&v| v == cert.j), || {
            format!("{q:?} b={b} h={h}: brute-force tally disagrees")
        })?;
    }
    Ok(format!("toy J = 30 over 330, {} matrix entries", MATRIX.len()))
}

fn fibers() -> Outcome {
    let mut tables = 0;
    for &(q, ell, b, h, r) in MATRIX {
        let c = ctx(q, ell, b, h);
        let m = c.n0 - 1;
        for s in c.r0..r {
            let len = c.order(s + 1).unwrap().to_u64().unwrap();
            let t = fiber_counts(m + 1, len, m, &c, s, Exec::Parallel).map_err(|e| format!("{q:?} b={b} h={h}: {e}"))?;
            check(t.ok && t.product_rule_ok, || format!("{q:?} b={b} h={h} s={s}: {:?}", t.images))?;
            // Every Π value is hit equally often over a full period.
            let per = len / t.fine.len() as u64;
            check(t.fine.iter().all(|&v| v == per), || format!("{q:?} b={b} h={h}: uneven fibers"))?;
            tables += 1;
        }
    }
    Ok(format!("{tables} fiber tables"))
}

fn digit_count_bound() -> Outcome {
    let mut lambdas = 0u64;
    for &(q, ell, b, h, r) in MATRIX {
        let c = ctx(q, ell, b, h);
        let m = c.n0 - 1;
        let cert = verify_partition(m + 1, m, &c, r, Exec::Parallel).map_err(|e| e.to_string())?;
        let bounds: Vec<BigRational> = (0..=c.free_digits(c.r0, r))
            .map(|k| c_bound_for(k, &c, r).unwrap())
            .collect();
        for k in 0..cert.j as u32 {
            let hist = classify_bk(&cert.class_members(k), m, &c, r).map_err(|e| e.to_string())?;
            for (kk, &cnt) in hist.counts.iter().enumerate() {
                check(BigRational::from_integer(cnt.into()) <= bounds[kk], || {
                    format!("{q:?} b={b} h={h} class {k}: #B_{kk} = {cnt}")
                })?;
            }
            lambdas += 1;
        }
    }
    Ok(format!("{lambdas} certified classes"))
}

fn constants() -> Outcome {
    let a = alpha();
    check(a > 0.9973 && a < 0.9980, || format!("alpha = {a}"))?;
    let mono = monotonicity_check(200);
    check(mono.mismatches.is_empty(), || format!("crossover mismatches {:?}", mono.mismatches))?;
    let st = stirling_check(6000);
    check(st.holds, || format!("{st:?}"))?;
    Ok(format!("alpha = {a:.6}, {} crossover pairs, u = 6000 holds", mono.pairs_checked))
}

fn fourier() -> Outcome {
    let s = schedule(5);
    let n3 = s.n_products()[3].to_u64().unwrap();
    let sys = MoranSystem::binary(s.clone(), Ratio::new(1, 2)).unwrap();
    let cs = build_convolved(&s, s.depth(), ConvolvedVariant::DimOne).map_err(|e| e.to_string())?;
    let mut rng = rng_from_seed(7);
    let xis: Vec<u64> = (0..1000).map(|_| 1 + uniform_below(&mut rng, n3)).collect();
    let rows = Exec::Parallel.map(&xis, |&x| {
        let xi = BigInt::from(x);
        let coarse = mu_hat_modulus(&xi, &sys, 1e-6)?;
        let fine = mu_hat_modulus(&xi, &sys, 1e-12)?;
        let mu = mu_hat_modulus(&xi, &cs.mu, 1e-12)?;
        let lambda = mu_hat_modulus(&xi, &cs.lambda, 1e-12)?;
        Ok::<_, moran::fourier::FourierError>((x, coarse, fine, mu, lambda))
    });
    for row in rows {
        let (x, coarse, fine, mu, lambda) = row.map_err(|e| e.to_string())?;
        check(coarse.width() <= 1e-6 && coarse.lo <= fine.lo && fine.hi <= coarse.hi, || {
            format!("xi = {x}: {coarse:?} does not contain {fine:?}")
        })?;
        check(lambda.lo <= mu.hi, || format!("xi = {x}: |λ̂| > |μ̂|"))?;
    }
    for _ in 0..1000 {
        let n = rng.next_u64();
        let sidx = uniform_below(&mut rng, 3) as usize;
        let q = s.prime(sidx + 1);
        let k = uniform_below(&mut rng, s.multiplicity(sidx + 1) as u64) as usize;
        let pos = s.l_sums()[sidx] + k;
        let d = to_digits_padded(&BigUint::from(n), &s, pos + 1).unwrap().digits[pos];
        let den = &s.n_products()[sidx] * BigUint::from(q).pow(k as u32 + 1);
        let x = BigRational::new(BigInt::from(n), BigInt::from(den));
        let f = &x - x.floor();
        check(BigRational::new(d.into(), q.into()) <= f && f <= BigRational::new((d + 1).into(), q.into()), || {
            format!("sandwich fails at n={n}, s={sidx}, k={k}")
        })?;
    }
    Ok("1000 frequencies, 1000 sandwich triples".into())
}

fn del() -> Outcome {
    let sys = MoranSystem::binary(schedule(6), Ratio::new(1, 2)).unwrap();
    let one = del_partial(&sys, 2, 1, 1, 1e-12, Exec::Parallel).map_err(|e| e.to_string())?;
    check(one.partial_sum == 1.0, || format!("N_max = 1 gives {}", one.partial_sum))?;
    let a = with_workers(1, || del_partial(&sys, 2, 1, 50, 1e-12, Exec::Parallel)).map_err(|e| e.to_string())?;
    let b = with_workers(4, || del_partial(&sys, 2, 1, 50, 1e-12, Exec::Parallel)).map_err(|e| e.to_string())?;
    let gap = (a.partial_sum - a.diagonal - a.off_diagonal).abs();
    check(a.radius <= 1e-12, || format!("radius {}", a.radius))?;
    check(gap <= 1e-12, || format!("decomposition gap {gap}"))?;
    let ja = serde_json::to_string(&a).unwrap();
    check(ja == serde_json::to_string(&b).unwrap(), || "reports differ across worker counts".into())?;
    Ok(format!("sum(50) = {:.12} ± {:.1e}, gap {gap:.1e}", a.partial_sum, a.radius))
}

fn uniqueness() -> Outcome {
    let s = schedule(4);
    let binary = MoranSystem::binary(s.clone(), Ratio::new(1, 2)).unwrap();
    let dim_one = dim_one_system(s);
    let step_one = AvoidanceRule::step_one(&binary).map_err(|e| e.to_string())?;
    check(step_one.lower() == BigRational::new(2.into(), 7.into()), || format!("I starts at {}", step_one.lower()))?;
    let step_three = AvoidanceRule::step_three(&dim_one).map_err(|e| e.to_string())?;
    let mut lowers = Vec::new();
    for (sys, rule) in [(&binary, &step_one), (&dim_one, &step_three)] {
        let pts = sample_batch(sys, 2024, sys.depth(), 1000, Exec::Parallel).map_err(|e| e.to_string())?;
        let verdicts = Exec::Parallel.map(&pts, |p| uniqueness_avoidance(&p.value(), sys, sys.depth() - 1, rule));
        for (p, v) in pts.iter().zip(verdicts) {
            let v = v.map_err(|e| e.to_string())?;
            check(matches!(v, Verdict::Pass { .. }), || format!("seed {}: {v:?}", p.seed))?;
        }
        lowers.push(rule.lower().to_string());
    }
    Ok(format!("2 × 1000 samples, I = ({}, 1) and ({}, 1)", lowers[0], lowers[1]))
}

fn normality() -> Outcome {
    let s = build_schedule_with(1, 30, ScheduleVariant::NthPrimeFrom7, EllRule::Constant(40)).unwrap();
    let sys = MoranSystem::binary(s, Ratio::new(1, 2)).unwrap();
    let pts = sample_batch(&sys, 1, sys.depth(), 64, Exec::Parallel).map_err(|e| e.to_string())?;
    let reps = Exec::Parallel.map(&pts, |p| normality_report(&p.value(), &[2, 3, 10], 8000, Some(&p.denominator), DEFAULT_GUARD));
    let mut good = [0usize; 3];
    let mut min_trusted = u64::MAX;
    for r in reps {
        let r = r.map_err(|e| e.to_string())?;
        min_trusted = min_trusted.min(r[0].trusted_digit_count);
        for (i, rep) in r.iter().enumerate() {
            if rep.max_deviation <= 0.05 {
                good[i] += 1;
            }
        }
    }
    check(min_trusted >= 5000, || format!("only {min_trusted} trusted binary digits"))?;
    let need = (0.95 * 64.0f64).ceil() as usize;
    check(good.iter().all(|&g| g >= need), || format!("samples within 0.05 per base 2/3/10: {good:?}"))?;
    Ok(format!("≥ {min_trusted} binary digits, within 0.05: {good:?} of 64"))
}

fn mass() -> Outcome {
    let s = schedule(6);
    let depth = 16;
    let grid = log_spaced_grid(&s, depth, 20).map_err(|e| e.to_string())?;
    let gauge = Gauge::RTimesLogPower { c: 1.0 };
    let one = build_convolved(&s, depth, ConvolvedVariant::DimOne).map_err(|e| e.to_string())?;
    let g = build_convolved(&s, depth, ConvolvedVariant::Gauge { gauge: gauge.clone() }).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for (cs, dim_one) in [(&one, true), (&g, false)] {
        let pts = sample_batch(&cs.lambda, 11, depth, 32, Exec::Parallel).map_err(|e| e.to_string())?;
        for p in &pts {
            let x = p.value();
            for r in &grid {
                let b = ball_measure(&x, r, cs).map_err(|e| e.to_string())?;
                if dim_one {
                    check(power_mass_check(&b.bound, r, 8, Ratio::new(1, 2)), || format!("dim-one x={x} r={r}"))?;
                } else {
                    let ratio = gauge_mass_ratio(&b.bound, r, 4.0, &gauge).unwrap();
                    worst = worst.max(ratio);
                    check(ratio <= 1.0, || format!("gauge ratio {ratio} at x={x} r={r}"))?;
                }
            }
        }
    }
    Ok(format!("2 × 32 samples × {} radii, worst gauge ratio {worst:.4}", grid.len()))
}

fn h_rates() -> Outcome {
    let s = schedule(8);
    let rows = h_rate_report(&s, &product_grid(&s, 30).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    check(rows.len() == 30, || format!("{} grid points", rows.len()))?;
    check(strictly_decreasing(&rows), || "h(r)/log(1/r) is not strictly decreasing".into())?;
    Ok(format!("k ≤ 30, ratio {:.4} → {:.4}", rows[0].ratio, rows[29].ratio))
}

fn main() {
    let criteria: [(&str, u64, fn() -> Outcome); 12] = [
        ("order oracle equivalence", 30, order_oracles),
        ("order recursion and J integrality", 10, order_recursion_and_j),
        ("well-distributed partition", 60, partitions),
        ("fiber counts", 60, fibers),
        ("digit-count bound", 30, digit_count_bound),
        ("constants", 120, constants),
        ("Fourier certification", 120, fourier),
        ("DEL plumbing", 120, del),
        ("uniqueness avoidance", 60, uniqueness),
        ("normality statistics", 300, normality),
        ("mass distribution", 120, mass),
        ("h(r) rates", 10, h_rates),
    ];
    let mut failed = 0;
    for (i, (name, budget, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let res = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let el = t.elapsed();
        let over = el > Duration::from_secs(*budget);
        let (tag, detail) = match (&res, over) {
            (Ok(d), false) => ("PASS", d.clone()),
            (Ok(d), true) => ("FAIL", format!("{d}; over the {budget} s budget")),
            (Err(e), _) => ("FAIL", e.clone()),
        };
        if tag == "FAIL" {
            failed += 1;
        }
        println!("criterion {:>2} {tag}  {name} [{:.2} s / {budget} s]: {detail}", i + 1, el.as_secs_f64());
    }
    println!("acceptance: {} of 12 criteria pass", 12 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
