use moran::exec::Exec;
use moran::fourier::{DigitLevel, MoranSystem};
use moran::measure::{
    base_digits, normality_report, rng_from_seed, sample_batch, sample_point, support_digits,
    uniform_below, uniqueness_avoidance, AvoidanceRule, MeasureError, Verdict, DEFAULT_GUARD,
};
use moran::radix::{build_schedule, build_schedule_with, EllRule, PrimeSchedule, ScheduleVariant};
use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::{BigRational, Ratio};
use num_traits::{One, ToPrimitive, Zero};
use proptest::prelude::*;
use rand_core::RngCore;

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

/// `⌊b^{k+1} x⌋ mod b` straight from the definition.
fn naive_digit(x: &BigRational, b: u64, k: u32) -> u64 {
    let scaled = x * BigRational::from_integer(BigInt::from(b).pow(k + 1));
    scaled.floor().to_integer().mod_floor(&BigInt::from(b)).to_u64().unwrap()
}

fn dim_one_system(s: PrimeSchedule) -> MoranSystem {
    let levels = s
        .bases()
        .map(|m| DigitLevel::UniformStep { count: 2 * (m / 4) + 2, step: 1 })
        .collect();
    MoranSystem::new(s, levels).unwrap()
}

#[test]
fn base_digits_match_definition() {
    for (n, d) in [(12, 77), (1, 3), (5, 7), (999, 1000), (0, 1), (355, 1130)] {
        let x = q(n, d);
        for b in [2u64, 3, 7, 10, 16] {
            let bd = base_digits(&x, b, 40, None, 0).unwrap();
            let naive: Vec<u64> = (0..40).map(|k| naive_digit(&x, b, k)).collect();
            assert_eq!(bd.digits, naive, "{x} in base {b}");
            assert_eq!(bd.trusted, 40);
        }
    }
}

#[test]
fn sample_value_is_the_digit_sum() {
    let s = build_schedule(1, 4, ScheduleVariant::NthPrimeFrom7).unwrap();
    let sys = MoranSystem::binary(s.clone(), Ratio::new(1, 3)).unwrap();
    let p = sample_point(&sys, 7, 8).unwrap();
    let mut v = BigRational::zero();
    let mut den = BigInt::one();
    for (d, m) in p.digits.iter().zip(s.bases()) {
        den *= m;
        v += BigRational::new(BigInt::from(*d), den.clone());
    }
    assert_eq!(p.value(), v);
    assert!(p.value() < BigRational::one());
    assert!((p.denominator.clone() % BigUint::try_from(v.denom().clone()).unwrap()).is_zero());
}

#[test]
fn sampler_follows_weights() {
    let s = PrimeSchedule::new(1, ScheduleVariant::Custom, vec![7], vec![1]).unwrap();
    let w = [Ratio::new(1, 10), Ratio::new(3, 10), Ratio::new(6, 10)];
    let level = DigitLevel::Explicit { digits: vec![0, 2, 5], weights: w.to_vec() };
    let sys = MoranSystem::new(s, vec![level]).unwrap();
    let n = 20_000u64;
    let pts = sample_batch(&sys, 11, 1, n, Exec::default()).unwrap();
    for (d, wt) in [0u64, 2, 5].iter().zip(w) {
        let c = pts.iter().filter(|p| p.digits[0] == *d).count() as f64;
        let p = wt.to_f64().unwrap();
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((c - n as f64 * p).abs() < 5.0 * sd, "digit {d}: {c}");
    }
}

#[test]
fn batch_is_seed_xor_index() {
    let s = build_schedule(1, 3, ScheduleVariant::NthPrimeFrom7).unwrap();
    let sys = MoranSystem::binary(s, Ratio::new(1, 2)).unwrap();
    let par = sample_batch(&sys, 1234, 6, 64, Exec::Parallel).unwrap();
    let seq = sample_batch(&sys, 1234, 6, 64, Exec::Sequential).unwrap();
    assert_eq!(par, seq);
    for (i, p) in par.iter().enumerate() {
        assert_eq!(p, &sample_point(&sys, 1234 ^ i as u64, 6).unwrap());
    }
}

#[test]
fn uniform_below_is_unbiased_on_small_ranges() {
    let mut rng = rng_from_seed(5);
    let mut counts = [0u64; 7];
    for _ in 0..70_000 {
        counts[uniform_below(&mut rng, 7) as usize] += 1;
    }
    for c in counts {
        assert!((c as f64 - 10_000.0).abs() < 500.0, "{counts:?}");
    }
    // Distinct seeds give distinct streams.
    assert_ne!(rng_from_seed(1).next_u64(), rng_from_seed(2).next_u64());
}

#[test]
fn long_binary_expansion_is_balanced() {
    let s = build_schedule_with(1, 30, ScheduleVariant::NthPrimeFrom7, EllRule::Constant(40)).unwrap();
    let sys = MoranSystem::binary(s, Ratio::new(1, 2)).unwrap();
    for seed in 0..5u64 {
        let p = sample_point(&sys, seed, sys.depth()).unwrap();
        let rep = normality_report(&p.value(), &[2], 8000, Some(&p.denominator), DEFAULT_GUARD).unwrap();
        let r = &rep[0];
        assert!(r.trusted_digit_count >= 5000, "{}", r.trusted_digit_count);
        assert_eq!(r.counts.iter().sum::<u64>(), r.trusted_digit_count);
        assert!(r.max_deviation < 0.03, "seed {seed}: {}", r.max_deviation);
        assert!(!r.periodic);
    }
}

#[test]
fn trusted_count_respects_guard() {
    let s = build_schedule(1, 4, ScheduleVariant::NthPrimeFrom7).unwrap();
    let sys = MoranSystem::binary(s, Ratio::new(1, 2)).unwrap();
    let p = sample_point(&sys, 3, sys.depth()).unwrap();
    for b in [2u64, 3, 10] {
        let mut cap = 0u64;
        let mut pow = BigUint::from(b);
        while pow <= p.denominator {
            pow *= b;
            cap += 1;
        }
        let bd = base_digits(&p.value(), b, 10_000, Some(&p.denominator), DEFAULT_GUARD).unwrap();
        assert!(bd.trusted <= cap - DEFAULT_GUARD);
        assert_eq!(bd.digits.len() as u64, bd.trusted);
    }
}

#[test]
fn step_three_examples() {
    let s = build_schedule(1, 3, ScheduleVariant::NthPrimeFrom7).unwrap();
    let sys = dim_one_system(s);
    let rule = AvoidanceRule::step_three(&sys).unwrap();
    // a_n = 2⌊M/4⌋ gives ratios 3/7, 5/11, 7/13 and c = 7/13.
    match &rule {
        AvoidanceRule::StepIII { c, subsequence } => {
            assert_eq!(c, &q(7, 13));
            assert_eq!(subsequence.len(), sys.depth());
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(rule.lower(), q(7, 13) + q(1, 6));
    // Digit 4 > a_1 + 1 = 3 is outside the support.
    assert!(matches!(
        uniqueness_avoidance(&q(4, 7), &sys, 1, &rule),
        Err(MeasureError::NotInSupport(_))
    ));
    // Full digit sets admit no interval.
    let s = build_schedule(1, 2, ScheduleVariant::NthPrimeFrom7).unwrap();
    let full = MoranSystem::new(
        s.clone(),
        s.bases().map(|m| DigitLevel::UniformStep { count: m, step: 1 }).collect(),
    )
    .unwrap();
    assert!(matches!(AvoidanceRule::step_three(&full), Err(MeasureError::InvalidInterval(_))));
}

#[test]
fn interval_violation_is_reported() {
    // Digits (0, 6) on bases 7, 11 are in the full digit set, and {7x} = 6/11.
    let s = PrimeSchedule::new(1, ScheduleVariant::Custom, vec![7, 11], vec![1, 1]).unwrap();
    let sys = MoranSystem::new(
        s,
        vec![DigitLevel::UniformStep { count: 2, step: 1 }, DigitLevel::UniformStep { count: 7, step: 1 }],
    )
    .unwrap();
    let rule = AvoidanceRule::StepI { l: q(1, 7) };
    let v = uniqueness_avoidance(&q(6, 77), &sys, 2, &rule).unwrap();
    assert_eq!(v.first_violation(), Some(1));
    assert_eq!(support_digits(&q(6, 77), &sys).unwrap(), vec![0, 6]);
    let bad = AvoidanceRule::StepI { l: q(1, 2) };
    assert!(matches!(
        uniqueness_avoidance(&q(6, 77), &sys, 2, &bad),
        Err(MeasureError::InvalidInterval(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn truncation_honesty(seed in any::<u64>(), b in 2u64..17) {
        let s = build_schedule(1, 4, ScheduleVariant::NthPrimeFrom7).unwrap();
        let sys = MoranSystem::binary(s, Ratio::new(1, 2)).unwrap();
        let p = sample_point(&sys, seed, sys.depth()).unwrap();
        let x = p.value();
        let bd = base_digits(&x, b, 200, Some(&p.denominator), DEFAULT_GUARD).unwrap();
        let upper = &x + BigRational::new(BigInt::one(), BigInt::from(p.denominator.clone()));
        for (k, d) in bd.digits.iter().enumerate() {
            prop_assert_eq!(*d, naive_digit(&upper, b, k as u32));
            prop_assert_eq!(*d, naive_digit(&x, b, k as u32));
        }
    }

    #[test]
    fn sampled_points_avoid_the_interval(seed in any::<u64>(), step_one in any::<bool>()) {
        let s = build_schedule(1, 4, ScheduleVariant::NthPrimeFrom7).unwrap();
        let sys = if step_one {
            MoranSystem::binary(s, Ratio::new(1, 2)).unwrap()
        } else {
            dim_one_system(s)
        };
        let rule = if step_one {
            AvoidanceRule::step_one(&sys).unwrap()
        } else {
            AvoidanceRule::step_three(&sys).unwrap()
        };
        let p = sample_point(&sys, seed, sys.depth()).unwrap();
        let v = uniqueness_avoidance(&p.value(), &sys, sys.depth() - 1, &rule).unwrap();
        prop_assert!(matches!(v, Verdict::Pass { .. }), "{:?}", v);
        for (i, d) in p.digits.iter().enumerate() {
            prop_assert!(sys.level(i + 1).contains(*d));
        }
    }

    #[test]
    fn frequencies_sum_to_one(n in 0u64..10_000, d in 1u64..10_000, b in 2u64..12) {
        prop_assume!(n < d);
        let x = BigRational::new(n.into(), d.into());
        let r = &normality_report(&x, &[b], 300, None, 0).unwrap()[0];
        prop_assert_eq!(r.counts.iter().sum::<u64>(), 300);
        prop_assert!((r.frequencies.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(r.discrepancy <= 1.0);
    }
}
