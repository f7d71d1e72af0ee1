use moran::fourier::{digit_decay_bound, mu_hat_modulus, MoranSystem};
use moran::numtheory::{build_context, WeightBounds};
use moran::radix::{build_schedule, to_digits_padded, PrimeSchedule, ScheduleVariant};
use num_bigint::{BigInt, BigUint};
use num_rational::{BigRational, Ratio};
use num_traits::ToPrimitive;
use proptest::prelude::*;

fn schedule() -> PrimeSchedule {
    build_schedule(1, 5, ScheduleVariant::NthPrimeFrom7).unwrap()
}

fn n3() -> u64 {
    schedule().n_products()[3].to_u64().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn coarse_interval_holds_fine_value(xi in 0u64..1_860_000, w in 1u64..10) {
        prop_assume!(xi < n3());
        let sys = MoranSystem::binary(schedule(), Ratio::new(w, 10)).unwrap();
        let xi = BigInt::from(xi);
        let coarse = mu_hat_modulus(&xi, &sys, 1e-6).unwrap();
        let fine = mu_hat_modulus(&xi, &sys, 1e-12).unwrap();
        prop_assert!(coarse.width() <= 1e-6 && fine.width() <= 1e-12);
        prop_assert!(coarse.lo <= fine.hi && fine.lo <= coarse.hi, "{coarse:?} {fine:?}");
        prop_assert!(coarse.lo - 1e-12 <= fine.mid() && fine.mid() <= coarse.hi + 1e-12);
    }

    #[test]
    fn decay_bound_dominates(xi in 0u64..1_860_000) {
        let s = schedule();
        let sys = MoranSystem::binary(s.clone(), Ratio::new(1, 2)).unwrap();
        let ctx = build_context(2, 1, &s, WeightBounds::half()).unwrap();
        let xi = BigInt::from(xi);
        let m = mu_hat_modulus(&xi, &sys, 1e-10).unwrap();
        let d = digit_decay_bound(&xi, &sys, &ctx).unwrap();
        prop_assert!(m.lo <= d.bound + 1e-9, "{m:?} {d:?}");
    }

    #[test]
    fn symmetric_in_sign(xi in 1u64..u64::MAX) {
        let long = build_schedule(1, 8, ScheduleVariant::NthPrimeFrom7).unwrap();
        let sys = MoranSystem::binary(long, Ratio::new(1, 3)).unwrap();
        let a = mu_hat_modulus(&BigInt::from(xi), &sys, 1e-9).unwrap();
        let b = mu_hat_modulus(&-BigInt::from(xi), &sys, 1e-9).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn fractional_part_sandwich(n in any::<u64>(), s in 0usize..3, k_seed in 0usize..100) {
        let sch = schedule();
        let q = sch.prime(s + 1);
        let k = k_seed % sch.multiplicity(s + 1);
        let pos = sch.l_sums()[s] + k;
        let n_big = BigUint::from(n);
        let digits = to_digits_padded(&n_big, &sch, pos + 1).unwrap().digits;
        let d = digits[pos];
        let den = &sch.n_products()[s] * BigUint::from(q).pow(k as u32 + 1);
        let x = BigRational::new(BigInt::from(n_big), BigInt::from(den));
        let f = &x - x.floor();
        prop_assert!(BigRational::new(d.into(), q.into()) <= f);
        prop_assert!(f <= BigRational::new((d + 1).into(), q.into()));
    }
}
