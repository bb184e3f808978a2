use ctype_lab::ctype::CTypeOperator;
use ctype_lab::orbit::{exact_density_of_periodic, visit_series};
use ctype_lab::presets::{self, preset};
use ctype_lab::{ExactScalar, FiniteVector, SpaceExponent};
use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;

fn small_op(name: &str, n_max: u64) -> CTypeOperator {
    CTypeOperator::new(preset(name).unwrap().family(None), n_max, SpaceExponent::L2).unwrap()
}

fn big_rat(n: i64, d: i64, e: i32) -> BigRational {
    let r = BigRational::new(BigInt::from(n), BigInt::from(d));
    if e >= 0 {
        r * BigRational::from_integer(BigInt::from(1) << e as usize)
    } else {
        r / BigRational::from_integer(BigInt::from(1) << (-e) as usize)
    }
}

// ---- oracle cases -------------------------------------------------------

#[test]
fn scalar_matches_rational_oracle() {
    let cases = [(3, 4, 0, -5, 6, 2), (-7, 9, 10, 1, 3, -12), (0, 1, 0, 5, 1, 40)];
    for (n1, d1, e1, n2, d2, e2) in cases {
        let a = &ExactScalar::dyadic(n1, e1 as i64) / &ExactScalar::from_int(d1);
        let b = &ExactScalar::dyadic(n2, e2 as i64) / &ExactScalar::from_int(d2);
        let (ra, rb) = (big_rat(n1, d1, e1), big_rat(n2, d2, e2));
        assert_eq!((&a + &b).to_rational().unwrap(), &ra + &rb);
        assert_eq!((&a * &b).to_rational().unwrap(), &ra * &rb);
        assert_eq!((&a - &b).to_rational().unwrap(), &ra - &rb);
    }
}

#[test]
fn basis_vector_at_block_start_has_block_period() {
    let op = small_op("example55-small", 7);
    for n in 0..=7 {
        let blk = op.block(n).unwrap();
        let e = FiniteVector::basis(blk.start);
        assert_eq!(op.period_of(&e).unwrap(), blk.period(), "block {n}");
    }
}

#[test]
fn every_preset_validates_on_its_default_horizon() {
    for p in presets::presets() {
        let family = p.family(None);
        let n = presets::fit_horizon(&family, 63);
        let report = ctype_lab::ctype::validate(&family, n).unwrap();
        assert!(report.is_valid(), "{}: {:?}", p.name, report.violations);
    }
}

// ---- properties ---------------------------------------------------------

fn scalar() -> impl Strategy<Value = (ExactScalar, BigRational)> {
    (-1000i64..1000, 1i64..50, -40i32..40).prop_map(|(n, d, e)| {
        let s = &ExactScalar::dyadic(n, e as i64) / &ExactScalar::from_int(d);
        (s, big_rat(n, d, e))
    })
}

fn sparse_vector(max_index: u64) -> impl Strategy<Value = FiniteVector> {
    prop::collection::vec((0..max_index, -8i64..8, 0i64..4), 0..5)
        .prop_map(|v| FiniteVector::from_pairs(v.into_iter().map(|(k, m, e)| (k, ExactScalar::dyadic(m, -e)))))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scalar_arithmetic_agrees_with_big_rationals((a, ra) in scalar(), (b, rb) in scalar()) {
        prop_assert_eq!((&a + &b).to_rational().unwrap(), &ra + &rb);
        prop_assert_eq!((&a * &b).to_rational().unwrap(), &ra * &rb);
        prop_assert_eq!(a.cmp(&b), ra.cmp(&rb));
        if !b.is_zero() {
            prop_assert_eq!(a.checked_div(&b).unwrap().to_rational().unwrap(), &ra / &rb);
        }
    }

    #[test]
    fn scalar_text_forms_round_trip((a, _) in scalar()) {
        prop_assert_eq!(ExactScalar::parse(&a.to_fraction_string()).unwrap(), a.clone());
        let dyadic = a.to_dyadic_string().replace('·', "*");
        prop_assert_eq!(ExactScalar::parse(&dyadic).unwrap(), a);
    }

    #[test]
    fn powers_of_two_only_move_the_exponent(e1 in -1_000_000i64..1_000_000, e2 in -1_000_000i64..1_000_000) {
        let p = &ExactScalar::pow2(e1) * &ExactScalar::pow2(e2);
        prop_assert_eq!(p, ExactScalar::pow2(e1 + e2));
        prop_assert!(ExactScalar::pow2(e1).is_signed_power_of_two());
    }

    #[test]
    fn operator_is_linear(x in sparse_vector(64), y in sparse_vector(64), (a, _) in scalar()) {
        let op = small_op("example55-small", 5);
        let lhs = op.apply(&x.combine(&a, &y, &ExactScalar::one())).unwrap();
        let rhs = op.apply(&x).unwrap().combine(&a, &op.apply(&y).unwrap(), &ExactScalar::one());
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn apply_power_agrees_with_repeated_steps(x in sparse_vector(64), j in 0u64..120) {
        let op = small_op("example55-small", 5);
        let mut y = x.clone();
        for _ in 0..j {
            y = op.apply(&y).unwrap();
        }
        prop_assert_eq!(op.apply_power(&x, j).unwrap(), y);
    }

    #[test]
    fn finite_vectors_return_after_their_period(x in sparse_vector(64)) {
        let op = small_op("example55-small", 5);
        let per = op.period_of(&x).unwrap();
        let mut y = x.clone();
        for _ in 0..per {
            y = op.apply(&y).unwrap();
        }
        prop_assert_eq!(y, x);
    }

    #[test]
    fn block_geometry_is_consistent(k in 0u64..2000) {
        let op = small_op("example55-small", 7);
        prop_assume!(k < op.index_limit());
        let n = op.block_of(k).unwrap();
        prop_assert!(op.b(n).unwrap() <= k && k < op.b(n + 1).unwrap());
    }

    #[test]
    fn norms_of_sums_obey_the_triangle_inequality(x in sparse_vector(200), y in sparse_vector(200)) {
        let s = x.add(&y);
        prop_assert!(s.norm_l1() <= &x.norm_l1() + &y.norm_l1());
        prop_assert!(s.norm_sup() <= &x.norm_sup() + &y.norm_sup());
        let radius = &x.norm_sq_l2().sqrt_upper(32).unwrap() + &y.norm_sq_l2().sqrt_upper(32).unwrap();
        prop_assert!(s.in_ball(&FiniteVector::zero(), &radius.square(), SpaceExponent::L2).unwrap());
    }

    #[test]
    fn periodic_density_equals_density_over_whole_periods(x in sparse_vector(40), reps in 1u64..3) {
        let op = small_op("example55-small", 4);
        let zero = FiniteVector::zero();
        let eps = ExactScalar::ratio(1, 4);
        let per = op.period_of(&x).unwrap();
        let exact = exact_density_of_periodic(&op, &x, &zero, &eps).unwrap();
        let series = visit_series(&op, &x, &zero, &eps, reps * per - 1).unwrap();
        prop_assert_eq!(series.density_at(reps * per - 1), exact);
    }
}
