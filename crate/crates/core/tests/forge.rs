use ctype_lab::ctype::CTypeOperator;
use ctype_lab::forge::{
    build_chaotic, build_fhc, build_ufhc, check_fhc_hits, cplus_approximant, default_targets, oracle_cplus, orbit_sup_bound, BuilderKind,
    CPlusOracle, ForgeError, Fraction, OracleRequest, StagedVector, Window,
};
use ctype_lab::presets::{example59_small, preset};
use ctype_lab::{ExactScalar, FiniteVector, SpaceExponent};
use proptest::prelude::*;

fn op(name: &str, n_max: u64) -> CTypeOperator {
    let family = preset(name).expect("registered preset").family(None);
    CTypeOperator::new(family, n_max, SpaceExponent::L2).unwrap()
}

fn report_failures(sv: &StagedVector) -> Vec<String> {
    let mut out = Vec::new();
    for s in &sv.stages {
        for c in s.checks.iter().filter(|c| !c.holds) {
            out.push(format!("stage {}: {} ({})", s.index, c.name, c.statement));
        }
    }
    for c in sv.final_checks.iter().filter(|c| !c.holds) {
        out.push(format!("final: {} ({})", c.name, c.statement));
    }
    for d in sv.densities.iter().filter(|d| !d.holds) {
        out.push(format!("density for x_{}: {} < {}", d.target, d.measured_exact, d.required));
    }
    out
}

#[test]
fn approximant_is_linear_in_the_target() {
    let op = CTypeOperator::new(example59_small(), 15, SpaceExponent::L2).unwrap();
    let b1 = op.b(1).unwrap();
    let x = FiniteVector::basis(0);
    let y = FiniteVector::basis(b1);
    let (k, m) = (3, 2 * 2688);
    let zx = cplus_approximant(&op, &x, k, m).unwrap();
    let zy = cplus_approximant(&op, &y, k, m).unwrap();
    let zxy = cplus_approximant(&op, &x.add(&y), k, m).unwrap();
    assert_eq!(zxy, zx.add(&zy));
    let three = ExactScalar::from_int(3);
    assert_eq!(cplus_approximant(&op, &x.scale(&three), k, m).unwrap(), zx.scale(&three));
}

#[test]
fn approximant_maps_back_onto_the_target() {
    let op = CTypeOperator::new(example59_small(), 15, SpaceExponent::L2).unwrap();
    let b1 = op.b(1).unwrap();
    let x = FiniteVector::from_pairs([(0, ExactScalar::one()), (b1 + 2, ExactScalar::ratio(-1, 2))]);
    let (k, m) = (3, 2 * 2688);
    let z = cplus_approximant(&op, &x, k, m).unwrap();
    let residual = op.apply_power(&z, m).unwrap().sub(&x);
    // The remainder sits at the start of the host blocks 4 and 5.
    for (q, _) in residual.entries() {
        let n = op.block_of(*q).unwrap();
        assert!(n == 4 || n == 5, "remainder in block {n}");
    }
}

#[test]
fn oracle_rejects_non_cplus_operators() {
    let op = op("c2mix-small", 7);
    let req = OracleRequest::simple(FiniteVector::basis(0), ExactScalar::pow2(-2));
    assert_eq!(oracle_cplus(&op, &req, 4), Err(ForgeError::NotCPlus));
}

#[test]
fn oracle_answer_meets_the_request() {
    let op = CTypeOperator::new(example59_small(), 15, SpaceExponent::L2).unwrap();
    let mut req = OracleRequest::simple(FiniteVector::basis(0), ExactScalar::pow2(-3));
    req.small_window = Window::Fixed(40);
    req.residual_window = Window::ShareOfShift(Fraction::new(1, 8));
    req.modulus = 128;
    let ans = oracle_cplus(&op, &req, 4).unwrap();
    assert_eq!(ans.n % 128, 0);
    assert!(ans.small_bound < req.small_radius);
    assert!(ans.residual_bound < req.residual_radius);
    // Brute-force the residual window.
    let mut r = op.apply_power(&ans.z, ans.n).unwrap().sub(&req.target);
    for _ in 0..=ans.residual_window {
        assert!(r.norm_sq_l2() < req.residual_radius.square());
        r = op.apply(&r).unwrap();
    }
}

#[test]
fn oracle_reports_exhausted_search() {
    let op = CTypeOperator::new(example59_small(), 3, SpaceExponent::L2).unwrap();
    let req = OracleRequest::simple(FiniteVector::basis(0), ExactScalar::pow2(-400));
    assert!(matches!(oracle_cplus(&op, &req, 4), Err(ForgeError::NotFound { .. })));
}

#[test]
fn chaotic_single_stage() {
    let op = op("example55-small", 2047);
    let targets = default_targets(&op, 1).unwrap();
    let sv = build_chaotic(&CPlusOracle::default(), &op, &targets, 1).unwrap();
    assert_eq!(sv.kind, BuilderKind::Chaotic);
    assert!(sv.all_hold(), "{:?}", report_failures(&sv));
    let z = sv.vector();
    let hit = op.apply_power(&z, sv.stages[0].n).unwrap().sub(&targets[0]);
    assert!(hit.norm_sq_l2() <= ExactScalar::one());
}

#[test]
fn chaotic_six_stages() {
    let op = op("example55-small", 2047);
    let targets = default_targets(&op, 4).unwrap();
    let sv = build_chaotic(&CPlusOracle::default(), &op, &targets, 6).unwrap();
    assert_eq!(sv.stages.len(), 6);
    assert!(sv.all_hold(), "{:?}", report_failures(&sv));
    let ns = sv.shifts();
    assert!(ns.windows(2).all(|w| w[0] < w[1]));
    assert!(sv.reverify(&op).unwrap());
}

#[test]
fn ufhc_four_stages_reach_the_density() {
    let op = op("example59-small", 15);
    let targets = default_targets(&op, 1).unwrap();
    let sv = build_ufhc(&CPlusOracle::default(), &op, Fraction::new(1, 8), &targets, 4).unwrap();
    assert!(sv.all_hold(), "{:?}", report_failures(&sv));
    let d = &sv.densities[0];
    assert!(d.holds);
    // α/((1+α)·per(e_0)) with per(e_0) = 2.
    assert_eq!(d.analytic_bound, ExactScalar::ratio(1, 18));
}

#[test]
fn fhc_three_stages_reach_the_density() {
    let op = op("fhc-small", 7);
    let targets = default_targets(&op, 1).unwrap();
    let sv = build_fhc(&CPlusOracle::default(), &op, Fraction::new(1, 8), &targets, 3).unwrap();
    assert!(sv.all_hold(), "{:?}", report_failures(&sv));
    let (count, ok) = check_fhc_hits(&sv, &op, 1).unwrap();
    assert!(count > 0 && ok);
    // α^{r+2}/(2^{r+2}·per) with r = 1, per = 2.
    assert_eq!(sv.densities[0].analytic_bound, ExactScalar::ratio(1, 8192));
}

#[test]
fn staged_vector_json_round_trip() {
    let op = op("example59-small", 15);
    let targets = default_targets(&op, 1).unwrap();
    let sv = build_ufhc(&CPlusOracle::default(), &op, Fraction::new(1, 8), &targets, 2).unwrap();
    let json = serde_json::to_string(&sv).unwrap();
    let back: StagedVector = serde_json::from_str(&json).unwrap();
    assert_eq!(back, sv);
    assert!(back.reverify(&op).unwrap());
}

#[test]
fn tampered_record_fails_reverification() {
    let op = op("example59-small", 15);
    let targets = default_targets(&op, 1).unwrap();
    let mut sv = build_ufhc(&CPlusOracle::default(), &op, Fraction::new(1, 8), &targets, 2).unwrap();
    let (q, c) = sv.stages[1].z.entries()[0].clone();
    sv.stages[1].z = FiniteVector::from_pairs([(q, &c * &ExactScalar::from_int(2))]);
    assert!(!sv.reverify(&op).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn orbit_sup_bound_dominates_exact_orbit(
        entries in prop::collection::vec((0u64..3000, -8i64..8), 1..5),
        window in 0u64..400,
    ) {
        let op = CTypeOperator::new(example59_small(), 7, SpaceExponent::L2).unwrap();
        let limit = op.index_limit();
        let x = FiniteVector::from_pairs(entries.iter().map(|&(q, c)| (q % limit, ExactScalar::ratio(c, 4))));
        let bound = orbit_sup_bound(&op, &x, window).unwrap();
        let mut y = x.clone();
        for _ in 0..=window {
            prop_assert!(y.norm_sq_l2() <= bound.square());
            prop_assert!(y.norm_l1() <= bound);
            y = op.apply(&y).unwrap();
        }
    }
}
