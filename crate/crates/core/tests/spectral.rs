use std::f64::consts::PI;

use ctype_lab::criteria::Status;
use ctype_lab::ctype::CTypeOperator;
use ctype_lab::presets::{example55, preset, thsmx};
use ctype_lab::spectral::{
    apply_complex, check_vp, ctype_eigenvector, diag_shift_eigenvector, good_phi_sequence, minimal_vp_constant, spectrum_radius,
    weight_radius, Convergence, DiagShiftSpec, DiagonalRule, PhiSequence, SpectralError, Unimodular, WeightRule,
};
use ctype_lab::{FiniteVector, SpaceExponent};
use num_complex::Complex64;
use proptest::prelude::*;

fn thsmx_op() -> CTypeOperator {
    CTypeOperator::new(thsmx(), 1 << 15, SpaceExponent::L2).unwrap()
}

#[test]
fn phi_sequence_through_five() {
    let s = good_phi_sequence(&thsmx(), 5).unwrap();
    assert_eq!(s.head, vec![1, 3]);
    assert_eq!((1..=5).map(|m| s.k(m)).collect::<Vec<_>>(), vec![1, 3, 4, 5, 6]);
    assert_eq!(s.prefix(3), vec![0, 1, 5, 13]);
    assert_eq!(s.passes_at, Some(2));
}

#[test]
fn phi_sequence_through_one_and_six() {
    let one = good_phi_sequence(&thsmx(), 1).unwrap();
    assert_eq!((1..=4).map(|m| one.k(m)).collect::<Vec<_>>(), vec![1, 2, 3, 4]);
    let six = good_phi_sequence(&thsmx(), 6).unwrap();
    assert_eq!(six.prefix(2), vec![0, 2, 6]);
    assert!(matches!(good_phi_sequence(&thsmx(), 0), Err(SpectralError::ZeroIndex)));
}

#[test]
fn phi_relation_holds_on_the_operator() {
    let op = thsmx_op();
    for n in [1u64, 5, 6, 11] {
        let s = good_phi_sequence(&thsmx(), n).unwrap();
        for m in 0..8 {
            assert_eq!(op.block(s.n(m + 1)).unwrap().phi, s.n(m));
        }
    }
}

#[test]
fn mixing_series_certified_for_thsmx_only_where_it_converges() {
    assert!(good_phi_sequence(&thsmx(), 5).unwrap().is_certified());
    let p = preset("example59-small").unwrap().family(None);
    let s = good_phi_sequence(&p, 5).unwrap();
    assert!(!s.is_certified());
    assert!(s.certificate_issue.is_some());
}

#[test]
fn minus_one_collapses_to_the_first_basis_vector() {
    let op = thsmx_op();
    let s = good_phi_sequence(&thsmx(), 1).unwrap();
    let e = ctype_eigenvector(&op, &s, Unimodular::turns(1, 2), 5).unwrap();
    assert_eq!(e.support(), vec![0]);
    assert_eq!(e.coefficient(0), Complex64::new(1.0, 0.0));
    assert_eq!(e.residual, 0.0);
    assert!(e.finite_series);
}

#[test]
fn thsmx_eigenvector_residual_at_stage_twelve() {
    let op = thsmx_op();
    let s = good_phi_sequence(&thsmx(), 1).unwrap();
    let e = ctype_eigenvector(&op, &s, Unimodular::Angle(PI / 3.0), 12).unwrap();
    assert!(e.residual < 1e-8, "residual {}", e.residual);
    assert_eq!(e.coefficient(0), Complex64::new(1.0, 0.0));
    let allowance = e.residual_allowance().expect("tail estimate available");
    assert!(e.residual <= allowance);
}

#[test]
fn residual_decreases_with_the_truncation() {
    let op = thsmx_op();
    let s = good_phi_sequence(&thsmx(), 3).unwrap();
    let lambda = Unimodular::Angle(0.7);
    let residuals: Vec<f64> = (3..=10).map(|m| ctype_eigenvector(&op, &s, lambda, m).unwrap().residual).collect();
    for w in residuals.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-9) + 1e-15, "{residuals:?}");
    }
}

#[test]
fn root_of_unity_gives_a_finite_series() {
    // λ^{Δ^(2)} = λ^8 = −1 kills every stage after the one on generation 2.
    let op = thsmx_op();
    let lambda = Unimodular::turns(1, 16);
    let through_one = good_phi_sequence(&thsmx(), 1).unwrap();
    let through_two = good_phi_sequence(&thsmx(), 2).unwrap();
    let a = ctype_eigenvector(&op, &through_one, lambda, 8).unwrap();
    let b = ctype_eigenvector(&op, &through_two, lambda, 8).unwrap();
    assert!(a.finite_series && b.finite_series);
    assert!(a.residual < 1e-12 && b.residual < 1e-12);
    // Both are eigenvectors for the same λ with different supports: the
    // eigenspace is not one-dimensional.
    let block3 = op.block(3).unwrap();
    let block2 = op.block(2).unwrap();
    assert!(a.support().contains(&block3.start) && !b.support().contains(&block3.start));
    assert!(b.support().contains(&block2.start) && !a.support().contains(&block2.start));
}

#[test]
fn truncation_beyond_the_prefix_is_rejected() {
    let op = CTypeOperator::new(thsmx(), 7, SpaceExponent::L2).unwrap();
    let s = PhiSequence::from_generations(vec![1]);
    // n(3) = 7 is materialized, n(4) = 15 is not.
    assert!(ctype_eigenvector(&op, &s, Unimodular::Angle(1.0), 3).is_ok());
    let e = ctype_eigenvector(&op, &s, Unimodular::Angle(1.0), 4);
    assert!(matches!(e, Err(SpectralError::BeyondPrefix { stage: 4, block: 15, .. })));
}

#[test]
fn non_phi_sequence_is_rejected() {
    // In the C2 mix every block of the first generations couples to block 0.
    let op = CTypeOperator::new(preset("c2mix-small").unwrap().family(None), 7, SpaceExponent::L2).unwrap();
    let s = PhiSequence::from_generations(vec![1, 2]);
    let e = ctype_eigenvector(&op, &s, Unimodular::Angle(1.0), 2);
    assert_eq!(e.unwrap_err(), SpectralError::NotPhiSequence { prev: 1, next: 3, phi: 0 });
}

#[test]
fn complex_application_matches_exact_application() {
    let op = thsmx_op();
    let c = Complex64::new(-0.5, 2.0);
    // Interior coordinates, block ends (restart plus coupling) and e_0.
    for k in [0u64, 1, 2, 4, 6, 12, 13, 40] {
        let x = [(k, c)].into_iter().collect();
        let y = apply_complex(&op, &x).unwrap();
        let exact = op.apply(&FiniteVector::basis(k)).unwrap();
        assert_eq!(y.len(), exact.support_len(), "k = {k}");
        for (j, w) in exact.entries() {
            assert!((y[j] - c * w.to_f64()).norm() < 1e-15, "k = {k}, j = {j}");
        }
    }
}

#[test]
fn rigidity_for_example55_needs_a_large_constant() {
    assert_eq!(check_vp(&example55(2), &[], 0).status, Status::Fails);
    let v = check_vp(&example55(5), &[], 0);
    assert_eq!(v.status, Status::Holds);
    assert!(v.witness.contains_key("onset_k"));
    assert_eq!(minimal_vp_constant(example55, 8), Some(3));
}

#[test]
fn rigidity_fails_for_thsmx() {
    let s = good_phi_sequence(&thsmx(), 1).unwrap();
    let v = check_vp(&thsmx(), &[s], 6);
    assert_eq!(v.status, Status::Fails);
    assert_eq!(v.certificate.get("lim tau(k)/Delta(k-1)").map(String::as_str), Some("0"));
    let trace = &v.certificate["trace_log2_alpha_0"];
    assert_eq!(trace.split(',').count(), 6);
}

#[test]
fn rigidity_is_undetermined_for_tables_and_c2() {
    let c2 = preset("c2mix-small").unwrap().family(None);
    assert_eq!(check_vp(&c2, &[], 0).status, Status::Undetermined);
}

#[test]
fn first_diagonal_value_gives_e1() {
    let spec = DiagShiftSpec { diagonal: DiagonalRule::RotatingToOne { theta: 2.0 }, weights: WeightRule::Constant(2.0) };
    let l1 = spec.diagonal.at(1).unwrap();
    let e = diag_shift_eigenvector(&spec, l1, 30).unwrap();
    assert_eq!(e.truncation.support(), vec![1]);
    assert_eq!(e.truncation.residual, 0.0);
    assert_eq!(e.convergence, Convergence::Finite);
}

#[test]
fn diagonal_value_reproduces_a_finite_eigenvector() {
    let spec = DiagShiftSpec { diagonal: DiagonalRule::RotatingToOne { theta: 2.0 }, weights: WeightRule::Constant(2.0) };
    for k in [2u64, 5, 9] {
        let lk = spec.diagonal.at(k).unwrap();
        let e = diag_shift_eigenvector(&spec, lk, 40).unwrap();
        assert_eq!(e.truncation.support(), (1..=k).collect::<Vec<_>>());
        assert!(e.truncation.residual <= 1e-12 * e.truncation.mass);
    }
}

#[test]
fn geometric_decay_near_one() {
    let spec = DiagShiftSpec { diagonal: DiagonalRule::RotatingToOne { theta: 1.0 }, weights: WeightRule::Constant(2.0) };
    // Off the diagonal: λ_k = e^{i/k} never equals e^{0.37i}.
    let lambda = Complex64::from_polar(1.0, 0.37);
    let e = diag_shift_eigenvector(&spec, lambda, 60).unwrap();
    assert_eq!(e.convergence, Convergence::Converges);
    assert!(e.truncation.residual < 1e-10, "residual {}", e.truncation.residual);
    assert!(e.truncation.residual <= e.truncation.residual_allowance().unwrap() + 1e-300);
    let far = diag_shift_eigenvector(&spec, Complex64::new(-1.0, 0.0), 10).unwrap();
    assert_eq!(far.convergence, Convergence::Undetermined);
}

#[test]
fn weight_radius_for_constant_two() {
    assert_eq!(weight_radius(&WeightRule::Constant(2.0)), Some(2.0));
    assert_eq!(weight_radius(&WeightRule::Table(vec![1.0])), None);
}

#[test]
fn spectral_radius_of_the_presets() {
    for name in ["example55-small", "example59-small", "fhc-small", "thsmx", "c2mix-small"] {
        assert_eq!(spectrum_radius(&preset(name).unwrap().family(None)).unwrap(), 2.0, "{name}");
    }
}

#[test]
fn spectral_radius_with_bounded_runs_is_one() {
    use ctype_lab::closed::{int, Seq, Term};
    use ctype_lab::ctype::{CPlusSpec, CPlusVariant, Family, ParamSeq};
    let family = Family::CPlus(CPlusSpec {
        variant: CPlusVariant::One,
        tau: ParamSeq::Closed(Seq::k()),
        delta: ParamSeq::Closed(Seq::constant(int(0))),
        big_delta: ParamSeq::Closed(Seq::from_terms([Term::geometric(int(2), int(2))])),
        b1: 1,
        tag: "all weights one".into(),
    });
    assert_eq!(spectrum_radius(&family).unwrap(), 1.0);
    let table = Family::CPlus(CPlusSpec {
        variant: CPlusVariant::One,
        tau: ParamSeq::table([1, 2]),
        delta: ParamSeq::table([2, 4]),
        big_delta: ParamSeq::table([4, 8]),
        b1: 1,
        tag: "table".into(),
    });
    assert!(matches!(spectrum_radius(&table), Err(SpectralError::Undetermined(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn thsmx_residual_within_allowance(theta in 0.01f64..6.27, n in 1u64..12) {
        let op = thsmx_op();
        let s = good_phi_sequence(&thsmx(), n).unwrap();
        let e = ctype_eigenvector(&op, &s, Unimodular::Angle(theta), 6).unwrap();
        prop_assert!(e.residual >= 0.0);
        if let Some(a) = e.residual_allowance() {
            prop_assert!(e.residual <= a, "residual {} allowance {}", e.residual, a);
        }
    }
}
