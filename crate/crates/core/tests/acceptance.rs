//! Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned below.
//!
//! Run with `cargo test -p ctype-lab --test acceptance`.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use ctype_lab::closed::rat;
use ctype_lab::criteria::*;
use ctype_lab::ctype::{CTypeOperator, Family};
use ctype_lab::forge::{build_chaotic, build_fhc, build_ufhc, check_fhc_hits, default_targets, CPlusOracle, Fraction, StagedVector};
use ctype_lab::presets::{self, preset};
use ctype_lab::spectral::{
    check_vp, ctype_eigenvector, diag_shift_eigenvector, good_phi_sequence, minimal_vp_constant, DiagShiftSpec, DiagonalRule, Unimodular,
    WeightRule,
};
use ctype_lab::{ExactScalar, FiniteVector, SpaceExponent};
use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const L2: SpaceExponent = SpaceExponent::L2;

/// Largest block index covered by the periodicity sweep.
const PERIODICITY_BLOCKS: u64 = 12;
/// Largest block index covered by the block-end identity.
const IDENTITY_BLOCKS: u64 = 200;
/// Minimum number of random vectors in the coupling-bound suite.
const COUPLING_CASES: usize = 500;
/// Residual tolerance for the C-type eigenvector truncations.
const CTYPE_RESIDUAL_TOL: f64 = 1e-8;
/// Truncation stage for the C-type eigenvectors.
const CTYPE_STAGES: usize = 12;
/// Number of unimodular samples for the C-type eigenvectors.
const CTYPE_SAMPLES: usize = 16;
/// Residual tolerance for the diagonal-plus-shift eigenvectors.
const DIAG_RESIDUAL_TOL: f64 = 1e-10;
/// Truncation length for the diagonal-plus-shift eigenvectors.
const DIAG_STAGES: usize = 60;
/// Number of samples in the disc `D(1, 1)`.
const DIAG_SAMPLES: usize = 8;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn family(name: &str) -> Family {
    preset(name).expect("registered preset").family(None)
}

fn operator(family: Family, n_max: u64) -> Result<CTypeOperator, String> {
    CTypeOperator::new(family, n_max, L2).map_err(|e| e.to_string())
}

// --- AC1 ----------------------------------------------------------------------

/// Steps `u_j = T^j e_{b_n}` with single applications only, for `j < 3Δ`.
/// Inside the block `u_o = P_o e_{b_n+o}` with `P_o ≠ 0`, so
/// `T^{2Δ} e_{b_n+o} = u_{2Δ+o}/P_o` and periodicity of every `e_k` in the
/// block is equivalent to `u_{2Δ+o} = u_o` for all `o < Δ`.
fn block_is_periodic(op: &CTypeOperator, n: u64) -> Result<(), String> {
    let blk = op.block(n).map_err(|e| e.to_string())?;
    let size = blk.size;
    let mut first = Vec::with_capacity(size as usize);
    let mut u = FiniteVector::basis(blk.start);
    for j in 0..3 * size {
        if j < size {
            let entries = u.entries();
            ensure(entries.len() == 1 && entries[0].0 == blk.start + j, || format!("block {n}: T^{j} e_b leaves the shift"))?;
            first.push(entries[0].1.clone());
        } else if j >= 2 * size {
            let o = j - 2 * size;
            let expect = FiniteVector::from_pairs([(blk.start + o, first[o as usize].clone())]);
            ensure(u == expect, || format!("block {n}: T^(2Δ) e_(b+{o}) ≠ e_(b+{o})"))?;
        }
        u = op.apply(&u).map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn ac1() -> Outcome {
    let mut checked = 0u64;
    for name in ["example55-small", "example59-small", "c2mix-small", "thsmx"] {
        let op = operator(family(name), PERIODICITY_BLOCKS)?;
        for n in 0..=PERIODICITY_BLOCKS {
            block_is_periodic(&op, n).map_err(|e| format!("{name}: {e}"))?;
            checked += op.block(n).unwrap().size;
        }
    }
    Ok(format!("{checked} basis vectors periodic across 4 presets, blocks 0..={PERIODICITY_BLOCKS}"))
}

// --- AC2 ----------------------------------------------------------------------

fn pow2_big(e: &BigInt) -> ExactScalar {
    ExactScalar::pow2(e.to_i64().expect("exponent fits"))
}

/// `T^{Δb_n} e_{b_n} = v_n W_n e_{b_φ(n)} − e_{b_n}`, with the right side
/// rebuilt from the closed-form C₊ layout: generation `k` holds blocks
/// `[2^{k−1}, 2^k)` of size `Δ^(k)`, `φ(2^{k−1} + l) = l`, `v = 2^{−τ}`, `W = 2^δ`.
fn ac2() -> Outcome {
    let fam = family("example55-small");
    let op = operator(fam.clone(), IDENTITY_BLOCKS)?;
    let b = |n: u64| -> BigInt {
        if n == 0 {
            return BigInt::from(0);
        }
        let k = 64 - n.leading_zeros() as u64;
        let mut acc = BigInt::from(fam.b1());
        for g in 1..k {
            acc += fam.big_delta_at(g).unwrap() * BigInt::from(1u64 << (g - 1));
        }
        acc + fam.big_delta_at(k).unwrap() * BigInt::from(n - (1u64 << (k - 1)))
    };
    let mut stepped = 0;
    for n in 1..=IDENTITY_BLOCKS {
        let k = 64 - n.leading_zeros() as u64;
        let phi = n - (1u64 << (k - 1));
        let (start, target) = (b(n).to_u64().unwrap(), b(phi).to_u64().unwrap());
        ensure(op.b(n).unwrap() == start, || format!("b_{n} disagrees with the closed-form layout"))?;
        let coupling = pow2_big(&(fam.delta_at(k).unwrap() - fam.tau_at(k).unwrap()));
        let expect = FiniteVector::from_pairs([(target, coupling), (start, -ExactScalar::one())]);
        let size = fam.big_delta_at(k).unwrap().to_u64().unwrap();
        let e = FiniteVector::basis(start);
        let got = op.apply_power(&e, size).map_err(|e| e.to_string())?;
        ensure(got == expect, || format!("identity fails at n = {n}"))?;
        // Small blocks: also by single steps.
        if size <= 1 << 16 {
            let mut u = e;
            for _ in 0..size {
                u = op.apply(&u).map_err(|e| e.to_string())?;
            }
            ensure(u == expect, || format!("stepped identity fails at n = {n}"))?;
            stepped += 1;
        }
    }
    Ok(format!("exact for n = 1..={IDENTITY_BLOCKS} ({stepped} also by single steps)"))
}

// --- AC3–AC5 ------------------------------------------------------------------

fn expect_status(v: &Verdict, status: Status, what: &str) -> Result<(), String> {
    ensure(v.status == status, || format!("{what}: expected {status}, got {} ({})", v.status, v.anchor))
}

fn ac3() -> Outcome {
    let c = presets::EXAMPLE55_MIN_C;
    ensure(minimal_constant("example55", presets::example55, L2, 10) == Some(c), || "minimal C not reproduced".into())?;
    let fam = presets::example55(c);
    expect_status(&check_chaos(&fam, 0, DEFAULT_CHAOS_THRESHOLD_LOG2), Status::Holds, "chaos")?;
    let fhc = check_fhc_search(&fam, &rat(1, 20), &rat(1 << 20, 1), 1, DEFAULT_SEARCH_SPAN);
    expect_status(&fhc, Status::Holds, "FHC search")?;
    let k: u64 = fhc.witness["k"].parse().map_err(|_| "witness k")?;
    let m: BigInt = fhc.witness["m"].parse().map_err(|_| "witness m")?;
    ensure(m == fam.big_delta_at(k).unwrap() - 1, || format!("witness m = {m} is not Δ^({k}) − 1"))?;
    let cls = classify_cplus1(&fam, L2);
    expect_status(&cls.side_conditions, Status::Holds, "side conditions")?;
    expect_status(&cls.fhc, Status::Holds, "FHC classification")?;
    let total = cls.gamma.as_ref().and_then(|g| g.series.as_ref()).map(|s| s.total_upper.clone()).ok_or("no series certificate")?;
    ensure(total <= ExactScalar::one(), || format!("series bound {total} exceeds 1"))?;
    let ct = ct_upper_bound(&fam).map_err(|v| format!("ct bound: {}", v.status))?;
    ensure(ct == rat(9, 10), || format!("c(T) bound {ct} ≠ 9/10"))?;
    expect_status(&check_not_mixing(&fam, L2, &rat(1, 1)), Status::Holds, "not mixing (K = 1)")?;
    Ok(format!("C = {c}: chaotic, FHC (k = {k}, m = Δ−1), side series ≤ {}, c(T) ≤ 9/10, not mixing", total.to_decimal_string(6)))
}

fn ac4() -> Outcome {
    let c = presets::EXAMPLE59_MIN_C;
    ensure(minimal_constant("example59", presets::example59, L2, 10) == Some(c), || "minimal C not reproduced".into())?;
    let cls = classify_cplus2(&presets::example59(c), L2);
    expect_status(&cls.side_conditions, Status::Holds, "side conditions")?;
    expect_status(&cls.ufhc, Status::Holds, "UFHC")?;
    expect_status(&cls.fhc, Status::Fails, "FHC")?;
    ensure(cls.separation, || "separation not recorded".into())?;
    Ok(format!("C = {c}: UFHC holds, FHC fails, side conditions close"))
}

fn ac5() -> Outcome {
    let c = presets::C2MIX_MIN_C;
    ensure(minimal_constant("c2mix", presets::c2mix, L2, 10) == Some(c), || "minimal C not reproduced".into())?;
    let fam = presets::c2mix(c);
    expect_status(&check_mixing(&fam, &[0, 4, 16], 8), Status::Holds, "mixing")?;
    expect_status(&check_c2_not_ufhc(&fam, L2), Status::Holds, "not UFHC")?;
    expect_status(&check_chaos(&fam, 0, DEFAULT_CHAOS_THRESHOLD_LOG2), Status::Holds, "chaos")?;
    Ok(format!("C = {c}: mixing, not UFHC, chaotic"))
}

// --- AC6 ----------------------------------------------------------------------

fn random_block_vector(rng: &mut ChaCha8Rng, lo: u64, hi: u64, density: f64) -> FiniteVector {
    loop {
        let mut pairs = Vec::new();
        for i in lo..hi {
            if rng.gen_bool(density) {
                pairs.push((i, ExactScalar::dyadic(rng.gen_range(-64i64..=64), rng.gen_range(-4i64..=2))));
            }
        }
        let x = FiniteVector::from_pairs(pairs);
        if !x.is_zero() {
            return x;
        }
    }
}

/// `C_n = 2^{δ(k_φ) − τ(k)}` with `k` the generation of `n`, `k_φ` that of
/// `φ(n)` and `δ(0) = 0`: the largest weight product inside block `φ(n)` is
/// `2^{δ(k_φ)}` and `|v_n| = 2^{−τ(k)}`.
fn closed_coupling(op: &CTypeOperator, n: u64) -> ExactScalar {
    let fam = op.family();
    let blk = op.block(n).unwrap();
    let k_phi = op.generation_of(blk.phi);
    let d = if blk.phi == 0 { BigInt::from(0) } else { fam.delta_at(k_phi).unwrap() };
    pow2_big(&(d - fam.tau_at(blk.generation).unwrap()))
}

fn ac6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5051);
    type Suite = (&'static str, CTypeOperator, Vec<(u64, u64)>);
    let suites: Vec<Suite> = vec![
        ("example55(2)", operator(presets::example55(2), 7)?, vec![(3, 1), (2, 1), (2, 0), (3, 0), (1, 0), (5, 1)]),
        ("example59-small", operator(family("example59-small"), 5)?, vec![(1, 0), (2, 0), (3, 1), (5, 1), (4, 0)]),
        ("fhc-small", operator(family("fhc-small"), 3)?, vec![(1, 0), (2, 0), (3, 1)]),
    ];
    let mut cases = 0usize;
    let mut per_suite = Vec::new();
    for (name, op, pairs) in &suites {
        let c_seq = |n: u64| closed_coupling(op, n);
        let quota = COUPLING_CASES.div_ceil(suites.len());
        for t in 0..quota {
            let (l, n) = pairs[t % pairs.len()];
            let blk = op.block(l).unwrap();
            let density = (12.0 / blk.size as f64).min(0.3);
            let x = random_block_vector(&mut rng, blk.start, blk.end(), density);
            let check = verify_coupling_bound(op, &x, l, n, &c_seq, &[1, 3, blk.size / 2, blk.size])
                .map_err(|e| format!("{name}, (n, l) = ({n}, {l}): {e}"))?;
            ensure(check.ok, || format!("{name}, (n, l) = ({n}, {l}), case {t}: bound violated"))?;
            cases += 1;
        }
        per_suite.push(format!("{name}: {quota}"));
    }

    // Counting inequality on the grid {Δ−1, 2Δ, 10Δ, 10Δ+7}.
    let grid = |size: u64| [size - 1, 2 * size, 10 * size, 10 * size + 7];
    let mut rows = 0usize;
    for (name, fam, n_max, blocks) in
        [("example55(2)", presets::example55(2), 7, vec![1u64, 2, 3, 5, 7]), ("fhc-small", family("fhc-small"), 3, vec![1, 2, 3])]
    {
        let op = operator(fam.clone(), n_max)?;
        for l in blocks {
            let blk = op.block(l).unwrap();
            let k0 = fam.delta_at(blk.generation).unwrap().to_u64().unwrap();
            for _ in 0..4 {
                let x = random_block_vector(&mut rng, blk.start, blk.end(), (12.0 / blk.size as f64).min(0.4));
                let out = verify_return_frequency(&op, &x, l, k0, blk.size, None, &grid(blk.size))
                    .map_err(|e| format!("{name}, l = {l}: {e}"))?;
                ensure(out.iter().all(|r| r.ok), || format!("{name}, l = {l}: counting inequality fails"))?;
                rows += out.len();
            }
        }
    }
    let fam = family("c2mix-small");
    let op = operator(fam.clone(), 6)?;
    let Family::C2(s) = &fam else { return Err("c2mix-small is not a C2 family".into()) };
    for l in [1u64, 2, 6] {
        let blk = op.block(l).unwrap();
        let k = blk.generation;
        let delta = fam.delta_at(k).unwrap().to_u64().unwrap();
        let a = s.a.at(k).unwrap().to_u64().unwrap();
        let spread = (s.f.at(k).unwrap() - s.a.at(k).unwrap()).to_u64().unwrap();
        let first = op.generation_first(k).unwrap();
        let end = blk.size - a - (l - first) % spread;
        for _ in 0..4 {
            let x = random_block_vector(&mut rng, blk.start, blk.end(), 0.3);
            let out = verify_return_frequency(&op, &x, l, delta, end - 2 * delta, Some(end - 1), &grid(blk.size))
                .map_err(|e| format!("c2mix-small, l = {l}: {e}"))?;
            ensure(out.iter().all(|r| r.ok), || format!("c2mix-small, l = {l}: counting inequality fails"))?;
            rows += out.len();
        }
    }
    Ok(format!("{cases} coupling cases ({}), {rows} counting rows, zero violations", per_suite.join(", ")))
}

// --- AC7 ----------------------------------------------------------------------

fn failures(sv: &StagedVector) -> String {
    let mut out = Vec::new();
    for s in &sv.stages {
        out.extend(s.checks.iter().filter(|c| !c.holds).map(|c| format!("stage {}: {}", s.index, c.name)));
    }
    out.extend(sv.final_checks.iter().filter(|c| !c.holds).map(|c| format!("final: {}", c.name)));
    out.extend(sv.densities.iter().filter(|d| !d.holds).map(|d| format!("density {} < {}", d.measured_exact, d.required)));
    out.join("; ")
}

fn ac7() -> Outcome {
    let oracle = CPlusOracle::default();
    let alpha = Fraction::new(1, 8);

    let op = operator(family("example55-small"), 2047)?;
    let targets = default_targets(&op, 4).map_err(|e| e.to_string())?;
    let chaotic = build_chaotic(&oracle, &op, &targets, 6).map_err(|e| e.to_string())?;
    ensure(chaotic.stages.len() == 6 && chaotic.all_hold(), || format!("chaotic: {}", failures(&chaotic)))?;
    ensure(chaotic.reverify(&op).map_err(|e| e.to_string())?, || "chaotic: re-verification fails".into())?;

    let op = operator(family("example59-small"), 15)?;
    let targets = default_targets(&op, 1).map_err(|e| e.to_string())?;
    let ufhc = build_ufhc(&oracle, &op, alpha, &targets, 4).map_err(|e| e.to_string())?;
    ensure(ufhc.all_hold(), || format!("ufhc: {}", failures(&ufhc)))?;
    ensure(ufhc.reverify(&op).map_err(|e| e.to_string())?, || "ufhc: re-verification fails".into())?;
    let du = &ufhc.densities[0];
    ensure(du.analytic_bound == ExactScalar::ratio(1, 18), || format!("ufhc analytic bound {}", du.analytic_bound))?;

    let op = operator(family("fhc-small"), 7)?;
    let targets = default_targets(&op, 1).map_err(|e| e.to_string())?;
    let fhc = build_fhc(&oracle, &op, alpha, &targets, 3).map_err(|e| e.to_string())?;
    ensure(fhc.all_hold(), || format!("fhc: {}", failures(&fhc)))?;
    let (hits, ok) = check_fhc_hits(&fhc, &op, 1).map_err(|e| e.to_string())?;
    ensure(ok && hits > 0, || "fhc: hit enumeration fails".into())?;
    let df = &fhc.densities[0];
    ensure(df.analytic_bound == ExactScalar::ratio(1, 8192), || format!("fhc analytic bound {}", df.analytic_bound))?;

    Ok(format!("chaotic J = 6 exact; ufhc density {:.4} ≥ 0.8·1/18; fhc density {:.4} ≥ 0.8·1/8192", du.measured, df.measured))
}

// --- AC8 ----------------------------------------------------------------------

fn ac8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let thsmx = presets::thsmx();
    let op = operator(thsmx.clone(), 1 << 15)?;
    let seq = good_phi_sequence(&thsmx, 1).map_err(|e| e.to_string())?;
    let mut worst = 0f64;
    for _ in 0..CTYPE_SAMPLES {
        let theta = rng.gen_range(0.0..2.0 * PI);
        let e = ctype_eigenvector(&op, &seq, Unimodular::Angle(theta), CTYPE_STAGES).map_err(|e| e.to_string())?;
        ensure(e.residual < CTYPE_RESIDUAL_TOL, || format!("thsmx residual {} at θ = {theta}", e.residual))?;
        worst = worst.max(e.residual);
    }

    let spec = DiagShiftSpec { diagonal: DiagonalRule::RotatingToOne { theta: 1.0 }, weights: WeightRule::Constant(2.0) };
    let mut worst_diag = 0f64;
    for _ in 0..DIAG_SAMPLES {
        let lambda = Complex64::new(1.0, 0.0) + Complex64::from_polar(rng.gen_range(0.0..1.0), rng.gen_range(0.0..2.0 * PI));
        let e = diag_shift_eigenvector(&spec, lambda, DIAG_STAGES).map_err(|e| e.to_string())?;
        ensure(e.truncation.residual < DIAG_RESIDUAL_TOL, || format!("diagonal shift residual {} at λ = {lambda}", e.truncation.residual))?;
        worst_diag = worst_diag.max(e.truncation.residual);
    }
    let l1 = spec.diagonal.at(1).ok_or("λ_1 undefined")?;
    let e1 = diag_shift_eigenvector(&spec, l1, DIAG_STAGES).map_err(|e| e.to_string())?;
    ensure(e1.truncation.residual == 0.0, || format!("λ_1 residual {}", e1.truncation.residual))?;

    let min_c = minimal_vp_constant(presets::example55, 8).ok_or("no minimal constant for eigenvalue rigidity")?;
    expect_status(&check_vp(&presets::example55(min_c), &[], 0), Status::Holds, "eigenvalue rigidity, example55")?;
    expect_status(&check_vp(&thsmx, &[seq], 6), Status::Fails, "eigenvalue rigidity, thsmx")?;
    Ok(format!("max residuals {worst:.2e} (thsmx, M = {CTYPE_STAGES}), {worst_diag:.2e} (diagonal shift, M = {DIAG_STAGES}); λ_1 exact; rigidity from C = {min_c}"))
}

// --- AC9 ----------------------------------------------------------------------

fn ac9() -> Outcome {
    let bounds: Vec<ExactScalar> = (1..=10).map(|n| ExactScalar::ratio(6, 1i64 << n)).collect();
    ensure(direct_sum_c_bound(&bounds) == Some(ExactScalar::ratio(6, 1024)), || "c-bound ≠ 6/1024".into())?;
    let report = direct_sum_report(&bounds).ok_or("empty report")?;
    ensure(report.c_bound == ExactScalar::ratio(6, 1024), || "report c-bound ≠ 6/1024".into())?;
    ensure(!report.ufhc_certified, || "sum marked UFHC".into())?;
    expect_status(&report.not_ufhc, Status::Holds, "non-UFHC certificate")?;
    Ok("c(T) ≤ 6/1024, ratio 1/2, sum not UFHC".into())
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 9] =
        [("AC1", ac1), ("AC2", ac2), ("AC3", ac3), ("AC4", ac4), ("AC5", ac5), ("AC6", ac6), ("AC7", ac7), ("AC8", ac8), ("AC9", ac9)];
    let mut failed = 0;
    for (id, run) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("{id} PASS  {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("{id} FAIL  {detail} [{secs:.1}s]");
            }
        }
    }
    if failed == 0 {
        println!("acceptance: all 9 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} of 9 criteria fail");
        ExitCode::FAILURE
    }
}
