//! Unimodular eigenvectors and spectral radii.
//!
//! Two operator classes are covered:
//!
//! * C-type operators, whose eigenvectors for `λ ∈ 𝕋` are series indexed by
//!   φ-sequences `0 = n(0) < n(1) < …` with `φ(n(m+1)) = n(m)`; the series
//!   vanishes from stage `l` on as soon as `λ^{Δb_{n(l−1)}} = −1`;
//! * diagonal-plus-backward-shift operators `T = D_λ + B_ω` on `ℓ₂` (basis
//!   `e_1, e_2, …`), whose eigenvector for `λ` is
//!   `e_1 + Σ_{n≥2} ∏_{j<n} (λ − λ_j)/ω_j · e_n` when that series converges.
//!
//! Everything complex is computed in double precision; the exact engine is
//! used only for geometry (block boundaries, weights, couplings) and for the
//! symbolic checks on closed-form parameter families.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::TAU;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::closed::{int, Limit, Seq};
use crate::criteria::{certify_series, log2_ratio_upper, log2_upper_poly, SeriesCertificate, Status, Verdict};
use crate::ctype::{Block, CTypeError, CTypeOperator, Family};
use crate::scalar::{ExactScalar, UpperSum};

/// Largest number of coordinates a truncated eigenvector may carry.
pub const MAX_EIGEN_SUPPORT: u64 = 1 << 22;
/// Series stages beyond the truncation used for the tail estimate.
const TAIL_STAGES: usize = 3;
/// Doubles overflow past `2^1023`; stay clear of it.
const OVERFLOW_LOG2: f64 = 1000.0;

/// Failures of the eigenvector computations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("the eigenvector formula needs b_1 = 1, got b_1 = {0}")]
    NeedsUnitFirstBlock(u64),
    #[error("not a phi-sequence: phi({next}) = {phi}, expected {prev}")]
    NotPhiSequence { prev: u64, next: u64, phi: u64 },
    #[error("stage {stage} needs block {block}, beyond the materialized n_max = {n_max}")]
    BeyondPrefix { stage: usize, block: u64, n_max: u64 },
    #[error("truncation would hold {0} coordinates (limit {MAX_EIGEN_SUPPORT})")]
    TooLarge(u64),
    #[error("coefficient magnitude 2^{0:.1} overflows double precision")]
    Overflow(f64),
    #[error("a phi-sequence needs n >= 1")]
    ZeroIndex,
    #[error("{0}")]
    Undetermined(String),
    #[error(transparent)]
    Geometry(#[from] CTypeError),
}

/// A complex number in serialized form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexValue {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for ComplexValue {
    fn from(z: Complex64) -> Self {
        ComplexValue { re: z.re, im: z.im }
    }
}

impl From<ComplexValue> for Complex64 {
    fn from(z: ComplexValue) -> Self {
        Complex64::new(z.re, z.im)
    }
}

/// A point of the unit circle.
///
/// Rational turns `e^{2πi·num/den}` give exact powers: `λ^k` is reduced modulo
/// `den` in integers, so `1 + λ^k` is exactly zero when `λ^k = −1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unimodular {
    Turns {
        num: i64,
        den: u64,
    },
    /// `e^{iθ}` for an arbitrary real `θ`.
    Angle(f64),
}

impl Unimodular {
    pub fn turns(num: i64, den: u64) -> Self {
        assert!(den > 0, "zero denominator");
        Unimodular::Turns { num, den }
    }

    pub fn value(&self) -> Complex64 {
        self.pow(1)
    }

    /// `λ^k`.
    pub fn pow(&self, k: u64) -> Complex64 {
        match *self {
            Unimodular::Turns { num, den } => {
                let d = den as i128;
                let r = ((num as i128).rem_euclid(d) * (k as i128 % d)).rem_euclid(d);
                if r == 0 {
                    Complex64::new(1.0, 0.0)
                } else if 2 * r == d {
                    Complex64::new(-1.0, 0.0)
                } else {
                    Complex64::from_polar(1.0, TAU * r as f64 / d as f64)
                }
            }
            Unimodular::Angle(theta) => {
                let phase = (theta.rem_euclid(TAU) * k as f64).rem_euclid(TAU);
                Complex64::from_polar(1.0, phase)
            }
        }
    }
}

impl std::fmt::Display for Unimodular {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Unimodular::Turns { num, den } => write!(f, "exp(2 pi i {num}/{den})"),
            Unimodular::Angle(t) => write!(f, "exp(i {t})"),
        }
    }
}

/// A φ-sequence of a C₊-type operator, given by its generations.
///
/// `n(m) = Σ_{i≤m} 2^{k_i − 1}` with `k_1 < k_2 < …`; the explicit head
/// `k_1, …, k_r` is continued by `k_{r+i} = k_r + i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PhiSequence {
    pub head: Vec<u64>,
    /// The index `r` with `n(r)` equal to the requested block, if any.
    pub passes_at: Option<usize>,
    /// Convergence certificate of `Σ_m 4^{m − Σ_{l≤m} (δ^(k_{l−1}) − τ^(k_l))} Δ^(k_m)`.
    pub certificate: Option<SeriesCertificate>,
    /// Why the certificate is missing, when it is.
    pub certificate_issue: Option<String>,
}

impl PhiSequence {
    /// The sequence with generations `head` followed by consecutive ones.
    pub fn from_generations(head: Vec<u64>) -> Self {
        assert!(!head.is_empty() && head[0] >= 1, "generations start at 1");
        assert!(head.windows(2).all(|w| w[0] < w[1]), "generations must increase");
        PhiSequence { head, passes_at: None, certificate: None, certificate_issue: None }
    }

    /// `k_m` for `m ≥ 1`.
    pub fn k(&self, m: usize) -> u64 {
        assert!(m >= 1, "k_m is defined for m >= 1");
        let r = self.head.len();
        if m <= r {
            self.head[m - 1]
        } else {
            self.head[r - 1] + (m - r) as u64
        }
    }

    /// `n(m)`, with `n(0) = 0`.
    pub fn n(&self, m: usize) -> u64 {
        (1..=m).map(|i| 1u64 << (self.k(i) - 1)).sum()
    }

    /// `n(0), …, n(m)`.
    pub fn prefix(&self, m: usize) -> Vec<u64> {
        (0..=m).map(|i| self.n(i)).collect()
    }

    /// Whether the certificate proves the eigenvector series convergent.
    pub fn is_certified(&self) -> bool {
        self.certificate.is_some()
    }
}

/// The φ-sequence through block `n` obtained from the binary expansion
/// `n = 2^{k_1−1} + ⋯ + 2^{k_r−1}`, continued by `k_{r+i} = k_r + i`, with the
/// convergence certificate of its eigenvector series evaluated.
pub fn good_phi_sequence(family: &Family, n: u64) -> Result<PhiSequence, SpectralError> {
    if n == 0 {
        return Err(SpectralError::ZeroIndex);
    }
    let head: Vec<u64> = (0..64).filter(|b| n >> b & 1 == 1).map(|b| b + 1).collect();
    let mut seq = PhiSequence::from_generations(head);
    seq.passes_at = Some(seq.head.len());
    match series_certificate(family, &seq) {
        Ok(c) => seq.certificate = Some(c),
        Err(e) => seq.certificate_issue = Some(e),
    }
    Ok(seq)
}

/// `4^{m − S_m} Δ^(k_m)` with `S_m = Σ_{l=1}^{m} (δ^(k_{l−1}) − τ^(k_l))`, `k_0 = 0`.
fn series_term(family: &Family, seq: &PhiSequence, m: usize) -> Option<ExactScalar> {
    let mut s = BigInt::zero();
    let mut prev = 0u64;
    for l in 1..=m {
        let k = seq.k(l);
        s += family.delta_at(prev)? - family.tau_at(k)?;
        prev = k;
    }
    let e: BigInt = (BigInt::from(m as u64) - s) * 2;
    Some(&ExactScalar::pow2(e) * &ExactScalar::from_int(family.big_delta_at(seq.k(m))?))
}

fn series_certificate(family: &Family, seq: &PhiSequence) -> Result<SeriesCertificate, String> {
    if !matches!(family, Family::CPlus(_)) {
        return Err("the series certificate is implemented for C+-type families".into());
    }
    let (tau, delta, big_delta) = family.generation_params().expect("C+ families carry parameters");
    let (tau, delta, big_delta) = match (tau.closed(), delta.closed(), big_delta.closed()) {
        (Some(t), Some(d), Some(b)) => (t, d, b),
        _ => return Err("no closed form: the series cannot be certified".into()),
    };
    // log₂(t_{m+1}/t_m) = 2 − 2δ^(k) + 2τ^(k+1) + log₂(Δ^(k+1)/Δ^(k)) along k_{m+1} = k_m + 1.
    let ratio = log2_ratio_upper(big_delta).ok_or("no log-ratio bound for Delta")?;
    let log_ratio =
        Seq::constant(int(2)).sub(&delta.scale(&int(2))).add(&tau.shift(1).ok_or("tau cannot be shifted")?.scale(&int(2))).add(&ratio);
    let r = seq.head.len();
    let k_r = seq.head[r - 1];
    let mut head_sum = UpperSum::new(64);
    for m in 1..r {
        head_sum.add(&series_term(family, seq, m).ok_or("term unavailable")?);
    }
    let mut cert = certify_series(k_r, &log_ratio, |k| series_term(family, seq, r + (k - k_r) as usize))?;
    if r > 1 {
        head_sum.add(&cert.total_upper);
        cert.total_upper = head_sum.value().clone();
        cert.terms.splice(0..0, (1..r).map(|m| (seq.k(m), series_term(family, seq, m).expect("evaluated above"))));
    }
    Ok(cert)
}

/// A coordinate of a truncated eigenvector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub index: u64,
    pub re: f64,
    pub im: f64,
}

/// A truncated eigenvector with its residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenTruncation {
    pub lambda: ComplexValue,
    /// Truncation stage `M`.
    pub stages: usize,
    /// Nonzero coordinates in increasing index order.
    pub coefficients: Vec<Coefficient>,
    /// `‖T x̂ − λ x̂‖₂`, computed by applying `T` in complex doubles.
    pub residual: f64,
    /// Estimate of `‖x − x̂‖₂` from the next series stages and their geometric
    /// decay; `Some(0)` when the series is finite, `None` when unavailable.
    pub tail_bound: Option<f64>,
    /// `Σ |x̂_j|`.
    pub mass: f64,
    /// Whether a vanishing factor makes every later series stage zero.
    pub finite_series: bool,
}

impl EigenTruncation {
    pub fn coefficient(&self, index: u64) -> Complex64 {
        self.coefficients
            .binary_search_by_key(&index, |c| c.index)
            .map(|i| Complex64::new(self.coefficients[i].re, self.coefficients[i].im))
            .unwrap_or_default()
    }

    pub fn support(&self) -> Vec<u64> {
        self.coefficients.iter().map(|c| c.index).collect()
    }

    /// The tolerance `tail + 10·ε·mass` the residual must respect.
    pub fn residual_allowance(&self) -> Option<f64> {
        self.tail_bound.map(|t| t + 10.0 * f64::EPSILON * self.mass)
    }

    fn from_map(lambda: Complex64, stages: usize, x: &BTreeMap<u64, Complex64>) -> Self {
        let coefficients: Vec<Coefficient> =
            x.iter().filter(|(_, c)| **c != Complex64::default()).map(|(&index, c)| Coefficient { index, re: c.re, im: c.im }).collect();
        let mass = x.values().map(|c| c.norm()).sum();
        EigenTruncation { lambda: lambda.into(), stages, coefficients, residual: 0.0, tail_bound: None, mass, finite_series: false }
    }
}

struct Blocks<'a> {
    op: &'a CTypeOperator,
    cache: HashMap<u64, Block>,
}

impl<'a> Blocks<'a> {
    fn new(op: &'a CTypeOperator) -> Self {
        Blocks { op, cache: HashMap::new() }
    }

    fn get(&mut self, n: u64) -> Result<&Block, SpectralError> {
        if !self.cache.contains_key(&n) {
            let b = self.op.block(n)?;
            self.cache.insert(n, b);
        }
        Ok(&self.cache[&n])
    }
}

/// `T x` for a complex vector, with the exact block structure of `op`.
pub fn apply_complex(op: &CTypeOperator, x: &BTreeMap<u64, Complex64>) -> Result<BTreeMap<u64, Complex64>, SpectralError> {
    let mut blocks = Blocks::new(op);
    let mut out: BTreeMap<u64, Complex64> = BTreeMap::new();
    for (&k, &c) in x {
        let n = op.block_of(k)?;
        let blk = blocks.get(n)?;
        if k + 1 < blk.end() {
            let w = blk.weight(k + 1 - blk.start)?.to_f64();
            *out.entry(k + 1).or_default() += c * w;
        } else {
            let inv_w = blk.full_product().recip().expect("weights are nonzero").to_f64();
            *out.entry(blk.start).or_default() -= c * inv_w;
            if n >= 1 {
                let target = op.b(blk.phi)?;
                *out.entry(target).or_default() += c * blk.v.to_f64();
            }
        }
    }
    Ok(out)
}

fn residual_norm(op: &CTypeOperator, x: &BTreeMap<u64, Complex64>, lambda: Complex64) -> Result<f64, SpectralError> {
    let mut r = apply_complex(op, x)?;
    for (&k, &c) in x {
        *r.entry(k).or_default() -= lambda * c;
    }
    Ok(r.values().map(|c| c.norm_sqr()).sum::<f64>().sqrt())
}

/// Writes stage `m` of the series into `out` and returns its ℓ₂ norm.
///
/// `factor · 2^{scale}` is the coefficient at the end of the block; the
/// coordinate `j` of the block carries it times `λ^{end−j} / ∏_{ν=j+1}^{end} w_ν`.
fn write_stage(
    blk: &Block,
    lambda: &Unimodular,
    factor: Complex64,
    scale: f64,
    sign: f64,
    out: &mut BTreeMap<u64, Complex64>,
) -> Result<f64, SpectralError> {
    let last = blk.end() - 1;
    let mut log2_suffix = 0.0f64;
    let mut sq = 0.0;
    for j in (blk.start..=last).rev() {
        if j < last {
            log2_suffix += blk.weight(j + 1 - blk.start)?.log2_abs();
        }
        let e = scale - log2_suffix;
        if e > OVERFLOW_LOG2 {
            return Err(SpectralError::Overflow(e));
        }
        let c = factor * lambda.pow(last - j) * (sign * e.exp2());
        sq += c.norm_sqr();
        out.insert(j, c);
    }
    Ok(sq.sqrt())
}

/// The truncated eigenvector series of a C-type operator along a φ-sequence.
///
/// Stage `m` lives on block `n(m)`; its end coordinate is
/// `∏_{l≤m} (1 + λ^{Δb_{n(l−1)}}) / (∏_{l≤m} v_{n(l)} ∏_{l<m} W_{n(l)})`
/// and the other coordinates follow from `T x = λ x` inside the block.
pub fn ctype_eigenvector(
    op: &CTypeOperator,
    seq: &PhiSequence,
    lambda: Unimodular,
    stages: usize,
) -> Result<EigenTruncation, SpectralError> {
    let b1 = op.b(1)?;
    if b1 != 1 {
        return Err(SpectralError::NeedsUnitFirstBlock(b1));
    }
    let mut blocks = Blocks::new(op);
    let mut total = 0u64;
    let mut x: BTreeMap<u64, Complex64> = BTreeMap::new();
    x.insert(0, Complex64::new(1.0, 0.0));
    let mut factor = Complex64::new(1.0, 0.0);
    let mut scale = 0.0f64;
    let mut sign = 1.0f64;
    let mut prev = 0u64;
    let mut finite = false;
    let mut tail_norms: Vec<f64> = Vec::new();
    for m in 1..=stages + TAIL_STAGES {
        let n = seq.n(m);
        let in_tail = m > stages;
        if n > op.n_max() {
            if in_tail {
                break;
            }
            return Err(SpectralError::BeyondPrefix { stage: m, block: n, n_max: op.n_max() });
        }
        let prev_blk = blocks.get(prev)?.clone();
        let blk = blocks.get(n)?.clone();
        if blk.phi != prev {
            return Err(SpectralError::NotPhiSequence { prev, next: n, phi: blk.phi });
        }
        factor *= Complex64::new(1.0, 0.0) + lambda.pow(prev_blk.size);
        if factor == Complex64::default() {
            finite = true;
            break;
        }
        let w_prev = prev_blk.full_product();
        scale -= blk.v.log2_abs() + w_prev.log2_abs();
        sign *= f64::from(blk.v.signum() * w_prev.signum());
        total += blk.size;
        if total > MAX_EIGEN_SUPPORT {
            if in_tail {
                break;
            }
            return Err(SpectralError::TooLarge(total));
        }
        if in_tail {
            let mut scratch = BTreeMap::new();
            tail_norms.push(write_stage(&blk, &lambda, factor, scale, sign, &mut scratch)?);
        } else {
            write_stage(&blk, &lambda, factor, scale, sign, &mut x)?;
        }
        prev = n;
    }
    let lam = lambda.value();
    let mut out = EigenTruncation::from_map(lam, stages, &x);
    out.residual = residual_norm(op, &x, lam)?;
    out.finite_series = finite;
    out.tail_bound = tail_estimate(finite, &tail_norms);
    Ok(out)
}

/// Computed norms of the next stages plus a geometric extrapolation.
fn tail_estimate(finite: bool, norms: &[f64]) -> Option<f64> {
    let sum = norms.iter().fold(0.0, |a, b| a + b);
    if finite && norms.len() < TAIL_STAGES {
        return Some(sum);
    }
    if norms.len() < 2 {
        return None;
    }
    let last = norms[norms.len() - 1];
    let before = norms[norms.len() - 2];
    if last == 0.0 {
        return Some(sum);
    }
    let q = last / before;
    if q >= 1.0 || !q.is_finite() {
        return None;
    }
    Some(sum + last * q / (1.0 - q))
}

/// Exponent comparison behind the rigidity of unimodular eigenvalues.
///
/// For a C₊-type family with `v_n = 2^{−τ^(k)}` and block products `W = 2^{δ^(k)}`,
/// the quantity `α_m = |v_{n(m)}| 2^{n(m)} (Δb_{n(m)})^m ∏_{j<m} |v_{n(j)}| W_{n(j)} / Δb_{n(j)}`
/// satisfies, uniformly over φ-sequences with `n(m)` in generation `k`,
///
/// `log₂ α_m ≤ −τ^(k) + 2^k + k·log₂ Δ^(k) + Σ_{i<k} δ^(i)`.
///
/// The sum is bounded by `P + 2δ^(k−1)` once `δ` at least doubles per
/// generation (or by `P + k·δ^(k−1)` once it is non-decreasing).  When the
/// resulting closed form is eventually `≤ 0` the limsup of `α_m` is finite for
/// every φ-sequence and every unimodular eigenvalue is a root of unity.
///
/// The sufficient condition `2^{−τ^(k)} M^{Δ^(k−1)} → 0` for every `M` is
/// also evaluated (as `τ^(k)/Δ^(k−1) → ∞`); when it fails and the direct bound
/// is not proved, the verdict is `Fails` — a statement about the sufficient
/// conditions only.  The sampled φ-sequences contribute the values
/// `log₂ α_m`, `m ≤ M`, as a trace.
pub fn check_vp(family: &Family, samples: &[PhiSequence], stages: usize) -> Verdict {
    let anchor = "unimodular_eigenvalues_are_roots_of_unity";
    let mut verdict = Verdict::new(anchor, Status::Undetermined)
        .with_note("sampled phi-sequences are a trace of alpha_m only; the conclusion rests on the symbolic bound");
    for (i, seq) in samples.iter().enumerate() {
        let trace: Vec<String> =
            (1..=stages).map(|m| log2_alpha(family, seq, m).map_or_else(|| "?".into(), |v| format!("{v:.1}"))).collect();
        verdict = verdict.with_cert(&format!("trace_log2_alpha_{i}"), trace.join(","));
    }
    if !matches!(family, Family::CPlus(_)) {
        return verdict.with_note("the symbolic bound is implemented for C+-type families");
    }
    let (tau, delta, big_delta) = family.generation_params().expect("C+ families carry parameters");
    let (Some(tau), Some(delta), Some(big_delta)) = (tau.closed(), delta.closed(), big_delta.closed()) else {
        return verdict.with_note("parameters given by tables: no symbolic comparison");
    };
    match direct_bound(tau, delta, big_delta) {
        Ok((onset, bound)) => verdict
            .with_witness("onset_k", onset)
            .with_cert("log2_alpha_upper", bound)
            .with_note("log2 alpha_m <= 0 for all phi-sequences once n(m) lies in generation >= onset_k")
            .with_status(Status::Holds),
        Err(reason) => {
            let delta_prev = match big_delta.shift(-1) {
                Some(d) => d,
                None => return verdict.with_note(reason),
            };
            let ratio = tau.limit_ratio(&delta_prev);
            verdict = verdict
                .with_note(reason)
                .with_cert("lim tau(k)/Delta(k-1)", ratio.as_ref().map_or_else(|| "unknown".to_string(), |l| l.to_string()));
            match ratio {
                Some(Limit::PosInf) => {
                    verdict.with_note("2^-tau(k) M^Delta(k-1) -> 0 for every M, but the auxiliary growth hypotheses are not checked")
                }
                Some(_) => verdict
                    .with_note("2^-tau(k) M^Delta(k-1) does not tend to 0 for large M: both sufficient conditions fail")
                    .with_status(Status::Fails),
                None => verdict,
            }
        }
    }
}

trait WithStatus {
    fn with_status(self, status: Status) -> Self;
}

impl WithStatus for Verdict {
    fn with_status(mut self, status: Status) -> Self {
        self.status = status;
        self
    }
}

/// The proved onset and the closed-form upper bound of `log₂ α`.
fn direct_bound(tau: &Seq, delta: &Seq, big_delta: &Seq) -> Result<(u64, Seq), String> {
    let log_size = log2_upper_poly(big_delta).ok_or("no polynomial bound for log2 Delta")?;
    let delta_prev = delta.shift(-1).ok_or("delta cannot be shifted")?;
    let pow2k = Seq::pow2(BigRational::one(), &[0, 1]);
    let base = pow2k.sub(tau).add(&Seq::k().mul(&log_size));
    let doubling = delta.scale(&int(2)).sub(&delta.shift(1).ok_or("delta cannot be shifted")?);
    let monotone = delta.sub(&delta.shift(1).ok_or("delta cannot be shifted")?);
    let attempts = [
        (doubling.eventually_le(&BigRational::zero()), delta_prev.scale(&int(2))),
        (monotone.eventually_le(&BigRational::zero()), Seq::k().mul(&delta_prev)),
    ];
    for (onset, sum_bound) in attempts {
        let Some(i0) = onset else { continue };
        let prefix: BigInt = (1..i0).filter_map(|i| delta.eval_int(i)).filter(|d| d.is_positive()).sum();
        let bound = base.add(&sum_bound).add_const(&BigRational::from_integer(prefix));
        if let Some(k1) = bound.eventually_le(&BigRational::zero()) {
            return Ok((k1.max(i0 + 1), bound));
        }
    }
    Err("the closed-form bound on log2 alpha is not eventually <= 0".into())
}

/// `log₂ α_m` along a sampled φ-sequence (floating point, for the trace).
pub fn log2_alpha(family: &Family, seq: &PhiSequence, m: usize) -> Option<f64> {
    let f = |b: BigInt| b.to_f64();
    let log2_size = |k: u64| family.big_delta_at(k).and_then(f).map(f64::log2);
    let km = seq.k(m);
    let mut acc = -f(family.tau_at(km)?)? + seq.n(m) as f64 + m as f64 * log2_size(km)?;
    for j in 1..m {
        let kj = seq.k(j);
        acc += -f(family.tau_at(kj)?)? - log2_size(kj)? + f(family.delta_at(kj)?)?;
    }
    Some(acc)
}

/// Smallest constant `C ≤ c_max` for which [`check_vp`] holds.
pub fn minimal_vp_constant(build: impl Fn(u32) -> Family, c_max: u32) -> Option<u32> {
    (1..=c_max).find(|&c| check_vp(&build(c), &[], 0).holds())
}

/// The diagonal `(λ_k)_{k≥1}` of a diagonal-plus-shift operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagonalRule {
    /// `λ_k = e^{iθ/k}`: distinct unimodular values tending to `1`.
    RotatingToOne { theta: f64 },
    /// Explicit values (undefined past the end of the table).
    Table(Vec<ComplexValue>),
}

impl DiagonalRule {
    pub fn at(&self, k: u64) -> Option<Complex64> {
        match self {
            DiagonalRule::RotatingToOne { theta } => Some(Complex64::from_polar(1.0, theta / k as f64)),
            DiagonalRule::Table(t) => t.get((k - 1) as usize).map(|&c| c.into()),
        }
    }

    /// `sup_{k ≥ from} |1 − λ_k|` when known in closed form.
    fn distance_to_one_from(&self, from: u64) -> Option<f64> {
        match self {
            DiagonalRule::RotatingToOne { theta } => Some((theta.abs() / from as f64).min(2.0)),
            DiagonalRule::Table(_) => None,
        }
    }
}

/// The weights `(ω_j)_{j≥1}` of the backward shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightRule {
    Constant(f64),
    /// `ω_j = c·r^j`.
    Geometric {
        c: f64,
        r: f64,
    },
    Table(Vec<f64>),
}

impl WeightRule {
    pub fn at(&self, j: u64) -> Option<f64> {
        match self {
            WeightRule::Constant(w) => Some(*w),
            WeightRule::Geometric { c, r } => Some(c * r.powf(j as f64)),
            WeightRule::Table(t) => t.get((j - 1) as usize).copied(),
        }
    }
}

/// `T_{λ,ω} = D_λ + B_ω` on `ℓ₂` with basis `e_1, e_2, …`:
/// `T e_1 = λ_1 e_1`, `T e_n = λ_n e_n + ω_{n−1} e_{n−1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagShiftSpec {
    pub diagonal: DiagonalRule,
    pub weights: WeightRule,
}

/// Convergence of the eigenvector series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convergence {
    /// A factor vanishes: the series is a finite sum.
    Finite,
    Converges,
    Diverges,
    Undetermined,
}

/// `R_ω`, the radius of convergence of `Σ_j z^j/(ω_1⋯ω_j)`.
pub fn weight_radius(weights: &WeightRule) -> Option<f64> {
    match *weights {
        WeightRule::Constant(w) => Some(w.abs()),
        WeightRule::Geometric { c, r } => Some(if r.abs() > 1.0 {
            f64::INFINITY
        } else if r.abs() < 1.0 {
            0.0
        } else {
            c.abs()
        }),
        WeightRule::Table(_) => None,
    }
}

/// Ratio test for `Σ_n |x_n|²` with `|x_{n+1}/x_n| = |λ − λ_n|/|ω_n| → |λ − 1|/R`.
fn classify_diag(spec: &DiagShiftSpec, lambda: Complex64) -> Convergence {
    if !matches!(spec.diagonal, DiagonalRule::RotatingToOne { .. }) {
        return Convergence::Undetermined;
    }
    let Some(r) = weight_radius(&spec.weights) else { return Convergence::Undetermined };
    let dist = (lambda - Complex64::new(1.0, 0.0)).norm();
    if r.is_infinite() {
        return Convergence::Converges;
    }
    if r == 0.0 {
        return if dist == 0.0 { Convergence::Undetermined } else { Convergence::Diverges };
    }
    let q = dist / r;
    if q < 1.0 {
        Convergence::Converges
    } else if q > 1.0 {
        Convergence::Diverges
    } else {
        Convergence::Undetermined
    }
}

/// A truncated eigenvector of a diagonal-plus-shift operator with its
/// convergence classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagShiftEigen {
    pub truncation: EigenTruncation,
    pub convergence: Convergence,
    pub radius: Option<f64>,
}

/// `E(λ) = e_1 + Σ_{2≤n≤M} ∏_{j<n} (λ − λ_j)/ω_j · e_n` and the residual of
/// `(T − λ)` applied to it on the truncation.
pub fn diag_shift_eigenvector(spec: &DiagShiftSpec, lambda: Complex64, stages: usize) -> Result<DiagShiftEigen, SpectralError> {
    if stages == 0 {
        return Err(SpectralError::Undetermined("at least one stage is needed".into()));
    }
    let m = stages as u64;
    let undefined = |what: &str, j: u64| SpectralError::Undetermined(format!("{what} undefined at index {j}"));
    let mut x: BTreeMap<u64, Complex64> = BTreeMap::new();
    let mut c = Complex64::new(1.0, 0.0);
    x.insert(1, c);
    let mut finite = false;
    for n in 2..=m {
        let j = n - 1;
        let lj = spec.diagonal.at(j).ok_or_else(|| undefined("diagonal", j))?;
        let wj = spec.weights.at(j).ok_or_else(|| undefined("weight", j))?;
        c *= (lambda - lj) / wj;
        if !c.is_finite() || c.norm().log2() > OVERFLOW_LOG2 {
            return Err(SpectralError::Overflow(c.norm().log2()));
        }
        if c == Complex64::default() {
            finite = true;
            break;
        }
        x.insert(n, c);
    }
    // (T x̂ − λ x̂)_n = (λ_n − λ) x_n + ω_n x_{n+1}.
    let mut r2 = 0.0;
    for (&n, &xn) in &x {
        let ln = spec.diagonal.at(n).ok_or_else(|| undefined("diagonal", n))?;
        let next = x.get(&(n + 1)).copied().unwrap_or_default();
        let wn = if next == Complex64::default() { 0.0 } else { spec.weights.at(n).ok_or_else(|| undefined("weight", n))? };
        r2 += ((ln - lambda) * xn + next * wn).norm_sqr();
    }
    let mut truncation = EigenTruncation::from_map(lambda, stages, &x);
    truncation.residual = r2.sqrt();
    truncation.finite_series = finite;
    let convergence = if finite { Convergence::Finite } else { classify_diag(spec, lambda) };
    truncation.tail_bound = if finite { Some(0.0) } else { diag_tail(spec, lambda, m, x.get(&m).copied().unwrap_or_default()) };
    Ok(DiagShiftEigen { truncation, convergence, radius: weight_radius(&spec.weights) })
}

/// `|x_M| q/(1 − q)` with `q ≥ sup_{n≥M} |λ − λ_n|/ω_n`, when `q < 1`.
fn diag_tail(spec: &DiagShiftSpec, lambda: Complex64, m: u64, x_m: Complex64) -> Option<f64> {
    let w_min = match spec.weights {
        WeightRule::Constant(w) => w.abs(),
        WeightRule::Geometric { c, r } if r.abs() >= 1.0 => (c * r.powf(m as f64)).abs(),
        _ => return None,
    };
    let dist = (lambda - Complex64::new(1.0, 0.0)).norm() + spec.diagonal.distance_to_one_from(m)?;
    let q = dist / w_min;
    (q < 1.0).then(|| x_m.norm() * q / (1.0 - q))
}

/// Radius `R` of the spectrum `D̄(0, R)` of a C-type operator from its weight
/// profile: the largest weight whose runs become arbitrarily long.
///
/// C₊ and C₂ blocks start with a run of `δ^(k)` weights equal to `2`; when
/// `δ^(k) → ∞` the radius is `2`.  When `δ^(k)` stays bounded every window
/// product is at most `2^{2 sup δ}` while the runs of `1` grow, so `R = 1`.
pub fn spectrum_radius(family: &Family) -> Result<f64, SpectralError> {
    let Some((_, delta, big_delta)) = family.generation_params() else {
        return Err(SpectralError::Undetermined("no closed-form weight profile".into()));
    };
    let (Some(delta), Some(big_delta)) = (delta.closed(), big_delta.closed()) else {
        return Err(SpectralError::Undetermined("parameters given by tables".into()));
    };
    match (delta.limit(), big_delta.limit()) {
        (Some(Limit::PosInf), _) => Ok(2.0),
        (Some(Limit::Finite(_)), Some(Limit::PosInf)) => Ok(1.0),
        _ => Err(SpectralError::Undetermined("run lengths of the weight profile are not decided".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_turn_powers_are_exact() {
        let l = Unimodular::turns(1, 16);
        assert_eq!(l.pow(8), Complex64::new(-1.0, 0.0));
        assert_eq!(l.pow(16), Complex64::new(1.0, 0.0));
        assert_eq!(Unimodular::turns(-3, 4).pow(4), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn tail_estimate_uses_geometric_decay() {
        let t = tail_estimate(false, &[1.0, 0.5, 0.25]).unwrap();
        assert!((t - 2.0).abs() < 1e-12);
        assert_eq!(tail_estimate(false, &[1.0, 2.0]), None);
        assert_eq!(tail_estimate(true, &[]), Some(0.0));
    }

    #[test]
    fn weight_radius_of_constant_weights() {
        assert_eq!(weight_radius(&WeightRule::Constant(2.0)), Some(2.0));
        assert_eq!(weight_radius(&WeightRule::Geometric { c: 1.0, r: 0.5 }), Some(0.0));
    }
}
