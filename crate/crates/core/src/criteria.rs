//! Parameter-side classifiers and bound certificates for C-type families.
//!
//! Every checker returns a [`Verdict`]: a four-valued status, a descriptive
//! anchor naming the criterion, the witness indices that make a `Holds` or
//! `Fails` conclusion re-checkable, and the exact certificate values (as
//! strings) that were compared.
//!
//! Asymptotic conditions (`lim`, `limsup`, "eventually") are decided only for
//! closed-form parameters, through the proved onsets of [`Seq::eventually_le`].
//! Series conditions such as `Σ 2^k γ_k^{1/2} ≤ 1` are certified by an exact
//! partial sum up to an index `K` from which consecutive terms provably halve,
//! plus the geometric tail bound `Σ_{k ≥ K} t_k ≤ 2 t_K`.  Square roots are
//! replaced by certified upper bounds, which only makes `≤` conclusions harder
//! to reach, never wrong.
//!
//! Products of C₊ weights are handled in `log₂` form through [`LogProfile`],
//! so block sizes far beyond machine integers are fine.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::closed::{int, pow2_rat, rat, Limit, Poly, Seq};
use crate::ctype::{CPlusSpec, CPlusVariant, CTypeError, CTypeOperator, Family};
use crate::orbit::{self, OrbitError};
use crate::scalar::{BigExp, ExactScalar, UpperSum};
use crate::vector::{FiniteVector, SpaceExponent};

/// Precision (bits) of certified square-root upper bounds.
const SQRT_BITS: u32 = 64;
/// Slack (bits) of the rounding-up partial sums.
const SUM_SLACK_BITS: u32 = 96;
/// Extra terms summed exactly past the halving onset to tighten a tail bound.
const EXTRA_TERMS: u64 = 6;
/// Default number of generations searched past `k₀` by the witness searches.
pub const DEFAULT_SEARCH_SPAN: u64 = 12;
/// Default threshold on `δ^(k) − τ^(k)` for table-supplied chaos checks (`2^60`).
pub const DEFAULT_CHAOS_THRESHOLD_LOG2: u32 = 60;
/// Generations scanned exactly for a violated hypothesis when no symbolic onset exists.
const HYPOTHESIS_SCAN: u64 = 64;

/// Outcome of a checker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    /// The criterion's condition is certified.
    Holds,
    /// The condition is refuted (or, for bounded searches, no witness exists
    /// within the recorded bounds).
    Fails,
    /// Finite data cannot decide the condition.
    Undetermined,
    /// A hypothesis of the criterion fails, so it says nothing.
    Inapplicable,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Holds => "holds",
            Status::Fails => "fails",
            Status::Undetermined => "undetermined",
            Status::Inapplicable => "inapplicable",
        })
    }
}

/// A checker's conclusion together with everything needed to re-check it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verdict {
    /// Descriptive name of the criterion, e.g. `"chaos_by_coupling_growth"`.
    pub anchor: String,
    pub status: Status,
    /// Witness indices and constants (`k`, `m`, onsets, …).
    pub witness: BTreeMap<String, String>,
    /// Exact values that were compared.
    pub certificate: BTreeMap<String, String>,
    /// Horizon of any finite search involved.
    pub horizon: Option<u64>,
    pub notes: Vec<String>,
}

impl Verdict {
    pub fn new(anchor: &str, status: Status) -> Self {
        Verdict {
            anchor: anchor.to_string(),
            status,
            witness: BTreeMap::new(),
            certificate: BTreeMap::new(),
            horizon: None,
            notes: Vec::new(),
        }
    }

    pub fn holds(&self) -> bool {
        self.status == Status::Holds
    }

    pub fn with_witness(mut self, key: &str, value: impl fmt::Display) -> Self {
        self.witness.insert(key.to_string(), value.to_string());
        self
    }

    pub fn with_cert(mut self, key: &str, value: impl fmt::Display) -> Self {
        self.certificate.insert(key.to_string(), value.to_string());
        self
    }

    pub fn with_horizon(mut self, horizon: u64) -> Self {
        self.horizon = Some(horizon);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    fn set_status(mut self, status: Status) -> Self {
        self.status = status;
        self
    }
}

/// Failures of the block-level verifications.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CriteriaError {
    #[error(transparent)]
    Geometry(#[from] CTypeError),
    #[error(transparent)]
    Orbit(#[from] OrbitError),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

// ---------------------------------------------------------------------------
// Exact logarithms and closed-form helpers.

/// Smallest integer `e` with `x ≤ 2^e` (`x > 0`).
pub fn ceil_log2(x: &BigRational) -> i64 {
    assert!(x.is_positive(), "log2 of a non-positive number");
    let mut e = x.numer().bits() as i64 - x.denom().bits() as i64;
    while &pow2_rat(e) < x {
        e += 1;
    }
    while &pow2_rat(e - 1) >= x {
        e -= 1;
    }
    e
}

/// Largest integer `e` with `2^e ≤ x` (`x > 0`).
pub fn floor_log2(x: &BigRational) -> i64 {
    assert!(x.is_positive(), "log2 of a non-positive number");
    let mut e = x.numer().bits() as i64 - x.denom().bits() as i64;
    while &pow2_rat(e) > x {
        e -= 1;
    }
    while &pow2_rat(e + 1) <= x {
        e += 1;
    }
    e
}

/// The single term of a positive one-term closed form without overrides.
fn single_term(s: &Seq) -> Option<&crate::closed::Term> {
    match s.terms() {
        [t] if s.overrides().is_empty() && t.coeff.is_positive() => Some(t),
        _ => None,
    }
}

/// A polynomial upper bound for `log₂ s(k)`, `k ≥ 1`.
///
/// For `c·k^a·B^k·2^{p(k)}`: `⌈log₂ c⌉ + max(a, 0)·k + ⌈log₂ B⌉·k + p(k)`,
/// using `log₂ k ≤ k`.
pub fn log2_upper_poly(s: &Seq) -> Option<Seq> {
    let t = single_term(s)?;
    let lin = int(t.k_pow.max(0) as i64) + int(ceil_log2(&t.base));
    let c0 = int(ceil_log2(&t.coeff));
    Some(Seq::poly(&Poly::new(vec![c0, lin]).add(&t.exp2).0))
}

/// A polynomial lower bound for `log₂ s(k)`, `k ≥ 1`.
pub fn log2_lower_poly(s: &Seq) -> Option<Seq> {
    let t = single_term(s)?;
    let lin = int(t.k_pow.min(0) as i64) + int(floor_log2(&t.base));
    let c0 = int(floor_log2(&t.coeff));
    Some(Seq::poly(&Poly::new(vec![c0, lin]).add(&t.exp2).0))
}

/// A polynomial upper bound for `log₂ (s(k+1)/s(k))`, `k ≥ 1`.
pub fn log2_ratio_upper(s: &Seq) -> Option<Seq> {
    let t = single_term(s)?;
    let c0 = int(t.k_pow.max(0) as i64) + int(ceil_log2(&t.base));
    let diff = t.exp2.shift(1).sub(&t.exp2);
    Some(Seq::poly(&Poly::new(vec![c0]).add(&diff).0))
}

/// Closed-form generation parameters with `δ^(k−1)` (and `δ^(0) = 0`).
#[derive(Debug, Clone)]
struct ClosedParams {
    tau: Seq,
    delta: Seq,
    big_delta: Seq,
    delta_prev: Seq,
}

impl ClosedParams {
    fn of(family: &Family) -> Option<Self> {
        let (tau, delta, big_delta) = family.generation_params()?;
        let (tau, delta, big_delta) = (tau.closed()?, delta.closed()?, big_delta.closed()?);
        let delta_prev = delta.shift(-1)?.with_override(1, BigRational::zero());
        Some(ClosedParams { tau: tau.clone(), delta: delta.clone(), big_delta: big_delta.clone(), delta_prev })
    }

    /// `E(k) = δ^(k−1) − τ^(k)`, the exponent of `γ_k` without the size factor.
    fn gamma_exponent(&self) -> Seq {
        self.delta_prev.sub(&self.tau)
    }

    /// `E(k+1) − E(k)`.
    fn gamma_exponent_step(&self) -> Option<Seq> {
        let e = self.gamma_exponent();
        Some(e.shift(1)?.sub(&e))
    }
}

fn limit_text(l: &Option<Limit>) -> String {
    l.as_ref().map_or_else(|| "unknown".to_string(), |l| l.to_string())
}

fn limit_positive(l: &Limit) -> bool {
    match l {
        Limit::PosInf => true,
        Limit::Finite(r) => r.is_positive(),
        Limit::Irrational(_) => l.approx() > 0.0,
        Limit::NegInf => false,
    }
}

fn limit_below_one(l: &Limit) -> bool {
    match l {
        Limit::Finite(r) => r < &BigRational::one(),
        Limit::Irrational(_) => l.approx() < 1.0,
        Limit::NegInf => true,
        Limit::PosInf => false,
    }
}

fn to_rational(x: &BigInt) -> BigRational {
    BigRational::from_integer(x.clone())
}

// ---------------------------------------------------------------------------
// Piecewise-linear log profiles of C₊ blocks.

/// `F(i) = Σ_{s=1}^{i} log₂ w_{b_n+s}` for a C₊ block of size `Δ`, kept as
/// maximal segments of constant slope `log₂ w ∈ {−1, 0, 1}` with big-integer
/// endpoints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogProfile {
    size: BigInt,
    /// `(lo, hi, slope)` covering offsets `lo..hi`.
    segments: Vec<(BigInt, BigInt, i64)>,
}

impl LogProfile {
    /// The profile of a C₊ block with `Δ = size` and `δ = delta`.
    pub fn cplus(variant: CPlusVariant, size: &BigInt, delta: &BigInt) -> Self {
        let one = BigInt::one();
        let d1 = delta + &one;
        let mut segments = Vec::new();
        let mut push = |lo: BigInt, hi: BigInt, slope: i64| {
            if hi > lo {
                segments.push((lo, hi, slope));
            }
        };
        match variant {
            CPlusVariant::One => {
                push(one.clone(), d1.clone(), 1);
                push(d1, size.clone(), 0);
            }
            CPlusVariant::Two => {
                let s1: BigInt = size - delta * 3;
                let s2: BigInt = size - delta * 2;
                let s3: BigInt = size - delta;
                push(one.clone(), d1.clone(), 1);
                push(d1, s1.clone(), 0);
                push(s1, s2.clone(), -1);
                push(s2, s3.clone(), 1);
                push(s3, size.clone(), 0);
            }
        }
        LogProfile { size: size.clone(), segments }
    }

    pub fn size(&self) -> &BigInt {
        &self.size
    }

    /// `F(i)` for `0 ≤ i < size`.
    pub fn prefix(&self, i: &BigInt) -> BigInt {
        let mut acc = BigInt::zero();
        for (lo, hi, slope) in &self.segments {
            if lo > i {
                break;
            }
            let top = if hi - 1 < *i { hi - 1 } else { i.clone() };
            acc += (top - lo + 1) * slope;
        }
        acc
    }

    /// `log₂ ∏_{s=lo}^{hi} w_{b_n+s}` (zero for an empty range).
    pub fn range(&self, lo: &BigInt, hi: &BigInt) -> BigInt {
        if hi < lo {
            return BigInt::zero();
        }
        self.prefix(hi) - self.prefix(&(lo - 1))
    }

    /// `log₂ W_n = F(size − 1)`.
    pub fn total(&self) -> BigInt {
        self.prefix(&(&self.size - 1))
    }

    /// `log₂` of the product of the last `m` weights, `Σ_{i=Δ−m}^{Δ−1}`.
    pub fn suffix(&self, m: &BigInt) -> BigInt {
        self.range(&(&self.size - m), &(&self.size - 1))
    }

    /// `max_{0 ≤ i ≤ m} F(i)`; a piecewise-linear function peaks at a breakpoint
    /// or an endpoint.
    pub fn max_prefix(&self, m: &BigInt) -> BigInt {
        let mut best = BigInt::zero();
        let mut consider = |i: &BigInt| {
            if !i.is_negative() && i <= m {
                let v = self.prefix(i);
                if v > best {
                    best = v;
                }
            }
        };
        consider(m);
        for (lo, hi, _) in &self.segments {
            consider(&(lo - 1));
            consider(&(hi - 1));
        }
        best
    }
}

fn cplus_spec(family: &Family) -> Option<&CPlusSpec> {
    match family {
        Family::CPlus(s) => Some(s),
        _ => None,
    }
}

fn gen_values(family: &Family, k: u64) -> Option<(BigInt, BigInt, BigInt)> {
    Some((family.tau_at(k)?, family.delta_at(k)?, family.big_delta_at(k)?))
}

// ---------------------------------------------------------------------------
// Chaos.

/// Chaos through unbounded coupling growth `|v_N|·W_N` along every fibre of `φ`.
///
/// For C₊ and C₂ families `|v|·W = 2^{δ^(k) − τ^(k)}` on generation `k`, and
/// every fibre meets all later generations, so the condition is
/// `limsup (δ^(k) − τ^(k)) = ∞`.  Closed forms are decided symbolically;
/// tables report the maximum over `k ≤ horizon` and stay undetermined.
pub fn check_chaos(family: &Family, horizon: u64, threshold_log2: u32) -> Verdict {
    let anchor = "chaos_by_coupling_growth";
    if let Some(cp) = ClosedParams::of(family) {
        let gap = cp.delta.sub(&cp.tau);
        let lim = gap.limit();
        let v = Verdict::new(anchor, Status::Undetermined).with_cert("delta_minus_tau", &gap).with_cert("limit", limit_text(&lim));
        return match lim {
            Some(Limit::PosInf) => v.set_status(Status::Holds).with_witness("divergent_closed_form", &gap),
            Some(_) => v.set_status(Status::Fails).with_note("δ − τ stays bounded above, so |v|·W does not blow up along the fibres"),
            None => v.with_note("limit of δ − τ not decidable for this closed form"),
        };
    }
    let threshold = BigInt::one() << threshold_log2 as usize;
    let mut best: Option<(u64, BigInt)> = None;
    let mut used = 0;
    match family {
        Family::Generic(g) => {
            // |v_n|·W_n block by block.
            for n in 1..g.b.len().saturating_sub(1).min(horizon as usize + 1) {
                let mut w = g.v[n].abs();
                for j in g.b[n] + 1..g.b[n + 1] {
                    w = &w * &g.w[j as usize].abs();
                }
                used = n as u64;
                let e = BigInt::from(w.log2_abs().floor() as i64);
                if best.as_ref().is_none_or(|(_, b)| &e > b) {
                    best = Some((n as u64, e));
                }
            }
        }
        _ => {
            for k in 1..=horizon {
                let (Some(t), Some(d)) = (family.tau_at(k), family.delta_at(k)) else { break };
                used = k;
                let e = d - t;
                if best.as_ref().is_none_or(|(_, b)| &e > b) {
                    best = Some((k, e));
                }
            }
        }
    }
    let mut v = Verdict::new(anchor, Status::Undetermined).with_horizon(used);
    if let Some((k, e)) = best {
        v = v.with_witness("argmax", k).with_cert("max_log2_coupling_growth", &e);
        if e >= threshold {
            v = v.with_note(format!("threshold 2^{threshold_log2} exceeded within the horizon (empirical only)"));
        } else {
            v = v.with_note(format!("threshold 2^{threshold_log2} not reached within the horizon"));
        }
    }
    v.with_note("tabulated parameters: asymptotic condition not decidable from finite data")
}

// ---------------------------------------------------------------------------
// Witness searches for the product inequalities.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SearchKind {
    /// `k > k₀`, `m′ ≤ αm`.
    Upper,
    /// `k ≥ k₀`, `m′ ≤ αΔ`.
    Frequent,
}

/// Candidate values of `m` for generation parameters `(δ, Δ)`, paper witnesses first.
fn candidate_ms(kind: SearchKind, delta: &BigInt, size: &BigInt) -> Vec<BigInt> {
    let top: BigInt = size - 1;
    let mut out: Vec<BigInt> = Vec::new();
    let first = match kind {
        SearchKind::Upper => vec![delta * 2, top.clone()],
        SearchKind::Frequent => vec![top.clone(), delta * 2],
    };
    let mut grid = first;
    for t in 1..16 {
        grid.push(size * t / 16);
    }
    for c in 1..=3 {
        grid.push(delta * c);
        grid.push(size - delta * c);
    }
    for m in grid {
        let m = m.clamp(BigInt::one(), top.clone());
        if m >= BigInt::one() && !out.contains(&m) {
            out.push(m);
        }
    }
    out
}

fn product_search(family: &Family, kind: SearchKind, alpha: &BigRational, c: &BigRational, k0: u64, span: u64) -> Verdict {
    let anchor = match kind {
        SearchKind::Upper => "ufhc_product_search",
        SearchKind::Frequent => "fhc_product_search",
    };
    let Some(spec) = cplus_spec(family) else {
        return Verdict::new(anchor, Status::Inapplicable).with_note("the product criterion is stated for C₊-type families");
    };
    if c < &BigRational::one() || !alpha.is_positive() {
        return Verdict::new(anchor, Status::Inapplicable).with_note("requires C ≥ 1 and α > 0");
    }
    let need_ge = ceil_log2(c);
    let need_gt = floor_log2(c) + 1;
    let k_start = match kind {
        SearchKind::Upper => k0 + 1,
        SearchKind::Frequent => k0.max(1),
    };
    let k_end = k0 + span;
    let mut searched = 0;
    for k in k_start..=k_end {
        let Some((tau, delta, size)) = gen_values(family, k) else { break };
        searched = k;
        let prof = LogProfile::cplus(spec.variant, &size, &delta);
        let total = prof.total();
        for m in candidate_ms(kind, &delta, &size) {
            // (A): |v| ∏_{i=Δ−m}^{Δ−1} |w_i| ≥ C.
            let lhs_a = prof.suffix(&m) - &tau;
            if lhs_a < BigInt::from(need_ge) {
                continue;
            }
            // (B): |v| ∏_{i=m′+1}^{Δ−1} |w_i| > C for every 0 ≤ m′ ≤ bound.
            let bound = match kind {
                SearchKind::Upper => (alpha * to_rational(&m)).floor().to_integer(),
                SearchKind::Frequent => (alpha * to_rational(&size)).floor().to_integer(),
            };
            let bound = bound.min(&size - 1);
            let lhs_b = &total - prof.max_prefix(&bound) - &tau;
            if lhs_b >= BigInt::from(need_gt) {
                return Verdict::new(anchor, Status::Holds)
                    .with_witness("k", k)
                    .with_witness("m", &m)
                    .with_cert("log2_lhs_a", &lhs_a)
                    .with_cert("log2_lhs_b_min", &lhs_b)
                    .with_cert("log2_C", format!("[{}, {}]", need_gt - 1, need_ge))
                    .with_cert("m_prime_bound", &bound)
                    .with_horizon(searched);
            }
        }
    }
    Verdict::new(anchor, Status::Fails)
        .with_horizon(searched)
        .with_witness("k_range", format!("{k_start}..={searched}"))
        .with_note("no (k, m) witness within the search bounds")
}

/// Search for `k > k₀` and `1 ≤ m < Δ^(k)` with `|v|∏_{Δ−m}^{Δ−1}|w| ≥ C` and
/// `|v|∏_{m′+1}^{Δ−1}|w| > C` for all `0 ≤ m′ ≤ αm` (the U-frequent
/// hypercyclicity criterion for C₊ operators).  The witness `m = 2δ^(k)` is
/// tried first.
pub fn check_ufhc_search(family: &Family, alpha: &BigRational, c: &BigRational, k0: u64, span: u64) -> Verdict {
    product_search(family, SearchKind::Upper, alpha, c, k0, span)
}

/// As [`check_ufhc_search`] with `k ≥ k₀` and `m′` ranging over `[0, αΔ^(k)]`
/// (the frequent hypercyclicity criterion); `m = Δ^(k) − 1` is tried first.
pub fn check_fhc_search(family: &Family, alpha: &BigRational, c: &BigRational, k0: u64, span: u64) -> Verdict {
    product_search(family, SearchKind::Frequent, alpha, c, k0, span)
}

// ---------------------------------------------------------------------------
// γ certificates.

/// `γ_k^p = 2^{p(δ^(k−1)−τ^(k))}·(Δ^(k))^{p−1}`, exact.
pub fn gamma_pow_p(family: &Family, p: SpaceExponent, k: u64) -> Option<ExactScalar> {
    let e = family.delta_at(k - 1)? - family.tau_at(k)?;
    let size = family.big_delta_at(k)?;
    let pp = BigInt::from(p.0);
    Some(ExactScalar::from_int(size).pow(&(&pp - 1)).mul_pow2(&BigExp::from_big(e * pp)))
}

/// Certified upper bound for `γ_k` (exact when `p = 1`).
pub fn gamma_upper(family: &Family, p: SpaceExponent, k: u64) -> Option<ExactScalar> {
    let g = gamma_pow_p(family, p, k)?;
    match p.0 {
        1 => Some(g),
        2 => g.sqrt_upper(SQRT_BITS).ok(),
        _ => None,
    }
}

/// Certified upper bound for `γ_k^{1/2}`.
pub fn gamma_sqrt_upper(family: &Family, p: SpaceExponent, k: u64) -> Option<ExactScalar> {
    gamma_upper(family, p, k)?.sqrt_upper(SQRT_BITS).ok()
}

/// `h = 1 − 1/p` as a rational.
fn size_power(p: SpaceExponent) -> BigRational {
    BigRational::one() - rat(1, p.0 as i64)
}

/// A proved tail bound for a series of non-negative terms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SeriesCertificate {
    /// First summation index.
    pub start: u64,
    /// Upper bounds `u_k ≥ t_k` for `start ≤ k ≤ tail_from`.
    pub terms: Vec<(u64, ExactScalar)>,
    /// Index from which `t_{k+1} ≤ t_k/2` is proved.
    pub halving_onset: u64,
    /// `Σ_{k ≥ tail_from} t_k ≤ tail_bound = 2 u_{tail_from}`.
    pub tail_from: u64,
    pub tail_bound: ExactScalar,
    /// `Σ_{start ≤ k < tail_from} u_k + tail_bound`.
    pub total_upper: ExactScalar,
    /// The symbolic upper bound on `log₂(t_{k+1}/t_k)` behind the onset.
    pub log_ratio: String,
}

/// Certify `Σ_{k ≥ start} t_k` from exact upper bounds `term(k)` and a proved
/// upper bound on the log-ratio of consecutive true terms.
pub(crate) fn certify_series(start: u64, log_ratio: &Seq, term: impl Fn(u64) -> Option<ExactScalar>) -> Result<SeriesCertificate, String> {
    let onset = log_ratio.eventually_le(&int(-1)).ok_or_else(|| format!("no halving onset for log-ratio bound {log_ratio}"))?;
    let first_tail = onset.max(start);
    let mut best: Option<SeriesCertificate> = None;
    let mut terms: Vec<(u64, ExactScalar)> = Vec::new();
    let mut sum = UpperSum::new(SUM_SLACK_BITS);
    for k in start..=first_tail + EXTRA_TERMS {
        let u = term(k).ok_or_else(|| format!("term {k} unavailable"))?;
        if k >= first_tail {
            let tail = &u + &u;
            let mut with_tail = sum.clone();
            with_tail.add(&tail);
            let total = with_tail.value().clone();
            let better = best.as_ref().is_none_or(|b| total < b.total_upper);
            if better {
                let mut shown = terms.clone();
                shown.push((k, u.clone()));
                best = Some(SeriesCertificate {
                    start,
                    terms: shown,
                    halving_onset: onset,
                    tail_from: k,
                    tail_bound: tail,
                    total_upper: total,
                    log_ratio: log_ratio.to_string(),
                });
            }
        }
        sum.add(&u);
        terms.push((k, u));
    }
    best.ok_or_else(|| "empty series".to_string())
}

/// Everything certified about `(γ_k)` for one family.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GammaCertificate {
    pub p: u32,
    /// Upper bounds for `γ_k` on the materialized prefix.
    pub gamma: Vec<(u64, ExactScalar)>,
    /// `γ_{k+1} ≤ γ_k` checked exactly for `1 ≤ k <` the symbolic onset.
    pub non_increasing_prefix: bool,
    /// Onset from which `γ_{k+1} ≤ γ_k` is proved symbolically.
    pub non_increasing_onset: Option<u64>,
    /// Certificate for `Σ_{k≥1} 2^k γ_k^{1/2}`.
    pub series: Option<SeriesCertificate>,
}

impl GammaCertificate {
    pub fn non_increasing(&self) -> bool {
        self.non_increasing_prefix && self.non_increasing_onset.is_some()
    }
}

/// Symbolic bound on `log₂(γ_{k+1}/γ_k) = E(k+1) − E(k) + h·log₂(Δ^(k+1)/Δ^(k))`.
fn gamma_log_ratio(cp: &ClosedParams, p: SpaceExponent) -> Option<Seq> {
    let h = size_power(p);
    let step = cp.gamma_exponent_step()?;
    if h.is_zero() {
        return Some(step);
    }
    Some(step.add(&log2_ratio_upper(&cp.big_delta)?.scale(&h)))
}

/// Check `γ_{k+1} ≤ γ_k` exactly on `1 ≤ k < upto`; returns the first violation.
fn gamma_monotone_prefix(family: &Family, p: SpaceExponent, upto: u64) -> Result<(), u64> {
    for k in 1..upto {
        let (Some(a), Some(b)) = (gamma_pow_p(family, p, k), gamma_pow_p(family, p, k + 1)) else {
            return Err(k);
        };
        if b > a {
            return Err(k);
        }
    }
    Ok(())
}

/// Build the γ certificate: monotonicity and `Σ_{k≥1} 2^k γ_k^{1/2}`.
pub fn gamma_certificate(family: &Family, p: SpaceExponent) -> Option<GammaCertificate> {
    let cp = ClosedParams::of(family)?;
    let ratio = gamma_log_ratio(&cp, p);
    let onset = ratio.as_ref().and_then(|r| r.eventually_le(&BigRational::zero()));
    let prefix_ok = onset.is_some_and(|o| gamma_monotone_prefix(family, p, o).is_ok());
    let series = ratio.as_ref().and_then(|r| {
        // log₂(t_{k+1}/t_k) = 1 + ½ log₂(γ_{k+1}/γ_k).
        let lr = r.scale(&rat(1, 2)).add_const(&int(1));
        certify_series(1, &lr, |k| Some(gamma_sqrt_upper(family, p, k)?.mul_pow2(&BigExp::from(k as i64)))).ok()
    });
    let top = series.as_ref().map_or(4, |s| s.tail_from).max(onset.unwrap_or(1)).min(64);
    let gamma = (1..=top).filter_map(|k| Some((k, gamma_upper(family, p, k)?))).collect();
    Some(GammaCertificate { p: p.0, gamma, non_increasing_prefix: prefix_ok, non_increasing_onset: onset, series })
}

/// The three side conditions shared by the C₊ classification theorems:
/// `γ_k` non-increasing, `Σ_{k≥1} 2^k γ_k^{1/2} ≤ 1`, `limsup τ/δ < 1`.
pub fn check_side_conditions(family: &Family, p: SpaceExponent) -> (Verdict, Option<GammaCertificate>) {
    let anchor = "gamma_side_conditions";
    let Some(cp) = ClosedParams::of(family) else {
        return (
            Verdict::new(anchor, Status::Undetermined)
                .with_note("side conditions are asymptotic; tabulated parameters leave them undetermined"),
            None,
        );
    };
    let Some(cert) = gamma_certificate(family, p) else {
        return (Verdict::new(anchor, Status::Undetermined).with_note("no γ certificate for this closed form"), None);
    };
    let mut v = Verdict::new(anchor, Status::Holds);
    let mut status = Status::Holds;
    // (a) monotonicity.
    match cert.non_increasing_onset {
        Some(o) => {
            v = v.with_witness("non_increasing_onset", o);
            if let Err(k) = gamma_monotone_prefix(family, p, o) {
                status = Status::Fails;
                v = v.with_witness("gamma_increases_at", k).with_note(format!("γ_{} > γ_{k}", k + 1));
            }
        }
        None => {
            status = Status::Undetermined;
            v = v.with_note("no proved onset for γ_{k+1} ≤ γ_k");
        }
    }
    // (b) the series; a single term above 1 refutes it exactly.
    if let Some(k) = (1..=4).find(|&k| gamma_pow_p(family, p, k).is_some_and(|g| first_term_exceeds(&g, p, k))) {
        status = Status::Fails;
        v = v.with_witness("term_exceeds_one_at", k).with_note(format!("2^{k}·γ_{k}^(1/2) > 1"));
    }
    match &cert.series {
        Some(s) => {
            v = v
                .with_cert("series_total_upper", s.total_upper.to_decimal_string(12))
                .with_cert("series_total_upper_exact", &s.total_upper)
                .with_witness("tail_from", s.tail_from)
                .with_witness("halving_onset", s.halving_onset);
            if s.total_upper > ExactScalar::one() && status == Status::Holds {
                status = Status::Undetermined;
                v = v.with_note("certified upper bound exceeds 1");
            }
        }
        None => {
            if status == Status::Holds {
                status = Status::Undetermined;
            }
            v = v.with_note("no geometric tail certificate for Σ 2^k γ_k^{1/2}");
        }
    }
    // (c) limsup τ/δ < 1.
    let r = cp.tau.limit_ratio(&cp.delta);
    v = v.with_cert("lim_tau_over_delta", limit_text(&r));
    match &r {
        Some(l) if limit_below_one(l) => {}
        Some(_) => status = Status::Fails,
        None => {
            if status == Status::Holds {
                status = Status::Undetermined;
            }
        }
    }
    (v.set_status(status), Some(cert))
}

/// `2^k γ_k^{1/2} > 1` checked exactly via `γ_k^p`: `γ_k > 4^{−k}`.
fn first_term_exceeds(gamma_p: &ExactScalar, p: SpaceExponent, k: u64) -> bool {
    // 2^k γ^{1/2} > 1 ⇔ γ > 4^{−k} ⇔ γ^p > 4^{−kp}.
    let bound = ExactScalar::pow2(-(2 * k as i64) * p.0 as i64);
    gamma_p > &bound
}

// ---------------------------------------------------------------------------
// Classification of C₊,₁ and C₊,₂ families.

/// Verdicts of the C₊,₁ classification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CPlusOneClassification {
    pub side_conditions: Verdict,
    pub fhc: Verdict,
    pub ufhc: Verdict,
    pub gamma: Option<GammaCertificate>,
}

/// Frequent hypercyclicity through `limsup (δ − τ)/Δ > 0`, the witness being
/// `m = Δ^(k) − 1` in the product criterion.
pub fn check_fhc_growth_ratio(family: &Family) -> Verdict {
    let anchor = "fhc_by_growth_ratio";
    let Some(cp) = ClosedParams::of(family) else {
        return Verdict::new(anchor, Status::Undetermined).with_note("needs closed-form parameters");
    };
    if cplus_spec(family).map(|s| s.variant) != Some(CPlusVariant::One) {
        return Verdict::new(anchor, Status::Inapplicable).with_note("stated for C₊,₁ families");
    }
    let lim = cp.delta.sub(&cp.tau).limit_ratio(&cp.big_delta);
    let v = Verdict::new(anchor, Status::Undetermined).with_cert("lim_delta_minus_tau_over_Delta", limit_text(&lim));
    match &lim {
        Some(l) if limit_positive(l) => v.set_status(Status::Holds).with_witness("m", "Delta^(k) - 1"),
        Some(_) => v.set_status(Status::Fails).with_note("(δ − τ)/Δ → 0; the growth-ratio route gives nothing"),
        None => v,
    }
}

/// Classify a C₊,₁ family: side conditions, then FHC ⇔ UFHC ⇔ `limsup δ/Δ > 0`.
pub fn classify_cplus1(family: &Family, p: SpaceExponent) -> CPlusOneClassification {
    let not_one = || Verdict::new("cplus1_classification", Status::Inapplicable).with_note("not a C₊,₁ family");
    if cplus_spec(family).map(|s| s.variant) != Some(CPlusVariant::One) {
        return CPlusOneClassification { side_conditions: not_one(), fhc: not_one(), ufhc: not_one(), gamma: None };
    }
    let (sides, gamma) = check_side_conditions(family, p);
    let ratio = ClosedParams::of(family).and_then(|cp| cp.delta.limit_ratio(&cp.big_delta));
    let growth = check_fhc_growth_ratio(family);
    let mut fhc = Verdict::new("fhc_by_block_ratio", Status::Undetermined).with_cert("lim_delta_over_Delta", limit_text(&ratio));
    if growth.holds() {
        fhc = fhc
            .set_status(Status::Holds)
            .with_witness("m", "Delta^(k) - 1")
            .with_note("holds by limsup (δ − τ)/Δ > 0, independently of the side conditions");
        fhc.certificate.extend(growth.certificate.clone());
    } else if sides.holds() {
        match &ratio {
            Some(l) if limit_positive(l) => fhc = fhc.set_status(Status::Holds),
            Some(_) => fhc = fhc.set_status(Status::Fails).with_note("limsup δ/Δ = 0 under the side conditions"),
            None => {}
        }
    } else {
        fhc = fhc.set_status(Status::Inapplicable).with_note("theorem inapplicable: side conditions not certified");
    }
    let ufhc = match fhc.status {
        Status::Holds => Verdict::new("ufhc_by_block_ratio", Status::Holds).with_note("frequent hypercyclicity implies U-frequent"),
        Status::Fails => Verdict::new("ufhc_by_block_ratio", Status::Fails)
            .with_note("under the side conditions U-frequent and frequent hypercyclicity coincide"),
        s => Verdict::new("ufhc_by_block_ratio", s),
    }
    .with_cert("lim_delta_over_Delta", limit_text(&ratio));
    CPlusOneClassification { side_conditions: sides, fhc, ufhc, gamma }
}

/// `2r/(1 − r) + 2r` for a limiting ratio `r = lim δ/Δ < 1`.
pub fn ct_bound_for_ratio(r: &BigRational) -> BigRational {
    let two = int(2);
    &two * r / (BigRational::one() - r) + &two * r
}

/// Upper bound on `c(T)` for a C₊,₁ family from `lim δ/Δ`:
/// `limsup (2δ/Δ)/(1 − δ/Δ + 1/Δ) + 2δ/Δ`, which for `Δ → ∞` equals
/// `2r/(1 − r) + 2r`.  Only meaningful when `0 < r ≤ 1/5`.
pub fn ct_upper_bound(family: &Family) -> Result<BigRational, Verdict> {
    let anchor = "ergodic_frequency_bound";
    if cplus_spec(family).map(|s| s.variant) != Some(CPlusVariant::One) {
        return Err(Verdict::new(anchor, Status::Inapplicable).with_note("stated for C₊,₁ families"));
    }
    let Some(cp) = ClosedParams::of(family) else {
        return Err(Verdict::new(anchor, Status::Undetermined).with_note("needs closed-form parameters"));
    };
    if cp.big_delta.limit() != Some(Limit::PosInf) {
        return Err(Verdict::new(anchor, Status::Undetermined).with_note("Δ^(k) must tend to infinity"));
    }
    match cp.delta.limit_ratio(&cp.big_delta) {
        Some(Limit::Finite(r)) if r < BigRational::one() => Ok(ct_bound_for_ratio(&r)),
        other => Err(Verdict::new(anchor, Status::Undetermined).with_cert("lim_delta_over_Delta", limit_text(&other))),
    }
}

/// Verdicts of the C₊,₂ classification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CPlusTwoClassification {
    pub side_conditions: Verdict,
    pub ufhc: Verdict,
    pub fhc: Verdict,
    /// U-frequently but not frequently hypercyclic.
    pub separation: bool,
    pub gamma: Option<GammaCertificate>,
}

/// Classify a C₊,₂ family: UFHC from `limsup τ/δ < 1`; under the side
/// conditions and `lim δ^(k)/δ^(k+1) = 0`, FHC ⇔ `limsup δ/Δ > 0`.
pub fn classify_cplus2(family: &Family, p: SpaceExponent) -> CPlusTwoClassification {
    let na = || Verdict::new("cplus2_classification", Status::Inapplicable).with_note("not a C₊,₂ family");
    if cplus_spec(family).map(|s| s.variant) != Some(CPlusVariant::Two) {
        return CPlusTwoClassification { side_conditions: na(), ufhc: na(), fhc: na(), separation: false, gamma: None };
    }
    let (mut sides, gamma) = check_side_conditions(family, p);
    let Some(cp) = ClosedParams::of(family) else {
        let u = Verdict::new("ufhc_by_coupling_ratio", Status::Undetermined).with_note("needs closed-form parameters");
        let f = Verdict::new("fhc_by_block_ratio", Status::Undetermined).with_note("needs closed-form parameters");
        return CPlusTwoClassification { side_conditions: sides, ufhc: u, fhc: f, separation: false, gamma };
    };
    let tau_ratio = cp.tau.limit_ratio(&cp.delta);
    let mut ufhc = Verdict::new("ufhc_by_coupling_ratio", Status::Undetermined).with_cert("lim_tau_over_delta", limit_text(&tau_ratio));
    if let Some(l) = &tau_ratio {
        ufhc = if limit_below_one(l) {
            ufhc.set_status(Status::Holds).with_witness("m", "2 delta^(k)")
        } else {
            ufhc.set_status(Status::Inapplicable).with_note("limsup τ/δ ≥ 1")
        };
    }
    let sep_ratio = cp.delta.shift(1).and_then(|d1| cp.delta.limit_ratio(&d1));
    sides = sides.with_cert("lim_delta_over_next_delta", limit_text(&sep_ratio));
    let block_ratio = cp.delta.limit_ratio(&cp.big_delta);
    let mut fhc = Verdict::new("fhc_by_block_ratio", Status::Undetermined)
        .with_cert("lim_delta_over_Delta", limit_text(&block_ratio))
        .with_cert("lim_delta_over_next_delta", limit_text(&sep_ratio));
    let separated = matches!(&sep_ratio, Some(l) if l.is_zero());
    if !separated {
        fhc = fhc.set_status(Status::Inapplicable).with_note("lim δ^(k)/δ^(k+1) ≠ 0: theorem inapplicable");
    } else if !sides.holds() {
        fhc = fhc.set_status(Status::Inapplicable).with_note("theorem inapplicable: side conditions not certified");
    } else {
        match &block_ratio {
            Some(l) if limit_positive(l) => fhc = fhc.set_status(Status::Holds),
            Some(_) => fhc = fhc.set_status(Status::Fails),
            None => {}
        }
    }
    let separation = ufhc.holds() && fhc.status == Status::Fails;
    CPlusTwoClassification { side_conditions: sides, ufhc, fhc, separation, gamma }
}

// ---------------------------------------------------------------------------
// Mixing.

fn merge_gaps(mut intervals: Vec<(BigInt, BigInt)>, from: &BigInt, to: &BigInt) -> Vec<(BigInt, BigInt)> {
    // Half-open intervals; returns the uncovered half-open gaps inside [from, to).
    intervals.sort();
    let mut gaps = Vec::new();
    let mut cursor = from.clone();
    for (lo, hi) in intervals {
        if lo > cursor && &cursor < to {
            gaps.push((cursor.clone(), lo.clone().min(to.clone())));
        }
        if hi > cursor {
            cursor = hi;
        }
    }
    if &cursor < to {
        gaps.push((cursor, to.clone()));
    }
    gaps
}

/// Topological mixing through cofinite return sets.
///
/// * C₂ families: `⋃_k [a_k + δ^(k), f_k + δ^(k))` must be cofinite, with
///   `δ − τ → ∞`.  Closed forms are decided through the overlap recurrence
///   `f_k + δ^(k) ≥ a_{k+1} + δ^(k+1)`; persistent gaps refute the condition.
/// * C₊ families: for `ε = 2^{−θ}` the sets
///   `{n < Δ^(k): 2^{−τ}∏_{i=Δ−n}^{Δ−1} w_i > 1/ε}` must cover all large `n`;
///   their tails `[Δ − δ + τ + θ, Δ)` overlap when
///   `Δ^(k+1) − δ^(k+1) + τ^(k+1) − Δ^(k) → −∞`.  Otherwise a gap is
///   reported and the verdict stays undetermined.
pub fn check_mixing(family: &Family, eps_log2: &[u32], horizon: u64) -> Verdict {
    match family {
        Family::C2(s) => {
            let anchor = "mixing_by_interval_overlap";
            let closed = (s.a.closed(), s.f.closed(), ClosedParams::of(family));
            if let (Some(a), Some(f), Some(cp)) = closed {
                let chaos = cp.delta.sub(&cp.tau).limit();
                let lo = a.add(&cp.delta);
                let hi = f.add(&cp.delta);
                let Some(next_lo) = lo.shift(1) else {
                    return Verdict::new(anchor, Status::Undetermined);
                };
                let gap = next_lo.sub(&hi);
                let mut v = Verdict::new(anchor, Status::Undetermined)
                    .with_cert("delta_minus_tau_limit", limit_text(&chaos))
                    .with_cert("next_lower_minus_upper", &gap);
                if chaos != Some(Limit::PosInf) {
                    return v.set_status(Status::Inapplicable).with_note("requires δ − τ → ∞");
                }
                if let Some(k_star) = gap.eventually_le(&BigRational::zero()) {
                    if hi.limit() == Some(Limit::PosInf) {
                        let start = lo.eval_int(k_star).unwrap_or_default();
                        v = v.set_status(Status::Holds).with_witness("overlap_onset", k_star).with_witness("covered_from", &start);
                        let early: Vec<(BigInt, BigInt)> = (1..k_star).filter_map(|k| Some((lo.eval_int(k)?, hi.eval_int(k)?))).collect();
                        let gaps = merge_gaps(early, &BigInt::one(), &start);
                        v = v.with_cert("initial_gap_count", gaps.len());
                        return v;
                    }
                }
                if let Some(k) = gap.eventually_ge(&BigRational::one()) {
                    return v
                        .set_status(Status::Fails)
                        .with_witness("gaps_from", k)
                        .with_note("consecutive intervals never meet: the union is not cofinite (the criterion fails; this alone does not refute mixing)");
                }
                return v.with_note("overlap recurrence undecided");
            }
            // Tables: list gaps up to the horizon.
            let mut iv = Vec::new();
            let mut used = 0;
            for k in 1..=horizon {
                let (Some(a), Some(f), Some(d)) = (s.a.at(k), s.f.at(k), s.delta.at(k)) else { break };
                used = k;
                iv.push((a + &d, f + &d));
            }
            let Some(last_hi) = iv.iter().map(|x| x.1.clone()).max() else {
                return Verdict::new(anchor, Status::Undetermined).with_horizon(0);
            };
            let first_lo = iv.iter().map(|x| x.0.clone()).min().unwrap_or_default();
            let gaps = merge_gaps(iv, &first_lo, &last_hi);
            let v = Verdict::new(anchor, Status::Undetermined).with_horizon(used).with_cert("gap_count", gaps.len());
            match gaps.last() {
                Some((g0, g1)) => v
                    .set_status(Status::Fails)
                    .with_witness("last_gap", format!("[{g0}, {g1})"))
                    .with_note("gaps persist up to the horizon (finite data)"),
                None => v.with_note("no gaps within the horizon; cofiniteness not decidable from finite data"),
            }
        }
        Family::CPlus(_) => {
            let anchor = "mixing_by_return_sets";
            let Some(cp) = ClosedParams::of(family) else {
                return Verdict::new(anchor, Status::Undetermined).with_horizon(horizon).with_note("needs closed-form parameters");
            };
            let tail_lo = cp.big_delta.sub(&cp.delta).add(&cp.tau);
            let Some(next) = tail_lo.shift(1) else { return Verdict::new(anchor, Status::Undetermined) };
            let drift = next.sub(&cp.big_delta);
            let lim = drift.limit();
            let mut v = Verdict::new(anchor, Status::Undetermined)
                .with_cert("tail_gap_drift", &drift)
                .with_cert("tail_gap_drift_limit", limit_text(&lim));
            if cp.delta.sub(&cp.tau).limit() != Some(Limit::PosInf) {
                return v.set_status(Status::Inapplicable).with_note("requires δ − τ → ∞");
            }
            if lim == Some(Limit::NegInf) {
                v = v.set_status(Status::Holds);
                for &theta in eps_log2 {
                    if let Some(o) = drift.eventually_le(&int(-(theta as i64))) {
                        v = v.with_witness(&format!("overlap_onset_eps_2^-{theta}"), o);
                    }
                }
                return v;
            }
            // Report a concrete gap for the finest ε.
            let theta = eps_log2.iter().copied().max().unwrap_or(0) as i64;
            for k in 1..=horizon {
                let (Some(lo_next), Some(size)) = (next.eval_int(k), cp.big_delta.eval_int(k)) else { break };
                let lo_next = lo_next + theta;
                if lo_next > size {
                    return v
                        .with_witness("gap", format!("[{size}, {lo_next})"))
                        .with_witness("k", k)
                        .with_horizon(k)
                        .with_note("return-set tails leave a gap; the sufficient condition is not met (mixing not refuted)");
                }
            }
            v.with_horizon(horizon)
        }
        Family::Generic(_) => Verdict::new("mixing_by_return_sets", Status::Undetermined)
            .with_horizon(horizon)
            .with_note("no mixing criterion for explicit tables"),
    }
}

// ---------------------------------------------------------------------------
// Non-mixing.

/// Non-mixing of a C₊,₁ family with constant `K`:
/// `τ^(k) > δ^(k−1)` for every `k ≥ 1` and
/// `Σ_{k>k₀} 2^k γ_k ≤ K·4^{−Δ^(k₀)}` for every `k₀ ≥ 1`.
///
/// The second condition is proved for `k₀` past a symbolic onset and checked
/// with exact partial sums below it.  A second certificate records the
/// block-sum route (`Σ_{k≥1} 2^{k−1} γ_k < K` when the last `2Δ^(k−1)`
/// weights of every block are `1`).
pub fn check_not_mixing(family: &Family, p: SpaceExponent, big_k: &BigRational) -> Verdict {
    let anchor = "not_mixing_by_decay_sum";
    if cplus_spec(family).map(|s| s.variant) != Some(CPlusVariant::One) {
        return Verdict::new(anchor, Status::Inapplicable).with_note("stated for C₊,₁ families");
    }
    let Some(cp) = ClosedParams::of(family) else {
        return Verdict::new(anchor, Status::Undetermined).with_note("needs closed-form parameters");
    };
    if !big_k.is_positive() {
        return Verdict::new(anchor, Status::Inapplicable).with_note("K must be positive");
    }
    // Hypothesis τ^(k) > δ^(k−1).
    let e = cp.gamma_exponent();
    let e_onset = e.eventually_le(&int(-1));
    for k in 1..e_onset.unwrap_or(HYPOTHESIS_SCAN) {
        if let Some(x) = e.eval_int(k) {
            if x >= BigInt::zero() {
                return Verdict::new(anchor, Status::Inapplicable)
                    .with_witness("hypothesis_violated_at", k)
                    .with_cert("tau", family.tau_at(k).unwrap_or_default())
                    .with_cert("delta_prev", family.delta_at(k - 1).unwrap_or_default())
                    .with_note("τ^(k) ≤ δ^(k−1)");
            }
        }
    }
    if e_onset.is_none() {
        return Verdict::new(anchor, Status::Undetermined)
            .with_horizon(HYPOTHESIS_SCAN)
            .with_note("τ^(k) > δ^(k−1) not eventually provable");
    }
    // Exact refutation by a single term: (2^{k₀+1}γ_{k₀+1})^p · 4^{pΔ(k₀)} > K^p.
    for k0 in 1..=4 {
        let (Some(g), Some(size)) = (gamma_pow_p(family, p, k0 + 1), family.big_delta_at(k0)) else { break };
        let pp = p.0 as i64;
        let shift = BigExp::from_big(size * 2 * pp).add_i64((k0 as i64 + 1) * pp);
        if g.mul_pow2(&shift) > ExactScalar::from_rational(big_k).pow_u64(p.0 as u64) {
            return Verdict::new(anchor, Status::Fails)
                .with_witness("k0", k0)
                .with_note("the single term 2^(k0+1)·γ_(k0+1) already exceeds K·4^(−Δ(k0))");
        }
    }
    let h = size_power(p);
    let (Some(step), Some(size_up), Some(size_ratio)) =
        (cp.gamma_exponent_step(), log2_upper_poly(&cp.big_delta), log2_ratio_upper(&cp.big_delta))
    else {
        return Verdict::new(anchor, Status::Undetermined).with_note("no logarithmic bounds for Δ");
    };
    // log₂(t_{k+1}/t_k) ≤ 1 + ΔE + h·log₂(Δ_{k+1}/Δ_k) for t_k = 2^k γ_k.
    let log_ratio = step.add(&size_ratio.scale(&h)).add_const(&int(1));
    let Some(halving) = log_ratio.eventually_le(&int(-1)) else {
        return Verdict::new(anchor, Status::Undetermined).with_note("no halving onset for 2^k γ_k");
    };
    let term = |k: u64| Some(gamma_upper(family, p, k)?.mul_pow2(&BigExp::from(k as i64)));
    // Symbolic range: for k₀ + 1 ≥ halving the tail is ≤ 2 t_{k₀+1}, and
    // log₂(2 t_{k₀+1}·4^{Δ(k₀)}) ≤ 1 + (k₀+1) + E(k₀+1) + h·log₂Δ(k₀+1) + 2Δ(k₀).
    let log_t = Seq::k().add(&e).add(&size_up.scale(&h));
    let Some(shifted) = log_t.shift(1) else { return Verdict::new(anchor, Status::Undetermined) };
    let q = shifted.add_const(&int(1)).add(&cp.big_delta.scale(&int(2)));
    let log_k = floor_log2(big_k);
    let Some(q_onset) = q.eventually_le(&int(log_k)) else {
        return Verdict::new(anchor, Status::Undetermined)
            .with_cert("log2_tail_bound", &q)
            .with_note("the tail bound does not eventually fall below K·4^{−Δ(k₀)}");
    };
    let symbolic_from = q_onset.max(halving.saturating_sub(1)).max(1);
    let mut v = Verdict::new(anchor, Status::Holds)
        .with_witness("K", big_k)
        .with_witness("symbolic_from_k0", symbolic_from)
        .with_witness("halving_onset", halving)
        .with_cert("log2_tail_bound", &q);
    let mut worst: Option<(u64, ExactScalar)> = None;
    for k0 in 1..symbolic_from {
        let Some(size) = family.big_delta_at(k0) else { return v.set_status(Status::Undetermined) };
        let scale = ExactScalar::pow2(BigExp::from_big(size * 2));
        let tail_start = (k0 + 1).max(halving);
        // Σ_{k>k₀} t_k ≤ Σ_{k₀<k<M} u_k + 2u_M for M ≥ tail_start, minimized over a few M.
        let mut best: Option<ExactScalar> = None;
        let mut sum = UpperSum::new(SUM_SLACK_BITS);
        for kk in k0 + 1..=tail_start + EXTRA_TERMS {
            let Some(u) = term(kk) else { break };
            if kk >= tail_start {
                let mut s = sum.clone();
                s.add(&(&u + &u));
                let total = s.value().clone();
                if best.as_ref().is_none_or(|b| &total < b) {
                    best = Some(total);
                }
            }
            sum.add(&u);
        }
        let Some(tail) = best else { return v.set_status(Status::Undetermined) };
        let lhs = &tail * &scale;
        if worst.as_ref().is_none_or(|(_, w)| &lhs > w) {
            worst = Some((k0, lhs.clone()));
        }
        if lhs > ExactScalar::from_rational(big_k) {
            // Refute only with an exact lower bound: the first term alone.
            let first_p = gamma_pow_p(family, p, k0 + 1).map(|g| {
                let t_p = g.mul_pow2(&BigExp::from(((k0 + 1) * p.0 as u64) as i64));
                let rhs = ExactScalar::from_rational(big_k).pow_u64(p.0 as u64);
                let scale_p = scale.pow_u64(p.0 as u64);
                &t_p * &scale_p > rhs
            });
            v = v.with_witness("k0", k0).with_cert("scaled_tail_upper", lhs.to_decimal_string(12));
            return if first_p == Some(true) {
                v.set_status(Status::Fails).with_note("a single term already exceeds K·4^{−Δ(k₀)}")
            } else {
                v.set_status(Status::Undetermined).with_note("certified upper bound exceeds K·4^{−Δ(k₀)}")
            };
        }
    }
    if let Some((k0, w)) = worst {
        v = v.with_cert("worst_exact_k0", k0).with_cert("worst_scaled_tail_upper", w.to_decimal_string(12));
    }
    // Block-sum route with unit tail products.
    let route = block_sum_route(family, &cp, p, big_k);
    v.with_cert("block_sum_route", route)
}

/// The block-sum route: the last `2Δ^(k−1)` weights of generation `k` are `1`
/// (`Δ^(k) − δ^(k) ≥ 2Δ^(k−1)`) and `Σ_{k≥1} 2^{k−1} γ_k < K`.
fn block_sum_route(family: &Family, cp: &ClosedParams, p: SpaceExponent, big_k: &BigRational) -> String {
    let Some(prev) = cp.big_delta.shift(-1) else { return "undetermined".into() };
    let room = cp.big_delta.sub(&cp.delta).sub(&prev.scale(&int(2)));
    let Some(onset) = room.eventually_ge(&BigRational::zero()) else { return "undetermined: tail weights".into() };
    for k in 2..onset {
        let ok = (|| Some(family.big_delta_at(k)? - family.delta_at(k)? - family.big_delta_at(k - 1)? * 2 >= BigInt::zero()))();
        if ok != Some(true) {
            return format!("fails: tail weights not all 1 at k = {k}");
        }
    }
    let (Some(step), Some(size_ratio)) = (cp.gamma_exponent_step(), log2_ratio_upper(&cp.big_delta)) else {
        return "undetermined".into();
    };
    let lr = step.add(&size_ratio.scale(&size_power(p))).add_const(&int(1));
    match certify_series(1, &lr, |k| Some(gamma_upper(family, p, k)?.mul_pow2(&BigExp::from(k as i64 - 1)))) {
        Ok(s) if s.total_upper < ExactScalar::from_rational(big_k) => {
            format!("holds: sum 2^(k-1) gamma_k <= {}", s.total_upper.to_decimal_string(12))
        }
        Ok(s) => format!("undetermined: sum bound {}", s.total_upper.to_decimal_string(12)),
        Err(e) => format!("undetermined: {e}"),
    }
}

// ---------------------------------------------------------------------------
// C₂ non-UFHC.

/// `#J_k` for `1 ≤ k ≤ k_max` of a C₂ family (`#J_k = (f_k − a_k)·Σ_{i<k} #J_i`, `#J_0 = 1`).
pub fn c2_generation_counts(family: &Family, k_max: u64) -> Option<Vec<BigInt>> {
    let Family::C2(s) = family else { return None };
    let mut first = BigInt::one();
    let mut out = Vec::new();
    for k in 1..=k_max {
        let count = (s.f.at(k)? - s.a.at(k)?) * &first;
        first += &count;
        out.push(count);
    }
    Some(out)
}

/// Not U-frequently hypercyclic (C₂): `γ_k` non-increasing,
/// `2Σ_k #J_k γ_k^{1/2} ≤ 1` and `lim δ^(k)/a_k = 0`.
pub fn check_c2_not_ufhc(family: &Family, p: SpaceExponent) -> Verdict {
    let anchor = "c2_not_ufhc_by_sparse_generations";
    let Family::C2(s) = family else {
        return Verdict::new(anchor, Status::Inapplicable).with_note("stated for C₂ families");
    };
    let (Some(cp), Some(a), Some(f)) = (ClosedParams::of(family), s.a.closed(), s.f.closed()) else {
        return Verdict::new(anchor, Status::Undetermined).with_note("needs closed-form parameters");
    };
    let mut status = Status::Holds;
    let mut v = Verdict::new(anchor, Status::Holds);
    // Monotone γ.
    let ratio = gamma_log_ratio(&cp, p);
    match ratio.as_ref().and_then(|r| r.eventually_le(&BigRational::zero())) {
        Some(o) => {
            v = v.with_witness("non_increasing_onset", o);
            if let Err(k) = gamma_monotone_prefix(family, p, o) {
                status = Status::Fails;
                v = v.with_witness("gamma_increases_at", k);
            }
        }
        None => status = Status::Undetermined,
    }
    // 2 Σ #J_k γ_k^{1/2} ≤ 1 with #J_{k+1} ≤ 2 f_{k+1} #J_k.
    let lr = (|| {
        let lf = log2_upper_poly(f)?.shift(1)?;
        Some(ratio.as_ref()?.scale(&rat(1, 2)).add(&lf).add_const(&int(1)))
    })();
    let counts = c2_generation_counts(family, 64);
    match (lr, counts) {
        (Some(lr), Some(_)) => {
            let term = |k: u64| {
                let c = c2_generation_counts(family, k)?.pop()?;
                Some(&gamma_sqrt_upper(family, p, k)? * &ExactScalar::from_int(c * 2))
            };
            match certify_series(1, &lr, term) {
                Ok(sc) => {
                    v = v.with_cert("series_total_upper", sc.total_upper.to_decimal_string(12)).with_witness("tail_from", sc.tail_from);
                    if sc.total_upper > ExactScalar::one() {
                        status = if status == Status::Holds { Status::Undetermined } else { status };
                        // A single term above 1 (exactly, via 4th powers) refutes it.
                        if let (Some(g), Some(c)) = (gamma_pow_p(family, p, 1), c2_generation_counts(family, 1)) {
                            // (2·#J_1)^{2p}·γ_1^{p} > 1 ⇔ 2#J_1γ_1^{1/2} > 1.
                            let lhs = &ExactScalar::from_int(&c[0] * 2).pow_u64(2 * p.0 as u64) * &g;
                            if lhs > ExactScalar::one() {
                                status = Status::Fails;
                                v = v.with_note("2·#J_1·γ_1^{1/2} > 1");
                            }
                        }
                    }
                }
                Err(e) => {
                    status = if status == Status::Holds { Status::Undetermined } else { status };
                    v = v.with_note(e);
                }
            }
        }
        _ => {
            status = if status == Status::Holds { Status::Undetermined } else { status };
        }
    }
    // lim δ/a = 0.
    let r = cp.delta.limit_ratio(a);
    v = v.with_cert("lim_delta_over_a", limit_text(&r));
    match &r {
        Some(l) if l.is_zero() => {}
        Some(_) => {
            status = Status::Fails;
            v = v.with_note("lim δ^(k)/a_k ≠ 0");
        }
        None => status = if status == Status::Holds { Status::Undetermined } else { status },
    }
    v.set_status(status)
}

// ---------------------------------------------------------------------------
// Block-level verifications.

/// `|v_n|·max_{j ∈ block φ(n)} ∏_{s=b_φ+1}^{j}|w_s|`.
pub fn coupling_constant(op: &CTypeOperator, n: u64) -> Result<ExactScalar, CriteriaError> {
    let block = op.block(n)?;
    let target = op.block(block.phi)?;
    let mut best = ExactScalar::one();
    for z in &target.zones {
        for end in [z.lo, z.hi - 1] {
            if end >= 1 {
                let pr = target.product(1, end).abs();
                if pr > best {
                    best = pr;
                }
            }
        }
    }
    Ok(&block.v.abs() * &best)
}

/// `X_l² = Σ_{i ∈ block l} (∏_{s=i+1}^{b_{l+1}−1} w_s)² x_i²`.
pub fn weighted_block_norm_sq(op: &CTypeOperator, l: u64, x: &FiniteVector) -> Result<ExactScalar, CriteriaError> {
    let block = op.block(l)?;
    let mut acc = ExactScalar::zero();
    for (i, xi) in x.restrict(block.start, block.end()).entries() {
        let off = i - block.start;
        let w = block.product(off + 1, block.size - 1);
        acc = &acc + &(&w * xi).square();
    }
    Ok(acc)
}

/// Result of the coupling bound verification for one `(x, n, l)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CouplingCheck {
    /// Squared bound `C_l² (b_{l+1} − b_l) X_l²`.
    pub bound_sq: ExactScalar,
    /// `max_j ‖P_n T^j P_l x‖²` over one period.
    pub measured_sq: ExactScalar,
    pub ok: bool,
    /// `(N, squared windowed bound, measured over j ≤ N, ok)`.
    pub windows: Vec<(u64, ExactScalar, ExactScalar, bool)>,
}

/// Verify the coupling bound
/// `sup_j ‖P_n T^j P_l x‖ ≤ C_l (b_{l+1}−b_l)^{1/2} X_l` and its windowed form
/// `sup_{j≤N} ‖P_n T^j P_l x‖ ≤ C_l (b_{l+1}−b_l)^{1/2} (max_{b_{l+1}−N ≤ k < b_{l+1}} ∏_{s>k}|w_s|) ‖P_l x‖`
/// on `ℓ_2`, after checking `|v_m|·sup ∏|w| ≤ C_m < 1` along the `φ`-chain of `l`.
pub fn verify_coupling_bound(
    op: &CTypeOperator,
    x: &FiniteVector,
    l: u64,
    n: u64,
    c_seq: &dyn Fn(u64) -> ExactScalar,
    windows: &[u64],
) -> Result<CouplingCheck, CriteriaError> {
    if op.p() != SpaceExponent::L2 {
        return Err(CriteriaError::Unsupported("the coupling bound check works on ℓ_2".into()));
    }
    let mut m = l;
    while m > 0 {
        let c = c_seq(m);
        if !(c.is_positive() && c < ExactScalar::one()) {
            return Err(CriteriaError::Hypothesis(format!("C_{m} must lie in (0, 1)")));
        }
        let actual = coupling_constant(op, m)?;
        if actual > c {
            return Err(CriteriaError::Hypothesis(format!("|v_{m}|·sup ∏|w| = {actual} exceeds C_{m} = {c}")));
        }
        m = op.block(m)?.phi;
    }
    let block = op.block(l)?;
    let c_l = c_seq(l);
    let size = ExactScalar::from_int(block.size);
    let x_sq = weighted_block_norm_sq(op, l, x)?;
    let bound_sq = &(&c_l.square() * &size) * &x_sq;
    let measured_sq = orbit::sup_over_period(op, n, l, x, None)?;
    let px_sq = x.restrict(block.start, block.end()).norm_sq_l2();
    let mut out = Vec::new();
    for &nn in windows {
        if nn == 0 || nn > block.size {
            continue;
        }
        // max over k ∈ [b_{l+1} − N, b_{l+1}) of ∏_{s=k+1}^{b_{l+1}−1}|w_s|, as block offsets.
        let mut sup = ExactScalar::zero();
        for off in block.size - nn..block.size {
            let pr = block.product(off + 1, block.size - 1).abs();
            if pr > sup {
                sup = pr;
            }
        }
        let b = &(&(&c_l.square() * &size) * &sup.square()) * &px_sq;
        let meas = orbit::sup_over_period(op, n, l, x, Some(nn))?;
        let ok = meas <= b;
        out.push((nn, b, meas, ok));
    }
    let ok = measured_sq <= bound_sq && out.iter().all(|w| w.3);
    Ok(CouplingCheck { bound_sq, measured_sq, ok, windows: out })
}

/// One row of the return-frequency verification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReturnFrequencyRow {
    pub j: u64,
    /// `#{0 ≤ j′ ≤ J: ‖P_l T^{j′} P_l x‖ ≥ X_l/2}`.
    pub count: u64,
    /// The guaranteed lower bound on the count (a rational, possibly negative).
    pub required: ExactScalar,
    pub ok: bool,
}

/// Verify the return-frequency bound for block `l`:
/// `#{j ≤ J: ‖P_l T^j P_l x‖ ≥ X_l/2} ≥ (J+1)·(1 − c·(1/(J+1) + 1/Δb_l))` with
/// `c = 2(Δb_l − (k₁ − k₀))` for two integers, or `c = 4(k₂ − k₁ + k₀)` for
/// three (`k2 = Some(..)`), after checking the weight hypotheses.
pub fn verify_return_frequency(
    op: &CTypeOperator,
    x: &FiniteVector,
    l: u64,
    k0: u64,
    k1: u64,
    k2: Option<u64>,
    j_grid: &[u64],
) -> Result<Vec<ReturnFrequencyRow>, CriteriaError> {
    if op.p() != SpaceExponent::L2 {
        return Err(CriteriaError::Unsupported("the return-frequency check works on ℓ_2".into()));
    }
    let block = op.block(l)?;
    let size = block.size;
    let top = k2.unwrap_or(k1);
    if !(k0 < k1 && top <= size && k1 <= top) {
        return Err(CriteriaError::Hypothesis(format!("need 0 ≤ k0 < k1 ≤ k2 ≤ {size}")));
    }
    let unit = |lo: u64, hi: u64| -> bool { (lo + 1..hi).all(|k| k == 0 || k >= size || block.weight(k).is_ok_and(|w| w.abs().is_one())) };
    if !unit(k0, k1) {
        return Err(CriteriaError::Hypothesis(format!("|w_(b_l + k)| ≠ 1 for some k in ({k0}, {k1})")));
    }
    if let Some(k2) = k2 {
        if !unit(k2, size) {
            return Err(CriteriaError::Hypothesis(format!("|w_(b_l + k)| ≠ 1 for some k in ({k2}, {size})")));
        }
    }
    if !block.product(k0 + 1, size - 1).abs().is_one() {
        return Err(CriteriaError::Hypothesis(format!("∏ |w_s| over offsets {}..{} is not 1", k0 + 1, size - 1)));
    }
    let x_sq = weighted_block_norm_sq(op, l, x)?;
    let quarter = &x_sq * &ExactScalar::ratio(1, 4);
    // P_l T^j P_l x evolves inside block l with period 2Δ.
    let period = block.period();
    let mut y = x.restrict(block.start, block.end());
    let mut hits = Vec::with_capacity(period as usize);
    for _ in 0..period {
        hits.push(y.norm_sq_l2() >= quarter);
        y = op.apply(&y)?.restrict(block.start, block.end());
    }
    let mut prefix = vec![0u64; period as usize + 1];
    for (i, h) in hits.iter().enumerate() {
        prefix[i + 1] = prefix[i] + *h as u64;
    }
    let c = match k2 {
        None => 2 * (size - (k1 - k0)),
        Some(k2) => 4 * (k2 - k1 + k0),
    };
    let mut rows = Vec::new();
    for &jj in j_grid {
        let n = jj + 1;
        let count = (n / period) * prefix[period as usize] + prefix[(n % period) as usize];
        // (J+1)(1 − c/(J+1) − c/Δ) = (J+1) − c − c(J+1)/Δ.
        let required = ExactScalar::from_rational(&(int(n as i64) - int(c as i64) - rat((c * n) as i64, size as i64)));
        let ok = ExactScalar::from_int(count) >= required;
        rows.push(ReturnFrequencyRow { j: jj, count, required, ok });
    }
    Ok(rows)
}

/// Upper bound on `c(T)` for an `ℓ_p`-sum from per-component bounds: the minimum.
pub fn direct_sum_c_bound(bounds: &[ExactScalar]) -> Option<ExactScalar> {
    bounds.iter().min().cloned()
}

/// Report on an `ℓ_p`-sum of components with recorded `c(T_n)` upper bounds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DirectSumReport {
    /// `min_n` of the component bounds.
    pub c_bound: ExactScalar,
    /// Common ratio of consecutive bounds, when the list is exactly geometric.
    pub ratio: Option<ExactScalar>,
    /// Whether the sum is certified to be U-frequently hypercyclic. It never is
    /// when the bounds tend to 0: then `c(T) = 0` and the sum is not UFHC.
    pub ufhc_certified: bool,
    /// Non-UFHC verdict: Holds when the bounds provably tend to 0 (a zero
    /// bound, or an exact geometric decay with ratio in `[0, 1)`).
    pub not_ufhc: Verdict,
}

/// Direct-sum report: the `c(T)` bound plus the non-UFHC certificate obtained
/// when the component bounds tend to 0.
pub fn direct_sum_report(bounds: &[ExactScalar]) -> Option<DirectSumReport> {
    let c_bound = direct_sum_c_bound(bounds)?;
    let ratio = if bounds.len() >= 2 && bounds.iter().all(ExactScalar::is_positive) {
        let r = bounds[1].checked_div(&bounds[0]).ok()?;
        let geometric = bounds.windows(2).all(|w| w[1] == &w[0] * &r);
        geometric.then_some(r)
    } else {
        None
    };
    let decays = c_bound.is_zero() || ratio.as_ref().is_some_and(|r| !r.is_negative() && *r < ExactScalar::one());
    let mut not_ufhc = Verdict::new("direct_sum_not_ufhc", if decays { Status::Holds } else { Status::Undetermined })
        .with_cert("c_bound", c_bound.to_fraction_string())
        .with_horizon(bounds.len() as u64);
    if let Some(r) = &ratio {
        not_ufhc = not_ufhc.with_cert("ratio", r.to_fraction_string());
    }
    if !decays {
        not_ufhc = not_ufhc.with_note("the recorded bounds are not known to tend to 0");
    }
    Some(DirectSumReport { c_bound, ratio, ufhc_certified: false, not_ufhc })
}

// ---------------------------------------------------------------------------
// Certificate chains and the minimal constant.

/// The certificate chain recorded for a named preset family.
pub fn certificate_chain(preset: &str, family: &Family, p: SpaceExponent) -> Vec<Verdict> {
    match preset {
        "example55" | "example55-small" => {
            let cls = classify_cplus1(family, p);
            let ct = match ct_upper_bound(family) {
                Ok(b) if b == rat(9, 10) => Verdict::new("ergodic_frequency_bound", Status::Holds).with_cert("bound", &b),
                Ok(b) => Verdict::new("ergodic_frequency_bound", Status::Fails).with_cert("bound", &b),
                Err(v) => v,
            };
            vec![
                check_chaos(family, 0, DEFAULT_CHAOS_THRESHOLD_LOG2),
                check_fhc_growth_ratio(family),
                cls.side_conditions,
                cls.fhc,
                cls.ufhc,
                ct,
                check_not_mixing(family, p, &BigRational::one()),
            ]
        }
        "example59" | "example59-small" => {
            let cls = classify_cplus2(family, p);
            let sep = Verdict::new("ufhc_not_fhc_separation", if cls.separation { Status::Holds } else { Status::Fails });
            let fhc_fails = Verdict {
                status: if cls.fhc.status == Status::Fails { Status::Holds } else { Status::Fails },
                anchor: "not_fhc_by_block_ratio".into(),
                ..cls.fhc.clone()
            };
            vec![check_chaos(family, 0, DEFAULT_CHAOS_THRESHOLD_LOG2), cls.side_conditions, cls.ufhc, fhc_fails, sep]
        }
        "c2mix" | "c2mix-small" => {
            vec![check_chaos(family, 0, DEFAULT_CHAOS_THRESHOLD_LOG2), check_mixing(family, &[0, 4, 16], 8), check_c2_not_ufhc(family, p)]
        }
        _ => vec![check_chaos(family, 8, DEFAULT_CHAOS_THRESHOLD_LOG2)],
    }
}

/// The smallest `C ∈ [1, c_max]` for which every verdict of the chain holds.
pub fn minimal_constant(preset: &str, build: impl Fn(u32) -> Family, p: SpaceExponent, c_max: u32) -> Option<u32> {
    (1..=c_max).find(|&c| certificate_chain(preset, &build(c), p).iter().all(Verdict::holds))
}

/// Integer helper exposed for tests: `⌊α·m⌋`.
pub fn floor_mul(alpha: &BigRational, m: &BigInt) -> BigInt {
    (alpha * to_rational(m)).floor().to_integer()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use num_traits::ToPrimitive;

    const L2: SpaceExponent = SpaceExponent::L2;

    #[test]
    fn log2_rounding() {
        assert_eq!(ceil_log2(&int(8)), 3);
        assert_eq!(ceil_log2(&int(9)), 4);
        assert_eq!(floor_log2(&int(9)), 3);
        assert_eq!(floor_log2(&rat(1, 3)), -2);
        assert_eq!(ceil_log2(&rat(1, 3)), -1);
    }

    #[test]
    fn log_profile_matches_zone_products() {
        for variant in [CPlusVariant::One, CPlusVariant::Two] {
            let (size, delta) = (40u64, 5u64);
            let prof = LogProfile::cplus(variant, &BigInt::from(size), &BigInt::from(delta));
            let zones = crate::ctype::cplus_zones(variant, size, delta);
            for lo in 1..size {
                for hi in lo..size {
                    let exact = crate::ctype::zone_product(&zones, lo, hi);
                    let via = ExactScalar::pow2(prof.range(&BigInt::from(lo), &BigInt::from(hi)).to_i64().unwrap());
                    assert_eq!(exact, via, "{variant:?} {lo}..={hi}");
                }
            }
            for m in 0..size {
                let brute = (0..=m).map(|i| prof.prefix(&BigInt::from(i))).max().unwrap();
                assert_eq!(prof.max_prefix(&BigInt::from(m)), brute);
            }
        }
    }

    #[test]
    fn example55_chain_at_recorded_constant() {
        let fam = presets::example55(presets::EXAMPLE55_MIN_C);
        for v in certificate_chain("example55", &fam, L2) {
            assert!(v.holds(), "{v:#?}");
        }
    }

    #[test]
    fn ct_bound_values() {
        assert_eq!(ct_bound_for_ratio(&rat(1, 5)), rat(9, 10));
        assert_eq!(ct_bound_for_ratio(&rat(1, 10)), rat(19, 45));
        assert_eq!(ct_bound_for_ratio(&BigRational::zero()), BigRational::zero());
    }
}
