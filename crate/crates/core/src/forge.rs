//! Staged construction of hypercyclic, U-frequently and frequently
//! hypercyclic vectors.
//!
//! The builders follow the inductive constructions behind the periodic-point
//! criteria: a hypercyclic vector is the sum `z = Σ z_j` of periodic pieces,
//! stage `j` steering the orbit towards the target `y_j` at time `n_j` while
//! leaving earlier stages undisturbed (`n_j` is a multiple of their period)
//! and staying negligible at earlier times.  Only finitely many stages are
//! ever built; every stage inequality is certified by exact rational upper
//! bounds before the stage is accepted, and re-certified from scratch by
//! [`StagedVector::reverify`].
//!
//! Stage pieces carry coefficients such as `2^{-2^{44}}`, far too spread out
//! to be added to `O(1)` coordinates exactly.  Pieces are therefore stored
//! separately and orbit quantities of their sum are bounded with the triangle
//! inequality; each piece is still advanced exactly.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::criteria::ceil_log2;
use crate::ctype::{Block, CTypeError, CTypeOperator, Family};
use crate::scalar::{ExactScalar, UpperSum};
use crate::vector::{FiniteVector, NormError, SpaceExponent};

/// Slack used by the rounded-up sums of this module.
const SUM_SLACK_BITS: u32 = 64;
/// `log2 ‖T‖` is bounded in units of `1/NORM_LOG2_DENOM`.
const NORM_LOG2_DENOM: u32 = 64;
/// Relative accuracy of the rounded-up square roots.
const SQRT_BITS: u32 = 48;
/// Default number of generations the explicit oracle scans past its start.
pub const DEFAULT_ORACLE_SPAN: u64 = 16;
/// Default stage count of the builders.
pub const DEFAULT_STAGES: usize = 6;
/// Fraction of the analytic density bound the measured density must reach.
pub const DENSITY_SLACK: (u64, u64) = (4, 5);

/// Failures of the oracle and of the builders.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ForgeError {
    #[error("the explicit oracle needs a C+-type operator")]
    NotCPlus,
    #[error("no (k, m) with k in {k_lo}..={k_hi} satisfies the requested inequalities")]
    NotFound { k_lo: u64, k_hi: u64 },
    #[error("stage {stage}: {reason}")]
    Stage { stage: usize, reason: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Geometry(#[from] CTypeError),
    #[error(transparent)]
    Norm(#[from] NormError),
}

fn stage_err(stage: usize, e: ForgeError) -> ForgeError {
    match e {
        ForgeError::Stage { .. } => e,
        other => ForgeError::Stage { stage, reason: other.to_string() },
    }
}

/// A positive fraction `num/den` (the constant `α` of the criteria).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fraction {
    pub num: u64,
    pub den: u64,
}

impl Fraction {
    pub fn new(num: u64, den: u64) -> Self {
        assert!(den > 0, "zero denominator");
        Fraction { num, den }
    }

    /// `floor(self · x)`.
    pub fn floor_mul(&self, x: u64) -> u64 {
        ((self.num as u128 * x as u128) / self.den as u128) as u64
    }

    /// `self · x < y`, exactly.
    pub fn mul_lt(&self, x: u64, y: u64) -> bool {
        (self.num as u128) * (x as u128) < (y as u128) * (self.den as u128)
    }

    pub fn to_scalar(&self) -> ExactScalar {
        ExactScalar::ratio(self.num, self.den)
    }
}

impl std::fmt::Display for Fraction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// Length of a time window `0 ≤ k ≤ L` requested from the oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Window {
    Fixed(u64),
    /// `L = floor(α n)` where `n` is the returned shift.
    ShareOfShift(Fraction),
    /// `L = floor(α d)` where `d` is the returned period multiple.
    ShareOfPeriod(Fraction),
}

impl Window {
    pub fn length(&self, n: u64, d: u64) -> u64 {
        match self {
            Window::Fixed(l) => *l,
            Window::ShareOfShift(a) => a.floor_mul(n),
            Window::ShareOfPeriod(a) => a.floor_mul(d),
        }
    }
}

/// What a stage needs from the oracle.
///
/// The returned `(z, n, d)` must satisfy `sup_{0≤k≤L_s} ‖T^k z‖ < small_radius`
/// and `sup_{0≤k≤L_r} ‖T^{n+k} z − T^k x‖ < residual_radius`, with `n ≡ residue
/// (mod modulus)`, `n > min_shift`, `d` a multiple of `period_divisor` and of
/// the period of `z`, `d > min_period`, and `α d < n ≤ d` when
/// `shift_above_share` is `Some(α)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleRequest {
    pub target: FiniteVector,
    pub small_radius: ExactScalar,
    pub small_window: Window,
    pub residual_radius: ExactScalar,
    pub residual_window: Window,
    pub modulus: u64,
    pub residue: u64,
    pub min_shift: u64,
    pub period_divisor: u64,
    pub min_period: u64,
    pub shift_above_share: Option<Fraction>,
    pub min_generation: u64,
}

impl OracleRequest {
    /// The plain request of the chaos criterion: `‖z‖ < ε`, `‖T^n z − x‖ < ε`.
    pub fn simple(target: FiniteVector, eps: ExactScalar) -> Self {
        OracleRequest {
            target,
            small_radius: eps.clone(),
            small_window: Window::Fixed(0),
            residual_radius: eps,
            residual_window: Window::Fixed(0),
            modulus: 1,
            residue: 0,
            min_shift: 0,
            period_divisor: 1,
            min_period: 0,
            shift_above_share: None,
            min_generation: 1,
        }
    }
}

/// An oracle answer with its certified bounds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleAnswer {
    pub z: FiniteVector,
    /// The shift `n` (the integer `m` of the explicit construction).
    pub n: u64,
    /// A multiple of the period of `z`, `2Δ^(k)`.
    pub d: u64,
    pub generation: u64,
    pub small_window: u64,
    /// Certified upper bound of `sup_{k ≤ small_window} ‖T^k z‖`.
    pub small_bound: ExactScalar,
    pub residual_window: u64,
    /// Certified upper bound of `sup_{k ≤ residual_window} ‖T^{n+k} z − T^k x‖`.
    pub residual_bound: ExactScalar,
}

/// A source of stage vectors for the builders.
pub trait StageOracle {
    fn propose(&self, op: &CTypeOperator, request: &OracleRequest) -> Result<OracleAnswer, ForgeError>;
}

/// The explicit construction for C₊-type operators, searching generations
/// `k ≥ max(min_generation, ·)` up to `search_span` generations further.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CPlusOracle {
    pub search_span: u64,
}

impl Default for CPlusOracle {
    fn default() -> Self {
        CPlusOracle { search_span: DEFAULT_ORACLE_SPAN }
    }
}

impl StageOracle for CPlusOracle {
    fn propose(&self, op: &CTypeOperator, request: &OracleRequest) -> Result<OracleAnswer, ForgeError> {
        oracle_cplus(op, request, self.search_span)
    }
}

/// Upper bound of `‖x‖_p^p` for `p ∈ {1, 2}`, summed with upward rounding so
/// that coefficients of wildly different size never have to be aligned.
pub fn norm_pow_upper(x: &FiniteVector, p: SpaceExponent) -> Result<ExactScalar, ForgeError> {
    let mut acc = UpperSum::new(SUM_SLACK_BITS);
    for (_, c) in x.entries() {
        match p.0 {
            1 => acc.add(&c.abs()),
            2 => acc.add(&c.square()),
            other => return Err(NormError::UnsupportedExponent(other).into()),
        }
    }
    Ok(acc.value().clone())
}

/// Certified `‖x‖_p < radius`.
pub fn norm_below_upper(x: &FiniteVector, radius: &ExactScalar, p: SpaceExponent) -> Result<bool, ForgeError> {
    let np = norm_pow_upper(x, p)?;
    Ok(match p.0 {
        1 => np < *radius,
        _ => np < radius.square(),
    })
}

/// Certified upper bound of `‖x‖_p`.
fn norm_upper(x: &FiniteVector, p: SpaceExponent) -> Result<ExactScalar, ForgeError> {
    let np = norm_pow_upper(x, p)?;
    if np.is_zero() || p.0 == 1 {
        return Ok(np);
    }
    Ok(np.sqrt_upper(SQRT_BITS).expect("norm powers are nonnegative"))
}

struct BlockCache<'a> {
    op: &'a CTypeOperator,
    blocks: HashMap<u64, Block>,
}

impl<'a> BlockCache<'a> {
    fn new(op: &'a CTypeOperator) -> Self {
        BlockCache { op, blocks: HashMap::new() }
    }

    fn get(&mut self, n: u64) -> Result<&Block, ForgeError> {
        if !self.blocks.contains_key(&n) {
            let b = self.op.block(n)?;
            self.blocks.insert(n, b);
        }
        Ok(&self.blocks[&n])
    }
}

/// Upper bound of `sup_{0 ≤ k ≤ window} ‖T^k y‖_p`, valid for every `p ≥ 1`.
///
/// Each coordinate is followed along its block: the running weight product is
/// log-linear on every zone, so its maximum over a stretch is attained at a
/// zone boundary or an end point.  At the block end a coordinate splits into
/// its restart at `b_n` and its coupling image at `b_φ(n)`, both followed for
/// the remaining time (capped at their period).  The bound is the sum of the
/// per-trajectory maxima.
pub fn orbit_sup_bound(op: &CTypeOperator, y: &FiniteVector, window: u64) -> Result<ExactScalar, ForgeError> {
    let mut cache = BlockCache::new(op);
    let mut acc = UpperSum::new(SUM_SLACK_BITS);
    for (q, c) in y.entries() {
        let n = op.block_of(*q)?;
        let start = op.b(n)?;
        trajectory_sup(&mut cache, n, q - start, c.abs(), window, &mut acc)?;
    }
    Ok(acc.value().clone())
}

fn trajectory_sup(cache: &mut BlockCache<'_>, n: u64, o: u64, c: ExactScalar, window: u64, acc: &mut UpperSum) -> Result<(), ForgeError> {
    let blk = cache.get(n)?.clone();
    let r = window.min(blk.period() - 1);
    let reach = blk.size - 1 - o;
    let seg = r.min(reach);
    let mut best = c.clone();
    let mut probe = |t: u64| {
        if t >= 1 && t <= seg {
            let v = &c * &blk.product(o + 1, o + t).abs();
            if v > best {
                best = v;
            }
        }
    };
    for z in &blk.zones {
        probe(z.lo.saturating_sub(1 + o));
        probe(z.hi.saturating_sub(1 + o));
    }
    probe(seg);
    acc.add(&best);
    if r > reach {
        let at_end = &c * &blk.product(o + 1, blk.size - 1).abs();
        let rest = r - reach - 1;
        let inv_w = blk.full_product().abs().recip().expect("weights are nonzero");
        trajectory_sup(cache, n, 0, &at_end * &inv_w, rest, acc)?;
        if n >= 1 && !blk.v.is_zero() {
            trajectory_sup(cache, blk.phi, 0, &at_end * &blk.v.abs(), rest, acc)?;
        }
    }
    Ok(())
}

/// `sup_k ‖T^k x‖ < radius` over the window, with the exact `p`-norm when the
/// window is the single time `k = 0`.
fn window_bound(op: &CTypeOperator, x: &FiniteVector, window: u64) -> Result<ExactScalar, ForgeError> {
    if window == 0 {
        norm_upper(x, op.p())
    } else {
        orbit_sup_bound(op, x, window)
    }
}

/// `T^n x` computed one coordinate at a time and summed.
///
/// Used where coordinates of very different sizes may meet; the summands are
/// returned separately so callers can bound norms with the triangle
/// inequality instead of adding them.
fn apply_power_pieces(op: &CTypeOperator, x: &FiniteVector, n: u64) -> Result<Vec<FiniteVector>, ForgeError> {
    x.entries().iter().map(|(q, c)| Ok(op.apply_power(&FiniteVector::from_pairs([(*q, c.clone())]), n)?)).collect()
}

fn pieces_norm_upper(op: &CTypeOperator, pieces: &[FiniteVector]) -> Result<ExactScalar, ForgeError> {
    let mut acc = UpperSum::new(SUM_SLACK_BITS);
    for piece in pieces {
        acc.add(&norm_upper(piece, op.p())?);
    }
    Ok(acc.value().clone())
}

/// The explicit approximating vector of the C₊ construction at `(k, m)`.
///
/// For a coordinate `x_j e_j` in block `l < 2^{k−1}` with offset `s = j − b_l`,
/// the vector carries
/// `x_j (v^(k) ∏_{i=Δ−m+s+1}^{Δ−1} w_i^(k))^{−1} (∏_{i=1}^{s} w_{b_l+i})^{−1}`
/// at index `b_{2^{k−1}+l+1} − m + s`, so that `T^m` of it returns `x_j e_j`
/// up to a remainder at the start of block `2^{k−1}+l`.
pub fn cplus_approximant(op: &CTypeOperator, x: &FiniteVector, k: u64, m: u64) -> Result<FiniteVector, ForgeError> {
    if !matches!(op.family(), Family::CPlus(_)) {
        return Err(ForgeError::NotCPlus);
    }
    let half = 1u64 << (k - 1);
    let mut cache = BlockCache::new(op);
    let mut out = Vec::with_capacity(x.support_len());
    for (j, c) in x.entries() {
        let l = op.block_of(*j)?;
        if l >= half {
            return Err(ForgeError::InvalidRequest(format!("block {l} is not below 2^(k-1) = {half}")));
        }
        let (b_l, low) = {
            let blk = cache.get(l)?;
            (blk.start, blk.clone())
        };
        let s = j - b_l;
        let host = cache.get(half + l)?.clone();
        let size = host.size;
        if s >= m || m >= size {
            return Err(ForgeError::InvalidRequest(format!("shift m = {m} does not fit offset {s} in a block of size {size}")));
        }
        let tail = &host.v * &host.product(size - m + s + 1, size - 1);
        let head = low.product(1, s);
        let coeff = c * &(&tail * &head).recip().expect("weights and couplings are nonzero");
        out.push((host.end() - m + s, coeff));
    }
    Ok(FiniteVector::from_pairs(out))
}

/// Candidate shifts `m` for generation block size `size`: the zone boundaries
/// of the weight layout, moved into the requested residue class.
fn candidate_shifts(host: &Block, request: &OracleRequest, min_m: u64) -> Vec<u64> {
    let size = host.size;
    let mut anchors: Vec<u64> = vec![1, size - 1];
    for z in &host.zones {
        anchors.extend([z.lo, z.hi.saturating_sub(1), z.hi]);
    }
    let modulus = request.modulus.max(1);
    let residue = request.residue % modulus;
    let mut out = Vec::new();
    for offset in anchors {
        if offset == 0 || offset >= size {
            continue;
        }
        let m0 = size - offset;
        let down = m0 - ((m0 + modulus - residue) % modulus).min(m0);
        let up = m0 + (residue + modulus - m0 % modulus) % modulus;
        for m in [down, up] {
            if m >= min_m.max(1) && m < size && m % modulus == residue {
                out.push(m);
            }
        }
    }
    out.sort_unstable_by(|a, b| b.cmp(a));
    out.dedup();
    out
}

/// The explicit oracle for C₊-type operators.
///
/// Scans generations `k` upward and, inside each, the candidate shifts `m`
/// (largest first); the first `(k, m)` whose approximant passes every
/// requested inequality — each certified by exact rational upper bounds — is
/// returned with `n = m` and `d = 2Δ^(k)`.
pub fn oracle_cplus(op: &CTypeOperator, request: &OracleRequest, span: u64) -> Result<OracleAnswer, ForgeError> {
    if !matches!(op.family(), Family::CPlus(_)) {
        return Err(ForgeError::NotCPlus);
    }
    let x = &request.target;
    let (l_max, s_max) = match x.max_index() {
        Some(_) => {
            let mut l_max = 0;
            let mut s_max = 0;
            for (j, _) in x.entries() {
                let l = op.block_of(*j)?;
                l_max = l_max.max(l);
                s_max = s_max.max(j - op.b(l)?);
            }
            (l_max, s_max)
        }
        None => (0, 0),
    };
    let k_fit = 64 - l_max.leading_zeros() as u64 + 1;
    let k_lo = request.min_generation.max(k_fit).max(1);
    let k_hi = k_lo + span;
    for k in k_lo..=k_hi {
        let host_n = (1u64 << (k - 1)) + l_max;
        if k >= 63 || host_n > op.n_max() {
            return Err(ForgeError::NotFound { k_lo, k_hi: k - 1 });
        }
        let host = op.block(1u64 << (k - 1))?;
        let d = host.period();
        if d % request.period_divisor.max(1) != 0 || d <= request.min_period {
            continue;
        }
        for m in candidate_shifts(&host, request, s_max + 1) {
            if m <= request.min_shift {
                continue;
            }
            if let Some(a) = request.shift_above_share {
                if !a.mul_lt(d, m) || m > d {
                    continue;
                }
            }
            if let Some(answer) = try_shift(op, request, k, m, d)? {
                return Ok(answer);
            }
        }
    }
    Err(ForgeError::NotFound { k_lo, k_hi })
}

fn try_shift(op: &CTypeOperator, request: &OracleRequest, k: u64, m: u64, d: u64) -> Result<Option<OracleAnswer>, ForgeError> {
    let z = cplus_approximant(op, &request.target, k, m)?;
    let small_window = request.small_window.length(m, d);
    let small_bound = window_bound(op, &z, small_window)?;
    if small_bound >= request.small_radius {
        return Ok(None);
    }
    let residual = op.apply_power(&z, m)?.sub(&request.target);
    let residual_window = request.residual_window.length(m, d);
    let residual_bound = window_bound(op, &residual, residual_window)?;
    if residual_bound >= request.residual_radius {
        return Ok(None);
    }
    Ok(Some(OracleAnswer { z, n: m, d, generation: k, small_window, small_bound, residual_window, residual_bound }))
}

/// The builder a [`StagedVector`] came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuilderKind {
    Chaotic,
    Ufhc,
    Fhc,
}

/// One recorded stage inequality.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCheck {
    pub name: String,
    /// Human-readable statement of what was checked.
    pub statement: String,
    /// Certified value (upper bound) of the left-hand side, when numeric.
    pub bound: Option<ExactScalar>,
    pub limit: Option<ExactScalar>,
    pub holds: bool,
}

impl StageCheck {
    fn numeric(name: &str, statement: String, bound: ExactScalar, limit: ExactScalar, strict: bool) -> Self {
        let holds = if strict { bound < limit } else { bound <= limit };
        StageCheck { name: name.into(), statement, bound: Some(bound), limit: Some(limit), holds }
    }

    fn integral(name: &str, statement: String, holds: bool) -> Self {
        StageCheck { name: name.into(), statement, bound: None, limit: None, holds }
    }
}

/// One stage `(z_j, n_j, d_j)` with its target `y_j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage {
    pub index: usize,
    pub target: FiniteVector,
    pub z: FiniteVector,
    pub n: u64,
    pub d: Option<u64>,
    pub generation: u64,
    pub checks: Vec<StageCheck>,
}

/// A measured visit density compared with the analytic bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityRecord {
    /// Index `l` of the target `x_l` (1-based).
    pub target: usize,
    pub radius: ExactScalar,
    pub horizon: u64,
    pub hits: u64,
    /// `"upper"` (value at the horizon) or `"lower"` (minimum over the run).
    pub kind: String,
    pub measured: f64,
    pub measured_exact: String,
    pub analytic_bound: ExactScalar,
    pub required: ExactScalar,
    pub holds: bool,
}

/// The output of a builder: finitely many stages, their certified
/// inequalities and the consequences checked on the partial sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagedVector {
    pub kind: BuilderKind,
    pub alpha: Option<Fraction>,
    pub p: u32,
    /// Exact upper bound used in place of `‖T‖`.
    pub norm_bound: ExactScalar,
    /// `log2 ‖T‖ ≤ norm_log2_num / 64`.
    pub norm_log2_num: i64,
    /// The target schedule: stage `j` aims at `targets[(j − 1) mod L]`.
    pub targets: Vec<FiniteVector>,
    pub stages: Vec<Stage>,
    pub final_checks: Vec<StageCheck>,
    pub densities: Vec<DensityRecord>,
}

impl StagedVector {
    /// `z = Σ_j z_j` (the pieces live in distinct blocks, so this is exact).
    pub fn vector(&self) -> FiniteVector {
        FiniteVector::from_pairs(self.stages.iter().flat_map(|s| s.z.entries().iter().cloned()))
    }

    pub fn shifts(&self) -> Vec<u64> {
        self.stages.iter().map(|s| s.n).collect()
    }

    /// Whether every recorded inequality holds.
    pub fn all_hold(&self) -> bool {
        self.stages.iter().all(|s| s.checks.iter().all(|c| c.holds))
            && self.final_checks.iter().all(|c| c.holds)
            && self.densities.iter().all(|d| d.holds)
    }

    /// Recompute every recorded check from the stored stages and compare.
    pub fn reverify(&self, op: &CTypeOperator) -> Result<bool, ForgeError> {
        let (stage_checks, final_checks, densities) = certify(op, self.kind, self.alpha, &self.targets, &self.stages)?;
        let same_stages = stage_checks.iter().zip(&self.stages).all(|(c, s)| *c == s.checks);
        Ok(same_stages && final_checks == self.final_checks && densities == self.densities && self.all_hold())
    }
}

/// `log2 B ≤ t/64` for the exact norm bound `B` of the operator.
pub fn norm_log2_bound(op: &CTypeOperator) -> (ExactScalar, i64) {
    let b = op.norm_bound();
    let pow = b.pow_u64(NORM_LOG2_DENOM as u64);
    (b, ceil_log2(&pow.to_rational().expect("finite bound")))
}

fn pow2(e: i64) -> ExactScalar {
    ExactScalar::pow2(e)
}

/// Period of `Σ z_i` bounded by the lcm of the stage periods.
fn joint_period(op: &CTypeOperator, pieces: &[&FiniteVector]) -> Result<u64, ForgeError> {
    let mut acc = 1u64;
    for z in pieces {
        acc = acc.lcm(&op.period_of(z)?);
    }
    Ok(acc)
}

fn target_for(targets: &[FiniteVector], j: usize) -> &FiniteVector {
    &targets[(j - 1) % targets.len()]
}

fn prior_sum(stages: &[Stage]) -> FiniteVector {
    FiniteVector::from_pairs(stages.iter().flat_map(|s| s.z.entries().iter().cloned()))
}

fn check_inputs(targets: &[FiniteVector], alpha: Option<Fraction>) -> Result<(), ForgeError> {
    if targets.is_empty() {
        return Err(ForgeError::InvalidRequest("empty target list".into()));
    }
    if let Some(a) = alpha {
        if a.num == 0 || a.num >= a.den {
            return Err(ForgeError::InvalidRequest(format!("alpha = {a} must lie in (0, 1)")));
        }
    }
    Ok(())
}

/// Stage-by-stage construction of a hypercyclic vector for a chaotic
/// operator.
///
/// Stage `j` asks the oracle for `z_j` with `‖z_j‖ < 2^{−j} B^{−n_{j−1}}`
/// (`B` the exact norm bound, replacing `‖T‖`), `‖T^{n_j} z_j − (y_j − Σ_{i<j}
/// z_i)‖ < 2^{−j}` and `n_j` a multiple of the period of `Σ_{i<j} z_i`.  The
/// consequence `‖T^{n_j} z − y_j‖ ≤ 2^{−(j−1)}` for `z = Σ_{i≤J} z_i` is then
/// certified for every `j`.
pub fn build_chaotic(
    oracle: &dyn StageOracle,
    op: &CTypeOperator,
    targets: &[FiniteVector],
    stages: usize,
) -> Result<StagedVector, ForgeError> {
    check_inputs(targets, None)?;
    let (norm_bound, t) = norm_log2_bound(op);
    let mut built: Vec<Stage> = Vec::new();
    for j in 1..=stages {
        let y = target_for(targets, j);
        let prev: Vec<&FiniteVector> = built.iter().map(|s| &s.z).collect();
        let n_prev = built.last().map_or(0, |s| s.n);
        let k_prev = built.last().map_or(0, |s| s.generation);
        let mut req = OracleRequest::simple(y.sub(&prior_sum(&built)), pow2(-(j as i64)));
        req.small_radius = pow2(-(j as i64) - norm_exponent(n_prev, t));
        req.modulus = joint_period(op, &prev).map_err(|e| stage_err(j, e))?;
        req.min_shift = n_prev;
        req.min_generation = k_prev + 1;
        let ans = oracle.propose(op, &req).map_err(|e| stage_err(j, e))?;
        built.push(Stage { index: j, target: y.clone(), z: ans.z, n: ans.n, d: None, generation: ans.generation, checks: Vec::new() });
    }
    finish(op, BuilderKind::Chaotic, None, targets, built, norm_bound, t)
}

/// `ceil(n t / 64)`: the exponent with `B^n ≤ 2^{that}`.
fn norm_exponent(n: u64, t: i64) -> i64 {
    let num = n as i128 * t as i128;
    let den = NORM_LOG2_DENOM as i128;
    (num.div_euclid(den) + i128::from(num.rem_euclid(den) != 0)) as i64
}

/// Stage-by-stage construction for the U-frequent hypercyclicity criterion.
///
/// Stage `j` requires (i) `‖T^k z_j‖ < 2^{−j}` for `k ≤ (1+α)n_{j−1}`, (ii)
/// `‖T^{n_j+k} z_j − T^k(y_j − Σ_{i<j} z_i)‖ < 2^{−j}` for `k ≤ α n_j`, and
/// (iii) `n_j` a multiple of the period of `Σ_{i<j} z_i`.  Targets are taken
/// round-robin.  The measured upper density of visits of `z` to
/// `B(x_1, 2^{−(J−1)})` at the horizon `(1+α) n_J` is compared with
/// `α/((1+α) per(x_1))`.
pub fn build_ufhc(
    oracle: &dyn StageOracle,
    op: &CTypeOperator,
    alpha: Fraction,
    targets: &[FiniteVector],
    stages: usize,
) -> Result<StagedVector, ForgeError> {
    check_inputs(targets, Some(alpha))?;
    let (norm_bound, t) = norm_log2_bound(op);
    let one_plus = Fraction::new(alpha.num + alpha.den, alpha.den);
    let mut built: Vec<Stage> = Vec::new();
    for j in 1..=stages {
        let y = target_for(targets, j);
        let prev: Vec<&FiniteVector> = built.iter().map(|s| &s.z).collect();
        let n_prev = built.last().map_or(0, |s| s.n);
        let k_prev = built.last().map_or(0, |s| s.generation);
        let eps = pow2(-(j as i64));
        let mut req = OracleRequest::simple(y.sub(&prior_sum(&built)), eps);
        req.small_window = Window::Fixed(one_plus.floor_mul(n_prev));
        req.residual_window = Window::ShareOfShift(alpha);
        req.modulus = joint_period(op, &prev).map_err(|e| stage_err(j, e))?;
        req.min_shift = n_prev;
        req.min_generation = k_prev + 1;
        let ans = oracle.propose(op, &req).map_err(|e| stage_err(j, e))?;
        built.push(Stage {
            index: j,
            target: y.clone(),
            z: ans.z,
            n: ans.n,
            d: Some(ans.d),
            generation: ans.generation,
            checks: Vec::new(),
        });
    }
    finish(op, BuilderKind::Ufhc, Some(alpha), targets, built, norm_bound, t)
}

/// Stage-by-stage construction for the frequent hypercyclicity criterion.
///
/// Stage `j` requires (i) `d_j` a multiple of the periods of `Σ_{i<j} z_i`
/// and of `z_j`, (ii) `‖T^k z_j‖ < 2^{−j}` for `k ≤ α d_j`, (iii)
/// `‖T^{n_j+k} z_j − T^k(y_j − Σ_{i<j} z_i)‖ < 2^{−j}` for `k ≤ α d_j`, (iv)
/// `n_j` a multiple of the period of `Σ_{i<j} z_i` with `α d_j < n_j ≤ d_j`,
/// and (v) `α d_j > 4 d_{j−1}`.  The targets are scheduled round-robin, so
/// every target recurs with gap `r = L`; the measured lower density of visits
/// is compared with `α^{r+2}/(2^{r+2} per(x_l))`.
pub fn build_fhc(
    oracle: &dyn StageOracle,
    op: &CTypeOperator,
    alpha: Fraction,
    targets: &[FiniteVector],
    stages: usize,
) -> Result<StagedVector, ForgeError> {
    check_inputs(targets, Some(alpha))?;
    let (norm_bound, t) = norm_log2_bound(op);
    let mut built: Vec<Stage> = Vec::new();
    for j in 1..=stages {
        let y = target_for(targets, j);
        let prev: Vec<&FiniteVector> = built.iter().map(|s| &s.z).collect();
        let n_prev = built.last().map_or(0, |s| s.n);
        let d_prev = built.last().and_then(|s| s.d).unwrap_or(0);
        let k_prev = built.last().map_or(0, |s| s.generation);
        let per = joint_period(op, &prev).map_err(|e| stage_err(j, e))?;
        let eps = pow2(-(j as i64));
        let mut req = OracleRequest::simple(y.sub(&prior_sum(&built)), eps);
        req.small_window = Window::ShareOfPeriod(alpha);
        req.residual_window = Window::ShareOfPeriod(alpha);
        req.modulus = per;
        req.period_divisor = per;
        req.min_shift = n_prev;
        // α d > 4 d_{j−1}  ⇔  d > 4 d_{j−1} / α.
        req.min_period = ((4 * d_prev as u128 * alpha.den as u128) / alpha.num as u128) as u64;
        req.shift_above_share = Some(alpha);
        req.min_generation = k_prev + 1;
        let ans = oracle.propose(op, &req).map_err(|e| stage_err(j, e))?;
        built.push(Stage {
            index: j,
            target: y.clone(),
            z: ans.z,
            n: ans.n,
            d: Some(ans.d),
            generation: ans.generation,
            checks: Vec::new(),
        });
    }
    finish(op, BuilderKind::Fhc, Some(alpha), targets, built, norm_bound, t)
}

fn finish(
    op: &CTypeOperator,
    kind: BuilderKind,
    alpha: Option<Fraction>,
    targets: &[FiniteVector],
    mut stages: Vec<Stage>,
    norm_bound: ExactScalar,
    t: i64,
) -> Result<StagedVector, ForgeError> {
    let (stage_checks, final_checks, densities) = certify(op, kind, alpha, targets, &stages)?;
    for (s, c) in stages.iter_mut().zip(stage_checks) {
        s.checks = c;
    }
    Ok(StagedVector { kind, alpha, p: op.p().0, norm_bound, norm_log2_num: t, targets: targets.to_vec(), stages, final_checks, densities })
}

type Certified = (Vec<Vec<StageCheck>>, Vec<StageCheck>, Vec<DensityRecord>);

/// Recompute every stage inequality and every consequence from the stages.
fn certify(
    op: &CTypeOperator,
    kind: BuilderKind,
    alpha: Option<Fraction>,
    targets: &[FiniteVector],
    stages: &[Stage],
) -> Result<Certified, ForgeError> {
    let (_, t) = norm_log2_bound(op);
    let mut all = Vec::with_capacity(stages.len());
    // Residual bounds ‖T^{n_j+k} z_j − T^k(y_j − Σ_{i<j} z_i)‖ over each stage window.
    let mut residuals = Vec::with_capacity(stages.len());
    for (idx, stage) in stages.iter().enumerate() {
        let j = stage.index;
        let eps = pow2(-(j as i64));
        let prev = &stages[..idx];
        let n_prev = prev.last().map_or(0, |s| s.n);
        let d_prev = prev.last().and_then(|s| s.d).unwrap_or(0);
        let per = joint_period(op, &prev.iter().map(|s| &s.z).collect::<Vec<_>>())?;
        let target = stage.target.sub(&prior_sum(prev));
        let residual = op.apply_power(&stage.z, stage.n)?.sub(&target);
        let mut checks = Vec::new();
        checks.push(StageCheck::integral("shift_increasing", format!("n_{j} = {} > n_{} = {n_prev}", stage.n, j - 1), stage.n > n_prev));
        checks.push(StageCheck::integral(
            "shift_multiple_of_period",
            format!("n_{j} = {} is a multiple of per(sum of earlier stages) = {per}", stage.n),
            stage.n % per == 0,
        ));
        checks.push(check_prior_periodic(op, prev, stage.n, j)?);
        match kind {
            BuilderKind::Chaotic => {
                let radius = pow2(-(j as i64) - norm_exponent(n_prev, t));
                checks.push(StageCheck::numeric(
                    "small_norm",
                    format!("||z_{j}|| < 2^-{j} * B^-{n_prev}"),
                    norm_upper(&stage.z, op.p())?,
                    radius,
                    true,
                ));
                let r = norm_upper(&residual, op.p())?;
                checks.push(StageCheck::numeric(
                    "target_residual",
                    format!("||T^n_{j} z_{j} - (y_{j} - sum_(i<{j}) z_i)|| < 2^-{j}"),
                    r.clone(),
                    eps.clone(),
                    true,
                ));
                residuals.push((r, 0));
            }
            BuilderKind::Ufhc => {
                let a = alpha.expect("UFHC stages carry alpha");
                let one_plus = Fraction::new(a.num + a.den, a.den);
                let w_small = one_plus.floor_mul(n_prev);
                checks.push(StageCheck::numeric(
                    "small_orbit",
                    format!("||T^k z_{j}|| < 2^-{j} for 0 <= k <= (1+alpha) n_{} = {w_small}", j - 1),
                    window_bound(op, &stage.z, w_small)?,
                    eps.clone(),
                    true,
                ));
                let w = a.floor_mul(stage.n);
                let r = window_bound(op, &residual, w)?;
                checks.push(StageCheck::numeric(
                    "orbit_residual",
                    format!("||T^(n_{j}+k) z_{j} - T^k(y_{j} - sum_(i<{j}) z_i)|| < 2^-{j} for 0 <= k <= alpha n_{j} = {w}"),
                    r.clone(),
                    eps.clone(),
                    true,
                ));
                residuals.push((r, w));
            }
            BuilderKind::Fhc => {
                let a = alpha.expect("FHC stages carry alpha");
                let d = stage.d.ok_or_else(|| ForgeError::InvalidRequest(format!("stage {j} has no d")))?;
                let per_z = op.period_of(&stage.z)?;
                checks.push(StageCheck::integral(
                    "period_multiple",
                    format!("d_{j} = {d} is a multiple of per(sum of earlier stages) = {per} and of per(z_{j}) = {per_z}"),
                    d % per == 0 && d % per_z == 0,
                ));
                let w = a.floor_mul(d);
                checks.push(StageCheck::numeric(
                    "small_orbit",
                    format!("||T^k z_{j}|| < 2^-{j} for 0 <= k <= alpha d_{j} = {w}"),
                    window_bound(op, &stage.z, w)?,
                    eps.clone(),
                    true,
                ));
                let r = window_bound(op, &residual, w)?;
                checks.push(StageCheck::numeric(
                    "orbit_residual",
                    format!("||T^(n_{j}+k) z_{j} - T^k(y_{j} - sum_(i<{j}) z_i)|| < 2^-{j} for 0 <= k <= alpha d_{j} = {w}"),
                    r.clone(),
                    eps.clone(),
                    true,
                ));
                residuals.push((r, w));
                checks.push(StageCheck::integral(
                    "shift_between",
                    format!("alpha d_{j} < n_{j} = {} <= d_{j} = {d}", stage.n),
                    a.mul_lt(d, stage.n) && stage.n <= d,
                ));
                checks.push(StageCheck::integral(
                    "period_growth",
                    format!("alpha d_{j} > 4 d_{} = {}", j - 1, 4 * d_prev as u128),
                    (a.num as u128) * (d as u128) > 4 * (d_prev as u128) * (a.den as u128),
                ));
            }
        }
        all.push(checks);
    }
    let final_checks = consequences(op, kind, alpha, stages, &residuals)?;
    let densities = match kind {
        BuilderKind::Chaotic => Vec::new(),
        BuilderKind::Ufhc => ufhc_density(op, alpha.expect("alpha"), targets, stages)?,
        BuilderKind::Fhc => fhc_density(op, alpha.expect("alpha"), targets, stages)?,
    };
    Ok((all, final_checks, densities))
}

/// `T^{n_j} z_i = z_i` exactly for every earlier stage, coordinate by coordinate.
fn check_prior_periodic(op: &CTypeOperator, prev: &[Stage], n: u64, j: usize) -> Result<StageCheck, ForgeError> {
    let mut ok = true;
    for s in prev {
        for (q, c) in s.z.entries() {
            let e = FiniteVector::from_pairs([(*q, c.clone())]);
            if op.apply_power(&e, n)? != e {
                ok = false;
            }
        }
    }
    Ok(StageCheck::integral("earlier_stages_fixed", format!("T^n_{j} leaves every coordinate of z_1, ..., z_{} unchanged", j - 1), ok))
}

/// The consequences on the partial sum `z = Σ_{i≤J} z_i`.
fn consequences(
    op: &CTypeOperator,
    kind: BuilderKind,
    alpha: Option<Fraction>,
    stages: &[Stage],
    residuals: &[(ExactScalar, u64)],
) -> Result<Vec<StageCheck>, ForgeError> {
    let mut out = Vec::new();
    for (idx, stage) in stages.iter().enumerate() {
        let j = stage.index;
        let limit = pow2(-(j as i64) + 1);
        let mut acc = UpperSum::new(SUM_SLACK_BITS);
        acc.add(&residuals[idx].0);
        let later = &stages[idx + 1..];
        match kind {
            BuilderKind::Chaotic => {
                for s in later {
                    acc.add(&pieces_norm_upper(op, &apply_power_pieces(op, &s.z, stage.n)?)?);
                }
                out.push(StageCheck::numeric(
                    "hits_target",
                    format!("||T^n_{j} z - y_{j}|| <= 2^-{}", j - 1),
                    acc.value().clone(),
                    limit,
                    false,
                ));
            }
            BuilderKind::Ufhc | BuilderKind::Fhc => {
                let a = alpha.expect("alpha");
                let w = residuals[idx].1;
                for s in later {
                    acc.add(&orbit_sup_bound(op, &s.z, stage.n + w)?);
                }
                let statement = match kind {
                    BuilderKind::Ufhc => {
                        format!("||T^(n_{j}+k) z - T^k y_{j}|| < 2^-{} for 0 <= k <= alpha n_{j} = {} (alpha = {a})", j - 1, w)
                    }
                    _ => format!("||T^(n_{j}+k) z - T^k y_{j}|| < 2^-{} for 0 <= k <= alpha d_{j} = {w}", j - 1),
                };
                out.push(StageCheck::numeric("tracks_target", statement, acc.value().clone(), limit, true));
            }
        }
    }
    Ok(out)
}

/// For each time `0 ≤ t ≤ horizon`, the largest `e ≤ max_level` with
/// `‖T^t z − center‖ ≤ 2^{−e}` certified, or `-1`.
pub fn visit_levels(
    op: &CTypeOperator,
    z: &FiniteVector,
    center: &FiniteVector,
    horizon: u64,
    max_level: u32,
) -> Result<Vec<i8>, ForgeError> {
    let p = op.p();
    let mut y = z.clone();
    let mut out = Vec::with_capacity(horizon as usize + 1);
    for t in 0..=horizon {
        let np = norm_pow_upper(&y.sub(center), p)?;
        let mut level = -1i8;
        for e in (0..=max_level).rev() {
            if np <= pow2(-(e as i64) * p.0 as i64) {
                level = e as i8;
                break;
            }
        }
        out.push(level);
        if t < horizon {
            y = op.apply(&y)?;
        }
    }
    Ok(out)
}

fn ratio_scalar(num: u64, den: u64) -> ExactScalar {
    ExactScalar::ratio(num, den)
}

#[allow(clippy::too_many_arguments)]
fn measured_record(
    target: usize,
    radius_level: u32,
    horizon: u64,
    hits: u64,
    kind: &str,
    num: u64,
    den: u64,
    analytic: ExactScalar,
) -> DensityRecord {
    let required = &analytic * &ratio_scalar(DENSITY_SLACK.0, DENSITY_SLACK.1);
    let measured_exact = ratio_scalar(num, den.max(1));
    DensityRecord {
        target,
        radius: pow2(-(radius_level as i64)),
        horizon,
        hits,
        kind: kind.into(),
        measured: num as f64 / den.max(1) as f64,
        measured_exact: format!("{num}/{}", den.max(1)),
        holds: measured_exact >= required,
        analytic_bound: analytic,
        required,
    }
}

/// Upper density of visits to `B(x_1, 2^{−(J−1)})` read at `(1+α) n_J`.
fn ufhc_density(op: &CTypeOperator, alpha: Fraction, targets: &[FiniteVector], stages: &[Stage]) -> Result<Vec<DensityRecord>, ForgeError> {
    let Some(last) = stages.last() else { return Ok(Vec::new()) };
    let z = prior_sum(stages);
    let horizon = last.n + alpha.floor_mul(last.n);
    let level = (stages.len() as u32).saturating_sub(1);
    let x1 = &targets[0];
    let levels = visit_levels(op, &z, x1, horizon, level)?;
    let hits = levels.iter().skip(1).filter(|&&e| e >= level as i8).count() as u64;
    let per = op.period_of(x1)?;
    // α / ((1+α) per) = num / ((num + den) per).
    let analytic = ratio_scalar(alpha.num, (alpha.num + alpha.den) * per);
    Ok(vec![measured_record(1, level, horizon, hits, "upper", hits, horizon, analytic)])
}

/// Lower density (minimum of `#hits ∩ [1, t] / t` from the first hit on) of
/// visits to `B(x_l, 1)`, for each scheduled target.
fn fhc_density(op: &CTypeOperator, alpha: Fraction, targets: &[FiniteVector], stages: &[Stage]) -> Result<Vec<DensityRecord>, ForgeError> {
    let Some(last) = stages.last() else { return Ok(Vec::new()) };
    let d_last = last.d.unwrap_or(0);
    let z = prior_sum(stages);
    let horizon = d_last + alpha.floor_mul(d_last);
    let gap = targets.len().min(stages.len()).max(1) as u32;
    let mut out = Vec::new();
    for (l, x) in targets.iter().enumerate().take(stages.len()) {
        let levels = visit_levels(op, &z, x, horizon, 0)?;
        let mut count = 0u64;
        let mut best: Option<(u64, u64)> = None;
        for t in 1..=horizon {
            if levels[t as usize] >= 0 {
                count += 1;
            }
            if count == 0 {
                continue;
            }
            let better = match best {
                None => true,
                Some((c, tt)) => (count as u128) * (tt as u128) < (c as u128) * (t as u128),
            };
            if better {
                best = Some((count, t));
            }
        }
        let per = op.period_of(x)?;
        // α^{r+2} / (2^{r+2} per).
        let r2 = gap + 2;
        let analytic = &alpha.to_scalar().pow_u64(r2 as u64) * &ratio_scalar(1, per << r2);
        let (num, den) = best.unwrap_or((0, horizon.max(1)));
        out.push(measured_record(l + 1, 0, horizon, count, "lower", num, den, analytic));
    }
    Ok(out)
}

/// Elements of the sets `A_{m,j}` of the density argument for target `l`
/// (1-based), restricted to `[0, horizon]`, each with the stage index `j_m`
/// whose guarantee `2^{−(j_m−1)}` applies.
pub fn enumerate_fhc_hits(sv: &StagedVector, op: &CTypeOperator, target: usize, horizon: u64) -> Result<Vec<(u64, usize)>, ForgeError> {
    let alpha = sv.alpha.ok_or_else(|| ForgeError::InvalidRequest("no alpha".into()))?;
    let l_count = sv.targets.len();
    let per = op.period_of(&sv.targets[target - 1])?;
    let ds: Vec<u64> = sv.stages.iter().map(|s| s.d.unwrap_or(0)).collect();
    let ns: Vec<u64> = sv.shifts();
    let big_j = sv.stages.len();
    let mut out = Vec::new();
    let visits: Vec<usize> = (1..=big_j).filter(|j| (j - 1) % l_count == target - 1).collect();
    for (pos, &jm) in visits.iter().enumerate() {
        let next = visits.get(pos + 1).copied().unwrap_or(big_j + 1);
        // A_{m,0}: n_{jm} + k d_{jm} + k' per, k' ≤ α d_{jm}/per, k ≤ α d_{jm+1}/d_{jm} − 2.
        let d = ds[jm - 1];
        let k_max = if jm < big_j { alpha.floor_mul(ds[jm]) / d - 2 } else { 0 };
        let kp_max = alpha.floor_mul(d) / per;
        let mut current: Vec<u64> = Vec::new();
        for k in 0..=k_max {
            for kp in 0..=kp_max {
                current.push(ns[jm - 1] + k * d + kp * per);
            }
        }
        out.extend(current.iter().filter(|&&t| t <= horizon).map(|&t| (t, jm)));
        // A_{m,j} = ∪_{1 ≤ k ≤ α d_{jm+j+1}/d_{jm+j} − 1} (A_{m,j−1} + k d_{jm+j}).
        for step in jm + 1..next.min(big_j + 1) {
            let d_step = ds[step - 1];
            let k_max = if step < big_j { alpha.floor_mul(ds[step]) / d_step - 1 } else { 1 };
            let mut grown = Vec::new();
            for k in 1..=k_max {
                for &a in &current {
                    let t = a + k * d_step;
                    if t <= horizon {
                        grown.push(t);
                    }
                }
            }
            out.extend(grown.iter().map(|&t| (t, jm)));
            current = grown;
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Check that every enumerated element of the `A_{m,j}` sets for target `l`
/// is a certified visit of the finite sum `z` at its stage radius.
pub fn check_fhc_hits(sv: &StagedVector, op: &CTypeOperator, target: usize) -> Result<(usize, bool), ForgeError> {
    let Some(last) = sv.stages.last() else { return Ok((0, true)) };
    let alpha = sv.alpha.ok_or_else(|| ForgeError::InvalidRequest("no alpha".into()))?;
    let d_last = last.d.unwrap_or(0);
    let horizon = d_last + alpha.floor_mul(d_last);
    let hits = enumerate_fhc_hits(sv, op, target, horizon)?;
    let max_level = sv.stages.len() as u32;
    let levels = visit_levels(op, &sv.vector(), &sv.targets[target - 1], horizon, max_level)?;
    let ok = hits.iter().all(|&(t, jm)| levels[t as usize] >= jm as i8 - 1);
    Ok((hits.len(), ok))
}

/// A default dense-ish target list: dyadic combinations of the first basis
/// vectors of blocks `0` and `1`.
pub fn default_targets(op: &CTypeOperator, count: usize) -> Result<Vec<FiniteVector>, ForgeError> {
    let b1 = op.b(1)?;
    let half = ExactScalar::ratio(1, 2);
    let pool = [
        FiniteVector::basis(0),
        FiniteVector::basis(b1),
        FiniteVector::from_pairs([(0, ExactScalar::one()), (b1 + 1, -half.clone())]),
        FiniteVector::from_pairs([(b1, half.clone()), (b1 + 2, ExactScalar::one())]),
    ];
    Ok(pool.iter().cycle().take(count).cloned().collect())
}

/// Helper for reports: `log2` of the analytic density bound.
pub fn density_bound_value(d: &DensityRecord) -> BigRational {
    d.analytic_bound.to_rational().unwrap_or_else(|| BigRational::from_integer(BigInt::from(0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn op59() -> CTypeOperator {
        CTypeOperator::new(presets::example59_small(), 15, SpaceExponent::L2).unwrap()
    }

    #[test]
    fn single_coordinate_approximant() {
        let op = op59();
        let x = FiniteVector::basis(0);
        let k = 2;
        let host = op.block(2).unwrap();
        let m = 2 * 192;
        let z = cplus_approximant(&op, &x, k, m).unwrap();
        assert_eq!(z.support_len(), 1);
        let (idx, c) = &z.entries()[0];
        assert_eq!(*idx, host.end() - m);
        let expected = (&host.v * &host.product(host.size - m + 1, host.size - 1)).recip().unwrap();
        assert_eq!(*c, expected);
        // T^m z = e_0 − remainder at the start of the host block.
        let y = op.apply_power(&z, m).unwrap();
        assert_eq!(y.coeff(0), ExactScalar::one());
        assert_eq!(y.support_len(), 2);
    }

    #[test]
    fn orbit_sup_bound_dominates_sweep() {
        let op = op59();
        let host = op.block(3).unwrap();
        let y = FiniteVector::from_pairs([
            (host.start + 3, ExactScalar::ratio(1, 8)),
            (host.end() - 5, ExactScalar::ratio(-3, 4)),
            (op.b(1).unwrap() + 60, ExactScalar::one()),
        ]);
        let window = 300;
        let bound = orbit_sup_bound(&op, &y, window).unwrap();
        let mut v = y.clone();
        for _ in 0..=window {
            let n = v.norm_sq_l2();
            assert!(n <= bound.square(), "sweep exceeds the bound");
            v = op.apply(&v).unwrap();
        }
    }

    #[test]
    fn zero_target_gives_zero_vector() {
        let op = op59();
        let ans = oracle_cplus(&op, &OracleRequest::simple(FiniteVector::zero(), pow2(-3)), 4).unwrap();
        assert!(ans.z.is_zero());
        assert!(ans.residual_bound.is_zero());
    }

    #[test]
    fn norm_exponent_rounds_up() {
        assert_eq!(norm_exponent(0, 65), 0);
        assert_eq!(norm_exponent(64, 65), 65);
        assert_eq!(norm_exponent(1, 65), 2);
    }
}
