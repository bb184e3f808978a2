//! C-type operators: parameter families, lazy block geometry and exact
//! application.
//!
//! An operator of C-type acts on the basis `(e_k)` block by block.  Block `n`
//! is the index interval `[b_n, b_{n+1})`; inside it `T` is a weighted forward
//! shift, and the last basis vector of the block wraps around:
//!
//! ```text
//!     T e_k           = w_{k+1} e_{k+1}                         (b_n ≤ k < b_{n+1} − 1)
//!     T e_{b_{n+1}−1} = v_n e_{b_φ(n)} − W_n^{-1} e_{b_n}       (n ≥ 1)
//!     T e_{b_1−1}     = −W_0^{-1} e_0
//! ```
//!
//! where `W_n = ∏_{b_n < j < b_{n+1}} w_j` (an empty product is `1`).  The
//! structured families group blocks into *generations*: in generation `k` all
//! blocks share the size `Δ^(k)`, the coupling `v = 2^{−τ^(k)}` and (up to the
//! shift `l` of C₂-type families) the same weight layout.  Geometry is
//! therefore stored per generation, never per basis index, which keeps blocks
//! of size `10·2^{Ck}` cheap to address.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::closed::{int, Seq};
use crate::scalar::{BigExp, ExactScalar, UpperSum};
use crate::vector::{FiniteVector, SpaceExponent};

/// Failures of geometry or application.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CTypeError {
    #[error("basis index {index} lies beyond the materialized horizon (first excluded index {limit})")]
    BeyondHorizon { index: u64, limit: u64 },
    #[error("block {n} is beyond the horizon N_max = {n_max}")]
    BlockBeyondHorizon { n: u64, n_max: u64 },
    #[error("block geometry up to block {n} does not fit in 64-bit indices")]
    GeometryOverflow { n: u64 },
    #[error("parameter {name} is not available at generation {k}")]
    ParameterUnavailable { name: &'static str, k: u64 },
    #[error("offset {i} is outside 1..{size} for block {n}")]
    OffsetOutOfRange { n: u64, i: u64, size: u64 },
    #[error("invalid parameters: {0}")]
    InvalidSpec(String),
}

/// A parameter sequence indexed by the generation `k ≥ 1`.
///
/// Closed forms come from the preset registry and support symbolic limits;
/// tables are finite and never extrapolated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParamSeq {
    Closed(Seq),
    /// `values[k − 1]` is the value at generation `k`.
    Table(Vec<BigInt>),
}

impl ParamSeq {
    pub fn table<I: IntoIterator<Item = i64>>(values: I) -> Self {
        ParamSeq::Table(values.into_iter().map(BigInt::from).collect())
    }

    /// The value at generation `k ≥ 1`, if defined and integral.
    pub fn at(&self, k: u64) -> Option<BigInt> {
        match self {
            ParamSeq::Closed(s) => s.eval_int(k),
            ParamSeq::Table(t) => {
                if k == 0 {
                    None
                } else {
                    t.get((k - 1) as usize).cloned()
                }
            }
        }
    }

    pub fn closed(&self) -> Option<&Seq> {
        match self {
            ParamSeq::Closed(s) => Some(s),
            ParamSeq::Table(_) => None,
        }
    }

    /// Number of defined generations (`None` for closed forms).
    pub fn defined_len(&self) -> Option<u64> {
        match self {
            ParamSeq::Closed(_) => None,
            ParamSeq::Table(t) => Some(t.len() as u64),
        }
    }
}

/// Weight layout of a C₊-type family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CPlusVariant {
    /// `w_i = 2` for `i ≤ δ`, else `1`.
    One,
    /// `2 / 1 / ½ / 2 / 1` with boundaries `δ, Δ−3δ, Δ−2δ, Δ−δ`.
    Two,
}

/// A C₊-type family: generation `k` holds the blocks `[2^{k−1}, 2^k)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CPlusSpec {
    pub variant: CPlusVariant,
    pub tau: ParamSeq,
    pub delta: ParamSeq,
    pub big_delta: ParamSeq,
    pub b1: u64,
    /// Human-readable description of the closed form (or `"table"`).
    pub tag: String,
}

/// A C₂-type family with generations `J_k`, `#J_k = (f_k − a_k) Σ_{i<k} #J_i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct C2Spec {
    pub a: ParamSeq,
    pub f: ParamSeq,
    pub tau: ParamSeq,
    pub delta: ParamSeq,
    pub big_delta: ParamSeq,
    pub b1: u64,
    pub tag: String,
}

/// Fully explicit finite data for blocks `0..=N` where `b.len() = N + 2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenericSpec {
    pub b: Vec<u64>,
    /// `phi[n]` for `0 ≤ n ≤ N`.
    pub phi: Vec<u64>,
    /// `v[n]` for `0 ≤ n ≤ N` (`v[0]` is ignored).
    pub v: Vec<ExactScalar>,
    /// `w[j]` for `0 ≤ j < b_{N+1}` (`w[0]` is ignored).
    pub w: Vec<ExactScalar>,
}

/// The parameter families understood by the engine.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Family {
    CPlus(CPlusSpec),
    C2(C2Spec),
    Generic(GenericSpec),
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::CPlus(s) => match s.variant {
                CPlusVariant::One => "cplus1",
                CPlusVariant::Two => "cplus2",
            },
            Family::C2(_) => "c2",
            Family::Generic(_) => "generic",
        }
    }

    pub fn b1(&self) -> u64 {
        match self {
            Family::CPlus(s) => s.b1,
            Family::C2(s) => s.b1,
            Family::Generic(g) => g.b.get(1).copied().unwrap_or(1),
        }
    }

    /// `(τ, δ, Δ)` of a generation-structured family.
    pub fn generation_params(&self) -> Option<(&ParamSeq, &ParamSeq, &ParamSeq)> {
        match self {
            Family::CPlus(s) => Some((&s.tau, &s.delta, &s.big_delta)),
            Family::C2(s) => Some((&s.tau, &s.delta, &s.big_delta)),
            Family::Generic(_) => None,
        }
    }

    /// `δ^(k)` with the convention `δ^(0) = 0`.
    pub fn delta_at(&self, k: u64) -> Option<BigInt> {
        if k == 0 {
            return Some(BigInt::zero());
        }
        self.generation_params()?.1.at(k)
    }

    pub fn tau_at(&self, k: u64) -> Option<BigInt> {
        self.generation_params()?.0.at(k)
    }

    /// `Δ^(k)` with the convention `Δ^(0) = b_1`.
    pub fn big_delta_at(&self, k: u64) -> Option<BigInt> {
        if k == 0 {
            return Some(BigInt::from(self.b1()));
        }
        self.generation_params()?.2.at(k)
    }
}

/// One generation of blocks with arbitrary-precision geometry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerationBig {
    pub k: u64,
    /// First block index of the generation.
    pub first: BigInt,
    /// Number of blocks in the generation.
    pub count: BigInt,
    pub size: BigInt,
    /// `b_first`.
    pub start: BigInt,
    pub tau: BigInt,
    pub delta: BigInt,
    /// `a_k` and `f_k − a_k` for C₂-type families.
    pub a: BigInt,
    pub spread: BigInt,
}

fn param(seq: &ParamSeq, name: &'static str, k: u64) -> Result<BigInt, CTypeError> {
    seq.at(k).ok_or(CTypeError::ParameterUnavailable { name, k })
}

/// Enumerate generations `0, 1, …` until one starts beyond block `n_max`.
///
/// Generic families are reported as one generation per block.
pub fn generations(family: &Family, n_max: u64) -> Result<Vec<GenerationBig>, CTypeError> {
    let n_max_big = BigInt::from(n_max);
    let b1 = BigInt::from(family.b1());
    let mut gens = vec![GenerationBig {
        k: 0,
        first: BigInt::zero(),
        count: BigInt::one(),
        size: b1.clone(),
        start: BigInt::zero(),
        tau: BigInt::zero(),
        delta: BigInt::zero(),
        a: BigInt::zero(),
        spread: BigInt::one(),
    }];
    if let Family::Generic(g) = family {
        if g.b.len() < 2 || g.b.len() as u64 - 2 < n_max {
            return Err(CTypeError::InvalidSpec(format!(
                "explicit tables define blocks up to {} but N_max = {n_max}",
                g.b.len().saturating_sub(2)
            )));
        }
        gens.clear();
        for n in 0..=n_max as usize {
            gens.push(GenerationBig {
                k: n as u64,
                first: BigInt::from(n),
                count: BigInt::one(),
                size: BigInt::from(g.b[n + 1]) - BigInt::from(g.b[n]),
                start: BigInt::from(g.b[n]),
                tau: BigInt::zero(),
                delta: BigInt::zero(),
                a: BigInt::zero(),
                spread: BigInt::one(),
            });
        }
        return Ok(gens);
    }
    let mut k = 0u64;
    loop {
        let last = gens.last().expect("generation 0 exists");
        let next_first = &last.first + &last.count;
        if next_first > n_max_big {
            break;
        }
        k += 1;
        let next_start = &last.start + &last.count * &last.size;
        let (tau, delta, size, a, spread, count) = match family {
            Family::CPlus(s) => {
                let count = BigInt::one() << ((k - 1) as usize);
                (
                    param(&s.tau, "tau", k)?,
                    param(&s.delta, "delta", k)?,
                    param(&s.big_delta, "Delta", k)?,
                    BigInt::zero(),
                    BigInt::one(),
                    count,
                )
            }
            Family::C2(s) => {
                let a = param(&s.a, "a", k)?;
                let f = param(&s.f, "f", k)?;
                let spread = &f - &a;
                let count = &spread * &next_first;
                (param(&s.tau, "tau", k)?, param(&s.delta, "delta", k)?, param(&s.big_delta, "Delta", k)?, a, spread, count)
            }
            Family::Generic(_) => unreachable!(),
        };
        if !count.is_positive() {
            return Err(CTypeError::InvalidSpec(format!("generation {k} is empty")));
        }
        gens.push(GenerationBig { k, first: next_first, count, size, start: next_start, tau, delta, a, spread });
    }
    Ok(gens)
}

/// A maximal run of equal weights at offsets `lo ≤ i < hi` of a block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Zone {
    pub lo: u64,
    pub hi: u64,
    pub weight: ExactScalar,
    #[serde(skip)]
    log2: Option<i64>,
}

impl Zone {
    pub fn new(lo: u64, hi: u64, weight: ExactScalar) -> Self {
        let log2 = if weight.is_positive() && weight.is_signed_power_of_two() { weight.exponent().as_i64() } else { None };
        Zone { lo, hi, weight, log2 }
    }

    pub fn len(&self) -> u64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }
}

fn pow2_weight(e: i64) -> ExactScalar {
    ExactScalar::pow2(e)
}

fn push_zone(zones: &mut Vec<Zone>, lo: u64, hi: u64, log2: i64) {
    if hi > lo {
        zones.push(Zone::new(lo, hi, pow2_weight(log2)));
    }
}

/// Zone layout of a C₊-type block of size `size` (offsets `1..size`).
pub fn cplus_zones(variant: CPlusVariant, size: u64, delta: u64) -> Vec<Zone> {
    let mut z = Vec::new();
    match variant {
        CPlusVariant::One => {
            push_zone(&mut z, 1, delta + 1, 1);
            push_zone(&mut z, delta + 1, size, 0);
        }
        CPlusVariant::Two => {
            push_zone(&mut z, 1, delta + 1, 1);
            push_zone(&mut z, delta + 1, size - 3 * delta, 0);
            push_zone(&mut z, size - 3 * delta, size - 2 * delta, -1);
            push_zone(&mut z, size - 2 * delta, size - delta, 1);
            push_zone(&mut z, size - delta, size, 0);
        }
    }
    z
}

/// Zone layout of a C₂-type block with shift `a + l`.
pub fn c2_zones(size: u64, delta: u64, shift: u64) -> Vec<Zone> {
    let end = size - shift;
    let mut z = Vec::new();
    push_zone(&mut z, 1, delta + 1, 1);
    push_zone(&mut z, delta + 1, end - 2 * delta, 0);
    push_zone(&mut z, end - 2 * delta, end - delta, -1);
    push_zone(&mut z, end - delta, end, 1);
    push_zone(&mut z, end, size, 0);
    z
}

/// Zones of a block read off an explicit weight table.
fn table_zones(w: &[ExactScalar], start: u64, size: u64) -> Vec<Zone> {
    let mut z: Vec<Zone> = Vec::new();
    for i in 1..size {
        let wi = &w[(start + i) as usize];
        match z.last_mut() {
            Some(last) if last.weight == *wi => last.hi = i + 1,
            _ => z.push(Zone::new(i, i + 1, wi.clone())),
        }
    }
    z
}

/// Product of the weights at offsets `lo..=hi` of a zone list (`1` if empty).
pub fn zone_product(zones: &[Zone], lo: u64, hi: u64) -> ExactScalar {
    if hi < lo {
        return ExactScalar::one();
    }
    let mut log2: i128 = 0;
    let mut acc = ExactScalar::one();
    for z in zones {
        let a = z.lo.max(lo);
        let b = z.hi.min(hi + 1);
        if b <= a {
            continue;
        }
        let len = b - a;
        match z.log2 {
            Some(e) => log2 += e as i128 * len as i128,
            None => acc = &acc * &z.weight.pow_u64(len),
        }
    }
    let e = i64::try_from(log2).expect("weight exponent fits in 64 bits");
    acc.mul_pow2(&BigExp::from(e))
}

/// Everything needed to act on one block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Block {
    pub n: u64,
    pub generation: u64,
    pub start: u64,
    pub size: u64,
    pub phi: u64,
    /// The coupling `v_n` (zero for block 0).
    pub v: ExactScalar,
    /// Position of the block inside its generation (`l` for C₂ is this modulo the spread).
    pub position: u64,
    pub zones: Vec<Zone>,
}

impl Block {
    /// One past the last index, `b_{n+1}`.
    pub fn end(&self) -> u64 {
        self.start + self.size
    }

    /// `w_{b_n + i}` for `1 ≤ i < size`.
    pub fn weight(&self, i: u64) -> Result<ExactScalar, CTypeError> {
        if i == 0 || i >= self.size {
            return Err(CTypeError::OffsetOutOfRange { n: self.n, i, size: self.size });
        }
        let pos = self.zones.partition_point(|z| z.hi <= i);
        Ok(self.zones[pos].weight.clone())
    }

    fn weight_unchecked(&self, i: u64) -> &Zone {
        let pos = self.zones.partition_point(|z| z.hi <= i);
        &self.zones[pos]
    }

    /// `∏_{i=lo}^{hi} w_{b_n + i}` over block offsets.
    pub fn product(&self, lo: u64, hi: u64) -> ExactScalar {
        zone_product(&self.zones, lo, hi)
    }

    /// `W_n = ∏_{b_n < j < b_{n+1}} w_j`.
    pub fn full_product(&self) -> ExactScalar {
        self.product(1, self.size - 1)
    }

    /// Period of every basis vector of the block, `2(b_{n+1} − b_n)`.
    pub fn period(&self) -> u64 {
        2 * self.size
    }
}

/// Generation geometry in machine integers.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Generation {
    k: u64,
    first: u64,
    size: u64,
    start: u64,
    v: ExactScalar,
    delta: u64,
    a: u64,
    spread: u64,
    /// Zones shared by all blocks (not used by C₂ or generic families).
    zones: Vec<Zone>,
}

/// A C-type operator materialized up to block `N_max`.
///
/// Immutable after construction; all geometry is pre-filled.
#[derive(Debug, Clone)]
pub struct CTypeOperator {
    family: Family,
    n_max: u64,
    p: SpaceExponent,
    gens: Vec<Generation>,
    limit: u64,
}

fn to_u64(x: &BigInt, n: u64) -> Result<u64, CTypeError> {
    x.to_u64().ok_or(CTypeError::GeometryOverflow { n })
}

impl CTypeOperator {
    /// Materialize the geometry of blocks `0..=n_max`.
    ///
    /// Structural problems that would make application meaningless (empty or
    /// negative blocks, weight layouts that do not fit) are errors here; the
    /// full constraint check is [`validate`].
    pub fn new(family: Family, n_max: u64, p: SpaceExponent) -> Result<Self, CTypeError> {
        let big = generations(&family, n_max)?;
        let mut gens = Vec::with_capacity(big.len());
        for g in &big {
            let first = to_u64(&g.first, n_max)?;
            let size = to_u64(&g.size, first)?;
            let start = to_u64(&g.start, first)?;
            if size == 0 {
                return Err(CTypeError::InvalidSpec(format!("block {first} is empty")));
            }
            let v = if g.k == 0 || matches!(family, Family::Generic(_)) {
                ExactScalar::zero()
            } else {
                ExactScalar::pow2(BigExp::from_big(-&g.tau))
            };
            let delta = if g.k == 0 { 0 } else { to_u64(&g.delta, first)? };
            let a = to_u64(&g.a, first)?;
            let spread = to_u64(&g.spread, first)?;
            let zones = match &family {
                _ if g.k == 0 && !matches!(family, Family::Generic(_)) => {
                    let mut z = Vec::new();
                    push_zone(&mut z, 1, size, 0);
                    z
                }
                Family::CPlus(s) => {
                    let need = match s.variant {
                        CPlusVariant::One => delta + 1,
                        CPlusVariant::Two => 4 * delta + 1,
                    };
                    if delta.checked_mul(4).is_none() || need > size {
                        return Err(CTypeError::InvalidSpec(format!(
                            "generation {}: weight layout needs block size > {}, got {size}",
                            g.k,
                            need - 1
                        )));
                    }
                    cplus_zones(s.variant, size, delta)
                }
                Family::C2(_) => {
                    let f = a + spread;
                    if delta.checked_mul(4).is_none() || f + 4 * delta >= size {
                        return Err(CTypeError::InvalidSpec(format!(
                            "generation {}: need f + 4δ < Δ, got f = {f}, δ = {delta}, Δ = {size}",
                            g.k
                        )));
                    }
                    Vec::new()
                }
                Family::Generic(_) => Vec::new(),
            };
            gens.push(Generation { k: g.k, first, size, start, v, delta, a, spread, zones });
        }
        let last = big.last().expect("generation 0 exists");
        let limit_big = &last.start + (BigInt::from(n_max) - &last.first + 1u32) * &last.size;
        let limit = to_u64(&limit_big, n_max)?;
        if let Family::Generic(g) = &family {
            if (g.w.len() as u64) < limit || (g.v.len() as u64) <= n_max || (g.phi.len() as u64) <= n_max {
                return Err(CTypeError::InvalidSpec("explicit tables are shorter than the horizon".into()));
            }
            for n in 0..=n_max {
                if g.b[n as usize + 1] <= g.b[n as usize] {
                    return Err(CTypeError::InvalidSpec(format!("block {n} is empty")));
                }
                if n >= 1 && g.phi[n as usize] >= n {
                    return Err(CTypeError::InvalidSpec(format!("φ({n}) ≥ {n}")));
                }
            }
        }
        Ok(CTypeOperator { family, n_max, p, gens, limit })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn n_max(&self) -> u64 {
        self.n_max
    }

    pub fn p(&self) -> SpaceExponent {
        self.p
    }

    /// First basis index beyond the horizon, `b_{N_max+1}`.
    pub fn index_limit(&self) -> u64 {
        self.limit
    }

    fn gen_of_block(&self, n: u64) -> &Generation {
        let pos = self.gens.partition_point(|g| g.first <= n);
        &self.gens[pos - 1]
    }

    /// `b_n` for `0 ≤ n ≤ N_max + 1`.
    pub fn b(&self, n: u64) -> Result<u64, CTypeError> {
        if n == self.n_max + 1 {
            return Ok(self.limit);
        }
        if n > self.n_max {
            return Err(CTypeError::BlockBeyondHorizon { n, n_max: self.n_max });
        }
        let g = self.gen_of_block(n);
        Ok(g.start + (n - g.first) * g.size)
    }

    /// The block `n` with `b_n ≤ k < b_{n+1}`.
    pub fn block_of(&self, k: u64) -> Result<u64, CTypeError> {
        if k >= self.limit {
            return Err(CTypeError::BeyondHorizon { index: k, limit: self.limit });
        }
        let pos = self.gens.partition_point(|g| g.start <= k);
        let g = &self.gens[pos - 1];
        Ok(g.first + (k - g.start) / g.size)
    }

    /// Generation index of block `n`.
    pub fn generation_of(&self, n: u64) -> u64 {
        self.gen_of_block(n).k
    }

    /// First block of generation `k`, if materialized.
    pub fn generation_first(&self, k: u64) -> Option<u64> {
        match &self.family {
            Family::Generic(_) => (k <= self.n_max).then_some(k),
            _ => self.gens.get(k as usize).map(|g| g.first),
        }
    }

    /// Geometry, coupling and weight layout of block `n`.
    pub fn block(&self, n: u64) -> Result<Block, CTypeError> {
        if n > self.n_max {
            return Err(CTypeError::BlockBeyondHorizon { n, n_max: self.n_max });
        }
        let g = self.gen_of_block(n);
        let position = n - g.first;
        let start = g.start + position * g.size;
        let (phi, v, zones) = match &self.family {
            _ if n == 0 => (0, ExactScalar::zero(), self.block0_zones()),
            Family::CPlus(_) => (position, g.v.clone(), g.zones.clone()),
            Family::C2(_) => {
                let l = position % g.spread;
                (position / g.spread, g.v.clone(), c2_zones(g.size, g.delta, g.a + l))
            }
            Family::Generic(t) => (t.phi[n as usize], t.v[n as usize].clone(), table_zones(&t.w, start, g.size)),
        };
        Ok(Block { n, generation: g.k, start, size: g.size, phi, v, position, zones })
    }

    fn block0_zones(&self) -> Vec<Zone> {
        match &self.family {
            Family::Generic(t) => table_zones(&t.w, 0, self.gens[0].size),
            _ => self.gens[0].zones.clone(),
        }
    }

    /// `w_{b_n + i}` for `1 ≤ i < b_{n+1} − b_n`.
    pub fn weight_profile(&self, n: u64, i: u64) -> Result<ExactScalar, CTypeError> {
        self.block(n)?.weight(i)
    }

    fn check_support(&self, x: &FiniteVector) -> Result<(), CTypeError> {
        match x.max_index() {
            Some(k) if k >= self.limit => Err(CTypeError::BeyondHorizon { index: k, limit: self.limit }),
            _ => Ok(()),
        }
    }

    /// `T x`, exactly.
    pub fn apply(&self, x: &FiniteVector) -> Result<FiniteVector, CTypeError> {
        self.check_support(x)?;
        let mut out: Vec<(u64, ExactScalar)> = Vec::with_capacity(x.support_len() + 2);
        let mut current: Option<(Block, ExactScalar)> = None;
        for (k, c) in x.entries() {
            let fresh = match &current {
                Some((blk, _)) => *k >= blk.end(),
                None => true,
            };
            if fresh {
                let blk = self.block(self.block_of(*k)?)?;
                let inv = blk.full_product().recip().expect("weights are nonzero");
                current = Some((blk, inv));
            }
            let (blk, inv_w) = current.as_ref().expect("block set above");
            let o = k - blk.start;
            if o + 1 < blk.size {
                let z = blk.weight_unchecked(o + 1);
                let coeff = match z.log2 {
                    Some(e) => c.mul_pow2(&BigExp::from(e)),
                    None => c * &z.weight,
                };
                out.push((k + 1, coeff));
            } else {
                out.push((blk.start, -(c * inv_w)));
                if blk.n >= 1 {
                    out.push((self.b(blk.phi)?, c * &blk.v));
                }
            }
        }
        Ok(FiniteVector::from_pairs(out))
    }

    /// `T^j x`, exactly, by jumping along block orbits.
    ///
    /// Each coordinate `c e_k` in block `n` is advanced in closed form: the
    /// step count is reduced modulo the block period `2Δb_n`, the weight
    /// product up to the block end is taken zone by zone, and a wrap-around
    /// spawns the two contributions of the last case of the definition, which
    /// are advanced in turn.  Contributions that land on the same
    /// `(index, remaining steps)` pair are merged, so the work is bounded by the
    /// number of distinct coupling chains, not by `j`.
    pub fn apply_power(&self, x: &FiniteVector, j: u64) -> Result<FiniteVector, CTypeError> {
        self.check_support(x)?;
        if j == 0 || x.is_zero() {
            return Ok(x.clone());
        }
        let mut blocks: HashMap<u64, Block> = HashMap::new();
        let mut work: BTreeMap<(u64, u64, u64), ExactScalar> = BTreeMap::new();
        for (k, c) in x.entries() {
            let n = self.block_of(*k)?;
            let slot = work.entry((n, *k, j)).or_default();
            *slot = &*slot + c;
        }
        let mut out: Vec<(u64, ExactScalar)> = Vec::new();
        while let Some(((n, k, r), c)) = work.pop_last() {
            if c.is_zero() {
                continue;
            }
            let blk = match blocks.get(&n) {
                Some(b) => b,
                None => {
                    let b = self.block(n)?;
                    blocks.entry(n).or_insert(b)
                }
            };
            let r = r % blk.period();
            let o = k - blk.start;
            if o + r < blk.size {
                out.push((k + r, &c * &blk.product(o + 1, o + r)));
                continue;
            }
            let to_end = blk.size - 1 - o;
            let at_end = &c * &blk.product(o + 1, blk.size - 1);
            let rest = r - to_end - 1;
            let inv_w = blk.full_product().recip().expect("weights are nonzero");
            let (start, phi, v, n_blk) = (blk.start, blk.phi, blk.v.clone(), blk.n);
            let own = work.entry((n, start, rest)).or_default();
            *own = &*own - &(&at_end * &inv_w);
            if n_blk >= 1 {
                let target = self.b(phi)?;
                let slot = work.entry((phi, target, rest)).or_default();
                *slot = &*slot + &(&at_end * &v);
            }
        }
        Ok(FiniteVector::from_pairs(out))
    }

    /// Period bound of `x`: lcm of `2Δb_n` over the blocks meeting its support.
    pub fn period_of(&self, x: &FiniteVector) -> Result<u64, CTypeError> {
        self.check_support(x)?;
        let mut acc = 1u64;
        let mut last_block = None;
        for (k, _) in x.entries() {
            let n = self.block_of(*k)?;
            if last_block == Some(n) {
                continue;
            }
            last_block = Some(n);
            let per = 2 * self.gen_of_block(n).size;
            acc = acc.lcm(&per);
        }
        Ok(acc)
    }

    /// Operator-norm upper bound `max(sup|w|, sup W_n^{-1}) + Σ_{n ≤ N_max} |v_n|`.
    ///
    /// `T` is a weighted permutation on each block plus the rank-one couplings,
    /// so this is a bound for the operator compressed to the horizon; the
    /// coupling tail beyond `N_max` is accounted separately by callers.
    pub fn norm_bound(&self) -> ExactScalar {
        let mut sup = ExactScalar::one();
        let mut vsum = UpperSum::new(128);
        for n in self.representative_blocks() {
            let blk = self.block(n).expect("representative blocks are in range");
            for z in &blk.zones {
                sup = ExactScalar::max(&sup, &z.weight.abs());
            }
            let inv = blk.full_product().abs().recip().expect("weights are nonzero");
            sup = ExactScalar::max(&sup, &inv);
        }
        for (count, v) in self.coupling_counts() {
            vsum.add(&(&ExactScalar::from_int(count) * &v.abs()));
        }
        &sup + vsum.value()
    }

    /// Blocks whose zone layouts cover every layout up to the horizon.
    fn representative_blocks(&self) -> Vec<u64> {
        let mut out = Vec::new();
        for (idx, g) in self.gens.iter().enumerate() {
            let next_first = self.gens.get(idx + 1).map(|h| h.first).unwrap_or(self.n_max + 1);
            match &self.family {
                Family::Generic(_) => out.push(g.first),
                Family::CPlus(_) => out.push(g.first),
                Family::C2(_) => {
                    let last = (next_first - 1).min(self.n_max);
                    let distinct = g.spread.min(last - g.first + 1);
                    out.extend((0..distinct).map(|l| g.first + l));
                }
            }
        }
        out
    }

    /// `(number of blocks, v)` per generation within the horizon.
    fn coupling_counts(&self) -> Vec<(u64, ExactScalar)> {
        let mut out = Vec::new();
        for (idx, g) in self.gens.iter().enumerate() {
            if g.first == 0 {
                continue;
            }
            let next_first = self.gens.get(idx + 1).map(|h| h.first).unwrap_or(self.n_max + 1);
            let count = next_first.min(self.n_max + 1) - g.first;
            let v = match &self.family {
                Family::Generic(t) => t.v[g.first as usize].clone(),
                _ => g.v.clone(),
            };
            out.push((count, v));
        }
        out
    }
}

/// One violated constraint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// Offending block index `n` (first block of the generation for
    /// generation-level constraints).
    pub n: u64,
    pub constraint: String,
    pub detail: String,
}

/// Outcome of [`validate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub family: String,
    pub n_max: u64,
    pub b1: u64,
    pub violations: Vec<Violation>,
    /// Upper bound for `Σ_{1 ≤ n ≤ N_max} |v_n|`.
    pub coupling_sum: ExactScalar,
    pub coupling_sum_exact: bool,
    /// `min_{n ≤ N_max} ∏_{b_n < j < b_{n+1}} |w_j|`.
    pub weight_product_inf: ExactScalar,
    /// Ranges `[lo, hi]` of blocks `l` (with `b_{l+1} ≤ b_{N_max}`) that no
    /// materialized block couples into — a horizon artefact, not a violation.
    pub unreached_phi_targets: Vec<(u64, u64)>,
    /// Observations that are not constraint violations on the prefix.
    pub notes: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check the defining constraints on blocks `0..=n_max`.
pub fn validate(family: &Family, n_max: u64) -> Result<ValidationReport, CTypeError> {
    let gens = generations(family, n_max)?;
    let mut violations = Vec::new();
    let mut notes = Vec::new();
    let mut vsum = UpperSum::new(128);
    let mut w_inf: Option<ExactScalar> = None;
    let n_max_big = BigInt::from(n_max);
    let mut unreached = Vec::new();
    let mut record_inf = |p: ExactScalar| {
        let p = p.abs();
        w_inf = Some(match w_inf.take() {
            Some(cur) => ExactScalar::min(&cur, &p),
            None => p,
        });
    };

    if let Family::Generic(t) = family {
        if t.b[0] != 0 {
            violations.push(Violation { n: 0, constraint: "b_0 = 0".into(), detail: format!("b_0 = {}", t.b[0]) });
        }
        let mut reached = vec![false; n_max as usize + 1];
        for n in 0..=n_max as usize {
            let size = t.b[n + 1] as i128 - t.b[n] as i128;
            if size <= 0 {
                violations.push(Violation {
                    n: n as u64,
                    constraint: "b strictly increasing".into(),
                    detail: format!("b_{} = {} ≤ b_{n} = {}", n + 1, t.b[n + 1], t.b[n]),
                });
                continue;
            }
            let phi = t.phi[n] as usize;
            if n == 0 && phi != 0 {
                violations.push(Violation { n: 0, constraint: "φ(0) = 0".into(), detail: format!("φ(0) = {phi}") });
            }
            if n >= 1 {
                if phi >= n {
                    violations.push(Violation { n: n as u64, constraint: "φ(n) < n".into(), detail: format!("φ({n}) = {phi}") });
                } else {
                    reached[phi] = true;
                    let target = t.b[phi + 1] as i128 - t.b[phi] as i128;
                    if target <= 0 || size % (2 * target) != 0 {
                        violations.push(Violation {
                            n: n as u64,
                            constraint: "divisibility".into(),
                            detail: format!("b_{}−b_{n} = {size} is not a multiple of 2·{target}", n + 1),
                        });
                    }
                }
                if t.v[n].is_zero() {
                    violations.push(Violation { n: n as u64, constraint: "v_n ≠ 0".into(), detail: "v_n = 0".into() });
                }
                vsum.add(&t.v[n].abs());
            }
            let mut prod = ExactScalar::one();
            for j in t.b[n] + 1..t.b[n + 1] {
                let w = &t.w[j as usize];
                if w.is_zero() {
                    violations.push(Violation { n: n as u64, constraint: "weights bounded below".into(), detail: format!("w_{j} = 0") });
                }
                prod = &prod * w;
            }
            record_inf(prod);
        }
        // Blocks l with b_{l+1} ≤ b_{N_max}, i.e. l < N_max.
        let mut l = 0usize;
        while l < n_max as usize {
            if !reached[l] {
                let lo = l;
                while l < n_max as usize && !reached[l] {
                    l += 1;
                }
                unreached.push((lo as u64, l as u64 - 1));
            } else {
                l += 1;
            }
        }
    } else {
        let variant = match family {
            Family::CPlus(s) => Some(s.variant),
            _ => None,
        };
        let mut max_phi_target = BigInt::zero();
        record_inf(ExactScalar::one());
        for (idx, g) in gens.iter().enumerate().skip(1) {
            let first = g.first.to_u64().expect("first block ≤ N_max");
            let last_in = (&g.first + &g.count - 1u32).min(n_max_big.clone());
            let covered = &last_in - &g.first + 1u32;
            let k = g.k;
            if !g.size.is_positive() {
                violations.push(Violation {
                    n: first,
                    constraint: "b strictly increasing".into(),
                    detail: format!("Δ^({k}) = {}", g.size),
                });
                continue;
            }
            match variant {
                Some(CPlusVariant::One) if g.delta >= g.size => violations.push(Violation {
                    n: first,
                    constraint: "δ < Δ".into(),
                    detail: format!("δ^({k}) = {} ≥ Δ^({k}) = {}", g.delta, g.size),
                }),
                Some(CPlusVariant::Two) if BigInt::from(4) * &g.delta >= g.size => violations.push(Violation {
                    n: first,
                    constraint: "4δ < Δ".into(),
                    detail: format!("4δ^({k}) = {} ≥ Δ^({k}) = {}", BigInt::from(4) * &g.delta, g.size),
                }),
                _ => {}
            }
            if matches!(family, Family::C2(_)) {
                let f = &g.a + &g.spread;
                if g.a.is_negative() || !g.spread.is_positive() {
                    violations.push(Violation {
                        n: first,
                        constraint: "0 ≤ a < f".into(),
                        detail: format!("a_{k} = {}, f_{k} = {f}", g.a),
                    });
                }
                if f.clone() + BigInt::from(4) * &g.delta >= g.size {
                    violations.push(Violation {
                        n: first,
                        constraint: "f < Δ − 4δ".into(),
                        detail: format!("f_{k} = {f}, Δ^({k}) − 4δ^({k}) = {}", &g.size - BigInt::from(4) * &g.delta),
                    });
                }
            }
            if g.delta.is_negative() {
                violations.push(Violation { n: first, constraint: "δ ≥ 0".into(), detail: format!("δ^({k}) = {}", g.delta) });
            }
            if idx >= 2 {
                let prev = &gens[idx - 1];
                if g.tau <= prev.tau {
                    violations.push(Violation {
                        n: first,
                        constraint: "τ strictly increasing".into(),
                        detail: format!("τ^({k}) = {} ≤ τ^({}) = {}", g.tau, k - 1, prev.tau),
                    });
                }
                if g.delta <= prev.delta {
                    violations.push(Violation {
                        n: first,
                        constraint: "δ strictly increasing".into(),
                        detail: format!("δ^({k}) = {} ≤ δ^({}) = {}", g.delta, k - 1, prev.delta),
                    });
                }
            }
            // φ maps this generation's blocks onto a prefix of the earlier ones.
            let phi_max = (&covered - 1u32) / &g.spread;
            if phi_max > max_phi_target {
                max_phi_target = phi_max.clone();
            }
            for h in gens.iter().take(idx) {
                if h.first > phi_max {
                    break;
                }
                let twice = BigInt::from(2) * &h.size;
                if !twice.is_positive() || !(&g.size % &twice).is_zero() {
                    let n = &g.first + &h.first * &g.spread;
                    violations.push(Violation {
                        n: n.to_u64().unwrap_or(first),
                        constraint: "divisibility".into(),
                        detail: format!("Δ^({k}) = {} is not a multiple of 2·{}", g.size, h.size),
                    });
                }
            }
            // Couplings v = 2^{−τ}, one per block.
            if let Some(count) = covered.to_u64() {
                let v = ExactScalar::pow2(BigExp::from_big(-&g.tau));
                vsum.add(&(&ExactScalar::from_int(count) * &v));
            }
            record_inf(ExactScalar::pow2(BigExp::from_big(g.delta.clone())));
        }
        // Blocks l < N_max not reached by φ on [0, N_max].
        let reach_end = &max_phi_target + 1u32;
        if reach_end < n_max_big {
            unreached.push((reach_end.to_u64().expect("below N_max"), n_max - 1));
        }
        if let Family::CPlus(s) = family {
            if let Some(note) = coupling_summability_note(s) {
                notes.push(note);
            }
        }
    }
    if !vsum.is_exact() {
        notes.push("coupling sum rounded upward".into());
    }
    if !unreached.is_empty() {
        notes.push("φ⁻¹(l) ∩ [0, N_max] is empty for some l: horizon-limited, not a violation".into());
    }
    Ok(ValidationReport {
        family: family.name().into(),
        n_max,
        b1: family.b1(),
        violations,
        coupling_sum: vsum.value().clone(),
        coupling_sum_exact: vsum.is_exact(),
        weight_product_inf: w_inf.unwrap_or_else(ExactScalar::one),
        unreached_phi_targets: unreached,
        notes,
    })
}

/// For closed-form C₊ families, decide whether `Σ_k 2^{k−1}·2^{−τ^(k)}` is
/// finite: convergent when `τ^(k+1) − τ^(k) ≥ 2` eventually, divergent when
/// `τ^(k) − k` stays bounded above.
fn coupling_summability_note(spec: &CPlusSpec) -> Option<String> {
    let tau = spec.tau.closed()?;
    let growth = tau.shift(1)?.sub(tau);
    if growth.eventually_ge(&int(2)).is_some() {
        return None;
    }
    let excess = tau.sub(&Seq::k());
    if let Some(bound) = (0..=64).find(|&c| excess.eventually_le(&int(c)).is_some()) {
        return Some(format!(
            "Σ|v_n| diverges: τ^(k) ≤ k + {bound} eventually, so each generation contributes at least 2^{{-{}}}",
            bound + 1
        ));
    }
    Some("summability of Σ|v_n| is not decided by the closed form".into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed::{pow2_rat, Term};

    fn example55(c: i64) -> Family {
        let base = pow2_rat(c);
        Family::CPlus(CPlusSpec {
            variant: CPlusVariant::One,
            tau: ParamSeq::Closed(Seq::from_terms([Term::geometric(int(1), base.clone())])),
            delta: ParamSeq::Closed(Seq::from_terms([Term::geometric(int(2), base.clone())])),
            big_delta: ParamSeq::Closed(Seq::from_terms([Term::geometric(int(10), base)])),
            b1: 1,
            tag: "test".into(),
        })
    }

    fn stepped(op: &CTypeOperator, x: &FiniteVector, j: u64) -> FiniteVector {
        let mut y = x.clone();
        for _ in 0..j {
            y = op.apply(&y).unwrap();
        }
        y
    }

    #[test]
    fn geometry_of_example55_c1() {
        let op = CTypeOperator::new(example55(1), 7, SpaceExponent::L2).unwrap();
        // Δ^(1) = 20, Δ^(2) = 40 (two blocks), Δ^(3) = 80 (four blocks).
        assert_eq!(op.b(1).unwrap(), 1);
        assert_eq!(op.b(2).unwrap(), 21);
        assert_eq!(op.b(3).unwrap(), 61);
        assert_eq!(op.b(4).unwrap(), 101);
        assert_eq!(op.index_limit(), 101 + 4 * 80);
        assert_eq!(op.block_of(0).unwrap(), 0);
        assert_eq!(op.block_of(1).unwrap(), 1);
        assert_eq!(op.block_of(21).unwrap(), 2);
        assert_eq!(op.block_of(20).unwrap(), 1);
        assert!(op.block_of(op.index_limit()).is_err());
        let blk = op.block(5).unwrap();
        assert_eq!((blk.phi, blk.size), (1, 80));
        assert_eq!(blk.full_product(), ExactScalar::pow2(16));
    }

    #[test]
    fn apply_cases() {
        let op = CTypeOperator::new(example55(1), 7, SpaceExponent::L2).unwrap();
        assert_eq!(op.apply(&FiniteVector::basis(0)).unwrap(), FiniteVector::basis(0).scale(&(-ExactScalar::one())));
        assert_eq!(op.apply(&FiniteVector::basis(1)).unwrap(), FiniteVector::basis(2).scale(&ExactScalar::from_int(2)));
        // Last index of block 3 (b_3 = 61, size 40) wraps to b_3 and b_φ(3) = b_1.
        let y = op.apply(&FiniteVector::basis(100)).unwrap();
        // v_3 = 2^{−τ^(2)} = 2^{−4} and W_3 = 2^{δ^(2)} = 2^8.
        let expect = FiniteVector::from_pairs([(1, ExactScalar::pow2(-4)), (61, -ExactScalar::pow2(-8))]);
        assert_eq!(y, expect);
    }

    #[test]
    fn apply_power_matches_stepping() {
        let op = CTypeOperator::new(example55(1), 7, SpaceExponent::L2).unwrap();
        let x = FiniteVector::from_pairs([(0, ExactScalar::one()), (30, ExactScalar::ratio(3, 4)), (150, ExactScalar::from_int(-5))]);
        let mut y = x.clone();
        for j in 0..400u64 {
            assert_eq!(op.apply_power(&x, j).unwrap(), y, "j = {j}");
            y = op.apply(&y).unwrap();
        }
    }

    #[test]
    fn period_and_identity_5() {
        let op = CTypeOperator::new(example55(1), 7, SpaceExponent::L2).unwrap();
        for n in 1..=7 {
            let blk = op.block(n).unwrap();
            let e = FiniteVector::basis(blk.start);
            let y = stepped(&op, &e, blk.size);
            let expect =
                FiniteVector::from_pairs([(op.b(blk.phi).unwrap(), &blk.v * &blk.full_product()), (blk.start, -ExactScalar::one())]);
            assert_eq!(y, expect);
            assert_eq!(stepped(&op, &e, 2 * blk.size), e);
        }
    }

    #[test]
    fn c2_layout_and_telescoping() {
        let fam = Family::C2(C2Spec {
            a: ParamSeq::table([1, 2]),
            f: ParamSeq::table([3, 4]),
            tau: ParamSeq::table([1, 2]),
            delta: ParamSeq::table([1, 2]),
            big_delta: ParamSeq::table([8, 32]),
            b1: 1,
            tag: "table".into(),
        });
        // #J_1 = 2, #J_2 = 2·3 = 6.
        let op = CTypeOperator::new(fam.clone(), 8, SpaceExponent::L2).unwrap();
        assert_eq!(op.generation_of(2), 1);
        assert_eq!(op.generation_of(3), 2);
        for n in 3..=8 {
            let blk = op.block(n).unwrap();
            assert_eq!(blk.full_product(), ExactScalar::pow2(2));
            assert_eq!(blk.phi, (n - 3) / 2);
            let l = (n - 3) % 2;
            // Fifth zone starts at Δ − a − l.
            assert_eq!(blk.weight(32 - 2 - l - 1).unwrap(), ExactScalar::pow2(1));
            assert_eq!(blk.weight(32 - 2 - l).unwrap(), ExactScalar::one());
        }
        let report = validate(&fam, 8).unwrap();
        assert!(report.is_valid(), "{:?}", report.violations);
    }

    #[test]
    fn validation_reports_offenders() {
        let bad = Family::Generic(GenericSpec {
            b: vec![0, 1, 4, 6],
            phi: vec![0, 0, 0],
            v: vec![ExactScalar::zero(), ExactScalar::one(), ExactScalar::one()],
            w: vec![ExactScalar::one(); 6],
        });
        let r = validate(&bad, 2).unwrap();
        assert_eq!(r.violations.len(), 1);
        assert_eq!((r.violations[0].n, r.violations[0].constraint.as_str()), (1, "divisibility"));

        let narrow = Family::CPlus(CPlusSpec {
            variant: CPlusVariant::Two,
            tau: ParamSeq::table([1, 2]),
            delta: ParamSeq::table([2, 3]),
            big_delta: ParamSeq::table([8, 32]),
            b1: 1,
            tag: "table".into(),
        });
        let r = validate(&narrow, 3).unwrap();
        assert!(r.violations.iter().any(|v| v.constraint == "4δ < Δ" && v.n == 1));
    }

    #[test]
    fn example55_is_valid_with_horizon_note() {
        let r = validate(&example55(1), 31).unwrap();
        assert!(r.is_valid(), "{:?}", r.violations);
        assert_eq!(r.weight_product_inf, ExactScalar::one());
        assert_eq!(r.unreached_phi_targets, vec![(16, 30)]);
    }
}
