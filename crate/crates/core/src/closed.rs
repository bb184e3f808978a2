//! Closed-form integer sequences and their asymptotics.
//!
//! Parameter families such as `τ^(k) = 2^{Ck}`, `δ^(k) = 2^{Ck²+1}` or
//! `a_k = k·δ^(k)` are finite sums of *exponential-polynomial terms*
//!
//! ```text
//!     c · k^a · B^k · 2^{p(k)}
//! ```
//!
//! with a rational coefficient `c`, an integer power `a`, a positive rational
//! base `B` and a rational polynomial `p`.  A [`Seq`] is such a sum, optionally
//! with a few overridden initial values.  Everything here is exact: values are
//! big rationals, growth classes are compared exactly, and
//! [`Seq::eventually_le`] returns an index from which an inequality is
//! *proved* to hold, not merely observed.
//!
//! The proof behind `eventually_le` is a dominance argument: after merging
//! like terms, the fastest-growing term `t_d` must have a negative coefficient,
//! and every other term `t_i` satisfies `|t_i(k)| ≤ |t_d(k)|/(2n)` from an
//! explicit index on.  That index is found for each single-term ratio
//! `|t_i/t_d|`, which decays to zero, by first locating the point after which
//! the ratio is monotone (a polynomial sign argument on its log-increment) and
//! then searching for the first index below the threshold.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Shorthand for a big rational from two machine integers.
pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Shorthand for an integral big rational.
pub fn int(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// `2^e` as a big rational (`e` may be negative).
pub fn pow2_rat(e: i64) -> BigRational {
    if e >= 0 {
        BigRational::from_integer(BigInt::one() << (e as usize))
    } else {
        BigRational::new(BigInt::one(), BigInt::one() << ((-e) as usize))
    }
}

fn rat_pow(x: &BigRational, e: i64) -> BigRational {
    if e >= 0 {
        num_traits::pow(x.clone(), e as usize)
    } else {
        num_traits::pow(x.recip(), (-e) as usize)
    }
}

/// If `x = 2^m` exactly, return `m`.
pub fn exact_log2(x: &BigRational) -> Option<i64> {
    if !x.is_positive() {
        return None;
    }
    let (n, d) = (x.numer(), x.denom());
    let is_pow2 = |v: &BigInt| v.is_positive() && (v & (v - BigInt::one())).is_zero();
    if d.is_one() && is_pow2(n) {
        return Some(n.bits() as i64 - 1);
    }
    if n.is_one() && is_pow2(d) {
        return Some(-(d.bits() as i64 - 1));
    }
    None
}

/// Rational bounds `lo ≤ log2(x) ≤ hi` with `hi − lo ≤ 2^{-prec}` (exact when
/// `x` is a power of two).  Both bounds are verified by exact integer powers.
pub fn log2_bounds(x: &BigRational, prec: u32) -> (BigRational, BigRational) {
    assert!(x.is_positive(), "log2 of a non-positive number");
    if let Some(m) = exact_log2(x) {
        return (int(m), int(m));
    }
    let q: i64 = 1 << prec.min(16);
    let approx = big_rational_log2(x);
    let mut lo = ((approx * q as f64).floor() as i64) - 1;
    let mut hi = ((approx * q as f64).ceil() as i64) + 1;
    // Verify 2^{lo/q} ≤ x ≤ 2^{hi/q} exactly: compare x^q with 2^{lo}, 2^{hi}.
    let xq = rat_pow(x, q);
    while pow2_rat(lo) > xq {
        lo -= 1;
    }
    while pow2_rat(hi) < xq {
        hi += 1;
    }
    // Tighten towards each other while the certificates still hold.
    while lo + 1 < hi && pow2_rat(lo + 1) <= xq {
        lo += 1;
    }
    while hi - 1 > lo && pow2_rat(hi - 1) >= xq {
        hi -= 1;
    }
    (rat(lo, q), rat(hi, q))
}

fn big_rational_log2(x: &BigRational) -> f64 {
    let nb = x.numer().bits() as i64;
    let db = x.denom().bits() as i64;
    let ns = (nb - 60).max(0);
    let ds = (db - 60).max(0);
    let n = (x.numer() >> ns as usize).to_f64().unwrap();
    let d = (x.denom() >> ds as usize).to_f64().unwrap();
    n.log2() - d.log2() + (ns - ds) as f64
}

fn binomial(n: u32, k: u32) -> BigInt {
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

fn frac_floor(x: &BigRational) -> (BigInt, BigRational) {
    let fl = x.floor().to_integer();
    let frac = x - BigRational::from_integer(fl.clone());
    (fl, frac)
}

/// A rational polynomial in `k`, coefficients indexed by degree.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Poly(pub Vec<BigRational>);

impl Poly {
    pub fn new(mut c: Vec<BigRational>) -> Self {
        while c.last().is_some_and(|x| x.is_zero()) {
            c.pop();
        }
        Poly(c)
    }

    pub fn coeff(&self, d: usize) -> BigRational {
        self.0.get(d).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn degree(&self) -> Option<usize> {
        if self.0.is_empty() {
            None
        } else {
            Some(self.0.len() - 1)
        }
    }

    pub fn eval(&self, k: &BigRational) -> BigRational {
        self.0.iter().rev().fold(BigRational::zero(), |acc, c| acc * k + c)
    }

    pub fn add(&self, o: &Poly) -> Poly {
        let n = self.0.len().max(o.0.len());
        Poly::new((0..n).map(|d| self.coeff(d) + o.coeff(d)).collect())
    }

    pub fn neg(&self) -> Poly {
        Poly(self.0.iter().map(|c| -c).collect())
    }

    pub fn sub(&self, o: &Poly) -> Poly {
        self.add(&o.neg())
    }

    /// `p(k + s)`.
    pub fn shift(&self, s: i64) -> Poly {
        let mut out = vec![BigRational::zero(); self.0.len()];
        let s = int(s);
        for (d, c) in self.0.iter().enumerate() {
            for (j, o) in out.iter_mut().enumerate().take(d + 1) {
                let b = BigRational::from_integer(binomial(d as u32, j as u32));
                *o = &*o + c * b * rat_pow(&s, (d - j) as i64);
            }
        }
        Poly::new(out)
    }

    /// An integer `k₁ ≥ 1` with `p(k) < 0` for every real `k ≥ k₁`, when the
    /// leading coefficient is negative (Cauchy's root bound).
    pub fn negative_from(&self) -> Option<u64> {
        let d = self.degree()?;
        let lead = self.coeff(d);
        if !lead.is_negative() {
            return None;
        }
        if d == 0 {
            return Some(1);
        }
        let mut m = BigRational::zero();
        for i in 0..d {
            let r = (self.coeff(i) / &lead).abs();
            if r > m {
                m = r;
            }
        }
        let bound = (m + BigRational::one()).ceil().to_integer() + BigInt::one();
        Some(bound.to_u64().unwrap_or(u64::MAX).max(1))
    }
}

/// Limit of a sequence (or of a ratio of sequences).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Limit {
    NegInf,
    Finite(BigRational),
    /// A finite limit that is not rational (it carries a fractional power of two).
    Irrational(u64),
    PosInf,
}

impl Limit {
    pub fn is_pos_inf(&self) -> bool {
        matches!(self, Limit::PosInf)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Limit::Finite(x) if x.is_zero())
    }

    /// Approximate value (infinite limits map to `±inf`).
    pub fn approx(&self) -> f64 {
        match self {
            Limit::NegInf => f64::NEG_INFINITY,
            Limit::PosInf => f64::INFINITY,
            Limit::Finite(x) => x.to_f64().unwrap_or(f64::NAN),
            Limit::Irrational(bits) => f64::from_bits(*bits),
        }
    }
}

impl fmt::Display for Limit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Limit::NegInf => f.write_str("-inf"),
            Limit::PosInf => f.write_str("+inf"),
            Limit::Finite(x) => write!(f, "{x}"),
            Limit::Irrational(b) => write!(f, "~{}", f64::from_bits(*b)),
        }
    }
}

/// One exponential-polynomial term `c · k^a · B^k · 2^{p(k)}`.
///
/// Canonical form keeps the constant and linear coefficients of `p` in
/// `[0, 1)`, folding their integer parts into `c` and `B`; two terms then
/// have the same growth class exactly when they have the same shape.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Term {
    pub coeff: BigRational,
    pub k_pow: i32,
    pub base: BigRational,
    pub exp2: Poly,
}

impl Term {
    pub fn new(coeff: BigRational, k_pow: i32, base: BigRational, exp2: Poly) -> Self {
        assert!(base.is_positive(), "term base must be positive");
        Term { coeff, k_pow, base, exp2 }.canonical()
    }

    pub fn constant(c: BigRational) -> Self {
        Term::new(c, 0, BigRational::one(), Poly::default())
    }

    /// `c · k^a`.
    pub fn monomial(c: BigRational, a: i32) -> Self {
        Term::new(c, a, BigRational::one(), Poly::default())
    }

    /// `c · B^k`.
    pub fn geometric(c: BigRational, base: BigRational) -> Self {
        Term::new(c, 0, base, Poly::default())
    }

    /// `c · 2^{p(k)}`.
    pub fn pow2_poly(c: BigRational, p: Poly) -> Self {
        Term::new(c, 0, BigRational::one(), p)
    }

    fn canonical(mut self) -> Self {
        if self.coeff.is_zero() {
            return Term { coeff: BigRational::zero(), k_pow: 0, base: BigRational::one(), exp2: Poly::default() };
        }
        let mut c = self.exp2.0.clone();
        c.resize(c.len().max(2), BigRational::zero());
        let (i0, f0) = frac_floor(&c[0]);
        let (i1, f1) = frac_floor(&c[1]);
        c[0] = f0;
        c[1] = f1;
        let i0 = i0.to_i64().expect("exponent constant out of range");
        let i1 = i1.to_i64().expect("exponent slope out of range");
        self.coeff *= pow2_rat(i0);
        self.base *= pow2_rat(i1);
        self.exp2 = Poly::new(c);
        self
    }

    pub fn is_zero(&self) -> bool {
        self.coeff.is_zero()
    }

    fn same_shape(&self, o: &Term) -> bool {
        self.k_pow == o.k_pow && self.base == o.base && self.exp2 == o.exp2
    }

    /// Compare growth classes (ignoring coefficients and the fractional constant).
    pub fn growth_cmp(&self, o: &Term) -> Ordering {
        let top = self.exp2.0.len().max(o.exp2.0.len());
        for d in (2..top).rev() {
            match self.exp2.coeff(d).cmp(&o.exp2.coeff(d)) {
                Ordering::Equal => continue,
                other => return other,
            }
        }
        match cmp_linear_factor(&self.base, &self.exp2.coeff(1), &o.base, &o.exp2.coeff(1)) {
            Ordering::Equal => self.k_pow.cmp(&o.k_pow),
            other => other,
        }
    }

    fn constant_class(&self) -> Term {
        Term::constant(BigRational::one())
    }

    /// Exact value at `k` (`None` if the exponent is not an integer there).
    pub fn eval(&self, k: u64) -> Option<BigRational> {
        if self.coeff.is_zero() {
            return Some(BigRational::zero());
        }
        let kq = BigRational::from_integer(BigInt::from(k));
        let e = self.exp2.eval(&kq);
        if !e.is_integer() {
            return None;
        }
        let e = e.to_integer().to_i64()?;
        if k == 0 && self.k_pow < 0 {
            return None;
        }
        let kp = rat_pow(&kq, self.k_pow as i64);
        Some(&self.coeff * kp * rat_pow(&self.base, k as i64) * pow2_rat(e))
    }

    /// Approximate `log2 |t(k)|`.
    pub fn log2_abs_approx(&self, k: u64) -> f64 {
        let kq = BigRational::from_integer(BigInt::from(k));
        big_rational_log2(&self.coeff.abs())
            + self.k_pow as f64 * (k as f64).log2()
            + k as f64 * big_rational_log2(&self.base)
            + self.exp2.eval(&kq).to_f64().unwrap_or(f64::INFINITY)
    }

    pub fn scale(&self, c: &BigRational) -> Term {
        Term { coeff: &self.coeff * c, ..self.clone() }.canonical()
    }

    pub fn mul(&self, o: &Term) -> Term {
        Term::new(&self.coeff * &o.coeff, self.k_pow + o.k_pow, &self.base * &o.base, self.exp2.add(&o.exp2))
    }

    /// `|self / o|` as a single term.
    pub fn abs_ratio(&self, o: &Term) -> Term {
        Term::new((&self.coeff / &o.coeff).abs(), self.k_pow - o.k_pow, &self.base / &o.base, self.exp2.sub(&o.exp2))
    }

    /// `t(k + s)` as a sum of terms (binomial expansion of `(k+s)^a`).
    pub fn shift(&self, s: i64) -> Option<Vec<Term>> {
        if self.k_pow < 0 {
            return None;
        }
        let head = &self.coeff * rat_pow(&self.base, s);
        let exp2 = self.exp2.shift(s);
        let a = self.k_pow as u32;
        let mut out = Vec::new();
        for j in 0..=a {
            let c = &head * BigRational::from_integer(binomial(a, j)) * rat_pow(&int(s), (a - j) as i64);
            if !c.is_zero() {
                out.push(Term::new(c, j as i32, self.base.clone(), exp2.clone()));
            }
        }
        Some(out)
    }

    /// Exact test `|t(k)| ≤ eps` (works for non-integral exponents too).
    pub fn abs_le(&self, k: u64, eps: &BigRational) -> bool {
        let kq = BigRational::from_integer(BigInt::from(k));
        let e = self.exp2.eval(&kq);
        let q = e.denom().clone();
        let qi = q.to_i64().expect("exponent denominator too large");
        let u = e.numer().to_i64().expect("exponent too large");
        // (|c| k^a B^k)^q · 2^u ≤ eps^q
        let m = self.coeff.abs() * rat_pow(&kq, self.k_pow as i64) * rat_pow(&self.base, k as i64);
        rat_pow(&m, qi) * pow2_rat(u) <= rat_pow(eps, qi)
    }

    /// For a term that decays to zero, an index `k_m ≥ 1` after which
    /// `|t(k+1)| ≤ |t(k)|`.
    fn monotone_from(&self) -> Option<u64> {
        // log2 |t(k+1)/t(k)| = a·log2(1+1/k) + log2 B + (p(k+1) − p(k)),
        // and log2(1+1/k) ≤ 3/(2k) for k ≥ 1.
        let q = self.exp2.shift(1).sub(&self.exp2);
        let a = self.k_pow;
        let lam_lin = self.exp2.coeff(1);
        let mut prec = 8;
        loop {
            let log_b = if let Some(m) = exact_log2(&self.base) { int(m) } else { log2_bounds(&self.base, prec).1 };
            let poly = q.add(&Poly::new(vec![log_b.clone()]));
            match poly.degree() {
                Some(d) if d >= 1 => {
                    let bump = if a > 0 { rat(3 * a as i64, 2) } else { BigRational::zero() };
                    return poly.add(&Poly::new(vec![bump])).negative_from();
                }
                _ => {
                    let c = poly.coeff(0);
                    if c.is_negative() {
                        if a <= 0 {
                            return Some(1);
                        }
                        let k = (rat(3 * a as i64, 2) / c.abs()).ceil().to_integer() + BigInt::one();
                        return k.to_u64();
                    }
                    // The exact linear factor: equal to 1 means log2 B + p₁ = 0.
                    if cmp_linear_factor(&self.base, &lam_lin, &BigRational::one(), &BigRational::zero()) == Ordering::Equal {
                        return if a < 0 { Some(1) } else { None };
                    }
                    if prec > 14 {
                        return None;
                    }
                    prec += 2;
                }
            }
        }
    }

    /// For a term tending to zero, an index after which `|t(k)| ≤ eps`.
    pub fn below_from(&self, eps: &BigRational) -> Option<u64> {
        assert!(eps.is_positive());
        if self.coeff.is_zero() {
            return Some(1);
        }
        if self.growth_cmp(&self.constant_class()) != Ordering::Less {
            return None;
        }
        let km = self.monotone_from()?;
        if self.abs_le(km, eps) {
            return Some(km);
        }
        // Exponential then binary search on the monotone tail.
        let mut hi = km.max(1);
        let mut step = 1u64;
        loop {
            let cand = hi.checked_add(step)?;
            if self.abs_le(cand, eps) {
                let mut lo = hi;
                let mut hi2 = cand;
                while hi2 - lo > 1 {
                    let mid = lo + (hi2 - lo) / 2;
                    if self.abs_le(mid, eps) {
                        hi2 = mid;
                    } else {
                        lo = mid;
                    }
                }
                return Some(hi2);
            }
            hi = cand;
            step = step.checked_mul(2)?;
            if step > 1 << 40 {
                return None;
            }
        }
    }
}

/// Compare `B₁·2^{s₁}` with `B₂·2^{s₂}` exactly.
fn cmp_linear_factor(b1: &BigRational, s1: &BigRational, b2: &BigRational, s2: &BigRational) -> Ordering {
    // B₁/B₂ vs 2^{s₂ − s₁} = 2^{u/q}  ⟺  (B₁/B₂)^q vs 2^u.
    let r = b1 / b2;
    let e = s2 - s1;
    let q = e.denom().to_i64().expect("exponent denominator too large");
    let u = e.numer().to_i64().expect("exponent too large");
    rat_pow(&r, q).cmp(&pow2_rat(u))
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.coeff)?;
        if self.k_pow != 0 {
            write!(f, "·k^{}", self.k_pow)?;
        }
        if !self.base.is_one() {
            write!(f, "·({})^k", self.base)?;
        }
        if !self.exp2.0.is_empty() {
            write!(f, "·2^(")?;
            let mut first = true;
            for (d, c) in self.exp2.0.iter().enumerate().rev() {
                if c.is_zero() {
                    continue;
                }
                if !first {
                    write!(f, " + ")?;
                }
                first = false;
                match d {
                    0 => write!(f, "{c}")?,
                    1 => write!(f, "{c}k")?,
                    _ => write!(f, "{c}k^{d}")?,
                }
            }
            write!(f, ")")?;
        }
        Ok(())
    }
}

/// A closed-form sequence: a sum of [`Term`]s plus optional overridden values.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Seq {
    terms: Vec<Term>,
    overrides: BTreeMap<u64, BigRational>,
}

impl Seq {
    pub fn zero() -> Self {
        Seq::default()
    }

    pub fn from_terms<I: IntoIterator<Item = Term>>(terms: I) -> Self {
        let mut s = Seq::zero();
        for t in terms {
            s.push(t);
        }
        s
    }

    pub fn constant(c: BigRational) -> Self {
        Seq::from_terms([Term::constant(c)])
    }

    /// The polynomial `Σ c_d k^d`.
    pub fn poly(coeffs: &[BigRational]) -> Self {
        Seq::from_terms(coeffs.iter().enumerate().map(|(d, c)| Term::monomial(c.clone(), d as i32)))
    }

    /// `c · 2^{p(k)}` for an integer polynomial exponent.
    pub fn pow2(c: BigRational, p: &[i64]) -> Self {
        Seq::from_terms([Term::pow2_poly(c, Poly::new(p.iter().map(|&x| int(x)).collect()))])
    }

    /// The identity sequence `k`.
    pub fn k() -> Self {
        Seq::from_terms([Term::monomial(BigRational::one(), 1)])
    }

    fn push(&mut self, t: Term) {
        if t.is_zero() {
            return;
        }
        if let Some(pos) = self.terms.iter().position(|x| x.same_shape(&t)) {
            let c = &self.terms[pos].coeff + &t.coeff;
            if c.is_zero() {
                self.terms.remove(pos);
            } else {
                self.terms[pos].coeff = c;
            }
        } else {
            self.terms.push(t);
        }
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn overrides(&self) -> &BTreeMap<u64, BigRational> {
        &self.overrides
    }

    /// Replace the value at `k` (asymptotics ignore overrides).
    pub fn with_override(mut self, k: u64, v: BigRational) -> Self {
        self.overrides.insert(k, v);
        self
    }

    pub fn last_override(&self) -> Option<u64> {
        self.overrides.keys().next_back().copied()
    }

    pub fn eval(&self, k: u64) -> Option<BigRational> {
        if let Some(v) = self.overrides.get(&k) {
            return Some(v.clone());
        }
        let mut acc = BigRational::zero();
        for t in &self.terms {
            acc += t.eval(k)?;
        }
        Some(acc)
    }

    /// Exact integer value at `k`, if integral.
    pub fn eval_int(&self, k: u64) -> Option<BigInt> {
        let v = self.eval(k)?;
        if v.is_integer() {
            Some(v.to_integer())
        } else {
            None
        }
    }

    pub fn eval_u64(&self, k: u64) -> Option<u64> {
        self.eval_int(k)?.to_u64()
    }

    fn merge_overrides(&self, o: &Seq, f: impl Fn(&BigRational, &BigRational) -> BigRational) -> BTreeMap<u64, BigRational> {
        let mut out = BTreeMap::new();
        for &k in self.overrides.keys().chain(o.overrides.keys()) {
            if let (Some(a), Some(b)) = (self.eval(k), o.eval(k)) {
                out.insert(k, f(&a, &b));
            }
        }
        out
    }

    pub fn add(&self, o: &Seq) -> Seq {
        let mut s = self.clone();
        for t in &o.terms {
            s.push(t.clone());
        }
        s.overrides = self.merge_overrides(o, |a, b| a + b);
        s
    }

    pub fn neg(&self) -> Seq {
        Seq {
            terms: self.terms.iter().map(|t| t.scale(&-BigRational::one())).collect(),
            overrides: self.overrides.iter().map(|(k, v)| (*k, -v)).collect(),
        }
    }

    pub fn sub(&self, o: &Seq) -> Seq {
        self.add(&o.neg())
    }

    pub fn scale(&self, c: &BigRational) -> Seq {
        let mut s = Seq::from_terms(self.terms.iter().map(|t| t.scale(c)));
        s.overrides = self.overrides.iter().map(|(k, v)| (*k, v * c)).collect();
        s
    }

    pub fn add_const(&self, c: &BigRational) -> Seq {
        self.add(&Seq::constant(c.clone()))
    }

    pub fn mul(&self, o: &Seq) -> Seq {
        let mut s = Seq::zero();
        for a in &self.terms {
            for b in &o.terms {
                s.push(a.mul(b));
            }
        }
        s.overrides = self.merge_overrides(o, |a, b| a * b);
        s
    }

    /// `k ↦ self(k + s)`; overrides move along (indices below 0 are dropped).
    pub fn shift(&self, s: i64) -> Option<Seq> {
        let mut out = Seq::zero();
        for t in &self.terms {
            for u in t.shift(s)? {
                out.push(u);
            }
        }
        for (k, v) in &self.overrides {
            let nk = *k as i64 - s;
            if nk >= 0 {
                out.overrides.insert(nk as u64, v.clone());
            }
        }
        Some(out)
    }

    /// The terms of the fastest growth class.
    fn top_terms(&self) -> Vec<&Term> {
        let mut top: Vec<&Term> = Vec::new();
        for t in &self.terms {
            match top.first().map(|d| t.growth_cmp(d)) {
                None => top.push(t),
                Some(Ordering::Greater) => top = vec![t],
                Some(Ordering::Equal) => top.push(t),
                Some(Ordering::Less) => {}
            }
        }
        top
    }

    /// The unique dominant term, if the top growth class has a single term.
    pub fn dominant(&self) -> Option<&Term> {
        let top = self.top_terms();
        if top.len() == 1 {
            Some(top[0])
        } else {
            None
        }
    }

    /// Limit as `k → ∞` (`None` when the top class is ambiguous).
    pub fn limit(&self) -> Option<Limit> {
        if self.terms.is_empty() {
            return Some(Limit::Finite(BigRational::zero()));
        }
        let d = self.dominant()?;
        let one = Term::constant(BigRational::one());
        Some(match d.growth_cmp(&one) {
            Ordering::Greater => {
                if d.coeff.is_positive() {
                    Limit::PosInf
                } else {
                    Limit::NegInf
                }
            }
            Ordering::Less => Limit::Finite(BigRational::zero()),
            Ordering::Equal => finite_with_frac(&d.coeff, &d.exp2.coeff(0)),
        })
    }

    /// `lim self(k) / other(k)`.
    pub fn limit_ratio(&self, other: &Seq) -> Option<Limit> {
        let db = other.dominant()?;
        if self.terms.is_empty() {
            return Some(Limit::Finite(BigRational::zero()));
        }
        let da = self.dominant()?;
        let sign = da.coeff.signum() * db.coeff.signum();
        Some(match da.growth_cmp(db) {
            Ordering::Greater => {
                if sign.is_positive() {
                    Limit::PosInf
                } else {
                    Limit::NegInf
                }
            }
            Ordering::Less => Limit::Finite(BigRational::zero()),
            Ordering::Equal => finite_with_frac(&(&da.coeff / &db.coeff), &(da.exp2.coeff(0) - db.exp2.coeff(0))),
        })
    }

    /// A proved onset: `self(k) ≤ bound` for every `k ≥` the returned index.
    ///
    /// Returns `None` when the dominance argument does not apply (for instance
    /// when the limit is not below the bound).  The onset is always past the
    /// last overridden index.
    pub fn eventually_le(&self, bound: &BigRational) -> Option<u64> {
        let s = self.add_const(&-bound.clone());
        let floor = self.last_override().map_or(1, |k| k + 1);
        if s.terms.is_empty() {
            return Some(floor);
        }
        let top = s.top_terms();
        if top.len() != 1 {
            return None;
        }
        let d = top[0];
        let one = Term::constant(BigRational::one());
        if d.growth_cmp(&one) == Ordering::Less {
            // Everything decays to zero: only an all-negative sum stays ≤ 0.
            return if s.terms.iter().all(|t| t.coeff.is_negative()) { Some(floor) } else { None };
        }
        if !d.coeff.is_negative() {
            return None;
        }
        let others: Vec<&Term> = s.terms.iter().filter(|t| !std::ptr::eq(*t, d)).collect();
        let eps = rat(1, 2 * others.len().max(1) as i64);
        let mut onset = floor;
        for t in others {
            let k = t.abs_ratio(d).below_from(&eps)?;
            onset = onset.max(k);
        }
        Some(onset)
    }

    /// A proved onset for `self(k) ≥ bound`.
    pub fn eventually_ge(&self, bound: &BigRational) -> Option<u64> {
        self.neg().eventually_le(&-bound.clone())
    }

    /// Upper-bounding sequence for `log2 self(k)`, for a single term with
    /// `k^0` and a power-of-two base (constants are rounded up).
    pub fn log2_upper(&self) -> Option<Seq> {
        self.log2_bound(true)
    }

    /// Lower-bounding sequence for `log2 self(k)` (same restrictions).
    pub fn log2_lower(&self) -> Option<Seq> {
        self.log2_bound(false)
    }

    fn log2_bound(&self, upper: bool) -> Option<Seq> {
        if self.terms.len() != 1 {
            return None;
        }
        let t = &self.terms[0];
        if t.k_pow != 0 || !t.coeff.is_positive() {
            return None;
        }
        let m = exact_log2(&t.base)?;
        let (lo, hi) = log2_bounds(&t.coeff, 20);
        let c0 = if upper { hi } else { lo } + t.exp2.coeff(0);
        let mut coeffs = t.exp2.0.clone();
        coeffs.resize(coeffs.len().max(2), BigRational::zero());
        coeffs[0] = c0;
        coeffs[1] = &coeffs[1] + int(m);
        let mut out = Seq::poly(&coeffs);
        for (k, v) in &self.overrides {
            if !v.is_positive() {
                return None;
            }
            let (lo, hi) = log2_bounds(v, 20);
            out.overrides.insert(*k, if upper { hi } else { lo });
        }
        Some(out)
    }
}

fn finite_with_frac(c: &BigRational, frac: &BigRational) -> Limit {
    if frac.is_zero() {
        Limit::Finite(c.clone())
    } else {
        let v = c.to_f64().unwrap_or(f64::NAN) * 2f64.powf(frac.to_f64().unwrap_or(0.0));
        Limit::Irrational(v.to_bits())
    }
}

impl fmt::Display for Seq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            f.write_str("0")?;
        }
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "{t}")?;
        }
        for (k, v) in &self.overrides {
            write!(f, " [k={k}: {v}]")?;
        }
        Ok(())
    }
}
