//! Exact rational scalars with a power-of-two exponent split out.
//!
//! Every value is stored as `num / den · 2^exp` where `num` and `den` are odd
//! (or `num = 0`), `den > 0` and `gcd(num, den) = 1`.  Keeping the power of two
//! apart means that the coupling coefficients `2^{-τ}` used by the operator
//! families stay tiny in memory even when `τ` itself is astronomically large,
//! and that multiplying by the weights `1/2, 1, 2` only touches the exponent.
//!
//! Arithmetic is exact.  The only operation that can refuse to produce a value
//! is addition of two numbers whose exponents are so far apart that the exact
//! sum would not fit in memory; see [`ExactScalar::checked_add`].

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest exponent gap (in bits) that exact addition is willing to materialise.
pub const MAX_ALIGN_BITS: u64 = 1 << 28;

/// Failures of exact scalar arithmetic.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScalarError {
    #[error("exponent gap of {0} bits is too large for an exact sum")]
    ExponentGap(BigInt),
    #[error("division by zero")]
    DivisionByZero,
    #[error("square root of a negative number")]
    NegativeSqrt,
    #[error("cannot parse scalar from {0:?}")]
    Parse(String),
}

/// A power-of-two exponent of arbitrary size.
///
/// Exponents fit in an `i64` in nearly every computation; the big variant is
/// only used when a closed-form family is evaluated far out.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum BigExp {
    Small(i64),
    Big(BigInt),
}

impl BigExp {
    pub fn zero() -> Self {
        BigExp::Small(0)
    }

    pub fn from_big(b: BigInt) -> Self {
        match b.to_i64() {
            Some(s) => BigExp::Small(s),
            None => BigExp::Big(b),
        }
    }

    pub fn to_big(&self) -> BigInt {
        match self {
            BigExp::Small(s) => BigInt::from(*s),
            BigExp::Big(b) => b.clone(),
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            BigExp::Small(s) => Some(*s),
            BigExp::Big(_) => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, BigExp::Small(0))
    }

    pub fn add(&self, other: &BigExp) -> BigExp {
        if let (BigExp::Small(a), BigExp::Small(b)) = (self, other) {
            if let Some(s) = a.checked_add(*b) {
                return BigExp::Small(s);
            }
        }
        BigExp::from_big(self.to_big() + other.to_big())
    }

    pub fn add_i64(&self, d: i64) -> BigExp {
        self.add(&BigExp::Small(d))
    }

    pub fn neg(&self) -> BigExp {
        match self {
            BigExp::Small(s) => match s.checked_neg() {
                Some(n) => BigExp::Small(n),
                None => BigExp::from_big(-BigInt::from(*s)),
            },
            BigExp::Big(b) => BigExp::from_big(-b),
        }
    }

    pub fn sub(&self, other: &BigExp) -> BigExp {
        self.add(&other.neg())
    }

    pub fn mul_big(&self, factor: &BigInt) -> BigExp {
        if let (BigExp::Small(a), Some(f)) = (self, factor.to_i64()) {
            if let Some(p) = a.checked_mul(f) {
                return BigExp::Small(p);
            }
        }
        BigExp::from_big(self.to_big() * factor)
    }
}

impl PartialOrd for BigExp {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for BigExp {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (BigExp::Small(a), BigExp::Small(b)) => a.cmp(b),
            _ => self.to_big().cmp(&other.to_big()),
        }
    }
}

impl fmt::Display for BigExp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BigExp::Small(s) => write!(f, "{s}"),
            BigExp::Big(b) => write!(f, "{b}"),
        }
    }
}

impl From<i64> for BigExp {
    fn from(v: i64) -> Self {
        BigExp::Small(v)
    }
}

impl From<BigInt> for BigExp {
    fn from(v: BigInt) -> Self {
        BigExp::from_big(v)
    }
}

/// An exact rational number `num/den · 2^exp` in canonical form.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ExactScalar {
    num: BigInt,
    den: BigInt,
    exp: BigExp,
}

fn trailing_zeros(x: &BigInt) -> u64 {
    x.trailing_zeros().unwrap_or(0)
}

impl ExactScalar {
    pub fn zero() -> Self {
        ExactScalar { num: BigInt::zero(), den: BigInt::one(), exp: BigExp::zero() }
    }

    pub fn one() -> Self {
        ExactScalar { num: BigInt::one(), den: BigInt::one(), exp: BigExp::zero() }
    }

    /// `2^e` for an arbitrary exponent.
    pub fn pow2(e: impl Into<BigExp>) -> Self {
        ExactScalar { num: BigInt::one(), den: BigInt::one(), exp: e.into() }
    }

    pub fn from_int(v: impl Into<BigInt>) -> Self {
        Self::from_parts(v.into(), BigInt::one(), BigExp::zero())
    }

    /// `num/den` with an arbitrary (nonzero) denominator.
    pub fn ratio(num: impl Into<BigInt>, den: impl Into<BigInt>) -> Self {
        let den = den.into();
        assert!(!den.is_zero(), "zero denominator");
        Self::from_parts(num.into(), den, BigExp::zero())
    }

    pub fn from_rational(r: &BigRational) -> Self {
        Self::from_parts(r.numer().clone(), r.denom().clone(), BigExp::zero())
    }

    /// `m · 2^e`.
    pub fn dyadic(m: impl Into<BigInt>, e: impl Into<BigExp>) -> Self {
        Self::from_parts(m.into(), BigInt::one(), e.into())
    }

    /// Canonicalise an arbitrary `num/den · 2^exp`.
    fn from_parts(mut num: BigInt, mut den: BigInt, mut exp: BigExp) -> Self {
        if num.is_zero() {
            return Self::zero();
        }
        if den.is_negative() {
            num = -num;
            den = -den;
        }
        let tz = trailing_zeros(&num);
        if tz > 0 {
            num >>= tz as usize;
            exp = exp.add_i64(tz as i64);
        }
        let tz = trailing_zeros(&den);
        if tz > 0 {
            den >>= tz as usize;
            exp = exp.add_i64(-(tz as i64));
        }
        if !den.is_one() {
            let g = num.gcd(&den);
            if !g.is_one() {
                num /= &g;
                den /= &g;
            }
        }
        ExactScalar { num, den, exp }
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.num.is_one() && self.den.is_one() && self.exp.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.num.is_negative()
    }

    pub fn is_positive(&self) -> bool {
        self.num.is_positive()
    }

    /// True when the denominator is a power of two.
    pub fn is_dyadic(&self) -> bool {
        self.den.is_one()
    }

    /// True when the value is `±2^e`.
    pub fn is_signed_power_of_two(&self) -> bool {
        self.den.is_one() && self.num.magnitude().is_one()
    }

    pub fn signum(&self) -> i32 {
        match self.num.sign() {
            Sign::Minus => -1,
            Sign::NoSign => 0,
            Sign::Plus => 1,
        }
    }

    /// Odd part of the numerator.
    pub fn odd_numer(&self) -> &BigInt {
        &self.num
    }

    /// Odd part of the denominator.
    pub fn odd_denom(&self) -> &BigInt {
        &self.den
    }

    pub fn exponent(&self) -> &BigExp {
        &self.exp
    }

    pub fn abs(&self) -> Self {
        ExactScalar { num: self.num.abs(), den: self.den.clone(), exp: self.exp.clone() }
    }

    /// Multiply by `2^e`; exact and cheap.
    pub fn mul_pow2(&self, e: &BigExp) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        ExactScalar { num: self.num.clone(), den: self.den.clone(), exp: self.exp.add(e) }
    }

    pub fn recip(&self) -> Result<Self, ScalarError> {
        if self.is_zero() {
            return Err(ScalarError::DivisionByZero);
        }
        let (num, den) = if self.num.is_negative() { (-self.den.clone(), -self.num.clone()) } else { (self.den.clone(), self.num.clone()) };
        Ok(ExactScalar { num, den, exp: self.exp.neg() })
    }

    pub fn checked_div(&self, other: &Self) -> Result<Self, ScalarError> {
        Ok(self * &other.recip()?)
    }

    /// Exact sum, refusing exponent gaps larger than [`MAX_ALIGN_BITS`].
    pub fn checked_add(&self, other: &Self) -> Result<Self, ScalarError> {
        if self.is_zero() {
            return Ok(other.clone());
        }
        if other.is_zero() {
            return Ok(self.clone());
        }
        let (lo, hi) = if self.exp <= other.exp { (self, other) } else { (other, self) };
        let gap = hi.exp.sub(&lo.exp);
        let shift = match gap.as_i64() {
            Some(s) if (s as u64) <= MAX_ALIGN_BITS => s as usize,
            _ => return Err(ScalarError::ExponentGap(gap.to_big())),
        };
        let hi_num = &hi.num << shift;
        if lo.den.is_one() && hi.den.is_one() {
            return Ok(Self::from_parts(&lo.num + hi_num, BigInt::one(), lo.exp.clone()));
        }
        let num = &lo.num * &hi.den + hi_num * &lo.den;
        let den = &lo.den * &hi.den;
        Ok(Self::from_parts(num, den, lo.exp.clone()))
    }

    /// `self^n` for a non-negative (possibly huge) integer exponent.
    ///
    /// Only the power-of-two part may be raised to a huge power; an odd part
    /// different from ±1 requires `n` to fit in a `u32`.
    pub fn pow(&self, n: &BigInt) -> Self {
        assert!(!n.is_negative(), "negative power");
        if n.is_zero() {
            return Self::one();
        }
        if self.is_zero() {
            return Self::zero();
        }
        let exp = self.exp.mul_big(n);
        let odd = self.den.is_one() && self.num.magnitude().is_one();
        let (num, den) = if odd {
            let neg = self.num.is_negative() && n.is_odd();
            (if neg { -BigInt::one() } else { BigInt::one() }, BigInt::one())
        } else {
            let e = n.to_u32().expect("odd-part power too large to materialise");
            (num_traits::pow(self.num.clone(), e as usize), num_traits::pow(self.den.clone(), e as usize))
        };
        ExactScalar { num, den, exp }
    }

    pub fn pow_u64(&self, n: u64) -> Self {
        self.pow(&BigInt::from(n))
    }

    /// Approximate base-2 logarithm of `|self|` (`-inf` for zero).
    pub fn log2_abs(&self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        let e = match &self.exp {
            BigExp::Small(s) => *s as f64,
            BigExp::Big(b) => b.to_f64().unwrap_or(f64::INFINITY),
        };
        e + big_log2(&self.num.abs()) - big_log2(&self.den)
    }

    /// Nearest double (saturating to `0` or `±inf` outside the double range).
    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let l = self.log2_abs();
        if l > 1100.0 {
            return if self.is_negative() { f64::NEG_INFINITY } else { f64::INFINITY };
        }
        if l < -1100.0 {
            return if self.is_negative() { -0.0 } else { 0.0 };
        }
        let mantissa = ratio_to_f64(&self.num, &self.den);
        let e = self.exp.as_i64().unwrap_or(0);
        mantissa * 2f64.powi(e.clamp(-2000, 2000) as i32)
    }

    /// Exact conversion to a big rational; `None` if the exponent is too large
    /// to materialise.
    pub fn to_rational(&self) -> Option<BigRational> {
        let e = self.exp.as_i64()?;
        if e.unsigned_abs() > MAX_ALIGN_BITS {
            return None;
        }
        let (num, den) =
            if e >= 0 { (&self.num << (e as usize), self.den.clone()) } else { (self.num.clone(), &self.den << ((-e) as usize)) };
        Some(BigRational::new(num, den))
    }

    /// Exact integer value if the scalar is an integer.
    pub fn to_integer(&self) -> Option<BigInt> {
        let r = self.to_rational()?;
        if r.is_integer() {
            Some(r.to_integer())
        } else {
            None
        }
    }

    /// Canonical `num/den` rendering (or `num` for integers).
    pub fn to_fraction_string(&self) -> String {
        match self.to_rational() {
            Some(r) if r.denom().is_one() => r.numer().to_string(),
            Some(r) => format!("{}/{}", r.numer(), r.denom()),
            None => self.to_dyadic_string(),
        }
    }

    /// Rendering as `m·2^e` (with `m` itself a fraction if not dyadic).
    pub fn to_dyadic_string(&self) -> String {
        let m = if self.den.is_one() { self.num.to_string() } else { format!("{}/{}", self.num, self.den) };
        if self.exp.is_zero() {
            m
        } else {
            format!("{m}·2^{}", self.exp)
        }
    }

    /// Decimal rendering with `digits` digits after the point (rounded toward
    /// zero); falls back to scientific notation for extreme magnitudes.
    pub fn to_decimal_string(&self, digits: usize) -> String {
        if self.is_zero() {
            return format!("{:.*}", digits, 0.0);
        }
        let l = self.log2_abs();
        if !(-(4.0 * digits as f64 + 64.0)..=4096.0).contains(&l) {
            return format!("{:e}", self.to_f64());
        }
        let r = match self.to_rational() {
            Some(r) => r,
            None => return format!("{:e}", self.to_f64()),
        };
        let scale = num_traits::pow(BigInt::from(10), digits);
        let scaled = (r.abs() * BigRational::from_integer(scale.clone())).to_integer();
        let (int_part, frac_part) = scaled.div_rem(&scale);
        let sign = if self.is_negative() { "-" } else { "" };
        if digits == 0 {
            format!("{sign}{int_part}")
        } else {
            format!("{sign}{int_part}.{:0>width$}", frac_part.to_string(), width = digits)
        }
    }

    /// Parse `a`, `a/b` or `m·2^e` / `m*2^e`.
    pub fn parse(s: &str) -> Result<Self, ScalarError> {
        let err = || ScalarError::Parse(s.to_string());
        let t = s.trim();
        let (mant, exp) = match t.split_once("·2^").or_else(|| t.split_once("*2^")) {
            Some((m, e)) => (m, e.parse::<BigInt>().map_err(|_| err())?),
            None => (t, BigInt::zero()),
        };
        let (n, d) = match mant.split_once('/') {
            Some((n, d)) => (n.trim(), d.trim()),
            None => (mant.trim(), "1"),
        };
        let n: BigInt = n.parse().map_err(|_| err())?;
        let d: BigInt = d.parse().map_err(|_| err())?;
        if d.is_zero() {
            return Err(ScalarError::DivisionByZero);
        }
        Ok(Self::from_parts(n, d, BigExp::from_big(exp)))
    }

    /// Certified upper bound for `√self`.
    ///
    /// Returns `r ≥ √q` with `r − √q ≤ 2^{-bits}·max(1, √q)`.
    pub fn sqrt_upper(&self, bits: u32) -> Result<Self, ScalarError> {
        if self.is_negative() {
            return Err(ScalarError::NegativeSqrt);
        }
        if self.is_zero() {
            return Ok(Self::zero());
        }
        // Make the exponent even so that 2^{exp/2} is exact.
        let (mut n, e) = (self.num.clone(), self.exp.clone());
        let odd_exp = match &e {
            BigExp::Small(s) => s.rem_euclid(2) == 1,
            BigExp::Big(b) => b.is_odd(),
        };
        let e = if odd_exp {
            n <<= 1;
            e.add_i64(-1)
        } else {
            e
        };
        let half = BigExp::from_big(e.to_big() / 2);
        let d = &self.den;
        // √(n/d) = √(n·d)/d; scale by 4^s for `bits` bits of relative accuracy.
        let s = bits as usize + 2;
        let m: BigInt = (&n * d) << (2 * s);
        let mut r = m.sqrt();
        if &r * &r < m {
            r += 1;
        }
        let root = Self::from_parts(r, d.clone(), BigExp::Small(-(s as i64)));
        Ok(root.mul_pow2(&half))
    }

    /// Convenience: `self²`.
    pub fn square(&self) -> Self {
        self * self
    }

    pub fn max(a: &Self, b: &Self) -> Self {
        if a >= b {
            a.clone()
        } else {
            b.clone()
        }
    }

    pub fn min(a: &Self, b: &Self) -> Self {
        if a <= b {
            a.clone()
        } else {
            b.clone()
        }
    }
}

fn big_log2(x: &BigInt) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        x.to_f64().map(f64::log2).unwrap_or(bits as f64)
    } else {
        let shifted = x >> (bits - 60) as usize;
        shifted.to_f64().unwrap().log2() + (bits - 60) as f64
    }
}

fn ratio_to_f64(n: &BigInt, d: &BigInt) -> f64 {
    let (nb, db) = (n.bits() as i64, d.bits() as i64);
    // Bring both to ~60 significant bits.
    let ns = (nb - 60).max(0);
    let ds = (db - 60).max(0);
    let nn = (n >> ns as usize).to_f64().unwrap();
    let dd = (d >> ds as usize).to_f64().unwrap();
    nn / dd * 2f64.powi((ns - ds) as i32)
}

impl Default for ExactScalar {
    fn default() -> Self {
        Self::zero()
    }
}

impl PartialOrd for ExactScalar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExactScalar {
    fn cmp(&self, other: &Self) -> Ordering {
        let (sa, sb) = (self.signum(), other.signum());
        if sa != sb || sa == 0 {
            return sa.cmp(&sb);
        }
        let mag = cmp_magnitude(self, other);
        if sa > 0 {
            mag
        } else {
            mag.reverse()
        }
    }
}

/// Compare `|a|` and `|b|` for nonzero scalars.
fn cmp_magnitude(a: &ExactScalar, b: &ExactScalar) -> Ordering {
    // Estimated binary magnitude: bits(num) - bits(den) + exp, accurate to ±1.
    let est = |x: &ExactScalar| -> BigExp { x.exp.add_i64(x.num.bits() as i64 - x.den.bits() as i64) };
    let (ea, eb) = (est(a), est(b));
    let diff = ea.sub(&eb);
    match diff.as_i64() {
        Some(d) if d >= 2 => return Ordering::Greater,
        Some(d) if d <= -2 => return Ordering::Less,
        None => return if diff.to_big().is_positive() { Ordering::Greater } else { Ordering::Less },
        _ => {}
    }
    // Exponents are now close; cross-multiply exactly.
    let (lo, hi, flip) = if a.exp <= b.exp { (a, b, false) } else { (b, a, true) };
    let shift = hi.exp.sub(&lo.exp).as_i64().unwrap_or(0).max(0) as usize;
    let lhs = lo.num.abs() * &hi.den;
    let rhs = (hi.num.abs() << shift) * &lo.den;
    let o = lhs.cmp(&rhs);
    if flip {
        o.reverse()
    } else {
        o
    }
}

impl fmt::Display for ExactScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.exp.as_i64() {
            Some(e) if e.unsigned_abs() <= 256 => f.write_str(&self.to_fraction_string()),
            _ => f.write_str(&self.to_dyadic_string()),
        }
    }
}

impl fmt::Debug for ExactScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl Serialize for ExactScalar {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ExactScalar {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        ExactScalar::parse(&s).map_err(serde::de::Error::custom)
    }
}

impl From<i64> for ExactScalar {
    fn from(v: i64) -> Self {
        ExactScalar::from_int(v)
    }
}

impl From<BigInt> for ExactScalar {
    fn from(v: BigInt) -> Self {
        ExactScalar::from_int(v)
    }
}

impl<'a> Mul<&'a ExactScalar> for &'a ExactScalar {
    type Output = ExactScalar;
    fn mul(self, rhs: &'a ExactScalar) -> ExactScalar {
        if self.is_zero() || rhs.is_zero() {
            return ExactScalar::zero();
        }
        let exp = self.exp.add(&rhs.exp);
        if self.den.is_one() && rhs.den.is_one() {
            // Product of odd numbers is odd: already canonical.
            return ExactScalar { num: &self.num * &rhs.num, den: BigInt::one(), exp };
        }
        let g1 = self.num.gcd(&rhs.den);
        let g2 = rhs.num.gcd(&self.den);
        let num = (&self.num / &g1) * (&rhs.num / &g2);
        let den = (&self.den / &g2) * (&rhs.den / &g1);
        ExactScalar { num, den, exp }
    }
}

impl<'a> Add<&'a ExactScalar> for &'a ExactScalar {
    type Output = ExactScalar;
    fn add(self, rhs: &'a ExactScalar) -> ExactScalar {
        self.checked_add(rhs).expect("exact addition with an unrepresentable exponent gap")
    }
}

impl<'a> Sub<&'a ExactScalar> for &'a ExactScalar {
    type Output = ExactScalar;
    fn sub(self, rhs: &'a ExactScalar) -> ExactScalar {
        self + &(-rhs)
    }
}

impl<'a> Div<&'a ExactScalar> for &'a ExactScalar {
    type Output = ExactScalar;
    fn div(self, rhs: &'a ExactScalar) -> ExactScalar {
        self.checked_div(rhs).expect("division by zero")
    }
}

impl Neg for &ExactScalar {
    type Output = ExactScalar;
    fn neg(self) -> ExactScalar {
        ExactScalar { num: -&self.num, den: self.den.clone(), exp: self.exp.clone() }
    }
}

impl Neg for ExactScalar {
    type Output = ExactScalar;
    fn neg(self) -> ExactScalar {
        ExactScalar { num: -self.num, den: self.den, exp: self.exp }
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr<ExactScalar> for ExactScalar {
            type Output = ExactScalar;
            fn $m(self, rhs: ExactScalar) -> ExactScalar {
                (&self).$m(&rhs)
            }
        }
        impl<'a> $tr<&'a ExactScalar> for ExactScalar {
            type Output = ExactScalar;
            fn $m(self, rhs: &'a ExactScalar) -> ExactScalar {
                (&self).$m(rhs)
            }
        }
        impl<'a> $tr<ExactScalar> for &'a ExactScalar {
            type Output = ExactScalar;
            fn $m(self, rhs: ExactScalar) -> ExactScalar {
                self.$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
forward_owned!(Div, div);

/// A running sum of non-negative terms that stays exact while it can and
/// rounds upward once terms become negligible against the running total.
///
/// Used for certificate sums such as `Σ 2^k γ_k^{1/2}` whose later terms carry
/// exponents like `-2^{60}`: those are replaced by `2^{floor(log2 total) - slack}`
/// upper bounds, which keeps every `≤` conclusion sound.
#[derive(Clone, Debug)]
pub struct UpperSum {
    total: ExactScalar,
    exact: bool,
    slack_bits: i64,
}

impl UpperSum {
    pub fn new(slack_bits: u32) -> Self {
        UpperSum { total: ExactScalar::zero(), exact: true, slack_bits: slack_bits as i64 }
    }

    pub fn add(&mut self, term: &ExactScalar) {
        assert!(!term.is_negative(), "upper sums take non-negative terms");
        if term.is_zero() {
            return;
        }
        if self.total.is_zero() {
            self.total = term.clone();
            return;
        }
        let gap = self.total.log2_abs() - term.log2_abs();
        if gap > self.slack_bits as f64 + 2.0 {
            // Replace the term by a power of two that certainly dominates it.
            let floor_total = self.total.log2_abs().floor() as i64;
            let bump = ExactScalar::pow2(floor_total - self.slack_bits);
            debug_assert!(&bump >= term);
            self.total = &self.total + &bump;
            self.exact = false;
        } else if gap < -(self.slack_bits as f64 + 2.0) {
            // The running total is negligible next to the new term.
            let floor_term = term.log2_abs().floor() as i64;
            let bump = ExactScalar::pow2(floor_term - self.slack_bits);
            debug_assert!(bump >= self.total);
            self.total = term + &bump;
            self.exact = false;
        } else {
            match self.total.checked_add(term) {
                Ok(t) => self.total = t,
                Err(_) => {
                    let floor_total = self.total.log2_abs().floor() as i64;
                    self.total = &self.total + &ExactScalar::pow2(floor_total - self.slack_bits);
                    self.exact = false;
                }
            }
        }
    }

    pub fn value(&self) -> &ExactScalar {
        &self.total
    }

    /// Whether no rounding has happened so far.
    pub fn is_exact(&self) -> bool {
        self.exact
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> ExactScalar {
        ExactScalar::ratio(n, d)
    }

    #[test]
    fn canonical_form() {
        let a = q(6, 8);
        assert_eq!(a.odd_numer(), &BigInt::from(3));
        assert_eq!(a.odd_denom(), &BigInt::from(1));
        assert_eq!(a.exponent(), &BigExp::Small(-2));
        assert_eq!(q(10, -15), q(-2, 3));
        assert_eq!(ExactScalar::zero(), q(0, 7));
    }

    #[test]
    fn field_operations() {
        let a = q(3, 4);
        let b = q(-5, 6);
        assert_eq!(&a + &b, q(-1, 12));
        assert_eq!(&a * &b, q(-5, 8));
        assert_eq!(&a / &b, q(-9, 10));
        assert_eq!(&(&a - &b) + &b, a);
    }

    #[test]
    fn huge_exponents_multiply_cheaply() {
        let big = BigInt::from(1u64) << 70usize;
        let x = ExactScalar::pow2(BigExp::from_big(-big.clone()));
        let y = ExactScalar::pow2(BigExp::from_big(big));
        assert!(x.is_positive());
        assert_eq!(&x * &y, ExactScalar::one());
        assert!(x < ExactScalar::one());
        assert!(x.checked_add(&ExactScalar::one()).is_err());
        assert_eq!(x.to_f64(), 0.0);
    }

    #[test]
    fn ordering_mixed() {
        assert!(q(1, 3) < q(1, 2));
        assert!(q(-1, 3) > q(-1, 2));
        assert!(ExactScalar::pow2(-3) < q(1, 7));
        assert!(ExactScalar::pow2(-3) > q(1, 9));
        assert_eq!(q(2, 6).cmp(&q(1, 3)), Ordering::Equal);
    }

    #[test]
    fn sqrt_upper_examples() {
        let r = ExactScalar::from_int(4).sqrt_upper(30).unwrap();
        assert_eq!(r, ExactScalar::from_int(2));
        assert!(ExactScalar::zero().sqrt_upper(10).unwrap().is_zero());
        let r = ExactScalar::from_int(2).sqrt_upper(20).unwrap();
        assert!(r.square() >= ExactScalar::from_int(2));
        assert!(r <= ExactScalar::parse("14142150/10000000").unwrap());
        let tiny = ExactScalar::pow2(-101);
        let r = tiny.sqrt_upper(40).unwrap();
        assert!(r.square() >= tiny);
        assert!(ExactScalar::from_int(-1).sqrt_upper(3).is_err());
    }

    #[test]
    fn renderings_round_trip() {
        let a = q(-45, 16);
        assert_eq!(a.to_fraction_string(), "-45/16");
        assert_eq!(a.to_dyadic_string(), "-45·2^-4");
        assert_eq!(ExactScalar::parse("-45/16").unwrap(), a);
        assert_eq!(ExactScalar::parse("-45·2^-4").unwrap(), a);
        assert_eq!(ExactScalar::parse("3*2^5").unwrap(), ExactScalar::from_int(96));
        assert_eq!(q(9, 10).to_decimal_string(3), "0.900");
        assert_eq!(q(-1, 3).to_decimal_string(4), "-0.3333");
    }

    #[test]
    fn pow_handles_large_dyadic_powers() {
        let two = ExactScalar::from_int(2);
        let p = two.pow(&BigInt::from(1_000_000_000u64));
        assert_eq!(p.exponent(), &BigExp::Small(1_000_000_000));
        assert_eq!(q(-3, 2).pow_u64(3), q(-27, 8));
    }

    #[test]
    fn upper_sum_rounds_up_only() {
        let mut s = UpperSum::new(64);
        s.add(&q(1, 2));
        s.add(&q(1, 4));
        assert!(s.is_exact());
        assert_eq!(s.value(), &q(3, 4));
        s.add(&ExactScalar::pow2(BigExp::from_big(-(BigInt::from(1) << 80usize))));
        assert!(!s.is_exact());
        assert!(s.value() > &q(3, 4));
        assert!(s.value() < &q(3, 4).add(ExactScalar::pow2(-60)));
    }
}
