//! Finitely supported vectors of ℓ_p(ℕ) with exact coefficients.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::ExactScalar;

/// Failures of exact norm computations.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NormError {
    #[error("exact norms are only available for p = 1 and p = 2, got p = {0}")]
    UnsupportedExponent(u32),
}

/// The exponent `p` of the ambient sequence space.
///
/// Exact norm comparisons are available for `p = 1` and `p = 2`; other values
/// are accepted for geometry-independent computations only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpaceExponent(pub u32);

impl SpaceExponent {
    pub const L1: SpaceExponent = SpaceExponent(1);
    pub const L2: SpaceExponent = SpaceExponent(2);
}

impl Default for SpaceExponent {
    fn default() -> Self {
        SpaceExponent::L2
    }
}

/// A norm value, kept as `‖x‖_p^p` so that it stays rational.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormPower {
    pub p: u32,
    pub value: ExactScalar,
}

impl NormPower {
    /// Upper bound for the norm itself.
    pub fn norm_upper(&self, bits: u32) -> ExactScalar {
        match self.p {
            1 => self.value.clone(),
            2 => self.value.sqrt_upper(bits).expect("norm powers are non-negative"),
            _ => unreachable!("NormPower is only built for p in {{1, 2}}"),
        }
    }
}

/// A vector with finitely many nonzero coordinates, sorted by index.
#[derive(Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiniteVector {
    entries: Vec<(u64, ExactScalar)>,
}

impl FiniteVector {
    pub fn zero() -> Self {
        FiniteVector { entries: Vec::new() }
    }

    /// The canonical basis vector `e_k`.
    pub fn basis(k: u64) -> Self {
        FiniteVector { entries: vec![(k, ExactScalar::one())] }
    }

    /// Build from arbitrary `(index, coefficient)` pairs; repeated indices are
    /// summed and zero coefficients dropped.
    pub fn from_pairs<I: IntoIterator<Item = (u64, ExactScalar)>>(pairs: I) -> Self {
        let mut acc: BTreeMap<u64, ExactScalar> = BTreeMap::new();
        for (k, c) in pairs {
            if c.is_zero() {
                continue;
            }
            let slot = acc.entry(k).or_default();
            *slot = &*slot + &c;
        }
        FiniteVector { entries: acc.into_iter().filter(|(_, c)| !c.is_zero()).collect() }
    }

    pub fn entries(&self) -> &[(u64, ExactScalar)] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<(u64, ExactScalar)> {
        self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    /// Largest index carrying a nonzero coefficient.
    pub fn max_index(&self) -> Option<u64> {
        self.entries.last().map(|(k, _)| *k)
    }

    pub fn min_index(&self) -> Option<u64> {
        self.entries.first().map(|(k, _)| *k)
    }

    pub fn coeff(&self, k: u64) -> ExactScalar {
        match self.entries.binary_search_by_key(&k, |(i, _)| *i) {
            Ok(pos) => self.entries[pos].1.clone(),
            Err(_) => ExactScalar::zero(),
        }
    }

    /// `a·self + b·other`, merging the sorted supports.
    pub fn combine(&self, a: &ExactScalar, other: &FiniteVector, b: &ExactScalar) -> FiniteVector {
        let mut out = Vec::with_capacity(self.entries.len() + other.entries.len());
        let (mut i, mut j) = (0, 0);
        let (xs, ys) = (&self.entries, &other.entries);
        while i < xs.len() || j < ys.len() {
            let take_x = j >= ys.len() || (i < xs.len() && xs[i].0 < ys[j].0);
            let take_y = i >= xs.len() || (j < ys.len() && ys[j].0 < xs[i].0);
            let (k, c) = if take_x {
                i += 1;
                (xs[i - 1].0, a * &xs[i - 1].1)
            } else if take_y {
                j += 1;
                (ys[j - 1].0, b * &ys[j - 1].1)
            } else {
                i += 1;
                j += 1;
                (xs[i - 1].0, &(a * &xs[i - 1].1) + &(b * &ys[j - 1].1))
            };
            if !c.is_zero() {
                out.push((k, c));
            }
        }
        FiniteVector { entries: out }
    }

    pub fn add(&self, other: &FiniteVector) -> FiniteVector {
        self.combine(&ExactScalar::one(), other, &ExactScalar::one())
    }

    pub fn sub(&self, other: &FiniteVector) -> FiniteVector {
        self.combine(&ExactScalar::one(), other, &-ExactScalar::one())
    }

    pub fn scale(&self, a: &ExactScalar) -> FiniteVector {
        if a.is_zero() {
            return FiniteVector::zero();
        }
        FiniteVector { entries: self.entries.iter().map(|(k, c)| (*k, a * c)).collect() }
    }

    /// Keep only the coordinates with index in `[lo, hi)`.
    pub fn restrict(&self, lo: u64, hi: u64) -> FiniteVector {
        FiniteVector { entries: self.entries.iter().filter(|(k, _)| *k >= lo && *k < hi).cloned().collect() }
    }

    /// Exact `Σ |x_k|²`.
    pub fn norm_sq_l2(&self) -> ExactScalar {
        self.entries.iter().fold(ExactScalar::zero(), |acc, (_, c)| &acc + &c.square())
    }

    /// Exact `Σ |x_k|`.
    pub fn norm_l1(&self) -> ExactScalar {
        self.entries.iter().fold(ExactScalar::zero(), |acc, (_, c)| &acc + &c.abs())
    }

    /// Exact sup norm.
    pub fn norm_sup(&self) -> ExactScalar {
        self.entries.iter().fold(ExactScalar::zero(), |acc, (_, c)| ExactScalar::max(&acc, &c.abs()))
    }

    /// `‖x‖_p^p` for `p ∈ {1, 2}`.
    pub fn norm_power(&self, p: SpaceExponent) -> Result<NormPower, NormError> {
        match p.0 {
            1 => Ok(NormPower { p: 1, value: self.norm_l1() }),
            2 => Ok(NormPower { p: 2, value: self.norm_sq_l2() }),
            other => Err(NormError::UnsupportedExponent(other)),
        }
    }

    /// Exact test of `‖self − center‖_p^p ≤ eps_pow` (closed ball, compared
    /// on the `p`-th power so that no root is ever taken).
    pub fn in_ball(&self, center: &FiniteVector, eps_pow: &ExactScalar, p: SpaceExponent) -> Result<bool, NormError> {
        Ok(self.sub(center).norm_power(p)?.value <= *eps_pow)
    }

    /// Exact test of `‖self‖_p < radius`.
    pub fn norm_below(&self, radius: &ExactScalar, p: SpaceExponent) -> Result<bool, NormError> {
        let np = self.norm_power(p)?;
        Ok(match p.0 {
            1 => np.value < *radius,
            _ => np.value < radius.square(),
        })
    }
}

impl fmt::Debug for FiniteVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.entries.iter().map(|(k, c)| (k, c))).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> ExactScalar {
        ExactScalar::ratio(n, d)
    }

    #[test]
    fn combine_merges_and_cancels() {
        let x = FiniteVector::from_pairs([(0, q(1, 1)), (3, q(1, 2))]);
        let y = FiniteVector::from_pairs([(3, q(1, 1)), (5, q(2, 1))]);
        let z = x.combine(&q(2, 1), &y, &q(-1, 1));
        assert_eq!(z.entries(), &[(0, q(2, 1)), (5, q(-2, 1))]);
        assert_eq!(z.max_index(), Some(5));
        assert_eq!(z.coeff(3), ExactScalar::zero());
    }

    #[test]
    fn norms_and_balls() {
        let x = FiniteVector::from_pairs([(1, q(3, 1)), (2, q(-4, 1))]);
        assert_eq!(x.norm_sq_l2(), q(25, 1));
        assert_eq!(x.norm_l1(), q(7, 1));
        assert_eq!(x.norm_sup(), q(4, 1));
        assert!(!x.norm_below(&q(5, 1), SpaceExponent::L2).unwrap());
        assert!(x.norm_below(&q(501, 100), SpaceExponent::L2).unwrap());
        assert!(x.norm_below(&q(71, 10), SpaceExponent::L1).unwrap());
        assert!(x.norm_below(&q(1, 1), SpaceExponent(3)).is_err());
        // Closed balls: e_0 + ½e_1 lies on the boundary of B(e_0, ½).
        let y = FiniteVector::from_pairs([(0, q(1, 1)), (1, q(1, 2))]);
        assert!(y.in_ball(&FiniteVector::basis(0), &q(1, 4), SpaceExponent::L2).unwrap());
        assert!(!y.in_ball(&FiniteVector::basis(0), &q(1, 5), SpaceExponent::L2).unwrap());
    }

    #[test]
    fn restrict_keeps_window() {
        let x = FiniteVector::from_pairs((0..10).map(|k| (k, q(k as i64 + 1, 1))));
        let r = x.restrict(3, 6);
        assert_eq!(r.support_len(), 3);
        assert_eq!(r.min_index(), Some(3));
    }
}
