//! Orbit iteration, visit statistics and empirical densities.
//!
//! Every membership decision `T^j x ∈ B(center, ε)` is exact: the ball test
//! compares `‖T^j x − center‖_p^p` with `ε^p` as rationals.  Densities are
//! reported as exact fractions `count/(j+1)` at geometric checkpoints, which
//! exposes the lim inf / lim sup structure of visit sets at a finite horizon.
//! All numbers here are empirical; nothing in this module proves a vector is
//! hypercyclic.

use serde::Serialize;
use thiserror::Error;

use crate::ctype::{CTypeError, CTypeOperator};
use crate::scalar::ExactScalar;
use crate::vector::{FiniteVector, NormError};

/// Failures of orbit sweeps.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OrbitError {
    #[error(transparent)]
    Geometry(#[from] CTypeError),
    #[error(transparent)]
    Norm(#[from] NormError),
    #[error("blocks must satisfy n < l ≤ N_max, got n = {n}, l = {l}")]
    BlockOrder { n: u64, l: u64 },
}

/// The indicator of `T^j x ∈ B(center, ε)` for `0 ≤ j ≤ J`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisitSeries {
    horizon: u64,
    bits: Vec<u64>,
    /// Number of hits strictly before each 64-bit word.
    word_prefix: Vec<u64>,
}

impl VisitSeries {
    pub fn from_hits<I: IntoIterator<Item = bool>>(hits: I) -> Self {
        let mut bits = Vec::new();
        let mut len = 0u64;
        for h in hits {
            if len.is_multiple_of(64) {
                bits.push(0u64);
            }
            if h {
                *bits.last_mut().expect("word pushed above") |= 1 << (len % 64);
            }
            len += 1;
        }
        assert!(len > 0, "a visit series covers at least j = 0");
        let mut word_prefix = Vec::with_capacity(bits.len());
        let mut acc = 0;
        for w in &bits {
            word_prefix.push(acc);
            acc += w.count_ones() as u64;
        }
        VisitSeries { horizon: len - 1, bits, word_prefix }
    }

    /// The last step `J`.
    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn hit(&self, j: u64) -> bool {
        j <= self.horizon && self.bits[(j / 64) as usize] >> (j % 64) & 1 == 1
    }

    /// `#{0 ≤ i ≤ j : hit(i)}`.
    pub fn count_upto(&self, j: u64) -> u64 {
        let j = j.min(self.horizon);
        let w = (j / 64) as usize;
        let mask = if j % 64 == 63 { u64::MAX } else { (1u64 << (j % 64 + 1)) - 1 };
        self.word_prefix[w] + (self.bits[w] & mask).count_ones() as u64
    }

    pub fn total(&self) -> u64 {
        self.count_upto(self.horizon)
    }

    /// `count_upto(j)/(j+1)`.
    pub fn density_at(&self, j: u64) -> ExactScalar {
        ExactScalar::ratio(self.count_upto(j), j + 1)
    }

    pub fn hits(&self) -> impl Iterator<Item = u64> + '_ {
        (0..=self.horizon).filter(|&j| self.hit(j))
    }

    /// RFC-4180 rows `(j, in_ball, prefix_count, prefix_density, prefix_density_exact)`.
    pub fn csv_rows(&self, digits: usize) -> Vec<[String; 5]> {
        let mut count = 0;
        (0..=self.horizon)
            .map(|j| {
                let h = self.hit(j);
                count += h as u64;
                let d = ExactScalar::ratio(count, j + 1);
                [j.to_string(), (h as u8).to_string(), count.to_string(), d.to_decimal_string(digits), d.to_fraction_string()]
            })
            .collect()
    }
}

/// Sweep `T^j x` for `0 ≤ j ≤ J` and record closed-ball membership.
///
/// `eps_pow` is the threshold on `‖·‖_p^p` (for `p = 2` the squared radius).
pub fn visit_series(
    op: &CTypeOperator,
    x: &FiniteVector,
    center: &FiniteVector,
    eps_pow: &ExactScalar,
    horizon: u64,
) -> Result<VisitSeries, OrbitError> {
    let mut y = x.clone();
    let mut hits = Vec::with_capacity(horizon as usize + 1);
    for j in 0..=horizon {
        hits.push(y.in_ball(center, eps_pow, op.p())?);
        if j < horizon {
            y = op.apply(&y)?;
        }
    }
    Ok(VisitSeries::from_hits(hits))
}

/// A density sample `count/(j+1)` at a checkpoint `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Checkpoint {
    pub j: u64,
    pub count: u64,
    pub density: ExactScalar,
}

/// Empirical lower/upper densities of a visit series.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DensityReport {
    pub horizon: u64,
    pub burn_in: u64,
    /// Minimum of the checkpoint densities beyond the burn-in.
    pub lower: ExactScalar,
    /// Maximum of the checkpoint densities beyond the burn-in.
    pub upper: ExactScalar,
    pub checkpoints: Vec<Checkpoint>,
    /// Period of the swept vector, when known; the density over one full
    /// period is then the true density.
    pub period: Option<u64>,
    pub period_density: Option<ExactScalar>,
}

/// Default geometric checkpoint ratio `r` (prefix lengths `⌈(1+r)^m⌉`).
pub const DEFAULT_CHECKPOINT_RATIO: f64 = 0.1;

/// Checkpoint indices: prefix lengths `⌈(1+r)^m⌉`, multiples of `period`, and
/// the full horizon, each shifted to the last index `j = length − 1`.
pub fn checkpoints(horizon: u64, ratio: f64, period: Option<u64>) -> Vec<u64> {
    let mut out = Vec::new();
    let mut x = 1.0f64;
    loop {
        let len = x.ceil() as u64;
        if len > horizon + 1 {
            break;
        }
        out.push(len - 1);
        x *= 1.0 + ratio;
    }
    if let Some(per) = period.filter(|&p| p > 0) {
        let mut len = per;
        while len <= horizon + 1 {
            out.push(len - 1);
            len += per;
        }
    }
    out.push(horizon);
    out.sort_unstable();
    out.dedup();
    out
}

/// Summarize a visit series at the given checkpoints.
pub fn density_report(series: &VisitSeries, ratio: f64, burn_in: u64, period: Option<u64>) -> DensityReport {
    let cps: Vec<Checkpoint> = checkpoints(series.horizon(), ratio, period)
        .into_iter()
        .map(|j| Checkpoint { j, count: series.count_upto(j), density: series.density_at(j) })
        .collect();
    let tail: Vec<&Checkpoint> = cps.iter().filter(|c| c.j >= burn_in).collect();
    let tail = if tail.is_empty() { vec![cps.last().expect("horizon checkpoint")] } else { tail };
    let lower = tail.iter().map(|c| c.density.clone()).min().expect("nonempty");
    let upper = tail.iter().map(|c| c.density.clone()).max().expect("nonempty");
    let period_density = period.filter(|&p| p >= 1 && p <= series.horizon() + 1).map(|p| series.density_at(p - 1));
    DensityReport { horizon: series.horizon(), burn_in, lower, upper, checkpoints: cps, period, period_density }
}

/// The true visit density of a finitely supported (hence periodic) vector:
/// `#{0 ≤ j < per(x) : T^j x ∈ B}/per(x)` with `per(x)` the lcm of block periods.
pub fn exact_density_of_periodic(
    op: &CTypeOperator,
    x: &FiniteVector,
    center: &FiniteVector,
    eps_pow: &ExactScalar,
) -> Result<ExactScalar, OrbitError> {
    let per = op.period_of(x)?;
    let series = visit_series(op, x, center, eps_pow, per - 1)?;
    Ok(ExactScalar::ratio(series.total(), per))
}

/// Result of [`estimate_c`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CEstimate {
    /// Index in the sample attaining the largest upper density.
    pub best: usize,
    pub report: DensityReport,
    pub upper_by_sample: Vec<ExactScalar>,
}

/// Largest empirical upper density of visits to `B(0, ε)` over a sample.
///
/// For finitely supported inputs this is a statistic of periodic orbits; it is
/// a lower-side estimate of `c(T)` to be compared with analytic upper bounds.
pub fn estimate_c(op: &CTypeOperator, sample: &[FiniteVector], eps_pow: &ExactScalar, horizon: u64) -> Result<CEstimate, OrbitError> {
    assert!(!sample.is_empty(), "estimate_c needs at least one vector");
    let zero = FiniteVector::zero();
    let mut best: Option<(usize, DensityReport)> = None;
    let mut uppers = Vec::with_capacity(sample.len());
    for (i, x) in sample.iter().enumerate() {
        let series = visit_series(op, x, &zero, eps_pow, horizon)?;
        let period = op.period_of(x).ok();
        let report = density_report(&series, DEFAULT_CHECKPOINT_RATIO, 0, period);
        uppers.push(report.upper.clone());
        if best.as_ref().is_none_or(|(_, b)| report.upper > b.upper) {
            best = Some((i, report));
        }
    }
    let (best, report) = best.expect("nonempty sample");
    Ok(CEstimate { best, report, upper_by_sample: uppers })
}

/// `max_j ‖P_n T^j P_l x‖₂²` over one full period of `P_l x` (or over
/// `0 ≤ j ≤ N` when `j_limit = Some(N)`), as an exact rational.
pub fn sup_over_period(op: &CTypeOperator, n: u64, l: u64, x: &FiniteVector, j_limit: Option<u64>) -> Result<ExactScalar, OrbitError> {
    if n >= l || l > op.n_max() {
        return Err(OrbitError::BlockOrder { n, l });
    }
    let (lo_l, hi_l) = (op.b(l)?, op.b(l + 1)?);
    let (lo_n, hi_n) = (op.b(n)?, op.b(n + 1)?);
    let period = 2 * (hi_l - lo_l);
    let last = j_limit.map_or(period - 1, |lim| lim.min(period - 1));
    // Coordinates below block n never come back up, so they are dropped.
    let mut y = x.restrict(lo_l, hi_l);
    let mut best = ExactScalar::zero();
    for j in 0..=last {
        let here = y.restrict(lo_n, hi_n).norm_sq_l2();
        if here > best {
            best = here;
        }
        if j < last {
            y = op.apply(&y)?.restrict(lo_n, hi_l);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use crate::vector::SpaceExponent;

    fn op55() -> CTypeOperator {
        CTypeOperator::new(presets::example55(1), 7, SpaceExponent::L2).unwrap()
    }

    #[test]
    fn e0_series() {
        let op = op55();
        let e0 = FiniteVector::basis(0);
        let all = visit_series(&op, &e0, &FiniteVector::zero(), &ExactScalar::from_int(4), 20).unwrap();
        assert_eq!(all.total(), 21);
        let none = visit_series(&op, &e0, &e0.scale(&ExactScalar::from_int(2)), &ExactScalar::ratio(1, 4), 20).unwrap();
        assert_eq!(none.total(), 0);
        assert_eq!(exact_density_of_periodic(&op, &e0, &e0, &ExactScalar::ratio(1, 4)).unwrap(), ExactScalar::ratio(1, 2));
        assert_eq!(exact_density_of_periodic(&op, &e0, &FiniteVector::zero(), &ExactScalar::from_int(4)).unwrap(), ExactScalar::one());
    }

    #[test]
    fn prefix_counts_are_consistent() {
        let hits: Vec<bool> = (0..300).map(|j| j % 3 == 0 || j % 7 == 2).collect();
        let s = VisitSeries::from_hits(hits.clone());
        let mut c = 0;
        for (j, h) in hits.iter().enumerate() {
            c += *h as u64;
            assert_eq!(s.count_upto(j as u64), c);
        }
        let rows = s.csv_rows(4);
        assert_eq!(rows.len(), 300);
        assert_eq!(rows[0], ["0", "1", "1", "1.0000", "1"].map(String::from));
    }

    #[test]
    fn report_brackets_period_density() {
        let op = op55();
        let b1 = op.b(1).unwrap();
        let x = FiniteVector::basis(b1);
        let exact = exact_density_of_periodic(&op, &x, &x, &ExactScalar::ratio(1, 4)).unwrap();
        let per = op.period_of(&x).unwrap();
        let series = visit_series(&op, &x, &x, &ExactScalar::ratio(1, 4), 3 * per - 1).unwrap();
        assert_eq!(series.total(), 3 * series.count_upto(per - 1));
        let rep = density_report(&series, DEFAULT_CHECKPOINT_RATIO, 0, Some(per));
        assert!(rep.lower <= exact && exact <= rep.upper);
        assert_eq!(rep.period_density, Some(exact));
    }

    #[test]
    fn sup_over_period_zero_cases() {
        let op = op55();
        // Block 3 couples into φ(3) = 1, never into block 2.
        let x = FiniteVector::from_pairs([(op.b(3).unwrap() + 4, ExactScalar::one())]);
        assert!(sup_over_period(&op, 2, 3, &x, None).unwrap().is_zero());
        assert!(!sup_over_period(&op, 1, 3, &x, None).unwrap().is_zero());
        assert!(sup_over_period(&op, 1, 3, &FiniteVector::basis(0), None).unwrap().is_zero());
    }
}
