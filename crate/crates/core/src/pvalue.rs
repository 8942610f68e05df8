//! P-value estimators for randomization tests.
//!
//! A test that drew `m` resampled statistics and saw `b` of them at least as
//! extreme as the observed one has the unbiased-looking estimate `b/m`, which
//! can be zero. Three quantities here never are:
//!
//! * [`p_upper`]: `(b+1)/(m+1)`, exact when the `m` draws are distinct
//!   relabelings (sampling without replacement, or full enumeration);
//! * [`p_exact_sum`]: the with-replacement exact p-value, an average of
//!   binomial CDFs over the achievable null p-values, for finite spaces;
//! * [`p_exact_integral`]: the same quantity through a quadrature shortcut,
//!   `p_upper` minus a small correction integral, for spaces too large to sum.
//!
//! [`p_exact`] picks the route by space size and reports which one it took
//! together with an absolute error bound.

use crate::combinatorics::{SpaceCount, OVERFLOW_THRESHOLD};
use crate::quad;
use crate::special::{betacf, dbinom_raw};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest number of CDF terms the dispatcher will sum exactly; above this it
/// switches to quadrature, whose cost does not grow with the space.
pub const EXACT_SUM_MAX_TERMS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PValueError {
    #[error("a test outcome needs at least one draw")]
    ZeroDraws,
    #[error("{n_exceed} exceedances out of {n_draws} draws is impossible")]
    ExceedancesExceedDraws { n_exceed: u64, n_draws: u64 },
    #[error("the exact sum needs a finite assignment space")]
    InfiniteSpace,
}

/// Count of resampled statistics at least as extreme as the observed one
/// (`n_exceed`) among `n_draws` resamples. Invariant: n_exceed <= n_draws,
/// n_draws >= 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestOutcome {
    n_exceed: u64,
    n_draws: u64,
}

impl TestOutcome {
    pub fn new(n_exceed: u64, n_draws: u64) -> Result<Self, PValueError> {
        if n_draws == 0 {
            return Err(PValueError::ZeroDraws);
        }
        if n_exceed > n_draws {
            return Err(PValueError::ExceedancesExceedDraws { n_exceed, n_draws });
        }
        Ok(Self { n_exceed, n_draws })
    }

    pub fn n_exceed(&self) -> u64 {
        self.n_exceed
    }

    pub fn n_draws(&self) -> u64 {
        self.n_draws
    }
}

/// Size of the null space the draws came from: `Finite(m_t)` when the data
/// admit `m_t` distinct relabelings besides the observed one, `Infinite` when
/// the count overflowed or no enumeration applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NullSpace {
    Finite(u64),
    Infinite,
}

impl NullSpace {
    /// The space a test over a counted relabeling space draws from: the
    /// observed assignment is excluded, so `m_t = total - 1`.
    pub fn from_space_count(count: &SpaceCount) -> Self {
        match count.total() {
            Some(total) if !count.is_overflowed() => NullSpace::Finite(total - 1),
            _ => NullSpace::Infinite,
        }
    }
}

/// Which route [`p_exact`] took.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ExactSum,
    IntegralApprox,
    UpperBoundLimit,
}

/// Everything a test reports about its p-value. `abs_error_bound` bounds
/// |p_exact - truth| for the route taken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PValueReport {
    pub p_hat: f64,
    pub p_upper: f64,
    pub p_exact: f64,
    pub abs_error_bound: f64,
    pub method: Method,
}

/// `(b+1)/(m+1)`: the smallest never-zero estimate, and the exact p-value
/// when draws are distinct relabelings of the observed data.
pub fn p_upper(outcome: &TestOutcome) -> f64 {
    (outcome.n_exceed as f64 + 1.0) / (outcome.n_draws as f64 + 1.0)
}

/// P(X <= b) for X ~ Binomial(m, p).
///
/// Direct summation for m <= 64; otherwise the incomplete-beta continued
/// fraction, taken from whichever tail converges, with the prefactor routed
/// through the saddle-point PMF so large m loses no accuracy.
pub fn binomial_cdf(b: u64, m: u64, p: f64) -> f64 {
    if m == 0 || b >= m || p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return 0.0;
    }
    if b == 0 {
        return (m as f64 * (-p).ln_1p()).exp();
    }
    let q = 1.0 - p;
    if m <= 64 {
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for x in 0..=b {
            let term = dbinom_raw(x as f64, m as f64, p, q);
            let y = term - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        return sum.min(1.0);
    }
    let x = b as f64;
    let n = m as f64;
    // F(b; m, p) = I_q(m-b, b+1); each tail's continued fraction converges
    // for its argument below (a+1)/(a+b+2), so exactly one branch applies
    let f = if p < (x + 2.0) / (n + 3.0) {
        1.0 - q * dbinom_raw(x + 1.0, n, p, q) * betacf(x + 1.0, n - x, p)
    } else {
        p * dbinom_raw(x, n, p, q) * betacf(n - x, x + 1.0, q)
    };
    f.clamp(0.0, 1.0)
}

/// With-replacement exact p-value by term-by-term summation:
/// mean of F(b; m, k/(m_t+1)) over k = 1..=m_t+1.
///
/// Cost is linear in the space size; [`p_exact`] only routes here below
/// [`EXACT_SUM_MAX_TERMS`], but any finite space is accepted.
pub fn p_exact_sum(outcome: &TestOutcome, space: &NullSpace) -> Result<f64, PValueError> {
    let mt = match space {
        NullSpace::Finite(mt) => *mt,
        NullSpace::Infinite => return Err(PValueError::InfiniteSpace),
    };
    let terms = mt + 1;
    let denom = terms as f64;
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for k in 1..=terms {
        let term = binomial_cdf(outcome.n_exceed, outcome.n_draws, k as f64 / denom);
        // F is nonincreasing in p, so once a term underflows the rest are zero
        if term == 0.0 {
            break;
        }
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    Ok((sum / denom).clamp(f64::MIN_POSITIVE, 1.0))
}

/// With-replacement exact p-value by quadrature: `p_upper` minus the integral
/// of the CDF over [0, 0.5/(m_t+1)], on a fixed 128-node Gauss-Legendre rule.
/// An infinite space makes the correction interval empty.
pub fn p_exact_integral(outcome: &TestOutcome, space: &NullSpace) -> f64 {
    // F(m; m, p) is identically 1, making the average exactly 1; the
    // correction identity below assumes F vanishes at p = 1 and would
    // subtract a spurious term here
    if outcome.n_exceed == outcome.n_draws {
        return 1.0;
    }
    let pu = p_upper(outcome);
    let half_step = match space {
        NullSpace::Finite(mt) => 0.5 / (*mt as f64 + 1.0),
        NullSpace::Infinite => return pu,
    };
    let correction = quad::integrate_128(
        |p| binomial_cdf(outcome.n_exceed, outcome.n_draws, p),
        0.0,
        half_step,
    );
    (pu - correction).clamp(f64::MIN_POSITIVE, 1.0)
}

/// Route the exact p-value by space size and report the estimate family.
///
/// Finite spaces small enough to sum take the exact route (error below
/// 1e-10: summation error only); larger finite spaces take the quadrature
/// route (error bounded by comparing the 128- and 64-node rules); an
/// infinite space leaves `p_upper` itself, whose gap to the exact value is
/// below half a spacing of the finest lattice a non-overflowed count allows.
pub fn p_exact(outcome: &TestOutcome, space: &NullSpace) -> PValueReport {
    let pu = p_upper(outcome);
    let p_hat = outcome.n_exceed as f64 / outcome.n_draws as f64;
    let (p, method, bound) = match space {
        NullSpace::Infinite => (
            pu,
            Method::UpperBoundLimit,
            0.5 / OVERFLOW_THRESHOLD as f64,
        ),
        NullSpace::Finite(mt) if (*mt as u128 + 1) <= EXACT_SUM_MAX_TERMS as u128 => {
            let p = p_exact_sum(outcome, space).expect("space is finite");
            (p, Method::ExactSum, 1e-10)
        }
        NullSpace::Finite(_) if outcome.n_exceed == outcome.n_draws => {
            // saturated outcome: the exact value is 1 on any space
            (1.0, Method::IntegralApprox, 0.0)
        }
        NullSpace::Finite(mt) => {
            let half_step = 0.5 / (*mt as f64 + 1.0);
            let f = |p: f64| binomial_cdf(outcome.n_exceed, outcome.n_draws, p);
            let fine = quad::integrate_128(&f, 0.0, half_step);
            let coarse = quad::integrate_64(&f, 0.0, half_step);
            let p = (pu - fine).clamp(f64::MIN_POSITIVE, 1.0);
            (p, Method::IntegralApprox, (fine - coarse).abs())
        }
    };
    PValueReport {
        p_hat,
        p_upper: pu,
        p_exact: p,
        abs_error_bound: bound,
        method,
    }
}

/// Exact rejection rate at level alpha of a test that estimates its p-value
/// as b/m: (floor(m alpha) + 1)/(m + 1), never below alpha.
///
/// p-hat is a lattice variable, so m*alpha is snapped to the nearest integer
/// when within relative 1e-12 before flooring; otherwise grid points like
/// alpha = 15/44 land on 15.000000000000002 and floor the wrong way.
pub fn type1_rate(m: u64, alpha: f64) -> f64 {
    let i = floor_snapped(m as f64 * alpha);
    ((i + 1.0) / (m as f64 + 1.0)).min(1.0)
}

pub(crate) fn floor_snapped(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-12 * r.max(1.0) {
        r
    } else {
        x.floor()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn continued_fraction_route_matches_direct_summation() {
        // both sides are internal but follow independent paths: term sums of
        // the saddle-point PMF vs the incomplete-beta tails
        for &(b, m, p) in &[
            (3u64, 100u64, 0.02f64),
            (50, 500, 0.11),
            (120, 130, 0.9),
            (2, 1000, 0.001),
            (700, 1000, 0.68),
        ] {
            let q = 1.0 - p;
            let mut direct = 0.0f64;
            let mut comp = 0.0f64;
            for x in 0..=b {
                let term = dbinom_raw(x as f64, m as f64, p, q);
                let y = term - comp;
                let t = direct + y;
                comp = (t - direct) - y;
                direct = t;
            }
            let got = binomial_cdf(b, m, p);
            assert!(
                (got - direct).abs() / direct < 1e-12,
                "b={b} m={m} p={p}: {got} vs {direct}"
            );
        }
    }

    #[test]
    fn snapping_only_fires_next_to_integers() {
        assert_eq!(floor_snapped(15.000000000000002), 15.0);
        assert_eq!(floor_snapped(14.999999999999998), 15.0);
        assert_eq!(floor_snapped(15.2), 15.0);
        assert_eq!(floor_snapped(15.999), 15.0);
        assert_eq!(floor_snapped(0.0), 0.0);
        assert_eq!(floor_snapped(1e-13), 0.0); // within 1e-12 of zero's scale
    }

    #[test]
    fn report_fields_are_consistent() {
        let o = TestOutcome::new(3, 50).unwrap();
        let r = p_exact(&o, &NullSpace::Finite(99));
        assert_eq!(r.p_hat, 0.06);
        assert_eq!(r.p_upper, 4.0 / 51.0);
        assert!(r.p_exact > 0.0 && r.p_exact < r.p_upper);
        assert_eq!(r.method, Method::ExactSum);
    }

    #[test]
    fn infinite_space_collapses_to_the_upper_bound() {
        let o = TestOutcome::new(0, 9).unwrap();
        assert_eq!(p_exact_integral(&o, &NullSpace::Infinite), 0.1);
        assert!(p_exact_sum(&o, &NullSpace::Infinite).is_err());
        let r = p_exact(&o, &NullSpace::Infinite);
        assert_eq!(r.p_exact, 0.1);
        assert!(r.abs_error_bound < 1e-16);
    }
}
