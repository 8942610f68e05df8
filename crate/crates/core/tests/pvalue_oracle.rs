//! Frozen expected values for the p-value estimators.
//!
//! Sources of truth used to freeze the constants below, independent of the
//! implementation: exact rational arithmetic for the finite sums (the m = 100,
//! m_t = 251 column and the small closed forms), and 50-digit binary-splitting
//! evaluation of the binomial CDF for the quadrature column.

use permtest::pvalue::{
    binomial_cdf, p_exact, p_exact_integral, p_exact_sum, p_upper, type1_rate, Method, NullSpace,
    TestOutcome, EXACT_SUM_MAX_TERMS,
};

fn outcome(b: u64, m: u64) -> TestOutcome {
    TestOutcome::new(b, m).unwrap()
}

/// Exact-sum p-values for b = 0..=7 at m = 100 draws over a 251-assignment
/// space, frozen from rational arithmetic (error is one half ulp).
const EXACT_SUM_M100_MT251: [f64; 8] = [
    0.008047755468455398,
    0.017818516849160162,
    0.027718516112758152,
    0.037619828826790120,
    0.047520824616964530,
    0.057421813633769510,
    0.067322803705222400,
    0.077223793807845960,
];

/// The same p-values through the quadrature route.
const EXACT_INTEGRAL_M100_MT251: [f64; 8] = [
    0.008101416046920,
    0.017829557781200,
    0.027719401870100,
    0.037619854662100,
    0.047520824180300,
    0.057421813627900,
    0.067322803709400,
    0.077223793808000,
];

#[test]
fn exact_sum_matches_rational_freeze() {
    let space = NullSpace::Finite(251);
    for (b, &want) in EXACT_SUM_M100_MT251.iter().enumerate() {
        let got = p_exact_sum(&outcome(b as u64, 100), &space).unwrap();
        assert!(
            (got - want).abs() < 1e-9,
            "b = {b}: got {got}, want {want}"
        );
    }
}

#[test]
fn integral_route_matches_quadrature_freeze() {
    let space = NullSpace::Finite(251);
    for (b, &want) in EXACT_INTEGRAL_M100_MT251.iter().enumerate() {
        let got = p_exact_integral(&outcome(b as u64, 100), &space);
        assert!(
            (got - want).abs() < 1e-9,
            "b = {b}: got {got}, want {want}"
        );
    }
}

#[test]
fn upper_bound_is_a_plain_ratio() {
    for b in 0..8u64 {
        let got = p_upper(&outcome(b, 100));
        let want = (b as f64 + 1.0) / 101.0;
        assert!((got - want).abs() < 1e-10);
    }
    assert_eq!(p_upper(&outcome(0, 1)), 0.5);
    assert_eq!(p_upper(&outcome(3, 3)), 1.0);
}

#[test]
fn tiny_spaces_have_closed_forms() {
    // m = 3 draws, 5 assignments: sum_k F(1; 3, k/5) / 5 = 2/5
    let got = p_exact_sum(&outcome(1, 3), &NullSpace::Finite(4)).unwrap();
    assert!((got - 0.4).abs() < 1e-15);

    // m = 2 draws, 2 assignments: (F(0;2,1/2) + F(0;2,1)) / 2 = 1/8
    let got = p_exact_sum(&outcome(0, 2), &NullSpace::Finite(1)).unwrap();
    assert!((got - 0.125).abs() < 1e-15);
}

#[test]
fn binomial_cdf_matches_frozen_points() {
    // F(2; 5, 0.5) = 0.5 by symmetry
    assert!((binomial_cdf(2, 5, 0.5) - 0.5).abs() < 1e-15);

    // F(3; 100, 1/252), frozen from exact rational arithmetic
    let want = 0.9992820278559095;
    let got = binomial_cdf(3, 100, 1.0 / 252.0);
    assert!((got - want).abs() / want < 1e-12, "got {got}");

    // F(1; 10, 0.3) = 0.7^10 + 10 * 0.3 * 0.7^9 = 1493083459/1e10 exactly
    let want = 0.1493083459;
    let got = binomial_cdf(1, 10, 0.3);
    assert!((got - want).abs() / want < 1e-12, "got {got}");

    // mid-distribution point at large m, frozen from 50-digit arithmetic
    let want = 0.5004787306082883;
    let got = binomial_cdf(500_000, 1_000_000, 0.4999999);
    assert!((got - want).abs() / want < 1e-11, "got {got}");

    // deep left tail at large m
    let want = 3.704888008803023e-15;
    let got = binomial_cdf(100, 1_000_000, 0.0002);
    assert!((got - want).abs() / want < 1e-10, "got {got}");
}

#[test]
fn binomial_cdf_edge_cases() {
    assert_eq!(binomial_cdf(5, 5, 0.3), 1.0);
    assert_eq!(binomial_cdf(0, 10, 0.0), 1.0);
    assert_eq!(binomial_cdf(3, 10, 0.0), 1.0);
    assert_eq!(binomial_cdf(3, 10, 1.0), 0.0);
    assert_eq!(binomial_cdf(10, 10, 1.0), 1.0);
    let f0 = binomial_cdf(0, 4, 0.25);
    assert!((f0 - 0.31640625).abs() < 1e-15); // 0.75^4
}

#[test]
fn binomial_cdf_is_monotone_in_b_and_p() {
    for &(m, p) in &[(10u64, 0.3f64), (100, 0.01), (1000, 0.6)] {
        let mut last = 0.0;
        for b in 0..=m.min(50) {
            let f = binomial_cdf(b, m, p);
            assert!(f >= last, "F must be nondecreasing in b");
            last = f;
        }
    }
    for &(b, m) in &[(3u64, 10u64), (0, 100), (50, 100)] {
        let mut last = 1.0;
        for i in 1..=20 {
            let f = binomial_cdf(b, m, i as f64 / 20.0);
            assert!(f <= last + 1e-15, "F must be nonincreasing in p");
            last = f;
        }
    }
}

#[test]
fn dispatcher_picks_route_by_space_size() {
    // small space: term-by-term sum
    let r = p_exact(&outcome(2, 100), &NullSpace::Finite(251));
    assert_eq!(r.method, Method::ExactSum);
    assert!((r.p_exact - EXACT_SUM_M100_MT251[2]).abs() < 1e-9);
    assert!((r.p_hat - 0.02).abs() < 1e-15);
    assert!((r.p_upper - 3.0 / 101.0).abs() < 1e-15);
    assert!(r.abs_error_bound <= 1e-10);

    // threshold edge: 10_000 assignments still sums, 10_001 switches over
    let r = p_exact(&outcome(0, 100), &NullSpace::Finite(EXACT_SUM_MAX_TERMS as u64 - 1));
    assert_eq!(r.method, Method::ExactSum);
    let r = p_exact(&outcome(0, 100), &NullSpace::Finite(EXACT_SUM_MAX_TERMS as u64));
    assert_eq!(r.method, Method::IntegralApprox);

    // the two routes agree where they meet
    let sum = p_exact_sum(&outcome(0, 100), &NullSpace::Finite(9_999)).unwrap();
    let int = p_exact_integral(&outcome(0, 100), &NullSpace::Finite(9_999));
    assert!((sum - int).abs() < 1e-6);

    // unbounded space: p_exact collapses onto the upper bound
    let r = p_exact(&outcome(0, 1000), &NullSpace::Infinite);
    assert_eq!(r.method, Method::UpperBoundLimit);
    assert_eq!(r.p_exact, r.p_upper);
    assert!((r.p_exact - 1.0 / 1001.0).abs() < 1e-15);
}

#[test]
fn integral_route_approaches_upper_bound_for_huge_spaces() {
    // correction term shrinks like 1/(2 m_t): at m_t = 10^12 the two are
    // within 1e-9 of each other but still strictly ordered
    let o = outcome(0, 100);
    let space = NullSpace::Finite(1_000_000_000_000);
    let pe = p_exact_integral(&o, &space);
    let pu = p_upper(&o);
    assert!(pe < pu);
    assert!(pu - pe < 1e-9);
}

#[test]
fn sum_and_integral_agree_for_moderate_spaces() {
    // absolute 1e-4 band for m_t >= 250, m <= 1000; the b = 0, m = 250,
    // m_t = 250 corner sits at 9.8e-5 and pins the band tightest
    for &(b, m, mt) in &[
        (0u64, 250u64, 250u64),
        (3, 500, 999),
        (10, 1000, 2000),
        (0, 1000, 9999),
        (25, 600, 251),
        (5, 100, 251),
    ] {
        let o = outcome(b, m);
        let space = NullSpace::Finite(mt);
        let sum = p_exact_sum(&o, &space).unwrap();
        let int = p_exact_integral(&o, &space);
        assert!(
            (sum - int).abs() < 1e-4,
            "b={b} m={m} mt={mt}: {sum} vs {int}"
        );
    }
}

#[test]
fn type1_rate_matches_closed_form() {
    assert!((type1_rate(20, 0.05) - 2.0 / 21.0).abs() < 1e-15);
    assert!((type1_rate(100, 0.005) - 1.0 / 101.0).abs() < 1e-15);
    assert!((type1_rate(20, 0.25) - 6.0 / 21.0).abs() < 1e-15);
    // alpha below the resolution still rejects at rate 1/(m+1)
    assert!((type1_rate(100, 1e-9) - 1.0 / 101.0).abs() < 1e-15);
    assert_eq!(type1_rate(100, 1.0), 1.0);
}

#[test]
fn type1_rate_exceeds_nominal_on_the_lattice() {
    // at alpha = i/m the rate is (i+1)/(m+1) > i/m; the cases below fail
    // when m * (i / m) is floored naively in floating point
    for &(m, i) in &[(44u64, 15u64), (45, 13), (47, 3), (49, 1), (46, 13), (49, 8)] {
        let alpha = i as f64 / m as f64;
        let got = type1_rate(m, alpha);
        let want = (i as f64 + 1.0) / (m as f64 + 1.0);
        assert!(
            (got - want).abs() < 1e-15,
            "m={m} i={i}: got {got}, want {want}"
        );
        assert!(got > alpha, "m={m} i={i}");
    }
}

#[test]
fn type1_rate_is_monotone_in_alpha() {
    for m in [20u64, 100, 999] {
        let mut last = 0.0;
        for j in 1..200 {
            let r = type1_rate(m, j as f64 / 200.0);
            assert!(r >= last);
            last = r;
        }
    }
}

#[test]
fn estimators_never_return_zero_and_keep_their_order() {
    for &(b, m, mt) in &[
        (0u64, 10u64, 20u64),
        (0, 1000, 251),
        (5, 100, 251),
        (0, 3000, 9),
        (99, 100, 5000),
    ] {
        let o = outcome(b, m);
        let space = NullSpace::Finite(mt);
        let r = p_exact(&o, &space);
        assert!(r.p_exact > 0.0);
        assert!(r.p_upper > 0.0);
        assert!(r.p_exact < r.p_upper, "b={b} m={m} mt={mt}");
        assert!(r.p_exact <= 1.0);
        assert!(r.p_hat <= r.p_upper);
    }
    // b = m saturates both estimators at exactly one
    let r = p_exact(&outcome(7, 7), &NullSpace::Finite(100));
    assert_eq!(r.p_exact, 1.0);
    assert_eq!(r.p_upper, 1.0);
}

#[test]
fn exact_p_is_monotone_in_exceedance_count() {
    let space = NullSpace::Finite(251);
    let mut last = 0.0;
    for b in 0..=100u64 {
        let r = p_exact(&outcome(b, 100), &space);
        assert!(r.p_exact > last, "b = {b}");
        last = r.p_exact;
    }
}

#[test]
fn correction_shrinks_as_the_space_grows() {
    // the sum is a right-endpoint Riemann sum of a nonincreasing CDF, so
    // 0 < p_upper - p_exact <= 1/(m_t+1); the quadrature route integrates
    // over [0, 0.5/(m_t+1)] and its gap is capped by that interval length
    let o = outcome(4, 200);
    let pu = p_upper(&o);
    let mut last_gap = f64::INFINITY;
    for mt in [50u64, 100, 200, 400, 800, 1600, 12800, 102400] {
        let r = p_exact(&o, &NullSpace::Finite(mt));
        let gap = pu - r.p_exact;
        assert!(gap > 0.0);
        assert!(gap <= 1.0 / (mt as f64 + 1.0) + 1e-12, "mt = {mt}");
        if r.method == Method::IntegralApprox {
            assert!(gap <= 0.5 / (mt as f64 + 1.0) + 1e-12, "mt = {mt}");
        }
        assert!(gap < last_gap, "mt = {mt}");
        last_gap = gap;
    }
}

#[test]
fn rejected_outcomes() {
    assert!(TestOutcome::new(5, 4).is_err()); // b > m
    assert!(TestOutcome::new(0, 0).is_err()); // no draws
    assert!(TestOutcome::new(0, 1).is_ok());
}
