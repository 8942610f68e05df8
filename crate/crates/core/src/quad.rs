//! Fixed-order Gauss-Legendre quadrature with cached node tables.

use std::sync::OnceLock;

/// Nodes and weights on [-1, 1], computed by Newton iteration on the
/// Legendre recurrence. n must be >= 2.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut table = vec![(0.0, 0.0); n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Chebyshev-based starting guess for the i-th positive root
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 1..=n {
                let jf = j as f64;
                let p3 = p2;
                p2 = p1;
                p1 = ((2.0 * jf - 1.0) * x * p2 - (jf - 1.0) * p3) / jf;
            }
            pp = nf * (x * p1 - p2) / (x * x - 1.0);
            let dx = p1 / pp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * pp * pp);
        table[i] = (-x, w);
        table[n - 1 - i] = (x, w);
    }
    table
}

fn nodes_64() -> &'static [(f64, f64)] {
    static CACHE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    CACHE.get_or_init(|| gauss_legendre(64))
}

fn nodes_128() -> &'static [(f64, f64)] {
    static CACHE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    CACHE.get_or_init(|| gauss_legendre(128))
}

fn integrate_with(table: &[(f64, f64)], f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut sum = 0.0;
    for &(x, w) in table {
        sum += w * f(mid + half * x);
    }
    sum * half
}

/// 128-node rule over [a, b].
pub(crate) fn integrate_128(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    integrate_with(nodes_128(), f, a, b)
}

/// 64-node rule over [a, b], used to estimate the quadrature error.
pub(crate) fn integrate_64(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    integrate_with(nodes_64(), f, a, b)
}
