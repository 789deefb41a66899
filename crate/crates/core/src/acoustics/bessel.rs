//! Bessel function of the first kind, order one, and the piston directivity.
//!
//! Power series for |x| <= 12 (rounding error below 1e-12 there), Hankel
//! asymptotic expansion beyond, truncated at its smallest term (below 1e-10
//! at x = 12 and shrinking with x).

use std::f64::consts::{FRAC_PI_4, PI};

const SERIES_LIMIT: f64 = 12.0;

pub fn bessel_j1(x: f64) -> f64 {
    if x < 0.0 {
        return -bessel_j1(-x);
    }
    if x <= SERIES_LIMIT {
        series(x)
    } else {
        asymptotic(x)
    }
}

fn series(x: f64) -> f64 {
    // sum_m (-1)^m (x/2)^(2m+1) / (m! (m+1)!)
    let half = 0.5 * x;
    let q = -half * half;
    let mut term = half;
    let mut sum = term;
    for m in 1..60 {
        term *= q / (m as f64 * (m + 1) as f64);
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

fn asymptotic(x: f64) -> f64 {
    // a_k = prod_{i=1..k} (4 - (2i-1)^2) / (k! 8^k x^k)
    let mu = 4.0;
    let mut p = 0.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut prev = f64::INFINITY;
    for k in 0..60 {
        if k > 0 {
            let odd = (2 * k - 1) as f64;
            term *= (mu - odd * odd) / (k as f64 * 8.0 * x);
        }
        if term.abs() > prev {
            break;
        }
        prev = term.abs();
        // alternating signs within P (even k) and Q (odd k)
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign * term;
        } else {
            q += sign * term;
        }
        if term.abs() < 1e-17 {
            break;
        }
    }
    let chi = x - 3.0 * FRAC_PI_4;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// Far-field directivity of a baffled circular piston, `2 J1(x) / x` with
/// `x = k a sin(theta)`. Equals 1 at x = 0.
pub fn piston_directivity(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        let x2 = x * x;
        1.0 - x2 / 8.0 + x2 * x2 / 192.0
    } else {
        2.0 * bessel_j1(x) / x
    }
}
