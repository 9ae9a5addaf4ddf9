//! Adaptive Gauss–Kronrod quadrature on finite intervals.
//!
//! Used for the deterministic one-dimensional integrals of the crate
//! (covariance function, |ℋ| norms, closed-form moment integrals). Endpoint
//! power singularities are handled by bisection toward the worst interval;
//! callers that know the exponent should substitute it away first.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

// 15-point Kronrod abscissae and weights, with the embedded 7-point Gauss weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 4000;

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kron += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Segment {
        a,
        b,
        value: kron * half,
        error: ((kron - gauss) * half).abs(),
    }
}

/// Integrates `f` over `[a, b]` to within `max(abs_tol, rel_tol·|I|)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Quadrature(format!("non-finite bounds [{a}, {b}]")));
    }
    if a == b {
        return Ok(0.0);
    }
    if a > b {
        return integrate(f, b, a, abs_tol, rel_tol).map(|v| -v);
    }
    let first = kronrod(&f, a, b);
    let mut total = first.value;
    let mut err = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    while err > abs_tol.max(rel_tol * total.abs()) {
        if heap.len() >= MAX_INTERVALS {
            return Err(Error::Quadrature(format!(
                "no convergence on [{a}, {b}] after {MAX_INTERVALS} intervals (error estimate {err:e})"
            )));
        }
        let worst = heap.pop().expect("heap is non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval below floating resolution; accept what we have
            heap.push(Segment { error: 0.0, ..worst });
            err -= worst.error;
            continue;
        }
        let left = kronrod(&f, worst.a, mid);
        let right = kronrod(&f, mid, worst.b);
        total += left.value + right.value - worst.value;
        err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        if !total.is_finite() {
            return Err(Error::Quadrature(format!("non-finite integrand on [{a}, {b}]")));
        }
    }
    // re-sum to shed accumulated update rounding
    Ok(heap.iter().map(|s| s.value).sum())
}

/// `∫_0^L (L−x)^{p}·h(x) dx` for `p > −1`, with the endpoint power removed by
/// the substitution `L − x = y^{1/(p+1)}`.
pub fn integrate_endpoint_power<F: Fn(f64) -> f64>(
    h: F,
    length: f64,
    p: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<f64> {
    if p <= -1.0 {
        return Err(Error::Quadrature(format!("endpoint exponent {p} is not integrable")));
    }
    let q = 1.0 / (p + 1.0);
    let upper = length.powf(p + 1.0);
    integrate(|y| h(length - y.powf(q)), 0.0, upper, abs_tol, rel_tol).map(|v| v * q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_are_exact() {
        let v = integrate(|x| x.powi(5) - 2.0 * x, 0.0, 2.0, 1e-14, 1e-14).unwrap();
        assert!((v - (64.0 / 6.0 - 4.0)).abs() < 1e-12);
    }

    #[test]
    fn reversed_bounds_flip_sign() {
        let v = integrate(f64::exp, 1.0, 0.0, 1e-13, 1e-13).unwrap();
        assert!((v + (std::f64::consts::E - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn sqrt_endpoint_converges_by_bisection() {
        let v = integrate(f64::sqrt, 0.0, 1.0, 1e-12, 1e-12).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-11);
    }

    #[test]
    fn substitution_handles_negative_power() {
        // ∫_0^1 (1−x)^{-0.7} dx = 1/0.3
        let v = integrate_endpoint_power(|_| 1.0, 1.0, -0.7, 1e-13, 1e-13).unwrap();
        assert!((v - 1.0 / 0.3).abs() < 1e-10);
    }

    #[test]
    fn non_integrable_exponent_rejected() {
        assert!(integrate_endpoint_power(|_| 1.0, 1.0, -1.0, 1e-10, 1e-10).is_err());
    }
}
