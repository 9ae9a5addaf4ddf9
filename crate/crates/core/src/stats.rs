//! Batch statistics with a fixed reduction order, so results do not depend on
//! how paths were scheduled.

use serde::{Deserialize, Serialize};

/// Pairwise (tree) summation; the split points depend only on the length.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 16;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Sample mean, unbiased variance and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    pub stderr: f64,
}

impl Moments {
    pub fn of(xs: &[f64]) -> Self {
        let count = xs.len();
        if count == 0 {
            return Self {
                count,
                mean: f64::NAN,
                variance: f64::NAN,
                stderr: f64::NAN,
            };
        }
        let n = count as f64;
        let mean = pairwise_sum(xs) / n;
        let variance = if count > 1 {
            let sq: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
            pairwise_sum(&sq) / (n - 1.0)
        } else {
            0.0
        };
        Self {
            count,
            mean,
            variance,
            stderr: (variance / n).sqrt(),
        }
    }

    /// Moments of `f(x)` over the sample.
    pub fn of_map<F: Fn(f64) -> f64>(xs: &[f64], f: F) -> Self {
        let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
        Self::of(&ys)
    }

    /// `|mean − target| ≤ k·stderr`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.stderr
    }

    /// Standard error of the sample variance, `√((m₄ − s⁴(n−3)/(n−1))/n)`.
    pub fn variance_stderr(xs: &[f64]) -> f64 {
        let m = Self::of(xs);
        let n = m.count as f64;
        let c4: Vec<f64> = xs.iter().map(|x| (x - m.mean).powi(4)).collect();
        let m4 = pairwise_sum(&c4) / n;
        let s4 = m.variance * m.variance;
        ((m4 - s4 * (n - 3.0) / (n - 1.0)) / n).max(0.0).sqrt()
    }
}

/// Sample covariance of two equally long samples.
pub fn covariance(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len(), "covariance of samples with different sizes");
    let n = xs.len() as f64;
    let mx = pairwise_sum(xs) / n;
    let my = pairwise_sum(ys) / n;
    let prod: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).collect();
    pairwise_sum(&prod) / (n - 1.0)
}

/// Least-squares slope of `y` on `x`.
pub fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    covariance(xs, ys) / covariance(xs, xs)
}
