//! Monte Carlo covariance of simulated paths on a few coarse nodes, against the
//! exact covariance `R`.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::runner::{ensure_finite, run_paths};
use super::VERSION;
use crate::error::{Error, Result};
use crate::paths::{conditional_mean_b, BrownianPath, VolterraWeights};
use crate::stats::{covariance, pairwise_sum, Moments};

/// Number of coarse nodes `T/m, 2T/m, …, T`.
pub const COARSE_NODES: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceEntry {
    pub s: f64,
    pub t: f64,
    /// `mean(B_s B_t)`; the mean of `B` is known to be zero.
    pub empirical: f64,
    pub stderr: f64,
    pub exact: f64,
    /// `(empirical − exact)/stderr`.
    pub z: f64,
}

/// Estimates of `Var(B_T)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminalVariance {
    pub exact: f64,
    /// Unbiased sample variance.
    pub plain: f64,
    pub plain_stderr: f64,
    /// `mean(B_T²) − β(mean(W_T²) − T)` with the fitted `β`.
    pub control_variate: f64,
    pub control_variate_stderr: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceReport {
    pub version: String,
    pub config: ExperimentConfig,
    pub entries: Vec<CovarianceEntry>,
    pub terminal: TerminalVariance,
    pub max_rel_error: f64,
    pub max_abs_z: f64,
    #[serde(skip)]
    pub runtime_secs: f64,
}

pub fn run_covariance_validation(cfg: &ExperimentConfig) -> Result<CovarianceReport> {
    cfg.validate()?;
    let start = Instant::now();
    let h = cfg.hurst_config()?;
    let grid = cfg.grid()?;
    let n = grid.steps();
    if n % COARSE_NODES != 0 {
        return Err(Error::Config(format!(
            "covariance validation needs steps divisible by {COARSE_NODES}, got {n}"
        )));
    }
    let weights = Arc::new(VolterraWeights::new(h, grid));
    let idx: Vec<usize> = (1..=COARSE_NODES).map(|k| k * n / COARSE_NODES).collect();

    // per path: B at the coarse nodes, then W_T
    let samples = run_paths(cfg.paths, cfg.workers, |p| {
        let w = BrownianPath::simulate(grid, cfg.seed, p);
        let mut v = idx
            .iter()
            .map(|&i| conditional_mean_b(&w, &weights, i, i))
            .collect::<Result<Vec<f64>>>()?;
        v.push(pairwise_sum(&w.increments()[..n]));
        ensure_finite(&v, cfg.seed, p)?;
        Ok(v)
    })?;

    let column = |k: usize| -> Vec<f64> { samples.iter().map(|v| v[k]).collect() };
    let mut entries = Vec::new();
    for a in 0..COARSE_NODES {
        for b in a..COARSE_NODES {
            let (xa, xb) = (column(a), column(b));
            let prod: Vec<f64> = xa.iter().zip(&xb).map(|(x, y)| x * y).collect();
            let m = Moments::of(&prod);
            let (s, t) = (grid.node(idx[a]), grid.node(idx[b]));
            let exact = h.covariance(s, t)?;
            entries.push(CovarianceEntry {
                s,
                t,
                empirical: m.mean,
                stderr: m.stderr,
                exact,
                z: (m.mean - exact) / m.stderr,
            });
        }
    }

    let b_t = column(COARSE_NODES - 1);
    let w_t = column(COARSE_NODES);
    let plain = Moments::of(&b_t);
    let b2: Vec<f64> = b_t.iter().map(|x| x * x).collect();
    let w2: Vec<f64> = w_t.iter().map(|x| x * x).collect();
    let beta = covariance(&b2, &w2) / covariance(&w2, &w2);
    let adjusted: Vec<f64> = b2
        .iter()
        .zip(&w2)
        .map(|(b, w)| b - beta * (w - cfg.horizon))
        .collect();
    let cv = Moments::of(&adjusted);
    let terminal = TerminalVariance {
        exact: h.variance(cfg.horizon),
        plain: plain.variance,
        plain_stderr: Moments::variance_stderr(&b_t),
        control_variate: cv.mean,
        control_variate_stderr: cv.stderr,
        beta,
    };

    let max_rel_error = entries
        .iter()
        .map(|e| ((e.empirical - e.exact) / e.exact).abs())
        .fold(0.0, f64::max);
    let max_abs_z = entries.iter().map(|e| e.z.abs()).fold(0.0, f64::max);
    Ok(CovarianceReport {
        version: VERSION.into(),
        config: cfg.clone(),
        entries,
        terminal,
        max_rel_error,
        max_abs_z,
        runtime_secs: start.elapsed().as_secs_f64(),
    })
}
