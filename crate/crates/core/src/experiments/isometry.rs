//! Second moment of `∫_r^T φ⁽¹⁾_Y(t,r) 𝒟_{r,t}B dt` against its three-term
//! expansion: a `∂²R⁽ʳ⁾` term and two `𝐃`-field terms.
//!
//! With `c_x = φ⁽¹⁾(x,r)Δ` and `a_j = Σ_x c_x ∂K̄(x,j)`, the left side at `r` is
//! `(Σ_j a_j dW_j)²` and the right side is `Σ_j a_j²Δ + 2Σ_j (Σ_{i<j} a_i dW_i) a_j dW_j`,
//! which is the double sum over `(x1, x2)` of `c_{x1}c_{x2}[∂²R⁽ʳ⁾ + 𝐃_{x1,x2;r} + 𝐃_{x2,x1;r}]`
//! regrouped so the cost is cubic rather than quartic in `n`.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::runner::{ensure_finite, run_paths};
use super::VERSION;
use crate::error::{Error, Result};
use crate::integrands::PathIntegrand;
use crate::paths::{bold_d_unchecked, PathContext, VolterraWeights};
use crate::stats::Moments;

pub const MAX_ISOMETRY_STEPS: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsometryRow {
    pub path_index: u64,
    pub lhs: f64,
    pub rhs: f64,
    pub rhs_covariance_term: f64,
    pub rhs_bold_d_terms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsometryReport {
    pub version: String,
    pub config: ExperimentConfig,
    pub model: String,
    pub lhs: Moments,
    pub rhs: Moments,
    /// Paired `lhs − rhs`.
    pub difference: Moments,
    /// `|difference.mean| ≤ 3·difference.stderr`.
    pub agree: bool,
    #[serde(skip)]
    pub rows: Vec<IsometryRow>,
    #[serde(skip)]
    pub runtime_secs: f64,
}

/// `(lhs, ∂²R⁽ʳ⁾ term, 𝐃 terms)` on one path, each already integrated over `r`.
pub fn isometry_sides(y: &dyn PathIntegrand, ctx: &PathContext) -> Result<(f64, f64, f64)> {
    let grid = ctx.grid();
    let n = grid.steps();
    let dt = grid.dt();
    let w = ctx.weights();
    let dw = ctx.dw();
    let (mut lhs, mut cov, mut dterm) = (0.0, 0.0, 0.0);
    let mut c = vec![0.0; n + 1];
    let mut a = vec![0.0; n];
    // r = 0 contributes nothing: every Nelson field starts at zero
    for r in 1..n {
        for (x, cx) in c.iter_mut().enumerate().skip(r + 1) {
            *cx = y.phi1(x, r)? * dt;
        }
        for (j, aj) in a.iter_mut().enumerate().take(r) {
            *aj = (r + 1..=n).map(|x| c[x] * w.dk(x, j)).sum();
        }
        let (mut inner, mut quad, mut cross) = (0.0, 0.0, 0.0);
        for j in 0..r {
            cross += inner * a[j] * dw[j];
            inner += a[j] * dw[j];
            quad += a[j] * a[j];
        }
        lhs += inner * inner;
        cov += quad * dt;
        dterm += 2.0 * cross;
    }
    Ok((lhs * dt, cov * dt, dterm * dt))
}

/// The same three quantities by the literal double sum over `(x1, x2)` with
/// explicit `𝐃` fields; quartic in `n`, meant for cross-checks on small grids.
pub fn isometry_sides_direct(y: &dyn PathIntegrand, ctx: &PathContext) -> Result<(f64, f64, f64)> {
    let grid = ctx.grid();
    let n = grid.steps();
    let dt = grid.dt();
    let w = ctx.weights();
    let dw = ctx.dw();
    let (mut lhs, mut cov, mut dterm) = (0.0, 0.0, 0.0);
    for r in 1..n {
        let mut inner = 0.0;
        for x in r + 1..=n {
            inner += y.phi1(x, r)? * ctx.nelson(r, x) * dt;
        }
        lhs += inner * inner;
        for x1 in r + 1..=n {
            for x2 in r + 1..=n {
                let c = y.phi1(x1, r)? * y.phi1(x2, r)? * dt * dt;
                let r2: f64 = (0..r).map(|j| w.dk(x1, j) * w.dk(x2, j)).sum::<f64>() * dt;
                cov += c * r2;
                dterm += c * (bold_d_unchecked(dw, w, x1, x2, r) + bold_d_unchecked(dw, w, x2, x1, r));
            }
        }
    }
    Ok((lhs * dt, cov * dt, dterm * dt))
}

pub fn run_isometry_expansion(cfg: &ExperimentConfig) -> Result<IsometryReport> {
    cfg.validate()?;
    if cfg.steps > MAX_ISOMETRY_STEPS {
        return Err(Error::Config(format!(
            "isometry expansion is cubic in n; need steps ≤ {MAX_ISOMETRY_STEPS}"
        )));
    }
    let start = Instant::now();
    let h = cfg.hurst_config()?;
    let grid = cfg.grid()?;
    let model = cfg.model_spec()?.build(h, grid, crate::gauss::DEFAULT_ORDER)?;
    let weights = Arc::new(VolterraWeights::new(h, grid));
    let rows = run_paths(cfg.paths, cfg.workers, |p| {
        let ctx = PathContext::simulate(weights.clone(), cfg.seed, p)?;
        let y = model.on_path(&ctx)?;
        let (lhs, cov, d) = isometry_sides(y.as_ref(), &ctx)?;
        ensure_finite(&[lhs, cov, d], cfg.seed, p)?;
        Ok(IsometryRow {
            path_index: p,
            lhs,
            rhs: cov + d,
            rhs_covariance_term: cov,
            rhs_bold_d_terms: d,
        })
    })?;
    let lhs: Vec<f64> = rows.iter().map(|r| r.lhs).collect();
    let rhs: Vec<f64> = rows.iter().map(|r| r.rhs).collect();
    let diff: Vec<f64> = rows.iter().map(|r| r.lhs - r.rhs).collect();
    let difference = Moments::of(&diff);
    let agree = difference.mean.abs() <= 3.0 * difference.stderr || difference.mean == 0.0;
    Ok(IsometryReport {
        version: VERSION.into(),
        config: cfg.clone(),
        model: model.name(),
        lhs: Moments::of(&lhs),
        rhs: Moments::of(&rhs),
        difference,
        agree,
        rows,
        runtime_secs: start.elapsed().as_secs_f64(),
    })
}
