//! The forward-integral identity checked path by path: forward estimates on an
//! `ε` ladder against the representation `drift + Σ 𝒦Y dW`.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::io::IdentityRow;
use super::runner::{ensure_finite, run_paths};
use super::VERSION;
use crate::error::{Error, Result};
use crate::integrator::{forward_ladder, RepresentationEvaluator, RepresentationValue};
use crate::paths::{PathContext, VolterraWeights};
use crate::stats::Moments;

/// Per-path results of an identity run.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub path_index: u64,
    /// `B_T` on the simulation grid.
    pub b_t: f64,
    pub rhs: RepresentationValue,
    /// Forward estimates, one per ladder entry.
    pub lhs: Vec<f64>,
    /// `Σ_r |𝒦Y(T,t_r)|² Δ`.
    pub kcal_sq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsSummary {
    pub eps: f64,
    pub eps_steps: usize,
    pub lhs: Moments,
    /// `|lhs − rhs_total|²` across paths.
    pub gap: Moments,
    /// `gap.mean / Var(rhs_total)`.
    pub gap_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub estimator: String,
    pub version: String,
    pub config: ExperimentConfig,
    pub model: String,
    pub drift: f64,
    pub rhs_total: Moments,
    pub rhs_stochastic: Moments,
    /// `Σ_r |𝒦Y|² Δ` across paths; its mean should match `Var(rhs_total)`.
    pub kcal_isometry: Moments,
    pub per_eps: Vec<EpsSummary>,
    /// Root mean square of `rhs_total` minus the chain-rule value, when the model has one.
    pub chain_rule_rmse: Option<f64>,
    /// `|g|²_ℋ` for Wiener runs.
    pub wiener_variance: Option<f64>,
    /// Wall-clock seconds; not serialized so artifacts stay reproducible.
    #[serde(skip)]
    pub runtime_secs: f64,
}

#[derive(Debug, Clone)]
pub struct IdentityRun {
    pub summary: SummaryStats,
    pub records: Vec<PathRecord>,
}

impl IdentityRun {
    /// CSV rows, path-major then in ladder order.
    pub fn rows(&self) -> Vec<IdentityRow> {
        let dt = self.summary.config.horizon / self.summary.config.steps as f64;
        let mut rows = Vec::with_capacity(self.records.len() * self.summary.per_eps.len());
        for r in &self.records {
            for (k, lhs) in self.summary.config.eps_ladder.iter().zip(&r.lhs) {
                rows.push(IdentityRow {
                    path_index: r.path_index,
                    eps: *k as f64 * dt,
                    lhs: *lhs,
                    rhs_total: r.rhs.total(),
                    rhs_drift: r.rhs.drift,
                });
            }
        }
        rows
    }
}

pub fn run_identity_experiment(cfg: &ExperimentConfig) -> Result<IdentityRun> {
    run(cfg, "identity")
}

/// Identity run for a deterministic integrand, where the representation is
/// the Wiener integral; adds the `|g|²_ℋ` variance oracle.
pub fn run_wiener_experiment(cfg: &ExperimentConfig) -> Result<IdentityRun> {
    let spec = cfg.model_spec()?;
    let g = spec.time_function().ok_or_else(|| {
        Error::Config(format!("wiener runs need a deterministic model (zero|constant|time), got '{}'", cfg.model))
    })?;
    let mut run = run(cfg, "wiener")?;
    let h = cfg.hurst_config()?;
    let dt = cfg.horizon / cfg.steps as f64;
    run.summary.wiener_variance = Some(h.hnorm_sq(|t| g(t), 0.5 * dt)?);
    Ok(run)
}

fn run(cfg: &ExperimentConfig, estimator: &str) -> Result<IdentityRun> {
    cfg.validate()?;
    let start = Instant::now();
    let h = cfg.hurst_config()?;
    let grid = cfg.grid()?;
    let spec = cfg.model_spec()?;
    let model = spec.build(h, grid, crate::gauss::DEFAULT_ORDER)?;
    let weights = Arc::new(VolterraWeights::new(h, grid));
    let eval = RepresentationEvaluator::new(model.as_ref())?;
    let n = grid.steps();
    let dt = grid.dt();

    let records = run_paths(cfg.paths, cfg.workers, |p| {
        let ctx = PathContext::simulate(weights.clone(), cfg.seed, p)?;
        let (rhs, kcal) = eval.evaluate_with_kcal(&ctx)?;
        let y = model.on_path(&ctx)?;
        let lhs: Vec<f64> = forward_ladder(y.as_ref(), &ctx, &cfg.eps_ladder)?
            .into_iter()
            .map(|f| f.value)
            .collect();
        let kcal_sq = kcal.iter().map(|k| k * k).sum::<f64>() * dt;
        ensure_finite(&lhs, cfg.seed, p)?;
        ensure_finite(&[rhs.drift, rhs.stochastic, kcal_sq], cfg.seed, p)?;
        Ok(PathRecord {
            path_index: p,
            b_t: ctx.b(n),
            rhs,
            lhs,
            kcal_sq,
        })
    })?;

    let totals: Vec<f64> = records.iter().map(|r| r.rhs.total()).collect();
    let stoch: Vec<f64> = records.iter().map(|r| r.rhs.stochastic).collect();
    let iso: Vec<f64> = records.iter().map(|r| r.kcal_sq).collect();
    let rhs_total = Moments::of(&totals);
    let per_eps = cfg
        .eps_ladder
        .iter()
        .enumerate()
        .map(|(k, &steps)| {
            let lhs: Vec<f64> = records.iter().map(|r| r.lhs[k]).collect();
            let gap: Vec<f64> = records.iter().map(|r| (r.lhs[k] - r.rhs.total()).powi(2)).collect();
            let gap = Moments::of(&gap);
            EpsSummary {
                eps: steps as f64 * dt,
                eps_steps: steps,
                lhs: Moments::of(&lhs),
                gap,
                gap_ratio: gap.mean / rhs_total.variance,
            }
        })
        .collect();
    let chain_rule_rmse = if spec.chain_rule_oracle(0.0).is_some() {
        let sq: Vec<f64> = records
            .iter()
            .map(|r| (r.rhs.total() - spec.chain_rule_oracle(r.b_t).unwrap_or(f64::NAN)).powi(2))
            .collect();
        Some(Moments::of(&sq).mean.sqrt())
    } else {
        None
    };

    let summary = SummaryStats {
        estimator: estimator.into(),
        version: VERSION.into(),
        config: cfg.clone(),
        model: model.name(),
        drift: eval.drift(),
        rhs_total,
        rhs_stochastic: Moments::of(&stoch),
        kcal_isometry: Moments::of(&iso),
        per_eps,
        chain_rule_rmse,
        wiener_variance: None,
        runtime_secs: start.elapsed().as_secs_f64(),
    };
    Ok(IdentityRun { summary, records })
}
