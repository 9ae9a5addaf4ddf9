//! Grid refinement: the same Brownian paths seen at `n/4`, `n/2` and `n`
//! steps, comparing the representation with the chain-rule value and with the
//! forward estimate at each level.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::runner::{ensure_finite, run_paths};
use super::VERSION;
use crate::error::{Error, Result};
use crate::integrands::IntegrandModel;
use crate::integrator::{forward_estimate, RepresentationEvaluator};
use crate::paths::{BrownianPath, PathContext, VolterraWeights};
use crate::stats::Moments;

/// Coarsening factors, coarsest first.
pub const SWEEP_FACTORS: [usize; 3] = [4, 2, 1];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub path_index: u64,
    pub steps: usize,
    pub b_t: f64,
    pub rhs_total: f64,
    pub chain_rule: Option<f64>,
    pub forward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepLevel {
    pub steps: usize,
    pub eps: f64,
    pub drift: f64,
    pub rhs_total: Moments,
    /// `√mean|rhs_total − chain-rule value|²`, using the level's own `B_T`.
    pub chain_rule_rmse: Option<f64>,
    /// `√mean|forward − rhs_total|²` at the common `ε`.
    pub forward_rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub version: String,
    pub config: ExperimentConfig,
    pub model: String,
    pub levels: Vec<SweepLevel>,
    #[serde(skip)]
    pub rows: Vec<SweepRow>,
    #[serde(skip)]
    pub runtime_secs: f64,
}

impl SweepReport {
    pub fn chain_rule_rmse(&self) -> Vec<Option<f64>> {
        self.levels.iter().map(|l| l.chain_rule_rmse).collect()
    }
}

struct Level {
    factor: usize,
    eps_steps: usize,
    weights: Arc<VolterraWeights>,
    model: Box<dyn IntegrandModel>,
}

pub fn run_refinement_sweep(cfg: &ExperimentConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let start = Instant::now();
    let h = cfg.hurst_config()?;
    let fine = cfg.grid()?;
    let spec = cfg.model_spec()?;
    // ε is the smallest ladder entry, which every level must resolve
    let eps_fine = *cfg.eps_ladder.iter().min().unwrap_or(&1);
    let coarsest = SWEEP_FACTORS[0];
    if eps_fine % coarsest != 0 || fine.steps() % coarsest != 0 || fine.ext() % coarsest != 0 {
        return Err(Error::Config(format!(
            "sweep needs steps, ext-steps and the smallest ε divisible by {coarsest}"
        )));
    }
    let levels = SWEEP_FACTORS
        .iter()
        .map(|&factor| {
            let grid = fine.coarsen(factor)?;
            Ok(Level {
                factor,
                eps_steps: eps_fine / factor,
                weights: Arc::new(VolterraWeights::new(h, grid)),
                model: spec.build(h, grid, crate::gauss::DEFAULT_ORDER)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let evals = levels
        .iter()
        .map(|l| RepresentationEvaluator::new(l.model.as_ref()))
        .collect::<Result<Vec<_>>>()?;

    let per_path = run_paths(cfg.paths, cfg.workers, |p| {
        let w = BrownianPath::simulate(fine, cfg.seed, p);
        let mut out = Vec::with_capacity(levels.len());
        for (level, eval) in levels.iter().zip(&evals) {
            let ctx = PathContext::new(level.weights.clone(), w.coarsen(level.factor)?)?;
            let n = ctx.grid().steps();
            let rhs = eval.evaluate(&ctx)?;
            let y = level.model.on_path(&ctx)?;
            let forward = forward_estimate(y.as_ref(), &ctx, level.eps_steps)?.value;
            let b_t = ctx.b(n);
            ensure_finite(&[rhs.total(), forward, b_t], cfg.seed, p)?;
            out.push(SweepRow {
                path_index: p,
                steps: n,
                b_t,
                rhs_total: rhs.total(),
                chain_rule: spec.chain_rule_oracle(b_t),
                forward,
            });
        }
        Ok(out)
    })?;

    let mut summary = Vec::new();
    for (k, (level, eval)) in levels.iter().zip(&evals).enumerate() {
        let rows: Vec<&SweepRow> = per_path.iter().map(|v| &v[k]).collect();
        let totals: Vec<f64> = rows.iter().map(|r| r.rhs_total).collect();
        let fwd: Vec<f64> = rows.iter().map(|r| (r.forward - r.rhs_total).powi(2)).collect();
        let chain_rule_rmse = if rows.iter().all(|r| r.chain_rule.is_some()) {
            let sq: Vec<f64> = rows
                .iter()
                .map(|r| (r.rhs_total - r.chain_rule.unwrap_or(f64::NAN)).powi(2))
                .collect();
            Some(Moments::of(&sq).mean.sqrt())
        } else {
            None
        };
        summary.push(SweepLevel {
            steps: level.weights.grid().steps(),
            eps: eps_fine as f64 * fine.dt(),
            drift: eval.drift(),
            rhs_total: Moments::of(&totals),
            chain_rule_rmse,
            forward_rmse: Moments::of(&fwd).mean.sqrt(),
        });
    }
    Ok(SweepReport {
        version: VERSION.into(),
        config: cfg.clone(),
        model: spec.to_string(),
        levels: summary,
        rows: per_path.into_iter().flatten().collect(),
        runtime_secs: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn levels_share_the_brownian_path() {
        let cfg = ExperimentConfig {
            steps: 32,
            ext_steps: 8,
            eps_ladder: vec![8, 4],
            paths: 3,
            model: "constant".into(),
            ..Default::default()
        };
        let r = run_refinement_sweep(&cfg).unwrap();
        assert_eq!(r.levels.iter().map(|l| l.steps).collect::<Vec<_>>(), vec![8, 16, 32]);
        // constant one: the representation is B_T exactly at every level
        for row in &r.rows {
            assert!((row.rhs_total - row.b_t).abs() < 1e-12);
        }
        // W_T is shared, B_T differs only through the kernel discretization
        let b: Vec<f64> = r.rows.iter().filter(|x| x.path_index == 0).map(|x| x.b_t).collect();
        assert!((b[0] - b[2]).abs() < 0.5);
    }

    #[test]
    fn rejects_indivisible_ladder() {
        let cfg = ExperimentConfig {
            steps: 32,
            ext_steps: 8,
            eps_ladder: vec![6],
            paths: 1,
            ..Default::default()
        };
        assert!(run_refinement_sweep(&cfg).is_err());
    }
}
