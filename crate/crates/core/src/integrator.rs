//! The two sides of the forward-integral identity:
//!
//! - the regularization estimator `(1/ε)Σ Y_{t_i}(B_{t_i+ε} − B_{t_i})Δ`;
//! - the representation `drift + Σ_r 𝒦Y(T,r) dW_r`,
//!
//! plus the Wiener integral of a deterministic function and the `I₂` remainder.
//!
//! All time integrals against `∂K/∂t` use exact cell moments of the kernel with
//! the smooth cofactor frozen on the cell.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrands::{IntegrandModel, PathIntegrand};
use crate::paths::PathContext;

/// One forward-integral estimate at `ε = eps_steps·Δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForwardEstimate {
    pub eps: f64,
    pub eps_steps: usize,
    pub value: f64,
    pub n: usize,
}

/// Drift plus stochastic part of the representation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepresentationValue {
    pub drift: f64,
    pub stochastic: f64,
}

impl RepresentationValue {
    pub fn total(&self) -> f64 {
        self.drift + self.stochastic
    }
}

fn check_eps(ctx: &PathContext, eps_steps: usize) -> Result<f64> {
    let g = ctx.grid();
    let eps = g.eps_from_steps(eps_steps)?;
    if eps_steps > g.ext() {
        return Err(Error::Config(format!(
            "ε = {eps_steps}Δ exceeds the grid extension of {}Δ",
            g.ext()
        )));
    }
    Ok(eps)
}

/// Values `Y_{t_i}`, `i < n`; beyond `T` the integrand is zero and never read.
pub fn integrand_values(y: &dyn PathIntegrand, ctx: &PathContext) -> Result<Vec<f64>> {
    (0..ctx.grid().steps()).map(|i| y.value(i)).collect()
}

/// Left-point forward estimator.
pub fn forward_estimate(y: &dyn PathIntegrand, ctx: &PathContext, eps_steps: usize) -> Result<ForwardEstimate> {
    let values = integrand_values(y, ctx)?;
    forward_from_values(&values, ctx, eps_steps)
}

/// Forward estimates on a ladder of `ε`, sharing the integrand values.
pub fn forward_ladder(y: &dyn PathIntegrand, ctx: &PathContext, ladder: &[usize]) -> Result<Vec<ForwardEstimate>> {
    let values = integrand_values(y, ctx)?;
    ladder.iter().map(|&k| forward_from_values(&values, ctx, k)).collect()
}

pub fn forward_from_values(values: &[f64], ctx: &PathContext, eps_steps: usize) -> Result<ForwardEstimate> {
    let eps = check_eps(ctx, eps_steps)?;
    let g = ctx.grid();
    let b = ctx.rlfbm().values();
    let mut acc = 0.0;
    for (i, y) in values.iter().enumerate() {
        acc += y * (b[i + eps_steps] - b[i]);
    }
    Ok(ForwardEstimate {
        eps,
        eps_steps,
        value: acc * g.dt() / eps,
        n: g.steps(),
    })
}

/// `I₂(ε) = Σ_i Y_{t_i}(1/ε)Σ_{t_i ≤ t_j < t_i+ε} w_{i+k,j} dW_j Δ`, the part
/// of the forward estimator driven by increments after `t_i`.
pub fn i2_term(y: &dyn PathIntegrand, ctx: &PathContext, eps_steps: usize) -> Result<f64> {
    let values = integrand_values(y, ctx)?;
    i2_from_values(&values, ctx, eps_steps)
}

pub fn i2_from_values(values: &[f64], ctx: &PathContext, eps_steps: usize) -> Result<f64> {
    let eps = check_eps(ctx, eps_steps)?;
    let w = ctx.weights();
    let dw = ctx.dw();
    let mut acc = 0.0;
    for (i, y) in values.iter().enumerate() {
        if *y == 0.0 {
            continue;
        }
        let top = i + eps_steps;
        let inner: f64 = (i..top).map(|j| w.k(top, j) * dw[j]).sum();
        acc += y * inner;
    }
    Ok(acc * ctx.grid().dt() / eps)
}

// Σ_{i=r}^{n−1} c_i (w_{i+1,r} − w_{i,r}): the t-integral of c_t ∂K/∂t(t,r)
// with c frozen on each cell and the cell-averaged kernel differentiated exactly.
fn weighted_dk_in_t<F: FnMut(usize) -> Result<f64>>(ctx: &PathContext, r: usize, mut c: F) -> Result<f64> {
    let w = ctx.weights();
    let n = ctx.grid().steps();
    let mut acc = 0.0;
    for i in r..n {
        let ci = c(i)?;
        if ci != 0.0 {
            acc += ci * (w.k(i + 1, r) - w.k(i, r));
        }
    }
    Ok(acc)
}

/// The three terms of `𝒦Y(T, t_r)` separately: `(Eʳ[Y]·∂K, φ⁽¹⁾·𝒟B, ∫φ⁽²⁾∂K)`.
pub fn kcal_terms(y: &dyn PathIntegrand, ctx: &PathContext, r: usize) -> Result<[f64; 3]> {
    let g = ctx.grid();
    let n = g.steps();
    if r >= n {
        return Err(Error::domain("kcal", format!("r index {r} must be below n = {n}")));
    }
    let dt = g.dt();
    let mut conds = Vec::with_capacity(n - r);
    conds.push(y.cond(r, r)?);
    let mut b_term = 0.0;
    let mut c_term = 0.0;
    for i in r + 1..=n {
        let s = y.slice(i, r)?;
        if i < n {
            conds.push(s.cond);
        }
        // 𝒟_{r,t}B vanishes for r = 0
        if r > 0 && s.phi1 != 0.0 {
            b_term += s.phi1 * ctx.nelson(r, i);
        }
        c_term += s.phi2_dk;
    }
    let a_term = weighted_dk_in_t(ctx, r, |i| Ok(conds[i - r]))?;
    Ok([a_term, b_term * dt, c_term * dt])
}

/// `𝒦Y(T, t_r)`. Reads only increments before `t_r`.
pub fn kcal(y: &dyn PathIntegrand, ctx: &PathContext, r: usize) -> Result<f64> {
    let [a, b, c] = kcal_terms(y, ctx, r)?;
    Ok(a + b + c)
}

/// `𝒦Y(T, t_r)` for every `r < n`.
pub fn kcal_all(y: &dyn PathIntegrand, ctx: &PathContext) -> Result<Vec<f64>> {
    (0..ctx.grid().steps()).map(|r| kcal(y, ctx, r)).collect()
}

/// Left-point Itô sum `Σ_{r<n} f_r dW_r`.
pub fn ito_sum(f: &[f64], ctx: &PathContext) -> f64 {
    let mut acc = 0.0;
    for (fr, d) in f.iter().zip(ctx.dw()) {
        acc += fr * d;
    }
    acc
}

/// `∫_0^T ∫_0^s E[φ⁽¹⁾_Y(s,u)] ∂K/∂s(s,u) du ds`: exact cell moments in `u`,
/// trapezoid rule in `s`.
pub fn drift_term(model: &dyn IntegrandModel) -> Result<f64> {
    if model.is_deterministic() {
        return Ok(0.0);
    }
    let g = model.grid();
    let n = g.steps();
    let mut acc = 0.0;
    for s in 1..=n {
        let mut inner = 0.0;
        for u in 0..s {
            inner += model.mean_phi1_dk_cell(s, u)?;
        }
        acc += if s == n { 0.5 * inner } else { inner };
    }
    Ok(acc * g.dt())
}

/// Drift and stochastic parts of the representation on one path.
pub fn representation_rhs(model: &dyn IntegrandModel, ctx: &PathContext) -> Result<RepresentationValue> {
    RepresentationEvaluator::new(model)?.evaluate(ctx)
}

/// Caches the path-independent drift across paths.
pub struct RepresentationEvaluator<'m> {
    model: &'m dyn IntegrandModel,
    drift: f64,
}

impl<'m> RepresentationEvaluator<'m> {
    pub fn new(model: &'m dyn IntegrandModel) -> Result<Self> {
        Ok(Self {
            model,
            drift: drift_term(model)?,
        })
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn model(&self) -> &'m dyn IntegrandModel {
        self.model
    }

    pub fn evaluate(&self, ctx: &PathContext) -> Result<RepresentationValue> {
        Ok(self.evaluate_with_kcal(ctx)?.0)
    }

    /// Also returns `𝒦Y(T, t_r)` for `r < n`.
    pub fn evaluate_with_kcal(&self, ctx: &PathContext) -> Result<(RepresentationValue, Vec<f64>)> {
        let y = self.model.on_path(ctx)?;
        let k = kcal_all(y.as_ref(), ctx)?;
        Ok((
            RepresentationValue {
                drift: self.drift,
                stochastic: ito_sum(&k, ctx),
            },
            k,
        ))
    }
}

/// `Σ_r [∫_r^T g_t ∂K/∂t(t,r) dt] dW_r` with the same t-cell moments as `𝒦Y`.
pub fn wiener_integral<G: Fn(f64) -> f64>(g: G, ctx: &PathContext) -> Result<f64> {
    let grid = *ctx.grid();
    let n = grid.steps();
    let mut f = Vec::with_capacity(n);
    for r in 0..n {
        // matches kcal for a deterministic model: a + 0 + 0
        f.push(weighted_dk_in_t(ctx, r, |i| Ok(g(grid.node(i))))? + 0.0 + 0.0);
    }
    Ok(ito_sum(&f, ctx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrands::ModelSpec;
    use crate::kernels::HurstConfig;
    use crate::paths::{BrownianPath, SimulationGrid, VolterraWeights};
    use std::sync::Arc;

    fn setup(h: f64, n: usize, ext: usize) -> (Arc<VolterraWeights>, HurstConfig, SimulationGrid) {
        let cfg = HurstConfig::new(h, 1.0).unwrap();
        let grid = SimulationGrid::new(1.0, n, ext).unwrap();
        (Arc::new(VolterraWeights::new(cfg, grid)), cfg, grid)
    }

    #[test]
    fn zero_integrand_gives_zero_everywhere() {
        let (w, cfg, grid) = setup(0.7, 32, 8);
        let m = ModelSpec::Zero.build(cfg, grid, 8).unwrap();
        let ctx = PathContext::simulate(w, 3, 1).unwrap();
        let y = m.on_path(&ctx).unwrap();
        assert_eq!(forward_estimate(y.as_ref(), &ctx, 4).unwrap().value, 0.0);
        assert_eq!(i2_term(y.as_ref(), &ctx, 4).unwrap(), 0.0);
        let rep = representation_rhs(m.as_ref(), &ctx).unwrap();
        assert_eq!(rep.total(), 0.0);
    }

    #[test]
    fn constant_one_reproduces_b_t_exactly() {
        let (w, cfg, grid) = setup(0.75, 64, 8);
        let ctx = PathContext::simulate(w, 9, 0).unwrap();
        let wi = wiener_integral(|_| 1.0, &ctx).unwrap();
        assert!((wi - ctx.b(64)).abs() < 1e-12);
        let m = ModelSpec::Constant { c: 1.0 }.build(cfg, grid, 8).unwrap();
        let rep = representation_rhs(m.as_ref(), &ctx).unwrap();
        assert_eq!(rep.total(), wi);
    }

    #[test]
    fn deterministic_reduction_is_exact() {
        let (w, cfg, grid) = setup(0.65, 48, 8);
        let ctx = PathContext::simulate(w, 1, 7).unwrap();
        let m = ModelSpec::Time.build(cfg, grid, 8).unwrap();
        let rep = representation_rhs(m.as_ref(), &ctx).unwrap();
        assert_eq!(rep.drift, 0.0);
        assert_eq!(rep.total(), wiener_integral(|t| t, &ctx).unwrap());
    }

    #[test]
    fn linear_drift_is_one_half() {
        for &h in &[0.6, 0.75, 0.9] {
            let (_, cfg, grid) = setup(h, 256, 4);
            let m = ModelSpec::Linear.build(cfg, grid, 8).unwrap();
            let d = drift_term(m.as_ref()).unwrap();
            assert!((d - 0.5).abs() < 2e-3, "H={h}: {d}");
        }
    }

    #[test]
    fn square_drift_vanishes() {
        let (_, cfg, grid) = setup(0.75, 64, 4);
        let m = ModelSpec::Square.build(cfg, grid, 8).unwrap();
        assert!(drift_term(m.as_ref()).unwrap().abs() < 1e-12);
    }

    #[test]
    fn kcal_is_adapted() {
        let (w, cfg, grid) = setup(0.75, 32, 4);
        let m = ModelSpec::Cube.build(cfg, grid, 16).unwrap();
        let base = BrownianPath::simulate(grid, 5, 0);
        let ctx = PathContext::new(w.clone(), base.clone()).unwrap();
        let y = m.on_path(&ctx).unwrap();
        let r = 13;
        let k0 = kcal(y.as_ref(), &ctx, r).unwrap();
        let mut dw = base.increments().to_vec();
        for d in dw.iter_mut().skip(r) {
            *d = -3.0 * *d + 0.1;
        }
        let ctx2 = PathContext::new(w, BrownianPath::from_increments(grid, dw).unwrap()).unwrap();
        let y2 = m.on_path(&ctx2).unwrap();
        assert_eq!(kcal(y2.as_ref(), &ctx2, r).unwrap(), k0);
    }

    #[test]
    fn linear_kcal_has_no_third_term() {
        let (w, cfg, grid) = setup(0.75, 32, 4);
        let m = ModelSpec::Linear.build(cfg, grid, 8).unwrap();
        let ctx = PathContext::simulate(w, 2, 0).unwrap();
        let y = m.on_path(&ctx).unwrap();
        for r in [0usize, 5, 31] {
            let [_, b, c] = kcal_terms(y.as_ref(), &ctx, r).unwrap();
            assert!(c.abs() < 1e-12);
            if r == 0 {
                assert_eq!(b, 0.0);
            }
        }
        assert!(kcal(y.as_ref(), &ctx, 32).is_err());
    }

    #[test]
    fn eps_outside_extension_is_rejected() {
        let (w, cfg, grid) = setup(0.75, 32, 4);
        let m = ModelSpec::Linear.build(cfg, grid, 8).unwrap();
        let ctx = PathContext::simulate(w, 2, 0).unwrap();
        let y = m.on_path(&ctx).unwrap();
        assert!(forward_estimate(y.as_ref(), &ctx, 5).is_err());
        assert!(forward_estimate(y.as_ref(), &ctx, 0).is_err());
        assert!(forward_estimate(y.as_ref(), &ctx, 4).is_ok());
    }
}
