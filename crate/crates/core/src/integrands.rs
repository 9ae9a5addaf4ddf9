//! Integrand models `Y` together with the objects of their Itô representation:
//! conditional expectations `Eʳ[Y_t]`, the first and second martingale
//! derivatives `φ⁽¹⁾_Y`, `φ⁽²⁾_Y`, and the unconditional means used by the
//! drift.
//!
//! A model is first built against a grid ([`ModelSpec::build`]), which fixes
//! its law-level quantities; it is then bound to a simulated path
//! ([`IntegrandModel::on_path`]) to evaluate pathwise quantities.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauss::{self, QuadratureRule, RuleLadder, StateFn};
use crate::kernels::HurstConfig;
use crate::paths::{PathContext, SimulationGrid};

/// Law-level part of an integrand: everything that does not depend on the path.
pub trait IntegrandModel: Send + Sync {
    fn name(&self) -> String;

    fn grid(&self) -> &SimulationGrid;

    /// `Y` is a deterministic function of time.
    fn is_deterministic(&self) -> bool {
        false
    }

    /// `E[Y_t]`.
    fn mean(&self, t: usize) -> Result<f64>;

    /// `E[φ⁽¹⁾_Y(t,u)]`, `u < t`.
    fn mean_phi1(&self, t: usize, u: usize) -> Result<f64>;

    /// `∫ E[φ⁽¹⁾_Y(s,v)] ∂K/∂s(s,v) dv` over the cell `[t_u, t_{u+1}]`, `u < s`.
    /// The default freezes the mean at the left node.
    fn mean_phi1_dk_cell(&self, s: usize, u: usize) -> Result<f64> {
        let g = self.grid();
        let w = cell_dk(self.cfg(), g, s, u);
        Ok(self.mean_phi1(s, u)? * w)
    }

    fn cfg(&self) -> &HurstConfig;

    /// Binds the model to one path.
    fn on_path<'a>(&'a self, ctx: &'a PathContext) -> Result<Box<dyn PathIntegrand + 'a>>;
}

/// Pathwise evaluations of a model on grid nodes.
pub trait PathIntegrand {
    /// `Y_t`.
    fn value(&self, t: usize) -> Result<f64>;

    /// `Eʳ[Y_t]`, `r ≤ t`.
    fn cond(&self, r: usize, t: usize) -> Result<f64>;

    /// `φ⁽¹⁾_Y(t,r)`, `r < t`.
    fn phi1(&self, t: usize, r: usize) -> Result<f64>;

    /// `φ⁽²⁾_Y(t,v;r)`, `r < v < t`.
    fn phi2(&self, t: usize, v: usize, r: usize) -> Result<f64>;

    /// `∫_{t_r}^{t_t} φ⁽²⁾_Y(t,v;r) ∂K/∂t(t,v) dv`. The default freezes `φ⁽²⁾`
    /// at each cell's left node; the first cell uses its right node since
    /// `φ⁽²⁾(t,r;r)` is outside the domain.
    fn phi2_dk_inner(&self, t: usize, r: usize) -> Result<f64>;

    /// The three per-`(r,t)` ingredients of `𝒦Y` at once.
    fn slice(&self, t: usize, r: usize) -> Result<Slice> {
        Ok(Slice {
            cond: self.cond(r, t)?,
            phi1: self.phi1(t, r)?,
            phi2_dk: self.phi2_dk_inner(t, r)?,
        })
    }
}

/// `(Eʳ[Y_t], φ⁽¹⁾_Y(t,r), ∫_r^t φ⁽²⁾_Y(t,v;r)∂K/∂t(t,v)dv)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slice {
    pub cond: f64,
    pub phi1: f64,
    pub phi2_dk: f64,
}

fn cell_dk(cfg: &HurstConfig, g: &SimulationGrid, t: usize, v: usize) -> f64 {
    debug_assert!(v < t);
    let dt = g.dt();
    cfg.cell_integral_dt_unchecked((t - v) as f64 * dt, (t - v - 1) as f64 * dt)
}

fn default_phi2_dk_inner<P: PathIntegrand + ?Sized>(
    p: &P,
    cfg: &HurstConfig,
    g: &SimulationGrid,
    t: usize,
    r: usize,
) -> Result<f64> {
    if r >= t {
        return Err(singular("phi2_dk_inner", g, r, t));
    }
    let mut acc = 0.0;
    for v in r..t {
        let at = if v == r { (v + 1).min(t - 1) } else { v };
        if at <= r {
            continue;
        }
        acc += p.phi2(t, at, r)? * cell_dk(cfg, g, t, v);
    }
    Ok(acc)
}

fn singular(op: &'static str, g: &SimulationGrid, r: usize, t: usize) -> Error {
    Error::Singular {
        op,
        s: g.node(r),
        t: g.node(t),
    }
}

fn check_node(op: &'static str, g: &SimulationGrid, t: usize) -> Result<()> {
    if t > g.steps() {
        return Err(Error::domain(op, format!("node {t} beyond T (index {})", g.steps())));
    }
    Ok(())
}

fn check_order(op: &'static str, g: &SimulationGrid, r: usize, t: usize, strict: bool) -> Result<()> {
    check_node(op, g, t)?;
    if (strict && r >= t) || r > t {
        return Err(singular(op, g, r, t));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// deterministic

/// `Y_t = g(t)`; both martingale derivatives vanish.
pub struct Deterministic {
    label: String,
    g: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    cfg: HurstConfig,
    grid: SimulationGrid,
}

impl Deterministic {
    pub fn new(
        label: impl Into<String>,
        g: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        cfg: HurstConfig,
        grid: SimulationGrid,
    ) -> Self {
        Self {
            label: label.into(),
            g,
            cfg,
            grid,
        }
    }

    pub fn eval(&self, t: usize) -> f64 {
        (self.g)(self.grid.node(t))
    }
}

impl IntegrandModel for Deterministic {
    fn name(&self) -> String {
        self.label.clone()
    }
    fn grid(&self) -> &SimulationGrid {
        &self.grid
    }
    fn cfg(&self) -> &HurstConfig {
        &self.cfg
    }
    fn is_deterministic(&self) -> bool {
        true
    }
    fn mean(&self, t: usize) -> Result<f64> {
        check_node("mean", &self.grid, t)?;
        Ok(self.eval(t))
    }
    fn mean_phi1(&self, t: usize, u: usize) -> Result<f64> {
        check_order("mean_phi1", &self.grid, u, t, true)?;
        Ok(0.0)
    }
    fn mean_phi1_dk_cell(&self, s: usize, u: usize) -> Result<f64> {
        self.mean_phi1(s, u)
    }
    fn on_path<'a>(&'a self, _ctx: &'a PathContext) -> Result<Box<dyn PathIntegrand + 'a>> {
        Ok(Box::new(DeterministicPath(self)))
    }
}

struct DeterministicPath<'a>(&'a Deterministic);

impl PathIntegrand for DeterministicPath<'_> {
    fn value(&self, t: usize) -> Result<f64> {
        self.0.mean(t)
    }
    fn cond(&self, r: usize, t: usize) -> Result<f64> {
        check_order("cond", &self.0.grid, r, t, false)?;
        Ok(self.0.eval(t))
    }
    fn phi1(&self, t: usize, r: usize) -> Result<f64> {
        check_order("phi1", &self.0.grid, r, t, true)?;
        Ok(0.0)
    }
    fn phi2(&self, t: usize, v: usize, r: usize) -> Result<f64> {
        check_order("phi2", &self.0.grid, v, t, true)?;
        check_order("phi2", &self.0.grid, r, v, true)?;
        Ok(0.0)
    }
    fn phi2_dk_inner(&self, t: usize, r: usize) -> Result<f64> {
        check_order("phi2_dk_inner", &self.0.grid, r, t, true)?;
        Ok(0.0)
    }
}

// ---------------------------------------------------------------------------
// state dependent

/// `Y_t = g(t, B_t)` for Borel `g` with polynomial growth. Conditional
/// quantities come from the heat semigroup evaluated at `Eʳ[B_t]` with
/// variance `Var(B_t − Eʳ[B_t])`.
pub struct StateDependent {
    label: String,
    g: StateFn,
    rule: QuadratureRule,
    ladder: Arc<RuleLadder>,
    cfg: HurstConfig,
    grid: SimulationGrid,
    // the regression factor depends on t only, since σ² + θ = t^{2H}
    regression: Vec<OnceLock<f64>>,
}

impl StateDependent {
    pub fn new(
        label: impl Into<String>,
        g: StateFn,
        rule: QuadratureRule,
        ladder: Arc<RuleLadder>,
        cfg: HurstConfig,
        grid: SimulationGrid,
    ) -> Self {
        Self {
            label: label.into(),
            g,
            rule,
            ladder,
            cfg,
            grid,
            regression: (0..=grid.steps()).map(|_| OnceLock::new()).collect(),
        }
    }

    fn residual(&self, r: usize, t: usize) -> f64 {
        // (t−r)^{2H} from the lag, exact for grid nodes
        let lag = (t - r) as f64 * self.grid.dt();
        lag.powf(2.0 * self.cfg.hurst())
    }

    fn kernel(&self, t: usize, r: usize) -> f64 {
        self.cfg.c_k() * ((t - r) as f64 * self.grid.dt()).powf(self.cfg.alpha_k())
    }

    /// `E[∂_x(P_θ g)(t, Eᵘ[B_t])]`, the regression factor of `E[φ⁽¹⁾]`.
    fn regression(&self, t: usize, u: usize) -> Result<f64> {
        if let Some(&v) = self.regression[t].get() {
            return Ok(v);
        }
        let v = self.regression_uncached(t, u)?;
        Ok(*self.regression[t].get_or_init(|| v))
    }

    fn regression_uncached(&self, t: usize, u: usize) -> Result<f64> {
        let tt = self.grid.node(t);
        let g = &self.g;
        if u == 0 {
            // Eᵘ[B_t] = 0 and θ = Var(B_t)
            let sd = self.cfg.variance(tt).sqrt();
            return Ok(self.ladder.expect(|z| z * g(tt, sd * z))? / sd);
        }
        gauss::regression_mean_phi1(|s, x| g(s, x), tt, self.grid.node(u), &self.cfg, &self.ladder)
    }
}

impl IntegrandModel for StateDependent {
    fn name(&self) -> String {
        self.label.clone()
    }
    fn grid(&self) -> &SimulationGrid {
        &self.grid
    }
    fn cfg(&self) -> &HurstConfig {
        &self.cfg
    }
    fn mean(&self, t: usize) -> Result<f64> {
        check_node("mean", &self.grid, t)?;
        let tt = self.grid.node(t);
        if t == 0 {
            return Ok((self.g)(tt, 0.0));
        }
        // B_t ~ N(0, t^{2H})
        gauss::heat_apply(|s, x| (self.g)(s, x), tt, 0.0, self.cfg.variance(tt), &self.rule)
    }
    fn mean_phi1(&self, t: usize, u: usize) -> Result<f64> {
        check_order("mean_phi1", &self.grid, u, t, true)?;
        Ok(self.regression(t, u)? * self.kernel(t, u))
    }
    fn mean_phi1_dk_cell(&self, s: usize, u: usize) -> Result<f64> {
        check_order("mean_phi1_dk_cell", &self.grid, u, s, true)?;
        // E[φ⁽¹⁾(s,v)] = m(s,v)K(s,v): freeze m, integrate K·∂K exactly
        let dt = self.grid.dt();
        let kdk = self
            .cfg
            .cell_integral_k_dt_unchecked((s - u) as f64 * dt, (s - u - 1) as f64 * dt);
        Ok(self.regression(s, u)? * kdk)
    }
    fn on_path<'a>(&'a self, ctx: &'a PathContext) -> Result<Box<dyn PathIntegrand + 'a>> {
        if ctx.grid() != &self.grid || ctx.cfg() != &self.cfg {
            return Err(Error::Config("model and path were built on different grids".into()));
        }
        Ok(Box::new(StatePath { m: self, ctx }))
    }
}

struct StatePath<'a> {
    m: &'a StateDependent,
    ctx: &'a PathContext,
}

impl StatePath<'_> {
    fn jet(&self, r: usize, t: usize) -> Result<gauss::HeatJet> {
        let tt = self.m.grid.node(t);
        gauss::heat_jet(
            |s, x| (self.m.g)(s, x),
            tt,
            self.ctx.cond_mean(r, t),
            self.m.residual(r, t),
            &self.m.rule,
        )
    }
}

impl PathIntegrand for StatePath<'_> {
    fn value(&self, t: usize) -> Result<f64> {
        check_node("value", &self.m.grid, t)?;
        Ok((self.m.g)(self.m.grid.node(t), self.ctx.b(t)))
    }
    fn cond(&self, r: usize, t: usize) -> Result<f64> {
        check_order("cond", &self.m.grid, r, t, false)?;
        if r == t {
            return self.value(t);
        }
        gauss::heat_apply(
            |s, x| (self.m.g)(s, x),
            self.m.grid.node(t),
            self.ctx.cond_mean(r, t),
            self.m.residual(r, t),
            &self.m.rule,
        )
    }
    fn phi1(&self, t: usize, r: usize) -> Result<f64> {
        check_order("phi1", &self.m.grid, r, t, true)?;
        let d = gauss::heat_dx(
            |s, x| (self.m.g)(s, x),
            self.m.grid.node(t),
            self.ctx.cond_mean(r, t),
            self.m.residual(r, t),
            &self.m.rule,
        )?;
        Ok(d * self.m.kernel(t, r))
    }
    fn phi2(&self, t: usize, v: usize, r: usize) -> Result<f64> {
        check_order("phi2", &self.m.grid, v, t, true)?;
        check_order("phi2", &self.m.grid, r, v, true)?;
        let d2 = gauss::heat_d2x(
            |s, x| (self.m.g)(s, x),
            self.m.grid.node(t),
            self.ctx.cond_mean(r, t),
            self.m.residual(r, t),
            &self.m.rule,
        )?;
        Ok(d2 * self.m.kernel(t, r) * self.m.kernel(t, v))
    }
    fn phi2_dk_inner(&self, t: usize, r: usize) -> Result<f64> {
        check_order("phi2_dk_inner", &self.m.grid, r, t, true)?;
        Ok(self.slice(t, r)?.phi2_dk)
    }
    fn slice(&self, t: usize, r: usize) -> Result<Slice> {
        check_order("slice", &self.m.grid, r, t, true)?;
        let jet = self.jet(r, t)?;
        let k = self.m.kernel(t, r);
        // ∫_r^t K(t,v)∂K/∂t(t,v)dv = H(t−r)^{2H−1}
        let lag = (t - r) as f64 * self.m.grid.dt();
        let kdk = self.m.cfg.cell_integral_k_dt_unchecked(lag, 0.0);
        Ok(Slice {
            cond: jet.value,
            phi1: jet.dx * k,
            phi2_dk: jet.d2x * k * kdk,
        })
    }
}

// ---------------------------------------------------------------------------
// fractional martingale

/// Choice of the bounded adapted factor `Z` in `Y_t = ∫_0^t (t−s)^α Z_s dW_s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZKind {
    ConstantOne,
    CosOfW,
}

impl FromStr for ZKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one" | "1" | "constant_one" => Ok(ZKind::ConstantOne),
            "cos" | "cos_w" | "cos_of_w" => Ok(ZKind::CosOfW),
            other => Err(Error::Config(format!("unknown Z kind '{other}' (expected one|cos)"))),
        }
    }
}

/// `Y_t = Σ_{j<t} (t−t_j)^α Z_{t_j} dW_j`, requiring `α > 1/2 − H`.
pub struct FractionalMartingale {
    alpha: f64,
    z: ZKind,
    cfg: HurstConfig,
    grid: SimulationGrid,
    // (lΔ)^α for lag l ≥ 1
    pow: Vec<f64>,
    // ∫ (t−v)^α ∂K/∂t(t,v) dv over the cell at lag l
    pow_dk: Vec<f64>,
    // Σ_i e^{−(v_i−r)/2} ∫_{cell i} (t−v)^α ∂K/∂t(t,v)dv for lag l = t − r
    decay_dk: Vec<f64>,
}

impl FractionalMartingale {
    pub fn new(alpha: f64, z: ZKind, cfg: HurstConfig, grid: SimulationGrid) -> Result<Self> {
        let bound = 0.5 - cfg.hurst();
        if !(alpha > bound) || !alpha.is_finite() {
            return Err(Error::Config(format!(
                "fractional martingale needs α > 1/2 − H = {bound}, got {alpha}"
            )));
        }
        let n = grid.steps();
        let dt = grid.dt();
        let p = alpha + cfg.alpha_k();
        let mut pow = vec![0.0; n + 1];
        let mut pow_dk = vec![0.0; n + 1];
        for l in 1..=n {
            pow[l] = (l as f64 * dt).powf(alpha);
            pow_dk[l] = cfg.c_h() * ((l as f64 * dt).powf(p) - ((l - 1) as f64 * dt).powf(p)) / p;
        }
        let mut decay_dk = vec![0.0; n + 1];
        if z == ZKind::CosOfW {
            for l in 1..=n {
                // cells i = r..t−1 sit at lags l−(i−r) from t
                decay_dk[l] = (0..l)
                    .map(|k| (-(k as f64) * dt / 2.0).exp() * pow_dk[l - k])
                    .sum();
            }
        }
        Ok(Self {
            alpha,
            z,
            cfg,
            grid,
            pow,
            pow_dk,
            decay_dk,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn z_kind(&self) -> ZKind {
        self.z
    }

    fn mean_z(&self, u: usize) -> f64 {
        match self.z {
            ZKind::ConstantOne => 1.0,
            ZKind::CosOfW => (-self.grid.node(u) / 2.0).exp(),
        }
    }
}

impl IntegrandModel for FractionalMartingale {
    fn name(&self) -> String {
        let z = match self.z {
            ZKind::ConstantOne => "one",
            ZKind::CosOfW => "cos",
        };
        format!("fracmart(alpha={}, z={z})", self.alpha)
    }
    fn grid(&self) -> &SimulationGrid {
        &self.grid
    }
    fn cfg(&self) -> &HurstConfig {
        &self.cfg
    }
    fn mean(&self, t: usize) -> Result<f64> {
        check_node("mean", &self.grid, t)?;
        Ok(0.0)
    }
    fn mean_phi1(&self, t: usize, u: usize) -> Result<f64> {
        check_order("mean_phi1", &self.grid, u, t, true)?;
        Ok(self.pow[t - u] * self.mean_z(u))
    }
    fn mean_phi1_dk_cell(&self, s: usize, u: usize) -> Result<f64> {
        check_order("mean_phi1_dk_cell", &self.grid, u, s, true)?;
        Ok(self.mean_z(u) * self.pow_dk[s - u])
    }
    fn on_path<'a>(&'a self, ctx: &'a PathContext) -> Result<Box<dyn PathIntegrand + 'a>> {
        if ctx.grid() != &self.grid || ctx.cfg() != &self.cfg {
            return Err(Error::Config("model and path were built on different grids".into()));
        }
        let n = self.grid.steps();
        let dw = ctx.dw();
        let z: Vec<f64> = (0..=n)
            .map(|j| match self.z {
                ZKind::ConstantOne => 1.0,
                ZKind::CosOfW => ctx.w(j).cos(),
            })
            .collect();
        // cond[r][t] = Σ_{j<r} (t−t_j)^α Z_j dW_j, built row by row
        let m = n + 1;
        let mut cond = vec![0.0; m * m];
        for r in 1..m {
            let (prev, row) = cond.split_at_mut(r * m);
            let prev = &prev[(r - 1) * m..];
            let inc = z[r - 1] * dw[r - 1];
            for t in r..m {
                row[t] = prev[t] + self.pow[t - r + 1] * inc;
            }
        }
        Ok(Box::new(FracPath { m: self, ctx, z, cond }))
    }
}

struct FracPath<'a> {
    m: &'a FractionalMartingale,
    ctx: &'a PathContext,
    z: Vec<f64>,
    cond: Vec<f64>,
}

impl FracPath<'_> {
    fn phi1_z(&self, v: usize, r: usize) -> f64 {
        match self.m.z {
            ZKind::ConstantOne => 0.0,
            ZKind::CosOfW => {
                let lag = (v - r) as f64 * self.m.grid.dt();
                -self.ctx.w(r).sin() * (-lag / 2.0).exp()
            }
        }
    }
}

impl PathIntegrand for FracPath<'_> {
    fn value(&self, t: usize) -> Result<f64> {
        check_node("value", &self.m.grid, t)?;
        Ok(self.cond[t * (self.m.grid.steps() + 1) + t])
    }
    fn cond(&self, r: usize, t: usize) -> Result<f64> {
        check_order("cond", &self.m.grid, r, t, false)?;
        Ok(self.cond[r * (self.m.grid.steps() + 1) + t])
    }
    fn phi1(&self, t: usize, r: usize) -> Result<f64> {
        check_order("phi1", &self.m.grid, r, t, true)?;
        Ok(self.m.pow[t - r] * self.z[r])
    }
    fn phi2(&self, t: usize, v: usize, r: usize) -> Result<f64> {
        check_order("phi2", &self.m.grid, v, t, true)?;
        check_order("phi2", &self.m.grid, r, v, true)?;
        Ok(self.m.pow[t - v] * self.phi1_z(v, r))
    }
    fn phi2_dk_inner(&self, t: usize, r: usize) -> Result<f64> {
        check_order("phi2_dk_inner", &self.m.grid, r, t, true)?;
        Ok(match self.m.z {
            ZKind::ConstantOne => 0.0,
            ZKind::CosOfW => -self.ctx.w(r).sin() * self.m.decay_dk[t - r],
        })
    }
}

/// Generic fallback for [`PathIntegrand::phi2_dk_inner`], exposed for models
/// without a closed-form singular factor and for cross-checks.
pub fn phi2_dk_inner_by_cells(
    p: &dyn PathIntegrand,
    cfg: &HurstConfig,
    grid: &SimulationGrid,
    t: usize,
    r: usize,
) -> Result<f64> {
    default_phi2_dk_inner(p, cfg, grid, t, r)
}

// ---------------------------------------------------------------------------
// registry

/// Named model with parameters, as selected from the CLI or a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    /// `Y ≡ 0`.
    Zero,
    /// `Y ≡ c`.
    Constant { c: f64 },
    /// `Y_t = t`.
    Time,
    /// `Y_t = B_t`.
    Linear,
    /// `Y_t = B_t²`.
    Square,
    /// `Y_t = B_t³`.
    Cube,
    /// `Y_t = cos(B_t)`.
    Cos,
    /// `Y_t = ∫_0^t (t−s)^α Z_s dW_s`.
    FracMart { alpha: f64, z: ZKind },
}

impl ModelSpec {
    /// Parses a model name and `k=v` parameters.
    pub fn from_name(name: &str, params: &BTreeMap<String, String>) -> Result<Self> {
        let num = |key: &str, default: f64| -> Result<f64> {
            match params.get(key) {
                None => Ok(default),
                Some(v) => v
                    .trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::Config(format!("model parameter {key}={v} is not a finite number"))),
            }
        };
        let allowed: &[&str] = match name {
            "constant" | "const" | "deterministic" => &["c"],
            "fracmart" | "fractional_martingale" => &["alpha", "z"],
            _ => &[],
        };
        if let Some(k) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::Config(format!("model '{name}' takes no parameter '{k}'")));
        }
        Ok(match name {
            "zero" => ModelSpec::Zero,
            "constant" | "const" | "deterministic" => ModelSpec::Constant { c: num("c", 1.0)? },
            "time" => ModelSpec::Time,
            "linear" => ModelSpec::Linear,
            "square" => ModelSpec::Square,
            "cube" => ModelSpec::Cube,
            "cos" => ModelSpec::Cos,
            "fracmart" | "fractional_martingale" => ModelSpec::FracMart {
                alpha: num("alpha", 0.25)?,
                z: params.get("z").map(|s| s.parse()).transpose()?.unwrap_or(ZKind::ConstantOne),
            },
            other => {
                return Err(Error::Config(format!(
                    "unknown model '{other}' (expected zero|constant|time|linear|square|cube|cos|fracmart)"
                )))
            }
        })
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self, ModelSpec::Zero | ModelSpec::Constant { .. } | ModelSpec::Time)
    }

    /// For deterministic models, the function of time.
    pub fn time_function(&self) -> Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>> {
        match *self {
            ModelSpec::Zero => Some(Arc::new(|_| 0.0)),
            ModelSpec::Constant { c } => Some(Arc::new(move |_| c)),
            ModelSpec::Time => Some(Arc::new(|t| t)),
            _ => None,
        }
    }

    fn state_function(&self) -> Option<StateFn> {
        match self {
            ModelSpec::Linear => Some(Arc::new(|_, x| x)),
            ModelSpec::Square => Some(Arc::new(|_, x| x * x)),
            ModelSpec::Cube => Some(Arc::new(|_, x| x * x * x)),
            ModelSpec::Cos => Some(Arc::new(|_, x: f64| x.cos())),
            _ => None,
        }
    }

    /// Degree in `x` of a polynomial state model.
    pub fn polynomial_degree(&self) -> Option<usize> {
        match self {
            ModelSpec::Linear => Some(1),
            ModelSpec::Square => Some(2),
            ModelSpec::Cube => Some(3),
            _ => None,
        }
    }

    /// Pathwise value of `∫_0^T Y d⁻B` from the chain rule, when available
    /// (valid since `B` has zero quadratic variation for `H > 1/2`).
    pub fn chain_rule_oracle(&self, b_t: f64) -> Option<f64> {
        match self {
            ModelSpec::Zero => Some(0.0),
            ModelSpec::Constant { c } => Some(c * b_t),
            ModelSpec::Linear => Some(b_t * b_t / 2.0),
            ModelSpec::Square => Some(b_t.powi(3) / 3.0),
            ModelSpec::Cube => Some(b_t.powi(4) / 4.0),
            ModelSpec::Cos => Some(b_t.sin()),
            _ => None,
        }
    }

    pub fn build(
        &self,
        cfg: HurstConfig,
        grid: SimulationGrid,
        quad_order: usize,
    ) -> Result<Box<dyn IntegrandModel>> {
        if let Some(g) = self.time_function() {
            return Ok(Box::new(Deterministic::new(self.to_string(), g, cfg, grid)));
        }
        if let Some(g) = self.state_function() {
            // an m-point rule integrates polynomials of degree 2m−1 exactly, and
            // the second derivative weight (z²−1) adds two degrees
            let order = match self.polynomial_degree() {
                Some(d) => quad_order.min(d / 2 + 2),
                None => quad_order,
            };
            let rule = QuadratureRule::new(order)?;
            let ladder = Arc::new(RuleLadder::new()?);
            return Ok(Box::new(StateDependent::new(self.to_string(), g, rule, ladder, cfg, grid)));
        }
        match *self {
            ModelSpec::FracMart { alpha, z } => Ok(Box::new(FractionalMartingale::new(alpha, z, cfg, grid)?)),
            _ => unreachable!("every variant is covered above"),
        }
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::Zero => write!(f, "zero"),
            ModelSpec::Constant { c } => write!(f, "constant(c={c})"),
            ModelSpec::Time => write!(f, "time"),
            ModelSpec::Linear => write!(f, "linear"),
            ModelSpec::Square => write!(f, "square"),
            ModelSpec::Cube => write!(f, "cube"),
            ModelSpec::Cos => write!(f, "cos"),
            ModelSpec::FracMart { alpha, z } => {
                let z = match z {
                    ZKind::ConstantOne => "one",
                    ZKind::CosOfW => "cos",
                };
                write!(f, "fracmart(alpha={alpha}, z={z})")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::VolterraWeights;

    fn setup(h: f64, n: usize) -> (HurstConfig, SimulationGrid, Arc<VolterraWeights>) {
        let cfg = HurstConfig::new(h, 1.0).unwrap();
        let grid = SimulationGrid::new(1.0, n, 4).unwrap();
        (cfg, grid, Arc::new(VolterraWeights::new(cfg, grid)))
    }

    #[test]
    fn deterministic_identities() {
        let (cfg, grid, w) = setup(0.7, 16);
        let m = ModelSpec::Time.build(cfg, grid, 16).unwrap();
        let ctx = PathContext::simulate(w, 1, 0).unwrap();
        let p = m.on_path(&ctx).unwrap();
        for t in [3usize, 8, 16] {
            for r in 0..t {
                assert_eq!(p.cond(r, t).unwrap(), grid.node(t));
                assert_eq!(p.phi1(t, r).unwrap(), 0.0);
                assert_eq!(m.mean_phi1(t, r).unwrap(), 0.0);
            }
        }
        let one = ModelSpec::Constant { c: 1.0 }.build(cfg, grid, 16).unwrap();
        let p1 = one.on_path(&ctx).unwrap();
        assert_eq!(p1.phi1(5, 2).unwrap(), 0.0);
        assert_eq!(p1.phi2(5, 3, 2).unwrap(), 0.0);
        assert!(one.is_deterministic());
    }

    #[test]
    fn linear_state_model_reduces_to_kernel() {
        let (cfg, grid, w) = setup(0.75, 16);
        let m = ModelSpec::Linear.build(cfg, grid, 16).unwrap();
        let ctx = PathContext::simulate(w, 2, 0).unwrap();
        let p = m.on_path(&ctx).unwrap();
        for &(r, t) in &[(0usize, 5usize), (3, 9), (15, 16)] {
            let k = cfg.kernel(grid.node(t), grid.node(r));
            assert!((p.phi1(t, r).unwrap() - k).abs() < 1e-12);
            assert!((p.cond(r, t).unwrap() - ctx.cond_mean(r, t)).abs() < 1e-12);
            if r + 1 < t {
                assert!(p.phi2(t, r + 1, r).unwrap().abs() < 1e-12);
            }
        }
        assert_eq!(p.cond(7, 7).unwrap(), ctx.b(7));
        assert!(p.phi1(4, 4).is_err());
        assert!(p.phi2(4, 2, 2).is_err());
        assert!((m.mean(16).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn square_state_model_moments() {
        let (cfg, grid, w) = setup(0.75, 16);
        let m = ModelSpec::Square.build(cfg, grid, 16).unwrap();
        let ctx = PathContext::simulate(w, 3, 0).unwrap();
        let p = m.on_path(&ctx).unwrap();
        for t in [4usize, 16] {
            let tt = grid.node(t);
            assert!((m.mean(t).unwrap() - tt.powf(1.5)).abs() < 1e-12);
        }
        let (t, v, r) = (12usize, 7usize, 3usize);
        let expect = 2.0 * cfg.kernel(grid.node(t), grid.node(r)) * cfg.kernel(grid.node(t), grid.node(v));
        assert!((p.phi2(t, v, r).unwrap() - expect).abs() < 1e-11);
        // even g: regression factor vanishes
        assert!(m.mean_phi1(10, 4).unwrap().abs() < 1e-14);
    }

    #[test]
    fn cos_state_model_matches_characteristic_function() {
        let (cfg, grid, w) = setup(0.7, 16);
        let m = ModelSpec::Cos.build(cfg, grid, 32).unwrap();
        let ctx = PathContext::simulate(w, 4, 0).unwrap();
        let p = m.on_path(&ctx).unwrap();
        for &(r, t) in &[(2usize, 9usize), (8, 16), (15, 16)] {
            let theta = cfg.residual_variance(grid.node(r), grid.node(t)).unwrap();
            let expect = ctx.cond_mean(r, t).cos() * (-theta / 2.0).exp();
            assert!((p.cond(r, t).unwrap() - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn slice_agrees_with_separate_evaluations() {
        let (cfg, grid, w) = setup(0.8, 16);
        let m = ModelSpec::Cube.build(cfg, grid, 24).unwrap();
        let ctx = PathContext::simulate(w, 5, 0).unwrap();
        let p = m.on_path(&ctx).unwrap();
        let (t, r) = (14usize, 5usize);
        let s = p.slice(t, r).unwrap();
        assert!((s.cond - p.cond(r, t).unwrap()).abs() < 1e-12);
        assert!((s.phi1 - p.phi1(t, r).unwrap()).abs() < 1e-12);
        // exact K·∂K moment vs left-node freezing: close on a fine enough grid away from the diagonal
        let cells = phi2_dk_inner_by_cells(p.as_ref(), &cfg, &grid, t, r).unwrap();
        assert!((s.phi2_dk - cells).abs() < 0.35 * s.phi2_dk.abs());
    }

    #[test]
    fn fracmart_identities() {
        let (cfg, grid, w) = setup(0.75, 16);
        assert!(ModelSpec::FracMart { alpha: -0.25, z: ZKind::ConstantOne }
            .build(cfg, grid, 8)
            .is_err());
        let m = ModelSpec::FracMart { alpha: 0.0, z: ZKind::ConstantOne }.build(cfg, grid, 8).unwrap();
        let ctx = PathContext::simulate(w.clone(), 6, 0).unwrap();
        let p = m.on_path(&ctx).unwrap();
        // α = 0, Z ≡ 1 gives Y = W
        for t in [0usize, 5, 16] {
            assert!((p.value(t).unwrap() - ctx.w(t)).abs() < 1e-13);
        }
        assert_eq!(p.phi2(9, 5, 2).unwrap(), 0.0);
        assert_eq!(p.phi2_dk_inner(9, 2).unwrap(), 0.0);

        let c = ModelSpec::FracMart { alpha: 0.25, z: ZKind::CosOfW }.build(cfg, grid, 8).unwrap();
        let pc = c.on_path(&ctx).unwrap();
        let dw = ctx.dw();
        let (r, t) = (6usize, 13usize);
        let direct: f64 = (0..r)
            .map(|j| ((t - j) as f64 * grid.dt()).powf(0.25) * ctx.w(j).cos() * dw[j])
            .sum();
        assert!((pc.cond(r, t).unwrap() - direct).abs() < 1e-13);
        assert!((c.mean_phi1(t, r).unwrap() - (7.0 * grid.dt()).powf(0.25) * (-grid.node(r) / 2.0).exp()).abs() < 1e-14);
        // continuous ∫_r^t (t−v)^α e^{−(v−r)/2} ∂K/∂t(t,v) dv, up to −sin(W_r)
        let lag = (t - r) as f64 * grid.dt();
        let p = 0.25 + cfg.alpha_k() - 1.0;
        let oracle = crate::quad::integrate_endpoint_power(|x| cfg.c_h() * (-x / 2.0).exp(), lag, p, 1e-12, 1e-10)
            .unwrap();
        let exact = pc.phi2_dk_inner(t, r).unwrap() / -ctx.w(r).sin();
        assert!((exact - oracle).abs() < 0.02 * oracle, "{exact} vs {oracle}");
    }

    #[test]
    fn registry_parsing() {
        let mut p = BTreeMap::new();
        assert_eq!(ModelSpec::from_name("linear", &p).unwrap(), ModelSpec::Linear);
        p.insert("alpha".to_string(), "0.1".to_string());
        p.insert("z".to_string(), "cos".to_string());
        assert_eq!(
            ModelSpec::from_name("fracmart", &p).unwrap(),
            ModelSpec::FracMart { alpha: 0.1, z: ZKind::CosOfW }
        );
        assert!(ModelSpec::from_name("linear", &p).is_err());
        assert!(ModelSpec::from_name("nope", &BTreeMap::new()).is_err());
        let mut bad = BTreeMap::new();
        bad.insert("c".to_string(), "abc".to_string());
        assert!(ModelSpec::from_name("constant", &bad).is_err());
    }
}
