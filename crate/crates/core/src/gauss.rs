//! Gauss–Hermite quadrature against the standard normal law, and the heat
//! semigroup `(P_s g)(t,x) = E[g(t, x + √s Z)]` with its first two spatial
//! derivatives in score-function form, so `g` is never differentiated.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::kernels::HurstConfig;

pub const DEFAULT_ORDER: usize = 64;
/// Below this variance `P_s` is the identity and its derivatives are ill-conditioned.
pub const MIN_VARIANCE: f64 = 1e-12;
const ADAPTIVE_REL_TOL: f64 = 1e-8;
const ADAPTIVE_MAX_ORDER: usize = 512;

/// Nodes and weights for `E[f(Z)]`, `Z ~ N(0,1)`; weights sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// Builds the `order`-point rule: roots of the orthonormal Hermite
    /// recurrence are bracketed by a sign-change scan, then polished by
    /// safeguarded Newton steps. Nodes come out exactly symmetric.
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::domain("QuadratureRule::new", "order must be positive"));
        }
        let n = order;
        let nf = n as f64;
        let m = n.div_ceil(2);
        let mut half_x = Vec::with_capacity(m);
        let mut half_w = Vec::with_capacity(m);
        // roots lie below √(2n+1); gaps are at least ~π/√(2n+1)
        let step = 0.2 * std::f64::consts::PI / (2.0 * nf + 1.0).sqrt();
        let mut hi = (2.0 * nf + 1.0).sqrt() + 1.0;
        let mut f_hi = hermite(n, hi).0;
        while half_x.len() < m && hi > -step {
            let lo = hi - step;
            let f_lo = hermite(n, lo).0;
            if f_lo == 0.0 || f_lo.signum() != f_hi.signum() {
                let z = polish(n, lo, hi, f_lo);
                let pp = hermite(n, z).1;
                half_x.push(z);
                half_w.push(2.0 / (pp * pp));
            }
            hi = lo;
            f_hi = if f_lo == 0.0 { hermite(n, lo - 0.5 * step).0 } else { f_lo };
        }
        if half_x.len() != m {
            return Err(Error::Quadrature(format!(
                "found {} of {m} Gauss–Hermite roots of order {n}",
                half_x.len()
            )));
        }
        // physicists' rule → standard normal: z = √2 x, w / √π
        let scale = std::f64::consts::PI.sqrt();
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for i in 0..m {
            nodes.push(-std::f64::consts::SQRT_2 * half_x[i]);
            weights.push(half_w[i] / scale);
        }
        for i in (0..n / 2).rev() {
            nodes.push(std::f64::consts::SQRT_2 * half_x[i]);
            weights.push(half_w[i] / scale);
        }
        if n % 2 == 1 {
            // middle root is exactly zero
            nodes[m - 1] = 0.0;
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Quadrature(format!(
                "Gauss–Hermite weights of order {n} sum to {total}"
            )));
        }
        Ok(Self { nodes, weights })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `E[f(Z)]` under the rule.
    pub fn expect<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        // symmetric pairs summed first so odd integrands cancel exactly
        let n = self.nodes.len();
        let mut acc = 0.0;
        for i in 0..n / 2 {
            let j = n - 1 - i;
            acc += self.weights[i] * f(self.nodes[i]) + self.weights[j] * f(self.nodes[j]);
        }
        if n % 2 == 1 {
            acc += self.weights[n / 2] * f(0.0);
        }
        acc
    }
}

// orthonormal Hermite recurrence at x: (p_n(x), p_n'(x)) up to the e^{-x²/2} factor
fn hermite(n: usize, x: f64) -> (f64, f64) {
    let mut p1 = std::f64::consts::PI.powf(-0.25);
    let mut p2 = 0.0;
    for j in 1..=n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = x * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
    }
    (p1, (2.0 * n as f64).sqrt() * p2)
}

// root in [lo, hi]: Newton while it stays inside the bracket, bisection otherwise
fn polish(n: usize, mut lo: f64, mut hi: f64, f_lo: f64) -> f64 {
    if f_lo == 0.0 {
        return lo;
    }
    let lo_sign = f_lo.signum();
    let mut z = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (p, dp) = hermite(n, z);
        if p == 0.0 {
            return z;
        }
        if p.signum() == lo_sign {
            lo = z;
        } else {
            hi = z;
        }
        let newton = z - p / dp;
        let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - z).abs() <= 1e-15 * z.abs().max(1.0) {
            return next;
        }
        z = next;
    }
    z
}

/// Cached rules of increasing order for adaptive evaluation.
#[derive(Debug)]
pub struct RuleLadder {
    rules: Vec<QuadratureRule>,
}

impl RuleLadder {
    pub fn new() -> Result<Self> {
        let mut rules = Vec::new();
        let mut order = DEFAULT_ORDER;
        while order <= ADAPTIVE_MAX_ORDER {
            rules.push(QuadratureRule::new(order)?);
            order *= 2;
        }
        Ok(Self { rules })
    }

    /// `E[f(Z)]`, doubling the order until two successive orders agree to 1e-8 relative.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> Result<f64> {
        let mut prev = self.rules[0].expect(&f);
        for rule in &self.rules[1..] {
            let next = rule.expect(&f);
            if (next - prev).abs() <= ADAPTIVE_REL_TOL * next.abs().max(prev.abs()) + f64::MIN_POSITIVE {
                return Ok(next);
            }
            prev = next;
        }
        // last two orders of a polynomial-growth integrand rarely disagree; report if they do
        Err(Error::Quadrature(format!(
            "Gauss–Hermite expectation unresolved at order {ADAPTIVE_MAX_ORDER}"
        )))
    }
}

/// A Borel function `g(t, x)` of time and state.
pub type StateFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

fn check_variance(op: &'static str, s: f64) -> Result<()> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::domain(op, format!("variance must be positive, got {s}")));
    }
    Ok(())
}

/// `(P_s g)(t,x) ≈ Σ w_k g(t, x + √s z_k)`.
pub fn heat_apply<G: Fn(f64, f64) -> f64>(g: G, t: f64, x: f64, s: f64, rule: &QuadratureRule) -> Result<f64> {
    check_variance("heat_apply", s)?;
    if s < MIN_VARIANCE {
        return Ok(g(t, x));
    }
    let sd = s.sqrt();
    Ok(rule.expect(|z| g(t, x + sd * z)))
}

/// `∂_x (P_s g)(t,x) ≈ Σ w_k g(t, x + √s z_k) z_k / √s`.
pub fn heat_dx<G: Fn(f64, f64) -> f64>(g: G, t: f64, x: f64, s: f64, rule: &QuadratureRule) -> Result<f64> {
    check_variance("heat_dx", s)?;
    if s < MIN_VARIANCE {
        return Err(Error::domain("heat_dx", format!("variance {s} below {MIN_VARIANCE}")));
    }
    let sd = s.sqrt();
    Ok(rule.expect(|z| g(t, x + sd * z) * z) / sd)
}

/// `∂²_x (P_s g)(t,x) ≈ Σ w_k g(t, x + √s z_k)(z_k² − 1) / s`.
pub fn heat_d2x<G: Fn(f64, f64) -> f64>(g: G, t: f64, x: f64, s: f64, rule: &QuadratureRule) -> Result<f64> {
    check_variance("heat_d2x", s)?;
    if s < MIN_VARIANCE {
        return Err(Error::domain("heat_d2x", format!("variance {s} below {MIN_VARIANCE}")));
    }
    let sd = s.sqrt();
    Ok(rule.expect(|z| g(t, x + sd * z) * (z * z - 1.0)) / s)
}

/// `(P_s g, ∂_x P_s g, ∂²_x P_s g)` from one pass over the nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatJet {
    pub value: f64,
    pub dx: f64,
    pub d2x: f64,
}

pub fn heat_jet<G: Fn(f64, f64) -> f64>(g: G, t: f64, x: f64, s: f64, rule: &QuadratureRule) -> Result<HeatJet> {
    check_variance("heat_jet", s)?;
    if s < MIN_VARIANCE {
        return Err(Error::domain("heat_jet", format!("variance {s} below {MIN_VARIANCE}")));
    }
    let sd = s.sqrt();
    let (mut v, mut d1, mut d2) = (0.0, 0.0, 0.0);
    for (&z, &w) in rule.nodes().iter().zip(rule.weights()) {
        let gz = w * g(t, x + sd * z);
        v += gz;
        d1 += gz * z;
        d2 += gz * (z * z - 1.0);
    }
    Ok(HeatJet {
        value: v,
        dx: d1 / sd,
        d2x: d2 / s,
    })
}

/// `E[∂_x(P_θ g)(t, Eᵘ[B_t])] = E[Y g(t,Y)]/(σ² + θ)` with `Y ~ N(0, σ² + θ)`,
/// where `σ²(u,t) = Var(Eᵘ[B_t])` and `θ(u,t) = Var(B_t − Eᵘ[B_t])`.
pub fn regression_mean_phi1<G: Fn(f64, f64) -> f64>(
    g: G,
    t: f64,
    u: f64,
    cfg: &HurstConfig,
    ladder: &RuleLadder,
) -> Result<f64> {
    if !(u > 0.0 && u < t) {
        return Err(Error::domain(
            "regression_mean_phi1",
            format!("need 0 < u < t, got u = {u}, t = {t}"),
        ));
    }
    let total = cfg.conditional_mean_variance(u, t)? + cfg.residual_variance(u, t)?;
    let sd = total.sqrt();
    // E[Y g(Y)]/Var(Y) = E[Z g(sd Z)]/sd
    Ok(ladder.expect(|z| z * g(t, sd * z))? / sd)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rule(n: usize) -> QuadratureRule {
        QuadratureRule::new(n).unwrap()
    }

    #[test]
    fn moments_of_standard_normal() {
        for &n in &[8, 9, 20, 64, 65, 128, 256] {
            let r = rule(n);
            assert_eq!(r.order(), n);
            assert!((r.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(r.expect(|z| z).abs() < 1e-10);
            assert!((r.expect(|z| z * z) - 1.0).abs() < 1e-10, "order {n}");
            assert!((r.expect(|z| z.powi(4)) - 3.0).abs() < 1e-9);
            assert!(r.weights().iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn nodes_are_symmetric_and_sorted() {
        let r = rule(33);
        let n = r.order();
        for i in 0..n {
            assert_eq!(r.nodes()[i], -r.nodes()[n - 1 - i]);
        }
        assert!(r.nodes().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn zero_order_rejected() {
        assert!(QuadratureRule::new(0).is_err());
    }

    #[test]
    fn heat_of_polynomials() {
        let r = rule(16);
        for &(x, s) in &[(0.0, 1.0), (1.3, 0.2), (-2.0, 3.5)] {
            assert!((heat_apply(|_, y| y, 0.0, x, s, &r).unwrap() - x).abs() < 1e-12);
            assert!((heat_apply(|_, y| y * y, 0.0, x, s, &r).unwrap() - (x * x + s)).abs() < 1e-11);
            assert!((heat_dx(|_, y| y, 0.0, x, s, &r).unwrap() - 1.0).abs() < 1e-12);
            assert!((heat_dx(|_, y| y * y, 0.0, x, s, &r).unwrap() - 2.0 * x).abs() < 1e-11);
            assert!((heat_d2x(|_, y| y * y, 0.0, x, s, &r).unwrap() - 2.0).abs() < 1e-11);
            assert!(heat_d2x(|_, y| y, 0.0, x, s, &r).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn heat_of_cosine_matches_characteristic_function() {
        let r = rule(20);
        for &(x, s) in &[(0.3f64, 0.1f64), (1.1, 0.5), (-0.7, 1.0)] {
            let damp = (-s / 2.0).exp();
            assert!((heat_apply(|_, y: f64| y.cos(), 0.0, x, s, &r).unwrap() - x.cos() * damp).abs() < 1e-8);
            assert!((heat_dx(|_, y: f64| y.cos(), 0.0, x, s, &r).unwrap() + x.sin() * damp).abs() < 1e-8);
            assert!((heat_d2x(|_, y: f64| y.cos(), 0.0, x, s, &r).unwrap() + x.cos() * damp).abs() < 1e-8);
        }
    }

    #[test]
    fn jet_matches_separate_calls() {
        let r = rule(32);
        let g = |t: f64, y: f64| (t * y).sin() + y.powi(3);
        let jet = heat_jet(g, 0.7, 0.4, 0.3, &r).unwrap();
        assert!((jet.value - heat_apply(g, 0.7, 0.4, 0.3, &r).unwrap()).abs() < 1e-14);
        assert!((jet.dx - heat_dx(g, 0.7, 0.4, 0.3, &r).unwrap()).abs() < 1e-13);
        assert!((jet.d2x - heat_d2x(g, 0.7, 0.4, 0.3, &r).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn tiny_variance_handling() {
        let r = rule(8);
        assert_eq!(heat_apply(|_, y| y * y, 0.0, 2.0, 1e-14, &r).unwrap(), 4.0);
        assert!(heat_dx(|_, y| y, 0.0, 2.0, 1e-14, &r).is_err());
        assert!(heat_d2x(|_, y| y, 0.0, 2.0, 1e-14, &r).is_err());
        assert!(heat_apply(|_, y| y, 0.0, 2.0, 0.0, &r).is_err());
        assert!(heat_dx(|_, y| y, 0.0, 2.0, -1.0, &r).is_err());
    }

    #[test]
    fn regression_identity_closed_forms() {
        let cfg = HurstConfig::new(0.75, 1.0).unwrap();
        let ladder = RuleLadder::new().unwrap();
        for &(u, t) in &[(0.1, 0.5), (0.5, 1.0), (0.9, 1.0)] {
            let total = cfg.variance(t);
            let lin = regression_mean_phi1(|_, y| y, t, u, &cfg, &ladder).unwrap();
            assert!((lin - 1.0).abs() < 1e-12);
            let cube = regression_mean_phi1(|_, y| y.powi(3), t, u, &cfg, &ladder).unwrap();
            assert!((cube - 3.0 * total).abs() < 1e-10);
            let cos = regression_mean_phi1(|_, y: f64| y.cos(), t, u, &cfg, &ladder).unwrap();
            assert!(cos.abs() < 1e-14);
        }
        assert!(regression_mean_phi1(|_, y| y, 0.5, 0.5, &cfg, &ladder).is_err());
        assert!(regression_mean_phi1(|_, y| y, 0.5, 0.0, &cfg, &ladder).is_err());
    }
}
