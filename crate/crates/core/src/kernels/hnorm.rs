use super::{special, HurstConfig};
use crate::error::{Error, Result};
use crate::quad;

const INNER_REL_TOL: f64 = 1e-10;
const OUTER_REL_TOL: f64 = 1e-8;
// relative growth between δ and δ/2 that we read as divergence
const DIVERGENCE_RATIO: f64 = 0.1;

pub(super) fn hnorm_sq<G: Fn(f64) -> f64>(cfg: &HurstConfig, g: G, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < cfg.horizon()) {
        return Err(Error::domain(
            "hnorm_sq",
            format!("band width {delta} must lie in (0, T)"),
        ));
    }
    let coarse = banded(cfg, &g, delta)?;
    let fine = banded(cfg, &g, 0.5 * delta)?;
    if !(coarse.is_finite() && fine.is_finite()) {
        return Err(Error::Quadrature("|ℋ| norm is not finite".into()));
    }
    let scale = fine.abs().max(f64::MIN_POSITIVE);
    if (fine - coarse).abs() > DIVERGENCE_RATIO * scale {
        return Err(Error::Quadrature(format!(
            "|ℋ| norm unstable under band refinement: {coarse} (δ={delta}) vs {fine} (δ={})",
            0.5 * delta
        )));
    }
    Ok(fine)
}

fn banded<G: Fn(f64) -> f64>(cfg: &HurstConfig, g: &G, delta: f64) -> Result<f64> {
    let h = cfg.hurst();
    let horizon = cfg.horizon();
    let alpha = cfg.alpha_k();
    let lead = 2.0 * h * alpha * alpha * special::beta(alpha, 2.0 - 2.0 * h);
    // density ≈ lead·v^{2H−2} − 2Hα² t^{2H−2}/(2−2H) for v = t−s ≪ t
    let next = 2.0 * h * alpha * alpha / (2.0 - 2.0 * h);

    // off-band part, using symmetry of the density
    let outer = |t: f64| -> f64 {
        let gt = g(t).abs();
        if gt == 0.0 || t <= delta {
            return 0.0;
        }
        quad::integrate(
            |s| g(s).abs() * cfg.covariance_density(s, t).unwrap_or(f64::NAN),
            0.0,
            t - delta,
            0.0,
            INNER_REL_TOL,
        )
        .map_or(f64::NAN, |v| gt * v)
    };
    let off = 2.0 * quad::integrate(outer, delta, horizon, 0.0, OUTER_REL_TOL)?;

    let p = 2.0 * h - 1.0;
    let band = quad::integrate(
        |t| {
            let gt = g(t);
            if gt == 0.0 {
                return 0.0;
            }
            let below = delta.min(t);
            let above = delta.min(horizon - t);
            let width = below + above;
            let mass = lead * (below.powf(p) + above.powf(p)) / p - next * t.powf(2.0 * h - 2.0) * width;
            gt * gt * mass
        },
        0.0,
        horizon,
        0.0,
        OUTER_REL_TOL,
    )?;
    Ok(off + band)
}
