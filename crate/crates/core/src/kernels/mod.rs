//! The Volterra kernel `K(t,s) = √(2H)(t−s)^{H−1/2}` and everything derived
//! from it that does not depend on a sample path.
//!
//! All functions are pure. Cell integrals use exact antiderivatives so that no
//! downstream sum ever evaluates `(t−s)^{H−3/2}` at the singular point.

mod hnorm;
pub mod special;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;

pub use special::incomplete_beta;

const COVARIANCE_ABS_TOL: f64 = 1e-10;

/// Hurst exponent and horizon. Construction enforces `1/2 < H < 1`, `T > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawHurstConfig", into = "RawHurstConfig")]
pub struct HurstConfig {
    hurst: f64,
    horizon: f64,
    alpha_k: f64,
    c_k: f64,
}

#[derive(Serialize, Deserialize)]
struct RawHurstConfig {
    hurst: f64,
    horizon: f64,
}

impl TryFrom<RawHurstConfig> for HurstConfig {
    type Error = Error;
    fn try_from(raw: RawHurstConfig) -> Result<Self> {
        HurstConfig::new(raw.hurst, raw.horizon)
    }
}

impl From<HurstConfig> for RawHurstConfig {
    fn from(cfg: HurstConfig) -> Self {
        RawHurstConfig {
            hurst: cfg.hurst,
            horizon: cfg.horizon,
        }
    }
}

impl HurstConfig {
    pub fn new(hurst: f64, horizon: f64) -> Result<Self> {
        if !(hurst > 0.5 && hurst < 1.0) {
            return Err(Error::InvalidHurst(hurst));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidHorizon(horizon));
        }
        Ok(Self {
            hurst,
            horizon,
            alpha_k: hurst - 0.5,
            c_k: (2.0 * hurst).sqrt(),
        })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Kernel exponent `H − 1/2`.
    pub fn alpha_k(&self) -> f64 {
        self.alpha_k
    }

    /// Kernel prefactor `√(2H)`.
    pub fn c_k(&self) -> f64 {
        self.c_k
    }

    /// Prefactor of `∂K/∂t`, `√(2H)(H − 1/2)`.
    pub fn c_h(&self) -> f64 {
        self.c_k * self.alpha_k
    }

    /// `K(t,s)`; zero for `s ≥ t`.
    pub fn kernel(&self, t: f64, s: f64) -> f64 {
        if s < t {
            self.c_k * (t - s).powf(self.alpha_k)
        } else {
            0.0
        }
    }

    /// `∂K/∂t(t,s)`, defined only for `s < t`.
    pub fn kernel_dt(&self, t: f64, s: f64) -> Result<f64> {
        if !(s < t) {
            return Err(Error::Singular {
                op: "kernel_dt",
                s,
                t,
            });
        }
        Ok(self.c_h() * (t - s).powf(self.alpha_k - 1.0))
    }

    fn check_cell(op: &'static str, t: f64, a: f64, b: f64) -> Result<()> {
        if !(a <= b) {
            return Err(Error::domain(op, format!("empty cell: a = {a} > b = {b}")));
        }
        if !(b <= t) {
            return Err(Error::domain(op, format!("cell end b = {b} beyond t = {t}")));
        }
        Ok(())
    }

    /// `∫_a^b K(t,u) du` for `a ≤ b ≤ t`, by the exact antiderivative.
    pub fn cell_integral(&self, t: f64, a: f64, b: f64) -> Result<f64> {
        Self::check_cell("cell_integral", t, a, b)?;
        Ok(self.cell_integral_unchecked(t - a, t - b))
    }

    /// Same integral in lag form: `far = t − a`, `near = t − b`, `far ≥ near ≥ 0`.
    pub(crate) fn cell_integral_unchecked(&self, far: f64, near: f64) -> f64 {
        let p = self.hurst + 0.5;
        self.c_k / p * (far.powf(p) - near.powf(p))
    }

    /// `∫_a^b ∂K/∂t(t,v) dv = √(2H)[(t−a)^{H−1/2} − (t−b)^{H−1/2}]`, finite at `b = t`.
    pub fn cell_integral_dt(&self, t: f64, a: f64, b: f64) -> Result<f64> {
        Self::check_cell("cell_integral_dt", t, a, b)?;
        Ok(self.cell_integral_dt_unchecked(t - a, t - b))
    }

    pub(crate) fn cell_integral_dt_unchecked(&self, far: f64, near: f64) -> f64 {
        self.c_k * (far.powf(self.alpha_k) - near.powf(self.alpha_k))
    }

    /// `∫_a^b K(t,v) ∂K/∂t(t,v) dv = H[(t−a)^{2H−1} − (t−b)^{2H−1}]`.
    pub(crate) fn cell_integral_k_dt_unchecked(&self, far: f64, near: f64) -> f64 {
        let p = 2.0 * self.hurst - 1.0;
        self.hurst * (far.powf(p) - near.powf(p))
    }

    fn check_time(&self, op: &'static str, x: f64) -> Result<()> {
        if !(x >= 0.0 && x <= self.horizon * (1.0 + 1e-12)) {
            return Err(Error::domain(
                op,
                format!("time {x} outside [0, {}]", self.horizon),
            ));
        }
        Ok(())
    }

    /// Covariance `R(s,t) = ∫_0^{s∧t} K(t,u)K(s,u) du` by adaptive quadrature.
    pub fn covariance(&self, s: f64, t: f64) -> Result<f64> {
        self.check_time("covariance", s)?;
        self.check_time("covariance", t)?;
        let (lo, hi) = if s <= t { (s, t) } else { (t, s) };
        if lo == 0.0 {
            return Ok(0.0);
        }
        let two_h = 2.0 * self.hurst;
        if lo == hi {
            // (lo−u)^{2H−1} removed exactly by the substitution
            return quad::integrate_endpoint_power(|_| two_h, lo, two_h - 1.0, COVARIANCE_ABS_TOL, 1e-13);
        }
        let a = self.alpha_k;
        quad::integrate_endpoint_power(
            |u| two_h * (hi - u).powf(a),
            lo,
            a,
            COVARIANCE_ABS_TOL,
            1e-13,
        )
    }

    /// `∂²R/∂t∂s(s,t) = 2H(H−1/2)²|t−s|^{2H−2} beta_{(s∧t)/(s∨t)}(H−1/2, 2−2H)`.
    pub fn covariance_density(&self, s: f64, t: f64) -> Result<f64> {
        if !(s > 0.0 && t > 0.0) {
            return Err(Error::domain(
                "covariance_density",
                format!("arguments must be positive, got s = {s}, t = {t}"),
            ));
        }
        if s == t {
            return Err(Error::Singular {
                op: "covariance_density",
                s,
                t,
            });
        }
        let h = self.hurst;
        let (lo, hi) = if s < t { (s, t) } else { (t, s) };
        let ib = incomplete_beta(lo / hi, h - 0.5, 2.0 - 2.0 * h)?;
        Ok(2.0 * h * self.alpha_k * self.alpha_k * (hi - lo).powf(2.0 * h - 2.0) * ib)
    }

    /// `(t−s)^{2H}/(2H)`: conditional residual variance written for the unit-prefactor
    /// kernel `(t−u)^{H−1/2}`. See [`Self::residual_variance`] for the simulated process.
    pub fn theta_var(&self, s: f64, t: f64) -> Result<f64> {
        if !(0.0 <= s && s <= t) {
            return Err(Error::domain("theta_var", format!("need 0 ≤ s ≤ t, got s = {s}, t = {t}")));
        }
        let two_h = 2.0 * self.hurst;
        Ok((t - s).powf(two_h) / two_h)
    }

    /// `(t^{2H} − (t−u)^{2H})/(2H)`, unit-prefactor counterpart of
    /// [`Self::conditional_mean_variance`].
    pub fn sigma2_cond(&self, u: f64, t: f64) -> Result<f64> {
        if !(0.0 <= u && u <= t) {
            return Err(Error::domain("sigma2_cond", format!("need 0 ≤ u ≤ t, got u = {u}, t = {t}")));
        }
        let two_h = 2.0 * self.hurst;
        Ok((t.powf(two_h) - (t - u).powf(two_h)) / two_h)
    }

    /// `Var(B_t − Eˢ[B_t]) = ∫_s^t K(t,u)² du = (t−s)^{2H}`.
    pub fn residual_variance(&self, s: f64, t: f64) -> Result<f64> {
        Ok(2.0 * self.hurst * self.theta_var(s, t)?)
    }

    /// `Var(Eᵘ[B_t]) = ∫_0^u K(t,v)² dv = t^{2H} − (t−u)^{2H}`.
    pub fn conditional_mean_variance(&self, u: f64, t: f64) -> Result<f64> {
        Ok(2.0 * self.hurst * self.sigma2_cond(u, t)?)
    }

    /// `Var(B_t) = R(t,t) = t^{2H}`.
    pub fn variance(&self, t: f64) -> f64 {
        t.max(0.0).powf(2.0 * self.hurst)
    }

    /// `∫_0^r (∂K/∂t(t,u))² du = 2H(H−1/2)²[(t−r)^{2H−2} − t^{2H−2}]/(2−2H)`,
    /// the variance of the Nelson derivative `𝒟_{r,t}B`.
    pub fn nelson_variance(&self, r: f64, t: f64) -> Result<f64> {
        if !(0.0 <= r && r < t) {
            return Err(Error::Singular {
                op: "nelson_variance",
                s: r,
                t,
            });
        }
        let e = 2.0 * self.hurst - 2.0;
        Ok(self.c_h().powi(2) * ((t - r).powf(e) - t.powf(e)) / (-e))
    }

    /// `E|𝐃_{x1,x2;r}B|² = ∫_0^r Var(𝒟_{s,x1}B)·(∂K/∂t(x2,s))² ds`, by the Itô
    /// isometry applied to the defining stochastic integral.
    pub fn bold_d_second_moment(&self, x1: f64, x2: f64, r: f64) -> Result<f64> {
        if !(0.0 <= r && r < x1.min(x2)) || x1 == x2 {
            return Err(Error::domain(
                "bold_d_second_moment",
                format!("need 0 ≤ r < x1 ∧ x2 and x1 ≠ x2, got r = {r}, x1 = {x1}, x2 = {x2}"),
            ));
        }
        if r == 0.0 {
            return Ok(0.0);
        }
        let c2 = self.c_h().powi(2);
        let e = 2.0 * self.hurst - 3.0;
        quad::integrate(
            |s| self.nelson_variance(s, x1).unwrap_or(f64::NAN) * c2 * (x2 - s).powf(e),
            0.0,
            r,
            0.0,
            1e-10,
        )
    }

    /// `|g|²_ℋ = ∫∫|g_t g_s| ∂²R/∂t∂s ds dt` with a diagonal band of width `delta`
    /// replaced by its leading-order analytic contribution.
    pub fn hnorm_sq<G: Fn(f64) -> f64>(&self, g: G, delta: f64) -> Result<f64> {
        hnorm::hnorm_sq(self, g, delta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(h: f64) -> HurstConfig {
        HurstConfig::new(h, 1.0).unwrap()
    }

    #[test]
    fn construction_rejects_closed_endpoints() {
        assert!(matches!(HurstConfig::new(0.5, 1.0), Err(Error::InvalidHurst(_))));
        assert!(matches!(HurstConfig::new(1.0, 1.0), Err(Error::InvalidHurst(_))));
        assert!(matches!(HurstConfig::new(f64::NAN, 1.0), Err(Error::InvalidHurst(_))));
        assert!(matches!(HurstConfig::new(0.7, 0.0), Err(Error::InvalidHorizon(_))));
        assert!(matches!(HurstConfig::new(0.7, f64::INFINITY), Err(Error::InvalidHorizon(_))));
        let c = cfg(0.8);
        assert_eq!(c.alpha_k(), 0.8 - 0.5);
        assert!((c.c_k() * c.c_k() - 1.6).abs() < 1e-15);
    }

    #[test]
    fn kernel_values() {
        assert_eq!(cfg(0.75).kernel(1.0, 1.0), 0.0);
        assert_eq!(cfg(0.75).kernel(1.0, 2.0), 0.0);
        assert!((cfg(0.75).kernel(1.0, 0.0) - 1.224_744_871_391_589).abs() < 1e-12);
        assert!((cfg(0.6).kernel(2.0, 1.0) - 1.2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn kernel_dt_values() {
        let c = cfg(0.75);
        assert!((c.kernel_dt(1.0, 0.0).unwrap() - 1.5f64.sqrt() * 0.25).abs() < 1e-15);
        let expect = 1.5f64.sqrt() * 0.25 * 0.25f64.powf(-0.75);
        assert!((c.kernel_dt(1.0, 0.75).unwrap() - expect).abs() < 1e-12);
        assert!(cfg(0.9).kernel_dt(1.0, 1.0).is_err());
        assert!(cfg(0.9).kernel_dt(1.0, 1.5).is_err());
    }

    #[test]
    fn cell_integrals() {
        let c = cfg(0.75);
        assert!((c.cell_integral(1.0, 0.0, 1.0).unwrap() - 1.5f64.sqrt() / 1.25).abs() < 1e-15);
        assert_eq!(c.cell_integral(1.0, 0.3, 0.3).unwrap(), 0.0);
        let half = 1.5f64.sqrt() / 1.25 * (1.0 - 0.5f64.powf(1.25));
        assert!((c.cell_integral(1.0, 0.0, 0.5).unwrap() - half).abs() < 1e-15);
        assert!(c.cell_integral(1.0, 0.5, 1.5).is_err());
        assert!(c.cell_integral(1.0, 0.6, 0.5).is_err());

        assert!((c.cell_integral_dt(1.0, 0.0, 1.0).unwrap() - 1.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(c.cell_integral_dt(1.0, 0.2, 0.2).unwrap(), 0.0);
        assert!(c.cell_integral_dt(1.0, 0.5, 0.4).is_err());
        assert!(c.cell_integral_dt(1.0, 0.5, 1.01).is_err());
    }

    #[test]
    fn covariance_on_diagonal_and_origin() {
        for &h in &[0.55, 0.6, 0.75, 0.9, 0.97] {
            let c = cfg(h);
            for &t in &[0.1, 0.5, 1.0] {
                let r = c.covariance(t, t).unwrap();
                assert!((r / t.powf(2.0 * h) - 1.0).abs() < 1e-8, "H={h} t={t}");
            }
            assert_eq!(c.covariance(0.0, 0.7).unwrap(), 0.0);
        }
        assert!(cfg(0.7).covariance(-0.1, 0.5).is_err());
        assert!(cfg(0.7).covariance(0.5, 1.5).is_err());
    }

    #[test]
    fn covariance_is_symmetric() {
        let c = cfg(0.65);
        let a = c.covariance(0.3, 0.8).unwrap();
        let b = c.covariance(0.8, 0.3).unwrap();
        assert_eq!(a, b);
        assert!(a > 0.0 && a < c.covariance(0.8, 0.8).unwrap());
    }

    #[test]
    fn covariance_density_symmetric_and_rejects_diagonal() {
        let c = cfg(0.75);
        let a = c.covariance_density(0.5, 1.0).unwrap();
        let b = c.covariance_density(1.0, 0.5).unwrap();
        assert_eq!(a, b);
        let expect = 1.5 * 0.0625 * 0.5f64.powf(-0.5) * incomplete_beta(0.5, 0.25, 0.5).unwrap();
        assert!((a - expect).abs() < 1e-14);
        assert!(matches!(c.covariance_density(0.4, 0.4), Err(Error::Singular { .. })));
        assert!(c.covariance_density(0.0, 0.4).is_err());
    }

    #[test]
    fn conditional_variances() {
        let c = cfg(0.75);
        assert!((c.theta_var(0.0, 1.0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(c.theta_var(0.4, 0.4).unwrap(), 0.0);
        assert!((c.theta_var(0.5, 1.0).unwrap() - 0.5f64.powf(1.5) / 1.5).abs() < 1e-15);
        assert_eq!(c.sigma2_cond(0.0, 0.8).unwrap(), 0.0);
        assert!((c.sigma2_cond(0.8, 0.8).unwrap() - 0.8f64.powf(1.5) / 1.5).abs() < 1e-15);
        for &(u, t) in &[(0.0, 1.0), (0.2, 0.9), (0.7, 0.7), (0.33, 0.5)] {
            let sum = c.sigma2_cond(u, t).unwrap() + c.theta_var(u, t).unwrap();
            assert!((sum - t.powf(1.5) / 1.5).abs() < 1e-14);
            let full = c.conditional_mean_variance(u, t).unwrap() + c.residual_variance(u, t).unwrap();
            assert!((full - c.variance(t)).abs() < 1e-14);
        }
        assert!(c.theta_var(0.6, 0.5).is_err());
        assert!(c.sigma2_cond(0.6, 0.5).is_err());
    }

    #[test]
    fn nelson_variance_matches_quadrature() {
        let c = cfg(0.7);
        let (r, t) = (0.4, 0.9);
        let q = quad::integrate(|u| c.kernel_dt(t, u).unwrap().powi(2), 0.0, r, 1e-14, 1e-12).unwrap();
        assert!((c.nelson_variance(r, t).unwrap() - q).abs() < 1e-10);
        assert!(c.nelson_variance(0.9, 0.9).is_err());
        assert_eq!(c.nelson_variance(0.0, 0.9).unwrap(), 0.0);
    }
}
