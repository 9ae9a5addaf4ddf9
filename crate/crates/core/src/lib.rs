//! Riemann–Liouville fractional Brownian motion for `H ∈ (1/2, 1)`.
//!
//! The crate simulates `B_t = ∫_0^t √(2H)(t−u)^{H−1/2} dW_u` on a uniform grid
//! driven by a single Brownian path, evaluates forward (regularization)
//! integrals `∫ Y d⁻B`, and evaluates the same integral a second way through
//! its Brownian martingale representation
//!
//! ```text
//! ∫_0^T Y d⁻B = ∫_0^T ∫_0^s E[φ¹_Y(s,u)] ∂K/∂s(s,u) du ds + ∫_0^T 𝒦Y(T,r) dW_r
//! ```
//!
//! so the two routes can be compared path by path.
//!
//! Layout:
//! - [`kernels`]: the Volterra kernel, exact cell moments, covariance and special functions.
//! - [`gauss`]: Gauss–Hermite heat semigroup and its spatial derivatives.
//! - [`paths`]: grids, Brownian increments, RLFBM paths, Nelson and 𝐃 fields.
//! - [`integrands`]: integrand models exposing their martingale derivatives.
//! - [`integrator`]: forward estimator, `𝒦Y`, drift, Wiener integrals, `I₂` remainder.
//! - [`experiments`]: Monte Carlo harness, diagnostics, persistence and the CLI.

pub mod error;
pub mod experiments;
pub mod gauss;
pub mod integrands;
pub mod integrator;
pub mod kernels;
pub mod paths;
pub mod quad;
pub mod stats;

pub use error::{Error, Result};
pub use gauss::QuadratureRule;
pub use integrands::{IntegrandModel, ModelSpec};
pub use kernels::HurstConfig;
pub use paths::{BrownianPath, PathContext, RlfbmPath, SimulationGrid};
