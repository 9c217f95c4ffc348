//! Linear stochastic approximation with Polyak-Ruppert averaging.
//!
//! This crate simulates the constant step-size recursion
//!
//! ```text
//! θ_k = θ_{k-1} − α (A(Z_k) θ_{k-1} − b(Z_k)),     θ̄_n = (2/n) Σ_{k=n/2}^{n-1} θ_k
//! ```
//!
//! over a finite observation space with i.i.d., Markovian, or sub-Gaussian
//! i.i.d. noise, and evaluates the instance-dependent constants, step-size
//! rules, and finite-time moment/high-probability bounds that govern it.
//!
//! Module map:
//! - [`spectral`]: Lyapunov equation ĀᵀQ + QĀ = I and every stability
//!   threshold (a, κ_Q, α_∞, α_∞^(M), block size h, ...).
//! - [`problem`]: instance definition, validation, and synthetic generators.
//! - [`chains`]: exact finite-chain analytics (stationary law, Dobrushin
//!   coefficients, mixing time, asymptotic noise covariance) and path sampling.
//! - [`recursion`]: the LSA/averaged recursions, the exact error
//!   decomposition θ_n − θ* = θ̃^(tr) + J⁽⁰⁾ + J⁽¹⁾ + H⁽¹⁾, random matrix
//!   products, and exact mean dynamics.
//! - [`estimators`]: deterministic parallel Monte Carlo ensembles with
//!   bootstrap confidence intervals.
//! - [`bounds`]: closed-form evaluation of all finite-time bounds.

pub mod bounds;
pub mod chains;
pub mod error;
pub mod estimators;
pub mod problem;
pub mod recursion;
pub mod rng;
pub mod spectral;

pub use error::{Error, Result};
