//! Adaptive Hessian estimation and extremum localization for quadratic
//! signal fields.
//!
//! A sensory agent moves along a prescribed path and measures only the scalar
//! intensity of a field `F(y) = c1 - ½ (y - x)ᵀ H (y - x)`. State-variable
//! filters turn the measurements into a linear regression `z ≈ θ*ᵀφ`, a
//! gradient adaptive law estimates `θ*`, and the extremum estimate follows
//! from `x̂ = Ĥ⁻¹ θ̂ₓ`. A projection step keeps `Ĥ` strictly diagonally
//! dominant so that the solve is always well posed.
//!
//! Module map:
//!
//! - [`field`]: ground-truth field, measurement noise, dominance check
//! - [`path`]: closed-form sinusoidal trajectories for agent and extremum
//! - [`parametrization`]: packing of `θ`, the regressor `Ψ(y)`, `x̂` extraction
//! - [`filters`]: the state-variable filters producing `z` and `φ`
//! - [`estimator`]: gradient law and the projection onto the admissible set
//! - [`pe`]: persistent-excitation diagnostics on `φ`
//! - [`sim`]: coupled RK4 integration, built-in scenarios, error metrics
//! - [`cli`]: config parsing, artifact writers and the command-line driver

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod error;
pub mod estimator;
pub mod field;
pub mod filters;
pub mod parametrization;
pub mod path;
pub mod pe;
pub mod sim;

pub use error::{Error, Result};
pub use estimator::{EstimatorState, ProjectionConfig};
pub use field::{FieldParams, NoiseKind, NoiseSpec};
pub use filters::{FilterOutput, FilterState};
pub use parametrization::{Layout, PsiVector, ThetaVector};
pub use path::SinusoidPath;
pub use pe::PeReport;
pub use sim::{ScenarioConfig, SimulationTrace};
