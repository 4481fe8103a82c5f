//! Numerical toolkit for self-gravitating isentropic gas clouds with a vacuum
//! boundary.
//!
//! Units follow `ΔΦ = ρ`: there is no `4πG` in the Poisson equation, so every
//! Newtonian kernel carries an explicit `1/(4π)`. A point mass `M` therefore
//! pulls with `|∇Φ| = M/(4π r²)`.
//!
//! Modules, bottom up:
//!
//! - [`potential`]: density models, Φ / ∇Φ / ∇²Φ quadrature, regularity
//!   classes and the gravity/tidal bound checks.
//! - [`conservation`]: mass, energy, moment of inertia, virial, and the two
//!   integral identities of the potential.
//! - [`admissible`]: the small-parameter algebra and admissible boundary data.
//! - [`virial`]: the virial functional `F(t)` and blowup certificates.
//! - [`boundary_dynamics`]: free fall of boundary parcels and the bootstrap
//!   bound monitors.
//! - [`raychaudhuri`]: expansion / shear / rotation of the boundary flow.
//! - [`fluid_sim`]: a small SPH solver with direct-sum gravity.
//! - [`runner`]: JSON scenarios and CSV/JSON artifacts behind the CLI.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod admissible;
pub mod boundary_dynamics;
pub mod conservation;
mod error;
pub mod fluid_sim;
pub mod gravity;
pub mod io;
pub mod ode;
pub mod potential;
pub mod quadrature;
pub mod raychaudhuri;
pub mod runner;
pub mod virial;

pub use error::{Error, Result};

/// Column vector in R³.
pub type Vec3 = nalgebra::Vector3<f64>;
/// 3×3 matrix.
pub type Mat3 = nalgebra::Matrix3<f64>;

pub(crate) const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;
