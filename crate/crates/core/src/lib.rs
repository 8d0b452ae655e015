//! Numerical laboratory for the three-species Lotka–Volterra competition model
//! with seasonal succession and equal growth/death rates.
//!
//! The good season is governed by the autonomous competition flow
//! `dx_i/dt = x_i (b - (A x)_i)`, the bad season by pure decay `dx_i/dt = -mu x_i`.
//! The Poincaré map `P(x) = Phi_{phi omega}(l x)` is conjugate to the time-`rho_hat`
//! map of the autonomous flow, scaled by the seasonal logistic fixed point `rho_star`.
//! Most of this crate either evaluates `P` directly by integration or checks a
//! consequence of that conjugacy through an independent numerical route.
//!
//! Module map:
//!
//! - [`model`]: parameters, derived constants, admissibility diagnostics.
//! - [`ode`]: Dormand–Prince 5(4) integrator with PI step control.
//! - [`flow`]: vector field, Jacobian, autonomous and seasonal flows, logistic solution.
//! - [`poincare`]: the map `P`, its Jacobian, orbit iteration, conjugacy residual.
//! - [`fixedpoints`]: census of origin/axial/planar/positive fixed points and their spectra.
//! - [`classify`]: algebraic invariants and the global dynamics verdict.
//! - [`orbits`]: periodic orbits of the flow, resonance ratio, multiplicity construction.
//! - [`simplex`]: carrying simplex meshes, heteroclinic cycle check, phase portraits.
//! - [`verify`]: the identity suite used by the `verify` command.
//! - [`csv`]: lossless number formatting for CSV exports.

pub mod classify;
pub mod csv;
pub mod error;
pub mod fate;
pub mod fixedpoints;
pub mod flow;
pub mod linalg;
pub mod model;
pub mod ode;
pub mod orbits;
pub mod poincare;
pub mod quad;
pub mod simplex;
pub mod verify;

pub use error::{Error, Result};
pub use linalg::{Mat3, Vec3};
pub use model::{derive_constants, validate, DerivedConstants, Diagnostics, ModelParams, ModelSpec};
