//! Structure-preserving finite-difference simulation of the Schrödinger map
//! flow `du/dt = u x Lap u` and its Gilbert-damped perturbation
//! `du/dt = eps tau(u) + u x Lap u` for maps from boxes `[0,1]^m`
//! (m = 1, 2, 3) into the unit sphere, under homogeneous Neumann boundary
//! conditions.
//!
//! The crate provides
//!
//! - mirror-ghost Neumann differential operators and quadrature ([`grid`]),
//! - the sphere geometry kernels: tension field, flow right-hand sides, and
//!   the pull-back covariant derivative ([`geometry`]),
//! - a projected RK4 and a norm-conserving implicit midpoint integrator
//!   ([`integrators`]),
//! - monitored conservation functionals: Dirichlet energy, the 1-d
//!   Q-invariant, the H^2 identity, Sobolev seminorms, boundary flux
//!   ([`invariants`]),
//! - executable boundary-compatibility checkers and admissible initial-data
//!   generators ([`compat`]),
//! - the study drivers: vanishing-viscosity sweep, mesh convergence,
//!   long-time boundedness, perturbation stability ([`experiments`]),
//! - config parsing and deterministic serialization ([`io`]).

pub mod compat;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod grid;
pub mod integrators;
pub mod invariants;
pub mod io;
pub mod vec3;

pub use error::{Error, Result};
pub use vec3::Vec3;
