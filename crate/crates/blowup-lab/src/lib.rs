//! Numerical laboratory for finite-time blow-up in semilinear wave equations
//! with a logarithmically damped power source.
//!
//! The library solves `u_tt = Δu + |u|^{p-1} u + f(u)` with
//! `f(u) = |u|^p / (log(2 + u^2))^a` on a line or radially, follows solutions
//! to finite-time blow-up, maps snapshots into self-similar variables on the
//! unit ball, and evaluates the weighted energy functionals whose decrease
//! controls the blow-up rate. Everything is deterministic: a given config
//! produces byte-identical output files.
//!
//! Layout:
//! - [`model`]: equation parameters, the damped source term and its antiderivative
//! - [`quad`]: Gauss–Jacobi rules for the degenerate ball weight `(1-|y|^2)^β`
//! - [`ode`]: the space-independent blow-up ODE and power-law rate fitting
//! - [`wave`]: explicit leapfrog solver, blow-up surface `T(x)` estimation
//! - [`similarity`]: the self-similar transform, equation residuals, rescaling
//! - [`energy`]: the functionals `E0, I, J, E, H`, dissipation and norms
//! - [`diagnostics`]: monotonicity checks, blow-up flag, bound envelopes
//! - [`config`], [`io`], [`runner`]: CLI-facing configuration, file formats,
//!   and orchestration

pub mod config;
pub mod diagnostics;
pub mod energy;
pub mod error;
pub mod interp;
pub mod io;
pub mod model;
pub mod ode;
pub mod quad;
pub mod runner;
pub mod similarity;
pub mod wave;

pub use error::{Error, Result};
