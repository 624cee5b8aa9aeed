//! Finite-volume simulation and diagnostics for the regularized
//! chemotaxis–Navier–Stokes system with porous-medium-type diffusion.
//!
//! Module map:
//!
//! * [`model`] parameters, kinetics presets, regularization functions and
//!   the structural assumption validator.
//! * [`grid`] staggered (MAC) mesh, fields, discrete operators and
//!   elliptic solvers.
//! * [`fluid`] Navier–Stokes step with Yosida-smoothed convection.
//! * [`transport`] positivity-preserving updates of cell density and oxygen.
//! * [`diagnostics`] energy, dissipation, space-time accumulators and weak
//!   residuals.
//! * [`reference`] closed-form oracles (Neumann heat series, Barenblatt).
//! * [`harness`] configuration, run orchestration, validation studies.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod diagnostics;
pub mod error;
pub mod fluid;
pub mod grid;
pub mod harness;
pub mod model;
pub mod reference;
pub mod transport;

pub use error::{Error, Result};
