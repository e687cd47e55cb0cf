//! Time-discrete solver for dilute polymer flow: variable-density
//! incompressible Navier–Stokes coupled to a Fokker–Planck equation for
//! bead-spring chains with a microscopic cut-off.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod density;
pub mod diagnostics;
pub mod error;
pub mod grids;
pub mod kinetic;
pub mod laws;
pub mod momentum;
pub mod linalg;
pub mod quadrature;
pub mod stepper;

pub use error::{Error, Result};
