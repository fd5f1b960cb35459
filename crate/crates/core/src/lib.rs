//! Numerical kernels for centralizers of expansive flows and `R^d`-actions.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only pure computation:
//!
//! * [`linalg`]: dense eigenvalues, matrix exponential, SVD nullspaces and commutants.
//! * [`spectra`]: singularity location and spectral classification (hyperbolicity,
//!   non-resonance, Kopell order).
//! * [`field`] and [`flow`]: a catalog of vector fields, an adaptive Dormand–Prince
//!   integrator with trajectories, the minimal-period probe and 1-D suspension flows.
//! * [`reparam`]: recovery of the time change relating two commuting flows.
//! * [`actions`]: `R^d`-actions given by commuting generators.
//! * [`suspension`]: suspensions of `Z^d`-actions with roof one and their metrics.
//! * [`probe`]: finite-resolution falsifiers for the expansiveness notions.
//!
//! File formats and the command-line front end live in the companion `centralizer`
//! crate.
#![no_std]
#![warn(missing_debug_implementations)]
#![allow(clippy::needless_range_loop, clippy::too_many_arguments, clippy::neg_cmp_op_on_partial_ord)]
#![cfg_attr(test, allow(unused_imports))]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod actions;
pub mod error;
pub mod field;
pub mod flow;
pub mod linalg;
pub mod minimize;
pub mod probe;
pub mod reparam;
pub mod sampling;
pub mod spectra;
pub mod suspension;

pub use error::{Error, Result};

pub use field::{Domain, ScalarField, VectorFieldSpec};
pub use linalg::{Matrix, Spectrum};
