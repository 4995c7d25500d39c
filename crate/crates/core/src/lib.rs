//! Dual first-order Calogero systems in external potentials.
//!
//! Modules:
//! * [`model`]: kernels, prepotentials and one-body potentials,
//! * [`functional`]: numerical checks of the functional identities,
//! * [`dynamics`]: dual and Newtonian right-hand sides, energy,
//! * [`init`]: soliton initial data via electrostatic relaxation,
//! * [`integrator`]: adaptive Dormand-Prince time stepping,
//! * [`hydro`]: densities, Hilbert transforms and fluid fields,
//! * [`config`] and [`pipeline`]: scenario files and the CLI workflows.

// `!(a > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod model;
pub mod functional;
pub mod dynamics;
pub mod init;
pub mod integrator;
pub mod hydro;
pub mod config;
pub mod pipeline;

pub use error::{Error, Result};
pub use model::{KernelKind, ModelSpec, Species, C64};
