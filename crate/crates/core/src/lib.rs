//! Numerical core for a large-N bosonic lattice with exact many-body scars.
//!
//! The crate is `no_std` (it needs `alloc`) and performs no IO. Everything that
//! loops over the Brillouin zone takes an [`Executor`] so callers can plug in a
//! thread pool; results never depend on how the work is scheduled.
//!
//! Modules follow the physics pipeline:
//!
//! * [`lattice`] – momentum grid, dispersion and broadened delta functions.
//! * [`meanfield`] – equilibrium large-N saddle point and thermodynamics.
//! * [`scar_kinetics`] – self-energy on the scar orbit, rung kernel and the
//!   Bethe-Salpeter growth rate.
//! * [`floquet`] – monodromy of periodically driven Bogoliubov problems.
//! * [`perturbed_scar`] – two-time Dyson solve under a pairing perturbation.
#![no_std]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod exec;
pub mod floquet;
pub mod lattice;
pub mod linalg;
pub mod meanfield;
pub mod perturbed_scar;
pub mod scar_kinetics;
pub mod sum;

pub use error::{Error, Result};
pub use exec::{Executor, Sequential};
pub use lattice::{delta_broadened, wrap_index, Dispersion, LatticeModel, MomentumGrid};
