//! Spectral laboratory for the continuum Calogero-Moser derivative NLS
//!
//! `i q_t = -q'' +/- 2i q C+(|q|^2)'` on the Hardy space, discretized on a
//! periodic box with a nonnegative frequency ladder.
//!
//! - [`grid`]: grid, Hardy fields, Szego projection, Poisson and Schrodinger multipliers
//! - [`observables`]: soliton, mass, momentum, Hamiltonian, Toeplitz product
//! - [`lax`]: Lax matrix, resolvent traces, `beta(kappa, q)`, bound states
//! - [`evolve`]: integrating-factor RK4 time stepping with drift monitoring
//! - [`explicit`]: the explicit resolvent formula evaluated by Krylov solves

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod evolve;
pub mod explicit;
pub mod grid;
pub mod krylov;
pub mod lax;
pub mod observables;
pub mod random;
pub mod special;

pub use grid::{
    halfplane_eval, make_grid, poisson_semigroup, schrodinger_flow, sobolev_norm, szego_project, Grid, HardyField,
};
pub use observables::{hamiltonian, mass, momentum, soliton, tail_mass, toeplitz_apply, ObservableSet, Sign};

/// Version string embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
