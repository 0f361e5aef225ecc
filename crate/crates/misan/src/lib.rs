//! Conservative lattice gases of misanthrope type: rate tables, order-preserving
//! couplings, irreducibility checks, event-driven simulation and hydrodynamics.
//!
//! The systems handled here live on a finite window of `Z^d` (d = 1 or 2), with
//! site values in a subset `X` of the integers. A transition moves `k >= 1`
//! units from a site `x` to a site `y = x + z` at a rate that depends only on
//! the pair of values `(eta(x), eta(y))`, the batch size `k` and the
//! displacement `z`; the sum `eta(x) + eta(y)` is conserved. Five model
//! families are built in: single-particle exclusion, zero-range and
//! misanthrope dynamics, the stick model (any `k <= eta(x)` at equal rate) and
//! a two-species exclusion model with values in `{-1, 0, 1}`.
//!
//! Modules:
//! - [`rates`]: value sets, displacement kernels and the rate tables.
//! - [`coupling`]: the pairwise coupling built three equivalent ways, the
//!   attractiveness criterion, and discrepancy bookkeeping.
//! - [`irreducibility`]: graph searches certifying that opposite discrepancies
//!   can always be destroyed.
//! - [`simulate`]: exact event-driven runs of single and coupled processes.
//! - [`hydro`]: macroscopic fluxes, envelope Riemann solutions, and
//!   comparisons against finite-volume and Monte Carlo data.

pub mod coupling;
pub mod error;
pub mod hydro;
pub mod irreducibility;
pub mod rates;
pub mod simulate;

pub use error::{Error, Result};
