//! Truncated-Fock-space simulation of dissipatively stabilized cat states in an rf-SQUID ring.
//!
//! Modules, bottom up:
//! - [`hilbert`]: operators and states in a truncated Fock basis
//! - [`models`]: ring and coupler Hamiltonians, effective two-photon and dephasing rates
//! - [`lindblad`]: master-equation generator, integrators, steady states
//! - [`observables`]: energy, entropy, purity, parity, distances
//! - [`phase_space`]: Wigner functions, negativity, cattiness
//! - [`config`] and [`scenario`]: scenario files and the pipeline behind the CLI

pub mod config;
pub mod error;
pub mod hilbert;
pub mod lindblad;
pub mod linalg;
pub mod models;
pub mod observables;
pub mod phase_space;
pub mod presets;
pub mod scenario;

pub use error::{Error, Result};
