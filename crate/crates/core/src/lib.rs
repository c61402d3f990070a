//! Diffusive-Gutzwiller trajectories for the quadratically driven-dissipative
//! Bose-Hubbard lattice.
//!
//! Each trajectory keeps one pure state per site and integrates the
//! homodyne-unraveled stochastic Schrödinger equation with mean-field
//! hopping. Averaging trajectories gives classically correlated
//! observables: densities, coherent components, center-site correlation
//! maps, correlation lengths and relaxation rates. Small systems can be
//! checked against the exact master equation in [`oracle`].

pub mod analysis;
pub mod ensemble;
pub mod error;
pub mod fock;
pub mod lattice;
pub mod model;
pub mod oracle;
pub mod sse;

pub use error::{DgError, Result};
pub use num_complex::Complex64;
