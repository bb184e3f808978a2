//! Exact-arithmetic laboratory for C-type operators on `ℓ_p(ℕ)`.
//!
//! The crate is organised bottom-up:
//!
//! * [`scalar`] — exact rationals with a split power-of-two exponent;
//! * [`vector`] — finitely supported vectors and exact norm tests;
//! * [`closed`] — closed-form parameter sequences and their asymptotics;
//! * [`ctype`] — C-type parameter families, block geometry and exact application;
//! * [`presets`] — the named operators used throughout the tests and the CLI;
//! * [`orbit`] — exact orbit sweeps and visit densities;
//! * [`criteria`] — decision procedures for the dynamical properties;
//! * [`forge`] — staged construction of (frequently) hypercyclic vectors;
//! * [`spectral`] — unimodular eigenvector series, eigenvalue rigidity and spectral radii.
pub mod closed;
pub mod criteria;
pub mod ctype;
pub mod forge;
pub mod orbit;
pub mod presets;
pub mod scalar;
pub mod spectral;
pub mod vector;

pub use scalar::{BigExp, ExactScalar, ScalarError, UpperSum};
pub use vector::{FiniteVector, NormError, NormPower, SpaceExponent};
