//! Desk-scale laboratory for adiabatic quantum optimization on random
//! Exact Cover 3 (1-in-3 SAT) instances.
//!
//! The crate is organized bottom-up:
//!
//! * [`ec3`] builds, cleans, serializes and characterizes random instances.
//! * [`dpll`] enumerates every satisfying assignment.
//! * [`perturbation`] expands eigenvalues of `H(λ) = H_P + λ H_0` around
//!   `λ = 0` and predicts level crossings between solutions.
//! * [`spectrum`] provides exact ground truth on the `2^N` hypercube.
//! * [`tunneling`] reduces solution pairs to Agree instances and computes the
//!   leading tunneling coefficient.
//! * [`harness`] runs the avoided-crossing experiment at scale.
//!
//! Work that is data-parallel (trials, grid points, state-vector sweeps) runs
//! on rayon when the `parallel` feature is enabled (the default) and falls back
//! to plain iterators otherwise.

pub mod dpll;
pub mod ec3;
pub mod error;
pub mod harness;
pub mod par;
pub mod perturbation;
pub mod scalar;
pub mod spectrum;
pub mod tunneling;

pub use error::{Error, Result};
pub use scalar::{NumericMode, Scalar};
