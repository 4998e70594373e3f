//! Numerically exact simulation of small spin systems strongly coupled to
//! bosonic baths.
//!
//! The pipeline: discretized influence functionals parameterized by
//! eta-coefficients ([`bath`]) are compressed into a matrix-product-operator
//! process tensor ([`process_tensor`]) and contracted against a
//! Trotterized system evolution on an augmented MPS ([`evolution`]).
//! [`models`] holds the concrete Hamiltonians, [`measures`] the correlation
//! and localization observables, and [`reference`] independent solvers
//! (exact diagonalization, Bloch-Redfield, brute-force path summation) used
//! to cross-check the tensor-network path.

pub mod bath;
pub mod error;
pub mod evolution;
pub mod liouville;
pub mod measures;
pub mod models;
pub mod process_tensor;
pub mod quad;
pub mod reference;
pub mod tensor;

pub mod cli;

pub use error::{Error, Result};
