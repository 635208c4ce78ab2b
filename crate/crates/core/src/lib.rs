//! Cartan (KHK) fast-forwarded time evolution of the two-site Anderson
//! impurity model, Hadamard-test Green's functions on a simulated noisy
//! device, spectral peak extraction, and the two-site DMFT loop.
//!
//! Qubit convention used throughout: in Pauli labels and dense matrices
//! qubit 0 is the leftmost factor (most significant bit of a basis index).
//! Spin orbitals map to qubits as all spin-up modes first, then all
//! spin-down modes; for the two-site model the impurity is qubits 0 (up)
//! and 2 (down), the bath is qubits 1 and 3.

pub mod cartan;
pub mod circuit;
pub mod dmft;
mod error;
pub mod lie;
pub mod pauli;
pub mod sim;
pub mod spectral;
pub mod trotter;

pub use error::{Error, Result};
