//! Surface-code memory experiments under heralded erasure and Pauli noise,
//! an erasure-aware matching decoder, threshold analysis, and the transmon
//! device physics behind erasure qubits.

pub mod analysis;
pub mod cli;
pub mod code_layout;
pub mod device_physics;
pub mod error;
pub mod gate_evolve;
pub mod matcher;
pub mod noise;
pub mod pauli_sim;
pub mod rng;

pub use error::{Error, Result};
