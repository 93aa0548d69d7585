//! Classical simulation and entanglement analysis of driven hard-core
//! Bose-Hubbard lattices.
//!
//! The crate covers lattice geometry and subsystem enumeration, matrix-free
//! Hamiltonians with particle-number sector diagonalization, unitary evolution
//! under a common drive, reduced density matrices and Rényi entropies,
//! correlators, simulated Pauli tomography with maximum-likelihood
//! reconstruction, and area/volume-law scaling fits.

pub mod device;
pub mod error;
pub mod evolution;
pub mod hamiltonian;
pub mod lattice;
pub mod observables;
pub mod parallel;
pub mod pauli;
pub mod quantum_info;
pub mod scaling;
pub mod state;
pub mod tomography;
mod symmetry;

pub use error::{Error, Result};
pub use hamiltonian::DriveSpec;
pub use lattice::{LatticeSpec, Subsystem, TomographyColoring};
pub use state::StateVector;
