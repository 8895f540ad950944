//! Reaction-path tracing on Born-Oppenheimer surfaces with a variational
//! quantum eigensolver.
//!
//! The pipeline runs end to end in-process:
//!
//! 1. [`geometry`] holds nuclear configurations and the torsion machinery
//!    (dihedral measurement, axis-angle rotations, constrained torsion set).
//! 2. [`integrals`] produces one- and two-electron integrals, either from a
//!    small s-type Gaussian Hartree-Fock engine or from FCIDUMP files, and
//!    folds inactive orbitals into an active-space Hamiltonian.
//! 3. [`fermion`] builds the second-quantized Hamiltonian over spin orbitals.
//! 4. [`mapping`] turns fermionic operators into qubit operators
//!    ([`pauli`]) with the Jordan-Wigner or parity encoding and tapers two
//!    qubits using particle-number symmetries.
//! 5. [`ansatz`], [`simulator`] and [`vqe`] prepare trial states, evaluate
//!    expectation values and minimize the energy.
//! 6. [`pathfinder`] sweeps a torsional reaction coordinate, warm-starting
//!    each point from its neighbour, and integrates steepest-descent paths.
//!
//! Lengths are in Bohr and energies in Hartree throughout.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ansatz;
pub mod cli;
pub mod config;
pub mod fermion;
pub mod geometry;
pub mod integrals;
pub mod mapping;
pub mod pathfinder;
pub mod pauli;
pub mod pipeline;
pub mod simulator;
pub mod vqe;

/// Bohr per Ångström.
pub const ANGSTROM_TO_BOHR: f64 = 1.8897259886;

/// kJ/mol per Hartree.
pub const HARTREE_TO_KJ_PER_MOL: f64 = 2625.4996394799;

pub use ansatz::{AnsatzCircuit, AnsatzGate};
pub use fermion::{FermionOperator, LadderOp};
pub use geometry::{Atom, MolecularGeometry, RotationOperator};
pub use integrals::{ActiveSpaceHamiltonian, GaussianShell, IntegralSet};
pub use mapping::{Encoding, EncodingSpec, TaperingResult};
pub use pathfinder::{ReactionPath, ScanSpec};
pub use pauli::{PauliString, PauliSum};
pub use simulator::{ShotPlan, Statevector};
pub use vqe::{VqeConfig, VqeResult};
