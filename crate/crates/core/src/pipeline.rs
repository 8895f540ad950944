//! Geometry or FCIDUMP integrals to a qubit Hamiltonian and ansatz.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::ansatz::{build_hardware_efficient, build_uccsd, AnsatzCircuit, AnsatzError};
use crate::fermion::build_hamiltonian;
use crate::geometry::{GeometryError, MolecularGeometry};
use crate::integrals::{
    complete_active_space, compute_integrals_s, parse_fcidump, sto3g_shells, ActiveSpaceHamiltonian, FcidumpError,
    IntegralError, IntegralSet,
};
use crate::mapping::{
    basis_state_index, map_operator, reference_occupations, taper_two_qubits, Encoding, EncodingSpec, MappingError,
};
use crate::pauli::PauliSum;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Fcidump { path: PathBuf, source: FcidumpError },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Integrals(#[from] IntegralError),
    #[error(transparent)]
    Mapping(#[from] MappingError),
    #[error(transparent)]
    Ansatz(#[from] AnsatzError),
    #[error("invalid pipeline setting: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnsatzKind {
    Uccsd,
    HardwareEfficient { layers: usize },
}

impl fmt::Display for AnsatzKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnsatzKind::Uccsd => f.write_str("uccsd"),
            AnsatzKind::HardwareEfficient { layers } => write!(f, "hardware_efficient:{layers}"),
        }
    }
}

impl FromStr for AnsatzKind {
    type Err = PipelineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            None if s == "uccsd" => Ok(AnsatzKind::Uccsd),
            None if s == "hardware_efficient" => Ok(AnsatzKind::HardwareEfficient { layers: 2 }),
            Some(("hardware_efficient", n)) => n
                .parse()
                .map(|layers| AnsatzKind::HardwareEfficient { layers })
                .map_err(|_| PipelineError::Invalid(format!("bad layer count `{n}`"))),
            _ => Err(PipelineError::Invalid(format!("unknown ansatz `{s}`"))),
        }
    }
}

/// Active space, encoding and ansatz choices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PipelineConfig {
    /// `(electrons, spatial orbitals)`; `None` keeps every orbital active.
    pub active_space: Option<(usize, usize)>,
    pub encoding: Encoding,
    pub taper: bool,
    pub ansatz: AnsatzKind,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            active_space: None,
            encoding: Encoding::Parity,
            taper: true,
            ansatz: AnsatzKind::Uccsd,
        }
    }
}

/// Everything the optimizer needs for one geometry.
#[derive(Debug, Clone)]
pub struct QubitProblem {
    pub hamiltonian: PauliSum,
    pub circuit: AnsatzCircuit,
    pub active: ActiveSpaceHamiltonian,
    /// Closed-shell determinant energy of the full orbital space.
    pub reference_energy: f64,
    pub nuclear_repulsion: f64,
    pub n_fermion_terms: usize,
    pub tapered_sector: Option<(i8, i8)>,
}

impl QubitProblem {
    pub fn n_qubits(&self) -> usize {
        self.hamiltonian.n_qubits()
    }
}

pub fn problem_from_integrals(ints: &IntegralSet, cfg: &PipelineConfig) -> Result<QubitProblem, PipelineError> {
    let active = match cfg.active_space {
        Some((ne, no)) => complete_active_space(ints, ne, no)?,
        None => ActiveSpaceHamiltonian::full_space(ints),
    };
    let n_modes = active.n_spin_orbitals();
    if cfg.taper && cfg.encoding != Encoding::Parity {
        return Err(PipelineError::Invalid("tapering requires the parity encoding".into()));
    }
    let fermion = build_hamiltonian(&active);
    let spec = EncodingSpec::new(cfg.encoding, n_modes)?;
    let mapped = map_operator(&fermion, &spec)?;
    let ne = active.n_active_electrons;
    let reference = reference_occupations(n_modes, ne / 2, ne / 2);
    let (hamiltonian, tapered_sector) = if cfg.taper {
        let t = taper_two_qubits(&mapped, n_modes, ne, &reference)?;
        (t.reduced, Some(t.sector))
    } else {
        (mapped, None)
    };
    let circuit = match cfg.ansatz {
        AnsatzKind::Uccsd => build_uccsd(ne, n_modes, &spec, cfg.taper)?,
        AnsatzKind::HardwareEfficient { layers } => {
            let uccsd_ref = build_uccsd(ne, n_modes, &spec, cfg.taper)?.reference_index;
            debug_assert!(cfg.taper || uccsd_ref == basis_state_index(&reference, cfg.encoding));
            build_hardware_efficient(hamiltonian.n_qubits(), layers, uccsd_ref)?
        }
    };
    Ok(QubitProblem {
        hamiltonian,
        circuit,
        reference_energy: ints.reference_energy(),
        nuclear_repulsion: ints.e_nn(),
        n_fermion_terms: fermion.len(),
        tapered_sector,
        active,
    })
}

/// RHF in the built-in STO-3G s basis, then [`problem_from_integrals`].
pub fn problem_from_geometry(geom: &MolecularGeometry, cfg: &PipelineConfig) -> Result<QubitProblem, PipelineError> {
    let ints = integrals_from_geometry(geom)?;
    problem_from_integrals(&ints, cfg)
}

pub fn integrals_from_geometry(geom: &MolecularGeometry) -> Result<IntegralSet, PipelineError> {
    let shells = sto3g_shells(geom)?;
    Ok(compute_integrals_s(geom, &shells)?)
}

pub fn read_fcidump(path: &Path) -> Result<IntegralSet, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_fcidump(&text).map_err(|source| PipelineError::Fcidump {
        path: path.to_path_buf(),
        source,
    })
}
