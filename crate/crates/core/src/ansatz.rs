//! Parameterized trial circuits: UCCSD and a hardware-efficient layout.

use num_complex::Complex64;
use serde_json::json;
use thiserror::Error;

use crate::fermion::{FermionOperator, LadderOp};
use crate::mapping::{
    basis_state_index, map_operator, reference_occupations, taper_two_qubits, tapered_qubits, Encoding, EncodingSpec,
    MappingError,
};
use crate::pauli::{Pauli, PauliString};
use crate::simulator::{SimError, Statevector};

#[derive(Debug, Error, PartialEq)]
pub enum AnsatzError {
    #[error("electron count {0} must be even")]
    OddElectrons(usize),
    #[error("spin-orbital count {0} must be even")]
    OddSpinOrbitals(usize),
    #[error("{electrons} electrons do not fit in {orbitals} spin orbitals")]
    TooManyElectrons { electrons: usize, orbitals: usize },
    #[error("encoding covers {encoding} modes but the ansatz needs {needed}")]
    EncodingSize { encoding: usize, needed: usize },
    #[error("tapering requires the parity encoding")]
    TaperNeedsParity,
    #[error("expected {expected} parameters, got {found}")]
    ParameterCount { expected: usize, found: usize },
    #[error("parameter {0} is not finite")]
    NonFinite(usize),
    #[error("mapped generator `{0}` is not anti-Hermitian")]
    NotAntiHermitian(String),
    #[error("hardware-efficient ansatz needs at least one qubit")]
    NoQubits,
    #[error(transparent)]
    Mapping(#[from] MappingError),
    #[error(transparent)]
    Simulation(#[from] SimError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum AnsatzGate {
    /// `exp(i·multiplier·θ[parameter]·P/2)`.
    Rotation {
        pauli: PauliString,
        parameter: usize,
        multiplier: f64,
    },
    /// Fixed controlled-Z entangler.
    Cz { a: usize, b: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnsatzCircuit {
    pub n_qubits: usize,
    pub reference_index: usize,
    pub n_parameters: usize,
    pub gates: Vec<AnsatzGate>,
    /// One label per parameter.
    pub labels: Vec<String>,
}

impl AnsatzCircuit {
    /// Applies the gates to the reference state.
    pub fn prepare(&self, theta: &[f64]) -> Result<Statevector, AnsatzError> {
        self.prepare_inner(theta, None)
    }

    /// Like [`prepare`](Self::prepare) with `delta` added to the rotation
    /// angle of gate `gate` only.
    pub fn prepare_shifted(&self, theta: &[f64], gate: usize, delta: f64) -> Result<Statevector, AnsatzError> {
        self.prepare_inner(theta, Some((gate, delta)))
    }

    fn prepare_inner(&self, theta: &[f64], shift: Option<(usize, f64)>) -> Result<Statevector, AnsatzError> {
        if theta.len() != self.n_parameters {
            return Err(AnsatzError::ParameterCount {
                expected: self.n_parameters,
                found: theta.len(),
            });
        }
        if let Some(k) = theta.iter().position(|t| !t.is_finite()) {
            return Err(AnsatzError::NonFinite(k));
        }
        let mut state = Statevector::basis_state(self.n_qubits, self.reference_index)?;
        for (g, gate) in self.gates.iter().enumerate() {
            match gate {
                AnsatzGate::Rotation {
                    pauli,
                    parameter,
                    multiplier,
                } => {
                    let mut angle = multiplier * theta[*parameter];
                    if let Some((target, delta)) = shift {
                        if target == g {
                            angle += delta;
                        }
                    }
                    state.apply_pauli_exponential(pauli, angle)?
                }
                AnsatzGate::Cz { a, b } => state.apply_cz(*a, *b)?,
            }
        }
        Ok(state)
    }

    /// Depth after compiling each rotation to basis changes, a CNOT ladder
    /// and one `Rz`, with gates packed as early as their qubits allow.
    pub fn circuit_depth(&self) -> usize {
        let mut level = vec![0usize; self.n_qubits];
        let place = |qubits: &[usize], level: &mut [usize]| {
            let l = qubits.iter().map(|&q| level[q]).max().unwrap_or(0) + 1;
            for &q in qubits {
                level[q] = l;
            }
        };
        for gate in &self.gates {
            match gate {
                AnsatzGate::Cz { a, b } => place(&[*a, *b], &mut level),
                AnsatzGate::Rotation { pauli, .. } => {
                    let support = pauli.support();
                    if support.is_empty() {
                        continue;
                    }
                    let rotated: Vec<usize> = support
                        .iter()
                        .copied()
                        .filter(|&q| matches!(pauli.get(q), Pauli::X | Pauli::Y))
                        .collect();
                    for &q in &rotated {
                        place(&[q], &mut level);
                    }
                    for w in support.windows(2) {
                        place(w, &mut level);
                    }
                    place(&[*support.last().unwrap()], &mut level);
                    for w in support.windows(2).rev() {
                        place(w, &mut level);
                    }
                    for &q in &rotated {
                        place(&[q], &mut level);
                    }
                }
            }
        }
        level.into_iter().max().unwrap_or(0)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let gates: Vec<serde_json::Value> = self
            .gates
            .iter()
            .map(|g| match g {
                AnsatzGate::Rotation {
                    pauli,
                    parameter,
                    multiplier,
                } => json!({
                    "type": "pauli_rotation",
                    "pauli": pauli.to_string(),
                    "parameter": parameter,
                    "multiplier": multiplier,
                }),
                AnsatzGate::Cz { a, b } => json!({ "type": "cz", "qubits": [a, b] }),
            })
            .collect();
        json!({
            "n_qubits": self.n_qubits,
            "n_parameters": self.n_parameters,
            "reference_index": self.reference_index,
            "parameters": self.labels,
            "depth": self.circuit_depth(),
            "gates": gates,
        })
    }
}

/// Spin-preserving single and double excitations above the closed-shell
/// reference, singles first, each group in ascending index-tuple order.
pub fn uccsd_excitations(n_electrons: usize, n_spin_orbitals: usize) -> Vec<Vec<(usize, usize)>> {
    let half = n_spin_orbitals / 2;
    let occ = reference_occupations(n_spin_orbitals, n_electrons / 2, n_electrons / 2);
    let occupied: Vec<usize> = (0..n_spin_orbitals).filter(|&p| occ[p]).collect();
    let virtuals: Vec<usize> = (0..n_spin_orbitals).filter(|&p| !occ[p]).collect();
    let spin = |p: usize| p / half;
    let mut out = Vec::new();
    for &i in &occupied {
        for &a in virtuals.iter().filter(|&&a| spin(a) == spin(i)) {
            out.push(vec![(i, a)]);
        }
    }
    for (x, &i) in occupied.iter().enumerate() {
        for &j in &occupied[x + 1..] {
            for (y, &a) in virtuals.iter().enumerate() {
                for &b in &virtuals[y + 1..] {
                    if spin(i) + spin(j) == spin(a) + spin(b) {
                        out.push(vec![(i, a), (j, b)]);
                    }
                }
            }
        }
    }
    out
}

fn excitation_generator(n_modes: usize, excitation: &[(usize, usize)]) -> FermionOperator {
    let mut ops: Vec<LadderOp> = excitation.iter().map(|&(_, a)| LadderOp::create(a)).collect();
    ops.extend(excitation.iter().rev().map(|&(i, _)| LadderOp::annihilate(i)));
    let t = FermionOperator::term(n_modes, ops, Complex64::new(1.0, 0.0)).expect("indices in range");
    t.add(&t.hermitian_conjugate().scale(Complex64::new(-1.0, 0.0)))
        .expect("same mode count")
        .normal_order()
}

fn remove_bits(index: usize, n: usize, removed: (usize, usize)) -> usize {
    (0..n)
        .filter(|&q| q != removed.0 && q != removed.1)
        .enumerate()
        .fold(0, |out, (k, q)| out | (index >> q & 1) << k)
}

/// UCCSD with one parameter per excitation and a single first-order Trotter
/// pass over the mapped `T − T†` terms.
pub fn build_uccsd(
    n_electrons: usize,
    n_spin_orbitals: usize,
    encoding: &EncodingSpec,
    taper: bool,
) -> Result<AnsatzCircuit, AnsatzError> {
    if !n_spin_orbitals.is_multiple_of(2) {
        return Err(AnsatzError::OddSpinOrbitals(n_spin_orbitals));
    }
    if !n_electrons.is_multiple_of(2) {
        return Err(AnsatzError::OddElectrons(n_electrons));
    }
    if n_electrons > n_spin_orbitals {
        return Err(AnsatzError::TooManyElectrons {
            electrons: n_electrons,
            orbitals: n_spin_orbitals,
        });
    }
    if encoding.n_modes != n_spin_orbitals {
        return Err(AnsatzError::EncodingSize {
            encoding: encoding.n_modes,
            needed: n_spin_orbitals,
        });
    }
    if taper && encoding.kind != Encoding::Parity {
        return Err(AnsatzError::TaperNeedsParity);
    }
    let reference = reference_occupations(n_spin_orbitals, n_electrons / 2, n_electrons / 2);
    let full_index = basis_state_index(&reference, encoding.kind);
    let (n_qubits, reference_index) = if taper {
        (
            n_spin_orbitals - 2,
            remove_bits(full_index, n_spin_orbitals, tapered_qubits(n_spin_orbitals)),
        )
    } else {
        (n_spin_orbitals, full_index)
    };
    let mut gates = Vec::new();
    let mut labels = Vec::new();
    for (k, exc) in uccsd_excitations(n_electrons, n_spin_orbitals).iter().enumerate() {
        let generator = excitation_generator(n_spin_orbitals, exc);
        let mut mapped = map_operator(&generator, encoding)?;
        if taper {
            mapped = taper_two_qubits(&mapped, n_spin_orbitals, n_electrons, &reference)?.reduced;
        }
        for (p, c) in mapped.terms() {
            if c.re.abs() > 1e-12 {
                return Err(AnsatzError::NotAntiHermitian(p.to_string()));
            }
            gates.push(AnsatzGate::Rotation {
                pauli: p.clone(),
                parameter: k,
                multiplier: 2.0 * c.im,
            });
        }
        let from: Vec<String> = exc.iter().map(|(i, _)| i.to_string()).collect();
        let to: Vec<String> = exc.iter().map(|(_, a)| a.to_string()).collect();
        labels.push(format!("{}->{}", from.join(","), to.join(",")));
    }
    Ok(AnsatzCircuit {
        n_qubits,
        reference_index,
        n_parameters: labels.len(),
        gates,
        labels,
    })
}

/// `layers` rounds of Y rotations on every qubit followed by a nearest-
/// neighbour CZ ladder, closed by a final rotation round.
pub fn build_hardware_efficient(
    n_qubits: usize,
    layers: usize,
    reference_index: usize,
) -> Result<AnsatzCircuit, AnsatzError> {
    if n_qubits == 0 {
        return Err(AnsatzError::NoQubits);
    }
    Statevector::basis_state(n_qubits, reference_index)?;
    let mut gates = Vec::new();
    let mut labels = Vec::new();
    for layer in 0..=layers {
        for q in 0..n_qubits {
            gates.push(AnsatzGate::Rotation {
                pauli: PauliString::single(n_qubits, q, Pauli::Y),
                parameter: labels.len(),
                multiplier: 1.0,
            });
            labels.push(format!("ry[{layer}][{q}]"));
        }
        if layer < layers {
            for q in 0..n_qubits.saturating_sub(1) {
                gates.push(AnsatzGate::Cz { a: q, b: q + 1 });
            }
        }
    }
    Ok(AnsatzCircuit {
        n_qubits,
        reference_index,
        n_parameters: labels.len(),
        gates,
        labels,
    })
}
