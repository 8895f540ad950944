//! Fermion-to-qubit encodings and two-qubit Z2 tapering.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fermion::{FermionOperator, LadderOp};
use crate::pauli::{Pauli, PauliString, PauliSum};

#[derive(Debug, Error, PartialEq)]
pub enum MappingError {
    #[error("operator has {operator} modes but the encoding expects {encoding}")]
    ModeMismatch { operator: usize, encoding: usize },
    #[error("encoding needs at least one mode")]
    NoModes,
    #[error("unknown encoding `{0}` (expected jordan_wigner or parity)")]
    UnknownEncoding(String),
    #[error("tapering needs an even mode count of at least 2 (got {0})")]
    OddModes(usize),
    #[error("term `{0}` acts with X or Y on a tapered qubit; use the parity encoding with blocked spin ordering")]
    NotTaperable(String),
    #[error("reference state has {found} occupations for {expected} modes")]
    ReferenceLength { expected: usize, found: usize },
    #[error("reference state holds {found} electrons, expected {expected}")]
    ReferenceElectrons { expected: usize, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Encoding {
    JordanWigner,
    Parity,
}

impl fmt::Display for Encoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Encoding::JordanWigner => "jordan_wigner",
            Encoding::Parity => "parity",
        })
    }
}

impl FromStr for Encoding {
    type Err = MappingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "jordan_wigner" | "jw" => Ok(Encoding::JordanWigner),
            "parity" => Ok(Encoding::Parity),
            _ => Err(MappingError::UnknownEncoding(s.into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncodingSpec {
    pub kind: Encoding,
    pub n_modes: usize,
}

impl EncodingSpec {
    pub fn new(kind: Encoding, n_modes: usize) -> Result<Self, MappingError> {
        if n_modes == 0 {
            return Err(MappingError::NoModes);
        }
        Ok(EncodingSpec { kind, n_modes })
    }

    /// Qubit image of a single ladder operator.
    pub fn ladder_image(&self, op: LadderOp) -> PauliSum {
        let n = self.n_modes;
        let p = op.orbital;
        // a_p = ½(A + iB), a†_p = ½(A − iB)
        let (mut a, mut b) = (PauliString::identity(n), PauliString::identity(n));
        a.set(p, Pauli::X);
        b.set(p, Pauli::Y);
        match self.kind {
            Encoding::JordanWigner => {
                for q in 0..p {
                    a.set(q, Pauli::Z);
                    b.set(q, Pauli::Z);
                }
            }
            Encoding::Parity => {
                if p > 0 {
                    a.set(p - 1, Pauli::Z);
                }
                for q in p + 1..n {
                    a.set(q, Pauli::X);
                    b.set(q, Pauli::X);
                }
            }
        }
        let ib = if op.dagger { -0.5 } else { 0.5 };
        PauliSum::from_terms(n, [(a, Complex64::new(0.5, 0.0)), (b, Complex64::new(0.0, ib))]).expect("sizes agree")
    }
}

/// Encodes `op` term by term as products of ladder images.
pub fn map_operator(op: &FermionOperator, spec: &EncodingSpec) -> Result<PauliSum, MappingError> {
    if op.n_modes() != spec.n_modes {
        return Err(MappingError::ModeMismatch {
            operator: op.n_modes(),
            encoding: spec.n_modes,
        });
    }
    let n = spec.n_modes;
    let images: Vec<[PauliSum; 2]> = (0..n)
        .map(|p| {
            [
                spec.ladder_image(LadderOp::annihilate(p)),
                spec.ladder_image(LadderOp::create(p)),
            ]
        })
        .collect();
    let mut out = PauliSum::zero(n);
    for (ops, c) in op.terms() {
        let mut acc = PauliSum::constant(n, *c);
        for l in ops {
            acc = &acc * &images[l.orbital][l.dagger as usize];
        }
        for (p, v) in acc.terms() {
            out.add_term(p.clone(), *v);
        }
    }
    Ok(out)
}

/// Computational-basis index of an occupation-number vector. Jordan-Wigner
/// stores `f_p` on qubit `p`; parity stores `f_0 ⊕ … ⊕ f_p`.
pub fn basis_state_index(occupations: &[bool], kind: Encoding) -> usize {
    let mut index = 0usize;
    let mut parity = false;
    for (p, &f) in occupations.iter().enumerate() {
        parity ^= f;
        let bit = match kind {
            Encoding::JordanWigner => f,
            Encoding::Parity => parity,
        };
        if bit {
            index |= 1 << p;
        }
    }
    index
}

/// Lowest-`n_alpha` α and lowest-`n_beta` β orbitals occupied, in blocked
/// ordering over `n_modes` spin orbitals.
pub fn reference_occupations(n_modes: usize, n_alpha: usize, n_beta: usize) -> Vec<bool> {
    let half = n_modes / 2;
    (0..n_modes)
        .map(|p| if p < half { p < n_alpha } else { p - half < n_beta })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaperingResult {
    pub reduced: PauliSum,
    pub removed_qubits: (usize, usize),
    /// Eigenvalues of `Z` on the removed qubits.
    pub sector: (i8, i8),
}

impl TaperingResult {
    /// Drops the removed qubits from a full-register basis index.
    pub fn reduce_index(&self, index: usize) -> usize {
        let (a, b) = self.removed_qubits;
        let mut out = 0usize;
        let mut k = 0;
        let n = self.reduced.n_qubits() + 2;
        for q in 0..n {
            if q == a || q == b {
                continue;
            }
            if index >> q & 1 == 1 {
                out |= 1 << k;
            }
            k += 1;
        }
        out
    }
}

/// Qubits fixed by α-number parity and total-number parity under the parity
/// encoding with blocked spin ordering.
pub fn tapered_qubits(n_modes: usize) -> (usize, usize) {
    (n_modes / 2 - 1, n_modes - 1)
}

/// Removes qubits `n/2 − 1` and `n − 1` from a parity-encoded sum, fixing
/// their `Z` eigenvalues from the reference occupation.
pub fn taper_two_qubits(
    sum: &PauliSum,
    n_modes: usize,
    n_electrons: usize,
    reference: &[bool],
) -> Result<TaperingResult, MappingError> {
    if reference.len() != n_modes {
        return Err(MappingError::ReferenceLength {
            expected: n_modes,
            found: reference.len(),
        });
    }
    let found = reference.iter().filter(|f| **f).count();
    if found != n_electrons {
        return Err(MappingError::ReferenceElectrons {
            expected: n_electrons,
            found,
        });
    }
    if n_modes < 2 || !n_modes.is_multiple_of(2) {
        return Err(MappingError::OddModes(n_modes));
    }
    let n_alpha = reference[..n_modes / 2].iter().filter(|f| **f).count();
    let eig = |count: usize| if count.is_multiple_of(2) { 1i8 } else { -1i8 };
    taper_sector(sum, n_modes, (eig(n_alpha), eig(n_electrons)))
}

/// Tapers into an explicit sector `(z_a, z_b)` with eigenvalues ±1.
pub fn taper_sector(sum: &PauliSum, n_modes: usize, sector: (i8, i8)) -> Result<TaperingResult, MappingError> {
    if n_modes < 2 || !n_modes.is_multiple_of(2) {
        return Err(MappingError::OddModes(n_modes));
    }
    if sum.n_qubits() != n_modes {
        return Err(MappingError::ModeMismatch {
            operator: sum.n_qubits(),
            encoding: n_modes,
        });
    }
    let (qa, qb) = tapered_qubits(n_modes);
    let mut reduced = PauliSum::zero(n_modes - 2);
    for (p, c) in sum.terms() {
        let mut factor = 1.0;
        for (q, z) in [(qa, sector.0), (qb, sector.1)] {
            match p.get(q) {
                Pauli::I => {}
                Pauli::Z => factor *= z as f64,
                _ => return Err(MappingError::NotTaperable(p.to_string())),
            }
        }
        reduced.add_term(p.remove_qubits(&[qa, qb]), c * factor);
    }
    Ok(TaperingResult {
        reduced,
        removed_qubits: (qa, qb),
        sector,
    })
}

/// Tapered sums for all four sectors, in the order (+,+), (+,−), (−,+), (−,−).
pub fn taper_all_sectors(sum: &PauliSum, n_modes: usize) -> Result<Vec<TaperingResult>, MappingError> {
    [(1, 1), (1, -1), (-1, 1), (-1, -1)]
        .into_iter()
        .map(|s| taper_sector(sum, n_modes, s))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fermion::{build_hamiltonian, number_operator, sz_operator};
    use crate::geometry::MolecularGeometry;
    use crate::integrals::{
        complete_active_space, compute_integrals_s, sto3g_shells, tests::random_integrals, ActiveSpaceHamiltonian,
    };
    use nalgebra::DMatrix;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn eigenvalues(m: DMatrix<Complex64>) -> Vec<f64> {
        let mut ev: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    fn h2_asi(bond_bohr: f64) -> ActiveSpaceHamiltonian {
        let geom = MolecularGeometry::from_bohr(&[("H", [0.0; 3]), ("H", [0.0, 0.0, bond_bohr])]).unwrap();
        let ints = compute_integrals_s(&geom, &sto3g_shells(&geom).unwrap()).unwrap();
        complete_active_space(&ints, 2, 2).unwrap()
    }

    fn h4_chain() -> ActiveSpaceHamiltonian {
        let geom = MolecularGeometry::from_angstrom(&[
            ("H", [0.0, 0.0, 0.0]),
            ("H", [0.0, 0.0, 0.9]),
            ("H", [0.0, 0.0, 1.8]),
            ("H", [0.0, 0.0, 2.7]),
        ])
        .unwrap();
        let ints = compute_integrals_s(&geom, &sto3g_shells(&geom).unwrap()).unwrap();
        complete_active_space(&ints, 4, 4).unwrap()
    }

    /// Parity-encoded matrix restricted to basis states whose tapered bits
    /// match the reference index.
    fn restricted_ground(full: &PauliSum, n_modes: usize, reference_index: usize) -> f64 {
        let m = full.matrix().unwrap();
        let (qa, qb) = tapered_qubits(n_modes);
        let mask = (1 << qa) | (1 << qb);
        let idx: Vec<usize> = (0..m.nrows()).filter(|b| b & mask == reference_index & mask).collect();
        let sub = DMatrix::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])]);
        eigenvalues(sub)[0]
    }

    #[test]
    fn jw_number_operator_example() {
        let op = FermionOperator::term(1, vec![LadderOp::create(0), LadderOp::annihilate(0)], c(1.0)).unwrap();
        let spec = EncodingSpec::new(Encoding::JordanWigner, 1).unwrap();
        let mapped = map_operator(&op, &spec).unwrap();
        let expected = PauliSum::from_terms(
            1,
            [
                (PauliString::identity(1), c(0.5)),
                (PauliString::parse(1, "Z0").unwrap(), c(-0.5)),
            ],
        )
        .unwrap();
        assert!(mapped.distance(&expected) < 1e-15);
    }

    #[test]
    fn constant_maps_to_identity() {
        let op = FermionOperator::constant(3, c(1.25));
        for kind in [Encoding::JordanWigner, Encoding::Parity] {
            let mapped = map_operator(&op, &EncodingSpec::new(kind, 3).unwrap()).unwrap();
            assert_eq!(mapped, PauliSum::constant(3, c(1.25)));
        }
        let spec = EncodingSpec::new(Encoding::Parity, 2).unwrap();
        assert!(matches!(
            map_operator(&op, &spec),
            Err(MappingError::ModeMismatch { .. })
        ));
        assert_eq!(EncodingSpec::new(Encoding::Parity, 0), Err(MappingError::NoModes));
    }

    #[test]
    fn basis_state_examples() {
        assert_eq!(basis_state_index(&[false; 4], Encoding::JordanWigner), 0);
        assert_eq!(basis_state_index(&[false; 4], Encoding::Parity), 0);
        let f = [true, false, true, false];
        assert_eq!(basis_state_index(&f, Encoding::JordanWigner), 5);
        assert_eq!(basis_state_index(&f, Encoding::Parity), 3);
        assert_eq!(reference_occupations(4, 1, 1), f.to_vec());
    }

    #[test]
    fn encoding_names_round_trip() {
        for kind in [Encoding::JordanWigner, Encoding::Parity] {
            assert_eq!(kind.to_string().parse::<Encoding>().unwrap(), kind);
        }
        assert!("bravyi_kitaev".parse::<Encoding>().is_err());
    }

    #[test]
    fn anticommutation_relations_hold() {
        for kind in [Encoding::JordanWigner, Encoding::Parity] {
            for n in 1..=6 {
                let spec = EncodingSpec::new(kind, n).unwrap();
                for p in 0..n {
                    for q in 0..n {
                        let a = spec.ladder_image(LadderOp::annihilate(p));
                        let ad = spec.ladder_image(LadderOp::create(q));
                        let anti = &(&a * &ad) + &(&ad * &a);
                        let expected = if p == q {
                            PauliSum::constant(n, c(1.0))
                        } else {
                            PauliSum::zero(n)
                        };
                        assert!(anti.distance(&expected) < 1e-14, "{kind} {n} {p} {q}");
                        let b = spec.ladder_image(LadderOp::annihilate(q));
                        assert!((&(&a * &b) + &(&b * &a)).is_empty());
                    }
                }
            }
        }
    }

    #[test]
    fn encodings_reproduce_fock_matrices() {
        // The JW image is the Fock-space matrix itself under the shared bit
        // convention; parity differs by the basis relabelling.
        for seed in 0..3 {
            let asi = ActiveSpaceHamiltonian::full_space(&random_integrals(2, 2, seed));
            let h = build_hamiltonian(&asi);
            let jw = map_operator(&h, &EncodingSpec::new(Encoding::JordanWigner, 4).unwrap()).unwrap();
            assert!((jw.matrix().unwrap() - h.matrix().unwrap()).norm() < 1e-12);
            let par = map_operator(&h, &EncodingSpec::new(Encoding::Parity, 4).unwrap()).unwrap();
            let pm = par.matrix().unwrap();
            let fm = h.matrix().unwrap();
            for i in 0..16usize {
                for j in 0..16usize {
                    let occ = |b: usize| (0..4).map(|p| b >> p & 1 == 1).collect::<Vec<_>>();
                    let (pi, pj) = (
                        basis_state_index(&occ(i), Encoding::Parity),
                        basis_state_index(&occ(j), Encoding::Parity),
                    );
                    assert!((pm[(pi, pj)] - fm[(i, j)]).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn encodings_are_isospectral() {
        let mut cases = vec![build_hamiltonian(&h2_asi(1.4))];
        for (n, seed) in [(3, 7), (4, 8), (5, 9)] {
            cases.push(build_hamiltonian(&ActiveSpaceHamiltonian::full_space(
                &random_integrals(n, 2, seed),
            )));
        }
        for h in cases {
            let m = h.n_modes();
            let jw = map_operator(&h, &EncodingSpec::new(Encoding::JordanWigner, m).unwrap()).unwrap();
            let par = map_operator(&h, &EncodingSpec::new(Encoding::Parity, m).unwrap()).unwrap();
            assert!(jw.is_hermitian(1e-10) && par.is_hermitian(1e-10));
            let (a, b) = (eigenvalues(jw.matrix().unwrap()), eigenvalues(par.matrix().unwrap()));
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn mapped_hamiltonian_commutes_with_symmetries() {
        let asi = ActiveSpaceHamiltonian::full_space(&random_integrals(3, 2, 21));
        let h = build_hamiltonian(&asi);
        for kind in [Encoding::JordanWigner, Encoding::Parity] {
            let spec = EncodingSpec::new(kind, 6).unwrap();
            let hm = map_operator(&h, &spec).unwrap().matrix().unwrap();
            for sym in [number_operator(6), sz_operator(3)] {
                let s = map_operator(&sym, &spec).unwrap().matrix().unwrap();
                assert!((&hm * &s - &s * &hm).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn h2_tapers_to_two_qubits_across_bond_lengths() {
        for k in 0..10 {
            let r = 0.8 + 0.3 * k as f64;
            let asi = h2_asi(r);
            let h = build_hamiltonian(&asi);
            let par = map_operator(&h, &EncodingSpec::new(Encoding::Parity, 4).unwrap()).unwrap();
            let reference = reference_occupations(4, 1, 1);
            let tapered = taper_two_qubits(&par, 4, 2, &reference).unwrap();
            assert_eq!(tapered.reduced.n_qubits(), 2);
            assert_eq!(tapered.removed_qubits, (1, 3));
            assert_eq!(tapered.sector, (-1, 1));
            let reduced = eigenvalues(tapered.reduced.matrix().unwrap())[0];
            let full = restricted_ground(&par, 4, basis_state_index(&reference, Encoding::Parity));
            assert!((reduced - full).abs() < 1e-10, "r={r}");
            // The neutral singlet is the overall ground state here.
            let fock = eigenvalues(h.matrix().unwrap());
            assert!((reduced - fock[0]).abs() < 1e-10, "r={r}");
        }
    }

    #[test]
    fn cas44_tapers_to_six_qubits() {
        let h = build_hamiltonian(&h4_chain());
        let par = map_operator(&h, &EncodingSpec::new(Encoding::Parity, 8).unwrap()).unwrap();
        let reference = reference_occupations(8, 2, 2);
        let tapered = taper_two_qubits(&par, 8, 4, &reference).unwrap();
        assert_eq!(tapered.reduced.n_qubits(), 6);
        assert_eq!(tapered.removed_qubits, (3, 7));
        let reduced = eigenvalues(tapered.reduced.matrix().unwrap())[0];
        let full = restricted_ground(&par, 8, basis_state_index(&reference, Encoding::Parity));
        assert!((reduced - full).abs() < 1e-10);
        let ref_index = basis_state_index(&reference, Encoding::Parity);
        assert_eq!(tapered.reduce_index(ref_index), 0b001001);
    }

    #[test]
    fn identity_tapers_unchanged() {
        let sum = PauliSum::constant(4, c(-0.3));
        let t = taper_two_qubits(&sum, 4, 2, &reference_occupations(4, 1, 1)).unwrap();
        assert_eq!(t.reduced, PauliSum::constant(2, c(-0.3)));
    }

    #[test]
    fn taper_rejects_jordan_wigner_and_bad_references() {
        let h = build_hamiltonian(&h2_asi(1.4));
        let jw = map_operator(&h, &EncodingSpec::new(Encoding::JordanWigner, 4).unwrap()).unwrap();
        let reference = reference_occupations(4, 1, 1);
        assert!(matches!(
            taper_two_qubits(&jw, 4, 2, &reference),
            Err(MappingError::NotTaperable(_))
        ));
        let par = map_operator(&h, &EncodingSpec::new(Encoding::Parity, 4).unwrap()).unwrap();
        assert!(matches!(
            taper_two_qubits(&par, 4, 3, &reference),
            Err(MappingError::ReferenceElectrons { .. })
        ));
        assert!(matches!(
            taper_two_qubits(&par, 4, 2, &reference[..3]),
            Err(MappingError::ReferenceLength { .. })
        ));
    }

    #[test]
    fn all_sectors_cover_the_spectrum() {
        let h = build_hamiltonian(&h2_asi(1.4));
        let par = map_operator(&h, &EncodingSpec::new(Encoding::Parity, 4).unwrap()).unwrap();
        let mut all: Vec<f64> = taper_all_sectors(&par, 4)
            .unwrap()
            .into_iter()
            .flat_map(|t| eigenvalues(t.reduced.matrix().unwrap()))
            .collect();
        all.sort_by(f64::total_cmp);
        let full = eigenvalues(par.matrix().unwrap());
        for (a, b) in all.iter().zip(&full) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}
