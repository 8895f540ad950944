//! Second-quantized fermionic operators over spin orbitals.
//!
//! Spin orbitals use blocked ordering: α spins occupy `[0, n)` and β spins
//! `[n, 2n)` for `n` spatial orbitals.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::integrals::ActiveSpaceHamiltonian;

/// Coefficients below this magnitude are dropped.
pub const PRUNE_TOL: f64 = 1e-12;

/// Largest mode count for which dense Fock-space matrices are built.
pub const MAX_DENSE_MODES: usize = 12;

#[derive(Debug, Error, PartialEq)]
pub enum FermionError {
    #[error("orbital {orbital} out of range for {n_modes} modes")]
    OrbitalOutOfRange { orbital: usize, n_modes: usize },
    #[error("mode count mismatch: {0} vs {1}")]
    ModeMismatch(usize, usize),
    #[error("dense matrices are limited to {MAX_DENSE_MODES} modes (got {0})")]
    TooLarge(usize),
}

/// `a†_p` when `dagger`, else `a_p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LadderOp {
    pub orbital: usize,
    pub dagger: bool,
}

impl LadderOp {
    pub fn create(orbital: usize) -> Self {
        LadderOp { orbital, dagger: true }
    }

    pub fn annihilate(orbital: usize) -> Self {
        LadderOp { orbital, dagger: false }
    }

    pub fn adjoint(self) -> Self {
        LadderOp {
            orbital: self.orbital,
            dagger: !self.dagger,
        }
    }
}

impl fmt::Display for LadderOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.dagger {
            write!(f, "{}^", self.orbital)
        } else {
            write!(f, "{}", self.orbital)
        }
    }
}

/// Sum of coefficient-weighted ladder-operator products. The empty sequence
/// is the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct FermionOperator {
    n_modes: usize,
    terms: BTreeMap<Vec<LadderOp>, Complex64>,
}

impl FermionOperator {
    pub fn zero(n_modes: usize) -> Self {
        FermionOperator {
            n_modes,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n_modes: usize, c: Complex64) -> Self {
        let mut op = Self::zero(n_modes);
        op.add_term_unchecked(Vec::new(), c);
        op
    }

    pub fn term(n_modes: usize, ops: Vec<LadderOp>, c: Complex64) -> Result<Self, FermionError> {
        let mut op = Self::zero(n_modes);
        op.add_term(ops, c)?;
        Ok(op)
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<LadderOp>, &Complex64)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, ops: &[LadderOp]) -> Complex64 {
        self.terms.get(ops).copied().unwrap_or_default()
    }

    /// Accumulates `c · ops` without reordering.
    pub fn add_term(&mut self, ops: Vec<LadderOp>, c: Complex64) -> Result<(), FermionError> {
        if let Some(bad) = ops.iter().find(|o| o.orbital >= self.n_modes) {
            return Err(FermionError::OrbitalOutOfRange {
                orbital: bad.orbital,
                n_modes: self.n_modes,
            });
        }
        self.add_term_unchecked(ops, c);
        Ok(())
    }

    fn add_term_unchecked(&mut self, ops: Vec<LadderOp>, c: Complex64) {
        use std::collections::btree_map::Entry;
        match self.terms.entry(ops) {
            Entry::Vacant(e) => {
                if c.norm() >= PRUNE_TOL {
                    e.insert(c);
                }
            }
            Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().norm() < PRUNE_TOL {
                    e.remove();
                }
            }
        }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut out = Self::zero(self.n_modes);
        for (ops, v) in &self.terms {
            out.add_term_unchecked(ops.clone(), v * c);
        }
        out
    }

    pub fn add(&self, other: &FermionOperator) -> Result<Self, FermionError> {
        if self.n_modes != other.n_modes {
            return Err(FermionError::ModeMismatch(self.n_modes, other.n_modes));
        }
        let mut out = self.clone();
        for (ops, c) in &other.terms {
            out.add_term_unchecked(ops.clone(), *c);
        }
        Ok(out)
    }

    /// Operator product (sequences concatenated, not normal-ordered).
    pub fn mul(&self, other: &FermionOperator) -> Result<Self, FermionError> {
        if self.n_modes != other.n_modes {
            return Err(FermionError::ModeMismatch(self.n_modes, other.n_modes));
        }
        let mut out = Self::zero(self.n_modes);
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                let mut ops = a.clone();
                ops.extend_from_slice(b);
                out.add_term_unchecked(ops, ca * cb);
            }
        }
        Ok(out)
    }

    /// Canonical form: creations before annihilations, each group in
    /// strictly decreasing orbital index.
    pub fn normal_order(&self) -> Self {
        let mut out = Self::zero(self.n_modes);
        let mut work: Vec<(Vec<LadderOp>, Complex64)> = self.terms.iter().map(|(o, c)| (o.clone(), *c)).collect();
        while let Some((mut ops, c)) = work.pop() {
            match first_violation(&ops) {
                None => out.add_term_unchecked(ops, c),
                Some((_, Violation::Vanishes)) => {}
                Some((i, Violation::Swap)) => {
                    let contraction = ops[i].orbital == ops[i + 1].orbital && !ops[i].dagger && ops[i + 1].dagger;
                    if contraction {
                        let mut reduced = ops.clone();
                        reduced.drain(i..i + 2);
                        work.push((reduced, c));
                    }
                    ops.swap(i, i + 1);
                    work.push((ops, -c));
                }
            }
        }
        out
    }

    pub fn is_normal_ordered(&self) -> bool {
        self.terms.keys().all(|ops| first_violation(ops).is_none())
    }

    /// Reverses each sequence, flips daggers and conjugates coefficients,
    /// then normal-orders.
    pub fn hermitian_conjugate(&self) -> Self {
        let mut out = Self::zero(self.n_modes);
        for (ops, c) in &self.terms {
            let rev: Vec<LadderOp> = ops.iter().rev().map(|o| o.adjoint()).collect();
            out.add_term_unchecked(rev, c.conj());
        }
        out.normal_order()
    }

    /// Largest coefficient difference against `other` (both taken as given).
    pub fn distance(&self, other: &FermionOperator) -> f64 {
        let mut d = 0.0f64;
        for (ops, c) in &self.terms {
            d = d.max((c - other.coefficient(ops)).norm());
        }
        for (ops, c) in &other.terms {
            if !self.terms.contains_key(ops) {
                d = d.max(c.norm());
            }
        }
        d
    }

    /// Dense Fock-space matrix in the occupation basis (mode `p` is bit `p`
    /// of the basis index, `a_p` carries the sign `(−1)^{Σ_{q<p} n_q}`).
    pub fn matrix(&self) -> Result<DMatrix<Complex64>, FermionError> {
        if self.n_modes > MAX_DENSE_MODES {
            return Err(FermionError::TooLarge(self.n_modes));
        }
        let dim = 1usize << self.n_modes;
        let mut m = DMatrix::<Complex64>::zeros(dim, dim);
        for (ops, c) in &self.terms {
            for b in 0..dim {
                if let Some((sign, out)) = apply_sequence(ops, b) {
                    m[(out, b)] += c * sign;
                }
            }
        }
        Ok(m)
    }

    /// One term per line, `coeff [p^ q]`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (ops, c) in &self.terms {
            let list: Vec<String> = ops.iter().map(|o| o.to_string()).collect();
            if c.im == 0.0 {
                out.push_str(&format!("{:.12e} [{}]\n", c.re, list.join(" ")));
            } else {
                out.push_str(&format!("({:.12e}{:+.12e}j) [{}]\n", c.re, c.im, list.join(" ")));
            }
        }
        out
    }
}

impl fmt::Display for FermionOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

enum Violation {
    Swap,
    Vanishes,
}

fn first_violation(ops: &[LadderOp]) -> Option<(usize, Violation)> {
    for i in 0..ops.len().saturating_sub(1) {
        let (a, b) = (ops[i], ops[i + 1]);
        match (a.dagger, b.dagger) {
            (false, true) => return Some((i, Violation::Swap)),
            (true, false) => {}
            _ if a.orbital == b.orbital => return Some((i, Violation::Vanishes)),
            _ if a.orbital < b.orbital => return Some((i, Violation::Swap)),
            _ => {}
        }
    }
    None
}

/// Applies `ops` (rightmost first) to basis state `b`.
fn apply_sequence(ops: &[LadderOp], mut b: usize) -> Option<(f64, usize)> {
    let mut sign = 1.0;
    for op in ops.iter().rev() {
        let bit = 1usize << op.orbital;
        let occupied = b & bit != 0;
        if occupied != !op.dagger {
            return None;
        }
        if (b & (bit - 1)).count_ones() % 2 == 1 {
            sign = -sign;
        }
        b ^= bit;
    }
    Some((sign, b))
}

/// `Σ_p a†_p a_p` over `n_modes` modes.
pub fn number_operator(n_modes: usize) -> FermionOperator {
    let mut op = FermionOperator::zero(n_modes);
    for p in 0..n_modes {
        op.add_term_unchecked(
            vec![LadderOp::create(p), LadderOp::annihilate(p)],
            Complex64::new(1.0, 0.0),
        );
    }
    op
}

/// `S_z = ½ Σ_p (n_pα − n_pβ)` in blocked ordering.
pub fn sz_operator(n_spatial: usize) -> FermionOperator {
    let mut op = FermionOperator::zero(2 * n_spatial);
    for p in 0..n_spatial {
        for (q, s) in [(p, 0.5), (p + n_spatial, -0.5)] {
            op.add_term_unchecked(
                vec![LadderOp::create(q), LadderOp::annihilate(q)],
                Complex64::new(s, 0.0),
            );
        }
    }
    op
}

/// Electronic Hamiltonian over `2·n_active` spin orbitals:
/// `Σ h_pq a†_p a_q + ½ Σ g_pqrs a†_p a†_q a_r a_s + E_core`, with the
/// physicist coefficient `g_pqrs = (ps|qr)` taken from chemist storage.
pub fn build_hamiltonian(asi: &ActiveSpaceHamiltonian) -> FermionOperator {
    let n = asi.n_active;
    let m = 2 * n;
    let mut op = FermionOperator::constant(m, Complex64::new(asi.core_energy, 0.0));
    for sigma in 0..2 {
        let off = sigma * n;
        for p in 0..n {
            for q in 0..n {
                op.add_term_unchecked(
                    vec![LadderOp::create(p + off), LadderOp::annihilate(q + off)],
                    Complex64::new(asi.h_eff[(p, q)], 0.0),
                );
            }
        }
    }
    for sigma in 0..2 {
        for tau in 0..2 {
            let (os, ot) = (sigma * n, tau * n);
            for p in 0..n {
                for q in 0..n {
                    if sigma == tau && p == q {
                        continue;
                    }
                    for r in 0..n {
                        for s in 0..n {
                            if sigma == tau && r == s {
                                continue;
                            }
                            let v = 0.5 * asi.g_active.get(p, s, q, r);
                            if v.abs() < PRUNE_TOL {
                                continue;
                            }
                            op.add_term_unchecked(
                                vec![
                                    LadderOp::create(p + os),
                                    LadderOp::create(q + ot),
                                    LadderOp::annihilate(r + ot),
                                    LadderOp::annihilate(s + os),
                                ],
                                Complex64::new(v, 0.0),
                            );
                        }
                    }
                }
            }
        }
    }
    op.normal_order()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::MolecularGeometry;
    use crate::integrals::{
        complete_active_space, compute_integrals_s, sto3g_shells, tests::random_integrals, ChemistEri,
    };
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn cr(p: usize) -> LadderOp {
        LadderOp::create(p)
    }

    fn an(p: usize) -> LadderOp {
        LadderOp::annihilate(p)
    }

    fn sorted_eigenvalues(m: DMatrix<Complex64>) -> Vec<f64> {
        let mut ev: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    fn sector_ground(m: &DMatrix<Complex64>, n_electrons: u32) -> f64 {
        let idx: Vec<usize> = (0..m.nrows()).filter(|b| b.count_ones() == n_electrons).collect();
        let sub = DMatrix::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])]);
        sorted_eigenvalues(sub)[0]
    }

    /// Slater-Condon FCI over determinants of `n_e` electrons in blocked
    /// spin orbitals, from the spatial integrals directly.
    fn slater_condon_fci(asi: &ActiveSpaceHamiltonian) -> f64 {
        let n = asi.n_active;
        let m = 2 * n;
        let spatial = |p: usize| p % n;
        let spin = |p: usize| p / n;
        let h = |p: usize, q: usize| {
            if spin(p) == spin(q) {
                asi.h_eff[(spatial(p), spatial(q))]
            } else {
                0.0
            }
        };
        // <pq|rs> = (pr|qs) with spin selection.
        let phys = |p: usize, q: usize, r: usize, s: usize| {
            if spin(p) == spin(r) && spin(q) == spin(s) {
                asi.g_active.get(spatial(p), spatial(r), spatial(q), spatial(s))
            } else {
                0.0
            }
        };
        let anti = |p, q, r, s| phys(p, q, r, s) - phys(p, q, s, r);
        let dets: Vec<usize> = (0..1usize << m)
            .filter(|b| b.count_ones() as usize == asi.n_active_electrons)
            .collect();
        let occ = |b: usize| (0..m).filter(move |p| b >> p & 1 == 1);
        let between = |b: usize, i: usize, a: usize| {
            let (lo, hi) = (i.min(a), i.max(a));
            let mask = ((1usize << hi) - 1) & !((1usize << (lo + 1)) - 1);
            if (b & mask).count_ones() % 2 == 1 {
                -1.0
            } else {
                1.0
            }
        };
        let dim = dets.len();
        let mut hm = DMatrix::<f64>::zeros(dim, dim);
        for (x, &bi) in dets.iter().enumerate() {
            for (y, &bj) in dets.iter().enumerate() {
                let diff = bi ^ bj;
                let v = match diff.count_ones() {
                    0 => {
                        let o: Vec<usize> = occ(bi).collect();
                        let mut e = o.iter().map(|&i| h(i, i)).sum::<f64>();
                        for &i in &o {
                            for &j in &o {
                                e += 0.5 * anti(i, j, i, j);
                            }
                        }
                        e
                    }
                    2 => {
                        let i = (bj & diff).trailing_zeros() as usize;
                        let a = (bi & diff).trailing_zeros() as usize;
                        let sign = between(bj, i, a);
                        let mut e = h(a, i);
                        for j in occ(bj).filter(|&j| j != i) {
                            e += anti(a, j, i, j);
                        }
                        sign * e
                    }
                    4 => {
                        let from: Vec<usize> = occ(bj & diff).collect();
                        let to: Vec<usize> = occ(bi & diff).collect();
                        let (i, j, a, b) = (from[0], from[1], to[0], to[1]);
                        let mid = bj ^ (1 << i) ^ (1 << a);
                        let sign = between(bj, i, a) * between(mid, j, b);
                        sign * anti(a, b, i, j)
                    }
                    _ => 0.0,
                };
                hm[(x, y)] = v;
            }
        }
        let mut ev: Vec<f64> = hm.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev[0] + asi.core_energy
    }

    fn h2_cas22(bond_bohr: f64) -> ActiveSpaceHamiltonian {
        let geom = MolecularGeometry::from_bohr(&[("H", [0.0, 0.0, 0.0]), ("H", [0.0, 0.0, bond_bohr])]).unwrap();
        let ints = compute_integrals_s(&geom, &sto3g_shells(&geom).unwrap()).unwrap();
        complete_active_space(&ints, 2, 2).unwrap()
    }

    #[test]
    fn normal_order_examples() {
        let op = FermionOperator::term(1, vec![an(0), cr(0)], c(1.0))
            .unwrap()
            .normal_order();
        assert_eq!(op.coefficient(&[]), c(1.0));
        assert_eq!(op.coefficient(&[cr(0), an(0)]), c(-1.0));
        assert_eq!(op.len(), 2);

        let op = FermionOperator::term(1, vec![cr(0), cr(0)], c(1.0))
            .unwrap()
            .normal_order();
        assert!(op.is_empty());

        let op = FermionOperator::term(3, vec![cr(0), cr(2), an(1), an(2)], c(1.0))
            .unwrap()
            .normal_order();
        assert_eq!(op.coefficient(&[cr(2), cr(0), an(2), an(1)]), c(1.0));
        assert!(op.is_normal_ordered());
    }

    #[test]
    fn conjugate_examples() {
        let op = FermionOperator::term(2, vec![cr(0), an(1)], c(1.0)).unwrap();
        let dag = op.hermitian_conjugate();
        assert_eq!(dag.coefficient(&[cr(1), an(0)]), c(1.0));
        assert_eq!(dag.len(), 1);

        let op = FermionOperator::term(1, vec![an(0)], Complex64::new(0.0, 1.0)).unwrap();
        assert_eq!(
            op.hermitian_conjugate().coefficient(&[cr(0)]),
            Complex64::new(0.0, -1.0)
        );
    }

    #[test]
    fn index_validation() {
        assert_eq!(
            FermionOperator::term(2, vec![cr(2)], c(1.0)),
            Err(FermionError::OrbitalOutOfRange { orbital: 2, n_modes: 2 })
        );
        assert!(FermionOperator::zero(2).add(&FermionOperator::zero(3)).is_err());
        assert_eq!(FermionOperator::zero(13).matrix(), Err(FermionError::TooLarge(13)));
    }

    #[test]
    fn hamiltonian_one_orbital_example() {
        let asi = ActiveSpaceHamiltonian {
            n_active: 1,
            h_eff: DMatrix::from_element(1, 1, -1.0),
            g_active: ChemistEri::zeros(1),
            core_energy: 0.0,
            n_active_electrons: 0,
        };
        let op = build_hamiltonian(&asi);
        assert_eq!(op.len(), 2);
        assert_eq!(op.coefficient(&[cr(0), an(0)]), c(-1.0));
        assert_eq!(op.coefficient(&[cr(1), an(1)]), c(-1.0));
    }

    #[test]
    fn hamiltonian_constant_example() {
        let asi = ActiveSpaceHamiltonian {
            n_active: 2,
            h_eff: DMatrix::zeros(2, 2),
            g_active: ChemistEri::zeros(2),
            core_energy: 0.7,
            n_active_electrons: 2,
        };
        let op = build_hamiltonian(&asi);
        assert_eq!(op.len(), 1);
        assert_eq!(op.coefficient(&[]), c(0.7));
    }

    #[test]
    fn h2_ground_state_matches_two_determinant_ci() {
        let asi = h2_cas22(1.4);
        let m = build_hamiltonian(&asi).matrix().unwrap();
        // Closed-shell CI: [[2h11 + J11, K12], [K12, 2h22 + J22]].
        let g = &asi.g_active;
        let a = 2.0 * asi.h_eff[(0, 0)] + g.get(0, 0, 0, 0);
        let d = 2.0 * asi.h_eff[(1, 1)] + g.get(1, 1, 1, 1);
        let k = g.get(0, 1, 0, 1);
        let e_ci = 0.5 * (a + d) - (0.25 * (a - d).powi(2) + k * k).sqrt() + asi.core_energy;
        assert!((sector_ground(&m, 2) - e_ci).abs() < 1e-10);
        assert!((sector_ground(&m, 2) - slater_condon_fci(&asi)).abs() < 1e-10);
        // FCI lies below Hartree-Fock at 1.4 Bohr (-1.1167).
        assert!(e_ci < -1.13 && e_ci > -1.14);
    }

    #[test]
    fn random_hamiltonians_match_slater_condon() {
        for (n, ne, seed) in [(2, 2, 1), (3, 2, 2), (3, 4, 3)] {
            let asi = ActiveSpaceHamiltonian::full_space(&random_integrals(n, ne, seed));
            let m = build_hamiltonian(&asi).matrix().unwrap();
            assert!((sector_ground(&m, ne as u32) - slater_condon_fci(&asi)).abs() < 1e-10);
        }
    }

    #[test]
    fn hamiltonian_is_hermitian_and_conserves_symmetries() {
        for (n, seed) in [(2, 11), (3, 12), (4, 13)] {
            let asi = ActiveSpaceHamiltonian::full_space(&random_integrals(n, 2, seed));
            let h = build_hamiltonian(&asi);
            assert!(h.distance(&h.hermitian_conjugate()) < 1e-12);
            let hm = h.matrix().unwrap();
            assert!((hm.adjoint() - &hm).norm() < 1e-12);
            for sym in [number_operator(2 * n), sz_operator(n)] {
                let s = sym.matrix().unwrap();
                assert!((&hm * &s - &s * &hm).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn text_form() {
        let op = FermionOperator::term(3, vec![cr(2), an(0)], c(0.5)).unwrap();
        assert_eq!(op.to_text(), "5.000000000000e-1 [2^ 0]\n");
    }

    fn ladder(m: usize) -> impl Strategy<Value = LadderOp> {
        (0..m, any::<bool>()).prop_map(|(orbital, dagger)| LadderOp { orbital, dagger })
    }

    fn operator(m: usize, max_len: usize) -> impl Strategy<Value = FermionOperator> {
        proptest::collection::vec(
            (
                proptest::collection::vec(ladder(m), 0..=max_len),
                -1.0f64..1.0,
                -1.0f64..1.0,
            ),
            0..6,
        )
        .prop_map(move |terms| {
            let mut op = FermionOperator::zero(m);
            for (ops, re, im) in terms {
                op.add_term(ops, Complex64::new(re, im)).unwrap();
            }
            op
        })
    }

    proptest! {
        #[test]
        fn normal_order_preserves_matrix(op in operator(4, 4)) {
            let before = op.matrix().unwrap();
            let ordered = op.normal_order();
            prop_assert!(ordered.is_normal_ordered());
            prop_assert!((ordered.matrix().unwrap() - before).norm() < 1e-12);
            prop_assert!(ordered.normal_order().distance(&ordered) < 1e-15);
        }

        #[test]
        fn matrix_is_homomorphic(
            (a, b) in (1usize..=4).prop_flat_map(|m| (operator(m, 3), operator(m, 3)))
        ) {
            let prod = a.mul(&b).unwrap().matrix().unwrap();
            prop_assert!((prod - a.matrix().unwrap() * b.matrix().unwrap()).norm() < 1e-12);
            let sum = a.add(&b).unwrap().matrix().unwrap();
            prop_assert!((sum - (a.matrix().unwrap() + b.matrix().unwrap())).norm() < 1e-12);
            let dag = a.hermitian_conjugate().matrix().unwrap();
            prop_assert!((dag - a.matrix().unwrap().adjoint()).norm() < 1e-12);
        }
    }
}
