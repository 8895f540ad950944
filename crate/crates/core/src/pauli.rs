//! Pauli strings and weighted Pauli sums.
//!
//! A string is stored as packed symplectic bits: qubit `q` carries
//! `(x, z)` with I = (0,0), X = (1,0), Z = (0,1), Y = (1,1). Qubit 0 is the
//! least significant bit of computational-basis indices.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Coefficients below this magnitude are dropped.
pub const PRUNE_TOL: f64 = 1e-12;

/// Largest register for which dense matrices are built.
pub const MAX_DENSE_QUBITS: usize = 12;

#[derive(Debug, Error, PartialEq)]
pub enum PauliError {
    #[error("qubit count mismatch: {0} vs {1}")]
    SizeMismatch(usize, usize),
    #[error("dense matrices are limited to {MAX_DENSE_QUBITS} qubits (got {0})")]
    TooLarge(usize),
    #[error("cannot parse Pauli term `{0}`")]
    Parse(String),
    #[error("qubit {qubit} out of range for {n_qubits} qubits")]
    QubitOutOfRange { qubit: usize, n_qubits: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// A power of `i`: the phase `i^k` for `k ∈ {0, 1, 2, 3}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Phase(u8);

impl Phase {
    pub const ONE: Phase = Phase(0);
    pub const I: Phase = Phase(1);
    pub const MINUS_ONE: Phase = Phase(2);
    pub const MINUS_I: Phase = Phase(3);

    pub fn from_power(k: u32) -> Self {
        Phase((k % 4) as u8)
    }

    pub fn power(self) -> u32 {
        self.0 as u32
    }

    pub fn to_complex(self) -> Complex64 {
        match self.0 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    n_qubits: usize,
    x: Vec<u64>,
    z: Vec<u64>,
}

fn words(n: usize) -> usize {
    n.div_ceil(64).max(1)
}

impl PauliString {
    pub fn identity(n_qubits: usize) -> Self {
        PauliString {
            n_qubits,
            x: vec![0; words(n_qubits)],
            z: vec![0; words(n_qubits)],
        }
    }

    /// One non-identity letter on `qubit`.
    pub fn single(n_qubits: usize, qubit: usize, letter: Pauli) -> Self {
        let mut p = Self::identity(n_qubits);
        p.set(qubit, letter);
        p
    }

    pub fn from_letters(letters: &[Pauli]) -> Self {
        let mut p = Self::identity(letters.len());
        for (q, l) in letters.iter().enumerate() {
            p.set(q, *l);
        }
        p
    }

    /// Parses the sparse form `"X0 Z3 Y5"`; `"I"` or an empty string is the
    /// identity.
    pub fn parse(n_qubits: usize, text: &str) -> Result<Self, PauliError> {
        let mut p = Self::identity(n_qubits);
        for token in text.split_whitespace() {
            if token == "I" {
                continue;
            }
            let mut chars = token.chars();
            let letter = match chars.next() {
                Some('X') => Pauli::X,
                Some('Y') => Pauli::Y,
                Some('Z') => Pauli::Z,
                _ => return Err(PauliError::Parse(token.into())),
            };
            let qubit: usize = chars.as_str().parse().map_err(|_| PauliError::Parse(token.into()))?;
            if qubit >= n_qubits {
                return Err(PauliError::QubitOutOfRange { qubit, n_qubits });
            }
            if p.get(qubit) != Pauli::I {
                return Err(PauliError::Parse(token.into()));
            }
            p.set(qubit, letter);
        }
        Ok(p)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn get(&self, qubit: usize) -> Pauli {
        assert!(qubit < self.n_qubits, "qubit {qubit} out of range");
        let (w, b) = (qubit / 64, qubit % 64);
        Pauli::from_bits((self.x[w] >> b) & 1 == 1, (self.z[w] >> b) & 1 == 1)
    }

    pub fn set(&mut self, qubit: usize, letter: Pauli) {
        assert!(qubit < self.n_qubits, "qubit {qubit} out of range");
        let (w, b) = (qubit / 64, qubit % 64);
        let (x, z) = letter.bits();
        self.x[w] = (self.x[w] & !(1 << b)) | ((x as u64) << b);
        self.z[w] = (self.z[w] & !(1 << b)) | ((z as u64) << b);
    }

    pub fn is_identity(&self) -> bool {
        self.x.iter().chain(&self.z).all(|w| *w == 0)
    }

    /// Qubits carrying a non-identity letter, ascending.
    pub fn support(&self) -> Vec<usize> {
        (0..self.n_qubits).filter(|&q| self.get(q) != Pauli::I).collect()
    }

    pub fn weight(&self) -> usize {
        self.x
            .iter()
            .zip(&self.z)
            .map(|(x, z)| (x | z).count_ones() as usize)
            .sum()
    }

    /// Number of Y letters.
    pub fn y_count(&self) -> u32 {
        self.x.iter().zip(&self.z).map(|(x, z)| (x & z).count_ones()).sum()
    }

    /// Bit mask of X/Y positions (registers of at most 64 qubits).
    pub fn x_mask(&self) -> u64 {
        assert!(self.n_qubits <= 64, "mask view needs at most 64 qubits");
        self.x[0]
    }

    /// Bit mask of Z/Y positions (registers of at most 64 qubits).
    pub fn z_mask(&self) -> u64 {
        assert!(self.n_qubits <= 64, "mask view needs at most 64 qubits");
        self.z[0]
    }

    fn check_size(&self, other: &PauliString) -> Result<(), PauliError> {
        if self.n_qubits != other.n_qubits {
            Err(PauliError::SizeMismatch(self.n_qubits, other.n_qubits))
        } else {
            Ok(())
        }
    }

    /// `self · other = phase · result`.
    pub fn multiply(&self, other: &PauliString) -> Result<(Phase, PauliString), PauliError> {
        self.check_size(other)?;
        // With P = i^{|x∧z|} X^x Z^z, Z^z1 X^x2 = (−1)^{z1·x2} X^x2 Z^z1.
        let mut sign_flips = 0u32;
        let mut x = Vec::with_capacity(self.x.len());
        let mut z = Vec::with_capacity(self.z.len());
        for w in 0..self.x.len() {
            sign_flips += (self.z[w] & other.x[w]).count_ones();
            x.push(self.x[w] ^ other.x[w]);
            z.push(self.z[w] ^ other.z[w]);
        }
        let result = PauliString {
            n_qubits: self.n_qubits,
            x,
            z,
        };
        let k = self.y_count() + other.y_count() + 2 * sign_flips + 4 * self.n_qubits as u32 - result.y_count();
        Ok((Phase::from_power(k), result))
    }

    /// True iff the two strings commute.
    pub fn commutes(&self, other: &PauliString) -> Result<bool, PauliError> {
        self.check_size(other)?;
        let anti: u32 = (0..self.x.len())
            .map(|w| ((self.x[w] & other.z[w]) ^ (self.z[w] & other.x[w])).count_ones())
            .sum();
        Ok(anti.is_multiple_of(2))
    }

    /// Drops the listed qubits (ascending, no duplicates) and compacts the
    /// remaining ones.
    pub fn remove_qubits(&self, removed: &[usize]) -> PauliString {
        let kept: Vec<usize> = (0..self.n_qubits).filter(|q| !removed.contains(q)).collect();
        let mut out = PauliString::identity(kept.len());
        for (new_q, &old_q) in kept.iter().enumerate() {
            out.set(new_q, self.get(old_q));
        }
        out
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_identity() {
            return write!(f, "I");
        }
        let mut first = true;
        for q in 0..self.n_qubits {
            let l = self.get(q);
            if l != Pauli::I {
                if !first {
                    write!(f, " ")?;
                }
                write!(f, "{}{}", l.symbol(), q)?;
                first = false;
            }
        }
        Ok(())
    }
}

/// `Σ_j h_j P_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliSum {
    n_qubits: usize,
    terms: BTreeMap<PauliString, Complex64>,
}

impl PauliSum {
    pub fn zero(n_qubits: usize) -> Self {
        PauliSum {
            n_qubits,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n_qubits: usize, c: Complex64) -> Self {
        Self::term(PauliString::identity(n_qubits), c)
    }

    pub fn term(p: PauliString, c: Complex64) -> Self {
        let mut s = Self::zero(p.n_qubits());
        s.add_term(p, c);
        s
    }

    pub fn from_terms(
        n_qubits: usize,
        terms: impl IntoIterator<Item = (PauliString, Complex64)>,
    ) -> Result<Self, PauliError> {
        let mut s = Self::zero(n_qubits);
        for (p, c) in terms {
            if p.n_qubits() != n_qubits {
                return Err(PauliError::SizeMismatch(n_qubits, p.n_qubits()));
            }
            s.add_term(p, c);
        }
        Ok(s)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&PauliString, &Complex64)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, p: &PauliString) -> Complex64 {
        self.terms.get(p).copied().unwrap_or_default()
    }

    /// Accumulates `c·p`, dropping the entry if it cancels below
    /// [`PRUNE_TOL`].
    pub fn add_term(&mut self, p: PauliString, c: Complex64) {
        assert_eq!(p.n_qubits(), self.n_qubits, "qubit count mismatch");
        use std::collections::btree_map::Entry;
        match self.terms.entry(p) {
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

    /// Removes terms below [`PRUNE_TOL`].
    pub fn simplify(&mut self) {
        self.terms.retain(|_, c| c.norm() >= PRUNE_TOL);
    }

    pub fn scale(&self, c: Complex64) -> PauliSum {
        let mut out = PauliSum::zero(self.n_qubits);
        for (p, v) in &self.terms {
            out.add_term(p.clone(), v * c);
        }
        out
    }

    pub fn checked_add(&self, other: &PauliSum) -> Result<PauliSum, PauliError> {
        if self.n_qubits != other.n_qubits {
            return Err(PauliError::SizeMismatch(self.n_qubits, other.n_qubits));
        }
        let mut out = self.clone();
        for (p, c) in &other.terms {
            out.add_term(p.clone(), *c);
        }
        Ok(out)
    }

    pub fn checked_mul(&self, other: &PauliSum) -> Result<PauliSum, PauliError> {
        if self.n_qubits != other.n_qubits {
            return Err(PauliError::SizeMismatch(self.n_qubits, other.n_qubits));
        }
        let mut acc: BTreeMap<PauliString, Complex64> = BTreeMap::new();
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                let (phase, p) = a.multiply(b)?;
                *acc.entry(p).or_default() += ca * cb * phase.to_complex();
            }
        }
        let mut out = PauliSum {
            n_qubits: self.n_qubits,
            terms: acc,
        };
        out.simplify();
        Ok(out)
    }

    /// Hermitian adjoint: conjugated coefficients (Pauli strings are
    /// self-adjoint).
    pub fn adjoint(&self) -> PauliSum {
        PauliSum {
            n_qubits: self.n_qubits,
            terms: self.terms.iter().map(|(p, c)| (p.clone(), c.conj())).collect(),
        }
    }

    /// All coefficients real within `tol`.
    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.terms.values().all(|c| c.im.abs() <= tol)
    }

    /// Largest coefficient magnitude difference against `other`.
    pub fn distance(&self, other: &PauliSum) -> f64 {
        let mut d = 0.0f64;
        for (p, c) in &self.terms {
            d = d.max((c - other.coefficient(p)).norm());
        }
        for (p, c) in &other.terms {
            if !self.terms.contains_key(p) {
                d = d.max(c.norm());
            }
        }
        d
    }

    /// Coefficient of the identity string.
    pub fn constant_term(&self) -> Complex64 {
        self.coefficient(&PauliString::identity(self.n_qubits))
    }

    /// Dense `2ⁿ × 2ⁿ` matrix `Σ h_j ⊗_i σ_i^j`, for at most
    /// [`MAX_DENSE_QUBITS`] qubits.
    pub fn matrix(&self) -> Result<DMatrix<Complex64>, PauliError> {
        if self.n_qubits > MAX_DENSE_QUBITS {
            return Err(PauliError::TooLarge(self.n_qubits));
        }
        let dim = 1usize << self.n_qubits;
        let mut m = DMatrix::<Complex64>::zeros(dim, dim);
        for (p, c) in &self.terms {
            let (xm, zm) = (p.x_mask() as usize, p.z_mask() as usize);
            let base = Phase::from_power(p.y_count()).to_complex() * c;
            for b in 0..dim {
                let sign = if (b & zm).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
                m[(b ^ xm, b)] += base * sign;
            }
        }
        Ok(m)
    }

    /// One term per line, `coeff * X0 Z3 Y5`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (p, c) in &self.terms {
            if c.im == 0.0 {
                out.push_str(&format!("{:.12e} * {}\n", c.re, p));
            } else {
                out.push_str(&format!("({:.12e}{:+.12e}j) * {}\n", c.re, c.im, p));
            }
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let terms: Vec<PauliTermRecord> = self
            .terms
            .iter()
            .map(|(p, c)| PauliTermRecord {
                pauli: p.to_string(),
                re: c.re,
                im: c.im,
            })
            .collect();
        serde_json::to_value(terms).expect("plain records serialize")
    }

    pub fn from_json(n_qubits: usize, value: &serde_json::Value) -> Result<Self, PauliError> {
        let records: Vec<PauliTermRecord> =
            serde_json::from_value(value.clone()).map_err(|e| PauliError::Parse(e.to_string()))?;
        let mut out = PauliSum::zero(n_qubits);
        for r in records {
            out.add_term(PauliString::parse(n_qubits, &r.pauli)?, Complex64::new(r.re, r.im));
        }
        Ok(out)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct PauliTermRecord {
    pauli: String,
    re: f64,
    im: f64,
}

impl fmt::Display for PauliSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl Add for &PauliSum {
    type Output = PauliSum;

    /// Panics on qubit-count mismatch; see [`PauliSum::checked_add`].
    fn add(self, rhs: &PauliSum) -> PauliSum {
        self.checked_add(rhs).expect("qubit count mismatch")
    }
}

impl Sub for &PauliSum {
    type Output = PauliSum;

    fn sub(self, rhs: &PauliSum) -> PauliSum {
        self.checked_add(&-rhs).expect("qubit count mismatch")
    }
}

impl Mul for &PauliSum {
    type Output = PauliSum;

    /// Panics on qubit-count mismatch; see [`PauliSum::checked_mul`].
    fn mul(self, rhs: &PauliSum) -> PauliSum {
        self.checked_mul(rhs).expect("qubit count mismatch")
    }
}

impl Neg for &PauliSum {
    type Output = PauliSum;

    fn neg(self) -> PauliSum {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}
