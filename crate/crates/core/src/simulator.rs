//! Statevector simulation: Pauli-exponential gates, exact and shot-sampled
//! expectation values, and an exact-diagonalization reference.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::pauli::{Pauli, PauliString, PauliSum, Phase, MAX_DENSE_QUBITS};

/// Generator used for shot sampling, recorded in run metadata.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng";

/// Largest register the statevector accepts.
pub const MAX_QUBITS: usize = 28;

/// Registers up to this size are diagonalized densely.
pub const DENSE_ORACLE_QUBITS: usize = 6;

const HERMITIAN_TOL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("qubit count mismatch: state has {state}, operator has {operator}")]
    SizeMismatch { state: usize, operator: usize },
    #[error("basis index {index} out of range for {n_qubits} qubits")]
    IndexOutOfRange { index: usize, n_qubits: usize },
    #[error("register of {0} qubits exceeds the limit")]
    TooLarge(usize),
    #[error("observable is not Hermitian (term `{0}` has an imaginary coefficient)")]
    NonHermitian(String),
    #[error("shot count must be at least 1")]
    ZeroShots,
    #[error("amplitude vector has length {found}, expected {expected}")]
    AmplitudeLength { expected: usize, found: usize },
    #[error("state norm {0} differs from 1")]
    NotNormalized(f64),
    #[error("iterative diagonalization stalled with residual {0:e}")]
    NoConvergence(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl Statevector {
    pub fn basis_state(n_qubits: usize, index: usize) -> Result<Self, SimError> {
        if n_qubits > MAX_QUBITS {
            return Err(SimError::TooLarge(n_qubits));
        }
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(SimError::IndexOutOfRange { index, n_qubits });
        }
        let mut amplitudes = vec![Complex64::default(); dim];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(Statevector { n_qubits, amplitudes })
    }

    /// Wraps amplitudes that already have unit norm (within 1e-10).
    pub fn from_amplitudes(n_qubits: usize, amplitudes: Vec<Complex64>) -> Result<Self, SimError> {
        if n_qubits > MAX_QUBITS {
            return Err(SimError::TooLarge(n_qubits));
        }
        if amplitudes.len() != 1 << n_qubits {
            return Err(SimError::AmplitudeLength {
                expected: 1 << n_qubits,
                found: amplitudes.len(),
            });
        }
        let state = Statevector { n_qubits, amplitudes };
        let norm = state.norm();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(SimError::NotNormalized(norm));
        }
        Ok(state)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn inner(&self, other: &Statevector) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    fn check(&self, p: &PauliString) -> Result<(), SimError> {
        if p.n_qubits() != self.n_qubits {
            return Err(SimError::SizeMismatch {
                state: self.n_qubits,
                operator: p.n_qubits(),
            });
        }
        Ok(())
    }

    /// `state ← P·state`.
    pub fn apply_pauli(&mut self, p: &PauliString) -> Result<(), SimError> {
        self.check(p)?;
        let (xm, zm) = (p.x_mask() as usize, p.z_mask() as usize);
        let base = Phase::from_power(p.y_count()).to_complex();
        let mut out = vec![Complex64::default(); self.amplitudes.len()];
        for (b, a) in self.amplitudes.iter().enumerate() {
            out[b ^ xm] = base * parity_sign(b & zm) * a;
        }
        self.amplitudes = out;
        Ok(())
    }

    /// `state ← exp(i·angle·P/2)·state`. The identity string contributes
    /// only a global phase and leaves the state untouched.
    pub fn apply_pauli_exponential(&mut self, p: &PauliString, angle: f64) -> Result<(), SimError> {
        self.check(p)?;
        if p.is_identity() || angle == 0.0 {
            return Ok(());
        }
        let (xm, zm) = (p.x_mask() as usize, p.z_mask() as usize);
        let (c, s) = ((angle / 2.0).cos(), (angle / 2.0).sin());
        let is = Complex64::new(0.0, s) * Phase::from_power(p.y_count()).to_complex();
        if xm == 0 {
            for (b, a) in self.amplitudes.iter_mut().enumerate() {
                *a *= c + is * parity_sign(b & zm);
            }
            return Ok(());
        }
        let top = 1usize << (usize::BITS - 1 - xm.leading_zeros());
        for b in 0..self.amplitudes.len() {
            if b & top != 0 {
                continue;
            }
            let b2 = b ^ xm;
            let (a1, a2) = (self.amplitudes[b], self.amplitudes[b2]);
            self.amplitudes[b] = c * a1 + is * parity_sign(b2 & zm) * a2;
            self.amplitudes[b2] = c * a2 + is * parity_sign(b & zm) * a1;
        }
        Ok(())
    }

    /// Controlled-Z between qubits `a` and `b`.
    pub fn apply_cz(&mut self, a: usize, b: usize) -> Result<(), SimError> {
        for q in [a, b] {
            if q >= self.n_qubits {
                return Err(SimError::IndexOutOfRange {
                    index: q,
                    n_qubits: self.n_qubits,
                });
            }
        }
        let mask = (1usize << a) | (1usize << b);
        for (i, amp) in self.amplitudes.iter_mut().enumerate() {
            if i & mask == mask {
                *amp = -*amp;
            }
        }
        Ok(())
    }

    /// `⟨ψ|P|ψ⟩` for one string.
    pub fn pauli_expectation(&self, p: &PauliString) -> Result<Complex64, SimError> {
        self.check(p)?;
        Ok(pauli_expectation_unchecked(&self.amplitudes, p))
    }

    fn apply_hadamard(&mut self, q: usize) {
        let bit = 1usize << q;
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for b in 0..self.amplitudes.len() {
            if b & bit == 0 {
                let (a0, a1) = (self.amplitudes[b], self.amplitudes[b | bit]);
                self.amplitudes[b] = h * (a0 + a1);
                self.amplitudes[b | bit] = h * (a0 - a1);
            }
        }
    }

    fn apply_s_dagger(&mut self, q: usize) {
        let bit = 1usize << q;
        for (b, a) in self.amplitudes.iter_mut().enumerate() {
            if b & bit != 0 {
                *a *= Complex64::new(0.0, -1.0);
            }
        }
    }
}

fn parity_sign(bits: usize) -> f64 {
    if bits.count_ones() % 2 == 1 {
        -1.0
    } else {
        1.0
    }
}

fn pauli_expectation_unchecked(amps: &[Complex64], p: &PauliString) -> Complex64 {
    let (xm, zm) = (p.x_mask() as usize, p.z_mask() as usize);
    let base = Phase::from_power(p.y_count()).to_complex();
    let acc: Complex64 = amps
        .iter()
        .enumerate()
        .map(|(b, a)| amps[b ^ xm].conj() * a * parity_sign(b & zm))
        .sum();
    base * acc
}

fn check_observable(state: &Statevector, obs: &PauliSum) -> Result<(), SimError> {
    if obs.n_qubits() != state.n_qubits {
        return Err(SimError::SizeMismatch {
            state: state.n_qubits,
            operator: obs.n_qubits(),
        });
    }
    if let Some((p, _)) = obs.terms().find(|(_, c)| c.im.abs() > HERMITIAN_TOL) {
        return Err(SimError::NonHermitian(p.to_string()));
    }
    Ok(())
}

/// `Σ_j h_j ⟨ψ|P_j|ψ⟩` for a Hermitian observable.
pub fn expectation_exact(state: &Statevector, obs: &PauliSum) -> Result<f64, SimError> {
    check_observable(state, obs)?;
    let terms: Vec<(&PauliString, &Complex64)> = obs.terms().collect();
    let value: f64 = terms
        .par_iter()
        .map(|(p, c)| (pauli_expectation_unchecked(&state.amplitudes, p) * *c).re)
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    Ok(value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShotPlan {
    pub shots_per_term: u64,
    pub seed: u64,
}

impl ShotPlan {
    pub fn new(shots_per_term: u64, seed: u64) -> Result<Self, SimError> {
        if shots_per_term == 0 {
            return Err(SimError::ZeroShots);
        }
        Ok(ShotPlan { shots_per_term, seed })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledEstimate {
    pub mean: f64,
    pub stderr: f64,
}

/// Shot-sampled estimate of a Hermitian observable.
///
/// Each non-identity term is measured in its own eigenbasis with
/// `shots_per_term` samples drawn from stream `j` of the seeded generator,
/// so the result does not depend on scheduling.
pub fn expectation_sampled(state: &Statevector, obs: &PauliSum, plan: &ShotPlan) -> Result<SampledEstimate, SimError> {
    check_observable(state, obs)?;
    if plan.shots_per_term == 0 {
        return Err(SimError::ZeroShots);
    }
    let terms: Vec<(usize, &PauliString, f64)> = obs.terms().enumerate().map(|(j, (p, c))| (j, p, c.re)).collect();
    let per_term: Vec<(f64, f64)> = terms
        .par_iter()
        .map(|&(j, p, h)| {
            if p.is_identity() {
                return (h, 0.0);
            }
            let (mean, var) = sample_term(state, p, plan, j as u64);
            (h * mean, h * h * var / plan.shots_per_term as f64)
        })
        .collect();
    let mean = per_term.iter().map(|(m, _)| m).sum();
    let stderr = per_term.iter().map(|(_, v)| v).sum::<f64>().sqrt();
    Ok(SampledEstimate { mean, stderr })
}

/// Sample mean and sample variance of the ±1 parity outcomes.
fn sample_term(state: &Statevector, p: &PauliString, plan: &ShotPlan, stream: u64) -> (f64, f64) {
    let mut rotated = state.clone();
    for q in 0..p.n_qubits() {
        match p.get(q) {
            Pauli::X => rotated.apply_hadamard(q),
            Pauli::Y => {
                rotated.apply_s_dagger(q);
                rotated.apply_hadamard(q);
            }
            _ => {}
        }
    }
    let mut cumulative = Vec::with_capacity(rotated.amplitudes.len());
    let mut total = 0.0;
    for a in &rotated.amplitudes {
        total += a.norm_sqr();
        cumulative.push(total);
    }
    let support = (p.x_mask() | p.z_mask()) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    rng.set_stream(stream);
    let shots = plan.shots_per_term;
    let mut sum = 0.0;
    for _ in 0..shots {
        let u: f64 = rng.gen::<f64>() * total;
        let b = cumulative.partition_point(|&c| c <= u).min(cumulative.len() - 1);
        sum += parity_sign(b & support);
    }
    let mean = sum / shots as f64;
    let var = if shots > 1 {
        (1.0 - mean * mean).max(0.0) * shots as f64 / (shots - 1) as f64
    } else {
        0.0
    };
    (mean, var)
}

#[derive(Debug, Clone)]
pub struct GroundState {
    pub energy: f64,
    pub state: Statevector,
    /// `‖Hv − Ev‖`.
    pub residual: f64,
}

/// Lowest eigenpair of a Hermitian observable on at most 12 qubits, dense up
/// to six qubits and Lanczos above.
pub fn exact_ground_energy(obs: &PauliSum) -> Result<GroundState, SimError> {
    let n = obs.n_qubits();
    if n > MAX_DENSE_QUBITS {
        return Err(SimError::TooLarge(n));
    }
    if let Some((p, _)) = obs.terms().find(|(_, c)| c.im.abs() > HERMITIAN_TOL) {
        return Err(SimError::NonHermitian(p.to_string()));
    }
    let op = SparsePauliOperator::new(obs);
    let (energy, vector) = if n <= DENSE_ORACLE_QUBITS {
        let m = obs.matrix().map_err(|_| SimError::TooLarge(n))?;
        let eig = m.symmetric_eigen();
        let k = eig.eigenvalues.imin();
        (eig.eigenvalues[k], eig.eigenvectors.column(k).into_owned())
    } else {
        lanczos_ground(&op)?
    };
    let hv = op.apply(&vector);
    let residual = (&hv - &vector * Complex64::new(energy, 0.0)).norm();
    let norm = vector.norm();
    let amplitudes = vector.iter().map(|a| a / norm).collect();
    Ok(GroundState {
        energy,
        state: Statevector {
            n_qubits: n,
            amplitudes,
        },
        residual,
    })
}

/// Observable grouped by X-mask: `H = Σ_x X^x D_x` with diagonal `D_x`.
struct SparsePauliOperator {
    groups: Vec<(usize, Vec<Complex64>)>,
    dim: usize,
}

impl SparsePauliOperator {
    fn new(obs: &PauliSum) -> Self {
        let dim = 1usize << obs.n_qubits();
        let mut groups: BTreeMap<usize, Vec<Complex64>> = BTreeMap::new();
        for (p, c) in obs.terms() {
            let (xm, zm) = (p.x_mask() as usize, p.z_mask() as usize);
            let base = Phase::from_power(p.y_count()).to_complex() * c;
            let d = groups.entry(xm).or_insert_with(|| vec![Complex64::default(); dim]);
            for (b, v) in d.iter_mut().enumerate() {
                *v += base * parity_sign(b & zm);
            }
        }
        SparsePauliOperator {
            groups: groups.into_iter().collect(),
            dim,
        }
    }

    fn apply(&self, v: &DVector<Complex64>) -> DVector<Complex64> {
        let mut out = DVector::zeros(self.dim);
        for (xm, d) in &self.groups {
            for b in 0..self.dim {
                out[b ^ xm] += d[b] * v[b];
            }
        }
        out
    }
}

/// Restarted Lanczos with full reorthogonalization.
fn lanczos_ground(op: &SparsePauliOperator) -> Result<(f64, DVector<Complex64>), SimError> {
    const KRYLOV: usize = 80;
    const RESTARTS: usize = 60;
    const TARGET: f64 = 1e-11;
    let dim = op.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(0x1a2c_20c5);
    let mut start = DVector::from_fn(dim, |_, _| {
        Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
    });
    start /= Complex64::new(start.norm(), 0.0);
    let mut best = (f64::INFINITY, start.clone(), f64::INFINITY);
    for _ in 0..RESTARTS {
        let m = KRYLOV.min(dim);
        let mut basis: Vec<DVector<Complex64>> = vec![start.clone()];
        let mut alpha = Vec::with_capacity(m);
        let mut beta: Vec<f64> = Vec::with_capacity(m);
        for j in 0..m {
            let mut w = op.apply(&basis[j]);
            alpha.push(basis[j].dotc(&w).re);
            for _ in 0..2 {
                for v in &basis {
                    let overlap = v.dotc(&w);
                    w -= v * overlap;
                }
            }
            let b = w.norm();
            if j + 1 == m || b < 1e-14 {
                break;
            }
            beta.push(b);
            basis.push(w / Complex64::new(b, 0.0));
        }
        let k = alpha.len();
        let t = DMatrix::from_fn(k, k, |r, c| {
            if r == c {
                alpha[r]
            } else if r + 1 == c {
                beta[r]
            } else if c + 1 == r {
                beta[c]
            } else {
                0.0
            }
        });
        let eig = t.symmetric_eigen();
        let i = eig.eigenvalues.imin();
        let theta = eig.eigenvalues[i];
        let y = eig.eigenvectors.column(i);
        let mut ritz = DVector::<Complex64>::zeros(dim);
        for (coef, v) in y.iter().zip(&basis) {
            ritz += v * Complex64::new(*coef, 0.0);
        }
        ritz /= Complex64::new(ritz.norm(), 0.0);
        let residual = (op.apply(&ritz) - &ritz * Complex64::new(theta, 0.0)).norm();
        if residual < best.2 {
            best = (theta, ritz.clone(), residual);
        }
        if residual < TARGET {
            break;
        }
        start = ritz;
    }
    if best.2 < 1e-9 {
        Ok((best.0, best.1))
    } else {
        Err(SimError::NoConvergence(best.2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fermion::build_hamiltonian;
    use crate::geometry::MolecularGeometry;
    use crate::integrals::{complete_active_space, compute_integrals_s, sto3g_shells};
    use crate::mapping::{map_operator, Encoding, EncodingSpec};
    use proptest::prelude::{prop_assert, proptest, Strategy};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn plus_state() -> Statevector {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Statevector::from_amplitudes(1, vec![c(h), c(h)]).unwrap()
    }

    fn random_state(n: usize, seed: u64) -> Statevector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v: Vec<Complex64> = (0..1 << n)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        let norm = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        v.iter_mut().for_each(|a| *a /= norm);
        Statevector::from_amplitudes(n, v).unwrap()
    }

    fn random_observable(n: usize, n_terms: usize, seed: u64) -> PauliSum {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = PauliSum::zero(n);
        for _ in 0..n_terms {
            let letters: Vec<Pauli> = (0..n)
                .map(|_| [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z][rng.gen_range(0..4)])
                .collect();
            s.add_term(PauliString::from_letters(&letters), c(rng.gen_range(-1.0..1.0)));
        }
        s
    }

    /// `exp(iθA/2)` for Hermitian `A` via its eigendecomposition.
    fn dense_exponential(a: DMatrix<Complex64>, theta: f64) -> DMatrix<Complex64> {
        let eig = a.symmetric_eigen();
        let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| Complex64::new(0.0, theta * l / 2.0).exp()));
        &eig.eigenvectors * d * eig.eigenvectors.adjoint()
    }

    fn h2_qubit_hamiltonian() -> PauliSum {
        let geom = MolecularGeometry::from_angstrom(&[("H", [0.0; 3]), ("H", [0.0, 0.0, 0.735])]).unwrap();
        let ints = compute_integrals_s(&geom, &sto3g_shells(&geom).unwrap()).unwrap();
        let h = build_hamiltonian(&complete_active_space(&ints, 2, 2).unwrap());
        map_operator(&h, &EncodingSpec::new(Encoding::JordanWigner, 4).unwrap()).unwrap()
    }

    #[test]
    fn basis_state_examples() {
        let s = Statevector::basis_state(1, 0).unwrap();
        assert_eq!(s.amplitudes(), &[c(1.0), c(0.0)]);
        let s = Statevector::basis_state(2, 3).unwrap();
        assert_eq!(s.amplitudes()[3], c(1.0));
        assert_eq!(s.norm(), 1.0);
        assert_eq!(
            Statevector::basis_state(2, 4),
            Err(SimError::IndexOutOfRange { index: 4, n_qubits: 2 })
        );
        assert!(matches!(
            Statevector::from_amplitudes(1, vec![c(1.0), c(1.0)]),
            Err(SimError::NotNormalized(_))
        ));
    }

    #[test]
    fn exponential_examples() {
        let z = PauliString::parse(1, "Z0").unwrap();
        let x = PauliString::parse(1, "X0").unwrap();
        let mut s = Statevector::basis_state(1, 0).unwrap();
        s.apply_pauli_exponential(&x, 0.0).unwrap();
        assert_eq!(s, Statevector::basis_state(1, 0).unwrap());

        let theta = 0.7;
        s.apply_pauli_exponential(&z, theta).unwrap();
        assert!((s.amplitudes()[0] - Complex64::new(0.0, theta / 2.0).exp()).norm() < 1e-15);
        let zsum = PauliSum::term(z.clone(), c(1.0));
        assert!((expectation_exact(&s, &zsum).unwrap() - 1.0).abs() < 1e-15);

        let mut s = Statevector::basis_state(1, 0).unwrap();
        s.apply_pauli_exponential(&x, std::f64::consts::PI).unwrap();
        assert!((s.amplitudes()[1] - Complex64::new(0.0, 1.0)).norm() < 1e-15);
        assert!(s.amplitudes()[0].norm() < 1e-15);

        let mut s = Statevector::basis_state(1, 0).unwrap();
        assert!(s.apply_pauli_exponential(&PauliString::identity(2), 0.1).is_err());
    }

    #[test]
    fn exponential_matches_dense_oracle() {
        for seed in 0..20u64 {
            let n = 1 + (seed as usize % 4);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let letters: Vec<Pauli> = (0..n)
                .map(|_| [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z][rng.gen_range(0..4)])
                .collect();
            let p = PauliString::from_letters(&letters);
            let theta = rng.gen_range(-3.0..3.0);
            let state = random_state(n, seed + 100);
            let mut s = state.clone();
            s.apply_pauli_exponential(&p, theta).unwrap();
            let u = dense_exponential(PauliSum::term(p.clone(), c(1.0)).matrix().unwrap(), theta);
            let expected = u * DVector::from_column_slice(state.amplitudes());
            let got = DVector::from_column_slice(s.amplitudes());
            if p.is_identity() {
                assert_eq!(s, state);
            } else {
                assert!((expected - got).norm() < 1e-12, "{p} {theta}");
            }
        }
    }

    #[test]
    fn expectation_examples() {
        let zsum = PauliSum::term(PauliString::parse(1, "Z0").unwrap(), c(1.0));
        let zero = Statevector::basis_state(1, 0).unwrap();
        assert_eq!(expectation_exact(&zero, &zsum).unwrap(), 1.0);
        assert!(expectation_exact(&plus_state(), &zsum).unwrap().abs() < 1e-15);
        let bad = PauliSum::term(PauliString::parse(1, "Z0").unwrap(), Complex64::new(0.0, 1.0));
        assert!(matches!(expectation_exact(&zero, &bad), Err(SimError::NonHermitian(_))));
    }

    #[test]
    fn expectation_matches_dense_oracle() {
        for seed in 0..10 {
            let state = random_state(3, seed);
            let obs = random_observable(3, 8, seed + 50);
            let psi = DVector::from_column_slice(state.amplitudes());
            let expected = (psi.adjoint() * obs.matrix().unwrap() * &psi)[(0, 0)].re;
            assert!((expectation_exact(&state, &obs).unwrap() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn sampled_examples() {
        let zsum = PauliSum::term(PauliString::parse(1, "Z0").unwrap(), c(1.0));
        let zero = Statevector::basis_state(1, 0).unwrap();
        let plan = ShotPlan::new(17, 3).unwrap();
        assert_eq!(
            expectation_sampled(&zero, &zsum, &plan).unwrap(),
            SampledEstimate { mean: 1.0, stderr: 0.0 }
        );

        let plan = ShotPlan::new(10_000, 42).unwrap();
        let est = expectation_sampled(&plus_state(), &zsum, &plan).unwrap();
        assert!(est.mean.abs() < 5.0 * est.stderr);
        let ratio = est.stderr / (1.0 / 100.0);
        assert!((1.0 / 1.2..1.2).contains(&ratio));

        let ident = PauliSum::constant(1, c(-0.37));
        let est = expectation_sampled(&plus_state(), &ident, &plan).unwrap();
        assert_eq!(
            est,
            SampledEstimate {
                mean: -0.37,
                stderr: 0.0
            }
        );

        assert_eq!(ShotPlan::new(0, 1), Err(SimError::ZeroShots));
    }

    #[test]
    fn sampled_is_deterministic_per_seed() {
        let obs = random_observable(3, 6, 9);
        let state = random_state(3, 9);
        let plan = ShotPlan::new(500, 77).unwrap();
        let a = expectation_sampled(&state, &obs, &plan).unwrap();
        let b = expectation_sampled(&state, &obs, &plan).unwrap();
        assert_eq!(a, b);
        let c2 = expectation_sampled(&state, &obs, &ShotPlan::new(500, 78).unwrap()).unwrap();
        assert_ne!(a.mean, c2.mean);
    }

    #[test]
    fn sampled_stderr_is_calibrated() {
        let obs = h2_qubit_hamiltonian();
        let state = random_state(4, 5);
        let exact = expectation_exact(&state, &obs).unwrap();
        let shots = 10_000;
        let estimates: Vec<SampledEstimate> = (0..50)
            .map(|seed| expectation_sampled(&state, &obs, &ShotPlan::new(shots, seed).unwrap()).unwrap())
            .collect();
        let means: Vec<f64> = estimates.iter().map(|e| e.mean).collect();
        let avg = means.iter().sum::<f64>() / means.len() as f64;
        let spread = (means.iter().map(|m| (m - avg).powi(2)).sum::<f64>() / (means.len() - 1) as f64).sqrt();
        let reported = estimates.iter().map(|e| e.stderr).sum::<f64>() / estimates.len() as f64;
        assert!(
            (spread / reported - 1.0).abs() < 0.2,
            "spread {spread} reported {reported}"
        );
        assert!((avg - exact).abs() < 5.0 * reported / (means.len() as f64).sqrt());
    }

    #[test]
    fn ground_energy_examples() {
        let minus_z = PauliSum::term(PauliString::parse(1, "Z0").unwrap(), c(-1.0));
        let g = exact_ground_energy(&minus_z).unwrap();
        assert!((g.energy + 1.0).abs() < 1e-14);
        assert!((g.state.amplitudes()[0].norm() - 1.0).abs() < 1e-14);

        let h = PauliSum::from_terms(
            2,
            [
                (PauliString::parse(2, "X0 X1").unwrap(), c(1.0)),
                (PauliString::parse(2, "Z0 Z1").unwrap(), c(1.0)),
            ],
        )
        .unwrap();
        assert!((exact_ground_energy(&h).unwrap().energy + 2.0).abs() < 1e-12);
        assert!(matches!(
            exact_ground_energy(&PauliSum::zero(13)),
            Err(SimError::TooLarge(13))
        ));
    }

    #[test]
    fn h2_ground_matches_fock_space_oracle() {
        let geom = MolecularGeometry::from_angstrom(&[("H", [0.0; 3]), ("H", [0.0, 0.0, 0.735])]).unwrap();
        let ints = compute_integrals_s(&geom, &sto3g_shells(&geom).unwrap()).unwrap();
        let fermion = build_hamiltonian(&complete_active_space(&ints, 2, 2).unwrap());
        let fock = fermion.matrix().unwrap().symmetric_eigen();
        let expected = fock.eigenvalues.min();
        let g = exact_ground_energy(&h2_qubit_hamiltonian()).unwrap();
        assert!((g.energy - expected).abs() < 1e-10);
        assert!(g.residual < 1e-9);
    }

    #[test]
    fn lanczos_matches_dense_on_larger_registers() {
        for (n, seed) in [(7, 1), (8, 2), (9, 3)] {
            let obs = random_observable(n, 40, seed);
            let g = exact_ground_energy(&obs).unwrap();
            let dense = obs.matrix().unwrap().symmetric_eigen().eigenvalues.min();
            assert!((g.energy - dense).abs() < 1e-10, "n={n}");
            assert!(g.residual < 1e-9);
            let e = expectation_exact(&g.state, &obs).unwrap();
            assert!((e - g.energy).abs() < 1e-10);
        }
    }

    #[test]
    fn norm_survives_long_circuits() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut s = random_state(5, 4);
        for _ in 0..2000 {
            let letters: Vec<Pauli> = (0..5)
                .map(|_| [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z][rng.gen_range(0..4)])
                .collect();
            s.apply_pauli_exponential(&PauliString::from_letters(&letters), rng.gen_range(-3.0..3.0))
                .unwrap();
        }
        assert!((s.norm() - 1.0).abs() < 1e-9);
    }

    fn string(n: usize) -> impl Strategy<Value = PauliString> {
        proptest::collection::vec(0..4usize, n).prop_map(|v| {
            PauliString::from_letters(
                &v.iter()
                    .map(|k| [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z][*k])
                    .collect::<Vec<_>>(),
            )
        })
    }

    proptest! {
        #[test]
        fn exponential_inverse_and_norm(p in string(4), theta in -6.0f64..6.0, seed in 0u64..1000) {
            let state = random_state(4, seed);
            let mut s = state.clone();
            s.apply_pauli_exponential(&p, theta).unwrap();
            prop_assert!((s.norm() - 1.0).abs() < 1e-12);
            s.apply_pauli_exponential(&p, -theta).unwrap();
            let diff: f64 = s.amplitudes().iter().zip(state.amplitudes()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            prop_assert!(diff < 1e-12);
        }

        #[test]
        fn variational_bound(seed in 0u64..1000) {
            let obs = random_observable(3, 6, seed);
            let ground = exact_ground_energy(&obs).unwrap().energy;
            let e = expectation_exact(&random_state(3, seed ^ 0xff), &obs).unwrap();
            prop_assert!(e >= ground - 1e-10);
        }
    }
}
