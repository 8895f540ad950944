//! One- and two-electron integrals and active-space embedding.
//!
//! Two-electron integrals are kept in chemist notation `(pq|rs)` and stored
//! once per 8-fold permutation class.

mod fcidump;
mod gaussian;
mod scf;

pub use fcidump::{parse_fcidump, write_fcidump, FcidumpError};
pub use gaussian::{ao_integrals, boys_f0, sto3g_shells, AoIntegrals, GaussianShell};
pub use scf::{compute_integrals_s, hartree_fock_s, HartreeFockResult};

use nalgebra::DMatrix;
use thiserror::Error;

use crate::geometry::GeometryError;

/// Symmetry tolerance for integral tensors.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum IntegralError {
    #[error("only s-type shells are supported (got angular momentum {0})")]
    NonSShell(u32),
    #[error("invalid shell: {0}")]
    InvalidShell(String),
    #[error("built-in integrals support only H and He (found {0})")]
    UnsupportedElement(String),
    #[error("SCF did not converge in {iterations} iterations (last density change {last_change:e})")]
    ScfNotConverged { iterations: usize, last_change: f64 },
    #[error("restricted Hartree-Fock needs a closed-shell singlet: {0}")]
    OpenShell(String),
    #[error("overlap matrix is singular (smallest eigenvalue {0:e})")]
    LinearDependence(f64),
    #[error("one-electron matrix is not symmetric at ({0}, {1})")]
    AsymmetricOneBody(usize, usize),
    #[error("electron count {0} must be even")]
    OddElectrons(usize),
    #[error("too many electrons: {electrons} in {orbitals} spatial orbitals")]
    TooManyElectrons { electrons: usize, orbitals: usize },
    #[error("active orbital {0} out of range")]
    ActiveOutOfRange(usize),
    #[error("active orbital {0} listed twice")]
    ActiveRepeated(usize),
    #[error("inactive electron count {0} is odd or negative")]
    InactiveElectrons(i64),
    #[error("need {needed} inactive orbitals outside the active set but only {available} exist")]
    InactiveOverlap { needed: usize, available: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[inline]
fn tri(a: usize, b: usize) -> usize {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi * (hi + 1) / 2 + lo
}

/// Two-electron integrals `(pq|rs)` stored once per 8-fold permutation class.
#[derive(Debug, Clone, PartialEq)]
pub struct ChemistEri {
    n: usize,
    data: Vec<f64>,
}

impl ChemistEri {
    pub fn zeros(n: usize) -> Self {
        let pairs = n * (n + 1) / 2;
        ChemistEri {
            n,
            data: vec![0.0; pairs * (pairs + 1) / 2],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn index(p: usize, q: usize, r: usize, s: usize) -> usize {
        tri(tri(p, q), tri(r, s))
    }

    #[inline]
    pub fn get(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        self.data[Self::index(p, q, r, s)]
    }

    /// Sets `(pq|rs)` and, implicitly, all of its permutation images.
    #[inline]
    pub fn set(&mut self, p: usize, q: usize, r: usize, s: usize, value: f64) {
        let i = Self::index(p, q, r, s);
        self.data[i] = value;
    }

    /// Canonical representatives `(p, q, r, s)` with `p ≥ q`, `r ≥ s`,
    /// `pq ≥ rs`, in storage order.
    pub fn canonical_indices(n: usize) -> impl Iterator<Item = (usize, usize, usize, usize)> {
        (0..n).flat_map(move |p| {
            (0..=p).flat_map(move |q| {
                (0..=p).flat_map(move |r| {
                    let s_max = if r == p { q } else { r };
                    (0..=s_max).map(move |s| (p, q, r, s))
                })
            })
        })
    }

    /// Expands into a dense `n⁴` array indexed `((p*n + q)*n + r)*n + s`.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n * n * n];
        for p in 0..n {
            for q in 0..n {
                for r in 0..n {
                    for s in 0..n {
                        out[((p * n + q) * n + r) * n + s] = self.get(p, q, r, s);
                    }
                }
            }
        }
        out
    }

    /// Restriction to the listed orbitals, in the listed order.
    pub fn restrict(&self, orbitals: &[usize]) -> ChemistEri {
        let mut out = ChemistEri::zeros(orbitals.len());
        for (p, q, r, s) in Self::canonical_indices(orbitals.len()) {
            out.set(p, q, r, s, self.get(orbitals[p], orbitals[q], orbitals[r], orbitals[s]));
        }
        out
    }
}

/// Molecular-orbital integrals of a closed-shell electronic Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralSet {
    n_spatial: usize,
    h: DMatrix<f64>,
    g: ChemistEri,
    e_nn: f64,
    n_electrons: usize,
    ms2: u32,
}

impl IntegralSet {
    pub fn new(h: DMatrix<f64>, g: ChemistEri, e_nn: f64, n_electrons: usize) -> Result<Self, IntegralError> {
        let n = h.nrows();
        assert_eq!(h.ncols(), n, "one-electron matrix must be square");
        assert_eq!(g.n(), n, "two-electron tensor dimension");
        for p in 0..n {
            for q in 0..p {
                if (h[(p, q)] - h[(q, p)]).abs() > SYMMETRY_TOL {
                    return Err(IntegralError::AsymmetricOneBody(p, q));
                }
            }
        }
        if !n_electrons.is_multiple_of(2) {
            return Err(IntegralError::OddElectrons(n_electrons));
        }
        if n_electrons > 2 * n {
            return Err(IntegralError::TooManyElectrons {
                electrons: n_electrons,
                orbitals: n,
            });
        }
        Ok(IntegralSet {
            n_spatial: n,
            h,
            g,
            e_nn,
            n_electrons,
            ms2: 0,
        })
    }

    pub fn n_spatial(&self) -> usize {
        self.n_spatial
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn g(&self) -> &ChemistEri {
        &self.g
    }

    pub fn e_nn(&self) -> f64 {
        self.e_nn
    }

    pub fn n_electrons(&self) -> usize {
        self.n_electrons
    }

    pub fn ms2(&self) -> u32 {
        self.ms2
    }

    /// Closed-shell determinant energy with the lowest `n_electrons / 2`
    /// orbitals doubly occupied.
    pub fn reference_energy(&self) -> f64 {
        let occ = self.n_electrons / 2;
        let mut e = self.e_nn;
        for i in 0..occ {
            e += 2.0 * self.h[(i, i)];
            for j in 0..occ {
                e += 2.0 * self.g.get(i, i, j, j) - self.g.get(i, j, j, i);
            }
        }
        e
    }
}

/// Active-space Hamiltonian with inactive electrons folded into `h_eff` and
/// `core_energy`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveSpaceHamiltonian {
    pub n_active: usize,
    pub h_eff: DMatrix<f64>,
    pub g_active: ChemistEri,
    /// Inactive-electron energy plus nuclear repulsion.
    pub core_energy: f64,
    pub n_active_electrons: usize,
}

/// Embeds `ints` into the active orbitals.
///
/// Inactive occupied orbitals are the lowest-index orbitals outside the
/// active set; input orbitals are assumed energy-ordered.
pub fn embed_active_space(
    ints: &IntegralSet,
    active_orbitals: &[usize],
    n_active_electrons: usize,
) -> Result<ActiveSpaceHamiltonian, IntegralError> {
    let m = ints.n_spatial;
    let mut seen = vec![false; m];
    for &a in active_orbitals {
        if a >= m {
            return Err(IntegralError::ActiveOutOfRange(a));
        }
        if seen[a] {
            return Err(IntegralError::ActiveRepeated(a));
        }
        seen[a] = true;
    }
    let inactive_electrons = ints.n_electrons as i64 - n_active_electrons as i64;
    if inactive_electrons < 0 || inactive_electrons % 2 != 0 {
        return Err(IntegralError::InactiveElectrons(inactive_electrons));
    }
    if n_active_electrons > 2 * active_orbitals.len() {
        return Err(IntegralError::TooManyElectrons {
            electrons: n_active_electrons,
            orbitals: active_orbitals.len(),
        });
    }
    let n_inactive = (inactive_electrons / 2) as usize;
    let candidates: Vec<usize> = (0..m).filter(|p| !seen[*p]).collect();
    if candidates.len() < n_inactive {
        return Err(IntegralError::InactiveOverlap {
            needed: n_inactive,
            available: candidates.len(),
        });
    }
    let inactive = &candidates[..n_inactive];
    let n_act = active_orbitals.len();

    if inactive.is_empty() {
        let identity_order = active_orbitals.iter().enumerate().all(|(i, &a)| i == a) && n_act == m;
        let (h_eff, g_active) = if identity_order {
            (ints.h.clone(), ints.g.clone())
        } else {
            (
                DMatrix::from_fn(n_act, n_act, |u, v| ints.h[(active_orbitals[u], active_orbitals[v])]),
                ints.g.restrict(active_orbitals),
            )
        };
        return Ok(ActiveSpaceHamiltonian {
            n_active: n_act,
            h_eff,
            g_active,
            core_energy: ints.e_nn,
            n_active_electrons,
        });
    }

    let g = &ints.g;
    let h_eff = DMatrix::from_fn(n_act, n_act, |u, v| {
        let (pu, pv) = (active_orbitals[u], active_orbitals[v]);
        let mut f = ints.h[(pu, pv)];
        for &i in inactive {
            f += 2.0 * g.get(pu, pv, i, i) - g.get(pu, i, i, pv);
        }
        f
    });
    let mut core = ints.e_nn;
    for &i in inactive {
        core += 2.0 * ints.h[(i, i)];
    }
    for &i in inactive {
        for &j in inactive {
            core += 2.0 * g.get(i, i, j, j) - g.get(i, j, j, i);
        }
    }
    Ok(ActiveSpaceHamiltonian {
        n_active: n_act,
        h_eff,
        g_active: g.restrict(active_orbitals),
        core_energy: core,
        n_active_electrons,
    })
}

/// CAS(`n_active_electrons`, `n_active_orbitals`) around the Fermi level:
/// the lowest `(N − n_active_electrons)/2` orbitals are inactive and the next
/// `n_active_orbitals` are active.
pub fn complete_active_space(
    ints: &IntegralSet,
    n_active_electrons: usize,
    n_active_orbitals: usize,
) -> Result<ActiveSpaceHamiltonian, IntegralError> {
    let inactive_electrons = ints.n_electrons as i64 - n_active_electrons as i64;
    if inactive_electrons < 0 || inactive_electrons % 2 != 0 {
        return Err(IntegralError::InactiveElectrons(inactive_electrons));
    }
    let first = (inactive_electrons / 2) as usize;
    let active: Vec<usize> = (first..first + n_active_orbitals).collect();
    if let Some(&last) = active.last() {
        if last >= ints.n_spatial {
            return Err(IntegralError::ActiveOutOfRange(last));
        }
    }
    embed_active_space(ints, &active, n_active_electrons)
}

impl ActiveSpaceHamiltonian {
    /// Identity embedding of the whole orbital space.
    pub fn full_space(ints: &IntegralSet) -> Self {
        ActiveSpaceHamiltonian {
            n_active: ints.n_spatial,
            h_eff: ints.h.clone(),
            g_active: ints.g.clone(),
            core_energy: ints.e_nn,
            n_active_electrons: ints.n_electrons,
        }
    }

    pub fn n_spin_orbitals(&self) -> usize {
        2 * self.n_active
    }
}
