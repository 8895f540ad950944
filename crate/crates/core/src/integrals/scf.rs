//! Restricted Hartree-Fock for s-shell molecules and the AO→MO transform.

use nalgebra::{DMatrix, SymmetricEigen};

use super::gaussian::{ao_integrals, AoIntegrals, GaussianShell};
use super::{ChemistEri, IntegralError, IntegralSet};
use crate::geometry::MolecularGeometry;

const MAX_ITERATIONS: usize = 200;
const DENSITY_TOL: f64 = 1e-10;
const MIXING: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct HartreeFockResult {
    /// Integrals in the canonical MO basis, orbitals in ascending energy.
    pub integrals: IntegralSet,
    /// Total RHF energy including nuclear repulsion.
    pub energy: f64,
    pub orbital_energies: Vec<f64>,
    /// AO→MO coefficients, one column per MO.
    pub coefficients: DMatrix<f64>,
    pub iterations: usize,
    pub ao: AoIntegrals,
}

/// Eigen-decomposition with ascending eigenvalues; ties keep input order.
/// Each eigenvector is signed so that its largest component (first one on
/// ties) is positive.
fn sorted_eigh(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        let max = v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        let lead = v.iter().position(|x| x.abs() >= max * (1.0 - 1e-8)).unwrap_or(0);
        let sign = if v[lead] < 0.0 { -1.0 } else { 1.0 };
        vectors.set_column(col, &(v * sign));
    }
    (values, vectors)
}

fn density(c: &DMatrix<f64>, n_occ: usize) -> DMatrix<f64> {
    let occ = c.columns(0, n_occ);
    (occ * occ.transpose()) * 2.0
}

fn fock(h: &DMatrix<f64>, eri: &ChemistEri, p: &DMatrix<f64>) -> DMatrix<f64> {
    let n = h.nrows();
    let mut f = h.clone();
    for mu in 0..n {
        for nu in 0..n {
            let mut g = 0.0;
            for la in 0..n {
                for si in 0..n {
                    g += p[(la, si)] * (eri.get(mu, nu, la, si) - 0.5 * eri.get(mu, la, nu, si));
                }
            }
            f[(mu, nu)] += g;
        }
    }
    f
}

/// Runs closed-shell RHF: core-Hamiltonian guess, Löwdin orthogonalization,
/// fixed-point iteration with 0.5 linear density mixing.
pub fn hartree_fock_s(geom: &MolecularGeometry, shells: &[GaussianShell]) -> Result<HartreeFockResult, IntegralError> {
    let n_electrons = geom.electron_count();
    if !n_electrons.is_multiple_of(2) || geom.multiplicity() != 1 {
        return Err(IntegralError::OpenShell(format!(
            "{} electrons, multiplicity {}",
            n_electrons,
            geom.multiplicity()
        )));
    }
    let n = shells.len();
    let n_occ = n_electrons / 2;
    if n_occ > n {
        return Err(IntegralError::TooManyElectrons {
            electrons: n_electrons,
            orbitals: n,
        });
    }
    let ao = ao_integrals(geom, shells);
    let h = ao.core_hamiltonian();

    let (s_vals, s_vecs) = sorted_eigh(&ao.overlap);
    let smallest = s_vals.first().copied().unwrap_or(1.0);
    if smallest < 1e-10 {
        return Err(IntegralError::LinearDependence(smallest));
    }
    let inv_sqrt = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        n,
        s_vals.iter().map(|s| 1.0 / s.sqrt()),
    ));
    let x = &s_vecs * inv_sqrt * s_vecs.transpose();

    let diagonalize = |f: &DMatrix<f64>| {
        let fp = x.transpose() * f * &x;
        let (e, cp) = sorted_eigh(&fp);
        (e, &x * cp)
    };

    let (_, c0) = diagonalize(&h);
    let mut p = density(&c0, n_occ);
    let mut iterations = 0;
    let mut last_change = f64::INFINITY;
    let mut converged = false;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let f = fock(&h, &ao.eri, &p);
        let (_, c) = diagonalize(&f);
        let p_new = density(&c, n_occ);
        last_change = (&p_new - &p).abs().max();
        if last_change < DENSITY_TOL {
            p = p_new;
            converged = true;
            break;
        }
        p = &p * MIXING + p_new * (1.0 - MIXING);
    }
    if !converged {
        return Err(IntegralError::ScfNotConverged {
            iterations,
            last_change,
        });
    }

    let f = fock(&h, &ao.eri, &p);
    let (orbital_energies, c) = diagonalize(&f);
    let e_nn = geom.nuclear_repulsion();
    let e_elec = 0.5 * p.component_mul(&(&h + &f)).sum();

    let h_mo = c.transpose() * &h * &c;
    let h_mo = (&h_mo + h_mo.transpose()) * 0.5;
    let g_mo = transform_eri(&ao.eri, &c);
    let integrals = IntegralSet::new(h_mo, g_mo, e_nn, n_electrons)?;
    Ok(HartreeFockResult {
        integrals,
        energy: e_elec + e_nn,
        orbital_energies,
        coefficients: c,
        iterations,
        ao,
    })
}

/// MO-basis integrals from the RHF orbitals of `geom` in the given shells.
pub fn compute_integrals_s(geom: &MolecularGeometry, shells: &[GaussianShell]) -> Result<IntegralSet, IntegralError> {
    hartree_fock_s(geom, shells).map(|r| r.integrals)
}

/// Four quarter-transformations `(pq|rs) = Σ C_μp C_νq C_λr C_σs (μν|λσ)`.
fn transform_eri(eri: &ChemistEri, c: &DMatrix<f64>) -> ChemistEri {
    let n = c.nrows();
    let m = c.ncols();
    let dense = eri.to_dense();
    let mut t1 = vec![0.0; m * n * n * n];
    for p in 0..m {
        for nu in 0..n {
            for la in 0..n {
                for si in 0..n {
                    let mut acc = 0.0;
                    for mu in 0..n {
                        acc += c[(mu, p)] * dense[((mu * n + nu) * n + la) * n + si];
                    }
                    t1[((p * n + nu) * n + la) * n + si] = acc;
                }
            }
        }
    }
    let mut t2 = vec![0.0; m * m * n * n];
    for p in 0..m {
        for q in 0..m {
            for la in 0..n {
                for si in 0..n {
                    let mut acc = 0.0;
                    for nu in 0..n {
                        acc += c[(nu, q)] * t1[((p * n + nu) * n + la) * n + si];
                    }
                    t2[((p * m + q) * n + la) * n + si] = acc;
                }
            }
        }
    }
    let mut t3 = vec![0.0; m * m * m * n];
    for p in 0..m {
        for q in 0..m {
            for r in 0..m {
                for si in 0..n {
                    let mut acc = 0.0;
                    for la in 0..n {
                        acc += c[(la, r)] * t2[((p * m + q) * n + la) * n + si];
                    }
                    t3[((p * m + q) * m + r) * n + si] = acc;
                }
            }
        }
    }
    let mut out = ChemistEri::zeros(m);
    for (p, q, r, s) in ChemistEri::canonical_indices(m) {
        let mut acc = 0.0;
        for si in 0..n {
            acc += c[(si, s)] * t3[((p * m + q) * m + r) * n + si];
        }
        out.set(p, q, r, s, acc);
    }
    out
}
