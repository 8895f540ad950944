//! Closed-form integrals over contracted s-type Gaussians.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Vector3};

use super::{ChemistEri, IntegralError};
use crate::geometry::MolecularGeometry;

/// Zeroth-order Boys function F0(t) = ½·√(π/t)·erf(√t), F0(0) = 1.
pub fn boys_f0(t: f64) -> f64 {
    if t < 1e-6 {
        // series keeps full precision where erf(√t)/√t cancels
        1.0 - t / 3.0 + t * t / 10.0 - t * t * t / 42.0
    } else {
        let st = t.sqrt();
        0.5 * (PI / t).sqrt() * libm::erf(st)
    }
}

/// Contracted s-type Gaussian basis function.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianShell {
    center: Vector3<f64>,
    exponents: Vec<f64>,
    /// Coefficients including primitive normalization, scaled so that the
    /// contracted function has unit self-overlap.
    coefficients: Vec<f64>,
}

impl GaussianShell {
    /// `coefficients` multiply normalized primitives, as tabulated in basis
    /// set libraries. The contraction is renormalized afterwards.
    pub fn new(center: Vector3<f64>, exponents: Vec<f64>, coefficients: Vec<f64>) -> Result<Self, IntegralError> {
        Self::with_angular_momentum(center, exponents, coefficients, 0)
    }

    pub fn with_angular_momentum(
        center: Vector3<f64>,
        exponents: Vec<f64>,
        coefficients: Vec<f64>,
        angular_momentum: u32,
    ) -> Result<Self, IntegralError> {
        if angular_momentum != 0 {
            return Err(IntegralError::NonSShell(angular_momentum));
        }
        if exponents.is_empty() || exponents.len() != coefficients.len() {
            return Err(IntegralError::InvalidShell(format!(
                "{} exponents vs {} coefficients",
                exponents.len(),
                coefficients.len()
            )));
        }
        if exponents.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
            return Err(IntegralError::InvalidShell("exponents must be positive".into()));
        }
        if !center.iter().all(|c| c.is_finite()) {
            return Err(IntegralError::InvalidShell("non-finite center".into()));
        }
        let mut coefficients: Vec<f64> = exponents
            .iter()
            .zip(&coefficients)
            .map(|(a, c)| c * (2.0 * a / PI).powf(0.75))
            .collect();
        let mut self_overlap = 0.0;
        for (a, ca) in exponents.iter().zip(&coefficients) {
            for (b, cb) in exponents.iter().zip(&coefficients) {
                self_overlap += ca * cb * (PI / (a + b)).powf(1.5);
            }
        }
        if !(self_overlap > 0.0) {
            return Err(IntegralError::InvalidShell("zero contraction".into()));
        }
        let scale = 1.0 / self_overlap.sqrt();
        for c in &mut coefficients {
            *c *= scale;
        }
        Ok(GaussianShell {
            center,
            exponents,
            coefficients,
        })
    }

    pub fn center(&self) -> Vector3<f64> {
        self.center
    }

    pub fn exponents(&self) -> &[f64] {
        &self.exponents
    }

    /// Normalized primitive weights (normalization constants folded in).
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Always 0.
    pub fn angular_momentum(&self) -> u32 {
        0
    }

    fn primitives(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.exponents.iter().copied().zip(self.coefficients.iter().copied())
    }

    /// Value of the contracted function at `r`.
    pub fn value(&self, r: &Vector3<f64>) -> f64 {
        let d2 = (r - self.center).norm_squared();
        self.primitives().map(|(a, c)| c * (-a * d2).exp()).sum()
    }
}

const STO3G_COEFFS: [f64; 3] = [0.15432897, 0.53532814, 0.44463454];
const STO3G_H: [f64; 3] = [3.42525091, 0.62391373, 0.16885540];
const STO3G_HE: [f64; 3] = [6.36242139, 1.15892300, 0.31364979];

/// One STO-3G 1s shell per atom. Only H and He are available.
pub fn sto3g_shells(geom: &MolecularGeometry) -> Result<Vec<GaussianShell>, IntegralError> {
    geom.atoms()
        .iter()
        .map(|atom| {
            let exps = match atom.atomic_number {
                1 => STO3G_H,
                2 => STO3G_HE,
                _ => return Err(IntegralError::UnsupportedElement(atom.element.clone())),
            };
            GaussianShell::new(atom.position, exps.to_vec(), STO3G_COEFFS.to_vec())
        })
        .collect()
}

/// Atomic-orbital integrals over contracted s shells.
#[derive(Debug, Clone)]
pub struct AoIntegrals {
    pub overlap: DMatrix<f64>,
    pub kinetic: DMatrix<f64>,
    /// Electron-nuclear attraction summed over all nuclei.
    pub nuclear: DMatrix<f64>,
    pub eri: ChemistEri,
}

impl AoIntegrals {
    pub fn core_hamiltonian(&self) -> DMatrix<f64> {
        &self.kinetic + &self.nuclear
    }
}

fn prim_overlap(a: f64, b: f64, ab2: f64) -> f64 {
    let p = a + b;
    (PI / p).powf(1.5) * (-a * b / p * ab2).exp()
}

fn prim_kinetic(a: f64, b: f64, ab2: f64) -> f64 {
    let p = a + b;
    let mu = a * b / p;
    mu * (3.0 - 2.0 * mu * ab2) * prim_overlap(a, b, ab2)
}

fn prim_nuclear(a: f64, ra: &Vector3<f64>, b: f64, rb: &Vector3<f64>, rc: &Vector3<f64>, z: f64) -> f64 {
    let p = a + b;
    let ab2 = (ra - rb).norm_squared();
    let rp = (ra * a + rb * b) / p;
    let pc2 = (rp - rc).norm_squared();
    -2.0 * PI / p * z * (-a * b / p * ab2).exp() * boys_f0(p * pc2)
}

#[allow(clippy::too_many_arguments)]
fn prim_eri(
    a: f64,
    ra: &Vector3<f64>,
    b: f64,
    rb: &Vector3<f64>,
    c: f64,
    rc: &Vector3<f64>,
    d: f64,
    rd: &Vector3<f64>,
) -> f64 {
    let p = a + b;
    let q = c + d;
    let rp = (ra * a + rb * b) / p;
    let rq = (rc * c + rd * d) / q;
    let ab2 = (ra - rb).norm_squared();
    let cd2 = (rc - rd).norm_squared();
    let pq2 = (rp - rq).norm_squared();
    2.0 * PI.powf(2.5) / (p * q * (p + q).sqrt())
        * (-a * b / p * ab2 - c * d / q * cd2).exp()
        * boys_f0(p * q / (p + q) * pq2)
}

/// Overlap, kinetic, nuclear-attraction and electron-repulsion integrals.
///
/// Each matrix entry is accumulated over primitives in a fixed order.
pub fn ao_integrals(geom: &MolecularGeometry, shells: &[GaussianShell]) -> AoIntegrals {
    let n = shells.len();
    let mut overlap = DMatrix::zeros(n, n);
    let mut kinetic = DMatrix::zeros(n, n);
    let mut nuclear = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let (si, sj) = (&shells[i], &shells[j]);
            let ab2 = (si.center - sj.center).norm_squared();
            let (mut s, mut t, mut v) = (0.0, 0.0, 0.0);
            for (a, ca) in si.primitives() {
                for (b, cb) in sj.primitives() {
                    let w = ca * cb;
                    s += w * prim_overlap(a, b, ab2);
                    t += w * prim_kinetic(a, b, ab2);
                    for atom in geom.atoms() {
                        v += w * prim_nuclear(a, &si.center, b, &sj.center, &atom.position, atom.atomic_number as f64);
                    }
                }
            }
            overlap[(i, j)] = s;
            overlap[(j, i)] = s;
            kinetic[(i, j)] = t;
            kinetic[(j, i)] = t;
            nuclear[(i, j)] = v;
            nuclear[(j, i)] = v;
        }
    }
    let mut eri = ChemistEri::zeros(n);
    for (i, j, k, l) in ChemistEri::canonical_indices(n) {
        let (si, sj, sk, sl) = (&shells[i], &shells[j], &shells[k], &shells[l]);
        let mut acc = 0.0;
        for (a, ca) in si.primitives() {
            for (b, cb) in sj.primitives() {
                for (c, cc) in sk.primitives() {
                    for (d, cd) in sl.primitives() {
                        acc += ca * cb * cc * cd * prim_eri(a, &si.center, b, &sj.center, c, &sk.center, d, &sl.center);
                    }
                }
            }
        }
        eri.set(i, j, k, l, acc);
    }
    AoIntegrals {
        overlap,
        kinetic,
        nuclear,
        eri,
    }
}
