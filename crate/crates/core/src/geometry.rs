//! Molecular geometries, internal coordinates and torsional rotations.
//!
//! Coordinates are stored in Bohr. XYZ files are read and written in
//! Ångström.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::ANGSTROM_TO_BOHR;

/// Minimum allowed separation between two atoms, in Bohr.
pub const MIN_ATOM_SEPARATION: f64 = 1e-6;

/// Cross-product norm below which three points count as colinear.
const COLINEAR_EPS: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: unknown element symbol `{symbol}`")]
    UnknownElement { line: usize, symbol: String },
    #[error("line {line}: expected {expected} atoms, found {found}")]
    AtomCountMismatch { line: usize, expected: usize, found: usize },
    #[error("geometry has no atoms")]
    Empty,
    #[error("atoms {0} and {1} are closer than {MIN_ATOM_SEPARATION} Bohr")]
    Overlap(usize, usize),
    #[error("electron count would be negative (charge {charge})")]
    NegativeElectrons { charge: i32 },
    #[error("spin multiplicity must be positive")]
    InvalidMultiplicity,
    #[error("atom index {index} out of range for {n_atoms} atoms")]
    IndexOutOfRange { index: usize, n_atoms: usize },
    #[error("atom indices must be distinct")]
    RepeatedIndex,
    #[error("degenerate dihedral: atoms {0}, {1}, {2} are colinear")]
    Colinear(usize, usize, usize),
    #[error("degenerate rotation axis: atoms {0} and {1} coincide")]
    DegenerateAxis(usize, usize),
    #[error("rotation axis norm {0} is not close to 1")]
    AxisNotUnit(f64),
    #[error("non-finite coordinate on atom {0}")]
    NonFinite(usize),
    #[error("invalid atom: {0}")]
    InvalidAtom(String),
    #[error("moving set must contain atom {0}")]
    MovingSetMissing(usize),
    #[error("moving set must not contain axis-defining atom {0}")]
    MovingSetContainsAxis(usize),
}

struct ElementData {
    symbol: &'static str,
    z: u32,
    mass: f64,
}

const ELEMENTS: &[ElementData] = &[
    ElementData {
        symbol: "H",
        z: 1,
        mass: 1.00782503,
    },
    ElementData {
        symbol: "He",
        z: 2,
        mass: 4.00260325,
    },
    ElementData {
        symbol: "Li",
        z: 3,
        mass: 7.01600344,
    },
    ElementData {
        symbol: "Be",
        z: 4,
        mass: 9.01218307,
    },
    ElementData {
        symbol: "B",
        z: 5,
        mass: 11.00930536,
    },
    ElementData {
        symbol: "C",
        z: 6,
        mass: 12.0,
    },
    ElementData {
        symbol: "N",
        z: 7,
        mass: 14.00307401,
    },
    ElementData {
        symbol: "O",
        z: 8,
        mass: 15.99491462,
    },
    ElementData {
        symbol: "F",
        z: 9,
        mass: 18.99840316,
    },
    ElementData {
        symbol: "Ne",
        z: 10,
        mass: 19.99244018,
    },
    ElementData {
        symbol: "Na",
        z: 11,
        mass: 22.98976928,
    },
    ElementData {
        symbol: "Mg",
        z: 12,
        mass: 23.98504170,
    },
    ElementData {
        symbol: "Al",
        z: 13,
        mass: 26.98153853,
    },
    ElementData {
        symbol: "Si",
        z: 14,
        mass: 27.97692653,
    },
    ElementData {
        symbol: "P",
        z: 15,
        mass: 30.97376200,
    },
    ElementData {
        symbol: "S",
        z: 16,
        mass: 31.97207117,
    },
    ElementData {
        symbol: "Cl",
        z: 17,
        mass: 34.96885268,
    },
    ElementData {
        symbol: "Ar",
        z: 18,
        mass: 39.96238312,
    },
    ElementData {
        symbol: "Br",
        z: 35,
        mass: 78.9183376,
    },
];

/// Looks up `(canonical symbol, atomic number, most-abundant isotope mass)`.
pub fn element_info(symbol: &str) -> Option<(&'static str, u32, f64)> {
    ELEMENTS
        .iter()
        .find(|e| e.symbol.eq_ignore_ascii_case(symbol))
        .map(|e| (e.symbol, e.z, e.mass))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub element: String,
    pub atomic_number: u32,
    /// Atomic mass units.
    pub mass: f64,
    /// Bohr.
    pub position: Vector3<f64>,
}

impl Atom {
    /// Builds an atom from its element symbol with a position in Bohr.
    pub fn new(symbol: &str, position: Vector3<f64>) -> Result<Self, GeometryError> {
        let (symbol, z, mass) = element_info(symbol).ok_or_else(|| GeometryError::UnknownElement {
            line: 0,
            symbol: symbol.to_string(),
        })?;
        Ok(Atom {
            element: symbol.to_string(),
            atomic_number: z,
            mass,
            position,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MolecularGeometry {
    atoms: Vec<Atom>,
    charge: i32,
    multiplicity: u32,
}

impl MolecularGeometry {
    pub fn new(atoms: Vec<Atom>, charge: i32, multiplicity: u32) -> Result<Self, GeometryError> {
        if atoms.is_empty() {
            return Err(GeometryError::Empty);
        }
        if multiplicity == 0 {
            return Err(GeometryError::InvalidMultiplicity);
        }
        for (i, a) in atoms.iter().enumerate() {
            if a.atomic_number == 0 || !(a.mass > 0.0) {
                return Err(GeometryError::InvalidAtom(format!(
                    "atom {i} has atomic number {} and mass {}",
                    a.atomic_number, a.mass
                )));
            }
            if !a.position.iter().all(|c| c.is_finite()) {
                return Err(GeometryError::NonFinite(i));
            }
        }
        for i in 0..atoms.len() {
            for j in 0..i {
                if (atoms[i].position - atoms[j].position).norm() < MIN_ATOM_SEPARATION {
                    return Err(GeometryError::Overlap(j, i));
                }
            }
        }
        let z_total: i64 = atoms.iter().map(|a| a.atomic_number as i64).sum();
        if z_total - (charge as i64) < 0 {
            return Err(GeometryError::NegativeElectrons { charge });
        }
        Ok(MolecularGeometry {
            atoms,
            charge,
            multiplicity,
        })
    }

    /// Builds a neutral singlet from `(symbol, [x, y, z])` rows given in Bohr.
    pub fn from_bohr(rows: &[(&str, [f64; 3])]) -> Result<Self, GeometryError> {
        let atoms = rows
            .iter()
            .map(|(s, p)| Atom::new(s, Vector3::new(p[0], p[1], p[2])))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(atoms, 0, 1)
    }

    /// Same as [`from_bohr`](Self::from_bohr) with coordinates in Ångström.
    pub fn from_angstrom(rows: &[(&str, [f64; 3])]) -> Result<Self, GeometryError> {
        let scaled: Vec<(&str, [f64; 3])> = rows
            .iter()
            .map(|(s, p)| {
                (
                    *s,
                    [
                        p[0] * ANGSTROM_TO_BOHR,
                        p[1] * ANGSTROM_TO_BOHR,
                        p[2] * ANGSTROM_TO_BOHR,
                    ],
                )
            })
            .collect();
        Self::from_bohr(&scaled)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn n_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn charge(&self) -> i32 {
        self.charge
    }

    pub fn multiplicity(&self) -> u32 {
        self.multiplicity
    }

    pub fn position(&self, index: usize) -> Vector3<f64> {
        self.atoms[index].position
    }

    /// Σ Z − charge.
    pub fn electron_count(&self) -> usize {
        let z: i64 = self.atoms.iter().map(|a| a.atomic_number as i64).sum();
        (z - self.charge as i64) as usize
    }

    /// Σ_{I<J} Z_I Z_J / |R_I − R_J| in Hartree.
    pub fn nuclear_repulsion(&self) -> f64 {
        let mut e = 0.0;
        for i in 0..self.atoms.len() {
            for j in 0..i {
                let r = (self.atoms[i].position - self.atoms[j].position).norm();
                e += (self.atoms[i].atomic_number * self.atoms[j].atomic_number) as f64 / r;
            }
        }
        e
    }

    /// Flattened Cartesian coordinates `[x0, y0, z0, x1, ...]` in Bohr.
    pub fn coordinates(&self) -> Vec<f64> {
        self.atoms
            .iter()
            .flat_map(|a| [a.position.x, a.position.y, a.position.z])
            .collect()
    }

    /// Returns a copy with the flattened coordinates replaced.
    pub fn with_coordinates(&self, coords: &[f64]) -> Result<Self, GeometryError> {
        assert_eq!(coords.len(), 3 * self.atoms.len(), "coordinate length");
        let atoms = self
            .atoms
            .iter()
            .enumerate()
            .map(|(i, a)| Atom {
                position: Vector3::new(coords[3 * i], coords[3 * i + 1], coords[3 * i + 2]),
                ..a.clone()
            })
            .collect();
        Self::new(atoms, self.charge, self.multiplicity)
    }

    /// Returns a copy with one atom moved to `position`.
    pub fn with_position(&self, index: usize, position: Vector3<f64>) -> Result<Self, GeometryError> {
        self.check_index(index)?;
        let mut atoms = self.atoms.clone();
        atoms[index].position = position;
        Self::new(atoms, self.charge, self.multiplicity)
    }

    pub fn with_charge(mut self, charge: i32, multiplicity: u32) -> Result<Self, GeometryError> {
        self.charge = charge;
        self.multiplicity = multiplicity;
        Self::new(self.atoms, self.charge, self.multiplicity)
    }

    /// Rigid translation of every atom.
    pub fn translated(&self, shift: Vector3<f64>) -> Self {
        let mut out = self.clone();
        for a in &mut out.atoms {
            a.position += shift;
        }
        out
    }

    fn check_index(&self, index: usize) -> Result<(), GeometryError> {
        if index >= self.atoms.len() {
            Err(GeometryError::IndexOutOfRange {
                index,
                n_atoms: self.atoms.len(),
            })
        } else {
            Ok(())
        }
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        (self.atoms[i].position - self.atoms[j].position).norm()
    }

    /// Bond angle i-j-k in degrees.
    pub fn bond_angle(&self, i: usize, j: usize, k: usize) -> f64 {
        let a = self.atoms[i].position - self.atoms[j].position;
        let b = self.atoms[k].position - self.atoms[j].position;
        // atan2 form keeps precision near 0 and 180 degrees
        a.cross(&b).norm().atan2(a.dot(&b)).to_degrees()
    }

    /// Signed dihedral i-j-k-l in degrees, range (−180, 180].
    ///
    /// Positive when the i-j bond has to turn clockwise, looking down j→k,
    /// to eclipse the k-l bond.
    pub fn torsion_angle(&self, i: usize, j: usize, k: usize, l: usize) -> Result<f64, GeometryError> {
        for &x in &[i, j, k, l] {
            self.check_index(x)?;
        }
        let idx = [i, j, k, l];
        for a in 0..4 {
            for b in 0..a {
                if idx[a] == idx[b] {
                    return Err(GeometryError::RepeatedIndex);
                }
            }
        }
        let b1 = self.position(j) - self.position(i);
        let b2 = self.position(k) - self.position(j);
        let b3 = self.position(l) - self.position(k);
        let n1 = b1.normalize().cross(&b2.normalize());
        let n2 = b2.normalize().cross(&b3.normalize());
        if n1.norm() < COLINEAR_EPS {
            return Err(GeometryError::Colinear(i, j, k));
        }
        if n2.norm() < COLINEAR_EPS {
            return Err(GeometryError::Colinear(j, k, l));
        }
        let x = n1.dot(&n2);
        let y = b1.normalize().dot(&n2);
        let mut deg = y.atan2(x).to_degrees();
        if deg <= -180.0 {
            deg += 360.0;
        }
        Ok(deg)
    }

    /// Applies `rot` to the listed atoms; all others stay put.
    pub fn apply_rotation(
        &self,
        rot: &RotationOperator,
        atom_indices: &BTreeSet<usize>,
    ) -> Result<Self, GeometryError> {
        for &i in atom_indices {
            self.check_index(i)?;
        }
        let mut out = self.clone();
        for &i in atom_indices {
            out.atoms[i].position = rot.apply(&self.atoms[i].position);
        }
        Self::new(out.atoms, out.charge, out.multiplicity)
    }

    /// Rotates `moving_set` about the j→k axis (pivot at atom k) so that the
    /// i-j-k-l torsion equals `target` degrees.
    pub fn set_torsion(
        &self,
        (i, j, k, l): (usize, usize, usize, usize),
        target: f64,
        moving_set: &BTreeSet<usize>,
    ) -> Result<Self, GeometryError> {
        if !moving_set.contains(&l) {
            return Err(GeometryError::MovingSetMissing(l));
        }
        for &a in &[i, j, k] {
            if moving_set.contains(&a) {
                return Err(GeometryError::MovingSetContainsAxis(a));
            }
        }
        let current = self.torsion_angle(i, j, k, l)?;
        let delta = wrap_degrees(target - current);
        self.rotate_about_bond(j, k, delta, moving_set)
    }

    /// Rotates `atom_set` by `degrees` about the axis running from atom `from`
    /// to atom `to`, pivoting at `to`.
    pub fn rotate_about_bond(
        &self,
        from: usize,
        to: usize,
        degrees: f64,
        atom_set: &BTreeSet<usize>,
    ) -> Result<Self, GeometryError> {
        self.check_index(from)?;
        self.check_index(to)?;
        let axis = self.position(to) - self.position(from);
        if axis.norm() < MIN_ATOM_SEPARATION {
            return Err(GeometryError::DegenerateAxis(from, to));
        }
        let rot = RotationOperator::new(axis.normalize(), degrees.to_radians(), self.position(to))?;
        self.apply_rotation(&rot, atom_set)
    }
}

/// Maps an angle in degrees into (−180, 180].
pub fn wrap_degrees(deg: f64) -> f64 {
    let mut d = deg % 360.0;
    if d <= -180.0 {
        d += 360.0;
    } else if d > 180.0 {
        d -= 360.0;
    }
    d
}

/// Axis-angle rotation about a line through `pivot`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationOperator {
    axis: Vector3<f64>,
    angle: f64,
    pivot: Vector3<f64>,
}

impl RotationOperator {
    /// `angle` in radians. The axis is renormalized when its norm is within
    /// 1e-6 of one; anything further off is rejected.
    pub fn new(axis: Vector3<f64>, angle: f64, pivot: Vector3<f64>) -> Result<Self, GeometryError> {
        let norm = axis.norm();
        if !norm.is_finite() || (norm - 1.0).abs() >= 1e-6 {
            return Err(GeometryError::AxisNotUnit(norm));
        }
        Ok(RotationOperator {
            axis: axis / norm,
            angle,
            pivot,
        })
    }

    pub fn axis(&self) -> Vector3<f64> {
        self.axis
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    pub fn pivot(&self) -> Vector3<f64> {
        self.pivot
    }

    /// Explicit 3×3 matrix in terms of the axis components and angle.
    pub fn matrix(&self) -> Matrix3<f64> {
        let (n1, n2, n3) = (self.axis.x, self.axis.y, self.axis.z);
        let (s, c) = self.angle.sin_cos();
        let t = 1.0 - c;
        Matrix3::new(
            c + n1 * n1 * t,
            n1 * n2 * t - n3 * s,
            n1 * n3 * t + n2 * s,
            n2 * n1 * t + n3 * s,
            c + n2 * n2 * t,
            n2 * n3 * t - n1 * s,
            n3 * n1 * t - n2 * s,
            n3 * n2 * t + n1 * s,
            c + n3 * n3 * t,
        )
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.pivot + self.matrix() * (p - self.pivot)
    }
}

/// Parses an XYZ file (Ångström) into a geometry in Bohr.
///
/// The comment line may carry `charge=<int>` and `mult=<int>` tokens.
pub fn parse_xyz(text: &str) -> Result<MolecularGeometry, GeometryError> {
    let lines: Vec<&str> = text.lines().collect();
    let count_line = lines.first().ok_or(GeometryError::Malformed {
        line: 1,
        message: "missing atom count".into(),
    })?;
    let expected: usize = count_line.trim().parse().map_err(|_| GeometryError::Malformed {
        line: 1,
        message: format!("invalid atom count `{}`", count_line.trim()),
    })?;
    let mut charge = 0i32;
    let mut mult = 1u32;
    if let Some(comment) = lines.get(1) {
        for token in comment.split(|c: char| c.is_whitespace() || c == ',') {
            if let Some((key, value)) = token.split_once('=') {
                let key = key.trim().to_ascii_lowercase();
                let bad = || GeometryError::Malformed {
                    line: 2,
                    message: format!("invalid value in `{token}`"),
                };
                match key.as_str() {
                    "charge" => charge = value.trim().parse().map_err(|_| bad())?,
                    "mult" | "multiplicity" => mult = value.trim().parse().map_err(|_| bad())?,
                    _ => {}
                }
            }
        }
    }
    let mut atoms = Vec::with_capacity(expected);
    let mut last_line = lines.len().min(2);
    for (offset, raw) in lines.iter().enumerate().skip(2) {
        let line_no = offset + 1;
        let row = raw.trim();
        if row.is_empty() {
            continue;
        }
        last_line = line_no;
        let fields: Vec<&str> = row.split_whitespace().collect();
        if fields.len() < 4 {
            return Err(GeometryError::Malformed {
                line: line_no,
                message: format!("expected `Symbol x y z`, got `{row}`"),
            });
        }
        let (symbol, z, mass) = element_info(fields[0]).ok_or_else(|| GeometryError::UnknownElement {
            line: line_no,
            symbol: fields[0].to_string(),
        })?;
        let mut xyz = [0.0; 3];
        for (slot, f) in xyz.iter_mut().zip(&fields[1..4]) {
            *slot = f.parse::<f64>().map_err(|_| GeometryError::Malformed {
                line: line_no,
                message: format!("invalid coordinate `{f}`"),
            })?;
            if !slot.is_finite() {
                return Err(GeometryError::Malformed {
                    line: line_no,
                    message: format!("non-finite coordinate `{f}`"),
                });
            }
        }
        atoms.push(Atom {
            element: symbol.to_string(),
            atomic_number: z,
            mass,
            position: Vector3::new(xyz[0], xyz[1], xyz[2]) * ANGSTROM_TO_BOHR,
        });
    }
    if atoms.len() != expected {
        return Err(GeometryError::AtomCountMismatch {
            line: last_line.max(1),
            expected,
            found: atoms.len(),
        });
    }
    MolecularGeometry::new(atoms, charge, mult)
}

/// Formats `x` with 12 significant digits in fixed notation.
fn sig12(x: f64) -> String {
    if x == 0.0 {
        return "0.00000000000".to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (11 - magnitude).clamp(0, 40) as usize;
    format!("{x:.decimals$}")
}

/// Writes the geometry as XYZ text in Ångström.
pub fn write_xyz(geom: &MolecularGeometry, comment: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", geom.n_atoms());
    let _ = writeln!(
        out,
        "charge={} mult={} {}",
        geom.charge,
        geom.multiplicity,
        comment.replace('\n', " ")
    );
    for a in &geom.atoms {
        let p = a.position / ANGSTROM_TO_BOHR;
        let _ = writeln!(out, "{} {} {} {}", a.element, sig12(p.x), sig12(p.y), sig12(p.z));
    }
    out
}
