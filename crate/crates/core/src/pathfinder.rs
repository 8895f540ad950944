//! Torsion scans, warm-started VQE along a reaction coordinate, bond
//! relaxation and mass-weighted steepest-descent paths.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::geometry::{parse_xyz, GeometryError, MolecularGeometry};
use crate::pipeline::{problem_from_geometry, problem_from_integrals, read_fcidump, PipelineConfig, PipelineError};
use crate::vqe::{minimize, VqeConfig, VqeResult};
use crate::{ANGSTROM_TO_BOHR, HARTREE_TO_KJ_PER_MOL};

/// Steepest descent stops once the mass-weighted gradient norm drops below this.
pub const IRC_GRADIENT_TOL: f64 = 1e-4;
const MAX_HALVINGS: usize = 5;
const RELAX_BRACKET: f64 = 0.15;
const RELAX_TOL: f64 = 1e-4;
const RELAX_SWEEPS: usize = 2;
/// Grid points closer than this to an integer multiple of the step count as aligned.
const GRID_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum PathError {
    #[error("scan grid: {0}")]
    Grid(String),
    #[error("invalid atom set: {0}")]
    InvalidSet(String),
    #[error("step must be positive and finite (got {0})")]
    InvalidStep(f64),
    #[error("energy evaluation failed: {0}")]
    Energy(String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

type Torsion = (usize, usize, usize, usize);
type PointOutcome = Result<(MolecularGeometry, VqeResult, usize), String>;

#[derive(Debug, Clone, PartialEq)]
pub struct ScanSpec {
    pub label: String,
    pub torsion: Torsion,
    /// Degrees.
    pub start: f64,
    pub stop: f64,
    pub step: f64,
    /// Atoms on the `l` side, rotated toward the target torsion.
    pub moving_set: BTreeSet<usize>,
    /// Atoms on the `i` side, rotated the opposite way. When present each
    /// side takes half of the torsion change.
    pub counter_rotating_set: Option<BTreeSet<usize>>,
    /// Leader atom to the atoms that rotate with it.
    pub rigid_followers: BTreeMap<usize, BTreeSet<usize>>,
    /// `(atom, anchor)` bonds relaxed after each rotation.
    pub relax_bonds: Vec<(usize, usize)>,
}

impl ScanSpec {
    /// Angles from `start` to `stop` inclusive.
    pub fn grid(&self) -> Result<Vec<f64>, PathError> {
        if !(self.step.is_finite() && self.start.is_finite() && self.stop.is_finite()) {
            return Err(PathError::Grid("non-finite scan bounds".into()));
        }
        if self.step == 0.0 {
            return Err(PathError::Grid("step must be nonzero".into()));
        }
        let ratio = (self.stop - self.start) / self.step;
        let n = ratio.round();
        if n < 1.0 {
            return Err(PathError::Grid(format!(
                "empty grid from {} to {} with step {}",
                self.start, self.stop, self.step
            )));
        }
        if (ratio - n).abs() > GRID_TOL * n.max(1.0) {
            return Err(PathError::Grid(format!(
                "range {}..{} is not a multiple of step {}",
                self.start, self.stop, self.step
            )));
        }
        Ok((0..=n as usize)
            .map(|k| clean_angle(self.start + k as f64 * self.step))
            .collect())
    }

    fn leaders_with_followers(&self, leaders: &BTreeSet<usize>) -> BTreeSet<usize> {
        let mut out = leaders.clone();
        for leader in leaders {
            if let Some(f) = self.rigid_followers.get(leader) {
                out.extend(f);
            }
        }
        out
    }

    /// Atoms rotated toward the target, followers included.
    pub fn moving_group(&self) -> BTreeSet<usize> {
        self.leaders_with_followers(&self.moving_set)
    }

    pub fn counter_group(&self) -> BTreeSet<usize> {
        self.counter_rotating_set
            .as_ref()
            .map(|c| self.leaders_with_followers(c))
            .unwrap_or_default()
    }

    /// Checks indices and set membership against `geom`.
    pub fn validate(&self, geom: &MolecularGeometry) -> Result<(), PathError> {
        self.grid()?;
        let (i, j, k, l) = self.torsion;
        geom.torsion_angle(i, j, k, l)?;
        let n = geom.n_atoms();
        let all = self
            .moving_set
            .iter()
            .chain(self.counter_rotating_set.iter().flatten())
            .chain(self.rigid_followers.keys())
            .chain(self.rigid_followers.values().flatten())
            .chain(self.relax_bonds.iter().flat_map(|(a, b)| [a, b]));
        for &a in all {
            if a >= n {
                return Err(GeometryError::IndexOutOfRange { index: a, n_atoms: n }.into());
            }
        }
        if !self.moving_set.contains(&l) {
            return Err(PathError::InvalidSet(format!("moving set must contain atom {l}")));
        }
        let moving = self.moving_group();
        let counter = self.counter_group();
        if let Some(c) = &self.counter_rotating_set {
            if !c.contains(&i) {
                return Err(PathError::InvalidSet(format!(
                    "counter-rotating set must contain atom {i}"
                )));
            }
        }
        for &a in &[i, j, k] {
            if moving.contains(&a) {
                return Err(PathError::InvalidSet(format!(
                    "moving group contains axis-side atom {a}"
                )));
            }
        }
        for &a in &[j, k, l] {
            if counter.contains(&a) {
                return Err(PathError::InvalidSet(format!(
                    "counter-rotating group contains atom {a}"
                )));
            }
        }
        if let Some(a) = moving.intersection(&counter).next() {
            return Err(PathError::InvalidSet(format!("atom {a} is in both rotating groups")));
        }
        for leader in self.rigid_followers.keys() {
            let in_counter = self.counter_rotating_set.as_ref().is_some_and(|c| c.contains(leader));
            if !self.moving_set.contains(leader) && !in_counter {
                return Err(PathError::InvalidSet(format!(
                    "follower leader {leader} is not a rotated atom"
                )));
            }
        }
        let mut seen = BTreeSet::new();
        for &(a, anchor) in &self.relax_bonds {
            if a == anchor || !seen.insert(a) {
                return Err(PathError::InvalidSet(format!(
                    "relaxation pair ({a}, {anchor}) repeats an atom"
                )));
            }
        }
        Ok(())
    }

    /// Reads the scan keys of a preset-style config.
    pub fn from_config(cfg: &RunConfig) -> Result<Self, PathError> {
        let torsion: Vec<usize> = cfg
            .list("torsion")?
            .ok_or_else(|| ConfigError::Missing("torsion".into()))?;
        let [i, j, k, l] = torsion[..] else {
            return Err(ConfigError::Invalid {
                key: "torsion".into(),
                value: cfg.get("torsion").unwrap_or_default().into(),
                reason: "expected four atom indices".into(),
            }
            .into());
        };
        let moving_set = cfg
            .list::<usize>("moving_set")?
            .ok_or_else(|| ConfigError::Missing("moving_set".into()))?
            .into_iter()
            .collect();
        let counter_rotating_set = cfg.list::<usize>("counter_set")?.map(|v| v.into_iter().collect());
        let mut rigid_followers: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
        for (leader, follower) in pairs(cfg, "followers")? {
            rigid_followers.entry(leader).or_default().insert(follower);
        }
        Ok(ScanSpec {
            label: cfg.require("label")?.to_string(),
            torsion: (i, j, k, l),
            start: cfg
                .parsed("start")?
                .ok_or_else(|| ConfigError::Missing("start".into()))?,
            stop: cfg.parsed("stop")?.ok_or_else(|| ConfigError::Missing("stop".into()))?,
            step: cfg.parsed("step")?.ok_or_else(|| ConfigError::Missing("step".into()))?,
            moving_set,
            counter_rotating_set,
            rigid_followers,
            relax_bonds: pairs(cfg, "relax_bonds")?,
        })
    }
}

/// `a:b` items separated by commas or whitespace.
fn pairs(cfg: &RunConfig, key: &str) -> Result<Vec<(usize, usize)>, ConfigError> {
    let items: Vec<String> = cfg.list(key)?.unwrap_or_default();
    items
        .iter()
        .map(|item| {
            let bad = || ConfigError::Invalid {
                key: key.into(),
                value: item.clone(),
                reason: "expected `atom:atom`".into(),
            };
            let (a, b) = item.split_once(':').ok_or_else(bad)?;
            Ok((
                a.trim().parse().map_err(|_| bad())?,
                b.trim().parse().map_err(|_| bad())?,
            ))
        })
        .collect()
}

/// Rounds away accumulated step error and the sign of zero.
fn clean_angle(a: f64) -> f64 {
    let r = (a * 1e9).round() / 1e9;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// One geometry per grid angle, each built from `geom` in a single rotation.
pub fn generate_scan(geom: &MolecularGeometry, spec: &ScanSpec) -> Result<Vec<(f64, MolecularGeometry)>, PathError> {
    spec.validate(geom)?;
    let (i, j, k, l) = spec.torsion;
    let initial = geom.torsion_angle(i, j, k, l)?;
    let moving = spec.moving_group();
    let counter = spec.counter_group();
    spec.grid()?
        .into_iter()
        .map(|angle| {
            let delta = angle - initial;
            let g = if counter.is_empty() {
                geom.rotate_about_bond(j, k, delta, &moving)?
            } else {
                geom.rotate_about_bond(j, k, delta / 2.0, &moving)?
                    .rotate_about_bond(j, k, -delta / 2.0, &counter)?
            };
            Ok((angle, g))
        })
        .collect()
}

fn golden_section<F>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64), PathError>
where
    F: FnMut(f64) -> Result<f64, PathError>,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    let x = 0.5 * (a + b);
    Ok((x, f(x)?))
}

/// Coordinate descent on the listed bond lengths. Each bond is searched
/// within ±15% of its current length; a move is kept only if it lowers the
/// energy. Returns the relaxed geometry and its energy.
pub fn relax_bonds<F, E>(
    geom: &MolecularGeometry,
    pairs: &[(usize, usize)],
    energy_fn: F,
) -> Result<(MolecularGeometry, f64), PathError>
where
    F: Fn(&MolecularGeometry) -> Result<f64, E>,
    E: std::fmt::Display,
{
    let mut seen = BTreeSet::new();
    for &(a, anchor) in pairs {
        for x in [a, anchor] {
            if x >= geom.n_atoms() {
                return Err(GeometryError::IndexOutOfRange {
                    index: x,
                    n_atoms: geom.n_atoms(),
                }
                .into());
            }
        }
        if a == anchor || !seen.insert(a) {
            return Err(PathError::InvalidSet(format!(
                "relaxation pair ({a}, {anchor}) repeats an atom"
            )));
        }
    }
    let energy = |g: &MolecularGeometry| energy_fn(g).map_err(|e| PathError::Energy(e.to_string()));
    let mut current = geom.clone();
    let mut e_current = energy(&current)?;
    for _ in 0..RELAX_SWEEPS {
        for &(a, anchor) in pairs {
            let origin = current.position(anchor);
            let bond = current.position(a) - origin;
            let r0 = bond.norm();
            let u = bond / r0;
            let place = |r: f64| current.with_position(a, origin + u * r);
            let (r, e) = golden_section(
                |r| energy(&place(r)?),
                r0 * (1.0 - RELAX_BRACKET),
                r0 * (1.0 + RELAX_BRACKET),
                RELAX_TOL,
            )?;
            if e < e_current {
                current = place(r)?;
                e_current = e;
            }
        }
    }
    Ok((current, e_current))
}

/// Where per-point Hamiltonians come from.
#[derive(Debug, Clone, PartialEq)]
pub enum HamiltonianSource {
    /// RHF in the built-in s-type basis.
    BuiltIn,
    /// `{dir}/{label}_{angle}.fcidump` for each grid angle.
    FcidumpTemplate { dir: PathBuf },
}

impl HamiltonianSource {
    pub fn fcidump_path(dir: &std::path::Path, label: &str, angle: f64) -> PathBuf {
        dir.join(format!("{label}_{angle}.fcidump"))
    }
}

#[derive(Debug, Clone)]
pub struct TraceSettings {
    pub pipeline: PipelineConfig,
    pub vqe: VqeConfig,
    pub source: HamiltonianSource,
    /// Relax `ScanSpec::relax_bonds` at each point; needs the built-in source.
    pub relax: bool,
    /// Run every point from the initial parameters, in parallel.
    pub cold_start: bool,
}

impl Default for TraceSettings {
    fn default() -> Self {
        TraceSettings {
            pipeline: PipelineConfig::default(),
            vqe: VqeConfig::default(),
            source: HamiltonianSource::BuiltIn,
            relax: false,
            cold_start: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PathPoint {
    /// Degrees.
    pub coordinate: f64,
    pub geometry: MolecularGeometry,
    pub energy: f64,
    pub vqe: VqeResult,
    pub n_qubits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointFailure {
    pub coordinate: f64,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct ReactionPath {
    pub label: String,
    pub points: Vec<PathPoint>,
    pub failures: Vec<PointFailure>,
    pub barrier_hartree: f64,
    pub barrier_kjmol: f64,
    /// Coordinates of local energy minima.
    pub minima: Vec<f64>,
    pub warm_start: bool,
}

impl ReactionPath {
    fn from_points(label: &str, points: Vec<PathPoint>, failures: Vec<PointFailure>, warm_start: bool) -> Self {
        let energies: Vec<f64> = points.iter().map(|p| p.energy).collect();
        let barrier = match (
            energies.iter().copied().reduce(f64::max),
            energies.iter().copied().reduce(f64::min),
        ) {
            (Some(hi), Some(lo)) => hi - lo,
            _ => 0.0,
        };
        let minima = (0..energies.len())
            .filter(|&n| {
                let below_prev = n == 0 || energies[n] < energies[n - 1];
                let below_next = n + 1 == energies.len() || energies[n] <= energies[n + 1];
                below_prev && below_next
            })
            .map(|n| points[n].coordinate)
            .collect();
        ReactionPath {
            label: label.to_string(),
            points,
            failures,
            barrier_hartree: barrier,
            barrier_kjmol: barrier * HARTREE_TO_KJ_PER_MOL,
            minima,
            warm_start,
        }
    }

    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn all_converged(&self) -> bool {
        self.points.iter().all(|p| p.vqe.converged)
    }

    pub fn path_csv(&self) -> String {
        let e_min = self.points.iter().map(|p| p.energy).fold(f64::INFINITY, f64::min);
        let mut out = String::from("angle_deg,energy_hartree,relative_energy_kjmol,converged,iterations\n");
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{:.9},{:.6},{},{}",
                p.coordinate,
                p.energy,
                (p.energy - e_min) * HARTREE_TO_KJ_PER_MOL,
                p.vqe.converged,
                p.vqe.iterations
            );
        }
        out
    }

    pub fn manifest(&self) -> serde_json::Value {
        json!({
            "label": self.label,
            "n_points": self.points.len(),
            "warm_start": self.warm_start,
            "barrier_hartree": format!("{:.9}", self.barrier_hartree),
            "barrier_kjmol": format!("{:.6}", self.barrier_kjmol),
            "minima_deg": self.minima,
            "hartree_to_kj_per_mol": HARTREE_TO_KJ_PER_MOL,
            "angstrom_to_bohr": ANGSTROM_TO_BOHR,
            "failures": self.failures,
        })
    }
}

fn solve_point(
    geom: &MolecularGeometry,
    angle: f64,
    spec: &ScanSpec,
    settings: &TraceSettings,
    start: Option<&[f64]>,
) -> PointOutcome {
    let problem = |g: &MolecularGeometry| match &settings.source {
        HamiltonianSource::BuiltIn => problem_from_geometry(g, &settings.pipeline),
        HamiltonianSource::FcidumpTemplate { dir } => {
            let ints = read_fcidump(&HamiltonianSource::fcidump_path(dir, &spec.label, angle))?;
            problem_from_integrals(&ints, &settings.pipeline)
        }
    };
    let run = |g: &MolecularGeometry, theta: Option<&[f64]>| -> Result<(VqeResult, usize), String> {
        let p = problem(g).map_err(|e| e.to_string())?;
        let mut cfg = settings.vqe.clone();
        if let Some(t) = theta.filter(|t| t.len() == p.circuit.n_parameters) {
            cfg.initial_theta = Some(t.to_vec());
        }
        let r = minimize(&p.hamiltonian, &p.circuit, &cfg).map_err(|e| e.to_string())?;
        Ok((r, p.n_qubits()))
    };
    let (first, n_qubits) = run(geom, start)?;
    if !settings.relax || spec.relax_bonds.is_empty() {
        return Ok((geom.clone(), first, n_qubits));
    }
    let theta = first.theta.clone();
    let (relaxed, _) = relax_bonds(geom, &spec.relax_bonds, |g| run(g, Some(&theta)).map(|(r, _)| r.energy))
        .map_err(|e| e.to_string())?;
    let (r, n) = run(&relaxed, Some(&theta))?;
    if r.energy <= first.energy {
        Ok((relaxed, r, n))
    } else {
        Ok((geom.clone(), first, n_qubits))
    }
}

/// Runs VQE at every scan point. Warm-started scans go in grid order and
/// start each point from the last converged parameters. Per-point failures
/// are collected rather than aborting the scan.
pub fn trace_path(
    geom: &MolecularGeometry,
    spec: &ScanSpec,
    settings: &TraceSettings,
) -> Result<ReactionPath, PathError> {
    if settings.relax && !matches!(settings.source, HamiltonianSource::BuiltIn) {
        return Err(PathError::InvalidSet(
            "bond relaxation needs geometry-dependent integrals".into(),
        ));
    }
    let scan = generate_scan(geom, spec)?;
    let initial = settings.vqe.initial_theta.clone();
    let outcomes: Vec<(f64, PointOutcome)> = if settings.cold_start {
        scan.par_iter()
            .map(|(angle, g)| (*angle, solve_point(g, *angle, spec, settings, initial.as_deref())))
            .collect()
    } else {
        let mut theta = initial;
        scan.iter()
            .map(|(angle, g)| {
                let r = solve_point(g, *angle, spec, settings, theta.as_deref());
                if let Ok((_, v, _)) = &r {
                    if v.converged || theta.is_none() {
                        theta = Some(v.theta.clone());
                    }
                }
                (*angle, r)
            })
            .collect()
    };
    let mut points = Vec::new();
    let mut failures = Vec::new();
    for (coordinate, r) in outcomes {
        match r {
            Ok((geometry, vqe, n_qubits)) => points.push(PathPoint {
                coordinate,
                geometry,
                energy: vqe.energy,
                vqe,
                n_qubits,
            }),
            Err(message) => failures.push(PointFailure { coordinate, message }),
        }
    }
    Ok(ReactionPath::from_points(
        &spec.label,
        points,
        failures,
        !settings.cold_start,
    ))
}

/// One point of a steepest-descent path in mass-weighted coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MassWeightedPathState {
    /// `√m·x`, √amu·Bohr.
    pub q: Vec<f64>,
    /// Arc length travelled so far.
    pub s: f64,
    /// Unit descent direction; all zeros only at an exactly stationary point.
    pub v: Vec<f64>,
    pub energy: f64,
    /// Norm of the mass-weighted gradient.
    pub gradient_norm: f64,
}

/// Euler integration of `dq/ds = v(s)` with `v = −g_mw / |g_mw|`.
///
/// `eval` returns the energy and Cartesian gradient (Hartree/Bohr). A step
/// that raises the energy is retried with half the length up to five
/// times; the shorter step is kept for the rest of the path.
pub fn steepest_descent_path<F, E>(
    start: &MolecularGeometry,
    mut eval: F,
    step: f64,
    max_steps: usize,
) -> Result<Vec<MassWeightedPathState>, PathError>
where
    F: FnMut(&MolecularGeometry) -> Result<(f64, Vec<f64>), E>,
    E: std::fmt::Display,
{
    if !(step > 0.0) || !step.is_finite() {
        return Err(PathError::InvalidStep(step));
    }
    let sqrt_m: Vec<f64> = start.atoms().iter().flat_map(|a| [a.mass.sqrt(); 3]).collect();
    let mut state_at = |g: &MolecularGeometry, s: f64| -> Result<MassWeightedPathState, PathError> {
        let (energy, grad) = eval(g).map_err(|e| PathError::Energy(e.to_string()))?;
        if grad.len() != sqrt_m.len() {
            return Err(PathError::Energy(format!(
                "gradient has {} entries, expected {}",
                grad.len(),
                sqrt_m.len()
            )));
        }
        let g_mw: Vec<f64> = grad.iter().zip(&sqrt_m).map(|(g, m)| g / m).collect();
        let norm = g_mw.iter().map(|x| x * x).sum::<f64>().sqrt();
        let v = if norm > 0.0 {
            g_mw.iter().map(|x| -x / norm).collect()
        } else {
            vec![0.0; g_mw.len()]
        };
        let q = g.coordinates().iter().zip(&sqrt_m).map(|(x, m)| x * m).collect();
        Ok(MassWeightedPathState {
            q,
            s,
            v,
            energy,
            gradient_norm: norm,
        })
    };
    let mut path = vec![state_at(start, 0.0)?];
    let mut h = step;
    while path.len() <= max_steps {
        let cur = path.last().expect("path starts non-empty");
        if cur.gradient_norm < IRC_GRADIENT_TOL {
            break;
        }
        let mut accepted = None;
        for attempt in 0..=MAX_HALVINGS {
            if attempt > 0 {
                h /= 2.0;
            }
            let x: Vec<f64> = cur
                .q
                .iter()
                .zip(&cur.v)
                .zip(&sqrt_m)
                .map(|((q, v), m)| (q + h * v) / m)
                .collect();
            let g = start.with_coordinates(&x)?;
            let next = state_at(&g, cur.s + h)?;
            if next.energy <= cur.energy {
                accepted = Some(next);
                break;
            }
        }
        match accepted {
            Some(next) => path.push(next),
            None => break,
        }
    }
    Ok(path)
}

pub const PRESET_NAMES: [&str; 4] = ["ethane_cas22", "ethane_cas44", "dichloroethylene", "h4_twist"];

/// A shipped scan: starting geometry plus its config.
#[derive(Debug, Clone)]
pub struct ScanPreset {
    pub name: String,
    pub geometry: MolecularGeometry,
    pub config: RunConfig,
}

impl ScanPreset {
    pub fn spec(&self) -> Result<ScanSpec, PathError> {
        ScanSpec::from_config(&self.config)
    }
}

pub fn preset(name: &str) -> Result<ScanPreset, PathError> {
    let (xyz, conf) = match name {
        "ethane_cas22" => (
            include_str!("../presets/ethane.xyz"),
            include_str!("../presets/ethane_cas22.conf"),
        ),
        "ethane_cas44" => (
            include_str!("../presets/ethane.xyz"),
            include_str!("../presets/ethane_cas44.conf"),
        ),
        "dichloroethylene" => (
            include_str!("../presets/dichloroethylene.xyz"),
            include_str!("../presets/dichloroethylene.conf"),
        ),
        "h4_twist" => (
            include_str!("../presets/h4_twist.xyz"),
            include_str!("../presets/h4_twist.conf"),
        ),
        _ => return Err(PathError::UnknownPreset(name.into())),
    };
    Ok(ScanPreset {
        name: name.into(),
        geometry: parse_xyz(xyz)?,
        config: RunConfig::parse(conf)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::wrap_degrees;
    use crate::simulator::exact_ground_energy;
    use proptest::prelude::*;

    fn h4() -> (MolecularGeometry, ScanSpec) {
        let p = preset("h4_twist").unwrap();
        let spec = p.spec().unwrap();
        (p.geometry, spec)
    }

    #[test]
    fn presets_load() {
        for name in PRESET_NAMES {
            let p = preset(name).unwrap();
            p.spec().unwrap().validate(&p.geometry).unwrap();
        }
        assert!(matches!(preset("benzene"), Err(PathError::UnknownPreset(_))));
    }

    #[test]
    fn grid_counts() {
        let (_, mut spec) = h4();
        assert_eq!(spec.grid().unwrap().len(), 13);
        spec.step = 180.0;
        assert_eq!(spec.grid().unwrap(), vec![0.0, 180.0]);
        spec.step = 7.0;
        assert!(matches!(spec.grid(), Err(PathError::Grid(_))));
        spec.step = 0.0;
        assert!(spec.grid().is_err());
        spec.step = 15.0;
        spec.stop = 0.0;
        assert!(spec.grid().is_err());
        spec.step = 500.0;
        spec.stop = 180.0;
        assert!(spec.grid().is_err());
        spec.start = 180.0;
        spec.stop = 0.0;
        spec.step = -15.0;
        let g = spec.grid().unwrap();
        assert_eq!((g[0], g[12]), (180.0, 0.0));
    }

    #[test]
    fn ethane_scan_hits_every_target() {
        let p = preset("ethane_cas22").unwrap();
        let spec = p.spec().unwrap();
        let scan = generate_scan(&p.geometry, &spec).unwrap();
        assert_eq!(scan.len(), 73);
        let (i, j, k, l) = spec.torsion;
        for (angle, g) in &scan {
            let t = g.torsion_angle(i, j, k, l).unwrap();
            assert!(wrap_degrees(t - angle).abs() < 1e-9, "{angle}: {t}");
            for h in 5..8 {
                assert!((g.distance(1, h) - p.geometry.distance(1, h)).abs() < 1e-10);
                assert!((g.bond_angle(0, 1, h) - p.geometry.bond_angle(0, 1, h)).abs() < 1e-8);
            }
            for a in 0..5 {
                assert_eq!(g.position(a), p.geometry.position(a));
            }
        }
    }

    #[test]
    fn ethane_surrogate_symmetry() {
        // Nuclear repulsion carries the same symmetry as the electronic energy.
        let p = preset("ethane_cas22").unwrap();
        let scan = generate_scan(&p.geometry, &p.spec().unwrap()).unwrap();
        let e: Vec<f64> = scan.iter().map(|(_, g)| g.nuclear_repulsion()).collect();
        assert!((e[0] - e[72]).abs() < 2e-6);
        for n in 0..(72 - 24) {
            assert!((e[n] - e[n + 24]).abs() < 2e-6, "{} vs {}", scan[n].0, scan[n + 24].0);
        }
        // Eclipsed is higher than staggered.
        let at = |a: f64| e[scan.iter().position(|(x, _)| *x == a).unwrap()];
        assert!(at(0.0) > at(60.0));
    }

    #[test]
    fn dichloroethylene_counter_rotation() {
        let p = preset("dichloroethylene").unwrap();
        let spec = p.spec().unwrap();
        let scan = generate_scan(&p.geometry, &spec).unwrap();
        assert_eq!(scan.len(), 13);
        let g0 = &p.geometry;
        let hccl0 = g0.bond_angle(4, 0, 2);
        let hccl1 = g0.bond_angle(5, 1, 3);
        for (angle, g) in &scan {
            assert!((g.torsion_angle(2, 0, 1, 3).unwrap() - angle).abs() < 1e-9);
            assert!((g.bond_angle(4, 0, 2) - hccl0).abs() < 1e-8);
            assert!((g.bond_angle(5, 1, 3) - hccl1).abs() < 1e-8);
            // Both Cl turn by half the torsion, in opposite senses.
            let h = g.torsion_angle(4, 0, 1, 5).unwrap();
            assert!(wrap_degrees(h - angle).abs() < 1e-9);
            for (a, b) in [(0, 2), (1, 3), (0, 4), (1, 5), (2, 4), (3, 5)] {
                assert!((g.distance(a, b) - g0.distance(a, b)).abs() < 1e-10);
            }
        }
        let trans = &scan[12].1;
        let side = |g: &MolecularGeometry, a: usize| g.position(a).y;
        assert!(side(trans, 2) * side(trans, 3) < 0.0);
    }

    #[test]
    fn invalid_sets_rejected() {
        let (g, spec) = h4();
        let mut s = spec.clone();
        s.moving_set = [2, 3].into();
        assert!(matches!(generate_scan(&g, &s), Err(PathError::InvalidSet(_))));
        let mut s = spec.clone();
        s.moving_set = [0].into();
        assert!(generate_scan(&g, &s).is_err());
        let mut s = spec.clone();
        s.counter_rotating_set = Some([3].into());
        assert!(generate_scan(&g, &s).is_err());
        let mut s = spec.clone();
        s.rigid_followers.insert(3, [1].into());
        assert!(generate_scan(&g, &s).is_err());
        let mut s = spec;
        s.moving_set = [3, 9].into();
        assert!(matches!(generate_scan(&g, &s), Err(PathError::Geometry(_))));
    }

    #[test]
    fn relax_constant_energy_keeps_geometry() {
        let (g, _) = h4();
        let (out, e) = relax_bonds(&g, &[(3, 2)], |_| Ok::<_, String>(1.5)).unwrap();
        assert_eq!(out, g);
        assert_eq!(e, 1.5);
        assert!(relax_bonds(&g, &[(3, 3)], |_| Ok::<_, String>(0.0)).is_err());
        assert!(relax_bonds(&g, &[(3, 2)], |_| Err::<f64, _>("boom")).is_err());
    }

    #[test]
    fn relax_quadratic_bond() {
        let (g, _) = h4();
        let r_now = g.distance(3, 2);
        let r0 = r_now * 1.08;
        let (out, e) = relax_bonds(&g, &[(3, 2)], |g: &MolecularGeometry| {
            Ok::<_, String>((g.distance(3, 2) - r0).powi(2))
        })
        .unwrap();
        assert!((out.distance(3, 2) - r0).abs() < 1e-4);
        assert!(e <= (r_now - r0).powi(2));
        assert_eq!(out.position(0), g.position(0));
    }

    #[test]
    fn relax_h2_matches_grid_minimum() {
        let energy = |r: f64| {
            let g = MolecularGeometry::from_bohr(&[("H", [0.0; 3]), ("H", [0.0, 0.0, r])]).unwrap();
            let p = problem_from_geometry(&g, &PipelineConfig::default()).unwrap();
            exact_ground_energy(&p.hamiltonian).unwrap().energy
        };
        // grid oracle: coarse pass then a fine pass around the best point
        let coarse = (0..=300).map(|n| 1.2 + n as f64 * 1e-3);
        let best = coarse.min_by(|a, b| energy(*a).total_cmp(&energy(*b))).unwrap();
        let fine = (0..=200).map(|n| best - 1e-3 + n as f64 * 1e-5);
        let r_grid = fine.min_by(|a, b| energy(*a).total_cmp(&energy(*b))).unwrap();

        let start = MolecularGeometry::from_bohr(&[("H", [0.0; 3]), ("H", [0.0, 0.0, 1.45])]).unwrap();
        let e_start = energy(1.45);
        let (out, e) = relax_bonds(&start, &[(1, 0)], |g: &MolecularGeometry| {
            Ok::<_, String>(energy(g.distance(0, 1)))
        })
        .unwrap();
        assert!(
            (out.distance(0, 1) - r_grid).abs() < 2e-4,
            "{} vs {r_grid}",
            out.distance(0, 1)
        );
        assert!(e <= e_start + 1e-12);
    }

    fn fast_settings(cold: bool) -> TraceSettings {
        TraceSettings {
            cold_start: cold,
            pipeline: PipelineConfig {
                active_space: Some((2, 2)),
                ..PipelineConfig::default()
            },
            ..TraceSettings::default()
        }
    }

    #[test]
    fn warm_start_not_worse_than_cold() {
        let (g, spec) = h4();
        let warm = trace_path(&g, &spec, &fast_settings(false)).unwrap();
        let cold = trace_path(&g, &spec, &fast_settings(true)).unwrap();
        assert!(warm.is_complete() && cold.is_complete());
        assert_eq!(warm.points.len(), 13);
        for (w, c) in warm.points.iter().zip(&cold.points) {
            assert_eq!(w.coordinate, c.coordinate);
            assert!(
                w.energy <= c.energy + 1e-7,
                "{}: {} > {}",
                w.coordinate,
                w.energy,
                c.energy
            );
            let exact = {
                let p = problem_from_geometry(&w.geometry, &fast_settings(false).pipeline).unwrap();
                exact_ground_energy(&p.hamiltonian).unwrap().energy
            };
            assert!(w.energy >= exact - 1e-9);
            assert!(w.energy - exact < 1e-6);
        }
        assert!(warm.barrier_hartree >= 0.0);
        assert!((warm.barrier_kjmol - warm.barrier_hartree * HARTREE_TO_KJ_PER_MOL).abs() < 1e-12);
    }

    #[test]
    fn barrier_independent_of_direction() {
        let (g, spec) = h4();
        let fwd = trace_path(&g, &spec, &fast_settings(false)).unwrap();
        let rev_spec = ScanSpec {
            start: spec.stop,
            stop: spec.start,
            step: -spec.step,
            ..spec
        };
        let rev = trace_path(&g, &rev_spec, &fast_settings(false)).unwrap();
        assert!((fwd.barrier_hartree - rev.barrier_hartree).abs() < 1e-6);
        assert_eq!(rev.points[0].coordinate, 180.0);
        let csv = fwd.path_csv();
        assert_eq!(csv.lines().count(), 14);
        assert!(csv.starts_with("angle_deg,energy_hartree,relative_energy_kjmol,converged,iterations"));
        let m = fwd.manifest();
        assert_eq!(m["n_points"], 13);
        assert_eq!(m["hartree_to_kj_per_mol"], HARTREE_TO_KJ_PER_MOL);
    }

    #[test]
    fn missing_fcidumps_recorded_as_failures() {
        let (g, spec) = h4();
        let dir = tempfile::tempdir().unwrap();
        let ints = crate::pipeline::integrals_from_geometry(&g).unwrap();
        let path = HamiltonianSource::fcidump_path(dir.path(), &spec.label, 15.0);
        std::fs::write(&path, crate::integrals::write_fcidump(&ints)).unwrap();
        let settings = TraceSettings {
            source: HamiltonianSource::FcidumpTemplate {
                dir: dir.path().to_path_buf(),
            },
            ..fast_settings(false)
        };
        let path = trace_path(&g, &spec, &settings).unwrap();
        assert_eq!(path.points.len(), 1);
        assert_eq!(path.points[0].coordinate, 15.0);
        assert_eq!(path.failures.len(), 12);
        assert!(path.failures[0].message.contains("h4_twist_0.fcidump"));
        assert!(!path.is_complete());
        let relax = TraceSettings {
            relax: true,
            ..settings
        };
        assert!(trace_path(&g, &spec, &relax).is_err());
    }

    #[test]
    fn relaxed_scan_lowers_energy() {
        let (g, mut spec) = h4();
        spec.stop = 30.0;
        let plain = trace_path(&g, &spec, &fast_settings(false)).unwrap();
        let relaxed = trace_path(
            &g,
            &spec,
            &TraceSettings {
                relax: true,
                ..fast_settings(false)
            },
        )
        .unwrap();
        for (a, b) in plain.points.iter().zip(&relaxed.points) {
            assert!(b.energy <= a.energy + 1e-12);
        }
    }

    #[test]
    fn minima_detection() {
        let (g, _) = h4();
        let dummy = |c: f64, e: f64| PathPoint {
            coordinate: c,
            geometry: g.clone(),
            energy: e,
            vqe: VqeResult {
                energy: e,
                theta: vec![],
                iterations: 0,
                evaluations: 0,
                trace: vec![],
                converged: true,
                stderr: None,
            },
            n_qubits: 2,
        };
        let pts = vec![
            dummy(0.0, 1.0),
            dummy(1.0, 0.0),
            dummy(2.0, 2.0),
            dummy(3.0, 0.5),
            dummy(4.0, 0.7),
        ];
        let path = ReactionPath::from_points("x", pts, vec![], true);
        assert_eq!(path.minima, vec![1.0, 3.0]);
        assert_eq!(path.barrier_hartree, 2.0);
    }

    // Müller-Brown surface, scaled so that Hartree/Bohr magnitudes are moderate.
    fn muller_brown(x: f64, y: f64) -> (f64, f64, f64) {
        const A: [f64; 4] = [-200.0, -100.0, -170.0, 15.0];
        const AA: [f64; 4] = [-1.0, -1.0, -6.5, 0.7];
        const B: [f64; 4] = [0.0, 0.0, 11.0, 0.6];
        const C: [f64; 4] = [-10.0, -10.0, -6.5, 0.7];
        const X0: [f64; 4] = [1.0, 0.0, -0.5, -1.0];
        const Y0: [f64; 4] = [0.0, 0.5, 1.5, 1.0];
        let scale = 1e-3;
        let (mut e, mut gx, mut gy) = (0.0, 0.0, 0.0);
        for n in 0..4 {
            let dx = x - X0[n];
            let dy = y - Y0[n];
            let t = A[n] * (AA[n] * dx * dx + B[n] * dx * dy + C[n] * dy * dy).exp();
            e += t;
            gx += t * (2.0 * AA[n] * dx + B[n] * dy);
            gy += t * (B[n] * dx + 2.0 * C[n] * dy);
        }
        (scale * e, scale * gx, scale * gy)
    }

    fn one_atom(x: f64, y: f64) -> MolecularGeometry {
        MolecularGeometry::from_bohr(&[("H", [x, y, 0.0])]).unwrap()
    }

    fn mb_eval(g: &MolecularGeometry) -> Result<(f64, Vec<f64>), String> {
        let p = g.position(0);
        let (e, gx, gy) = muller_brown(p.x, p.y);
        Ok((e, vec![gx, gy, 0.0]))
    }

    #[test]
    fn muller_brown_descent_reaches_minimum() {
        let path = steepest_descent_path(&one_atom(-0.3, 0.9), mb_eval, 0.02, 20_000).unwrap();
        let last = path.last().unwrap();
        assert!(last.gradient_norm < IRC_GRADIENT_TOL, "{}", last.gradient_norm);
        for w in path.windows(2) {
            assert!(w[1].energy <= w[0].energy + 1e-8);
            assert!(w[1].s > w[0].s);
        }
        for st in &path {
            let n: f64 = st.v.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-10);
        }
        // Known Müller-Brown minima; this start drains into the shallow one.
        let m = 1.00782503f64.sqrt();
        let (x, y) = (last.q[0] / m, last.q[1] / m);
        assert!((x + 0.050).abs() < 2e-3 && (y - 0.467).abs() < 2e-3, "({x}, {y})");
        let deep = steepest_descent_path(&one_atom(-0.8, 1.2), mb_eval, 0.02, 20_000).unwrap();
        let end = deep.last().unwrap();
        assert!(end.gradient_norm < IRC_GRADIENT_TOL);
        assert!((end.q[0] / m + 0.558).abs() < 2e-3 && (end.q[1] / m - 1.442).abs() < 2e-3);
    }

    #[test]
    fn stationary_start_is_single_point() {
        let quad = |g: &MolecularGeometry| -> Result<(f64, Vec<f64>), String> {
            let c = g.coordinates();
            Ok((c.iter().map(|x| x * x).sum(), c.iter().map(|x| 2.0 * x).collect()))
        };
        let path = steepest_descent_path(&one_atom(0.0, 0.0), quad, 0.1, 100).unwrap();
        assert_eq!(path.len(), 1);
        assert!(steepest_descent_path(&one_atom(0.0, 0.0), quad, 0.0, 100).is_err());
        let path = steepest_descent_path(&one_atom(1.0, 0.0), quad, 0.1, 3).unwrap();
        assert_eq!(path.len(), 4);
    }

    #[test]
    fn equal_masses_follow_cartesian_descent() {
        let start = MolecularGeometry::from_bohr(&[("H", [0.3, -0.2, 0.1]), ("H", [2.0, 0.4, -0.5])]).unwrap();
        let f = |x: &[f64]| -> (f64, Vec<f64>) {
            let w = [1.0, 3.0, 0.5, 2.0, 1.5, 4.0];
            let e = x.iter().zip(w).map(|(x, w)| w * x * x).sum();
            (e, x.iter().zip(w).map(|(x, w)| 2.0 * w * x).collect())
        };
        let mw = steepest_descent_path(
            &start,
            |g: &MolecularGeometry| Ok::<_, String>(f(&g.coordinates())),
            0.05,
            40,
        )
        .unwrap();
        // Plain Cartesian descent with step h/√m and the same halving rule.
        let sqrt_m = 1.00782503f64.sqrt();
        let mut x = start.coordinates();
        let mut h = 0.05 / sqrt_m;
        let mut xs = vec![x.clone()];
        for _ in 0..40 {
            let (e, g) = f(&x);
            let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n / sqrt_m < IRC_GRADIENT_TOL {
                break;
            }
            let mut next = None;
            for attempt in 0..=MAX_HALVINGS {
                if attempt > 0 {
                    h /= 2.0;
                }
                let y: Vec<f64> = x.iter().zip(&g).map(|(x, g)| x - h * g / n).collect();
                if f(&y).0 <= e {
                    next = Some(y);
                    break;
                }
            }
            match next {
                Some(y) => x = y,
                None => break,
            }
            xs.push(x.clone());
        }
        assert_eq!(mw.len(), xs.len());
        for (st, x) in mw.iter().zip(&xs) {
            for (q, x) in st.q.iter().zip(x) {
                assert!((q / sqrt_m - x).abs() < 1e-10);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn scan_preserves_rigid_groups(step in prop::sample::select(vec![5.0, 10.0, 15.0, 30.0, 45.0, 90.0])) {
            let p = preset("dichloroethylene").unwrap();
            let mut spec = p.spec().unwrap();
            spec.step = step;
            let scan = generate_scan(&p.geometry, &spec).unwrap();
            let g0 = &p.geometry;
            for (_, g) in &scan {
                for a in 0..6 {
                    for b in 0..a {
                        let same_side = [0usize, 2, 4].contains(&a) == [0usize, 2, 4].contains(&b);
                        if same_side || b < 2 {
                            prop_assert!((g.distance(a, b) - g0.distance(a, b)).abs() < 1e-10);
                        }
                    }
                }
            }
        }
    }
}
