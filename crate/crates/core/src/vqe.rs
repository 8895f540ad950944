//! Variational energy minimization and nuclear energy gradients.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ansatz::{AnsatzCircuit, AnsatzError, AnsatzGate};
use crate::geometry::MolecularGeometry;
use crate::pauli::PauliSum;
use crate::simulator::{expectation_exact, expectation_sampled, ShotPlan, SimError, Statevector};

#[derive(Debug, Error)]
pub enum VqeError {
    #[error("energy is not finite at θ = {0:?}")]
    NonFiniteEnergy(Vec<f64>),
    #[error("invalid optimizer setting: {0}")]
    InvalidConfig(String),
    #[error("Hamiltonian acts on {hamiltonian} qubits, ansatz on {ansatz}")]
    SizeMismatch { hamiltonian: usize, ansatz: usize },
    #[error(transparent)]
    Ansatz(#[from] AnsatzError),
    #[error(transparent)]
    Simulation(#[from] SimError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Simplex,
    ParameterShiftDescent,
}

impl fmt::Display for Optimizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Optimizer::Simplex => "simplex",
            Optimizer::ParameterShiftDescent => "parameter_shift_descent",
        })
    }
}

impl FromStr for Optimizer {
    type Err = VqeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "simplex" | "nelder_mead" => Ok(Optimizer::Simplex),
            "parameter_shift_descent" | "parameter_shift" => Ok(Optimizer::ParameterShiftDescent),
            _ => Err(VqeError::InvalidConfig(format!("unknown optimizer `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VqeConfig {
    /// Energy-evaluation cap for the simplex, step cap for descent.
    pub max_iterations: usize,
    pub energy_tolerance: f64,
    pub optimizer: Optimizer,
    /// Starting parameters; `None` starts from the reference state.
    pub initial_theta: Option<Vec<f64>>,
    /// Additional optimizer cycles started from the best point so far.
    pub restarts: usize,
    /// Shot-sampled expectations when set.
    pub shot_plan: Option<ShotPlan>,
    /// Initial simplex edge in radians.
    pub simplex_edge: f64,
    /// Initial step size for parameter-shift descent.
    pub learning_rate: f64,
}

impl Default for VqeConfig {
    fn default() -> Self {
        VqeConfig {
            max_iterations: 2000,
            energy_tolerance: 1e-8,
            optimizer: Optimizer::Simplex,
            initial_theta: None,
            restarts: 1,
            shot_plan: None,
            simplex_edge: 0.1,
            learning_rate: 0.5,
        }
    }
}

impl VqeConfig {
    fn validate(&self, n_parameters: usize) -> Result<(), VqeError> {
        if !(self.energy_tolerance > 0.0) {
            return Err(VqeError::InvalidConfig("energy tolerance must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(VqeError::InvalidConfig("max_iterations must be at least 1".into()));
        }
        if !(self.simplex_edge > 0.0) || !(self.learning_rate > 0.0) {
            return Err(VqeError::InvalidConfig("step sizes must be positive".into()));
        }
        if let Some(t) = &self.initial_theta {
            if t.len() != n_parameters {
                return Err(VqeError::InvalidConfig(format!(
                    "initial θ has {} entries, ansatz has {n_parameters} parameters",
                    t.len()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub energy: f64,
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VqeResult {
    pub energy: f64,
    pub theta: Vec<f64>,
    /// Optimizer iterations over all cycles.
    pub iterations: usize,
    pub evaluations: usize,
    /// Best point after each iteration.
    pub trace: Vec<TracePoint>,
    pub converged: bool,
    /// Standard error of the final energy in sampled mode.
    pub stderr: Option<f64>,
}

impl VqeResult {
    /// `iteration,energy,parameter_norm` rows.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iteration,energy,parameter_norm\n");
        for t in &self.trace {
            let norm = t.theta.iter().map(|x| x * x).sum::<f64>().sqrt();
            out.push_str(&format!("{},{:.12},{:.12}\n", t.iteration, t.energy, norm));
        }
        out
    }
}

struct Objective<'a> {
    hamiltonian: &'a PauliSum,
    circuit: &'a AnsatzCircuit,
    plan: Option<ShotPlan>,
    evaluations: usize,
}

impl Objective<'_> {
    fn state_energy(&mut self, state: &Statevector) -> Result<(f64, f64), VqeError> {
        self.evaluations += 1;
        match &self.plan {
            None => Ok((expectation_exact(state, self.hamiltonian)?, 0.0)),
            Some(plan) => {
                // Fresh, reproducible sample stream per evaluation.
                let seed = plan
                    .seed
                    .wrapping_add((self.evaluations as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
                let est = expectation_sampled(state, self.hamiltonian, &ShotPlan::new(plan.shots_per_term, seed)?)?;
                Ok((est.mean, est.stderr))
            }
        }
    }

    fn energy(&mut self, theta: &[f64]) -> Result<f64, VqeError> {
        let state = self.circuit.prepare(theta)?;
        let (e, _) = self.state_energy(&state)?;
        if !e.is_finite() {
            return Err(VqeError::NonFiniteEnergy(theta.to_vec()));
        }
        Ok(e)
    }

    /// Parameter-shift gradient: each gate `exp(i·m·θ·P/2)` contributes
    /// `m·½[E(+π/2) − E(−π/2)]` with the shift applied to that gate only.
    fn gradient(&mut self, theta: &[f64]) -> Result<Vec<f64>, VqeError> {
        let mut g = vec![0.0; theta.len()];
        let shift = std::f64::consts::FRAC_PI_2;
        for (index, gate) in self.circuit.gates.iter().enumerate() {
            if let AnsatzGate::Rotation {
                parameter, multiplier, ..
            } = gate
            {
                let plus = self.circuit.prepare_shifted(theta, index, shift)?;
                let minus = self.circuit.prepare_shifted(theta, index, -shift)?;
                let (ep, _) = self.state_energy(&plus)?;
                let (em, _) = self.state_energy(&minus)?;
                g[*parameter] += multiplier * 0.5 * (ep - em);
            }
        }
        Ok(g)
    }
}

/// Minimizes `⟨ψ(θ)|H|ψ(θ)⟩` over the circuit parameters.
pub fn minimize(hamiltonian: &PauliSum, circuit: &AnsatzCircuit, cfg: &VqeConfig) -> Result<VqeResult, VqeError> {
    if hamiltonian.n_qubits() != circuit.n_qubits {
        return Err(VqeError::SizeMismatch {
            hamiltonian: hamiltonian.n_qubits(),
            ansatz: circuit.n_qubits,
        });
    }
    cfg.validate(circuit.n_parameters)?;
    let mut obj = Objective {
        hamiltonian,
        circuit,
        plan: cfg.shot_plan,
        evaluations: 0,
    };
    let theta0 = cfg
        .initial_theta
        .clone()
        .unwrap_or_else(|| vec![0.0; circuit.n_parameters]);
    let e0 = obj.energy(&theta0)?;
    let mut trace = vec![TracePoint {
        iteration: 0,
        energy: e0,
        theta: theta0.clone(),
    }];
    let mut best = (e0, theta0);
    let mut converged = circuit.n_parameters == 0;
    let mut iterations = 0;
    if !converged {
        for cycle in 0..=cfg.restarts {
            let before = best.0;
            let outcome = match cfg.optimizer {
                Optimizer::Simplex => nelder_mead(&mut obj, &best, cfg, &mut iterations, &mut trace)?,
                Optimizer::ParameterShiftDescent => shift_descent(&mut obj, &best, cfg, &mut iterations, &mut trace)?,
            };
            let (point, cycle_converged) = outcome;
            if point.0 <= best.0 {
                best = point;
            }
            converged = cycle_converged;
            if !converged || (cycle > 0 && before - best.0 < cfg.energy_tolerance) {
                break;
            }
            if obj.evaluations >= cfg.max_iterations * (cfg.restarts + 1) {
                break;
            }
        }
    }
    let stderr = match cfg.shot_plan {
        None => None,
        Some(_) => {
            let state = circuit.prepare(&best.1)?;
            let (e, s) = obj.state_energy(&state)?;
            best.0 = e;
            Some(s)
        }
    };
    Ok(VqeResult {
        energy: best.0,
        theta: best.1,
        iterations,
        evaluations: obj.evaluations,
        trace,
        converged,
        stderr,
    })
}

type Point = (f64, Vec<f64>);

/// Downhill simplex with dimension-adapted coefficients. Converged when the
/// simplex energies agree within the tolerance.
fn nelder_mead(
    obj: &mut Objective,
    start: &Point,
    cfg: &VqeConfig,
    iterations: &mut usize,
    trace: &mut Vec<TracePoint>,
) -> Result<(Point, bool), VqeError> {
    let n = start.1.len();
    let nf = n as f64;
    let (alpha, beta, gamma, delta) = if n >= 2 {
        (1.0, 1.0 + 2.0 / nf, 0.75 - 1.0 / (2.0 * nf), 1.0 - 1.0 / nf)
    } else {
        (1.0, 2.0, 0.5, 0.5)
    };
    let budget = obj.evaluations + cfg.max_iterations;
    let mut simplex: Vec<Point> = vec![start.clone()];
    for k in 0..n {
        let mut x = start.1.clone();
        x[k] += cfg.simplex_edge;
        simplex.push((obj.energy(&x)?, x));
    }
    let combine =
        |a: &[f64], b: &[f64], t: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect() };
    loop {
        simplex.sort_by(|a, b| a.0.total_cmp(&b.0));
        let spread = simplex[n].0 - simplex[0].0;
        if spread < cfg.energy_tolerance {
            return Ok((simplex[0].clone(), true));
        }
        if obj.evaluations >= budget {
            return Ok((simplex[0].clone(), false));
        }
        *iterations += 1;
        let centroid: Vec<f64> = (0..n)
            .map(|k| simplex[..n].iter().map(|p| p.1[k]).sum::<f64>() / nf)
            .collect();
        let worst = simplex[n].clone();
        let xr = combine(&centroid, &worst.1, -alpha);
        let fr = obj.energy(&xr)?;
        if fr < simplex[0].0 {
            let xe = combine(&centroid, &worst.1, -alpha * beta);
            let fe = obj.energy(&xe)?;
            simplex[n] = if fe < fr { (fe, xe) } else { (fr, xr) };
        } else if fr < simplex[n - 1].0 {
            simplex[n] = (fr, xr);
        } else {
            let (xc, fc) = if fr < worst.0 {
                let xc = combine(&centroid, &xr, gamma);
                let fc = obj.energy(&xc)?;
                (xc, fc)
            } else {
                let xc = combine(&centroid, &worst.1, gamma);
                let fc = obj.energy(&xc)?;
                (xc, fc)
            };
            if fc < fr.min(worst.0) {
                simplex[n] = (fc, xc);
            } else {
                let best = simplex[0].1.clone();
                for p in simplex.iter_mut().skip(1) {
                    let x = combine(&best, &p.1, delta);
                    *p = (obj.energy(&x)?, x);
                }
            }
        }
        let lead = simplex
            .iter()
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .expect("simplex is non-empty");
        trace.push(TracePoint {
            iteration: *iterations,
            energy: lead.0,
            theta: lead.1.clone(),
        });
    }
}

/// Gradient descent on parameter-shift gradients; a step that raises the
/// energy is retried at half the step size.
fn shift_descent(
    obj: &mut Objective,
    start: &Point,
    cfg: &VqeConfig,
    iterations: &mut usize,
    trace: &mut Vec<TracePoint>,
) -> Result<(Point, bool), VqeError> {
    let mut current = start.clone();
    let mut rate = cfg.learning_rate;
    for _ in 0..cfg.max_iterations {
        let g = obj.gradient(&current.1)?;
        let gmax = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if gmax < cfg.energy_tolerance.sqrt() * 0.1 {
            return Ok((current, true));
        }
        *iterations += 1;
        let mut accepted = false;
        for _ in 0..30 {
            let x: Vec<f64> = current.1.iter().zip(&g).map(|(t, d)| t - rate * d).collect();
            let e = obj.energy(&x)?;
            if e <= current.0 {
                let improvement = current.0 - e;
                current = (e, x);
                accepted = true;
                rate *= 1.2;
                if improvement < cfg.energy_tolerance * 1e-2 && gmax < cfg.energy_tolerance.sqrt() {
                    trace.push(TracePoint {
                        iteration: *iterations,
                        energy: current.0,
                        theta: current.1.clone(),
                    });
                    return Ok((current, true));
                }
                break;
            }
            rate *= 0.5;
        }
        trace.push(TracePoint {
            iteration: *iterations,
            energy: current.0,
            theta: current.1.clone(),
        });
        if !accepted {
            return Ok((current, true));
        }
    }
    Ok((current, false))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMethod {
    CentralFd,
    HellmannFeynmanFd,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientResult {
    /// `dE/dR_i` in Hartree per Bohr, one entry per requested coordinate.
    pub gradient: Vec<f64>,
    /// Flattened Cartesian coordinate indices (`3·atom + axis`).
    pub coordinates: Vec<usize>,
    /// Displacement `dR` in Bohr.
    pub step: f64,
    pub method: GradientMethod,
    /// Richardson estimate of the truncation error per coordinate.
    pub fd_error_estimate: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum GradientError {
    #[error("finite-difference step must be positive and finite (got {0})")]
    InvalidStep(f64),
    #[error("coordinate {index} out of range for {n} Cartesian coordinates")]
    CoordinateOutOfRange { index: usize, n: usize },
    #[error("energy evaluation failed for coordinate {coordinate} at the displaced geometry: {message}")]
    Energy {
        coordinate: usize,
        geometry: Box<MolecularGeometry>,
        message: String,
    },
    #[error(transparent)]
    Simulation(#[from] SimError),
}

/// Central difference `[f(x + h/2) − f(x − h/2)] / h` and its Richardson
/// error estimate against step `2h`.
pub fn central_difference<F, E>(f: F, x: f64, h: f64) -> Result<(f64, f64), E>
where
    F: Fn(f64) -> Result<f64, E>,
{
    let g1 = (f(x + h / 2.0)? - f(x - h / 2.0)?) / h;
    let g2 = (f(x + h)? - f(x - h)?) / (2.0 * h);
    Ok((g1, (g1 - g2).abs() / 3.0))
}

/// Nuclear gradient by central differences of `energy_fn` along the listed
/// Cartesian coordinates. Coordinates are evaluated in parallel.
pub fn gradient_central_fd<F, E>(
    energy_fn: F,
    geom: &MolecularGeometry,
    coordinates: &[usize],
    dr: f64,
) -> Result<GradientResult, GradientError>
where
    F: Fn(&MolecularGeometry) -> Result<f64, E> + Sync,
    E: fmt::Display,
{
    if !(dr > 0.0) || !dr.is_finite() {
        return Err(GradientError::InvalidStep(dr));
    }
    let base = geom.coordinates();
    if let Some(&index) = coordinates.iter().find(|&&c| c >= base.len()) {
        return Err(GradientError::CoordinateOutOfRange { index, n: base.len() });
    }
    let per_coordinate: Vec<Result<(f64, f64), GradientError>> = coordinates
        .par_iter()
        .map(|&c| {
            let displaced = |x: f64| -> Result<f64, GradientError> {
                let mut coords = base.clone();
                coords[c] = x;
                let g = geom.with_coordinates(&coords).map_err(|e| GradientError::Energy {
                    coordinate: c,
                    geometry: Box::new(geom.clone()),
                    message: e.to_string(),
                })?;
                energy_fn(&g).map_err(|e| GradientError::Energy {
                    coordinate: c,
                    geometry: Box::new(g.clone()),
                    message: e.to_string(),
                })
            };
            central_difference(displaced, base[c], dr)
        })
        .collect();
    let mut gradient = Vec::with_capacity(coordinates.len());
    let mut errors = Vec::with_capacity(coordinates.len());
    for r in per_coordinate {
        let (g, e) = r?;
        gradient.push(g);
        errors.push(e);
    }
    Ok(GradientResult {
        gradient,
        coordinates: coordinates.to_vec(),
        step: dr,
        method: GradientMethod::CentralFd,
        fd_error_estimate: errors,
    })
}

/// `⟨ψ|H₊ − H₋|ψ⟩ / dR` with `H±` built at `±dR/2`; terms missing from one
/// side count as zero.
pub fn gradient_hellmann_feynman_fd(
    h_plus: &PauliSum,
    h_minus: &PauliSum,
    state: &Statevector,
    dr: f64,
) -> Result<f64, GradientError> {
    if !(dr > 0.0) || !dr.is_finite() {
        return Err(GradientError::InvalidStep(dr));
    }
    let diff = h_plus - h_minus;
    Ok(expectation_exact(state, &diff)? / dr)
}
