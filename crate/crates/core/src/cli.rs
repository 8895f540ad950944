//! Command-line front end: `energy`, `scan`, `grad`, `dump-hamiltonian` and
//! `fcidump-roundtrip`.
//!
//! Settings come from a flat `key = value` file, then a scan preset if one
//! is named, then `key=value` arguments. Every run writes the settings it
//! actually used to `resolved.conf` in the output directory.

use std::ffi::OsString;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use thiserror::Error;

use crate::ansatz::AnsatzError;
use crate::config::{ConfigError, RunConfig};
use crate::geometry::{parse_xyz, write_xyz, GeometryError, MolecularGeometry};
use crate::integrals::{write_fcidump, IntegralSet};
use crate::mapping::Encoding;
use crate::pathfinder::{preset, trace_path, HamiltonianSource, PathError, ScanSpec, TraceSettings};
use crate::pauli::PauliSum;
use crate::pipeline::{
    integrals_from_geometry, problem_from_integrals, read_fcidump, AnsatzKind, PipelineConfig, PipelineError,
    QubitProblem,
};
use crate::simulator::{exact_ground_energy, ShotPlan, SimError, MAX_QUBITS, RNG_ALGORITHM};
use crate::vqe::{
    gradient_central_fd, gradient_hellmann_feynman_fd, minimize, GradientError, GradientMethod, GradientResult,
    VqeConfig, VqeError,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_PARTIAL: i32 = 3;

/// Largest register for which the exact ground energy is reported alongside VQE.
const EXACT_REPORT_QUBITS: usize = 12;

#[derive(Debug, Parser)]
#[command(name = "ircvqe", version, about = "VQE energies, gradients and torsion scans")]
pub struct Cli {
    /// Worker threads for parallel sections.
    #[arg(long, default_value_t = 1, global = true)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ground-state energy at one geometry or FCIDUMP.
    Energy(RunArgs),
    /// VQE along a torsion scan.
    Scan(RunArgs),
    /// Nuclear gradient by finite differences.
    Grad(RunArgs),
    /// Write the qubit Hamiltonian and ansatz.
    DumpHamiltonian(RunArgs),
    /// Write integrals as FCIDUMP and check they read back unchanged.
    FcidumpRoundtrip(RunArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Config file of `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "ircvqe-out")]
    pub out: PathBuf,
    /// `key=value` overrides applied after the config file.
    pub overrides: Vec<String>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Path(#[from] PathError),
    #[error(transparent)]
    Vqe(#[from] VqeError),
    #[error(transparent)]
    Gradient(#[from] GradientError),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error(transparent)]
    Ansatz(#[from] AnsatzError),
}

/// Parses arguments, runs one subcommand and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    if cli.threads == 0 {
        eprintln!("error: --threads must be at least 1");
        return EXIT_INPUT;
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return EXIT_INPUT;
        }
    };
    let result = pool.install(|| match &cli.command {
        Command::Energy(a) => Session::open(a).and_then(|s| s.energy()),
        Command::Scan(a) => Session::open(a).and_then(|s| s.scan()),
        Command::Grad(a) => Session::open(a).and_then(|s| s.grad()),
        Command::DumpHamiltonian(a) => Session::open(a).and_then(|s| s.dump_hamiltonian()),
        Command::FcidumpRoundtrip(a) => Session::open(a).and_then(|s| s.fcidump_roundtrip()),
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Rounds to the 9 decimals used for every reported energy.
fn r9(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

struct Session {
    cfg: RunConfig,
    out: PathBuf,
    seed: u64,
}

enum Source {
    Geometry(MolecularGeometry),
    Fcidump(IntegralSet),
}

impl Session {
    fn open(args: &RunArgs) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(p) => RunConfig::parse(&read_text(p)?)?,
            None => RunConfig::new(),
        };
        let mut overrides = RunConfig::new();
        for item in &args.overrides {
            let (k, v) = item
                .split_once('=')
                .filter(|(k, _)| !k.trim().is_empty())
                .ok_or_else(|| CliError::Usage(format!("override `{item}` is not key=value")))?;
            overrides.set(k.trim(), v.trim());
        }
        if let Some(seed) = args.seed {
            overrides.set("seed", seed);
        }
        let mut cfg = file.merged(&overrides);
        if let Some(name) = cfg.get("preset").map(str::to_string) {
            cfg = preset(&name)?.config.merged(&cfg);
        }
        let seed = cfg.parsed_or("seed", 0u64)?;
        cfg.set("seed", seed);
        std::fs::create_dir_all(&args.out).map_err(|source| CliError::Io {
            path: args.out.clone(),
            source,
        })?;
        Ok(Session {
            cfg,
            out: args.out.clone(),
            seed,
        })
    }

    /// Value of `key`, recording `default` in the resolved config when absent.
    fn value<T>(&mut self, key: &str, default: T) -> Result<T, CliError>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        self.cfg.set_default(key, &default);
        Ok(self.cfg.parsed_or(key, default)?)
    }

    fn write(&self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.out.join(name);
        std::fs::write(&path, contents).map_err(|source| CliError::Io { path, source })
    }

    fn write_json(&self, name: &str, value: &serde_json::Value) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("JSON values serialize");
        text.push('\n');
        self.write(name, &text)
    }

    fn write_resolved(&self) -> Result<(), CliError> {
        self.write("resolved.conf", &self.cfg.to_text())
    }

    /// Absolute form of a path-valued key, so resolved.conf runs from anywhere.
    fn path_value(&mut self, key: &str) -> Result<Option<PathBuf>, CliError> {
        let Some(raw) = self.cfg.get(key).map(PathBuf::from) else {
            return Ok(None);
        };
        let abs = std::fs::canonicalize(&raw).map_err(|source| CliError::Io {
            path: raw.clone(),
            source,
        })?;
        self.cfg.set(key, abs.display());
        Ok(Some(abs))
    }

    fn geometry(&mut self) -> Result<Option<MolecularGeometry>, CliError> {
        let Some(path) = self.path_value("geometry")? else {
            return Ok(None);
        };
        let mut geom = parse_xyz(&read_text(&path)?)?;
        if self.cfg.contains("charge") || self.cfg.contains("multiplicity") {
            let charge = self.value("charge", geom.charge())?;
            let mult = self.value("multiplicity", geom.multiplicity())?;
            geom = geom.with_charge(charge, mult)?;
        }
        Ok(Some(geom))
    }

    fn source(&mut self) -> Result<Source, CliError> {
        match (self.cfg.contains("geometry"), self.cfg.contains("fcidump")) {
            (true, true) => Err(CliError::Usage("set only one of `geometry` and `fcidump`".into())),
            (false, false) => Err(CliError::Usage("set `geometry` (XYZ file) or `fcidump`".into())),
            (true, false) => Ok(Source::Geometry(self.geometry()?.expect("key checked"))),
            (false, true) => {
                let raw = PathBuf::from(self.cfg.get("fcidump").expect("key checked"));
                let ints = read_fcidump(&raw)?;
                self.path_value("fcidump")?;
                Ok(Source::Fcidump(ints))
            }
        }
    }

    fn integrals(&mut self) -> Result<IntegralSet, CliError> {
        Ok(match self.source()? {
            Source::Geometry(g) => integrals_from_geometry(&g)?,
            Source::Fcidump(ints) => ints,
        })
    }

    fn pipeline(&mut self) -> Result<PipelineConfig, CliError> {
        let active_space = match (
            self.cfg.parsed("active_electrons")?,
            self.cfg.parsed("active_orbitals")?,
        ) {
            (Some(e), Some(o)) => Some((e, o)),
            (None, None) => None,
            _ => {
                return Err(CliError::Usage(
                    "`active_electrons` and `active_orbitals` go together".into(),
                ))
            }
        };
        let encoding: Encoding = self.value("encoding", Encoding::Parity)?;
        let taper = self.cfg.flag("taper", encoding == Encoding::Parity)?;
        self.cfg.set("taper", taper);
        let ansatz: AnsatzKind = self.value("ansatz", AnsatzKind::Uccsd)?;
        Ok(PipelineConfig {
            active_space,
            encoding,
            taper,
            ansatz,
        })
    }

    fn vqe(&mut self) -> Result<VqeConfig, CliError> {
        let d = VqeConfig::default();
        let shot_plan = match self.cfg.parsed::<u64>("shots")? {
            Some(s) => Some(ShotPlan::new(s, self.seed)?),
            None => None,
        };
        Ok(VqeConfig {
            max_iterations: self.value("max_iterations", d.max_iterations)?,
            energy_tolerance: self.value("energy_tolerance", d.energy_tolerance)?,
            optimizer: self.value("optimizer", d.optimizer)?,
            initial_theta: self.cfg.list("initial_theta")?,
            restarts: self.value("restarts", d.restarts)?,
            shot_plan,
            simplex_edge: self.value("simplex_edge", d.simplex_edge)?,
            learning_rate: self.value("learning_rate", d.learning_rate)?,
        })
    }

    fn energy(mut self) -> Result<i32, CliError> {
        let ints = self.integrals()?;
        let problem = problem_from_integrals(&ints, &self.pipeline()?)?;
        let vqe = self.vqe()?;
        let result = minimize(&problem.hamiltonian, &problem.circuit, &vqe)?;
        let exact = if problem.n_qubits() <= EXACT_REPORT_QUBITS {
            Some(r9(exact_ground_energy(&problem.hamiltonian)?.energy))
        } else {
            None
        };
        let report = json!({
            "energy_hartree": r9(result.energy),
            "stderr_hartree": result.stderr.map(r9),
            "exact_energy_hartree": exact,
            "reference_energy_hartree": r9(problem.reference_energy),
            "nuclear_repulsion_hartree": r9(problem.nuclear_repulsion),
            "converged": result.converged,
            "iterations": result.iterations,
            "evaluations": result.evaluations,
            "theta": result.theta,
            "n_qubits": problem.n_qubits(),
            "n_parameters": problem.circuit.n_parameters,
            "circuit_depth": problem.circuit.circuit_depth(),
            "tapered_sector": problem.tapered_sector,
            "optimizer": vqe.optimizer.to_string(),
            "seed": self.seed,
            "rng": RNG_ALGORITHM,
            "trace": "trace.csv",
        });
        self.write("trace.csv", &result.trace_csv())?;
        self.write_json("energy.json", &report)?;
        self.write_resolved()?;
        println!("energy = {:.9} Hartree", result.energy);
        if let Some(e) = exact {
            println!("exact  = {e:.9} Hartree");
        }
        println!(
            "qubits = {}, parameters = {}, depth = {}",
            problem.n_qubits(),
            problem.circuit.n_parameters,
            problem.circuit.circuit_depth()
        );
        if result.converged {
            Ok(EXIT_OK)
        } else {
            eprintln!(
                "warning: optimizer stopped after {} evaluations without converging",
                result.evaluations
            );
            Ok(EXIT_NOT_CONVERGED)
        }
    }

    fn scan(mut self) -> Result<i32, CliError> {
        let geom = match self.geometry()? {
            Some(g) => g,
            None => match self.cfg.get("preset") {
                Some(name) => preset(name)?.geometry,
                None => return Err(CliError::Usage("scan needs `preset` or `geometry`".into())),
            },
        };
        let spec = ScanSpec::from_config(&self.cfg)?;
        spec.validate(&geom)?;
        let source = match self.value("source", "builtin".to_string())?.as_str() {
            "builtin" => HamiltonianSource::BuiltIn,
            "fcidump" => {
                let dir = self.value("fcidump_dir", ".".to_string())?;
                HamiltonianSource::FcidumpTemplate {
                    dir: PathBuf::from(dir),
                }
            }
            other => return Err(CliError::Usage(format!("unknown source `{other}`"))),
        };
        let settings = TraceSettings {
            pipeline: self.pipeline()?,
            vqe: self.vqe()?,
            source,
            relax: self.value("relax", false)?,
            cold_start: self.value("cold_start", false)?,
        };
        let path = trace_path(&geom, &spec, &settings)?;
        let mut manifest = path.manifest();
        manifest["preset"] = json!(self.cfg.get("preset"));
        manifest["seed"] = json!(self.seed);
        manifest["rng"] = json!(RNG_ALGORITHM);
        manifest["threads"] = json!(rayon::current_num_threads());
        manifest["resolved_config"] = json!("resolved.conf");
        let mut frames = String::new();
        for p in &path.points {
            frames.push_str(&write_xyz(
                &p.geometry,
                &format!("angle={} energy={:.9}", p.coordinate, p.energy),
            ));
        }
        self.write("path.csv", &path.path_csv())?;
        self.write("scan.xyz", &frames)?;
        self.write_json("manifest.json", &manifest)?;
        self.write_resolved()?;
        println!(
            "{} points, barrier = {:.9} Hartree = {:.6} kJ/mol",
            path.points.len(),
            path.barrier_hartree,
            path.barrier_kjmol
        );
        for f in path.failures.iter().take(5) {
            eprintln!("failed at {} degrees: {}", f.coordinate, f.message);
        }
        if path.failures.len() > 5 {
            eprintln!("... {} more failures listed in manifest.json", path.failures.len() - 5);
        }
        Ok(if !path.is_complete() {
            EXIT_PARTIAL
        } else if !path.all_converged() {
            EXIT_NOT_CONVERGED
        } else {
            EXIT_OK
        })
    }

    fn grad(mut self) -> Result<i32, CliError> {
        let Some(geom) = self.geometry()? else {
            return Err(CliError::Usage("grad needs a `geometry` file".into()));
        };
        let pipeline = self.pipeline()?;
        let vqe = self.vqe()?;
        let dr: f64 = self.value("dr", 1e-3)?;
        let n = 3 * geom.n_atoms();
        let coordinates: Vec<usize> = match self.cfg.list("coordinates")? {
            Some(c) => c,
            None => (0..n).collect(),
        };
        let method = match self.value("method", "central_fd".to_string())?.as_str() {
            "central_fd" => GradientMethod::CentralFd,
            "hellmann_feynman_fd" => GradientMethod::HellmannFeynmanFd,
            other => return Err(CliError::Usage(format!("unknown gradient method `{other}`"))),
        };
        let exact = match self.value("grad_energy", "vqe".to_string())?.as_str() {
            "vqe" => false,
            "exact" => true,
            other => return Err(CliError::Usage(format!("unknown grad_energy `{other}`"))),
        };
        let problem_at = |g: &MolecularGeometry| -> Result<QubitProblem, CliError> {
            Ok(problem_from_integrals(&integrals_from_geometry(g)?, &pipeline)?)
        };
        let energy_at = |g: &MolecularGeometry| -> Result<f64, CliError> {
            let p = problem_at(g)?;
            if exact {
                Ok(exact_ground_energy(&p.hamiltonian)?.energy)
            } else {
                Ok(minimize(&p.hamiltonian, &p.circuit, &vqe)?.energy)
            }
        };
        let base = problem_at(&geom)?;
        let base_vqe = minimize(&base.hamiltonian, &base.circuit, &vqe)?;
        let result = match method {
            GradientMethod::CentralFd => gradient_central_fd(energy_at, &geom, &coordinates, dr)?,
            GradientMethod::HellmannFeynmanFd => {
                if !(dr > 0.0) || !dr.is_finite() {
                    return Err(GradientError::InvalidStep(dr).into());
                }
                if let Some(&c) = coordinates.iter().find(|&&c| c >= n) {
                    return Err(GradientError::CoordinateOutOfRange { index: c, n }.into());
                }
                let state = if exact {
                    exact_ground_energy(&base.hamiltonian)?.state
                } else {
                    base.circuit.prepare(&base_vqe.theta)?
                };
                let x0 = geom.coordinates();
                let mut gradient = Vec::new();
                let mut errors = Vec::new();
                for &c in &coordinates {
                    let h_at = |x: f64| -> Result<PauliSum, CliError> {
                        let mut coords = x0.clone();
                        coords[c] = x;
                        Ok(problem_at(&geom.with_coordinates(&coords)?)?.hamiltonian)
                    };
                    let hf = |h: f64| -> Result<f64, CliError> {
                        Ok(gradient_hellmann_feynman_fd(
                            &h_at(x0[c] + h / 2.0)?,
                            &h_at(x0[c] - h / 2.0)?,
                            &state,
                            h,
                        )?)
                    };
                    let g = hf(dr)?;
                    gradient.push(g);
                    errors.push((g - hf(2.0 * dr)?).abs() / 3.0);
                }
                GradientResult {
                    gradient,
                    coordinates: coordinates.clone(),
                    step: dr,
                    method,
                    fd_error_estimate: errors,
                }
            }
        };
        let report = json!({
            "method": result.method,
            "dr_bohr": result.step,
            "coordinates": result.coordinates,
            "gradient_hartree_per_bohr": result.gradient,
            "fd_error_estimate": result.fd_error_estimate,
            "energy_hartree": r9(base_vqe.energy),
            "energy_source": if exact { "exact" } else { "vqe" },
            "seed": self.seed,
            "rng": RNG_ALGORITHM,
        });
        self.write_json("gradient.json", &report)?;
        self.write_resolved()?;
        for (c, g) in result.coordinates.iter().zip(&result.gradient) {
            println!("dE/dR[{c}] = {g:.9} Hartree/Bohr");
        }
        Ok(EXIT_OK)
    }

    fn dump_hamiltonian(mut self) -> Result<i32, CliError> {
        let ints = self.integrals()?;
        let pipeline = self.pipeline()?;
        let p = problem_from_integrals(&ints, &pipeline)?;
        if p.n_qubits() > MAX_QUBITS {
            return Err(SimError::TooLarge(p.n_qubits()).into());
        }
        let report = json!({
            "n_qubits": p.n_qubits(),
            "n_terms": p.hamiltonian.len(),
            "n_fermion_terms": p.n_fermion_terms,
            "encoding": pipeline.encoding,
            "tapered_sector": p.tapered_sector,
            "core_energy_hartree": r9(p.active.core_energy),
            "terms": p.hamiltonian.to_json(),
        });
        self.write("hamiltonian.txt", &p.hamiltonian.to_text())?;
        self.write_json("hamiltonian.json", &report)?;
        self.write_json("ansatz.json", &p.circuit.to_json())?;
        self.write_resolved()?;
        println!("{} qubits, {} Pauli terms", p.n_qubits(), p.hamiltonian.len());
        Ok(EXIT_OK)
    }

    fn fcidump_roundtrip(mut self) -> Result<i32, CliError> {
        let ints = self.integrals()?;
        let text = write_fcidump(&ints);
        self.write("integrals.fcidump", &text)?;
        let back = read_fcidump(&self.out.join("integrals.fcidump"))?;
        let h = (ints.h() - back.h()).amax();
        let g = ints
            .g()
            .to_dense()
            .iter()
            .zip(back.g().to_dense())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let core = (ints.e_nn() - back.e_nn()).abs();
        let dev = h.max(g).max(core);
        let tol: f64 = self.value("roundtrip_tolerance", 1e-12)?;
        self.write_json(
            "roundtrip.json",
            &json!({
                "n_orbitals": ints.n_spatial(),
                "n_electrons": ints.n_electrons(),
                "max_deviation": dev,
                "tolerance": tol,
                "reference_energy_hartree": r9(ints.reference_energy()),
                "reference_energy_readback_hartree": r9(back.reference_energy()),
            }),
        )?;
        self.write_resolved()?;
        println!("max deviation after round trip: {dev:.3e}");
        if dev <= tol {
            Ok(EXIT_OK)
        } else {
            eprintln!("error: round trip changed the integrals by {dev:.3e}");
            Ok(EXIT_INPUT)
        }
    }
}
