use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use qubus_core::compile::{compile, INPUT_UNITARY_TOL};
use qubus_core::composites::GateSpec;
use qubus_core::detectors::{pe_error, pnd_module_distributions, recycle_degrade, PeReport, PeakRow};
use qubus_core::formulas::{row, Approach, TableRow};
use qubus_core::matrix::{from_rows, qubit_count, unitarity_residual, CMatrix, MatrixRows};
use qubus_core::program::ElementProgram;
use qubus_core::simulate::{basis_input, output_amplitudes, sample, verify, KrausReport, SimOptions};
use qubus_core::tally::{tally, ResourceTally};
use qubus_core::{Complex64, Error};

use crate::config::RunConfig;

/// Failure carrying its process exit code.
#[derive(Debug)]
pub enum Failure {
    Input(String),
    Budget(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Input(_) => 2,
            Failure::Budget(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Budget(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::BudgetExceeded(_) => Failure::Budget(e.to_string()),
            e => Failure::Input(e.to_string()),
        }
    }
}

pub type Outcome<T> = std::result::Result<T, Failure>;

fn input(msg: impl Into<String>) -> Failure {
    Failure::Input(msg.into())
}

fn read_json(path: &Path) -> Outcome<Value> {
    let text = fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| input(format!("{}: malformed JSON: {e}", path.display())))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct UnitaryFile {
    n: usize,
    matrix: MatrixRows,
}

fn parse_unitary(v: Value) -> Outcome<CMatrix> {
    let f: UnitaryFile = serde_json::from_value(v).map_err(|e| input(format!("bad unitary file: {e}")))?;
    let u = from_rows(&f.matrix)?;
    if f.n >= usize::BITS as usize || u.nrows() != 1 << f.n {
        return Err(input(format!("matrix is {0}x{0} but n = {1}", u.nrows(), f.n)));
    }
    let residual = unitarity_residual(&u);
    if !(residual <= INPUT_UNITARY_TOL) {
        return Err(input(format!("matrix is not unitary: residual {residual:.3e} > {INPUT_UNITARY_TOL:e}")));
    }
    Ok(u)
}

/// What a compile/simulate input describes.
enum Gate {
    Unitary(CMatrix),
    Spec(GateSpec),
}

fn parse_gate(path: &Path) -> Outcome<Gate> {
    let v = read_json(path)?;
    if v.get("structure").is_some() {
        let spec: GateSpec = serde_json::from_value(v).map_err(|e| input(format!("bad gate spec: {e}")))?;
        spec.validate()?;
        Ok(Gate::Spec(spec))
    } else {
        parse_unitary(v).map(Gate::Unitary)
    }
}

fn build(gate: &Gate, cfg: &RunConfig) -> Outcome<(ElementProgram, CMatrix, u64)> {
    match gate {
        Gate::Unitary(u) => Ok((compile(u, &cfg.gate_params())?, u.clone(), 0)),
        Gate::Spec(spec) => {
            let e = spec.emit(&cfg.gate_params())?;
            Ok((e.program, spec.target(), e.spectator_xpm))
        }
    }
}

#[derive(Serialize)]
pub struct Compiled {
    pub program: ElementProgram,
    pub tally: ResourceTally,
    /// XPMs spent on target lanes no control activates; included in `tally.xpm`.
    pub spectator_xpm: u64,
}

pub fn cmd_compile(path: &Path, cfg: &RunConfig) -> Outcome<Compiled> {
    cfg.detector().validate()?;
    let (program, _, spectator_xpm) = build(&parse_gate(path)?, cfg)?;
    Ok(Compiled {
        tally: tally(&program),
        program,
        spectator_xpm,
    })
}

fn sim_options(cfg: &RunConfig, node_budget: Option<usize>) -> SimOptions {
    let mut o = SimOptions {
        epsilon: cfg.epsilon,
        ..SimOptions::default()
    };
    if let Some(b) = node_budget {
        o.node_budget = b;
    }
    o
}

#[derive(Serialize)]
pub struct Verified {
    pub report: KrausReport,
}

/// Accepts a bare program or the output of `compile`. The detector flags
/// replace the program's detector settings; the resolved config is
/// returned alongside the report.
pub fn cmd_verify(program: &Path, target: &Path, cfg: &RunConfig, node_budget: Option<usize>) -> Outcome<(RunConfig, Verified)> {
    let mut v = read_json(program)?;
    if let Some(p) = v.get_mut("program") {
        v = p.take();
    }
    let mut program: ElementProgram = serde_json::from_value(v).map_err(|e| input(format!("bad program: {e}")))?;
    let u = parse_unitary(read_json(target)?)?;
    let n = qubit_count(&u)?;
    if n != program.header.qubits {
        return Err(input(format!(
            "target acts on {n} qubits, program on {}",
            program.header.qubits
        )));
    }
    let detector = cfg.detector();
    detector.validate()?;
    program.header.detector = qubus_core::detectors::DetectorModel {
        theta: program.header.detector.theta,
        ..detector
    };
    let resolved = RunConfig {
        theta: program.header.theta,
        alpha: program.header.alpha,
        variant: program.header.variant,
        ..*cfg
    };
    let report = verify(&program, &u, &sim_options(cfg, node_budget))?;
    Ok((resolved, Verified { report }))
}

#[derive(Serialize)]
pub struct Resources {
    pub rows: Vec<TableRow>,
    pub all_checks_pass: bool,
}

pub fn cmd_resources(n_min: u32, n_max: u32, approaches: &str) -> Outcome<Resources> {
    if n_min > n_max {
        return Err(input(format!("empty range {n_min}..={n_max}")));
    }
    let approaches = approaches
        .split(',')
        .map(|s| Approach::parse(s.trim()))
        .collect::<qubus_core::Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for a in approaches {
        for n in n_min..=n_max {
            rows.push(row(a, n)?);
        }
    }
    Ok(Resources {
        all_checks_pass: rows.iter().all(TableRow::all_checks_pass),
        rows,
    })
}

/// Error bound the detection module is claimed to stay under.
pub const PE_BOUND: f64 = 1e-8;

#[derive(Serialize)]
pub struct PeRow {
    pub recycled: u64,
    pub alpha_eff: f64,
    pub gamma: f64,
    #[serde(flatten)]
    pub pe: PeReport,
    pub below_bound: bool,
}

#[derive(Serialize)]
pub struct DetectorStats {
    pub peaks: Vec<PeakRow>,
    pub pe_bound: f64,
    pub pe: Vec<PeRow>,
}

pub fn cmd_detector_stats(cfg: &RunConfig, k_max: u64, recycle: &[u64], pe_gamma: f64) -> Outcome<DetectorStats> {
    let model = qubus_core::detectors::DetectorModel {
        theta: cfg.theta,
        ..cfg.detector()
    };
    model.validate()?;
    if !(cfg.alpha > 0.0 && pe_gamma > 0.0) {
        return Err(input("alpha and pe-gamma must be positive"));
    }
    let peaks = pnd_module_distributions(&model, k_max)?;
    let pe = recycle
        .iter()
        .map(|&t| {
            let alpha_eff = recycle_degrade(cfg.alpha, cfg.theta, t);
            let pe = pe_error(alpha_eff, cfg.theta, pe_gamma, cfg.eta)?;
            Ok(PeRow {
                recycled: t,
                alpha_eff,
                gamma: pe_gamma,
                below_bound: pe.approx < PE_BOUND,
                pe,
            })
        })
        .collect::<qubus_core::Result<Vec<_>>>()?;
    Ok(DetectorStats {
        peaks,
        pe_bound: PE_BOUND,
        pe,
    })
}

#[derive(Serialize)]
pub struct Sampled {
    pub basis_input: usize,
    /// Photon counts seen at each detection along the sampled trajectory.
    pub detections: Vec<u64>,
    /// Output amplitudes as `[re, im]`, absent if photons did not return
    /// to their input modes.
    pub output: Option<Vec<[f64; 2]>>,
    pub ideal: Vec<[f64; 2]>,
    /// `|<ideal|output>|^2`.
    pub fidelity: Option<f64>,
    pub tally: ResourceTally,
}

pub fn cmd_simulate(path: &Path, basis: usize, cfg: &RunConfig, node_budget: Option<usize>) -> Outcome<Sampled> {
    cfg.detector().validate()?;
    let (program, u, _) = build(&parse_gate(path)?, cfg)?;
    let n = program.header.qubits;
    if basis >= 1 << n {
        return Err(input(format!("basis index {basis} out of range for {n} qubits")));
    }
    let res = sample(&program, basis_input(n, basis), &sim_options(cfg, node_budget), cfg.seed)?;
    let node = res.nodes.first().ok_or_else(|| input("sampled trajectory left no state"))?;
    let output = output_amplitudes(node, n);
    let ideal: Vec<Complex64> = u.column(basis).iter().copied().collect();
    let fidelity = output
        .as_ref()
        .map(|o| o.iter().zip(&ideal).map(|(a, b)| b.conj() * a).sum::<Complex64>().norm_sqr());
    let pairs = |v: &[Complex64]| v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>();
    Ok(Sampled {
        basis_input: basis,
        detections: node.path.clone(),
        output: output.as_deref().map(pairs),
        ideal: pairs(&ideal),
        fidelity,
        tally: tally(&program),
    })
}
