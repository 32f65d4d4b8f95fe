//! Exact outcome-tree simulation of element programs and Kraus-map
//! verification.
//!
//! Every detection splits each node into one child per enumerated outcome.
//! Children whose normalized states coincide up to a global phase are
//! folded into one node (probabilities add). Verification runs the program
//! on a maximally entangled input (qubit register plus reference index),
//! which yields the conditioned linear map of every outcome class in one
//! pass.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::detectors::{pnd_expand, pnnd_expand, sample_index};
use crate::error::{Error, Result};
use crate::matrix::{phase_aligned_distance, CMatrix};
use crate::optics;
use crate::parallel::{self, Parallelism};
use crate::program::{ElementProgram, Instruction};
use crate::state::{register_overlap, Branch, DiscreteConfig, HybridState, PhotonState, Polarization};

pub const DEFAULT_NODE_BUDGET: usize = 1_000_000;

/// Two normalized node states closer than this (squared, after phase
/// alignment) are treated as the same outcome class.
pub const CLASS_MERGE_TOL: f64 = 1e-22;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub epsilon: f64,
    pub node_budget: usize,
    pub parallelism: Parallelism,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-12,
            node_budget: DEFAULT_NODE_BUDGET,
            parallelism: Parallelism::Rayon,
        }
    }
}

/// One outcome class of the tree.
#[derive(Clone, Debug)]
pub struct Node {
    /// Normalized state.
    pub state: HybridState,
    pub probability: f64,
    /// Outcome records in scope; `None` where merged classes disagree.
    records: Vec<Option<u64>>,
    /// Full outcome sequence of the first member of the class.
    pub path: Vec<u64>,
    /// Raw outcome sequences folded into this node (saturating).
    pub merged: u64,
}

impl Node {
    pub fn root(state: HybridState) -> Self {
        Self {
            state,
            probability: 1.0,
            records: Vec::new(),
            path: Vec::new(),
            merged: 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub nodes: Vec<Node>,
    /// Probability of outcomes too unlikely to be materialized or beyond
    /// the enumeration cutoff.
    pub discarded: f64,
    /// Raw outcome children created.
    pub expanded: usize,
}

struct Runner {
    opts: SimOptions,
    eta: f64,
    expanded: usize,
    discarded: f64,
    rng: Option<ChaCha8Rng>,
}

impl Runner {
    fn apply(&self, ins: &Instruction, node: &Node) -> Result<HybridState> {
        let s = &node.state;
        match ins {
            Instruction::InjectQubus { qubus, label } => optics::inject_qubus(s, *qubus, *label),
            Instruction::Pbs { photon, a, b } => optics::pbs(s, *photon, *a, *b),
            Instruction::Bs50 { photon, pairs } => optics::bs50(s, *photon, pairs),
            Instruction::Xpm(e) => optics::xpm(s, e),
            Instruction::PhaseShift { qubus, phi } => optics::phase_shift_coherent(s, *qubus, *phi),
            Instruction::CoherentBs { q1, q2 } => optics::coherent_bs(s, *q1, *q2),
            Instruction::LocalUnitary { photon, mode, matrix } => optics::local_unitary(s, *photon, *mode, matrix),
            Instruction::ModeSwap { photon, a, b } => optics::mode_swap(s, *photon, *a, *b),
            Instruction::PathExchange { a, b } => optics::path_exchange(s, *a, *b),
            Instruction::ConditionalPhase { photon, modes, slope, depth } => {
                let n = node.records.len();
                if *depth >= n {
                    return Err(Error::NoOutcomeInScope { depth: *depth, available: n });
                }
                let k = node.records[n - 1 - depth].ok_or(Error::AmbiguousRecord)?;
                optics::conditional_phase(s, *photon, modes, slope * k as f64)
            }
            Instruction::Release { qubus } => optics::release(s, *qubus),
            Instruction::Marker { .. } => Ok(s.clone()),
            Instruction::DetectPnd { .. } | Instruction::DetectPnnd { .. } => {
                unreachable!("detections are handled by the block runner")
            }
        }
    }

    fn run_block(&mut self, block: &[Instruction], mut nodes: Vec<Node>) -> Result<Vec<Node>> {
        for ins in block {
            match ins {
                Instruction::DetectPnd { qubus, on_zero, on_nonzero, .. }
                | Instruction::DetectPnnd { qubus, on_zero, on_nonzero } => {
                    nodes = merge_classes(nodes);
                    let mut next = Vec::new();
                    for node in nodes {
                        let outcomes: Vec<(u64, f64, Option<HybridState>)> = match ins {
                            Instruction::DetectPnd { .. } => {
                                pnd_expand(&node.state, *qubus, self.opts.epsilon, self.opts.parallelism)?
                            }
                            _ => pnnd_expand(&node.state, *qubus, self.eta)?.to_vec(),
                        };
                        let mut outcomes = outcomes;
                        let listed: f64 = outcomes.iter().map(|o| o.1).sum();
                        self.discarded += node.probability * (1.0 - listed).max(0.0);
                        if let Some(rng) = self.rng.as_mut() {
                            let live: Vec<usize> = (0..outcomes.len()).filter(|&i| outcomes[i].2.is_some()).collect();
                            let probs: Vec<f64> = live.iter().map(|&i| outcomes[i].1).collect();
                            let pick = live[sample_index(&probs, rng)];
                            let o = outcomes.swap_remove(pick);
                            outcomes = vec![(o.0, 1.0, o.2)];
                        }
                        let mut zero = Vec::new();
                        let mut nonzero = Vec::new();
                        for (k, p, st) in outcomes {
                            let Some(st) = st else {
                                self.discarded += node.probability * p;
                                continue;
                            };
                            self.expanded += 1;
                            if self.expanded > self.opts.node_budget {
                                return Err(Error::BudgetExceeded(self.opts.node_budget));
                            }
                            let mut records = node.records.clone();
                            records.push(Some(k));
                            let mut path = node.path.clone();
                            path.push(k);
                            let child = Node {
                                state: st,
                                probability: node.probability * p,
                                records,
                                path,
                                merged: node.merged,
                            };
                            if k == 0 {
                                zero.push(child);
                            } else {
                                nonzero.push(child);
                            }
                        }
                        if !zero.is_empty() {
                            next.extend(self.run_block(on_zero, zero)?);
                        }
                        if !nonzero.is_empty() {
                            next.extend(self.run_block(on_nonzero, nonzero)?);
                        }
                    }
                    for n in &mut next {
                        n.records.pop();
                    }
                    nodes = next;
                }
                _ => {
                    let par = self.opts.parallelism;
                    let this = &*self;
                    let states = parallel::map(&nodes, par, |n| this.apply(ins, n));
                    for (n, s) in nodes.iter_mut().zip(states) {
                        n.state = s?;
                    }
                }
            }
        }
        Ok(merge_classes(nodes))
    }
}

/// Folds nodes whose states agree up to a global phase.
fn merge_classes(nodes: Vec<Node>) -> Vec<Node> {
    if nodes.len() < 2 {
        return nodes;
    }
    let mut classes: Vec<Node> = Vec::new();
    for mut node in nodes {
        node.state = node.state.canonicalize();
        let hit = classes.iter_mut().find(|c| {
            c.state.len() == node.state.len()
                && c.records.len() == node.records.len()
                && c.state.aligned_distance_sqr(&node.state).0 <= CLASS_MERGE_TOL
        });
        match hit {
            Some(c) => {
                c.probability += node.probability;
                c.merged = c.merged.saturating_add(node.merged);
                for (a, b) in c.records.iter_mut().zip(&node.records) {
                    if *a != *b {
                        *a = None;
                    }
                }
            }
            None => classes.push(node),
        }
    }
    classes
}

pub fn run(program: &ElementProgram, input: HybridState, opts: &SimOptions) -> Result<RunResult> {
    run_inner(program, input, opts, None)
}

/// Follows a single randomly drawn outcome at every detection.
pub fn sample(program: &ElementProgram, input: HybridState, opts: &SimOptions, seed: u64) -> Result<RunResult> {
    run_inner(program, input, opts, Some(ChaCha8Rng::seed_from_u64(seed)))
}

fn run_inner(program: &ElementProgram, input: HybridState, opts: &SimOptions, rng: Option<ChaCha8Rng>) -> Result<RunResult> {
    program.validate()?;
    let mut runner = Runner {
        opts: *opts,
        eta: program.header.detector.eta,
        expanded: 0,
        discarded: 0.0,
        rng,
    };
    let nodes = runner.run_block(&program.instructions, vec![Node::root(input)])?;
    Ok(RunResult {
        nodes,
        discarded: runner.discarded,
        expanded: runner.expanded,
    })
}

/// Computational basis state `index` on `n` photons, all in mode 0.
pub fn basis_input(n: usize, index: usize) -> HybridState {
    HybridState::photons(basis_photons(n, index))
}

fn basis_photons(n: usize, index: usize) -> Vec<PhotonState> {
    (0..n)
        .map(|q| PhotonState {
            polarization: Polarization::from_bit(index >> (n - 1 - q)),
            mode: 0,
        })
        .collect()
}

/// `sum_j |j>_ref |j>_photons / sqrt(2^n)`.
pub fn choi_input(n: usize) -> HybridState {
    let d = 1usize << n;
    let amp = Complex64::new(1.0 / (d as f64).sqrt(), 0.0);
    let branches = (0..d)
        .map(|j| {
            Branch::new(
                amp,
                DiscreteConfig {
                    reference: j as u32,
                    photons: basis_photons(n, j),
                },
                Vec::new(),
            )
        })
        .collect();
    HybridState::new(branches, Vec::new(), 0.0).expect("well-formed input")
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OutcomeReport {
    pub path: Vec<u64>,
    pub merged: u64,
    pub probability: f64,
    /// `<Phi_U| rho |Phi_U>` for the normalized conditional state.
    pub entanglement_fidelity: f64,
    /// `|tr(K^dag U)| / (||K|| sqrt d)` for the extracted map.
    pub amplitude_fidelity: f64,
    /// `|| K/||K|| - e^{i phi} U/||U|| ||_F` with the best phase.
    pub defect: f64,
    #[serde(with = "crate::matrix::rows")]
    pub kraus: CMatrix,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KrausReport {
    pub outcomes: Vec<OutcomeReport>,
    pub total_probability: f64,
    pub discarded_probability: f64,
    pub expanded_nodes: usize,
    pub min_fidelity: f64,
    pub process_fidelity: f64,
    pub max_defect: f64,
}

/// Runs `program` on the maximally entangled input and compares every
/// outcome class with `target`.
pub fn verify(program: &ElementProgram, target: &CMatrix, opts: &SimOptions) -> Result<KrausReport> {
    let n = program.header.qubits;
    let d = 1usize << n;
    if target.nrows() != d || target.ncols() != d {
        return Err(Error::InvalidArgument(format!(
            "target is {}x{}, program acts on {n} qubits",
            target.nrows(),
            target.ncols()
        )));
    }
    let res = run(program, choi_input(n), opts)?;
    let outcomes: Vec<OutcomeReport> = parallel::map(&res.nodes, opts.parallelism, |node| outcome_report(node, target, n));
    let total_probability: f64 = outcomes.iter().map(|o| o.probability).sum();
    let weighted: f64 = outcomes.iter().map(|o| o.probability * o.entanglement_fidelity).sum();
    Ok(KrausReport {
        min_fidelity: outcomes.iter().map(|o| o.entanglement_fidelity).fold(1.0, f64::min),
        max_defect: outcomes.iter().map(|o| o.defect).fold(0.0, f64::max),
        process_fidelity: if total_probability > 0.0 { weighted / total_probability } else { 0.0 },
        total_probability,
        discarded_probability: res.discarded,
        expanded_nodes: res.expanded,
        outcomes,
    })
}

fn outcome_report(node: &Node, target: &CMatrix, n: usize) -> OutcomeReport {
    let d = 1usize << n;
    let sqrt_d = (d as f64).sqrt();
    // Branches back in the computational subspace, with their coefficient
    // against the target Choi vector and their leftover coherent register.
    let mut proj: Vec<(usize, usize, Complex64, &Vec<Complex64>)> = Vec::new();
    for b in node.state.branches() {
        if b.config.photons.iter().any(|p| p.mode != 0) {
            continue;
        }
        let j = b.config.reference as usize;
        let i = b.config.basis_index();
        proj.push((i, j, b.amplitude, &b.coherent));
    }

    // Entanglement fidelity: || sum_b a_b conj(Phi[j,i]) |env_b> ||^2.
    let mut groups: Vec<(&Vec<Complex64>, Complex64)> = Vec::new();
    for &(i, j, a, env) in &proj {
        let coeff = a * target[(i, j)].conj() / sqrt_d;
        match groups.iter_mut().find(|g| registers_equal(g.0, env)) {
            Some(g) => g.1 += coeff,
            None => groups.push((env, coeff)),
        }
    }
    let mut fe = 0.0;
    for (x, (ex, cx)) in groups.iter().enumerate() {
        fe += cx.norm_sqr();
        for (ey, cy) in &groups[x + 1..] {
            fe += 2.0 * (cx.conj() * cy * register_overlap(ex, ey)).re;
        }
    }

    // Kraus map relative to the dominant environment register.
    let mut kraus = CMatrix::zeros(d, d);
    if let Some(&(_, _, _, e_star)) = proj
        .iter()
        .max_by(|a, b| a.2.norm_sqr().total_cmp(&b.2.norm_sqr()))
    {
        for &(i, j, a, env) in &proj {
            kraus[(i, j)] += a * sqrt_d * register_overlap(e_star, env);
        }
    }
    let kn = kraus.norm();
    let un = target.norm();
    let (amplitude_fidelity, defect) = if kn > 0.0 {
        let tr: Complex64 = kraus.iter().zip(target.iter()).map(|(k, u)| k.conj() * u).sum();
        (tr.norm() / (kn * sqrt_d), phase_aligned_distance(&(kraus.clone() / Complex64::new(kn, 0.0)), &(target / Complex64::new(un, 0.0))))
    } else {
        (0.0, 2f64.sqrt())
    };
    OutcomeReport {
        path: node.path.clone(),
        merged: node.merged,
        probability: node.probability,
        entanglement_fidelity: fe.clamp(0.0, 1.0),
        amplitude_fidelity,
        defect,
        kraus,
    }
}

fn registers_equal(a: &[Complex64], b: &[Complex64]) -> bool {
    a.len() == b.len()
        && a
            .iter()
            .zip(b)
            .all(|(x, y)| (x - y).norm() <= crate::state::LABEL_MERGE_TOL)
}

/// Output amplitudes `<i|psi>` of a node whose photons are back in mode 0
/// with no coherent modes left; `None` otherwise.
pub fn output_amplitudes(node: &Node, n: usize) -> Option<Vec<Complex64>> {
    if !node.state.slots().is_empty() {
        return None;
    }
    let mut v = vec![Complex64::new(0.0, 0.0); 1 << n];
    for b in node.state.branches() {
        if b.config.photons.iter().any(|p| p.mode != 0) {
            return None;
        }
        v[b.config.basis_index()] += b.amplitude;
    }
    Some(v)
}
