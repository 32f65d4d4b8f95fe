//! Element gates: controlled-path (original and simplified wiring) and
//! merging, emitted as instruction fragments with their feedforward.
//!
//! A c-path splits every listed target mode `t` into `(t, f)` with a fresh
//! `f`; afterwards the target sits in `t` where the control reads H and in
//! `f` where it reads V. A merge on the same pairs undoes it.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::detectors::DetectorModel;
use crate::matrix::{pauli_x, pauli_z};
use crate::optics::{coherent_bs_labels, XpmEntry};
use crate::program::{ElementProgram, GateMarker, Instruction, ProgramHeader, Variant};
use crate::state::{Mode, Polarization, QubusId};

/// Detected mean photon number the default `alpha` is tuned to.
pub const DEFAULT_BETA_SQ: f64 = 60.0;

/// `alpha` such that the dimmest discriminated label,
/// `2 alpha^2 sin^2(theta/2)`, has mean photon number `beta_sq`.
pub fn alpha_for_beta_sq(theta: f64, beta_sq: f64) -> f64 {
    (beta_sq / 2.0).sqrt() / (theta / 2.0).sin().abs()
}

pub fn default_alpha(theta: f64) -> f64 {
    alpha_for_beta_sq(theta, DEFAULT_BETA_SQ)
}

/// A place where a control photon can sit: spatial mode plus an optional
/// polarization filter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Site {
    pub mode: Mode,
    pub polarization: Option<Polarization>,
}

/// Control photon of a c-path. `v_sites` are where it reads logical 1,
/// `h_sites` where it reads 0 (only wired by the original variant).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Control {
    pub photon: usize,
    pub v_sites: Vec<Site>,
    pub h_sites: Vec<Site>,
}

impl Control {
    /// Polarization control on every listed mode.
    pub fn plain(photon: usize, modes: &[Mode]) -> Self {
        let site = |mode, p| Site { mode, polarization: Some(p) };
        Self {
            photon,
            v_sites: modes.iter().map(|&m| site(m, Polarization::V)).collect(),
            h_sites: modes.iter().map(|&m| site(m, Polarization::H)).collect(),
        }
    }

    fn v_modes(&self) -> Vec<Mode> {
        let mut m: Vec<Mode> = self.v_sites.iter().map(|s| s.mode).collect();
        m.sort_unstable();
        m.dedup();
        m
    }
}

/// What a merge needs to undo a c-path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CPathRecord {
    pub control: Control,
    pub target: usize,
    pub pairs: Vec<(Mode, Mode)>,
}

impl CPathRecord {
    pub fn t_modes(&self) -> Vec<Mode> {
        self.pairs.iter().map(|p| p.0).collect()
    }

    pub fn f_modes(&self) -> Vec<Mode> {
        self.pairs.iter().map(|p| p.1).collect()
    }
}

/// Physical parameters shared by every emitted gate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    pub alpha: f64,
    pub theta: f64,
    pub variant: Variant,
    pub detector: DetectorModel,
}

impl Default for GateParams {
    fn default() -> Self {
        let theta = 0.1;
        Self {
            alpha: default_alpha(theta),
            theta,
            variant: Variant::Simplified,
            detector: DetectorModel::default(),
        }
    }
}

/// Accumulates an element program.
#[derive(Clone, Debug)]
pub struct Builder {
    pub alpha: f64,
    pub theta: f64,
    pub variant: Variant,
    arity: Vec<Mode>,
    next_qubus: u32,
    beta_sq: f64,
    spectator_xpm: u64,
    instructions: Vec<Instruction>,
}

impl Builder {
    pub fn new(qubits: usize, alpha: f64, theta: f64, variant: Variant) -> Self {
        Self {
            alpha,
            theta,
            variant,
            arity: vec![1; qubits],
            next_qubus: 0,
            beta_sq: f64::INFINITY,
            spectator_xpm: 0,
            instructions: Vec::new(),
        }
    }

    pub fn from_params(qubits: usize, p: &GateParams) -> Self {
        Self::new(qubits, p.alpha, p.theta, p.variant)
    }

    pub fn arity(&self, photon: usize) -> Mode {
        self.arity[photon]
    }

    /// XPM spent only to keep lanes the target cannot be steered through
    /// coherent with the rest.
    pub fn spectator_xpm(&self) -> u64 {
        self.spectator_xpm
    }

    pub(crate) fn add_spectator_xpm(&mut self, n: u64) {
        self.spectator_xpm += n;
    }

    /// XPM instructions a c-path spends per covered target mode.
    pub fn cpath_xpm_per_mode(&self) -> u64 {
        match self.variant {
            Variant::Simplified => 1,
            Variant::Original => 2,
        }
    }

    pub fn qubits(&self) -> usize {
        self.arity.len()
    }

    pub fn fresh_mode(&mut self, photon: usize) -> Mode {
        let m = self.arity[photon];
        self.arity[photon] += 1;
        m
    }

    fn fresh_qubus(&mut self) -> QubusId {
        let q = QubusId(self.next_qubus);
        self.next_qubus += 1;
        q
    }

    pub fn push(&mut self, ins: Instruction) {
        self.instructions.push(ins);
    }

    fn note_detected(&mut self, label: Complex64) {
        self.beta_sq = self.beta_sq.min(label.norm_sqr());
    }

    pub fn finish(self, detector: DetectorModel) -> ElementProgram {
        ElementProgram {
            header: ProgramHeader {
                qubits: self.arity.len(),
                mode_arity: self.arity,
                alpha: self.alpha,
                theta: self.theta,
                beta_sq: if self.beta_sq.is_finite() { self.beta_sq } else { 0.0 },
                detector,
                variant: self.variant,
            },
            instructions: self.instructions,
        }
    }

    fn inject(&mut self) -> QubusId {
        let q = self.fresh_qubus();
        self.push(Instruction::InjectQubus {
            qubus: q,
            label: Complex64::new(self.alpha, 0.0),
        });
        q
    }

    fn xpm(&mut self, photon: usize, site: Site, qubus: QubusId) {
        self.push(Instruction::Xpm(XpmEntry {
            photon,
            mode: site.mode,
            polarization: site.polarization,
            qubus,
            phase: self.theta,
        }));
    }

    /// Beam label after `n` XPM kicks and an optional `-theta` shift,
    /// computed with the same floating-point steps as the simulator.
    fn kicked(&self, n: usize, shifted: bool) -> Complex64 {
        let mut z = Complex64::new(self.alpha, 0.0);
        let r = Complex64::from_polar(1.0, self.theta);
        for _ in 0..n {
            z *= r;
        }
        if shifted {
            z *= Complex64::from_polar(1.0, -self.theta);
        }
        z
    }
}

fn slope(hf: Complex64, vt: Complex64) -> f64 {
    -(vt.arg() - hf.arg())
}

/// Emits a c-path with the builder's variant. Every mode the target photon
/// can occupy must be listed in `target_modes`.
pub fn emit_cpath(b: &mut Builder, control: &Control, target: usize, target_modes: &[Mode]) -> CPathRecord {
    let pairs: Vec<(Mode, Mode)> = target_modes.iter().map(|&t| (t, b.fresh_mode(target))).collect();
    let rec = CPathRecord {
        control: control.clone(),
        target,
        pairs,
    };
    match b.variant {
        Variant::Simplified => emit_cpath_simplified(b, &rec),
        Variant::Original => emit_cpath_original(b, &rec),
    }
    rec
}

fn emit_cpath_simplified(b: &mut Builder, rec: &CPathRecord) {
    let t_modes = rec.t_modes();
    b.push(Instruction::Marker { gate: GateMarker::CPath });
    let q1 = b.inject();
    let q2 = b.inject();
    b.push(Instruction::Bs50 {
        photon: rec.target,
        pairs: rec.pairs.clone(),
    });
    for &t in &t_modes {
        b.xpm(rec.target, Site { mode: t, polarization: None }, q1);
    }
    for &v in &rec.control.v_sites {
        b.xpm(rec.control.photon, v, q1);
    }
    b.push(Instruction::PhaseShift { qubus: q1, phi: -b.theta });
    b.push(Instruction::CoherentBs { q1, q2 });

    let plain = Complex64::new(b.alpha, 0.0);
    let (a_hf, b_hf) = coherent_bs_labels(b.kicked(0, true), plain);
    let (a_vt, b_vt) = coherent_bs_labels(b.kicked(2, true), plain);
    b.note_detected(a_hf);
    b.note_detected(a_vt);

    let mut nonzero = vec![Instruction::ConditionalPhase {
        photon: rec.target,
        modes: t_modes,
        slope: slope(a_hf, a_vt),
        depth: 0,
    }];
    for &(t, f) in &rec.pairs {
        nonzero.push(Instruction::ModeSwap { photon: rec.target, a: t, b: f });
    }
    nonzero.push(Instruction::DetectPnd {
        qubus: q2,
        bright: true,
        on_zero: vec![],
        on_nonzero: vec![Instruction::ConditionalPhase {
            photon: rec.target,
            modes: rec.f_modes(),
            slope: slope(b_hf, b_vt),
            depth: 0,
        }],
    });
    b.push(Instruction::DetectPnd {
        qubus: q1,
        bright: false,
        on_zero: vec![Instruction::Release { qubus: q2 }],
        on_nonzero: nonzero,
    });
}

fn emit_cpath_original(b: &mut Builder, rec: &CPathRecord) {
    b.push(Instruction::Marker { gate: GateMarker::CPath });
    let q1 = b.inject();
    let q2 = b.inject();
    b.push(Instruction::Bs50 {
        photon: rec.target,
        pairs: rec.pairs.clone(),
    });
    for &(t, f) in &rec.pairs {
        b.xpm(rec.target, Site { mode: t, polarization: None }, q1);
        b.xpm(rec.target, Site { mode: f, polarization: None }, q2);
    }
    for &h in &rec.control.h_sites {
        b.xpm(rec.control.photon, h, q2);
    }
    for &v in &rec.control.v_sites {
        b.xpm(rec.control.photon, v, q1);
    }
    b.push(Instruction::PhaseShift { qubus: q1, phi: -b.theta });
    b.push(Instruction::PhaseShift { qubus: q2, phi: -b.theta });
    b.push(Instruction::CoherentBs { q1, q2 });

    let (a_hf, _) = coherent_bs_labels(b.kicked(0, true), b.kicked(2, true));
    let (a_vt, _) = coherent_bs_labels(b.kicked(2, true), b.kicked(0, true));
    b.note_detected(a_hf);

    let mut nonzero = vec![Instruction::ConditionalPhase {
        photon: rec.target,
        modes: rec.t_modes(),
        slope: slope(a_hf, a_vt),
        depth: 0,
    }];
    for &(t, f) in &rec.pairs {
        nonzero.push(Instruction::ModeSwap { photon: rec.target, a: t, b: f });
    }
    b.push(Instruction::DetectPnd {
        qubus: q1,
        bright: false,
        on_zero: vec![],
        on_nonzero: nonzero,
    });
    b.push(Instruction::Release { qubus: q2 });
}

/// Undoes the c-path described by `rec`.
pub fn emit_merge(b: &mut Builder, rec: &CPathRecord) {
    b.push(Instruction::Marker { gate: GateMarker::Merge });
    let q1 = b.inject();
    let q2 = b.inject();
    b.push(Instruction::Bs50 {
        photon: rec.target,
        pairs: rec.pairs.clone(),
    });
    for &(_, f) in &rec.pairs {
        b.xpm(rec.target, Site { mode: f, polarization: None }, q1);
    }
    b.push(Instruction::CoherentBs { q1, q2 });
    let (a_f, _) = coherent_bs_labels(b.kicked(1, false), b.kicked(0, false));
    b.note_detected(a_f);

    let mut click: Vec<Instruction> = rec
        .control
        .v_modes()
        .into_iter()
        .map(|mode| Instruction::LocalUnitary {
            photon: rec.control.photon,
            mode,
            matrix: pauli_z(),
        })
        .collect();
    for &(t, f) in &rec.pairs {
        click.push(Instruction::ModeSwap { photon: rec.target, a: t, b: f });
    }
    b.push(Instruction::DetectPnnd {
        qubus: q1,
        on_zero: vec![],
        on_nonzero: click,
    });
    b.push(Instruction::Release { qubus: q2 });
}

/// CNOT (qubit 0 controls qubit 1) from one c-path, a bit flip on the
/// V-routed path and one merge.
pub fn cnot_from_pair(alpha: f64, theta: f64, variant: Variant, detector: DetectorModel) -> ElementProgram {
    let mut b = Builder::new(2, alpha, theta, variant);
    let rec = emit_cpath(&mut b, &Control::plain(0, &[0]), 1, &[0]);
    b.push(Instruction::LocalUnitary {
        photon: 1,
        mode: rec.pairs[0].1,
        matrix: pauli_x(),
    });
    emit_merge(&mut b, &rec);
    b.finish(detector)
}
