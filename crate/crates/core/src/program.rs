//! Element-program IR: the instruction stream emitted by the gate
//! generators and consumed by the simulator and the resource tally.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::detectors::DetectorModel;
use crate::error::{Error, Result};
use crate::matrix::{check_unitary, CMatrix, UNITARY_TOL};
use crate::optics::XpmEntry;
use crate::state::{Mode, QubusId};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    #[default]
    Simplified,
    Original,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateMarker {
    CPath,
    Merge,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Instruction {
    InjectQubus {
        qubus: QubusId,
        label: Complex64,
    },
    Pbs {
        photon: usize,
        a: Mode,
        b: Mode,
    },
    Bs50 {
        photon: usize,
        pairs: Vec<(Mode, Mode)>,
    },
    Xpm(XpmEntry),
    PhaseShift {
        qubus: QubusId,
        phi: f64,
    },
    CoherentBs {
        q1: QubusId,
        q2: QubusId,
    },
    LocalUnitary {
        photon: usize,
        mode: Mode,
        #[serde(with = "crate::matrix::rows")]
        matrix: CMatrix,
    },
    ModeSwap {
        photon: usize,
        a: Mode,
        b: Mode,
    },
    PathExchange {
        a: (usize, Mode),
        b: (usize, Mode),
    },
    /// Phase `slope * k` on the listed modes, `k` being the outcome
    /// `depth` records back (0 = most recent detection in scope).
    ConditionalPhase {
        photon: usize,
        modes: Vec<Mode>,
        slope: f64,
        #[serde(default)]
        depth: usize,
    },
    Release {
        qubus: QubusId,
    },
    /// Photon-number measurement. `bright` marks a beam that is consumed
    /// by the detection (as opposed to a dim probe port).
    DetectPnd {
        qubus: QubusId,
        bright: bool,
        on_zero: Vec<Instruction>,
        on_nonzero: Vec<Instruction>,
    },
    DetectPnnd {
        qubus: QubusId,
        on_zero: Vec<Instruction>,
        on_nonzero: Vec<Instruction>,
    },
    Marker {
        gate: GateMarker,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProgramHeader {
    /// Number of photonic qubits; photon `q` carries qubit `q` (qubit 0 is
    /// the most significant bit of basis indices).
    pub qubits: usize,
    /// Spatial-mode arity per photon.
    pub mode_arity: Vec<Mode>,
    pub alpha: f64,
    pub theta: f64,
    /// Smallest discriminated mean photon number among the program's
    /// detections.
    pub beta_sq: f64,
    pub detector: DetectorModel,
    pub variant: Variant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElementProgram {
    pub header: ProgramHeader,
    pub instructions: Vec<Instruction>,
}

impl ElementProgram {
    /// Checks mode arities, photon indices, unitarity of local unitaries
    /// and that qubus beams are only referenced while live.
    pub fn validate(&self) -> Result<()> {
        self.header.detector.validate()?;
        if self.header.mode_arity.len() != self.header.qubits {
            return Err(Error::InvalidProgram(format!(
                "{} mode arities declared for {} qubits",
                self.header.mode_arity.len(),
                self.header.qubits
            )));
        }
        if self.header.mode_arity.contains(&0) {
            return Err(Error::InvalidProgram("every photon needs at least one mode".into()));
        }
        let mut live = Vec::new();
        self.validate_block(&self.instructions, &mut live, 0)?;
        Ok(())
    }

    fn check_mode(&self, photon: usize, mode: Mode) -> Result<()> {
        let arity = *self
            .header
            .mode_arity
            .get(photon)
            .ok_or(Error::PhotonOutOfRange(photon))?;
        if mode >= arity {
            return Err(Error::ModeOutOfRange { photon, mode, arity });
        }
        Ok(())
    }

    fn validate_block(&self, block: &[Instruction], live: &mut Vec<QubusId>, records: usize) -> Result<()> {
        let need = |live: &Vec<QubusId>, q: QubusId| {
            if live.contains(&q) {
                Ok(())
            } else {
                Err(Error::InvalidProgram(format!("qubus {q} used while not live")))
            }
        };
        for ins in block {
            match ins {
                Instruction::InjectQubus { qubus, label } => {
                    if live.contains(qubus) {
                        return Err(Error::QubusAlreadyLive(*qubus));
                    }
                    if !label.re.is_finite() || !label.im.is_finite() {
                        return Err(Error::InvalidProgram("non-finite qubus label".into()));
                    }
                    live.push(*qubus);
                }
                Instruction::Pbs { photon, a, b } | Instruction::ModeSwap { photon, a, b } => {
                    self.check_mode(*photon, *a)?;
                    self.check_mode(*photon, *b)?;
                }
                Instruction::Bs50 { photon, pairs } => {
                    for &(a, b) in pairs {
                        self.check_mode(*photon, a)?;
                        self.check_mode(*photon, b)?;
                        if a == b {
                            return Err(Error::InvalidProgram("bs50 pair with equal modes".into()));
                        }
                    }
                }
                Instruction::Xpm(e) => {
                    self.check_mode(e.photon, e.mode)?;
                    need(live, e.qubus)?;
                }
                Instruction::PhaseShift { qubus, .. } => need(live, *qubus)?,
                Instruction::CoherentBs { q1, q2 } => {
                    need(live, *q1)?;
                    need(live, *q2)?;
                    if q1 == q2 {
                        return Err(Error::InvalidProgram("coherent_bs on a single beam".into()));
                    }
                }
                Instruction::LocalUnitary { photon, mode, matrix } => {
                    self.check_mode(*photon, *mode)?;
                    if matrix.nrows() != 2 || matrix.ncols() != 2 {
                        return Err(Error::InvalidProgram("local unitary must be 2x2".into()));
                    }
                    check_unitary(matrix, UNITARY_TOL)?;
                }
                Instruction::PathExchange { a, b } => {
                    self.check_mode(a.0, a.1)?;
                    self.check_mode(b.0, b.1)?;
                }
                Instruction::ConditionalPhase { photon, modes, depth, slope } => {
                    for &m in modes {
                        self.check_mode(*photon, m)?;
                    }
                    if *depth >= records {
                        return Err(Error::NoOutcomeInScope { depth: *depth, available: records });
                    }
                    if !slope.is_finite() {
                        return Err(Error::InvalidProgram("non-finite phase slope".into()));
                    }
                }
                Instruction::Release { qubus } => {
                    need(live, *qubus)?;
                    live.retain(|q| q != qubus);
                }
                Instruction::DetectPnd { qubus, on_zero, on_nonzero, .. }
                | Instruction::DetectPnnd { qubus, on_zero, on_nonzero } => {
                    need(live, *qubus)?;
                    live.retain(|q| q != qubus);
                    let mut a = live.clone();
                    self.validate_block(on_zero, &mut a, records + 1)?;
                    let mut b = live.clone();
                    self.validate_block(on_nonzero, &mut b, records + 1)?;
                    if a != b {
                        return Err(Error::InvalidProgram(
                            "feedforward arms leave different beams live".into(),
                        ));
                    }
                    *live = a;
                }
                Instruction::Marker { .. } => {}
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("program serializes")
    }
}

/// Calls `f` on every instruction, descending into feedforward arms.
/// `nonzero_depth` counts enclosing non-zero arms.
pub fn walk(block: &[Instruction], nonzero_depth: u32, f: &mut impl FnMut(&Instruction, u32)) {
    for ins in block {
        f(ins, nonzero_depth);
        match ins {
            Instruction::DetectPnd { on_zero, on_nonzero, .. }
            | Instruction::DetectPnnd { on_zero, on_nonzero, .. } => {
                walk(on_zero, nonzero_depth, f);
                walk(on_nonzero, nonzero_depth + 1, f);
            }
            _ => {}
        }
    }
}
