//! Multi-qubit constructions built from c-path/merge pairs: multiplexors,
//! the special controlled gate, 1-control-many and n-control-m.

use serde::{Deserialize, Serialize};

use crate::compile::{compile_into, emit_batch, BatchCopy};
use crate::error::{Error, Result};
use crate::gates::{emit_cpath, emit_merge, Builder, CPathRecord, Control, GateParams, Site};
use crate::matrix::{block_diag, check_unitary, identity, is_identity, pauli_x, qubit_count, swap, CMatrix, UNITARY_TOL};
use crate::program::{ElementProgram, Instruction};
use crate::state::{Mode, Polarization};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "structure", rename_all = "snake_case")]
pub enum Structure {
    /// One single-qubit block per value of the first `n - 1` qubits.
    Multiplexor {
        #[serde(with = "crate::matrix::rows_vec")]
        blocks: Vec<CMatrix>,
    },
    /// Identity unless the first `m` qubits all read 1; then one of the
    /// `2^(n-m-1)` blocks, selected by the remaining controls.
    Special {
        m: usize,
        #[serde(with = "crate::matrix::rows_vec")]
        blocks: Vec<CMatrix>,
    },
    /// `diag(u1, u2)` controlled by the first qubit.
    OneControlMany {
        #[serde(with = "crate::matrix::rows")]
        u1: CMatrix,
        #[serde(with = "crate::matrix::rows")]
        u2: CMatrix,
    },
    /// `2^controls` blocks acting on the trailing `n - controls` qubits.
    NControlM {
        #[serde(with = "crate::matrix::rows_vec")]
        blocks: Vec<CMatrix>,
    },
    Raw {
        #[serde(with = "crate::matrix::rows")]
        matrix: CMatrix,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateSpec {
    pub n: usize,
    #[serde(flatten)]
    pub structure: Structure,
}

/// An emitted program plus bookkeeping the tally cannot recover.
#[derive(Clone, Debug)]
pub struct Emission {
    pub program: ElementProgram,
    pub spectator_xpm: u64,
}

fn expect_blocks(blocks: &[CMatrix], count: usize, dim: usize) -> Result<()> {
    if blocks.len() != count {
        return Err(Error::InvalidArgument(format!("expected {count} blocks, got {}", blocks.len())));
    }
    for u in blocks {
        if u.nrows() != dim || u.ncols() != dim {
            return Err(Error::InvalidArgument(format!("expected {dim}x{dim} blocks")));
        }
        check_unitary(u, UNITARY_TOL)?;
    }
    Ok(())
}

impl GateSpec {
    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        if n == 0 || n > 16 {
            return Err(Error::InvalidArgument(format!("unsupported qubit count {n}")));
        }
        match &self.structure {
            Structure::Multiplexor { blocks } => {
                if n < 2 {
                    return Err(Error::InvalidArgument("multiplexor needs n >= 2".into()));
                }
                expect_blocks(blocks, 1 << (n - 1), 2)
            }
            Structure::Special { m, blocks } => {
                if *m < 1 || *m > n - 1 {
                    return Err(Error::InvalidArgument(format!("special gate needs 1 <= m <= n-1, got m={m}")));
                }
                expect_blocks(blocks, 1 << (n - m - 1), 2)
            }
            Structure::OneControlMany { u1, u2 } => {
                if n < 2 {
                    return Err(Error::InvalidArgument("one_control_many needs n >= 2".into()));
                }
                expect_blocks(&[u1.clone(), u2.clone()], 2, 1 << (n - 1))
            }
            Structure::NControlM { blocks } => {
                let first = blocks.first().ok_or_else(|| Error::InvalidArgument("no blocks".into()))?;
                let m = qubit_count(first)?;
                if m >= n {
                    return Err(Error::InvalidArgument("n_control_m needs at least one control".into()));
                }
                expect_blocks(blocks, 1 << (n - m), 1 << m)
            }
            Structure::Raw { matrix } => {
                if qubit_count(matrix)? != n {
                    return Err(Error::InvalidArgument(format!("matrix does not act on {n} qubits")));
                }
                check_unitary(matrix, UNITARY_TOL)
            }
        }
    }

    /// The unitary this gate implements.
    pub fn target(&self) -> CMatrix {
        match &self.structure {
            Structure::Multiplexor { blocks } | Structure::NControlM { blocks } => block_diag(blocks),
            Structure::Special { blocks, .. } => {
                let mut all = vec![identity(2); (1 << (self.n - 1)) - blocks.len()];
                all.extend(blocks.iter().cloned());
                block_diag(&all)
            }
            Structure::OneControlMany { u1, u2 } => block_diag(&[u1.clone(), u2.clone()]),
            Structure::Raw { matrix } => matrix.clone(),
        }
    }

    pub fn emit(&self, params: &GateParams) -> Result<Emission> {
        self.validate()?;
        let mut b = Builder::from_params(self.n, params);
        match &self.structure {
            Structure::Multiplexor { blocks } => emit_multiplexor(&mut b, blocks),
            Structure::Special { m, blocks } => emit_special(&mut b, *m, blocks),
            Structure::OneControlMany { u1, u2 } => emit_one_control_many(&mut b, u1, u2),
            Structure::NControlM { blocks } => emit_n_control_m(&mut b, blocks),
            Structure::Raw { matrix } => compile_into(&mut b, matrix),
        }
        let spectator_xpm = b.spectator_xpm();
        Ok(Emission {
            program: b.finish(params.detector),
            spectator_xpm,
        })
    }
}

/// A target mode of a fused multiplexor. `blocks` is `None` for a lane
/// the target may occupy only while every control is off its V-sites;
/// such a lane is carried along untouched.
#[derive(Clone, Debug)]
pub(crate) struct Lane {
    pub mode: Mode,
    pub blocks: Option<Vec<CMatrix>>,
}

/// Multiplexor on `target` over several lanes at once. Lane `i` receives
/// `blocks[j]` where `j` is read from the controls, first control most
/// significant.
pub(crate) fn emit_fused_multiplexor(b: &mut Builder, target: usize, lanes: &[Lane], controls: &[Control]) {
    // (mode, lane, partial block index)
    let mut live: Vec<(Mode, usize, usize)> = Vec::new();
    let mut spectators: Vec<Mode> = Vec::new();
    for (i, lane) in lanes.iter().enumerate() {
        match lane.blocks {
            Some(_) => live.push((lane.mode, i, 0)),
            None => spectators.push(lane.mode),
        }
    }
    let mut recs = Vec::with_capacity(controls.len());
    for ctrl in controls {
        let mut modes: Vec<Mode> = live.iter().map(|l| l.0).collect();
        modes.extend(&spectators);
        let rec = emit_cpath(b, ctrl, target, &modes);
        let mut next = Vec::with_capacity(2 * live.len());
        for (&(_, lane, sub), &(t, f)) in live.iter().zip(&rec.pairs) {
            next.push((t, lane, 2 * sub));
            next.push((f, lane, 2 * sub + 1));
        }
        live = next;
        let per_mode = b.cpath_xpm_per_mode();
        b.add_spectator_xpm(spectators.len() as u64 * (per_mode + 1));
        recs.push(rec);
    }
    for &(mode, lane, sub) in &live {
        let blocks = lanes[lane].blocks.as_ref().expect("live lanes carry blocks");
        b.push(Instruction::LocalUnitary {
            photon: target,
            mode,
            matrix: blocks[sub].clone(),
        });
    }
    for rec in recs.iter().rev() {
        emit_merge(b, rec);
    }
}

fn emit_multiplexor(b: &mut Builder, blocks: &[CMatrix]) {
    let n = b.qubits();
    let controls: Vec<Control> = (0..n - 1).map(|q| Control::plain(q, &[0])).collect();
    let lanes = [Lane {
        mode: 0,
        blocks: Some(blocks.to_vec()),
    }];
    emit_fused_multiplexor(b, n - 1, &lanes, &controls);
}

fn v_site(mode: Mode) -> Site {
    Site { mode, polarization: Some(Polarization::V) }
}

fn emit_special(b: &mut Builder, m: usize, blocks: &[CMatrix]) {
    emit_special_lanes(b, m, blocks, true)
}

/// `cover_spectator = false` leaves the unactivated lane out of the
/// embedded multiplexor's c-paths.
fn emit_special_lanes(b: &mut Builder, m: usize, blocks: &[CMatrix], cover_spectator: bool) {
    let n = b.qubits();
    let mut ctrl = Control::plain(0, &[0]);
    let mut chain: Vec<(CPathRecord, Mode)> = Vec::new();
    for j in 1..m {
        let rec = emit_cpath(b, &ctrl, j, &[0]);
        let f = rec.pairs[0].1;
        let p = b.fresh_mode(j);
        b.push(Instruction::Pbs { photon: j, a: 0, b: p });
        b.push(Instruction::LocalUnitary { photon: j, mode: p, matrix: pauli_x() });
        ctrl = Control {
            photon: j,
            v_sites: vec![v_site(f)],
            h_sites: vec![
                Site { mode: 0, polarization: None },
                Site { mode: p, polarization: None },
                Site { mode: f, polarization: Some(Polarization::H) },
            ],
        };
        chain.push((rec, p));
    }

    let fan: Vec<CPathRecord> = (m..n).map(|q| emit_cpath(b, &ctrl, q, &[0])).collect();
    let controls: Vec<Control> = fan[..fan.len() - 1]
        .iter()
        .map(|rec| {
            let f = rec.pairs[0].1;
            Control {
                photon: rec.target,
                v_sites: vec![v_site(f)],
                h_sites: vec![
                    Site { mode: 0, polarization: None },
                    Site { mode: f, polarization: Some(Polarization::H) },
                ],
            }
        })
        .collect();
    let mut lanes = vec![Lane {
        mode: fan[fan.len() - 1].pairs[0].1,
        blocks: Some(blocks.to_vec()),
    }];
    if cover_spectator {
        lanes.insert(0, Lane { mode: 0, blocks: None });
    }
    emit_fused_multiplexor(b, n - 1, &lanes, &controls);

    for rec in fan.iter().rev() {
        emit_merge(b, rec);
    }
    for (rec, p) in chain.iter().rev() {
        let j = rec.target;
        b.push(Instruction::LocalUnitary { photon: j, mode: *p, matrix: pauli_x() });
        b.push(Instruction::Pbs { photon: j, a: 0, b: *p });
        emit_merge(b, rec);
    }
}

const EXACT: f64 = 1e-12;

fn is_swap(u: &CMatrix) -> bool {
    u.shape() == (4, 4) && (u - swap()).iter().all(|x| x.norm() <= EXACT)
}

fn emit_one_control_many(b: &mut Builder, u1: &CMatrix, u2: &CMatrix) {
    let n = b.qubits();
    let ctrl = Control::plain(0, &[0]);
    let recs: Vec<CPathRecord> = (1..n).map(|q| emit_cpath(b, &ctrl, q, &[0])).collect();
    let t_modes: Vec<Mode> = recs.iter().map(|r| r.pairs[0].0).collect();
    let f_modes: Vec<Mode> = recs.iter().map(|r| r.pairs[0].1).collect();
    let direct = [u1, u2].iter().all(|u| is_identity(u, EXACT) || is_swap(u));
    if direct {
        for (u, modes) in [(u1, &t_modes), (u2, &f_modes)] {
            if is_swap(u) {
                b.push(Instruction::PathExchange {
                    a: (1, modes[0]),
                    b: (2, modes[1]),
                });
            }
        }
    } else {
        let photons: Vec<usize> = (1..n).collect();
        emit_batch(
            b,
            &photons,
            vec![
                BatchCopy { modes: t_modes, unitary: u1.clone() },
                BatchCopy { modes: f_modes, unitary: u2.clone() },
            ],
        );
    }
    for rec in recs.iter().rev() {
        emit_merge(b, rec);
    }
}

fn emit_n_control_m(b: &mut Builder, blocks: &[CMatrix]) {
    let n = b.qubits();
    let m = blocks[0].nrows().trailing_zeros() as usize;
    let controls = n - m;
    let mut recs = Vec::with_capacity(controls * m);
    // lanes[t][i] = mode of target t when the controls read i
    let mut lanes: Vec<Vec<Mode>> = Vec::with_capacity(m);
    for target in controls..n {
        let mut modes: Vec<Mode> = vec![0];
        for c in 0..controls {
            let rec = emit_cpath(b, &Control::plain(c, &[0]), target, &modes);
            modes = rec.pairs.iter().flat_map(|&(t, f)| [t, f]).collect();
            recs.push(rec);
        }
        lanes.push(modes);
    }
    if !blocks.iter().all(|u| is_identity(u, EXACT)) {
        let copies = blocks
            .iter()
            .enumerate()
            .map(|(i, u)| BatchCopy {
                modes: lanes.iter().map(|l| l[i]).collect(),
                unitary: u.clone(),
            })
            .collect();
        let photons: Vec<usize> = (controls..n).collect();
        emit_batch(b, &photons, copies);
    }
    for rec in recs.iter().rev() {
        emit_merge(b, rec);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::pauli_z;
    use crate::simulate::{verify, SimOptions};
    use crate::tally::tally;

    #[test]
    fn toffoli_is_six_xpm() {
        let spec = GateSpec {
            n: 3,
            structure: Structure::Special { m: 2, blocks: vec![pauli_x()] },
        };
        let e = spec.emit(&GateParams::default()).unwrap();
        assert_eq!(tally(&e.program).xpm, 6);
        assert_eq!(e.spectator_xpm, 0);
        let r = verify(&e.program, &crate::matrix::toffoli(), &SimOptions::default()).unwrap();
        assert!(r.min_fidelity >= 1.0 - 1e-9, "{}", r.min_fidelity);
    }

    #[test]
    fn fredkin_is_direct() {
        let spec = GateSpec {
            n: 3,
            structure: Structure::OneControlMany { u1: identity(4), u2: swap() },
        };
        let e = spec.emit(&GateParams::default()).unwrap();
        let t = tally(&e.program);
        assert_eq!((t.cpaths, t.merges), (2, 2));
        let r = verify(&e.program, &crate::matrix::fredkin(), &SimOptions::default()).unwrap();
        assert!(r.min_fidelity >= 1.0 - 1e-9);
    }

    #[test]
    fn uncovered_spectator_breaks_the_gate() {
        let blocks = vec![pauli_x(), pauli_z()];
        let mut b = Builder::from_params(4, &GateParams::default());
        emit_special_lanes(&mut b, 2, &blocks, false);
        let p = b.finish(Default::default());
        let target = GateSpec { n: 4, structure: Structure::Special { m: 2, blocks } }.target();
        let r = verify(&p, &target, &SimOptions::default()).unwrap();
        assert!(r.min_fidelity < 0.9, "{}", r.min_fidelity);
    }

    #[test]
    fn rejects_bad_shapes() {
        let spec = GateSpec {
            n: 3,
            structure: Structure::Multiplexor { blocks: vec![identity(2); 3] },
        };
        assert!(spec.validate().is_err());
        let spec = GateSpec {
            n: 3,
            structure: Structure::Special { m: 3, blocks: vec![] },
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = GateSpec {
            n: 2,
            structure: Structure::Multiplexor { blocks: vec![identity(2), pauli_x()] },
        };
        let s = serde_json::to_string(&spec).unwrap();
        assert!(s.contains("\"structure\":\"multiplexor\""));
        let back: GateSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, spec);
    }
}
