//! Recursive lowering of an arbitrary n-qubit unitary through the
//! cosine-sine decomposition.
//!
//! Each level emits `B1 ⊕ B2` as a 1-control-(n-1) gate, the rotation
//! multiplexor on the leading qubit, then `A1 ⊕ A2`. The inner
//! (n-1)-qubit factors of a 1-control-(n-1) gate act on two disjoint sets
//! of modes (target fanned to `t` or to `f`); both are lowered together as
//! one batch so every c-path covers every mode a photon can be in.

use crate::composites::{emit_fused_multiplexor, Lane};
use crate::csd::csd;
use crate::error::{Error, Result};
use crate::gates::{emit_cpath, emit_merge, Builder, CPathRecord, Control, GateParams};
use crate::matrix::{check_unitary, identity, phase_aligned_distance, qubit_count, CMatrix};
use crate::program::{ElementProgram, Instruction};
use crate::state::Mode;

/// Inputs whose unitarity residual exceeds this are rejected.
pub const INPUT_UNITARY_TOL: f64 = 1e-8;

/// One copy of a batched sub-unitary: `modes[q]` is where the `q`-th
/// photon of the batch sits when this copy is the active one.
#[derive(Clone, Debug)]
pub(crate) struct BatchCopy {
    pub modes: Vec<Mode>,
    pub unitary: CMatrix,
}

/// Nearest unitary in Frobenius norm.
fn polar(u: &CMatrix) -> CMatrix {
    let svd = u.clone().svd(true, true);
    svd.u.expect("u requested") * svd.v_t.expect("v_t requested")
}

pub fn compile(u: &CMatrix, params: &GateParams) -> Result<ElementProgram> {
    let n = qubit_count(u)?;
    check_unitary(u, INPUT_UNITARY_TOL)?;
    params.detector.validate()?;
    if !(params.alpha.is_finite() && params.alpha > 0.0 && params.theta.is_finite() && params.theta != 0.0) {
        return Err(Error::InvalidArgument("alpha must be positive and theta non-zero".into()));
    }
    let mut b = Builder::from_params(n, params);
    compile_into(&mut b, u);
    Ok(b.finish(params.detector))
}

pub(crate) fn compile_into(b: &mut Builder, u: &CMatrix) {
    let n = b.qubits();
    if phase_aligned_distance(u, &identity(u.nrows())) <= 1e-12 {
        return;
    }
    let photons: Vec<usize> = (0..n).collect();
    emit_batch(
        b,
        &photons,
        vec![BatchCopy {
            modes: vec![0; n],
            unitary: polar(u),
        }],
    );
}

pub(crate) fn emit_batch(b: &mut Builder, photons: &[usize], copies: Vec<BatchCopy>) {
    if photons.len() == 1 {
        for c in copies {
            b.push(Instruction::LocalUnitary {
                photon: photons[0],
                mode: c.modes[0],
                matrix: c.unitary,
            });
        }
        return;
    }
    let parts: Vec<_> = copies
        .iter()
        .map(|c| csd(&c.unitary).expect("batch unitaries are unitary"))
        .collect();
    let modes: Vec<Vec<Mode>> = copies.iter().map(|c| c.modes.clone()).collect();

    emit_wrapper(
        b,
        photons,
        &modes,
        parts.iter().map(|p| p.b1.clone()).collect(),
        parts.iter().map(|p| p.b2.clone()).collect(),
    );

    let controls: Vec<Control> = (1..photons.len())
        .map(|q| Control::plain(photons[q], &modes.iter().map(|m| m[q]).collect::<Vec<_>>()))
        .collect();
    let lanes: Vec<Lane> = parts
        .iter()
        .zip(&modes)
        .map(|(p, m)| Lane {
            mode: m[0],
            blocks: Some((0..p.half()).map(|r| p.rotation(r)).collect()),
        })
        .collect();
    emit_fused_multiplexor(b, photons[0], &lanes, &controls);

    emit_wrapper(
        b,
        photons,
        &modes,
        parts.iter().map(|p| p.a1.clone()).collect(),
        parts.iter().map(|p| p.a2.clone()).collect(),
    );
}

/// `u1[c] ⊕ u2[c]` on every copy `c`, controlled by the leading photon.
fn emit_wrapper(b: &mut Builder, photons: &[usize], modes: &[Vec<Mode>], u1: Vec<CMatrix>, u2: Vec<CMatrix>) {
    let ctrl = Control::plain(photons[0], &modes.iter().map(|m| m[0]).collect::<Vec<_>>());
    let recs: Vec<CPathRecord> = (1..photons.len())
        .map(|q| {
            let targets: Vec<Mode> = modes.iter().map(|m| m[q]).collect();
            emit_cpath(b, &ctrl, photons[q], &targets)
        })
        .collect();
    let side = |pick: fn(&(Mode, Mode)) -> Mode, c: usize| -> Vec<Mode> { recs.iter().map(|r| pick(&r.pairs[c])).collect() };
    let mut inner = Vec::with_capacity(2 * modes.len());
    for (c, u) in u1.into_iter().enumerate() {
        inner.push(BatchCopy { modes: side(|p| p.0, c), unitary: u });
    }
    for (c, u) in u2.into_iter().enumerate() {
        inner.push(BatchCopy { modes: side(|p| p.1, c), unitary: u });
    }
    emit_batch(b, &photons[1..], inner);
    for rec in recs.iter().rev() {
        emit_merge(b, rec);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{cnot, haar_unitary, identity};
    use crate::simulate::{verify, SimOptions};
    use crate::tally::tally;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_compiles_to_nothing() {
        let p = compile(&identity(4), &GateParams::default()).unwrap();
        assert!(p.instructions.is_empty());
    }

    #[test]
    fn cnot_costs_nine_xpm() {
        let p = compile(&cnot(), &GateParams::default()).unwrap();
        assert_eq!(tally(&p).xpm, 9);
        let r = verify(&p, &cnot(), &SimOptions::default()).unwrap();
        assert!(r.min_fidelity >= 1.0 - 1e-8, "{}", r.min_fidelity);
    }

    #[test]
    fn random_two_qubit() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = haar_unitary(4, &mut rng);
        let p = compile(&u, &GateParams::default()).unwrap();
        p.validate().unwrap();
        let r = verify(&p, &u, &SimOptions::default()).unwrap();
        assert!(r.min_fidelity >= 1.0 - 1e-8, "{}", r.min_fidelity);
    }

    #[test]
    fn rejects_non_unitary() {
        let mut u = identity(4);
        u[(0, 0)] *= 1.001;
        assert!(compile(&u, &GateParams::default()).is_err());
    }
}
