//! Primitive optical elements acting on [`HybridState`]s.
//!
//! Beam-splitter convention for single photons: `|a> -> (|a> + |b>)/sqrt2`,
//! `|b> -> (|a> - |b>)/sqrt2`. Coherent beam splitter:
//! `|a1>|a2> -> |(a1 - a2)/sqrt2>|(a1 + a2)/sqrt2>`.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{check_unitary, CMatrix, UNITARY_TOL};
use crate::state::{Branch, HybridState, Mode, Polarization, QubusId};

/// Weight below which all but one coherent label of a released beam is
/// considered vacuum contamination and dropped.
pub const RELEASE_MINOR_WEIGHT: f64 = 1e-20;

/// One cross-phase-modulation coupling: the named qubus picks up
/// `e^{i phase}` in every branch where the photon sits in `mode` (with the
/// given polarization, when filtered).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct XpmEntry {
    pub photon: usize,
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polarization: Option<Polarization>,
    pub qubus: QubusId,
    pub phase: f64,
}

fn check_photon(state: &HybridState, photon: usize) -> Result<()> {
    match state.branches().first() {
        Some(b) if photon >= b.config.photons.len() => Err(Error::PhotonOutOfRange(photon)),
        _ => Ok(()),
    }
}

/// Two-port polarizing beam splitter: H is transmitted, V is exchanged
/// between ports `a` and `b`. Self-inverse.
pub fn pbs(state: &HybridState, photon: usize, a: Mode, b: Mode) -> Result<HybridState> {
    check_photon(state, photon)?;
    if a == b {
        return Err(Error::InvalidArgument("pbs ports must differ".into()));
    }
    Ok(state.map_branches(|br| {
        let mut nb = br.clone();
        let p = &mut nb.config.photons[photon];
        if p.polarization == Polarization::V {
            if p.mode == a {
                p.mode = b;
            } else if p.mode == b {
                p.mode = a;
            }
        }
        nb
    }))
}

/// 50:50 beam splitter on each `(a, b)` mode pair of one photon.
pub fn bs50(state: &HybridState, photon: usize, pairs: &[(Mode, Mode)]) -> Result<HybridState> {
    check_photon(state, photon)?;
    for &(a, b) in pairs {
        if a == b {
            return Err(Error::InvalidArgument("bs50 modes must differ".into()));
        }
    }
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let mut out = Vec::with_capacity(state.len() * 2);
    for br in state.branches() {
        let mode = br.config.photons[photon].mode;
        let hit = pairs.iter().find_map(|&(a, b)| {
            if mode == a {
                Some((a, b, false))
            } else if mode == b {
                Some((a, b, true))
            } else {
                None
            }
        });
        match hit {
            None => out.push(br.clone()),
            Some((a, b, from_b)) => {
                let mut to_a = br.clone();
                to_a.config.photons[photon].mode = a;
                to_a.amplitude *= h;
                let mut to_b = br.clone();
                to_b.config.photons[photon].mode = b;
                to_b.amplitude *= if from_b { -h } else { h };
                out.push(to_a);
                out.push(to_b);
            }
        }
    }
    let (_, slots, theta) = state.clone().into_parts();
    Ok(HybridState::from_parts(out, slots, theta).canonicalize())
}

pub fn xpm(state: &HybridState, entry: &XpmEntry) -> Result<HybridState> {
    check_photon(state, entry.photon)?;
    let pos = state.require_slot(entry.qubus)?;
    let rot = Complex64::from_polar(1.0, entry.phase);
    Ok(state.map_branches(|br| {
        let p = br.config.photons[entry.photon];
        let hit = p.mode == entry.mode && entry.polarization.is_none_or(|pol| pol == p.polarization);
        let mut nb = br.clone();
        if hit {
            nb.coherent[pos] *= rot;
        }
        nb
    }))
}

pub fn phase_shift_coherent(state: &HybridState, qubus: QubusId, phi: f64) -> Result<HybridState> {
    let pos = state.require_slot(qubus)?;
    let rot = Complex64::from_polar(1.0, phi);
    Ok(state.map_branches(|br| {
        let mut nb = br.clone();
        nb.coherent[pos] *= rot;
        nb
    }))
}

/// Label combination used by [`coherent_bs`]. Results that cancel to
/// rounding level are snapped to exact vacuum.
pub fn coherent_bs_labels(a1: Complex64, a2: Complex64) -> (Complex64, Complex64) {
    let scale = 1e-13 * (a1.norm() + a2.norm());
    let snap = |z: Complex64| if z.norm() <= scale { Complex64::new(0.0, 0.0) } else { z };
    (snap((a1 - a2) * FRAC_1_SQRT_2), snap((a1 + a2) * FRAC_1_SQRT_2))
}

pub fn coherent_bs(state: &HybridState, q1: QubusId, q2: QubusId) -> Result<HybridState> {
    if q1 == q2 {
        return Err(Error::InvalidArgument("coherent_bs needs two distinct beams".into()));
    }
    let p1 = state.require_slot(q1)?;
    let p2 = state.require_slot(q2)?;
    Ok(state
        .map_branches(|br| {
            let mut nb = br.clone();
            let (x, y) = coherent_bs_labels(br.coherent[p1], br.coherent[p2]);
            nb.coherent[p1] = x;
            nb.coherent[p2] = y;
            nb
        })
        .canonicalize())
}

/// Applies a 2x2 unitary in the {H, V} basis where the photon sits in `mode`.
pub fn local_unitary(state: &HybridState, photon: usize, mode: Mode, u: &CMatrix) -> Result<HybridState> {
    check_photon(state, photon)?;
    if u.nrows() != 2 || u.ncols() != 2 {
        return Err(Error::InvalidArgument("local unitary must be 2x2".into()));
    }
    check_unitary(u, UNITARY_TOL)?;
    let mut out = Vec::with_capacity(state.len() * 2);
    for br in state.branches() {
        let p = br.config.photons[photon];
        if p.mode != mode {
            out.push(br.clone());
            continue;
        }
        let col = p.polarization.bit();
        for row in 0..2 {
            let m = u[(row, col)];
            if m == Complex64::new(0.0, 0.0) {
                continue;
            }
            let mut nb = br.clone();
            nb.config.photons[photon].polarization = Polarization::from_bit(row);
            nb.amplitude *= m;
            out.push(nb);
        }
    }
    let (_, slots, theta) = state.clone().into_parts();
    Ok(HybridState::from_parts(out, slots, theta).canonicalize())
}

pub fn mode_swap(state: &HybridState, photon: usize, a: Mode, b: Mode) -> Result<HybridState> {
    check_photon(state, photon)?;
    Ok(state.map_branches(|br| {
        let mut nb = br.clone();
        let p = &mut nb.config.photons[photon];
        if p.mode == a {
            p.mode = b;
        } else if p.mode == b {
            p.mode = a;
        }
        nb
    }))
}

/// Exchanges two photons' polarizations in branches where photon `a.0`
/// sits in mode `a.1` and photon `b.0` in mode `b.1` (the two paths are
/// crossed, which swaps the qubits they carry).
pub fn path_exchange(state: &HybridState, a: (usize, Mode), b: (usize, Mode)) -> Result<HybridState> {
    check_photon(state, a.0)?;
    check_photon(state, b.0)?;
    if a.0 == b.0 {
        return Err(Error::InvalidArgument("path exchange needs two photons".into()));
    }
    Ok(state.map_branches(|br| {
        let mut nb = br.clone();
        let (pa, pb) = (br.config.photons[a.0], br.config.photons[b.0]);
        if pa.mode == a.1 && pb.mode == b.1 {
            nb.config.photons[a.0].polarization = pb.polarization;
            nb.config.photons[b.0].polarization = pa.polarization;
        }
        nb
    }))
    .map(|s| s.canonicalize())
}

/// Multiplies branches where the photon occupies one of `modes` by `e^{i phi}`.
pub fn conditional_phase(state: &HybridState, photon: usize, modes: &[Mode], phi: f64) -> Result<HybridState> {
    check_photon(state, photon)?;
    let rot = Complex64::from_polar(1.0, phi);
    Ok(state.map_branches(|br| {
        let mut nb = br.clone();
        if modes.contains(&br.config.photons[photon].mode) {
            nb.amplitude *= rot;
        }
        nb
    }))
}

pub fn inject_qubus(state: &HybridState, qubus: QubusId, label: Complex64) -> Result<HybridState> {
    state.with_qubus(qubus, label)
}

/// Hands a beam back for reuse. If every branch but a contamination set of
/// total weight at most [`RELEASE_MINOR_WEIGHT`] carries the same label,
/// the beam factors out and is removed (contamination branches dropped).
/// Otherwise it stays entangled and is kept as an environment mode.
pub fn release(state: &HybridState, qubus: QubusId) -> Result<HybridState> {
    let pos = state.require_slot(qubus)?;
    Ok(release_slot(state, pos))
}

pub(crate) fn release_slot(state: &HybridState, pos: usize) -> HybridState {
    let total: f64 = state.branches().iter().map(|b| b.amplitude.norm_sqr()).sum();
    let dominant = dominant_label(state.branches(), pos);
    let Some(dominant) = dominant else {
        return state.remove_slot_with(pos, |_| Complex64::new(1.0, 0.0));
    };
    let same = |z: Complex64| (z - dominant).norm() <= crate::state::LABEL_MERGE_TOL;
    let minor: f64 = state
        .branches()
        .iter()
        .filter(|b| !same(b.coherent[pos]))
        .map(|b| b.amplitude.norm_sqr())
        .sum();
    if minor <= RELEASE_MINOR_WEIGHT * total.max(1e-300) {
        state
            .remove_slot_with(pos, |z| if same(z) { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) })
            .canonicalize()
    } else {
        let mut s = state.clone();
        s.mark_environment(pos);
        s
    }
}

/// Label carrying the largest summed branch weight.
fn dominant_label(branches: &[Branch], pos: usize) -> Option<Complex64> {
    let mut groups: Vec<(Complex64, f64)> = Vec::new();
    for b in branches {
        let z = b.coherent[pos];
        let w = b.amplitude.norm_sqr();
        match groups
            .iter_mut()
            .find(|(g, _)| (*g - z).norm() <= crate::state::LABEL_MERGE_TOL)
        {
            Some(g) => g.1 += w,
            None => groups.push((z, w)),
        }
    }
    groups
        .into_iter()
        .max_by(|x, y| x.1.total_cmp(&y.1))
        .map(|g| g.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{DiscreteConfig, PhotonState, Slot};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn ph(pol: Polarization, mode: Mode) -> PhotonState {
        PhotonState { polarization: pol, mode }
    }

    fn plus_state(mode: Mode) -> HybridState {
        let h = FRAC_1_SQRT_2;
        HybridState::new(
            vec![
                Branch::new(c(h, 0.0), DiscreteConfig::new(vec![ph(Polarization::H, mode)]), vec![]),
                Branch::new(c(h, 0.0), DiscreteConfig::new(vec![ph(Polarization::V, mode)]), vec![]),
            ],
            vec![],
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn pbs_routes_v_only() {
        let s = pbs(&plus_state(0), 0, 0, 1).unwrap().canonicalize();
        let modes: Vec<_> = s.branches().iter().map(|b| (b.config.photons[0].polarization, b.config.photons[0].mode)).collect();
        assert!(modes.contains(&(Polarization::H, 0)));
        assert!(modes.contains(&(Polarization::V, 1)));
        let single = HybridState::photons(vec![ph(Polarization::H, 0)]);
        assert_eq!(pbs(&single, 0, 0, 1).unwrap().branches()[0].config.photons[0].mode, 0);
    }

    #[test]
    fn bs50_signs_and_involution() {
        let s = HybridState::photons(vec![ph(Polarization::H, 1)]);
        let out = bs50(&s, 0, &[(0, 1)]).unwrap();
        for b in out.branches() {
            let expect = if b.config.photons[0].mode == 0 { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
            assert!((b.amplitude - c(expect, 0.0)).norm() < 1e-15);
        }
        let back = bs50(&out, 0, &[(0, 1)]).unwrap();
        assert_eq!(back.len(), 1);
        assert!((back.branches()[0].amplitude - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn coherent_bs_examples() {
        let a = 7.0;
        let (x, y) = coherent_bs_labels(c(a, 0.0), c(a, 0.0));
        assert_eq!(x, c(0.0, 0.0));
        assert!((y - c(2f64.sqrt() * a, 0.0)).norm() < 1e-13);
        let th = 0.3f64;
        let (x, y) = coherent_bs_labels(Complex64::from_polar(a, th), Complex64::from_polar(a, -th));
        assert!((x - c(0.0, 2f64.sqrt() * a * th.sin())).norm() < 1e-13);
        assert!((y - c(2f64.sqrt() * a * th.cos(), 0.0)).norm() < 1e-13);
    }

    #[test]
    fn coherent_bs_twice_is_signed_swap() {
        // [[1,-1],[1,1]]/sqrt2 squared = [[0,-1],[1,0]]
        let (a1, a2) = (c(1.2, -0.7), c(-0.3, 2.2));
        let (x, y) = coherent_bs_labels(a1, a2);
        let (x2, y2) = coherent_bs_labels(x, y);
        assert!((x2 + a2).norm() < 1e-14);
        assert!((y2 - a1).norm() < 1e-14);
    }

    #[test]
    fn xpm_reproduces_four_branch_c_path_labels() {
        // control (H+V)/sqrt2 on mode 0 of photon 0, target (1+2)/sqrt2 on photon 1.
        let (alpha, theta) = (3.0, 0.2);
        let mut br = Vec::new();
        for cp in [Polarization::H, Polarization::V] {
            for tm in [0u16, 1] {
                br.push(Branch::new(
                    c(0.5, 0.0),
                    DiscreteConfig::new(vec![ph(cp, 0), ph(Polarization::H, tm)]),
                    vec![],
                ));
            }
        }
        let mut s = HybridState::new(br, vec![], theta).unwrap();
        s = s.with_qubus(QubusId(1), c(alpha, 0.0)).unwrap();
        s = s.with_qubus(QubusId(2), c(alpha, 0.0)).unwrap();
        let wiring = [
            XpmEntry { photon: 1, mode: 0, polarization: None, qubus: QubusId(1), phase: theta },
            XpmEntry { photon: 1, mode: 1, polarization: None, qubus: QubusId(2), phase: theta },
            XpmEntry { photon: 0, mode: 0, polarization: Some(Polarization::H), qubus: QubusId(2), phase: theta },
            XpmEntry { photon: 0, mode: 0, polarization: Some(Polarization::V), qubus: QubusId(1), phase: theta },
        ];
        for w in &wiring {
            s = xpm(&s, w).unwrap();
        }
        let e = |k: f64| Complex64::from_polar(alpha, k * theta);
        for b in s.branches() {
            let cp = b.config.photons[0].polarization;
            let tm = b.config.photons[1].mode;
            let expect = match (cp, tm) {
                (Polarization::H, 0) => (e(1.0), e(1.0)),
                (Polarization::H, _) => (e(0.0), e(2.0)),
                (Polarization::V, 0) => (e(2.0), e(0.0)),
                (Polarization::V, _) => (e(1.0), e(1.0)),
            };
            assert!((b.coherent[0] - expect.0).norm() < 1e-14);
            assert!((b.coherent[1] - expect.1).norm() < 1e-14);
        }
        assert!((s.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn local_unitary_rejects_non_unitary() {
        let s = plus_state(0);
        let bad = CMatrix::from_element(2, 2, c(1.0, 0.0));
        assert!(matches!(local_unitary(&s, 0, 0, &bad), Err(Error::NotUnitary { .. })));
        let x = crate::matrix::pauli_x();
        let flipped = local_unitary(&s, 0, 1, &x).unwrap();
        assert_eq!(flipped.branches(), plus_state(0).canonicalize().branches());
    }

    #[test]
    fn release_drops_factorized_beam_and_keeps_entangled_one() {
        let cfg = |p| DiscreteConfig::new(vec![ph(p, 0)]);
        let h = FRAC_1_SQRT_2;
        let s = HybridState::new(
            vec![
                Branch::new(c(h, 0.0), cfg(Polarization::H), vec![c(5.0, 0.0)]),
                Branch::new(c(h, 0.0), cfg(Polarization::V), vec![c(5.0, 0.0)]),
            ],
            vec![Slot::Live(QubusId(0))],
            0.0,
        )
        .unwrap();
        let r = release(&s, QubusId(0)).unwrap();
        assert!(r.slots().is_empty());
        let t = HybridState::new(
            vec![
                Branch::new(c(h, 0.0), cfg(Polarization::H), vec![c(5.0, 0.0)]),
                Branch::new(c(h, 0.0), cfg(Polarization::V), vec![c(-5.0, 0.0)]),
            ],
            vec![Slot::Live(QubusId(0))],
            0.0,
        )
        .unwrap();
        let r = release(&t, QubusId(0)).unwrap();
        assert_eq!(r.slots(), &[Slot::Environment]);
    }
}
