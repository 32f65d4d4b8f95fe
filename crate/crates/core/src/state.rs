//! Hybrid photon / coherent-state representation.
//!
//! A [`HybridState`] is a weighted superposition of [`Branch`]es. Each branch
//! pairs a discrete photonic configuration (polarization and spatial mode of
//! every single photon, plus a reference index used for Choi-state
//! verification) with a register of coherent-state labels, one per live
//! qubus mode. Coherent modes are never truncated to a Fock basis; inner
//! products between branches use the analytic coherent-state overlap.

use std::cmp::Ordering;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Two coherent labels closer than this (max abs difference over the
/// register) are treated as the same label when merging branches.
pub const LABEL_MERGE_TOL: f64 = 1e-12;

/// Branches with an amplitude modulus below this are dropped.
pub const AMPLITUDE_DROP_TOL: f64 = 1e-15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarization {
    /// Logical 0.
    H,
    /// Logical 1.
    V,
}

impl Polarization {
    pub fn bit(self) -> usize {
        match self {
            Polarization::H => 0,
            Polarization::V => 1,
        }
    }

    pub fn from_bit(bit: usize) -> Self {
        if bit & 1 == 0 {
            Polarization::H
        } else {
            Polarization::V
        }
    }
}

/// Spatial-mode index of a photon (0-based).
pub type Mode = u16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PhotonState {
    pub polarization: Polarization,
    pub mode: Mode,
}

/// The discrete part of a branch. Two configs are orthogonal iff they differ.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DiscreteConfig {
    /// Index into an untouched reference register (Choi-state purification).
    /// Plain simulations leave it at 0.
    pub reference: u32,
    pub photons: Vec<PhotonState>,
}

impl DiscreteConfig {
    pub fn new(photons: Vec<PhotonState>) -> Self {
        Self {
            reference: 0,
            photons,
        }
    }

    /// Computational-basis index of the photon polarizations, photon 0 as
    /// the most significant bit.
    pub fn basis_index(&self) -> usize {
        self.photons
            .iter()
            .fold(0, |acc, p| (acc << 1) | p.polarization.bit())
    }
}

/// Handle of a qubus beam inside an element program.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct QubusId(pub u32);

impl fmt::Display for QubusId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q{}", self.0)
    }
}

/// What a position of the coherent register holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Slot {
    /// An addressable qubus beam.
    Live(QubusId),
    /// A mode no longer addressable (lost light, released beam that stayed
    /// entangled). It only contributes overlaps.
    Environment,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub amplitude: Complex64,
    pub config: DiscreteConfig,
    pub coherent: Vec<Complex64>,
}

impl Branch {
    pub fn new(amplitude: Complex64, config: DiscreteConfig, coherent: Vec<Complex64>) -> Self {
        Self {
            amplitude,
            config,
            coherent,
        }
    }

    fn labels_match(&self, other: &Branch) -> bool {
        labels_match(&self.coherent, &other.coherent)
    }
}

fn labels_match(a: &[Complex64], b: &[Complex64]) -> bool {
    a.len() == b.len()
        && a
            .iter()
            .zip(b)
            .all(|(x, y)| (x - y).norm() <= LABEL_MERGE_TOL)
}

/// Inner product of two coherent states, `<a|b>`.
pub fn coherent_overlap(a: Complex64, b: Complex64) -> Complex64 {
    (-0.5 * a.norm_sqr() - 0.5 * b.norm_sqr() + a.conj() * b).exp()
}

/// Product of coherent overlaps over two registers of equal length.
pub fn register_overlap(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    let mut exponent = Complex64::new(0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        exponent += -0.5 * x.norm_sqr() - 0.5 * y.norm_sqr() + x.conj() * y;
    }
    exponent.exp()
}

/// Fock projection amplitude `<k|a> = exp(-|a|^2/2) a^k / sqrt(k!)`,
/// evaluated in log space.
pub fn fock_amplitude(k: u64, a: Complex64) -> Complex64 {
    let r = a.norm();
    if r == 0.0 {
        return if k == 0 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        };
    }
    let kf = k as f64;
    let log_mag = -0.5 * r * r + kf * r.ln() - 0.5 * ln_gamma(kf + 1.0);
    Complex64::from_polar(log_mag.exp(), kf * a.arg())
}

/// Poisson mass `e^{-mean} mean^k / k!`.
pub fn poisson_pmf(k: u64, mean: f64) -> f64 {
    if mean == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let kf = k as f64;
    (-mean + kf * mean.ln() - ln_gamma(kf + 1.0)).exp()
}

/// Weighted superposition of branches sharing one coherent-register layout.
#[derive(Clone, Debug)]
pub struct HybridState {
    branches: Vec<Branch>,
    slots: Vec<Slot>,
    /// XPM phase of the circuit that produced this state (bookkeeping only).
    pub theta: f64,
}

impl HybridState {
    pub fn new(branches: Vec<Branch>, slots: Vec<Slot>, theta: f64) -> Result<Self> {
        for b in &branches {
            if b.coherent.len() != slots.len() {
                return Err(Error::MalformedState(format!(
                    "branch register has {} labels, state declares {} slots",
                    b.coherent.len(),
                    slots.len()
                )));
            }
            if !b.amplitude.re.is_finite() || !b.amplitude.im.is_finite() {
                return Err(Error::MalformedState("non-finite amplitude".into()));
            }
        }
        Ok(Self {
            branches,
            slots,
            theta,
        })
    }

    /// Product state of photons with no qubus beams.
    pub fn photons(photons: Vec<PhotonState>) -> Self {
        Self {
            branches: vec![Branch::new(
                Complex64::new(1.0, 0.0),
                DiscreteConfig::new(photons),
                Vec::new(),
            )],
            slots: Vec::new(),
            theta: 0.0,
        }
    }

    /// Builds a state from un-normalized branches and normalizes it.
    pub fn normalized_from(branches: Vec<Branch>, slots: Vec<Slot>, theta: f64) -> Result<Self> {
        let state = Self::new(branches, slots, theta)?;
        let n = state.norm();
        if n == 0.0 {
            return Err(Error::MalformedState("zero-norm state".into()));
        }
        Ok(state.scaled(Complex64::new(1.0 / n, 0.0)))
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    pub fn slot_of(&self, q: QubusId) -> Option<usize> {
        self.slots.iter().position(|s| *s == Slot::Live(q))
    }

    pub(crate) fn require_slot(&self, q: QubusId) -> Result<usize> {
        self.slot_of(q).ok_or(Error::UnknownQubus(q))
    }

    pub(crate) fn from_parts(branches: Vec<Branch>, slots: Vec<Slot>, theta: f64) -> Self {
        Self {
            branches,
            slots,
            theta,
        }
    }

    pub(crate) fn into_parts(self) -> (Vec<Branch>, Vec<Slot>, f64) {
        (self.branches, self.slots, self.theta)
    }

    /// Applies `f` to every branch.
    pub(crate) fn map_branches(&self, mut f: impl FnMut(&Branch) -> Branch) -> Self {
        Self {
            branches: self.branches.iter().map(&mut f).collect(),
            slots: self.slots.clone(),
            theta: self.theta,
        }
    }

    pub fn scaled(mut self, factor: Complex64) -> Self {
        for b in &mut self.branches {
            b.amplitude *= factor;
        }
        self
    }

    /// Squared norm by the Gram rule: configs are orthogonal, coherent
    /// registers overlap analytically.
    pub fn norm_sqr(&self) -> f64 {
        let order = self.config_order();
        let mut total = 0.0;
        for run in config_runs(&self.branches, &order) {
            for (i, &bi) in run.iter().enumerate() {
                let a = &self.branches[bi];
                total += a.amplitude.norm_sqr();
                for &bj in &run[i + 1..] {
                    let b = &self.branches[bj];
                    let g = register_overlap(&a.coherent, &b.coherent);
                    total += 2.0 * (a.amplitude.conj() * b.amplitude * g).re;
                }
            }
        }
        total.max(0.0)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `<self|other>`; both states must share the same slot layout.
    pub fn inner(&self, other: &HybridState) -> Result<Complex64> {
        if self.slots != other.slots {
            return Err(Error::MalformedState("slot layouts differ".into()));
        }
        let mut acc = Complex64::new(0.0, 0.0);
        let mut other_order: Vec<usize> = (0..other.branches.len()).collect();
        other_order.sort_by(|&i, &j| other.branches[i].config.cmp(&other.branches[j].config));
        for a in &self.branches {
            let start = other_order
                .partition_point(|&j| other.branches[j].config < a.config);
            for &j in &other_order[start..] {
                let b = &other.branches[j];
                if b.config != a.config {
                    break;
                }
                acc += a.amplitude.conj() * b.amplitude * register_overlap(&a.coherent, &b.coherent);
            }
        }
        Ok(acc)
    }

    fn config_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.branches.len()).collect();
        order.sort_by(|&i, &j| self.branches[i].config.cmp(&self.branches[j].config));
        order
    }

    /// Merges duplicate branches (same config, labels within
    /// [`LABEL_MERGE_TOL`]) by amplitude addition, drops negligible branches
    /// and sorts the result. Does not renormalize.
    pub fn canonicalize(&self) -> Self {
        let mut sorted: Vec<Branch> = self.branches.clone();
        sorted.sort_by(branch_cmp);
        let mut out: Vec<Branch> = Vec::with_capacity(sorted.len());
        let mut run_start = 0;
        for b in sorted {
            if out.len() > run_start && out[run_start].config != b.config {
                run_start = out.len();
            }
            if let Some(existing) = out[run_start..].iter_mut().find(|e| e.config == b.config && e.labels_match(&b)) {
                existing.amplitude += b.amplitude;
            } else {
                out.push(b);
            }
        }
        out.retain(|b| b.amplitude.norm() >= AMPLITUDE_DROP_TOL);
        Self {
            branches: out,
            slots: self.slots.clone(),
            theta: self.theta,
        }
    }

    /// Canonicalizes and rescales to unit norm. Used after a measurement
    /// collapsed the state.
    pub fn renormalized(&self) -> Result<Self> {
        let c = self.canonicalize();
        let n = c.norm();
        if !(n > 0.0) {
            return Err(Error::MalformedState("cannot renormalize a zero-norm state".into()));
        }
        Ok(c.scaled(Complex64::new(1.0 / n, 0.0)))
    }

    /// Squared branch-wise distance `min_phi || self - e^{i phi} other ||^2`
    /// over matched branches, counting unmatched branches fully. Both states
    /// should be canonical. Returns `(distance^2, e^{i phi})`; an upper bound
    /// on the true Hilbert-space distance that involves no cancellation.
    pub fn aligned_distance_sqr(&self, other: &HybridState) -> (f64, Complex64) {
        if self.slots != other.slots {
            return (f64::INFINITY, Complex64::new(1.0, 0.0));
        }
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        let mut used = vec![false; other.branches.len()];
        let mut j0 = 0;
        for (i, a) in self.branches.iter().enumerate() {
            while j0 < other.branches.len() && other.branches[j0].config < a.config {
                j0 += 1;
            }
            let mut j = j0;
            while j < other.branches.len() && other.branches[j].config == a.config {
                if !used[j] && a.labels_match(&other.branches[j]) {
                    used[j] = true;
                    pairs.push((i, j));
                    break;
                }
                j += 1;
            }
        }
        let mut s = Complex64::new(0.0, 0.0);
        for &(i, j) in &pairs {
            s += self.branches[i].amplitude * other.branches[j].amplitude.conj();
        }
        let phase = if s.norm() > 0.0 {
            s / s.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let mut matched_self = vec![false; self.branches.len()];
        let mut d = 0.0;
        for &(i, j) in &pairs {
            matched_self[i] = true;
            d += (self.branches[i].amplitude - phase * other.branches[j].amplitude).norm_sqr();
        }
        for (i, b) in self.branches.iter().enumerate() {
            if !matched_self[i] {
                d += b.amplitude.norm_sqr();
            }
        }
        for (j, b) in other.branches.iter().enumerate() {
            if !used[j] {
                d += b.amplitude.norm_sqr();
            }
        }
        (d, phase)
    }

    /// Appends a fresh coherent mode with the given label in every branch.
    pub fn with_qubus(&self, q: QubusId, label: Complex64) -> Result<Self> {
        if self.slot_of(q).is_some() {
            return Err(Error::QubusAlreadyLive(q));
        }
        let mut out = self.map_branches(|b| {
            let mut nb = b.clone();
            nb.coherent.push(label);
            nb
        });
        out.slots.push(Slot::Live(q));
        Ok(out)
    }

    /// Removes register position `pos`, scaling each branch by `factor(label)`.
    pub(crate) fn remove_slot_with(&self, pos: usize, mut factor: impl FnMut(Complex64) -> Complex64) -> Self {
        let branches = self
            .branches
            .iter()
            .filter_map(|b| {
                let f = factor(b.coherent[pos]);
                if f == Complex64::new(0.0, 0.0) {
                    return None;
                }
                let mut nb = b.clone();
                nb.amplitude *= f;
                nb.coherent.remove(pos);
                Some(nb)
            })
            .collect();
        let mut slots = self.slots.clone();
        slots.remove(pos);
        Self {
            branches,
            slots,
            theta: self.theta,
        }
    }

    pub(crate) fn mark_environment(&mut self, pos: usize) {
        self.slots[pos] = Slot::Environment;
    }

    /// Maximum branch count over the life of a state is bounded by the
    /// number of 50:50 splittings; exposed for property tests.
    pub fn max_mode_index(&self) -> Option<Mode> {
        self.branches
            .iter()
            .flat_map(|b| b.config.photons.iter().map(|p| p.mode))
            .max()
    }
}

fn branch_cmp(a: &Branch, b: &Branch) -> Ordering {
    a.config.cmp(&b.config).then_with(|| {
        for (x, y) in a.coherent.iter().zip(&b.coherent) {
            let o = x
                .re
                .total_cmp(&y.re)
                .then_with(|| x.im.total_cmp(&y.im));
            if o != Ordering::Equal {
                return o;
            }
        }
        Ordering::Equal
    })
}

/// Runs of indices (in `order`) sharing a config.
pub(crate) fn config_runs<'a>(branches: &'a [Branch], order: &'a [usize]) -> impl Iterator<Item = &'a [usize]> + 'a {
    let mut start = 0;
    std::iter::from_fn(move || {
        if start >= order.len() {
            return None;
        }
        let cfg = &branches[order[start]].config;
        let mut end = start + 1;
        while end < order.len() && branches[order[end]].config == *cfg {
            end += 1;
        }
        let run = &order[start..end];
        start = end;
        Some(run)
    })
}
