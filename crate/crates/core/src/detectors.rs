//! Qubus measurements and detector analytics.
//!
//! PND: projection of one coherent mode onto Fock states, outcomes
//! enumerated in ascending photon number until the remaining mass drops
//! below the cutoff. PNND: click / no-click with efficiency `eta`, modelled
//! as a beam splitter that sends a fraction `1 - eta` of the light into an
//! unobserved environment mode.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{DiscreteCDF, Poisson};

use crate::error::{Error, Result};
use crate::optics::release_slot;
use crate::parallel::{self, Parallelism};
use crate::state::{fock_amplitude, poisson_pmf, register_overlap, Branch, HybridState, QubusId, Slot};

/// Outcomes whose probability falls below this are not materialized.
pub const MIN_OUTCOME_PROB: f64 = 1e-18;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub eta: f64,
    pub gamma: f64,
    pub theta: f64,
    pub epsilon: f64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self {
            eta: 1.0,
            gamma: 1000.0,
            theta: 0.01,
            epsilon: 1e-12,
        }
    }
}

impl DetectorModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::InvalidArgument(format!("eta must lie in (0, 1], got {}", self.eta)));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1e-6) {
            return Err(Error::InvalidArgument(format!(
                "epsilon cutoff must lie in (0, 1e-6], got {}",
                self.epsilon
            )));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) || !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(Error::InvalidArgument("gamma and theta must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct MeasurementOutcome {
    pub k: u64,
    pub probability: f64,
    pub post_state: HybridState,
}

/// Cross-branch Gram data for one detection: for every pair of branches in
/// the same discrete configuration, the overlap of all coherent slots other
/// than the measured one.
struct Gram {
    pairs: Vec<(usize, usize, Complex64)>,
}

impl Gram {
    fn new(state: &HybridState, pos: usize) -> Self {
        let br = state.branches();
        let mut order: Vec<usize> = (0..br.len()).collect();
        order.sort_by(|&i, &j| br[i].config.cmp(&br[j].config));
        let mut pairs = Vec::new();
        let rest = |b: &Branch| {
            let mut v = b.coherent.clone();
            v.remove(pos);
            v
        };
        let mut start = 0;
        while start < order.len() {
            let mut end = start + 1;
            while end < order.len() && br[order[end]].config == br[order[start]].config {
                end += 1;
            }
            let run = &order[start..end];
            let rests: Vec<Vec<Complex64>> = run.iter().map(|&i| rest(&br[i])).collect();
            for a in 0..run.len() {
                for b in a + 1..run.len() {
                    let g = register_overlap(&rests[a], &rests[b]);
                    if g.norm() > 1e-40 {
                        pairs.push((run[a], run[b], g));
                    }
                }
            }
            start = end;
        }
        Self { pairs }
    }

    /// `|| sum_i f_i |rest_i> ||^2` for per-branch weights `f`.
    fn norm_sqr(&self, f: &[Complex64]) -> f64 {
        let diag: f64 = f.iter().map(|x| x.norm_sqr()).sum();
        let off: f64 = self
            .pairs
            .iter()
            .map(|&(i, j, g)| (f[i].conj() * f[j] * g).re)
            .sum();
        (diag + 2.0 * off).max(0.0)
    }
}

/// Photon numbers worth enumerating: the union of windows around each
/// distinct label's Poisson mean, far wider than any mass the cutoff keeps.
fn candidate_counts(state: &HybridState, pos: usize) -> Vec<u64> {
    let mut windows: Vec<(u64, u64)> = state
        .branches()
        .iter()
        .map(|b| {
            let mean = b.coherent[pos].norm_sqr();
            let w = 14.0 * mean.sqrt() + 40.0;
            ((mean - w).max(0.0).floor() as u64, (mean + w).ceil() as u64)
        })
        .collect();
    windows.sort_unstable();
    let mut merged: Vec<(u64, u64)> = Vec::new();
    for (lo, hi) in windows {
        match merged.last_mut() {
            Some(last) if lo <= last.1 + 1 => last.1 = last.1.max(hi),
            _ => merged.push((lo, hi)),
        }
    }
    merged.into_iter().flat_map(|(lo, hi)| lo..=hi).collect()
}

/// Photon-number projection of a normalized state. Returns `(k, p_k)` for
/// every enumerated outcome, and the post-measurement state for those with
/// `p_k >= MIN_OUTCOME_PROB`. Enumeration stops once the cumulative mass
/// reaches `1 - epsilon`.
pub fn pnd_expand(
    state: &HybridState,
    qubus: QubusId,
    epsilon: f64,
    par: Parallelism,
) -> Result<Vec<(u64, f64, Option<HybridState>)>> {
    let pos = state.require_slot(qubus)?;
    let gram = Gram::new(state, pos);
    let counts = candidate_counts(state, pos);
    let br = state.branches();
    let probs = parallel::map(&counts, par, |&k| {
        let f: Vec<Complex64> = br.iter().map(|b| b.amplitude * fock_amplitude(k, b.coherent[pos])).collect();
        gram.norm_sqr(&f)
    });
    let mut kept = Vec::new();
    let mut cumulative = 0.0;
    for (&k, &p) in counts.iter().zip(&probs) {
        if cumulative >= 1.0 - epsilon {
            break;
        }
        cumulative += p;
        kept.push((k, p));
    }
    let built = parallel::map(&kept, par, |&(k, p)| {
        if p < MIN_OUTCOME_PROB {
            return None;
        }
        let scale = Complex64::new(1.0 / p.sqrt(), 0.0);
        Some(
            state
                .remove_slot_with(pos, |z| fock_amplitude(k, z) * scale)
                .canonicalize(),
        )
    });
    Ok(kept.into_iter().zip(built).map(|((k, p), s)| (k, p, s)).collect())
}

/// All materialized outcomes of a PND measurement.
pub fn pnd_project(state: &HybridState, qubus: QubusId, model: &DetectorModel) -> Result<Vec<MeasurementOutcome>> {
    Ok(pnd_expand(state, qubus, model.epsilon, Parallelism::Sequential)?
        .into_iter()
        .filter_map(|(k, probability, s)| s.map(|post_state| MeasurementOutcome { k, probability, post_state }))
        .collect())
}

/// Click / no-click measurement of a normalized state. Index 0 of the
/// result is no-click, index 1 is click; each carries its probability and
/// (when not negligible) the normalized post-measurement state.
pub fn pnnd_expand(state: &HybridState, qubus: QubusId, eta: f64) -> Result<[(u64, f64, Option<HybridState>); 2]> {
    let pos = state.require_slot(qubus)?;
    let (branches, mut slots, theta) = state.clone().into_parts();
    let lossy = eta < 1.0;
    let mut split: Vec<Branch> = branches;
    if lossy {
        for b in &mut split {
            let x = b.coherent[pos];
            b.coherent[pos] = x * eta.sqrt();
            b.coherent.push(x * (1.0 - eta).sqrt());
        }
        slots.push(Slot::Environment);
    }
    let split = HybridState::from_parts(split, slots, theta);

    let no_click = split.remove_slot_with(pos, |z| fock_amplitude(0, z));
    let mut click_branches = Vec::with_capacity(split.len() * 2);
    for b in split.branches() {
        let d = b.coherent[pos];
        click_branches.push(b.clone());
        let mut vac = b.clone();
        vac.amplitude *= -fock_amplitude(0, d);
        vac.coherent[pos] = Complex64::new(0.0, 0.0);
        click_branches.push(vac);
    }
    let mut click = HybridState::from_parts(click_branches, split.slots().to_vec(), theta).canonicalize();
    click.mark_environment(pos);

    let finish = |s: HybridState, k: u64| -> (u64, f64, Option<HybridState>) {
        let mut s = s.canonicalize();
        let p = s.norm_sqr();
        if p < MIN_OUTCOME_PROB {
            return (k, p, None);
        }
        // Trace out the detected mode and any loss mode where possible.
        let env: Vec<usize> = s
            .slots()
            .iter()
            .enumerate()
            .filter(|(_, sl)| **sl == Slot::Environment)
            .map(|(i, _)| i)
            .collect();
        for &i in env.iter().rev() {
            s = release_slot(&s, i);
        }
        let n = s.norm();
        (k, p, Some(s.scaled(Complex64::new(1.0 / n, 0.0))))
    };
    Ok([finish(no_click, 0), finish(click, 1)])
}

/// Click probability of a PNND with efficiency `eta` on `|label>`.
pub fn pnnd_click_probability(label: Complex64, eta: f64) -> f64 {
    -(-eta * label.norm_sqr()).exp_m1()
}

/// No-click probability by explicit Fock summation of the inefficiency
/// POVM `sum_k (1-eta)^k |k><k|`.
pub fn pnnd_no_click_fock_sum(label: Complex64, eta: f64) -> f64 {
    let mean = label.norm_sqr();
    let mut total = 0.0;
    let mut k = 0u64;
    loop {
        let term = poisson_pmf(k, mean) * (1.0 - eta).powi(k as i32);
        total += term;
        if k as f64 > mean && term < 1e-18 * total.max(1e-300) {
            break;
        }
        k += 1;
    }
    total
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PeakRow {
    pub k: u64,
    pub label: [f64; 2],
    pub mean: f64,
    /// `(photon count, probability)` over the bulk of the distribution.
    pub distribution: Vec<(u64, f64)>,
    /// Exact `|<beta_k|beta_{k+1}>|` and the Gaussian estimate
    /// `exp(-gamma^2 theta^2 / 4)` for the next peak.
    pub overlap_next_exact: f64,
    pub overlap_next_approx: f64,
}

/// Module label `gamma (e^{ik theta} - 1) / sqrt2`.
pub fn module_label(gamma: f64, theta: f64, k: u64) -> Complex64 {
    (Complex64::from_polar(gamma, k as f64 * theta) - gamma) / 2f64.sqrt()
}

pub fn pnd_module_distributions(model: &DetectorModel, k_max: u64) -> Result<Vec<PeakRow>> {
    if k_max < 1 {
        return Err(Error::InvalidArgument("k_max must be at least 1".into()));
    }
    let approx = (-model.gamma * model.gamma * model.theta * model.theta / 4.0).exp();
    Ok((0..=k_max)
        .map(|k| {
            let label = module_label(model.gamma, model.theta, k);
            let mean = label.norm_sqr();
            let w = if mean == 0.0 { 0.0 } else { 8.0 * mean.sqrt() + 5.0 };
            let lo = (mean - w).max(0.0).floor() as u64;
            let hi = (mean + w).ceil() as u64;
            let distribution = (lo..=hi).map(|n| (n, poisson_pmf(n, mean))).collect();
            let next = module_label(model.gamma, model.theta, k + 1);
            PeakRow {
                k,
                label: [label.re, label.im],
                mean,
                distribution,
                overlap_next_exact: crate::state::coherent_overlap(label, next).norm(),
                overlap_next_approx: approx,
            }
        })
        .collect())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PovmBin {
    pub k: u64,
    pub mean: f64,
    pub m_i: u64,
    /// Inclusive upper edge; `None` for the open last bin.
    pub m_f: Option<u64>,
    pub misclassification: f64,
}

/// Splits the detected photon-count axis into one bin per peak
/// `k = 1..=k_max`, with edges at midpoints between adjacent
/// (efficiency-scaled) Poisson means.
pub fn povm_bin_decomposition(model: &DetectorModel, k_max: u64) -> Result<Vec<PovmBin>> {
    if k_max < 1 {
        return Err(Error::InvalidArgument("k_max must be at least 1".into()));
    }
    let means: Vec<f64> = (1..=k_max)
        .map(|k| model.eta * module_label(model.gamma, model.theta, k).norm_sqr())
        .collect();
    let mut bins = Vec::with_capacity(means.len());
    let mut lower = 0u64;
    for (idx, &mean) in means.iter().enumerate() {
        let upper = means
            .get(idx + 1)
            .map(|&next| ((mean + next) / 2.0).floor() as u64);
        if let Some(u) = upper {
            if u < lower {
                return Err(Error::PeaksOverlap(format!("peaks {} and {} share a bin", idx + 1, idx + 2)));
            }
        }
        let miss = if mean == 0.0 {
            0.0
        } else {
            let pois = Poisson::new(mean).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            let below = if lower == 0 { 0.0 } else { pois.cdf(lower - 1) };
            let above = upper.map_or(0.0, |u| pois.sf(u));
            below + above
        };
        if miss > 0.1 {
            return Err(Error::PeaksOverlap(format!(
                "peak k={} misclassified with mass {miss:.3}",
                idx + 1
            )));
        }
        bins.push(PovmBin {
            k: idx as u64 + 1,
            mean,
            m_i: lower,
            m_f: upper,
            misclassification: miss,
        });
        if let Some(u) = upper {
            lower = u + 1;
        }
    }
    Ok(bins)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PeReport {
    /// `exp{-2(1 - e^{-eta gamma^2 theta^2 / 2}) alpha^2 sin^2 theta}`.
    pub approx: f64,
    pub approx_exponent: f64,
    /// `sum_k Pois(k; 2 alpha^2 sin^2 theta) exp(-2 eta gamma^2 sin^2(k theta / 2))`:
    /// the no-click probability of the module, summed over Fock outcomes.
    pub exact: f64,
    pub exact_exponent: f64,
}

pub fn pe_error(alpha: f64, theta: f64, gamma: f64, eta: f64) -> Result<PeReport> {
    if !(alpha > 0.0 && theta > 0.0 && gamma > 0.0 && (0.0..=1.0).contains(&eta)) {
        return Err(Error::InvalidArgument("pe_error needs positive alpha, theta, gamma and eta in [0,1]".into()));
    }
    let lambda = 2.0 * alpha * alpha * theta.sin().powi(2);
    let approx_exponent = -lambda * -(-eta * gamma * gamma * theta * theta / 2.0).exp_m1();
    // log-sum-exp over the Fock sum
    let w = 14.0 * lambda.sqrt() + 40.0;
    let hi = (lambda + w).ceil() as u64;
    let terms: Vec<f64> = (0..=hi)
        .map(|k| {
            let log_p = if lambda == 0.0 {
                if k == 0 { 0.0 } else { f64::NEG_INFINITY }
            } else {
                poisson_pmf(k, lambda).ln()
            };
            log_p - 2.0 * eta * gamma * gamma * (k as f64 * theta / 2.0).sin().powi(2)
        })
        .collect();
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exact_exponent = m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln();
    Ok(PeReport {
        approx: approx_exponent.exp(),
        approx_exponent,
        exact: exact_exponent.exp(),
        exact_exponent,
    })
}

/// Label of a beam after `t` recycling rounds: `alpha cos^t theta`.
pub fn recycle_degrade(alpha: f64, theta: f64, t: u64) -> f64 {
    alpha * (t as f64 * theta.cos().ln()).exp()
}

/// Draws one outcome index with probability proportional to `probs`.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let total: f64 = probs.iter().sum();
    let mut x = rng.gen::<f64>() * total;
    for (i, &p) in probs.iter().enumerate() {
        if x < p {
            return i;
        }
        x -= p;
    }
    probs.len().saturating_sub(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{DiscreteConfig, PhotonState, Polarization};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn one_beam(labels: &[(Polarization, Complex64)]) -> HybridState {
        let amp = 1.0 / (labels.len() as f64).sqrt();
        let br = labels
            .iter()
            .map(|&(p, z)| {
                Branch::new(
                    c(amp, 0.0),
                    DiscreteConfig::new(vec![PhotonState { polarization: p, mode: 0 }]),
                    vec![z],
                )
            })
            .collect();
        HybridState::new(br, vec![Slot::Live(QubusId(0))], 0.0).unwrap()
    }

    #[test]
    fn vacuum_gives_single_outcome() {
        let s = one_beam(&[(Polarization::H, c(0.0, 0.0))]);
        let out = pnd_project(&s, QubusId(0), &DetectorModel::default()).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].k, 0);
        assert!((out[0].probability - 1.0).abs() < 1e-15);
    }

    #[test]
    fn coherent_two_is_poisson_four() {
        let s = one_beam(&[(Polarization::H, c(2.0, 0.0))]);
        let out = pnd_project(&s, QubusId(0), &DetectorModel::default()).unwrap();
        assert!((out[0].probability - (-4.0f64).exp()).abs() < 1e-15);
        for o in &out {
            assert!((o.probability - poisson_pmf(o.k, 4.0)).abs() < 1e-14);
        }
        let total: f64 = out.iter().map(|o| o.probability).sum();
        assert!(total >= 1.0 - 1e-12);
    }

    #[test]
    fn plus_minus_beta_outcomes() {
        // (|H>|beta> + |V>|-beta>)/sqrt2 with a shared vacuum-free structure
        let beta = c(0.0, 1.5);
        let s = one_beam(&[(Polarization::H, beta), (Polarization::V, -beta)]);
        let out = pnd_project(&s, QubusId(0), &DetectorModel::default()).unwrap();
        let b2 = beta.norm_sqr();
        // distinct configs: P(k) is the plain Poisson mass
        assert!((out[0].probability - (-b2).exp()).abs() < 1e-14);
        for o in out.iter().filter(|o| o.k > 0) {
            let bh = o.post_state.branches().iter().find(|b| b.config.photons[0].polarization == Polarization::H).unwrap();
            let bv = o.post_state.branches().iter().find(|b| b.config.photons[0].polarization == Polarization::V).unwrap();
            let rel = bv.amplitude / bh.amplitude;
            let expect = Complex64::from_polar(1.0, std::f64::consts::PI * o.k as f64);
            assert!((rel - expect).norm() < 1e-9, "k={} rel={rel}", o.k);
        }
    }

    #[test]
    fn pnnd_probabilities() {
        assert_eq!(pnnd_click_probability(c(0.0, 0.0), 0.7), 0.0);
        let a = c(2f64.ln().sqrt(), 0.0);
        assert!((1.0 - pnnd_click_probability(a, 1.0) - 0.5).abs() < 1e-15);
        for &eta in &[0.3, 0.7, 1.0] {
            for &r in &[0.1, 1.0, 3.0, 6.0] {
                let z = c(r * 0.6, r * 0.8);
                let direct = 1.0 - pnnd_click_probability(z, eta);
                assert!((direct - pnnd_no_click_fock_sum(z, eta)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pnnd_expand_matches_closed_form() {
        let s = one_beam(&[(Polarization::H, c(1.1, 0.4))]);
        for &eta in &[0.5, 1.0] {
            let [no, yes] = pnnd_expand(&s, QubusId(0), eta).unwrap();
            let p_click = pnnd_click_probability(c(1.1, 0.4), eta);
            assert!((yes.1 - p_click).abs() < 1e-12);
            assert!((no.1 + yes.1 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn module_means_match_fig_parameters() {
        let model = DetectorModel::default();
        let rows = pnd_module_distributions(&model, 4).unwrap();
        assert_eq!(rows[0].mean, 0.0);
        assert_eq!(rows[0].distribution, vec![(0, 1.0)]);
        for (k, expect) in [(1, 50.0), (2, 200.0), (3, 450.0), (4, 800.0)] {
            let oracle = 1e6 * 2.0 * (k as f64 * 0.005).sin().powi(2);
            assert!((rows[k].mean - oracle).abs() < 1e-6);
            assert!((rows[k].mean - expect).abs() / expect < 1e-3);
        }
    }

    #[test]
    fn bins_separate_default_peaks_and_reject_overlap() {
        let bins = povm_bin_decomposition(&DetectorModel::default(), 4).unwrap();
        assert_eq!(bins.len(), 4);
        for b in &bins {
            assert!(b.misclassification < 1e-6, "{b:?}");
        }
        let single = povm_bin_decomposition(&DetectorModel::default(), 1).unwrap();
        assert_eq!((single[0].m_i, single[0].m_f), (0, None));
        let blurred = DetectorModel { gamma: 100.0, theta: 0.01, ..DetectorModel::default() };
        assert!(matches!(povm_bin_decomposition(&blurred, 4), Err(Error::PeaksOverlap(_))));
    }

    #[test]
    fn pe_error_examples() {
        let r = pe_error(1e3, 0.01, 1e2, 1.0).unwrap();
        let lambda = 2.0 * 1e6 * 0.01f64.sin().powi(2);
        let oracle = -lambda * (1.0 - (-0.5f64).exp());
        assert!((r.approx_exponent - oracle).abs() < 1e-9);
        assert!((r.approx_exponent + 78.7).abs() < 0.1);
        let tiny = pe_error(1e3, 0.01, 1e2, 1e-12).unwrap();
        assert!((tiny.approx - 1.0).abs() < 1e-6);
    }

    #[test]
    fn recycling_degrades_label() {
        assert_eq!(recycle_degrade(1e3, 0.01, 0), 1e3);
        let a = recycle_degrade(1e3, 0.01, 10_000);
        assert!((a - 606.5).abs() < 0.1, "{a}");
        assert!(recycle_degrade(1e3, 0.01, 10) > recycle_degrade(1e3, 0.01, 11));
    }
}
