use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qubus_core::detectors::{pnd_expand, pnnd_expand, DetectorModel};
use qubus_core::gates::{alpha_for_beta_sq, emit_cpath, emit_merge, Builder, Control};
use qubus_core::matrix::{haar_unitary, identity};
use qubus_core::optics::{bs50, coherent_bs, pbs};
use qubus_core::parallel::Parallelism;
use qubus_core::program::{ElementProgram, Instruction, ProgramHeader, Variant};
use qubus_core::simulate::{choi_input, run, verify, SimOptions};
use qubus_core::state::{Branch, DiscreteConfig, HybridState, PhotonState, Polarization, QubusId, Slot};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn photon_state(seed: u64, arity: u16) -> HybridState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut br = Vec::new();
    for m in 0..arity {
        for p in [Polarization::H, Polarization::V] {
            br.push(Branch::new(
                c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                DiscreteConfig::new(vec![PhotonState { polarization: p, mode: m }]),
                vec![],
            ));
        }
    }
    HybridState::normalized_from(br, vec![], 0.1).unwrap()
}

fn random_program(seed: u64, len: usize) -> ElementProgram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (photons, arity) = (3usize, 4u16);
    let instructions = (0..len)
        .map(|_| {
            let p = rng.gen_range(0..photons);
            let a = rng.gen_range(0..arity);
            let b = (a + rng.gen_range(1..arity)) % arity;
            match rng.gen_range(0..5) {
                0 => Instruction::Pbs { photon: p, a, b },
                1 => Instruction::Bs50 { photon: p, pairs: vec![(a, b)] },
                2 => Instruction::LocalUnitary { photon: p, mode: a, matrix: haar_unitary(2, &mut rng) },
                3 => Instruction::ModeSwap { photon: p, a, b },
                _ => Instruction::PathExchange { a: (p, a), b: ((p + 1) % photons, b) },
            }
        })
        .collect();
    ElementProgram {
        header: ProgramHeader {
            qubits: photons,
            mode_arity: vec![arity; photons],
            alpha: 1.0,
            theta: 0.1,
            beta_sq: 0.0,
            detector: DetectorModel::default(),
            variant: Variant::Simplified,
        },
        instructions,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn unitary_programs_conserve_norm(seed in any::<u64>()) {
        let p = random_program(seed, 1000);
        p.validate().unwrap();
        let res = run(&p, choi_input(3), &SimOptions::default()).unwrap();
        prop_assert_eq!(res.nodes.len(), 1);
        prop_assert!((res.nodes[0].state.norm_sqr() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn bs50_and_pbs_are_involutions(seed in any::<u64>(), a in 0u16..3, b in 0u16..3) {
        prop_assume!(a != b);
        let s = photon_state(seed, 3);
        let back = bs50(&bs50(&s, 0, &[(a, b)]).unwrap(), 0, &[(a, b)]).unwrap();
        prop_assert!((back.inner(&s).unwrap() - c(1.0, 0.0)).norm() <= 1e-12);
        let back = pbs(&pbs(&s, 0, a, b).unwrap(), 0, a, b).unwrap();
        prop_assert!((back.inner(&s).unwrap() - c(1.0, 0.0)).norm() <= 1e-12);
    }

    #[test]
    fn pnd_probabilities_sum_to_one(re in -6.0f64..6.0, im in -6.0f64..6.0, w in 0.05f64..0.95) {
        // two-branch superposition on one beam
        let br = vec![
            Branch::new(c(w.sqrt(), 0.0), DiscreteConfig::new(vec![PhotonState { polarization: Polarization::H, mode: 0 }]), vec![c(re, im)]),
            Branch::new(c((1.0 - w).sqrt(), 0.0), DiscreteConfig::new(vec![PhotonState { polarization: Polarization::V, mode: 0 }]), vec![c(0.0, 0.0)]),
        ];
        let s = HybridState::new(br, vec![Slot::Live(QubusId(0))], 0.1).unwrap();
        let outs = pnd_expand(&s, QubusId(0), 1e-12, Parallelism::Sequential).unwrap();
        let total: f64 = outs.iter().map(|o| o.1).sum();
        prop_assert!((total - 1.0).abs() <= 1e-10);
        for (_, _, post) in &outs {
            if let Some(post) = post {
                prop_assert!((post.norm_sqr() - 1.0).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn pnnd_outcomes_sum_to_one(re in -4.0f64..4.0, im in -4.0f64..4.0, eta in 0.05f64..1.0) {
        let br = vec![Branch::new(c(1.0, 0.0), DiscreteConfig::new(vec![]), vec![c(re, im)])];
        let s = HybridState::new(br, vec![Slot::Live(QubusId(0))], 0.1).unwrap();
        let [(_, p0, _), (_, p1, _)] = pnnd_expand(&s, QubusId(0), eta).unwrap();
        prop_assert!((p0 + p1 - 1.0).abs() <= 1e-12);
        prop_assert!((p0 - (-eta * (re * re + im * im)).exp()).abs() <= 1e-12);
    }

    #[test]
    fn coherent_bs_preserves_inner_products(a in -3.0f64..3.0, b in -3.0f64..3.0, d in -3.0f64..3.0) {
        let mk = |x: f64| Branch::new(c(0.5f64.sqrt(), 0.0), DiscreteConfig::new(vec![]), vec![c(x, 0.0), c(d, 0.0)]);
        let mut one = mk(a);
        one.config.reference = 1;
        let s = HybridState::new(vec![mk(b), one], vec![Slot::Live(QubusId(0)), Slot::Live(QubusId(1))], 0.1).unwrap();
        let t = coherent_bs(&s, QubusId(0), QubusId(1)).unwrap();
        prop_assert!((t.norm_sqr() - s.norm_sqr()).abs() <= 1e-12);
    }

    #[test]
    fn cpath_merge_round_trip(theta in 0.03f64..0.4, beta_sq in 50.0f64..90.0, original in any::<bool>()) {
        let variant = if original { Variant::Original } else { Variant::Simplified };
        let mut b = Builder::new(2, alpha_for_beta_sq(theta, beta_sq), theta, variant);
        let rec = emit_cpath(&mut b, &Control::plain(0, &[0]), 1, &[0]);
        emit_merge(&mut b, &rec);
        let r = verify(&b.finish(DetectorModel::default()), &identity(4), &SimOptions::default()).unwrap();
        prop_assert!(r.max_defect <= 1e-9);
        prop_assert!(r.min_fidelity >= 1.0 - 1e-9);
        prop_assert!((r.total_probability - 1.0).abs() <= 1e-10);
    }
}

#[test]
fn parallel_and_sequential_verification_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let u = haar_unitary(4, &mut rng);
    let p = qubus_core::compile::compile(&u, &Default::default()).unwrap();
    let a = verify(&p, &u, &SimOptions { parallelism: Parallelism::Rayon, ..SimOptions::default() }).unwrap();
    let b = verify(&p, &u, &SimOptions { parallelism: Parallelism::Sequential, ..SimOptions::default() }).unwrap();
    assert_eq!(a.outcomes.len(), b.outcomes.len());
    assert_eq!(a.min_fidelity, b.min_fidelity);
    assert_eq!(a.total_probability, b.total_probability);
}
