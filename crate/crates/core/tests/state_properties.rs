mod common;

use approx::assert_relative_eq;
use common::{random_density, rng};
use proptest::prelude::*;
use qng_core::fixtures;
use qng_core::fock::{fidelity_to_qubit_target, photon_probability, tail_probability, wigner_value, DensityMatrix};
use qng_core::measures::{fringe, local_coherence, qubit_coherence};
use qng_core::models::{model_state, ModelParams};
use std::f64::consts::{FRAC_PI_2, TAU};

fn cauchy_schwarz_holds(rho: &DensityMatrix) {
    for k in 0..rho.n_max() {
        for l in 1..=rho.n_max() - k {
            let c = local_coherence(rho, k, l).unwrap().value;
            let bound = 2.0 * (rho.entry(k, k).re * rho.entry(k + l, k + l).re).max(0.0).sqrt();
            assert!(c <= bound + 1e-12, "C_{{{k},{l}}} = {c} > {bound}");
        }
    }
}

#[test]
fn convexity_on_random_mixture_pairs() {
    let mut r = rng(11);
    for i in 0..1000 {
        let n_max = 2 + i % 4;
        let a = random_density(&mut r, n_max, 1 + i % 3);
        let b = random_density(&mut r, n_max, 1 + (i / 3) % 3);
        let w = (i as f64 + 0.5) / 1000.0;
        let mix = DensityMatrix::mix(&a, &b, w).unwrap();
        cauchy_schwarz_holds(&a);
        cauchy_schwarz_holds(&mix);
        for (k, l) in [(0, 1), (0, 2), (1, 1)] {
            let lhs = local_coherence(&mix, k, l).unwrap().value;
            let rhs = w * local_coherence(&a, k, l).unwrap().value + (1.0 - w) * local_coherence(&b, k, l).unwrap().value;
            assert!(lhs <= rhs + 1e-12);
        }
    }
}

#[test]
fn fixtures_and_models_obey_cauchy_schwarz() {
    cauchy_schwarz_holds(&fixtures::state_0m1());
    cauchy_schwarz_holds(&fixtures::state_0p2());
    for n in 1..=4 {
        for i in 0..=20 {
            let p = ModelParams::new(n, -FRAC_PI_2 + 0.05 * i as f64 * std::f64::consts::PI, 0.05 * i as f64, 1.0 - 0.03 * i as f64)
                .unwrap();
            cauchy_schwarz_holds(&model_state(&p, n + 1).unwrap());
        }
    }
}

#[test]
fn populations_sum_to_one() {
    for rho in [fixtures::state_0m1(), fixtures::state_0p2()] {
        for n in 0..rho.n_max() {
            let head: f64 = (0..=n).map(|j| photon_probability(&rho, j).unwrap()).sum();
            assert_relative_eq!(head + tail_probability(&rho, n).unwrap(), 1.0, epsilon = 1e-9);
        }
    }
}

#[test]
fn optimized_fidelity_is_phase_grid_maximum() {
    for (rho, l) in [(fixtures::state_0m1(), 1), (fixtures::state_0p2(), 2)] {
        let opt = fidelity_to_qubit_target(&rho, 0, l, None).unwrap();
        let grid = (0..64)
            .map(|i| fidelity_to_qubit_target(&rho, 0, l, Some(TAU * i as f64 / 64.0)).unwrap())
            .fold(f64::MIN, f64::max);
        assert!(opt >= grid - 1e-12);
        assert!(opt - grid < 2e-3);
    }
}

#[test]
fn wigner_integrates_to_one_on_fixtures() {
    for rho in [fixtures::state_0m1(), fixtures::state_0p2()] {
        let h = 0.05;
        let mut total = 0.0;
        for i in 0..=200 {
            for j in 0..=200 {
                total += wigner_value(&rho, -5.0 + h * i as f64, -5.0 + h * j as f64);
            }
        }
        assert_relative_eq!(total * h * h, 1.0, epsilon = 1e-3);
    }
}

#[test]
fn qubit_coherence_equals_explicit_phase_maximum() {
    let mut r = rng(5);
    for _ in 0..20 {
        let rho = random_density(&mut r, 3, 2);
        for t in 0..9 {
            let theta = -FRAC_PI_2 + std::f64::consts::PI * t as f64 / 8.0;
            let imbalance = rho.entry(2, 2).re - rho.entry(0, 0).re;
            let off = rho.entry(2, 0);
            let explicit = (0..720)
                .map(|i| {
                    let phi = -off.arg() + TAU * i as f64 / 720.0;
                    theta.cos() * fringe(&rho, 0, 2, phi).unwrap() + theta.sin() * imbalance
                })
                .fold(f64::MIN, f64::max);
            assert_relative_eq!(qubit_coherence(&rho, 0, 2, theta).unwrap().value, explicit, epsilon = 1e-12);
        }
    }
}

#[test]
fn model_coherence_grows_with_eta_and_gamma() {
    for n in 1..=3 {
        let base = ModelParams::new(n, 0.3, 0.5, 0.5).unwrap();
        let mut last = -1.0;
        for i in 0..=20 {
            let c = local_coherence(&model_state(&base.with_eta(i as f64 / 20.0), n).unwrap(), 0, n).unwrap().value;
            assert!(c >= last - 1e-15);
            last = c;
        }
        let mut last = -1.0;
        for i in 0..=20 {
            let p = ModelParams { gamma: i as f64 / 20.0, ..base };
            let c = local_coherence(&model_state(&p, n).unwrap(), 0, n).unwrap().value;
            assert!(c >= last - 1e-15);
            last = c;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn phase_rotation_preserves_coherence(seed in 0u64..10_000, phi in 0.0..TAU, l in 1usize..=3) {
        let rho = random_density(&mut rng(seed), 3, 2);
        let c0 = local_coherence(&rho, 0, l).unwrap();
        let c1 = local_coherence(&rho.rotated(phi), 0, l).unwrap();
        prop_assert!((c0.value - c1.value).abs() < 1e-12);
        let shift = (c1.optimal_phase - c0.optimal_phase).rem_euclid(TAU);
        let expected = (-(l as f64) * phi).rem_euclid(TAU);
        let d = (shift - expected).abs();
        prop_assert!(d.min(TAU - d) < 1e-9 || c0.value < 1e-12);
    }

    #[test]
    fn model_states_are_unit_trace_and_positive(
        n in 1usize..=4, theta in -FRAC_PI_2..FRAC_PI_2, eta in 0.0..=1.0f64, gamma in 0.0..=1.0f64, phi in 0.0..TAU
    ) {
        let p = ModelParams { n, theta, phi, eta, gamma };
        let rho = model_state(&p, n).unwrap();
        let tr: f64 = (0..=n).map(|j| rho.entry(j, j).re).sum();
        prop_assert!((tr - 1.0).abs() < 1e-14);
        prop_assert!(rho.eigenvalues().iter().all(|&e| e > -1e-12));
        prop_assert!((local_coherence(&rho, 0, n).unwrap().value - p.coherence()).abs() < 1e-12);
    }

    #[test]
    fn random_states_obey_cauchy_schwarz(seed in 0u64..100_000, rank in 1usize..=4) {
        let rho = random_density(&mut rng(seed), 4, rank);
        cauchy_schwarz_holds(&rho);
    }
}
