mod common;

use common::rng;
use num_complex::Complex64;
use proptest::prelude::*;
use qng_core::gaussian::{oracle_table, GaussianParams, OverlapTable};
use rand::Rng;
use std::f64::consts::TAU;

#[test]
fn closed_form_matches_truncated_operator_sweep() {
    let mut r = rng(2024);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let p = GaussianParams::new(
            r.random_range(0.05..=1.5),
            r.random_range(0.0..=3.0),
            r.random_range(0.0..TAU),
            r.random_range(0.0..TAU),
        )
        .unwrap();
        let oracle = oracle_table(&p, 8, 8).unwrap();
        let table = OverlapTable::new(p, 8, 8);
        for k in 0..=8 {
            for n in 0..=8 {
                worst = worst.max((table.get(k, n) - oracle[(k, n)]).norm());
            }
        }
    }
    assert!(worst <= 1e-8, "worst deviation {worst:e}");
}

#[test]
fn parity_selection_without_displacement() {
    for xi in [0.1, 0.7, 1.5] {
        let t = OverlapTable::new(GaussianParams::new(xi, 0.0, 0.0, 1.1).unwrap(), 10, 10);
        for k in 0..=10 {
            for n in 0..=10 {
                if (k + n) % 2 == 1 {
                    assert_eq!(t.get(k, n).norm(), 0.0);
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    // R(phi) S(zeta) D(alpha) R(phi)^+ = S(zeta e^{2 i phi}) D(alpha e^{i phi})
    #[test]
    fn rotating_phases_multiplies_by_known_factor(
        xi in 0.0..1.5f64, alpha in 0.0..3.0f64, pa in 0.0..TAU, px in 0.0..TAU, phi in 0.0..TAU
    ) {
        let base = OverlapTable::new(GaussianParams::new(xi, alpha, pa, px).unwrap(), 8, 8);
        let rot = OverlapTable::new(GaussianParams::new(xi, alpha, pa + phi, px + 2.0 * phi).unwrap(), 8, 8);
        for k in 0..=8 {
            for n in 0..=8 {
                let expected = base.get(k, n) * Complex64::from_polar(1.0, phi * (k as f64 - n as f64));
                prop_assert!((rot.get(k, n) - expected).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn squeezing_phase_leaves_magnitudes_at_zero_displacement(xi in 0.0..1.5f64, px in 0.0..TAU) {
        let a = OverlapTable::new(GaussianParams::new(xi, 0.0, 0.0, 0.0).unwrap(), 8, 8);
        let b = OverlapTable::new(GaussianParams::new(xi, 0.0, 0.0, px).unwrap(), 8, 8);
        for k in 0..=8 {
            for n in 0..=8 {
                prop_assert!((a.get(k, n).norm() - b.get(k, n).norm()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn columns_are_normalized(xi in 0.0..0.8f64, alpha in 0.0..2.0f64, pa in 0.0..TAU, n in 0usize..4) {
        let t = OverlapTable::new(GaussianParams::new(xi, alpha, pa, 0.3).unwrap(), 400, n);
        let norm: f64 = (0..=400).map(|k| t.get(k, n).norm_sqr()).sum();
        prop_assert!((norm - 1.0).abs() < 1e-8);
    }
}
