mod common;

use common::{free_state_amplitudes, random_unit_vector, rng};
use qng_core::gaussian::GaussianParams;
use qng_core::thresholds::{absolute_threshold, inner_core_max, qubit_threshold, Budget, Kind, ThresholdQuery, Weights};
use rand::Rng;
use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, TAU};

const QUERIES: [(usize, usize, usize); 6] = [(0, 1, 1), (0, 2, 1), (0, 2, 2), (1, 1, 1), (1, 2, 2), (0, 3, 2)];

fn budget() -> Budget {
    Budget::default().with_starts(32)
}

#[test]
fn no_sampled_free_state_beats_the_threshold() {
    let mut thresholds = HashMap::new();
    for &(k, l, rank) in &QUERIES {
        for kind in [Kind::Classical, Kind::Gaussian] {
            let t = absolute_threshold(&ThresholdQuery::new(k, l, rank, kind), &budget()).unwrap().value;
            thresholds.insert((k, l, rank, kind), t);
        }
    }
    let mut r = rng(99);
    let mut closest = f64::MIN;
    for i in 0..1000 {
        let (k, l, rank) = QUERIES[i % QUERIES.len()];
        let kind = if i % 2 == 0 { Kind::Classical } else { Kind::Gaussian };
        let xi = if kind == Kind::Gaussian { r.random_range(0.0..=2.0) } else { 0.0 };
        // half the samples concentrate near the identity where the optima live
        let scale = if i % 4 < 2 { 0.5 } else { 1.0 };
        let params = GaussianParams::new(
            xi * scale,
            r.random_range(0.0..=4.0) * scale,
            r.random_range(0.0..TAU),
            r.random_range(0.0..TAU),
        )
        .unwrap();
        let m = r.random_range(0..=6);
        let core = random_unit_vector(&mut r, rank);
        let f = free_state_amplitudes(&params, m, &core, k + l);
        let c = 2.0 * f[k].norm() * f[k + l].norm();
        let t = thresholds[&(k, l, rank, kind)];
        assert!(c <= t + 1e-9, "free state {params:?} m={m} reaches {c} > {t} for {kind} ({k},{l}) rank {rank}");
        closest = closest.max(c - t);
    }
    assert!(closest < 0.0);
}

#[test]
fn no_sampled_free_state_beats_the_qubit_threshold() {
    let mut r = rng(7);
    for (i, t) in [-0.6, -0.2, 0.3, 0.8].into_iter().enumerate() {
        let theta = t * FRAC_PI_2;
        let kind = if i % 2 == 0 { Kind::Classical } else { Kind::Gaussian };
        let q = ThresholdQuery::new(0, 2, 2, kind).with_theta(theta);
        let bound = qubit_threshold(&q, &budget()).unwrap().value;
        for _ in 0..100 {
            let xi = if kind == Kind::Gaussian { r.random_range(0.0..=1.0) } else { 0.0 };
            let params = GaussianParams::new(xi, r.random_range(0.0..=2.0), r.random_range(0.0..TAU), r.random_range(0.0..TAU)).unwrap();
            let m = r.random_range(0..=4);
            let core = random_unit_vector(&mut r, 2);
            let f = free_state_amplitudes(&params, m, &core, 2);
            let g = theta.cos() * 2.0 * f[0].norm() * f[2].norm() + theta.sin() * (f[2].norm_sqr() - f[0].norm_sqr());
            assert!(g <= bound + 1e-9, "G = {g} > T_Q = {bound} at theta = {t} pi/2");
        }
    }
}

#[test]
fn inner_maximum_dominates_random_cores() {
    let mut r = rng(3);
    for _ in 0..200 {
        let params = GaussianParams::new(r.random_range(0.0..1.5), r.random_range(0.0..3.0), r.random_range(0.0..TAU), r.random_range(0.0..TAU)).unwrap();
        let m = r.random_range(0..=5);
        let rank = r.random_range(1..=3);
        let (best, _) = inner_core_max(&params, m, rank, 0, 3, Weights::coherence()).unwrap();
        for _ in 0..20 {
            let core = random_unit_vector(&mut r, rank);
            let f = free_state_amplitudes(&params, m, &core, 3);
            assert!(2.0 * f[0].norm() * f[3].norm() <= best + 1e-12);
        }
    }
}

#[test]
fn thresholds_grow_with_rank_and_gaussian_dominates_classical() {
    for (k, l) in [(0, 1), (0, 2), (1, 2), (0, 3)] {
        let mut prev = [0.0, 0.0];
        for rank in 1..=l {
            let c = absolute_threshold(&ThresholdQuery::new(k, l, rank, Kind::Classical), &budget()).unwrap().value;
            let g = absolute_threshold(&ThresholdQuery::new(k, l, rank, Kind::Gaussian), &budget()).unwrap().value;
            assert!(g >= c - 1e-9, "({k},{l}) rank {rank}: gaussian {g} < classical {c}");
            assert!(c >= prev[0] - 1e-9 && g >= prev[1] - 1e-9, "({k},{l}) not monotone at rank {rank}");
            assert!((0.0..=1.0).contains(&c) && g <= 1.0 + 1e-12);
            prev = [c, g];
        }
    }
}

#[test]
fn results_are_bit_identical_across_runs_and_modes() {
    for kind in [Kind::Classical, Kind::Gaussian] {
        let q = ThresholdQuery::new(0, 2, 2, kind);
        let a = absolute_threshold(&q, &budget().with_seed(5)).unwrap();
        let b = absolute_threshold(&q, &budget().with_seed(5)).unwrap();
        let c = absolute_threshold(&q, &budget().with_seed(5).sequential()).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.value.to_bits(), c.value.to_bits());
        assert_eq!(a.argmax, c.argmax);
    }
}

#[test]
fn invalid_queries_are_rejected() {
    assert!(absolute_threshold(&ThresholdQuery::new(0, 2, 3, Kind::Gaussian), &budget()).is_err());
    assert!(absolute_threshold(&ThresholdQuery::new(0, 2, 0, Kind::Gaussian), &budget()).is_err());
    assert!(qubit_threshold(&ThresholdQuery::new(0, 2, 1, Kind::Gaussian), &budget()).is_err());
    assert!(qubit_threshold(&ThresholdQuery::new(0, 2, 1, Kind::Gaussian).with_theta(2.0), &budget()).is_err());
}
