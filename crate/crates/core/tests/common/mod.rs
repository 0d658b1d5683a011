#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use qng_core::fock::{DensityMatrix, ValidationOptions};
use qng_core::gaussian::{GaussianParams, OverlapTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gauss(r: &mut ChaCha8Rng) -> f64 {
    r.sample(StandardNormal)
}

/// Random mixed state `A A^+ / Tr` with Ginibre `A` of the given rank.
pub fn random_density(r: &mut ChaCha8Rng, n_max: usize, rank: usize) -> DensityMatrix {
    let d = n_max + 1;
    let a = DMatrix::from_fn(d, rank, |_, _| Complex64::new(gauss(r), gauss(r)));
    let m = &a * a.adjoint();
    let tr: f64 = (0..d).map(|i| m[(i, i)].re).sum();
    let m = m.unscale(tr);
    let m = (&m + m.adjoint()).scale(0.5);
    DensityMatrix::new(m, "random", ValidationOptions::strict()).expect("valid random state")
}

pub fn random_unit_vector(r: &mut ChaCha8Rng, len: usize) -> DVector<Complex64> {
    let v = DVector::from_fn(len, |_, _| Complex64::new(gauss(r), gauss(r)));
    let n = v.norm();
    v.unscale(n)
}

/// Amplitudes `F_j = sum_i <j|U|m+i> c_i` for `j <= j_max`.
pub fn free_state_amplitudes(params: &GaussianParams, m: usize, core: &DVector<Complex64>, j_max: usize) -> Vec<Complex64> {
    let table = OverlapTable::new(*params, j_max, m + core.len() - 1);
    (0..=j_max)
        .map(|j| (0..core.len()).map(|i| table.get(j, m + i) * core[i]).sum())
        .collect()
}
