//! Local coherence `C_{k,l}` and qubit coherence `G^theta_{k,l}`.

use crate::error::{Error, Result};
use crate::fock::DensityMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceResult {
    pub value: f64,
    /// Interferometer phase at which `Tr[X(phi) rho]` is maximal.
    pub optimal_phase: f64,
}

fn check_pair(rho: &DensityMatrix, k: usize, l: usize) -> Result<()> {
    if l == 0 {
        return Err(Error::InvalidParameter("coherence distance l must be positive".into()));
    }
    rho.check_index(k + l)
}

pub fn check_theta(theta: f64) -> Result<()> {
    if !(-FRAC_PI_2 - 1e-12..=FRAC_PI_2 + 1e-12).contains(&theta) {
        return Err(Error::InvalidParameter(format!("qubit angle {theta} outside [-pi/2, pi/2]")));
    }
    Ok(())
}

/// `Tr[X(phi) rho]` for `X(phi) = e^{i phi}|k><k+l| + e^{-i phi}|k+l><k|`.
pub fn fringe(rho: &DensityMatrix, k: usize, l: usize, phi: f64) -> Result<f64> {
    check_pair(rho, k, l)?;
    Ok(2.0 * (Complex64::from_polar(1.0, phi) * rho.entry(k + l, k)).re)
}

/// Half the peak-to-peak fringe contrast, which reduces to `2|rho_{k,k+l}|`.
pub fn local_coherence(rho: &DensityMatrix, k: usize, l: usize) -> Result<CoherenceResult> {
    check_pair(rho, k, l)?;
    let off = rho.entry(k + l, k);
    Ok(CoherenceResult { value: 2.0 * off.norm(), optimal_phase: -off.arg() })
}

/// `G = cos(theta) C + sin(theta) (P_{k+l} - P_k)`.
pub fn qubit_coherence(rho: &DensityMatrix, k: usize, l: usize, theta: f64) -> Result<CoherenceResult> {
    check_theta(theta)?;
    let c = local_coherence(rho, k, l)?;
    let imbalance = rho.entry(k + l, k + l).re - rho.entry(k, k).re;
    Ok(CoherenceResult { value: theta.cos() * c.value + theta.sin() * imbalance, optimal_phase: c.optimal_phase })
}

/// Polar angle of the normalized qubit target `cos(theta/2 + pi/4)|k> + sin(theta/2 + pi/4)|k+l>`.
pub fn qubit_target_angle(theta: f64) -> f64 {
    0.5 * theta + std::f64::consts::FRAC_PI_4
}
