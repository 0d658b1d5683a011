//! Experimental density matrices shipped with the crate, truncated at four
//! photons, with their entrywise standard deviations.

use crate::error::Result;
use crate::fock::{load_density_matrix, DensityMatrix, ValidationOptions};
use serde::Deserialize;

pub const STATE_0M1: &str = include_str!("../../../fixtures/state_0m1.json");
pub const STATE_0P2: &str = include_str!("../../../fixtures/state_0p2.json");

/// Heralded `|0> - |1>` superposition.
pub fn state_0m1() -> DensityMatrix {
    load_density_matrix(STATE_0M1, ValidationOptions::default()).expect("embedded fixture is valid")
}

/// Heralded `|0> + |2>` superposition.
pub fn state_0p2() -> DensityMatrix {
    load_density_matrix(STATE_0P2, ValidationOptions::default()).expect("embedded fixture is valid")
}

/// Text of a named fixture (`0m1` or `0p2`).
pub fn by_name(name: &str) -> Option<&'static str> {
    match name {
        "0m1" | "state_0m1" => Some(STATE_0M1),
        "0p2" | "state_0p2" => Some(STATE_0P2),
        _ => None,
    }
}

#[derive(Debug, Deserialize)]
struct Sigmas {
    sigma_re: Vec<Vec<f64>>,
    sigma_im: Vec<Vec<f64>>,
}

/// Entrywise `(sigma_re, sigma_im)` of a fixture document, if recorded.
pub fn uncertainties(text: &str) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let s: Sigmas = serde_json::from_str(text)?;
    Ok((s.sigma_re, s.sigma_im))
}
