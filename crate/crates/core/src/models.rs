//! Lossy, dephased qubit models `rho_{theta,n}` and their robustness scans.
//!
//! The target `cos(a)|0> + e^{i phi} sin(a)|n>` with `a = theta/2 + pi/4`
//! passes a pure-loss channel of transmission `eta` (all binomial
//! populations kept, so the trace is exactly one) and a dephasing that
//! multiplies the `|0><n|` coherence by `gamma`.

use crate::error::{Error, Result};
use crate::fock::{DensityMatrix, ValidationOptions};
use crate::measures::{check_theta, qubit_coherence, qubit_target_angle};
use crate::par;
use crate::special::ln_factorial;
use crate::thresholds::{qubit_threshold, Budget, Kind, ThresholdQuery};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n: usize,
    pub theta: f64,
    pub phi: f64,
    pub eta: f64,
    pub gamma: f64,
}

impl ModelParams {
    pub fn new(n: usize, theta: f64, eta: f64, gamma: f64) -> Result<Self> {
        let p = ModelParams { n, theta, phi: 0.0, eta, gamma };
        p.validate()?;
        Ok(p)
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParameter("model distance n must be positive".into()));
        }
        check_theta(self.theta)?;
        for (name, v) in [("eta", self.eta), ("gamma", self.gamma)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!("{name} = {v} outside [0, 1]")));
            }
        }
        if !self.phi.is_finite() {
            return Err(Error::InvalidParameter("phi must be finite".into()));
        }
        Ok(())
    }

    /// `C_{0,n} = 2 eta^{n/2} gamma |cos(a) sin(a)|`.
    pub fn coherence(&self) -> f64 {
        let a = qubit_target_angle(self.theta);
        2.0 * self.eta.powf(0.5 * self.n as f64) * self.gamma * (a.cos() * a.sin()).abs()
    }
}

fn binomial_weight(n: usize, j: usize, eta: f64) -> f64 {
    if eta == 0.0 {
        return if j == 0 { 1.0 } else { 0.0 };
    }
    if eta == 1.0 {
        return if j == n { 1.0 } else { 0.0 };
    }
    let ln_binom = ln_factorial(n) - ln_factorial(j) - ln_factorial(n - j);
    (ln_binom + j as f64 * eta.ln() + (n - j) as f64 * (1.0 - eta).ln()).exp()
}

pub fn model_state(params: &ModelParams, n_max: usize) -> Result<DensityMatrix> {
    params.validate()?;
    if params.n > n_max {
        return Err(Error::IndexOutOfRange { index: params.n, n_max });
    }
    let a = qubit_target_angle(params.theta);
    let (c2, s2) = (a.cos().powi(2), a.sin().powi(2));
    let n = params.n;
    let dim = n_max + 1;
    let mut m = DMatrix::<Complex64>::zeros(dim, dim);
    m[(0, 0)] += c2;
    for j in 0..=n {
        m[(j, j)] += s2 * binomial_weight(n, j, params.eta);
    }
    let off = Complex64::from_polar(
        params.eta.powf(0.5 * n as f64) * params.gamma * a.sin() * a.cos(),
        params.phi,
    );
    m[(0, n)] += off;
    m[(n, 0)] += off.conj();
    DensityMatrix::new(m, format!("model n={n} eta={} gamma={}", params.eta, params.gamma), ValidationOptions::default())
}

/// `G^theta_{0,n}` of the model state, evaluated through the measures module.
pub fn model_qubit_coherence(params: &ModelParams) -> Result<f64> {
    let rho = model_state(params, params.n)?;
    Ok(qubit_coherence(&rho, 0, params.n, params.theta)?.value)
}

fn threshold_query(params: &ModelParams, kind: Kind, rank: usize) -> ThresholdQuery {
    ThresholdQuery::new(0, params.n, rank, kind).with_theta(params.theta)
}

/// Smallest transmission at which the model beats `T_Q(theta)`, or `None`.
///
/// Scans `eta` in steps of `1e-3` (no monotonicity assumed) and bisects the
/// first passing cell.
pub fn min_eta(params: &ModelParams, kind: Kind, rank: usize, budget: &Budget) -> Result<Option<f64>> {
    params.validate()?;
    let threshold = qubit_threshold(&threshold_query(params, kind, rank), budget)?.value;
    let margin = |eta: f64| -> Result<f64> { Ok(model_qubit_coherence(&params.with_eta(eta))? - threshold) };
    let steps = 1000;
    let mut prev = 0.0;
    for i in 0..=steps {
        let eta = i as f64 / steps as f64;
        if margin(eta)? > 0.0 {
            if i == 0 {
                return Ok(Some(0.0));
            }
            let (mut lo, mut hi) = (prev, eta);
            while hi - lo > 1e-10 {
                let mid = 0.5 * (lo + hi);
                if margin(mid)? > 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Ok(Some(hi));
        }
        prev = eta;
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub theta: f64,
    pub measured: f64,
    pub threshold: f64,
}

impl ScanPoint {
    pub fn passes(&self) -> bool {
        self.measured > self.threshold
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaInterval {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaWindows {
    pub intervals: Vec<ThetaInterval>,
    pub scan: Vec<ScanPoint>,
}

/// `n` equally spaced angles covering `[-pi/2, pi/2]`.
pub fn theta_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| -FRAC_PI_2 + std::f64::consts::PI * i as f64 / (n - 1) as f64).collect(),
    }
}

fn scan_point(params: &ModelParams, kind: Kind, rank: usize, budget: &Budget, theta: f64) -> Result<ScanPoint> {
    let p = params.with_theta(theta);
    let threshold = qubit_threshold(&threshold_query(&p, kind, rank), budget)?.value;
    Ok(ScanPoint { theta, measured: model_qubit_coherence(&p)?, threshold })
}

/// Disjoint `theta` intervals on which the model beats `T_Q`, with interior
/// endpoints bisected to `1e-4 pi/2`.
pub fn theta_window(
    params: &ModelParams,
    kind: Kind,
    rank: usize,
    grid: &[f64],
    budget: &Budget,
) -> Result<ThetaWindows> {
    params.validate()?;
    let mut grid: Vec<f64> = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    for &t in &grid {
        check_theta(t)?;
    }
    let inner = Budget { parallel: false, ..*budget };
    let scan: Vec<ScanPoint> = par::map(grid.clone(), budget.parallel, |t| scan_point(params, kind, rank, &inner, t))
        .into_iter()
        .collect::<Result<_>>()?;

    let refine = |pass_at_hi: bool, mut lo: f64, mut hi: f64| -> Result<f64> {
        while hi - lo > 1e-4 * FRAC_PI_2 {
            let mid = 0.5 * (lo + hi);
            let passes = scan_point(params, kind, rank, budget, mid)?.passes();
            if passes == pass_at_hi {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    };

    let mut intervals = Vec::new();
    let mut open: Option<f64> = None;
    for i in 0..scan.len() {
        let here = scan[i].passes();
        let before = i > 0 && scan[i - 1].passes();
        if here && !before {
            open = Some(if i == 0 { scan[0].theta } else { refine(true, scan[i - 1].theta, scan[i].theta)? });
        }
        if here && (i + 1 == scan.len() || !scan[i + 1].passes()) {
            let hi = if i + 1 == scan.len() { scan[i].theta } else { refine(false, scan[i].theta, scan[i + 1].theta)? };
            intervals.push(ThetaInterval { lo: open.take().expect("interval opened"), hi });
        }
    }
    Ok(ThetaWindows { intervals, scan })
}

/// CSV with header `theta_over_half_pi,measured,threshold`.
pub fn scan_csv(scan: &[ScanPoint]) -> String {
    let mut out = String::from("theta_over_half_pi,measured,threshold\n");
    for p in scan {
        let _ = writeln!(out, "{:.6},{:.9},{:.9}", p.theta / FRAC_PI_2, p.measured, p.threshold);
    }
    out
}
