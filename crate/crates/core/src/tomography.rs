//! Homodyne simulation, maximum-likelihood reconstruction and bootstrap
//! error bars.
//!
//! Quadrature convention: `x_theta = (a e^{-i theta} + a^+ e^{i theta}) / sqrt 2`,
//! so `<n|x_theta> = psi_n(x) e^{i n theta}` and the vacuum variance is 1/2.

use crate::error::{Error, Result};
use crate::fock::{DensityMatrix, ValidationOptions};
use crate::measures::local_coherence;
use crate::par;
use crate::special::oscillator_wavefunctions;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureDataset {
    /// `(phase, x)` pairs with phases in `[0, pi)`.
    pub samples: Vec<(f64, f64)>,
    pub seed: u64,
    pub label: String,
}

/// Sidecar metadata written next to a dataset CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub label: String,
    pub seed: u64,
    pub n_samples: usize,
    pub schedule: Vec<f64>,
}

/// Equally spaced phases in `[0, pi)`.
pub fn phase_schedule(count: usize) -> Vec<f64> {
    (0..count).map(|i| PI * i as f64 / count as f64).collect()
}

pub const DEFAULT_PHASES: usize = 12;

fn reduce_phase(theta: f64) -> f64 {
    let r = theta.rem_euclid(PI);
    if r >= PI {
        0.0
    } else {
        r
    }
}

/// `<n|x_theta>` for `n <= n_max`.
fn projector_vector(n_max: usize, theta: f64, x: f64) -> DVector<Complex64> {
    let psi = oscillator_wavefunctions(n_max, x);
    DVector::from_fn(n_max + 1, |n, _| Complex64::from_polar(psi[n], n as f64 * theta))
}

/// `p(x | theta) = sum_{mn} rho_mn psi_m psi_n e^{i(n-m) theta}`, clipped at 0.
pub fn quadrature_pdf(rho: &DensityMatrix, theta: f64, x: f64) -> f64 {
    let w = projector_vector(rho.n_max(), theta, x);
    let p = (w.adjoint() * rho.entries() * &w)[(0, 0)].re;
    p.max(0.0)
}

/// Tabulated inverse CDF of one phase.
struct Sampler {
    xs: Vec<f64>,
    cdf: Vec<f64>,
}

impl Sampler {
    fn new(rho: &DensityMatrix, theta: f64) -> Self {
        let half = (2.0 * rho.n_max() as f64 + 1.0).sqrt() + 8.0;
        let n = 8001;
        let h = 2.0 * half / (n - 1) as f64;
        let xs: Vec<f64> = (0..n).map(|i| -half + h * i as f64).collect();
        let pdf: Vec<f64> = xs.iter().map(|&x| quadrature_pdf(rho, theta, x)).collect();
        let mut cdf = Vec::with_capacity(n);
        cdf.push(0.0);
        for i in 1..n {
            cdf.push(cdf[i - 1] + 0.5 * h * (pdf[i] + pdf[i - 1]));
        }
        let total = *cdf.last().expect("non-empty grid");
        cdf.iter_mut().for_each(|c| *c /= total);
        Sampler { xs, cdf }
    }

    fn sample(&self, u: f64) -> f64 {
        let i = self.cdf.partition_point(|&c| c < u).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let t = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
        self.xs[i - 1] + t * (self.xs[i] - self.xs[i - 1])
    }
}

/// Inverse-transform sampling; sample `i` uses phase `schedule[i % len]`.
pub fn sample_quadratures(rho: &DensityMatrix, n_samples: usize, schedule: &[f64], seed: u64) -> Result<QuadratureDataset> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be at least 1".into()));
    }
    if schedule.is_empty() || schedule.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidParameter("phase schedule must be finite and non-empty".into()));
    }
    let phases: Vec<f64> = schedule.iter().map(|&t| reduce_phase(t)).collect();
    let samplers: Vec<Sampler> = phases.iter().map(|&t| Sampler::new(rho, t)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..n_samples)
        .map(|i| {
            let j = i % phases.len();
            (phases[j], samplers[j].sample(rng.random::<f64>()))
        })
        .collect();
    Ok(QuadratureDataset { samples, seed, label: rho.label().to_string() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Binning {
    pub bins: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Default for Binning {
    fn default() -> Self {
        Binning { bins: 200, lo: -6.0, hi: 6.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlOptions {
    pub iterations: usize,
    pub tolerance: f64,
    pub binning: Option<Binning>,
}

impl Default for MlOptions {
    fn default() -> Self {
        MlOptions { iterations: 2000, tolerance: 1e-10, binning: None }
    }
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub rho: DensityMatrix,
    /// Mean log-likelihood after each iteration (index 0 is the start).
    pub log_likelihood: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

const REGULARIZATION: f64 = 1e-12;

/// Observation weights and the matrix whose rows are `<x_theta|n>`, one row
/// per sample or per occupied (phase, bin) cell.
struct Observations {
    weights: Vec<f64>,
    rows: DMatrix<Complex64>,
}

impl Observations {
    fn new(data: &QuadratureDataset, n_max: usize, binning: Option<Binning>) -> Self {
        let n = data.samples.len() as f64;
        let cells: Vec<(f64, f64, f64)> = match binning {
            None => data.samples.iter().map(|&(t, x)| (1.0 / n, t, x)).collect(),
            Some(b) => {
                let mut phases: Vec<f64> = data.samples.iter().map(|s| s.0).collect();
                phases.sort_by(f64::total_cmp);
                phases.dedup();
                let width = (b.hi - b.lo) / b.bins as f64;
                let mut counts = vec![0usize; phases.len() * b.bins];
                for &(t, x) in &data.samples {
                    let p = phases.partition_point(|&q| q < t);
                    let bin = (((x - b.lo) / width).floor().max(0.0) as usize).min(b.bins - 1);
                    counts[p * b.bins + bin] += 1;
                }
                let mut out = Vec::new();
                for (p, &t) in phases.iter().enumerate() {
                    for bin in 0..b.bins {
                        let c = counts[p * b.bins + bin];
                        if c > 0 {
                            out.push((c as f64 / n, t, b.lo + (bin as f64 + 0.5) * width));
                        }
                    }
                }
                out
            }
        };
        let mut rows = DMatrix::<Complex64>::zeros(cells.len(), n_max + 1);
        for (j, &(_, t, x)) in cells.iter().enumerate() {
            let v = projector_vector(n_max, t, x);
            for n in 0..=n_max {
                rows[(j, n)] = v[n].conj();
            }
        }
        Observations { weights: cells.iter().map(|c| c.0).collect(), rows }
    }

    /// `p_j = <x_j| rho |x_j>` (regularized).
    fn probabilities(&self, rho: &DMatrix<Complex64>) -> Vec<f64> {
        let b = &self.rows * rho;
        (0..self.rows.nrows())
            .map(|j| {
                let p: f64 = b.row(j).iter().zip(self.rows.row(j).iter()).map(|(x, a)| (x * a.conj()).re).sum();
                p.max(0.0) + REGULARIZATION
            })
            .collect()
    }

    fn log_likelihood(&self, probs: &[f64]) -> f64 {
        self.weights.iter().zip(probs).map(|(w, p)| w * p.ln()).sum()
    }

    /// `R = sum_j (w_j / p_j) |x_j><x_j|`.
    fn r_operator(&self, probs: &[f64]) -> DMatrix<Complex64> {
        let mut scaled = self.rows.clone();
        for (j, mut row) in scaled.row_iter_mut().enumerate() {
            row *= Complex64::new(self.weights[j] / probs[j], 0.0);
        }
        self.rows.adjoint() * scaled
    }
}

/// Maximum-likelihood state on `n_max` photons by the diluted `R rho R`
/// iteration, starting from the maximally mixed state. The dilution is
/// halved until the likelihood does not decrease, so the recorded
/// likelihood sequence is monotone.
pub fn ml_reconstruct(data: &QuadratureDataset, n_max: usize, opts: &MlOptions) -> Result<Reconstruction> {
    if data.samples.is_empty() {
        return Err(Error::DegenerateData("empty dataset".into()));
    }
    let (t0, x0) = data.samples[0];
    if data.samples.iter().all(|&(t, x)| t == t0 && x == x0) {
        return Err(Error::DegenerateData("all samples identical".into()));
    }
    let d = n_max + 1;
    let obs = Observations::new(data, n_max, opts.binning);
    let mut rho = DMatrix::<Complex64>::identity(d, d) / Complex64::new(d as f64, 0.0);
    let mut probs = obs.probabilities(&rho);
    let mut ll = vec![obs.log_likelihood(&probs)];
    let mut converged = false;
    let mut iterations = 0;
    let eye = DMatrix::<Complex64>::identity(d, d);
    while iterations < opts.iterations {
        let r = obs.r_operator(&probs);
        let current = *ll.last().expect("initial likelihood");
        let mut eps = 1e3;
        let mut accepted = None;
        for _ in 0..40 {
            let m = &eye + &r * Complex64::new(eps, 0.0);
            let mut next = &m * &rho * m.adjoint();
            let tr = next.trace().re;
            next /= Complex64::new(tr, 0.0);
            next = (&next + next.adjoint()) * Complex64::new(0.5, 0.0);
            let next_probs = obs.probabilities(&next);
            let value = obs.log_likelihood(&next_probs);
            if value >= current {
                accepted = Some((next, next_probs, value));
                break;
            }
            eps *= 0.5;
        }
        iterations += 1;
        match accepted {
            Some((next, next_probs, value)) => {
                rho = next;
                probs = next_probs;
                ll.push(value);
                if value - current < opts.tolerance {
                    converged = true;
                    break;
                }
            }
            None => {
                ll.push(current);
                converged = true;
                break;
            }
        }
    }
    let label = format!("ml reconstruction of {}", data.label);
    let rho = DensityMatrix::new(rho, label, ValidationOptions::default())?;
    Ok(Reconstruction { rho, log_likelihood: ll, iterations, converged })
}

#[derive(Debug, Clone)]
pub struct Bootstrap {
    pub std_re: DMatrix<f64>,
    pub std_im: DMatrix<f64>,
    pub replicas: Vec<DensityMatrix>,
}

impl Bootstrap {
    /// Standard deviation of `C_{k,l}` across replicas.
    pub fn coherence_sigma(&self, k: usize, l: usize) -> Result<f64> {
        let values: Vec<f64> =
            self.replicas.iter().map(|r| local_coherence(r, k, l).map(|c| c.value)).collect::<Result<_>>()?;
        Ok(std_dev(&values))
    }
}

fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Seed of bootstrap replica `index`.
pub fn replica_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed ^ (index as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Parametric bootstrap: resample from `rho_hat`, reconstruct, and take
/// entrywise standard deviations. One dataset gives zeros.
pub fn bootstrap_errorbars(
    rho_hat: &DensityMatrix,
    n_datasets: usize,
    n_samples: usize,
    schedule: &[f64],
    seed: u64,
    opts: &MlOptions,
    parallel: bool,
) -> Result<Bootstrap> {
    if n_datasets == 0 {
        return Err(Error::InvalidParameter("n_datasets must be at least 1".into()));
    }
    let n_max = rho_hat.n_max();
    let replicas: Vec<DensityMatrix> = par::map((0..n_datasets).collect(), parallel, |i| {
        let data = sample_quadratures(rho_hat, n_samples, schedule, replica_seed(seed, i))?;
        Ok(ml_reconstruct(&data, n_max, opts)?.rho)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let d = n_max + 1;
    let column = |f: &dyn Fn(&DensityMatrix) -> f64| std_dev(&replicas.iter().map(f).collect::<Vec<_>>());
    let std_re = DMatrix::from_fn(d, d, |i, j| column(&|r| r.entry(i, j).re));
    let std_im = DMatrix::from_fn(d, d, |i, j| column(&|r| r.entry(i, j).im));
    Ok(Bootstrap { std_re, std_im, replicas })
}

/// CSV with header `phase,x`.
pub fn dataset_to_csv(data: &QuadratureDataset) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["phase", "x"]).map_err(|e| Error::Parse(e.to_string()))?;
    for &(t, x) in &data.samples {
        w.write_record([format!("{t:.17e}"), format!("{x:.17e}")]).map_err(|e| Error::Parse(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

pub fn dataset_from_csv(text: &str, seed: u64, label: &str) -> Result<QuadratureDataset> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    if headers.len() != 2 || &headers[0] != "phase" || &headers[1] != "x" {
        return Err(Error::Parse(format!("expected header `phase,x`, found `{}`", headers.iter().collect::<Vec<_>>().join(","))));
    }
    let mut samples = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let num = |j: usize| -> Result<f64> {
            let v: f64 = rec[j].trim().parse().map_err(|_| Error::Parse(format!("row {}: bad number `{}`", i + 2, &rec[j])))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Parse(format!("row {}: non-finite value", i + 2)))
            }
        };
        samples.push((reduce_phase(num(0)?), num(1)?));
    }
    Ok(QuadratureDataset { samples, seed, label: label.to_string() })
}

pub fn meta_path(csv_path: &Path) -> PathBuf {
    let mut name = csv_path.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

pub fn write_dataset(path: &Path, data: &QuadratureDataset, schedule: &[f64]) -> Result<()> {
    std::fs::write(path, dataset_to_csv(data)?)?;
    let meta = DatasetMeta {
        label: data.label.clone(),
        seed: data.seed,
        n_samples: data.samples.len(),
        schedule: schedule.to_vec(),
    };
    std::fs::write(meta_path(path), serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<QuadratureDataset> {
    let text = std::fs::read_to_string(path)?;
    let meta: Option<DatasetMeta> =
        std::fs::read_to_string(meta_path(path)).ok().map(|t| serde_json::from_str(&t)).transpose()?;
    let (seed, label) = meta.map_or((0, path.display().to_string()), |m| (m.seed, m.label));
    dataset_from_csv(&text, seed, &label)
}
