//! Truncated Fock-space states: validated density matrices, pure states and
//! the scalar quantities derived from them.

use crate::error::{Error, Result};
use crate::gaussian::displacement_overlap;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;

const HERMITIAN_EXACT: f64 = 1e-10;
const CAUCHY_SCHWARZ_SLACK: f64 = 1e-9;

/// Tolerances applied when validating a density matrix.
///
/// The defaults admit the 3-decimal rounding of published experimental
/// matrices; [`ValidationOptions::strict`] is meant for synthetic states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationOptions {
    pub trace_tol: f64,
    pub psd_tol: f64,
    pub hermitian_tol: f64,
    /// Clip small negative eigenvalues and renormalize.
    pub project_psd: bool,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions { trace_tol: 5e-3, psd_tol: 1e-3, hermitian_tol: 2e-2, project_psd: true }
    }
}

impl ValidationOptions {
    pub fn strict() -> Self {
        ValidationOptions { trace_tol: 1e-9, psd_tol: 1e-10, hermitian_tol: 1e-10, project_psd: false }
    }
}

/// On-disk density-matrix document: row-major real and imaginary grids.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityDocument {
    pub n_max: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
    #[serde(default)]
    pub label: String,
}

/// A Hermitian, unit-trace, positive semidefinite matrix on the span of
/// `|0>, ..., |n_max>`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_max: usize,
    entries: DMatrix<Complex64>,
    label: String,
    /// Frobenius distance moved by the PSD projection, if one was applied.
    psd_projection: Option<f64>,
}

impl DensityMatrix {
    /// Validate `entries`, symmetrize to exact Hermiticity and renormalize
    /// the trace.
    pub fn new(entries: DMatrix<Complex64>, label: impl Into<String>, opts: ValidationOptions) -> Result<Self> {
        let dim = entries.nrows();
        if dim == 0 || entries.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim.max(1),
                found: format!("{}x{}", entries.nrows(), entries.ncols()),
            });
        }
        let deviation = (&entries - entries.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if deviation > opts.hermitian_tol {
            return Err(Error::NotHermitian { deviation });
        }
        let mut rho = (&entries + entries.adjoint()).scale(0.5);
        let trace = rho.trace().re;
        if (trace - 1.0).abs() > opts.trace_tol || trace <= 0.0 {
            return Err(Error::TraceOutOfTolerance { trace, tolerance: opts.trace_tol });
        }
        rho.unscale_mut(trace);

        let eig = rho.clone().symmetric_eigen();
        let min_eigenvalue = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if min_eigenvalue < -opts.psd_tol {
            return Err(Error::NotPositive { min_eigenvalue });
        }
        let mut psd_projection = None;
        if min_eigenvalue < 0.0 && opts.project_psd {
            let clipped = eig.eigenvalues.map(|v| Complex64::new(v.max(0.0), 0.0));
            let mut projected = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.adjoint();
            projected = (&projected + projected.adjoint()).scale(0.5);
            let tr = projected.trace().re;
            projected.unscale_mut(tr);
            psd_projection = Some((&projected - &rho).norm());
            rho = projected;
        }

        let state = DensityMatrix { n_max: dim - 1, entries: rho, label: label.into(), psd_projection };
        state.check_cauchy_schwarz()?;
        Ok(state)
    }

    pub fn from_document(doc: &DensityDocument, opts: ValidationOptions) -> Result<Self> {
        let dim = doc.n_max + 1;
        let shape_ok = |g: &Vec<Vec<f64>>| g.len() == dim && g.iter().all(|row| row.len() == dim);
        for (name, grid) in [("re", &doc.re), ("im", &doc.im)] {
            if !shape_ok(grid) {
                let cols = grid.iter().map(|r| r.len()).max().unwrap_or(0);
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: format!("{name} grid {}x{}", grid.len(), cols),
                });
            }
        }
        let entries = DMatrix::from_fn(dim, dim, |i, j| Complex64::new(doc.re[i][j], doc.im[i][j]));
        Self::new(entries, doc.label.clone(), opts)
    }

    pub fn to_document(&self) -> DensityDocument {
        let dim = self.dim();
        DensityDocument {
            n_max: self.n_max,
            re: (0..dim).map(|i| (0..dim).map(|j| self.entries[(i, j)].re).collect()).collect(),
            im: (0..dim).map(|i| (0..dim).map(|j| self.entries[(i, j)].im).collect()).collect(),
            label: self.label.clone(),
        }
    }

    pub fn from_pure(state: &PureState, label: impl Into<String>) -> Self {
        let v = &state.amplitudes;
        let entries = v * v.adjoint();
        DensityMatrix { n_max: state.n_max, entries, label: label.into(), psd_projection: None }
    }

    /// `|n><n|` in a space of cutoff `n_max`.
    pub fn fock(n_max: usize, n: usize) -> Result<Self> {
        let state = PureState::fock(n_max, n)?;
        Ok(Self::from_pure(&state, format!("|{n}>")))
    }

    pub fn maximally_mixed(n_max: usize) -> Self {
        let dim = n_max + 1;
        let entries = DMatrix::from_diagonal_element(dim, dim, Complex64::new(1.0 / dim as f64, 0.0));
        DensityMatrix { n_max, entries, label: "maximally mixed".into(), psd_projection: None }
    }

    /// Convex combination `w * a + (1 - w) * b` of two states on the same space.
    pub fn mix(a: &DensityMatrix, b: &DensityMatrix, w: f64) -> Result<Self> {
        if a.n_max != b.n_max {
            return Err(Error::DimensionMismatch { expected: a.dim(), found: format!("{}", b.dim()) });
        }
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::InvalidParameter(format!("mixing weight {w} outside [0,1]")));
        }
        let entries = a.entries.scale(w) + b.entries.scale(1.0 - w);
        Ok(DensityMatrix { n_max: a.n_max, entries, label: "mixture".into(), psd_projection: None })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        self.n_max + 1
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn entry(&self, m: usize, n: usize) -> Complex64 {
        self.entries[(m, n)]
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn psd_projection(&self) -> Option<f64> {
        self.psd_projection
    }

    pub fn check_index(&self, n: usize) -> Result<()> {
        if n > self.n_max {
            Err(Error::IndexOutOfRange { index: n, n_max: self.n_max })
        } else {
            Ok(())
        }
    }

    pub fn check_cauchy_schwarz(&self) -> Result<()> {
        let d = self.dim();
        for m in 0..d {
            for n in 0..d {
                let excess = self.entries[(m, n)].norm_sqr() - self.entries[(m, m)].re * self.entries[(n, n)].re;
                if excess > CAUCHY_SCHWARZ_SLACK {
                    return Err(Error::CauchySchwarz { m, n, excess });
                }
            }
        }
        Ok(())
    }

    pub fn is_hermitian(&self) -> bool {
        (&self.entries - self.entries.adjoint()).iter().all(|z| z.norm() <= HERMITIAN_EXACT)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.entries.clone().symmetric_eigen().eigenvalues.iter().cloned().collect();
        v.sort_by(|a, b| a.total_cmp(b));
        v
    }

    pub fn purity(&self) -> f64 {
        (&self.entries * &self.entries).trace().re
    }

    /// Conjugate by the phase rotation `exp(i phi n)`.
    pub fn rotated(&self, phi: f64) -> Self {
        let d = self.dim();
        let entries = DMatrix::from_fn(d, d, |m, n| {
            self.entries[(m, n)] * Complex64::from_polar(1.0, phi * (m as f64 - n as f64))
        });
        DensityMatrix { entries, label: self.label.clone(), ..*self }
    }

    /// Trace distance `||a - b||_1 / 2`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        if self.n_max != other.n_max {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: format!("{}", other.dim()) });
        }
        let diff = &self.entries - &other.entries;
        Ok(0.5 * diff.symmetric_eigen().eigenvalues.iter().map(|v| v.abs()).sum::<f64>())
    }
}

/// Normalized state vector on a truncated Fock space.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    n_max: usize,
    amplitudes: DVector<Complex64>,
}

impl PureState {
    /// Normalizes `amplitudes`; fails on the zero vector.
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::InvalidParameter("empty amplitude vector".into()));
        }
        let v = DVector::from_vec(amplitudes);
        let norm = v.norm();
        if !norm.is_finite() || norm <= 0.0 {
            return Err(Error::InvalidParameter("amplitude vector has zero or non-finite norm".into()));
        }
        Ok(PureState { n_max: v.len() - 1, amplitudes: v.unscale(norm) })
    }

    pub fn fock(n_max: usize, n: usize) -> Result<Self> {
        if n > n_max {
            return Err(Error::IndexOutOfRange { index: n, n_max });
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); n_max + 1];
        amps[n] = Complex64::new(1.0, 0.0);
        Self::new(amps)
    }

    /// `cos(t)|n1> + e^{i phi} sin(t)|n2>`.
    pub fn two_level(n_max: usize, n1: usize, n2: usize, t: f64, phi: f64) -> Result<Self> {
        if n1 > n_max || n2 > n_max || n1 == n2 {
            return Err(Error::InvalidParameter(format!("invalid level pair ({n1},{n2}) for n_max {n_max}")));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); n_max + 1];
        amps[n1] = Complex64::new(t.cos(), 0.0);
        amps[n2] = Complex64::from_polar(t.sin(), phi);
        Self::new(amps)
    }

    /// Balanced target `(|n1> + e^{i phi}|n2>)/sqrt(2)`.
    pub fn balanced(n_max: usize, n1: usize, n2: usize, phi: f64) -> Result<Self> {
        Self::two_level(n_max, n1, n2, std::f64::consts::FRAC_PI_4, phi)
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }
}

pub fn load_density_matrix(text: &str, opts: ValidationOptions) -> Result<DensityMatrix> {
    let doc: DensityDocument = serde_json::from_str(text)?;
    DensityMatrix::from_document(&doc, opts)
}

pub fn load_density_file(path: impl AsRef<Path>, opts: ValidationOptions) -> Result<DensityMatrix> {
    let text = std::fs::read_to_string(path)?;
    load_density_matrix(&text, opts)
}

/// `P_n = <n|rho|n>`.
pub fn photon_probability(rho: &DensityMatrix, n: usize) -> Result<f64> {
    rho.check_index(n)?;
    let z = rho.entries[(n, n)];
    debug_assert!(z.im.abs() < 1e-10);
    Ok(z.re)
}

/// `1 - sum_{k<=n} P_k`, clipped to `[0, 1]`.
pub fn tail_probability(rho: &DensityMatrix, n: usize) -> Result<f64> {
    rho.check_index(n)?;
    let head: f64 = (0..=n).map(|k| rho.entries[(k, k)].re).sum();
    Ok((1.0 - head).clamp(0.0, 1.0))
}

/// Fidelity with `(|n1> + e^{-i phase}|n2>)/sqrt(2)`. With `phase = None`
/// the phase is chosen optimally.
pub fn fidelity_to_qubit_target(rho: &DensityMatrix, n1: usize, n2: usize, phase: Option<f64>) -> Result<f64> {
    rho.check_index(n1)?;
    rho.check_index(n2)?;
    if n1 >= n2 {
        return Err(Error::InvalidParameter(format!("fidelity target requires n1 < n2, got ({n1},{n2})")));
    }
    let base = 0.5 * (rho.entries[(n1, n1)].re + rho.entries[(n2, n2)].re);
    let off = rho.entries[(n2, n1)];
    let cross = match phase {
        None => off.norm(),
        Some(phi) => (Complex64::from_polar(1.0, phi) * off).re,
    };
    Ok((base + cross).clamp(0.0, 1.0))
}

/// Wigner function at `(x, p)`, normalized to unit integral with vacuum
/// quadrature variance 1/2. Computed as `Tr[rho D(2b) P] / pi` with the
/// parity operator `P` and `b = (x + i p)/sqrt(2)`.
pub fn wigner_value(rho: &DensityMatrix, x: f64, p: f64) -> f64 {
    let beta = Complex64::new(x, p) * 2f64.sqrt();
    let d = rho.dim();
    let mut total = Complex64::new(0.0, 0.0);
    for m in 0..d {
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        for n in 0..d {
            total += rho.entries[(m, n)] * sign * displacement_overlap(beta, n, m);
        }
    }
    total.re / PI
}
