//! Fock-basis matrix elements of the Gaussian unitary `U = S(zeta) D(alpha)`.
//!
//! Conventions, pinned against the truncated-operator oracle:
//!
//! * `D(alpha) = exp(alpha a^+ - alpha^* a)` with `alpha = |alpha| e^{i phi_alpha}`
//! * `S(zeta) = exp[(zeta a^+^2 - zeta^* a^2)/2]` with `zeta = xi e^{i phi_xi}`,
//!   so `<0|S|0> = 1/sqrt(cosh xi)`
//! * `g_{k,n} = <k| S(zeta) D(alpha) |n>`
//!
//! The closed form expands the generating function
//! `sum_{k,n} g_{k,n} s^k t^n / sqrt(k! n!) = N exp[tau s^2/2 - tau^* t^2/2 + s t / cosh xi + A s + B t]`
//! with `tau = e^{i phi_xi} tanh xi`, `A = alpha / cosh xi`,
//! `B = -(alpha^* + tau^* alpha)` and `N = exp(-|alpha|^2/2 - tau^* alpha^2/2) / sqrt(cosh xi)`.
//! Each single-variable factor is a scaled Hermite series whose coefficients
//! obey a three-term recurrence that stays finite as `xi -> 0`.

use crate::error::{Error, Result};
use crate::special::{hermite_all, laguerre, ln_factorial};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// Below this squeezing magnitude the displacement-only branch is used.
pub const SQUEEZE_BRANCH_THRESHOLD: f64 = 1e-6;

const ORACLE_START_DIM: usize = 40;
const ORACLE_MAX_DIM: usize = 1280;
const ORACLE_AGREEMENT: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    pub xi: f64,
    pub alpha: f64,
    pub phi_alpha: f64,
    pub phi_xi: f64,
}

fn reduce_angle(phi: f64) -> f64 {
    let r = phi.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

impl GaussianParams {
    pub fn new(xi: f64, alpha: f64, phi_alpha: f64, phi_xi: f64) -> Result<Self> {
        let all = [xi, alpha, phi_alpha, phi_xi];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite Gaussian parameters {all:?}")));
        }
        if xi < 0.0 || alpha < 0.0 {
            return Err(Error::InvalidParameter(format!("negative magnitude: xi = {xi}, alpha = {alpha}")));
        }
        Ok(GaussianParams { xi, alpha, phi_alpha: reduce_angle(phi_alpha), phi_xi: reduce_angle(phi_xi) })
    }

    pub fn identity() -> Self {
        GaussianParams { xi: 0.0, alpha: 0.0, phi_alpha: 0.0, phi_xi: 0.0 }
    }

    pub fn displacement(alpha: f64, phi_alpha: f64) -> Result<Self> {
        Self::new(0.0, alpha, phi_alpha, 0.0)
    }

    pub fn alpha_complex(&self) -> Complex64 {
        Complex64::from_polar(self.alpha, self.phi_alpha)
    }

    pub fn zeta_complex(&self) -> Complex64 {
        Complex64::from_polar(self.xi, self.phi_xi)
    }
}

/// `<k| D(gamma) |n>` via the associated-Laguerre form.
pub fn displacement_overlap(gamma: Complex64, k: usize, n: usize) -> Complex64 {
    let x = gamma.norm_sqr();
    let gauss = (-0.5 * x).exp();
    if k >= n {
        let scale = (0.5 * (ln_factorial(n) - ln_factorial(k))).exp();
        gamma.powu((k - n) as u32) * (scale * gauss * laguerre(n, k - n, x))
    } else {
        let scale = (0.5 * (ln_factorial(k) - ln_factorial(n))).exp();
        (-gamma.conj()).powu((n - k) as u32) * (scale * gauss * laguerre(k, n - k, x))
    }
}

/// Auxiliary double-Hermite sum
/// `sum_{j=0}^{min(k,l)} z^{k-j} H_{k-j}(x) H_{l-j}(y) / sqrt(k! l! (k-j)! (l-j)!)`
/// with factorials taken in log space.
pub fn aux_s(k: usize, l: usize, x: Complex64, y: Complex64, z: Complex64) -> Complex64 {
    let hx = hermite_all(k, x);
    let hy = hermite_all(l, y);
    let base = ln_factorial(k) + ln_factorial(l);
    (0..=k.min(l))
        .map(|j| {
            let denom = (0.5 * (base + ln_factorial(k - j) + ln_factorial(l - j))).exp();
            z.powu((k - j) as u32) * hx[k - j] * hy[l - j] / denom
        })
        .sum()
}

/// Table of `g_{k,n}` for `k <= max_row`, `n <= max_col`.
#[derive(Debug, Clone)]
pub struct OverlapTable {
    params: GaussianParams,
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl OverlapTable {
    pub fn new(params: GaussianParams, max_row: usize, max_col: usize) -> Self {
        let rows = max_row + 1;
        let cols = max_col + 1;
        let mut data = vec![Complex64::new(0.0, 0.0); rows * cols];
        if params.xi < SQUEEZE_BRANCH_THRESHOLD {
            let a = params.alpha_complex();
            for k in 0..rows {
                for n in 0..cols {
                    data[k * cols + n] = displacement_overlap(a, k, n);
                }
            }
            return OverlapTable { params, rows, cols, data };
        }

        let alpha = params.alpha_complex();
        let ch = params.xi.cosh();
        let tau = Complex64::from_polar(params.xi.tanh(), params.phi_xi);
        let a_lin = alpha / ch;
        let b_lin = -(alpha.conj() + tau.conj() * alpha);
        let norm = (-0.5 * alpha.norm_sqr() - 0.5 * tau.conj() * alpha * alpha).exp() / ch.sqrt();

        // r_p = c_p sqrt(p!), combined with sqrt(C(k,j) C(n,j)) so nothing overflows
        let row_series = scaled_hermite(max_row, a_lin, tau);
        let col_series = scaled_hermite(max_col, b_lin, -tau.conj());
        let ln_t = -ch.ln();
        let lnf: Vec<f64> = (0..=max_row.max(max_col)).map(ln_factorial).collect();
        let ln_binom = |n: usize, j: usize| lnf[n] - lnf[j] - lnf[n - j];

        for k in 0..rows {
            for n in 0..cols {
                let mut sum = Complex64::new(0.0, 0.0);
                for j in 0..=k.min(n) {
                    let w = (0.5 * (ln_binom(k, j) + ln_binom(n, j)) + j as f64 * ln_t).exp();
                    sum += row_series[k - j] * col_series[n - j] * w;
                }
                data[k * cols + n] = norm * sum;
            }
        }
        OverlapTable { params, rows, cols, data }
    }

    #[inline]
    pub fn get(&self, k: usize, n: usize) -> Complex64 {
        debug_assert!(k < self.rows && n < self.cols);
        self.data[k * self.cols + n]
    }

    pub fn params(&self) -> &GaussianParams {
        &self.params
    }

    pub fn max_row(&self) -> usize {
        self.rows - 1
    }

    pub fn max_col(&self) -> usize {
        self.cols - 1
    }
}

/// `sqrt(p!) c_p` for the coefficients `c_p` of `exp(q s^2/2 + lin s) = sum_p c_p s^p`.
fn scaled_hermite(max: usize, lin: Complex64, q: Complex64) -> Vec<Complex64> {
    // (p+1) c_{p+1} = lin c_p + q c_{p-1}
    let mut r = Vec::with_capacity(max + 1);
    r.push(Complex64::new(1.0, 0.0));
    if max >= 1 {
        r.push(lin);
    }
    for p in 1..max {
        let s = (p as f64 + 1.0).sqrt();
        let next = (lin * r[p] + q * r[p - 1] * (p as f64).sqrt()) / s;
        r.push(next);
    }
    r
}

/// Closed-form `g_{k,n}`.
pub fn overlap_closed_form(params: &GaussianParams, k: usize, n: usize) -> Complex64 {
    let value = OverlapTable::new(*params, k, n).get(k, n);
    assert!(value.is_finite(), "non-finite overlap for {params:?} ({k},{n})");
    value
}

fn annihilation(dim: usize) -> DMatrix<Complex64> {
    let mut a = DMatrix::<Complex64>::zeros(dim, dim);
    for j in 1..dim {
        a[(j - 1, j)] = Complex64::new((j as f64).sqrt(), 0.0);
    }
    a
}

/// `exp(G)` for anti-Hermitian `G` through the spectral decomposition of `iG`.
fn expm_anti_hermitian(g: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let h = g * Complex64::new(0.0, 1.0);
    let h = (&h + h.adjoint()).scale(0.5);
    let eig = h.symmetric_eigen();
    let phases = eig.eigenvalues.map(|l| Complex64::from_polar(1.0, -l));
    &eig.eigenvectors * DMatrix::from_diagonal(&phases) * eig.eigenvectors.adjoint()
}

/// `S D` built from matrix exponentials of the truncated generators.
pub fn truncated_unitary(params: &GaussianParams, dim: usize) -> DMatrix<Complex64> {
    let a = annihilation(dim);
    let ad = a.adjoint();
    let alpha = params.alpha_complex();
    let zeta = params.zeta_complex();
    let gen_d = &ad * alpha - &a * alpha.conj();
    let d = expm_anti_hermitian(&gen_d);
    if params.xi == 0.0 {
        return d;
    }
    let a2 = &a * &a;
    let ad2 = &ad * &ad;
    let gen_s = (&ad2 * zeta - &a2 * zeta.conj()) * Complex64::new(0.5, 0.0);
    expm_anti_hermitian(&gen_s) * d
}

/// Oracle value of `g_{k,n}` at a fixed truncation, checked against the
/// doubled truncation.
pub fn overlap_oracle(params: &GaussianParams, k: usize, n: usize, oracle_dim: usize) -> Result<Complex64> {
    if k >= oracle_dim || n >= oracle_dim {
        return Err(Error::OracleDimension { dim: oracle_dim, deviation: f64::INFINITY });
    }
    let small = truncated_unitary(params, oracle_dim)[(k, n)];
    let large = truncated_unitary(params, 2 * oracle_dim)[(k, n)];
    let deviation = (small - large).norm();
    if deviation > 1e-8 {
        return Err(Error::OracleDimension { dim: oracle_dim, deviation });
    }
    Ok(large)
}

/// Oracle table of `g_{k,n}` for `k <= max_k`, `n <= max_n`, doubling the
/// truncation from 40 until successive dimensions agree to 1e-10.
pub fn oracle_table(params: &GaussianParams, max_k: usize, max_n: usize) -> Result<DMatrix<Complex64>> {
    let mut dim = ORACLE_START_DIM.max(2 * (max_k.max(max_n) + 1));
    let mut prev = truncated_unitary(params, dim).view((0, 0), (max_k + 1, max_n + 1)).into_owned();
    loop {
        let next_dim = dim * 2;
        if next_dim > ORACLE_MAX_DIM {
            return Err(Error::OracleDimension { dim, deviation: f64::NAN });
        }
        let next = truncated_unitary(params, next_dim).view((0, 0), (max_k + 1, max_n + 1)).into_owned();
        let deviation = (&next - &prev).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if deviation <= ORACLE_AGREEMENT {
            return Ok(next);
        }
        prev = next;
        dim = next_dim;
    }
}

/// The window-restricted overlap vectors `u_i = g_{k,i}`, `v_i = g_{k+l,i}`
/// for `i` in `[m, m + len)`.
pub fn window_vectors(table: &OverlapTable, m: usize, len: usize, k: usize, l: usize) -> (Vec<Complex64>, Vec<Complex64>) {
    let u = (m..m + len).map(|i| table.get(k, i)).collect();
    let v = (m..m + len).map(|i| table.get(k + l, i)).collect();
    (u, v)
}

/// Hermitian core matrix `M_ij = e^{i theta} conj(u_i) v_j + e^{-i theta} conj(v_i) u_j`.
///
/// For a core vector `c` on the window, `c^+ M c = 2 Re(e^{i theta} conj(F_k) F_{k+l})`
/// where `F = U c` is the free state.
pub fn core_matrix(
    params: &GaussianParams,
    m: usize,
    len: usize,
    k: usize,
    l: usize,
    theta: f64,
) -> Result<DMatrix<Complex64>> {
    if len == 0 || l == 0 {
        return Err(Error::InvalidParameter("window length and distance must be positive".into()));
    }
    let table = OverlapTable::new(*params, k + l, m + len - 1);
    let (u, v) = window_vectors(&table, m, len, k, l);
    Ok(core_matrix_from_vectors(&u, &v, theta))
}

pub fn core_matrix_from_vectors(u: &[Complex64], v: &[Complex64], theta: f64) -> DMatrix<Complex64> {
    let e = Complex64::from_polar(1.0, theta);
    let len = u.len();
    DMatrix::from_fn(len, len, |i, j| e * u[i].conj() * v[j] + e.conj() * v[i].conj() * u[j])
}
