//! Special functions used across the crate: factorials, Hermite and Laguerre
//! polynomials, harmonic-oscillator eigenfunctions.

use num_complex::Complex64;
use std::f64::consts::PI;

/// `ln(n!)`, exact summation for small `n` and Stirling series beyond.
pub fn ln_factorial(n: usize) -> f64 {
    if n < 64 {
        (2..=n).map(|k| (k as f64).ln()).sum()
    } else {
        let x = n as f64 + 1.0;
        // Stirling series for ln Gamma(x)
        (x - 0.5) * x.ln() - x + 0.5 * (2.0 * PI).ln() + 1.0 / (12.0 * x) - 1.0 / (360.0 * x.powi(3))
            + 1.0 / (1260.0 * x.powi(5))
    }
}

pub fn factorial(n: usize) -> f64 {
    if n <= 20 {
        (1..=n).map(|k| k as f64).product()
    } else {
        ln_factorial(n).exp()
    }
}

/// Physicists' Hermite polynomials `H_0(x) ..= H_n(x)` at a complex argument.
pub fn hermite_all(n: usize, x: Complex64) -> Vec<Complex64> {
    let mut h = Vec::with_capacity(n + 1);
    h.push(Complex64::new(1.0, 0.0));
    if n >= 1 {
        h.push(2.0 * x);
    }
    for k in 1..n {
        let next = 2.0 * x * h[k] - 2.0 * k as f64 * h[k - 1];
        h.push(next);
    }
    h
}

/// Generalized Laguerre polynomial `L_n^{(a)}(x)`.
pub fn laguerre(n: usize, a: usize, x: f64) -> f64 {
    let a = a as f64;
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + a - x;
    for k in 1..n {
        let k = k as f64;
        let next = ((2.0 * k + 1.0 + a - x) * cur - (k + a) * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Oscillator eigenfunctions `psi_0(x) ..= psi_n(x)` for unit mass and
/// frequency (vacuum density `exp(-x^2)/sqrt(pi)`), via the normalized
/// three-term recurrence.
pub fn oscillator_wavefunctions(n: usize, x: f64) -> Vec<f64> {
    let mut psi = Vec::with_capacity(n + 1);
    psi.push(PI.powf(-0.25) * (-0.5 * x * x).exp());
    if n >= 1 {
        psi.push(2f64.sqrt() * x * psi[0]);
    }
    for k in 1..n {
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * x * psi[k] - (kf / (kf + 1.0)).sqrt() * psi[k - 1];
        psi.push(next);
    }
    psi
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn factorial_matches_product() {
        assert_eq!(factorial(5), 120.0);
        assert_relative_eq!(ln_factorial(10), 3628800f64.ln(), epsilon = 1e-12);
        // Stirling branch agrees with direct summation
        let direct: f64 = (2..=100).map(|k| (k as f64).ln()).sum();
        assert_relative_eq!(ln_factorial(100), direct, max_relative = 1e-12);
    }

    #[test]
    fn hermite_low_orders() {
        let x = Complex64::new(0.3, -0.2);
        let h = hermite_all(3, x);
        assert_relative_eq!((h[2] - (4.0 * x * x - 2.0)).norm(), 0.0, epsilon = 1e-14);
        assert_relative_eq!((h[3] - (8.0 * x * x * x - 12.0 * x)).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn laguerre_low_orders() {
        let x = 0.7;
        assert_relative_eq!(laguerre(2, 0, x), 0.5 * (x * x - 4.0 * x + 2.0), epsilon = 1e-14);
        assert_relative_eq!(laguerre(1, 3, x), 4.0 - x, epsilon = 1e-14);
    }

    #[test]
    fn wavefunctions_are_normalized() {
        let dx = 1e-3;
        let mut norms = vec![0.0; 6];
        let mut x = -12.0;
        while x <= 12.0 {
            for (n, p) in oscillator_wavefunctions(5, x).iter().enumerate() {
                norms[n] += p * p * dx;
            }
            x += dx;
        }
        for v in norms {
            assert_relative_eq!(v, 1.0, epsilon = 1e-9);
        }
    }
}
