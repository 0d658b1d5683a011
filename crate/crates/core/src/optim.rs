//! Derivative-free local search and deterministic start-point generation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Outcome of a local maximization.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalMax {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadSettings {
    pub ftol: f64,
    pub xtol: f64,
    pub max_evals: usize,
    pub initial_step: f64,
}

impl Default for NelderMeadSettings {
    fn default() -> Self {
        NelderMeadSettings { ftol: 1e-9, xtol: 1e-8, max_evals: 4000, initial_step: 0.1 }
    }
}

/// Maximize `f` from `x0` with the Nelder-Mead simplex method.
///
/// The simplex is restarted once around the incumbent after the first
/// convergence to guard against collapse onto a non-stationary point.
pub fn nelder_mead_max<F>(f: F, x0: &[f64], settings: &NelderMeadSettings) -> LocalMax
where
    F: Fn(&[f64]) -> f64,
{
    let mut evals = 0usize;
    let mut first = nm_run(&f, x0, settings, settings.max_evals, &mut evals);
    let budget_left = settings.max_evals.saturating_sub(evals);
    if first.converged && budget_left > 0 {
        let second = nm_run(&f, &first.x, settings, budget_left, &mut evals);
        if second.value >= first.value {
            first.x = second.x;
            first.value = second.value;
        }
        first.converged = second.converged;
    }
    first.evaluations = evals;
    first
}

fn nm_run<F>(f: &F, x0: &[f64], s: &NelderMeadSettings, max_evals: usize, evals: &mut usize) -> LocalMax
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    let start_evals = *evals;
    let eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = -f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += if p[i] + s.initial_step <= 1.0 { s.initial_step } else { -s.initial_step };
        simplex.push(p);
    }
    let mut fv: Vec<f64> = simplex.iter().map(|p| eval(p, evals)).collect();

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut converged = false;
    while *evals - start_evals < max_evals {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| fv[a].total_cmp(&fv[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        fv = order.iter().map(|&i| fv[i]).collect();

        let spread = fv[n] - fv[0];
        let size = simplex[1..]
            .iter()
            .map(|p| p.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if spread.abs() <= s.ftol && size <= s.xtol.max(1e-3 * s.initial_step) || size <= s.xtol {
            converged = true;
            break;
        }

        let centroid: Vec<f64> =
            (0..n).map(|j| simplex[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { (0..n).map(|j| centroid[j] + t * (simplex[n][j] - centroid[j])).collect() };

        let xr = along(-alpha);
        let fr = eval(&xr, evals);
        if fr < fv[0] {
            let xe = along(-gamma);
            let fe = eval(&xe, evals);
            if fe < fr {
                simplex[n] = xe;
                fv[n] = fe;
            } else {
                simplex[n] = xr;
                fv[n] = fr;
            }
        } else if fr < fv[n - 1] {
            simplex[n] = xr;
            fv[n] = fr;
        } else {
            let (xc, fc) = if fr < fv[n] {
                let xc = along(-rho);
                let fc = eval(&xc, evals);
                (xc, fc)
            } else {
                let xc = along(rho);
                let fc = eval(&xc, evals);
                (xc, fc)
            };
            if fc < fv[n].min(fr) {
                simplex[n] = xc;
                fv[n] = fc;
            } else {
                for i in 1..=n {
                    let p: Vec<f64> = (0..n).map(|j| simplex[0][j] + sigma * (simplex[i][j] - simplex[0][j])).collect();
                    fv[i] = eval(&p, evals);
                    simplex[i] = p;
                }
            }
        }
    }
    let best = (0..=n).min_by(|&a, &b| fv[a].total_cmp(&fv[b])).unwrap_or(0);
    LocalMax { x: simplex[best].clone(), value: -fv[best], evaluations: *evals - start_evals, converged }
}

const PRIMES: [u32; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as u64;
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while i > 0 {
        out += (i % b) as f64 * inv;
        i /= b;
        inv /= base as f64;
    }
    out
}

/// `count` points of a Halton sequence in `[0,1)^dim`, shifted modulo 1 by a
/// seed-derived offset (Cranley-Patterson rotation).
pub fn halton_points(count: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    assert!(dim <= PRIMES.len(), "Halton dimension {dim} unsupported");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
    (1..=count as u64)
        .map(|i| (0..dim).map(|d| (radical_inverse(i, PRIMES[d]) + shift[d]).fract()).collect())
        .collect()
}

/// Golden-section minimization of a unimodal `f` on `[a, b]`.
pub fn golden_section_min<F>(f: F, mut a: f64, mut b: f64, tol: f64, max_iter: usize) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..max_iter {
        if (b - a).abs() <= tol {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}
