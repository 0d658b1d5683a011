//! Thresholds: the largest value a functional of the form
//! `w_c C_{k,l} + w_lo P_k + w_up P_{k+l} + w_e P_e` attains on free states
//! `U |psi>`, where `U` is a displacement (classical kind) or a
//! squeezed displacement (gaussian kind) and `|psi>` is supported on a
//! contiguous Fock window `[m, m + rank)`.
//!
//! Mixtures never exceed pure free states because every functional here is a
//! maximum of linear functionals, so the search runs over pure cores only.
//! The optimal core for fixed `(U, m)` is the top eigenvector of a Hermitian
//! window matrix; the outer search over `U` and `m` is a deterministic
//! multistart Nelder-Mead.

pub mod cache;
pub mod relative;

use crate::error::{Error, Result};
use crate::gaussian::{core_matrix_from_vectors, window_vectors, GaussianParams, OverlapTable};
use crate::measures::check_theta;
use crate::optim::{halton_points, nelder_mead_max, NelderMeadSettings};
use crate::par;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::cmp::Ordering;
use std::f64::consts::TAU;
use std::fmt;

pub use relative::{
    relative_certificate, relative_threshold_2d, relative_threshold_3d, LambdaGrid, RelativeCertificate, RelativeCurve,
    RelativeSurface,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Classical,
    Gaussian,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Classical => "classical",
            Kind::Gaussian => "gaussian",
        })
    }
}

impl std::str::FromStr for Kind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "classical" | "c" => Ok(Kind::Classical),
            "gaussian" | "g" => Ok(Kind::Gaussian),
            other => Err(Error::InvalidParameter(format!("unknown kind `{other}`"))),
        }
    }
}

/// Coefficients of the functional being maximized over free states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub coherence: f64,
    /// on `P_k`
    pub lower: f64,
    /// on `P_{k+l}`
    pub upper: f64,
    /// on `P_e = 1 - sum_{j <= k+l} P_j`
    pub tail: f64,
}

impl Weights {
    pub fn coherence() -> Self {
        Weights { coherence: 1.0, lower: 0.0, upper: 0.0, tail: 0.0 }
    }

    pub fn qubit(theta: f64) -> Self {
        Weights { coherence: theta.cos(), lower: -theta.sin(), upper: theta.sin(), tail: 0.0 }
    }

    pub fn relative(lambda: f64) -> Self {
        Weights { coherence: 1.0, lower: 0.0, upper: lambda, tail: 0.0 }
    }

    pub fn relative3(lambda_n: f64, lambda_e: f64) -> Self {
        Weights { coherence: 1.0, lower: 0.0, upper: lambda_n, tail: lambda_e }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdQuery {
    pub k: usize,
    pub l: usize,
    pub rank: usize,
    pub kind: Kind,
    pub m_max: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

pub const DEFAULT_M_MAX: usize = 6;

impl ThresholdQuery {
    pub fn new(k: usize, l: usize, rank: usize, kind: Kind) -> Self {
        ThresholdQuery { k, l, rank, kind, m_max: DEFAULT_M_MAX, theta: None }
    }

    /// Window-start cap `max(6, n_max - rank)` for states truncated at `n_max`.
    pub fn for_cutoff(mut self, n_max: usize) -> Self {
        self.m_max = DEFAULT_M_MAX.max(n_max.saturating_sub(self.rank));
        self
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = Some(theta);
        self
    }

    pub fn with_m_max(mut self, m_max: usize) -> Self {
        self.m_max = m_max;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.l == 0 {
            return Err(Error::InvalidParameter("distance l must be positive".into()));
        }
        if self.rank == 0 || self.rank > self.l {
            return Err(Error::InvalidParameter(format!(
                "rank {} outside [1, l = {}]: a window of length l+1 contains the target",
                self.rank, self.l
            )));
        }
        if let Some(theta) = self.theta {
            check_theta(theta)?;
        }
        Ok(())
    }

    fn weights(&self) -> Weights {
        match self.theta {
            Some(theta) => Weights::qubit(theta),
            None => Weights::coherence(),
        }
    }
}

/// Optimizer settings shared by all threshold searches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub starts_per_m: usize,
    pub max_evals: usize,
    pub ftol: f64,
    pub seed: u64,
    pub xi_max: f64,
    pub alpha_max: f64,
    /// Double the box (once) when the optimum sits on its outer boundary.
    pub expand_on_boundary: bool,
    #[serde(skip)]
    pub parallel: bool,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            starts_per_m: 64,
            max_evals: 3000,
            ftol: 1e-9,
            seed: 0,
            xi_max: 2.0,
            alpha_max: 4.0,
            expand_on_boundary: true,
            parallel: true,
        }
    }
}

impl Budget {
    pub fn with_starts(mut self, starts: usize) -> Self {
        self.starts_per_m = starts;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn sequential(mut self) -> Self {
        self.parallel = false;
        self
    }

    /// Stable digest of every setting that can change a result.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("budget serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Location of a threshold maximum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Argmax {
    pub params: GaussianParams,
    /// Window start.
    pub m: usize,
    /// Interferometer phase attaining the coherence maximum.
    pub phase: f64,
    /// Unit-norm core coefficients on `[m, m + rank)`.
    pub core: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub value: f64,
    pub argmax: Argmax,
    pub converged: bool,
    pub boundary_hit: bool,
    pub evaluations: usize,
}

/// The search coordinates, all mapped from the unit cube.
///
/// A phase rotation `exp(i b n)` maps the free family onto itself and only
/// shifts the interferometer phase, so when that phase is optimized
/// analytically one Gaussian phase is redundant and fixed to zero
/// (`phi_xi`, or `phi_alpha` for the classical kind). When the window matrix
/// is not rank two the interferometer phase is fixed instead and both
/// Gaussian phases are searched.
#[derive(Debug, Clone, Copy)]
struct SearchSpace {
    kind: Kind,
    dense: bool,
    xi_max: f64,
    alpha_max: f64,
}

impl SearchSpace {
    fn dim(&self) -> usize {
        match (self.kind, self.dense) {
            (Kind::Classical, false) => 1,
            (Kind::Classical, true) => 2,
            (Kind::Gaussian, false) => 3,
            (Kind::Gaussian, true) => 4,
        }
    }

    fn decode(&self, x: &[f64]) -> GaussianParams {
        let unit = |v: f64| v.clamp(0.0, 1.0);
        let angle = |v: f64| v.rem_euclid(1.0) * TAU;
        let (xi, alpha, phi_alpha, phi_xi) = match (self.kind, self.dense) {
            (Kind::Classical, false) => (0.0, unit(x[0]) * self.alpha_max, 0.0, 0.0),
            (Kind::Classical, true) => (0.0, unit(x[0]) * self.alpha_max, angle(x[1]), 0.0),
            (Kind::Gaussian, false) => (unit(x[0]) * self.xi_max, unit(x[1]) * self.alpha_max, angle(x[2]), 0.0),
            (Kind::Gaussian, true) => {
                (unit(x[0]) * self.xi_max, unit(x[1]) * self.alpha_max, angle(x[2]), angle(x[3]))
            }
        };
        GaussianParams { xi, alpha, phi_alpha: phi_alpha.min(TAU), phi_xi: phi_xi.min(TAU) }
    }

    fn encode(&self, p: &GaussianParams) -> Vec<f64> {
        let a = (p.alpha / self.alpha_max).clamp(0.0, 1.0);
        let x = (p.xi / self.xi_max).clamp(0.0, 1.0);
        let pa = p.phi_alpha / TAU;
        let px = p.phi_xi / TAU;
        match (self.kind, self.dense) {
            (Kind::Classical, false) => vec![a],
            (Kind::Classical, true) => vec![a, pa],
            (Kind::Gaussian, false) => vec![x, a, pa],
            (Kind::Gaussian, true) => vec![x, a, pa, px],
        }
    }

    /// Soft penalty outside the box so simplices do not drift over the
    /// clamped plateau.
    fn excess(&self, x: &[f64]) -> f64 {
        let magnitudes = match self.kind {
            Kind::Classical => 1,
            Kind::Gaussian => 2,
        };
        x[..magnitudes].iter().map(|v| (v - v.clamp(0.0, 1.0)).powi(2)).sum::<f64>() * 10.0
    }

    fn on_boundary(&self, p: &GaussianParams) -> bool {
        let tol = 1e-4;
        p.alpha >= self.alpha_max * (1.0 - tol) || (self.kind == Kind::Gaussian && p.xi >= self.xi_max * (1.0 - tol))
    }
}

/// One objective: probe pair `(k, k+l)`, window length `rank`, weights.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Problem {
    pub k: usize,
    pub l: usize,
    pub rank: usize,
    pub weights: Weights,
}

impl Problem {
    fn table(&self, params: &GaussianParams, m: usize) -> OverlapTable {
        OverlapTable::new(*params, self.k + self.l, m + self.rank - 1)
    }

    /// The tail projector breaks the rank-two structure of the window matrix
    /// unless the window is a single Fock state.
    pub(crate) fn dense(&self) -> bool {
        self.weights.tail != 0.0 && self.rank > 1
    }

    /// Largest value over unit cores on window `m` (fast path, no vector).
    pub(crate) fn value(&self, params: &GaussianParams, m: usize) -> f64 {
        let table = self.table(params, m);
        if self.dense() {
            return largest_eigenvalue(&self.dense_matrix(&table, m, 0.0));
        }
        let (u, v) = window_vectors(&table, m, self.rank, self.k, self.l);
        let mut value = rank_two_max(&u, &v, &self.weights);
        if self.weights.tail != 0.0 {
            let inside: f64 = (0..=self.k + self.l).map(|j| table.get(j, m).norm_sqr()).sum();
            value += self.weights.tail * (1.0 - inside);
        }
        value
    }

    /// Window matrix whose quadratic form is the objective at interferometer
    /// phase `phase`.
    fn dense_matrix(&self, table: &OverlapTable, m: usize, phase: f64) -> DMatrix<Complex64> {
        let (u, v) = window_vectors(table, m, self.rank, self.k, self.l);
        let w = &self.weights;
        let mut mat = core_matrix_from_vectors(&u, &v, phase).scale(w.coherence);
        let r = self.rank;
        let add_projector = |row: &[Complex64], weight: f64, mat: &mut DMatrix<Complex64>| {
            if weight == 0.0 {
                return;
            }
            for i in 0..r {
                for j in 0..r {
                    mat[(i, j)] += row[i].conj() * row[j] * weight;
                }
            }
        };
        add_projector(&u, w.lower, &mut mat);
        add_projector(&v, w.upper, &mut mat);
        if w.tail != 0.0 {
            for i in 0..r {
                mat[(i, i)] += Complex64::new(w.tail, 0.0);
            }
            for j in 0..=self.k + self.l {
                let row: Vec<Complex64> = (m..m + r).map(|i| table.get(j, i)).collect();
                add_projector(&row, -w.tail, &mut mat);
            }
        }
        mat
    }

    /// Value, optimal interferometer phase and top eigenvector.
    fn solve(&self, params: &GaussianParams, m: usize) -> (f64, f64, Vec<Complex64>) {
        let table = self.table(params, m);
        let phase = if self.dense() {
            0.0
        } else {
            let (u, v) = window_vectors(&table, m, self.rank, self.k, self.l);
            let q: Complex64 = u.iter().zip(&v).map(|(a, b)| a * b.conj()).sum();
            if q.norm() > 0.0 {
                q.arg()
            } else {
                0.0
            }
        };
        let mat = self.dense_matrix(&table, m, phase);
        let eig = mat.symmetric_eigen();
        let (idx, value) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        let mut core: Vec<Complex64> = eig.eigenvectors.column(idx).iter().cloned().collect();
        // fix the global phase: largest component real positive
        if let Some(pivot) = core.iter().cloned().max_by(|a, b| a.norm().total_cmp(&b.norm())) {
            if pivot.norm() > 0.0 {
                let rot = pivot.conj() / pivot.norm();
                core.iter_mut().for_each(|c| *c *= rot);
            }
        }
        (value, phase, core)
    }
}

/// Top eigenvalue of `V A V^+` with `V = [conj u, conj v]` and
/// `A = [[lower, coherence e^{i phi}], [coherence e^{-i phi}, upper]]`,
/// maximized over `phi`. Uses the 2x2 reduction through the Gram matrix of
/// `(conj u, conj v)`.
pub fn rank_two_max(u: &[Complex64], v: &[Complex64], w: &Weights) -> f64 {
    let p: f64 = u.iter().map(|z| z.norm_sqr()).sum();
    let r: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    let q: Complex64 = u.iter().zip(v).map(|(a, b)| a * b.conj()).sum();
    let qa = q.norm();
    let trace = w.lower * p + w.upper * r + 2.0 * w.coherence.abs() * qa;
    let det = (w.lower * w.upper - w.coherence * w.coherence) * (p * r - qa * qa).max(0.0);
    if u.len() == 1 {
        return trace;
    }
    let top = 0.5 * trace + (0.25 * trace * trace - det).max(0.0).sqrt();
    if u.len() > 2 || (p * r - qa * qa) <= 1e-15 * (p * r).max(1e-300) {
        // zero modes orthogonal to span{u, v} are available
        top.max(0.0)
    } else {
        top
    }
}

/// Largest eigenvalue of a small Hermitian matrix.
pub fn largest_eigenvalue(m: &DMatrix<Complex64>) -> f64 {
    match m.nrows() {
        1 => m[(0, 0)].re,
        2 => {
            let a = m[(0, 0)].re;
            let d = m[(1, 1)].re;
            let b = m[(0, 1)].norm();
            0.5 * (a + d) + (0.25 * (a - d) * (a - d) + b * b).sqrt()
        }
        _ => m.clone().symmetric_eigen().eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Maximum of the pure-coherence or weighted objective over unit core
/// vectors on the window `[m, m + rank)`, for fixed Gaussian parameters.
pub fn inner_core_max(
    params: &GaussianParams,
    m: usize,
    rank: usize,
    k: usize,
    l: usize,
    weights: Weights,
) -> Result<(f64, Vec<Complex64>)> {
    if l == 0 || rank == 0 || rank > l {
        return Err(Error::InvalidParameter(format!("window length {rank} must lie in [1, l = {l}]")));
    }
    let problem = Problem { k, l, rank, weights };
    let (value, _, core) = problem.solve(params, m);
    Ok((value, core))
}

/// Extra start points for a search: `(m, params)`.
pub(crate) type WarmStarts = Vec<(usize, GaussianParams)>;

struct Candidate {
    value: f64,
    m: usize,
    x: Vec<f64>,
    evaluations: usize,
    converged: bool,
}

/// Total order used for the deterministic reduction: value, then smaller
/// window start, then lexicographically smaller coordinates.
fn better(a: &Candidate, b: &Candidate) -> bool {
    match a.value.total_cmp(&b.value) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => match b.m.cmp(&a.m) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => {
                for (x, y) in a.x.iter().zip(&b.x) {
                    match y.total_cmp(x) {
                        Ordering::Greater => return true,
                        Ordering::Less => return false,
                        Ordering::Equal => {}
                    }
                }
                false
            }
        },
    }
}

pub(crate) fn search(
    problem: Problem,
    kind: Kind,
    m_max: usize,
    budget: &Budget,
    warm: &WarmStarts,
) -> Result<ThresholdResult> {
    let space = SearchSpace {
        kind,
        dense: problem.dense(),
        xi_max: budget.xi_max,
        alpha_max: budget.alpha_max,
    };
    let mut warm = warm.clone();
    if kind == Kind::Gaussian {
        // the classical family is the xi = 0 slice; its optimum is a cheap
        // start that keeps the gaussian value above the classical one
        let classical = search_in(problem, SearchSpace { kind: Kind::Classical, ..space }, m_max, budget, &warm);
        warm.push((classical.argmax.m, classical.argmax.params));
    }
    let warm = &warm;
    let first = search_in(problem, space, m_max, budget, warm);
    if budget.expand_on_boundary && (space.on_boundary(&first.argmax.params) || first.argmax.m == m_max && m_max > 0)
    {
        let wider = SearchSpace { xi_max: 2.0 * space.xi_max, alpha_max: 2.0 * space.alpha_max, ..space };
        let mut warm2 = warm.clone();
        warm2.push((first.argmax.m, first.argmax.params));
        let second = search_in(problem, wider, 2 * m_max.max(1), budget, &warm2);
        let mut best = if second.value >= first.value { second } else { first };
        best.boundary_hit = wider.on_boundary(&best.argmax.params) || best.argmax.m == 2 * m_max.max(1);
        return Ok(best);
    }
    Ok(first)
}

fn search_in(problem: Problem, space: SearchSpace, m_max: usize, budget: &Budget, warm: &WarmStarts) -> ThresholdResult {
    let dim = space.dim();
    let mut tasks: Vec<(usize, Vec<f64>)> = Vec::new();
    for m in 0..=m_max {
        let seed = budget.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(m as u64);
        // every Fock state is free: start once from the identity
        tasks.push((m, space.encode(&GaussianParams::identity())));
        for x in halton_points(budget.starts_per_m, dim, seed) {
            tasks.push((m, x));
        }
    }
    for (m, p) in warm {
        if *m <= m_max {
            tasks.push((*m, space.encode(p)));
        }
    }
    let settings = NelderMeadSettings { ftol: budget.ftol, xtol: 1e-9, max_evals: budget.max_evals, initial_step: 0.1 };
    let candidates = par::map(tasks, budget.parallel, |(m, x0)| {
        let f = |x: &[f64]| problem.value(&space.decode(x), m) - space.excess(x);
        let r = nelder_mead_max(f, &x0, &settings);
        Candidate { value: r.value, m, x: r.x, evaluations: r.evaluations, converged: r.converged }
    });

    let evaluations = candidates.iter().map(|c| c.evaluations).sum();
    let mut best: Option<Candidate> = None;
    for c in candidates {
        if best.as_ref().is_none_or(|b| better(&c, b)) {
            best = Some(c);
        }
    }
    let best = best.expect("at least one start");
    let params = space.decode(&best.x);
    let (value, phase, core) = problem.solve(&params, best.m);
    ThresholdResult {
        value: value.max(best.value),
        argmax: Argmax { params, m: best.m, phase, core },
        converged: best.converged,
        boundary_hit: space.on_boundary(&params) || best.m == m_max && m_max > 0,
        evaluations,
    }
}

/// Absolute (or, with `theta` set, qubit) threshold for `query`.
pub fn absolute_threshold(query: &ThresholdQuery, budget: &Budget) -> Result<ThresholdResult> {
    query.validate()?;
    let problem = Problem { k: query.k, l: query.l, rank: query.rank, weights: query.weights() };
    search(problem, query.kind, query.m_max, budget, &Vec::new())
}

/// Qubit threshold `T_Q(theta)`; `query.theta` must be set.
pub fn qubit_threshold(query: &ThresholdQuery, budget: &Budget) -> Result<ThresholdResult> {
    if query.theta.is_none() {
        return Err(Error::InvalidParameter("qubit threshold requires theta".into()));
    }
    absolute_threshold(query, budget)
}
