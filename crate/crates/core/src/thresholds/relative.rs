//! Relative thresholds: envelopes `F(lambda) = max_free [C + lambda . P]`
//! over the measured probabilities and the certificates
//! `C(rho) > min_lambda [F(lambda) - lambda . P(rho)]` built from them.
//!
//! `F` is convex in `lambda` (a pointwise maximum of affine functions), so the
//! bound is a convex minimization and a coarse grid plus a bracketed local
//! refinement finds it. The grids are signed: measured probabilities below
//! the unconstrained optimum call for negative multipliers.

use super::{search, Argmax, Budget, Kind, Problem, ThresholdQuery, WarmStarts, Weights};
use crate::error::{Error, Result};
use crate::fock::{photon_probability, tail_probability, DensityMatrix};
use crate::gaussian::OverlapTable;
use crate::measures::local_coherence;
use crate::optim::{golden_section_min, nelder_mead_max, NelderMeadSettings};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaGrid {
    pub points: Vec<f64>,
}

impl LambdaGrid {
    /// `0` plus `per_sign` geometrically spaced magnitudes in `[min, max]` on
    /// each side, sorted ascending.
    pub fn signed_geometric(min: f64, max: f64, per_sign: usize) -> Result<Self> {
        if !(min > 0.0 && max > min && per_sign >= 1) {
            return Err(Error::InvalidParameter(format!("bad lambda grid [{min}, {max}] x {per_sign}")));
        }
        let mags: Vec<f64> = if per_sign == 1 {
            vec![min]
        } else {
            let r = (max / min).ln() / (per_sign - 1) as f64;
            (0..per_sign).map(|i| min * (r * i as f64).exp()).collect()
        };
        let mut points: Vec<f64> = mags.iter().rev().map(|m| -m).collect();
        points.push(0.0);
        points.extend(mags);
        Ok(LambdaGrid { points })
    }

    /// 121 points over `+-[1e-3, 1e3]`.
    pub fn default_2d() -> Self {
        Self::signed_geometric(1e-3, 1e3, 60).expect("valid default grid")
    }

    /// 41 points per axis over `+-[1e-3, 1e3]`.
    pub fn default_3d() -> Self {
        Self::signed_geometric(1e-3, 1e3, 20).expect("valid default grid")
    }

    pub fn explicit(mut points: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidParameter("lambda grid must be finite and non-empty".into()));
        }
        points.sort_by(f64::total_cmp);
        points.dedup();
        Ok(LambdaGrid { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Probe values `(C, P_k, P_{k+l}, P_e)` of the free state at `argmax`.
pub fn free_state_probes(argmax: &Argmax, k: usize, l: usize) -> (f64, f64, f64, f64) {
    let rank = argmax.core.len();
    let table = OverlapTable::new(argmax.params, k + l, argmax.m + rank - 1);
    let amp = |j: usize| -> Complex64 { (0..rank).map(|i| table.get(j, argmax.m + i) * argmax.core[i]).sum() };
    let head: f64 = (0..=k + l).map(|j| amp(j).norm_sqr()).sum();
    let (a, b) = (amp(k), amp(k + l));
    (2.0 * (a * b).norm(), a.norm_sqr(), b.norm_sqr(), (1.0 - head).max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub lambda: f64,
    pub value: f64,
    /// `C` and `P_{k+l}` of the maximizing free state.
    pub coherence: f64,
    pub probe: f64,
    pub argmax: Argmax,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativeCurve {
    pub query: ThresholdQuery,
    pub budget: Budget,
    pub points: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub lambda_n: f64,
    pub lambda_e: f64,
    pub value: f64,
    pub argmax: Argmax,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativeSurface {
    pub query: ThresholdQuery,
    pub budget: Budget,
    pub lambda_n: Vec<f64>,
    pub lambda_e: Vec<f64>,
    /// Row-major: `points[i_e * lambda_n.len() + i_n]`.
    pub points: Vec<SurfacePoint>,
}

impl RelativeSurface {
    pub fn at(&self, i_n: usize, i_e: usize) -> &SurfacePoint {
        &self.points[i_e * self.lambda_n.len() + i_n]
    }
}

fn check_query(query: &ThresholdQuery) -> Result<()> {
    query.validate()?;
    if query.theta.is_some() {
        return Err(Error::InvalidParameter("relative thresholds take no qubit angle".into()));
    }
    Ok(())
}

fn problem(query: &ThresholdQuery, weights: Weights) -> Problem {
    Problem { k: query.k, l: query.l, rank: query.rank, weights }
}

/// `F(lambda) = max_free [C_{k,l} + lambda P_{k+l}]` on `grid`.
pub fn relative_threshold_2d(query: &ThresholdQuery, grid: &LambdaGrid, budget: &Budget) -> Result<RelativeCurve> {
    check_query(query)?;
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty lambda grid".into()));
    }
    let mut points: Vec<CurvePoint> = Vec::with_capacity(grid.len());
    // sweep outward from the smallest |lambda| so that warm starts follow the
    // argmax continuously
    let start = (0..grid.len()).min_by(|&a, &b| grid.points[a].abs().total_cmp(&grid.points[b].abs())).unwrap_or(0);
    let mut slots: Vec<Option<CurvePoint>> = vec![None; grid.len()];
    let order: Vec<usize> = std::iter::once(start).chain((start + 1)..grid.len()).chain((0..start).rev()).collect();
    for &i in &order {
        let lambda = grid.points[i];
        let neighbour = if i > start { i.checked_sub(1) } else { Some(i + 1).filter(|&j| j < grid.len()) };
        let warm: WarmStarts = neighbour
            .and_then(|j| slots[j].as_ref())
            .map(|p| vec![(p.argmax.m, p.argmax.params)])
            .unwrap_or_default();
        let r = search(problem(query, Weights::relative(lambda)), query.kind, query.m_max, budget, &warm)?;
        let (c, _, pn, _) = free_state_probes(&r.argmax, query.k, query.l);
        slots[i] =
            Some(CurvePoint { lambda, value: r.value, coherence: c, probe: pn, argmax: r.argmax, converged: r.converged });
    }
    points.extend(slots.into_iter().map(|p| p.expect("every grid point visited")));
    Ok(RelativeCurve { query: *query, budget: *budget, points })
}

/// `F(lambda_n, lambda_e) = max_free [C + lambda_n P_{k+l} + lambda_e P_e]`
/// with `P_e` the probability beyond `k+l`.
pub fn relative_threshold_3d(
    query: &ThresholdQuery,
    grid_n: &LambdaGrid,
    grid_e: &LambdaGrid,
    budget: &Budget,
) -> Result<RelativeSurface> {
    check_query(query)?;
    if grid_n.is_empty() || grid_e.is_empty() {
        return Err(Error::InvalidParameter("empty lambda grid".into()));
    }
    let nn = grid_n.len();
    let mut points: Vec<SurfacePoint> = Vec::with_capacity(nn * grid_e.len());
    for (ie, &le) in grid_e.points.iter().enumerate() {
        for (i_n, &ln) in grid_n.points.iter().enumerate() {
            let mut warm: WarmStarts = Vec::new();
            if i_n > 0 {
                let p: &SurfacePoint = &points[ie * nn + i_n - 1];
                warm.push((p.argmax.m, p.argmax.params));
            }
            if ie > 0 {
                let p: &SurfacePoint = &points[(ie - 1) * nn + i_n];
                warm.push((p.argmax.m, p.argmax.params));
            }
            let r = search(problem(query, Weights::relative3(ln, le)), query.kind, query.m_max, budget, &warm)?;
            points.push(SurfacePoint { lambda_n: ln, lambda_e: le, value: r.value, argmax: r.argmax, converged: r.converged });
        }
    }
    Ok(RelativeSurface {
        query: *query,
        budget: *budget,
        lambda_n: grid_n.points.clone(),
        lambda_e: grid_e.points.clone(),
        points,
    })
}

/// Envelope a certificate is evaluated against.
#[derive(Debug, Clone, Copy)]
pub enum Envelope<'a> {
    Curve(&'a RelativeCurve),
    Surface(&'a RelativeSurface),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativeCertificate {
    pub kind: Kind,
    /// Measured probabilities the bound is conditioned on: `[P_{k+l}]` or
    /// `[P_{k+l}, P_e]`.
    pub probes: Vec<f64>,
    /// Multipliers at the minimum.
    pub lambda: Vec<f64>,
    pub bound: f64,
    pub measured: f64,
    pub passed: bool,
    /// The minimum sits on the edge of the grid (no bracket to refine).
    pub at_edge: bool,
}

/// Refinement search settings: fewer fresh starts, seeded by the grid argmax.
fn refine_budget(budget: &Budget) -> Budget {
    Budget { starts_per_m: (budget.starts_per_m / 4).max(2), expand_on_boundary: false, ..*budget }
}

/// Bound `min_lambda [F(lambda) - lambda . P(rho)]` and the verdict
/// `C_{k,l}(rho) > bound`.
pub fn relative_certificate(rho: &DensityMatrix, envelope: Envelope<'_>, k: usize, l: usize) -> Result<RelativeCertificate> {
    let measured = local_coherence(rho, k, l)?.value;
    let pn = photon_probability(rho, k + l)?;
    match envelope {
        Envelope::Curve(curve) => {
            check_envelope(&curve.query, k, l)?;
            certify_curve(curve, measured, pn)
        }
        Envelope::Surface(surface) => {
            check_envelope(&surface.query, k, l)?;
            let pe = tail_probability(rho, k + l)?;
            certify_surface(surface, measured, pn, pe)
        }
    }
}

fn check_envelope(q: &ThresholdQuery, k: usize, l: usize) -> Result<()> {
    if q.k != k || q.l != l {
        return Err(Error::InvalidParameter(format!(
            "envelope computed for (k, l) = ({}, {}), certificate asked for ({k}, {l})",
            q.k, q.l
        )));
    }
    Ok(())
}

fn certify_curve(curve: &RelativeCurve, measured: f64, pn: f64) -> Result<RelativeCertificate> {
    let pts = &curve.points;
    if pts.len() < 3 {
        return Err(Error::GridTooCoarse);
    }
    let objective = |i: usize| pts[i].value - pts[i].lambda * pn;
    let i_min = (0..pts.len()).min_by(|&a, &b| objective(a).total_cmp(&objective(b))).expect("non-empty");
    let mut bound = objective(i_min);
    let mut lambda = pts[i_min].lambda;
    let at_edge = i_min == 0 || i_min + 1 == pts.len();
    if !at_edge {
        let q = &curve.query;
        let budget = refine_budget(&curve.budget);
        let warm: WarmStarts = (i_min - 1..=i_min + 1).map(|i| (pts[i].argmax.m, pts[i].argmax.params)).collect();
        let f = |lam: f64| -> f64 {
            match search(problem(q, Weights::relative(lam)), q.kind, q.m_max, &budget, &warm) {
                Ok(r) => r.value - lam * pn,
                Err(_) => f64::INFINITY,
            }
        };
        let (lam, val) = golden_section_min(f, pts[i_min - 1].lambda, pts[i_min + 1].lambda, 1e-6, 40);
        if val < bound {
            bound = val;
            lambda = lam;
        }
    }
    Ok(RelativeCertificate {
        kind: curve.query.kind,
        probes: vec![pn],
        lambda: vec![lambda],
        bound,
        measured,
        passed: measured > bound,
        at_edge,
    })
}

fn certify_surface(surface: &RelativeSurface, measured: f64, pn: f64, pe: f64) -> Result<RelativeCertificate> {
    let (nn, ne) = (surface.lambda_n.len(), surface.lambda_e.len());
    if nn < 3 || ne < 3 {
        return Err(Error::GridTooCoarse);
    }
    let objective = |p: &SurfacePoint| p.value - p.lambda_n * pn - p.lambda_e * pe;
    let (mut best_n, mut best_e) = (0, 0);
    for ie in 0..ne {
        for i_n in 0..nn {
            if objective(surface.at(i_n, ie)) < objective(surface.at(best_n, best_e)) {
                best_n = i_n;
                best_e = ie;
            }
        }
    }
    let centre = surface.at(best_n, best_e);
    let mut bound = objective(centre);
    let mut lambda = vec![centre.lambda_n, centre.lambda_e];
    let at_edge = best_n == 0 || best_n + 1 == nn || best_e == 0 || best_e + 1 == ne;

    // one refinement pass inside the bracketing cell block
    let (n_lo, n_hi) = (surface.lambda_n[best_n.saturating_sub(1)], surface.lambda_n[(best_n + 1).min(nn - 1)]);
    let (e_lo, e_hi) = (surface.lambda_e[best_e.saturating_sub(1)], surface.lambda_e[(best_e + 1).min(ne - 1)]);
    let mut warm: WarmStarts = Vec::new();
    for ie in best_e.saturating_sub(1)..=(best_e + 1).min(ne - 1) {
        for i_n in best_n.saturating_sub(1)..=(best_n + 1).min(nn - 1) {
            let a = &surface.at(i_n, ie).argmax;
            warm.push((a.m, a.params));
        }
    }
    let q = &surface.query;
    let budget = refine_budget(&surface.budget);
    let to_lambda = |x: &[f64]| {
        (n_lo + x[0].clamp(0.0, 1.0) * (n_hi - n_lo), e_lo + x[1].clamp(0.0, 1.0) * (e_hi - e_lo))
    };
    let f = |x: &[f64]| -> f64 {
        let (ln, le) = to_lambda(x);
        match search(problem(q, Weights::relative3(ln, le)), q.kind, q.m_max, &budget, &warm) {
            Ok(r) => -(r.value - ln * pn - le * pe),
            Err(_) => f64::NEG_INFINITY,
        }
    };
    let x0 = [
        if n_hi > n_lo { (centre.lambda_n - n_lo) / (n_hi - n_lo) } else { 0.5 },
        if e_hi > e_lo { (centre.lambda_e - e_lo) / (e_hi - e_lo) } else { 0.5 },
    ];
    let settings = NelderMeadSettings { ftol: 1e-7, xtol: 1e-4, max_evals: 60, initial_step: 0.25 };
    let r = nelder_mead_max(f, &x0, &settings);
    if -r.value < bound {
        bound = -r.value;
        let (ln, le) = to_lambda(&r.x);
        lambda = vec![ln, le];
    }
    Ok(RelativeCertificate {
        kind: surface.query.kind,
        probes: vec![pn, pe],
        lambda,
        bound,
        measured,
        passed: measured > bound,
        at_edge,
    })
}
