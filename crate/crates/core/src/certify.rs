//! Per-state certification reports: measured values against thresholds with
//! an uncertainty margin, for the rank hierarchy, the relative criteria and
//! the qubit family.

use crate::error::{Error, Result};
use crate::fock::DensityMatrix;
use crate::measures::{local_coherence, qubit_coherence};
use crate::models::ThetaInterval;
use crate::thresholds::cache::{self, Cache};
use crate::thresholds::relative::Envelope;
use crate::thresholds::{
    absolute_threshold, relative_certificate, relative_threshold_2d, relative_threshold_3d, Budget, Kind,
    LambdaGrid, RelativeCurve, RelativeSurface, ThresholdQuery, ThresholdResult,
};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;

/// Uncertainty used when no bootstrap estimate is attached.
pub const DEFAULT_UNCERTAINTY: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Indeterminate,
}

impl Verdict {
    /// `measured - uncertainty > threshold`.
    pub fn decide(measured: f64, uncertainty: f64, threshold: f64) -> Self {
        if !(measured.is_finite() && threshold.is_finite() && uncertainty.is_finite()) {
            Verdict::Indeterminate
        } else if measured - uncertainty > threshold {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Indeterminate => "indeterminate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub rank: usize,
    pub kind: Kind,
    pub measured: f64,
    pub threshold: Option<f64>,
    pub margin: Option<f64>,
    pub uncertainty: f64,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativeEntry {
    pub kind: Kind,
    pub rank: usize,
    /// `"P_n"` or `"P_n,P_e"`.
    pub probes: String,
    pub probe_values: Vec<f64>,
    pub lambda: Vec<f64>,
    pub bound: Option<f64>,
    pub measured: f64,
    pub uncertainty: f64,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QubitPoint {
    pub theta: f64,
    pub measured: f64,
    pub threshold: Option<f64>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QubitEntry {
    pub kind: Kind,
    pub rank: usize,
    pub uncertainty: f64,
    pub points: Vec<QubitPoint>,
    /// Grid-resolution runs of passing angles.
    pub windows: Vec<ThetaInterval>,
    pub best_theta: Option<f64>,
    pub best_margin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub label: String,
    pub k: usize,
    pub l: usize,
    pub coherence: f64,
    pub uncertainty: f64,
    pub ranks: Vec<RankEntry>,
    #[serde(default)]
    pub relative: Vec<RelativeEntry>,
    #[serde(default)]
    pub qubit: Vec<QubitEntry>,
}

impl CertificationReport {
    /// Passing rank `r` implies passing every lower rank of the same kind.
    pub fn is_rank_monotone(&self) -> bool {
        self.ranks.iter().all(|e| {
            e.verdict != Verdict::Pass
                || self
                    .ranks
                    .iter()
                    .filter(|o| o.kind == e.kind && o.rank < e.rank)
                    .all(|o| o.verdict == Verdict::Pass)
        })
    }

    pub fn verdict(&self, kind: Kind, rank: usize) -> Option<Verdict> {
        self.ranks.iter().find(|e| e.kind == kind && e.rank == rank).map(|e| e.verdict)
    }
}

#[derive(Debug, Clone, Default)]
pub struct CertifyOptions {
    /// Defaults to [`DEFAULT_UNCERTAINTY`].
    pub uncertainty: Option<f64>,
    pub cache: Option<Cache>,
}

impl CertifyOptions {
    fn sigma(&self) -> Result<f64> {
        let s = self.uncertainty.unwrap_or(DEFAULT_UNCERTAINTY);
        if !(s >= 0.0 && s.is_finite()) {
            return Err(Error::InvalidParameter(format!("uncertainty {s} must be a non-negative number")));
        }
        Ok(s)
    }
}

/// Absolute or qubit threshold through the optional cache.
pub fn cached_threshold(query: &ThresholdQuery, budget: &Budget, cache: Option<&Cache>) -> Result<ThresholdResult> {
    let key = cache::key("threshold", &(query, budget));
    cache::cached(cache, &key, || absolute_threshold(query, budget))
}

pub fn cached_curve(
    query: &ThresholdQuery,
    grid: &LambdaGrid,
    budget: &Budget,
    cache: Option<&Cache>,
) -> Result<RelativeCurve> {
    let key = cache::key("relative2d", &(query, grid, budget));
    cache::cached(cache, &key, || relative_threshold_2d(query, grid, budget))
}

pub fn cached_surface(
    query: &ThresholdQuery,
    grid_n: &LambdaGrid,
    grid_e: &LambdaGrid,
    budget: &Budget,
    cache: Option<&Cache>,
) -> Result<RelativeSurface> {
    let key = cache::key("relative3d", &(query, grid_n, grid_e, budget));
    cache::cached(cache, &key, || relative_threshold_3d(query, grid_n, grid_e, budget))
}

fn note(e: &Error) -> Option<String> {
    Some(e.to_string())
}

/// Rank entries for `ranks 1..=max_rank` and every requested kind.
pub fn certify_hierarchy(
    rho: &DensityMatrix,
    k: usize,
    l: usize,
    kinds: &[Kind],
    max_rank: usize,
    budget: &Budget,
    opts: &CertifyOptions,
) -> Result<CertificationReport> {
    let sigma = opts.sigma()?;
    let measured = local_coherence(rho, k, l)?.value;
    if max_rank == 0 || max_rank > l {
        return Err(Error::InvalidParameter(format!("max rank {max_rank} outside [1, l = {l}]")));
    }
    let mut ranks = Vec::new();
    for &kind in kinds {
        for rank in 1..=max_rank {
            let query = ThresholdQuery::new(k, l, rank, kind).for_cutoff(rho.n_max());
            ranks.push(match cached_threshold(&query, budget, opts.cache.as_ref()) {
                Ok(t) => RankEntry {
                    rank,
                    kind,
                    measured,
                    threshold: Some(t.value),
                    margin: Some(measured - t.value),
                    uncertainty: sigma,
                    verdict: Verdict::decide(measured, sigma, t.value),
                    note: (t.boundary_hit).then(|| "optimum on search boundary".to_string()),
                },
                Err(e) if e.is_numerical() => RankEntry {
                    rank,
                    kind,
                    measured,
                    threshold: None,
                    margin: None,
                    uncertainty: sigma,
                    verdict: Verdict::Indeterminate,
                    note: note(&e),
                },
                Err(e) => return Err(e),
            });
        }
    }
    Ok(CertificationReport {
        label: rho.label().to_string(),
        k,
        l,
        coherence: measured,
        uncertainty: sigma,
        ranks,
        relative: Vec::new(),
        qubit: Vec::new(),
    })
}

/// Which relative criterion to evaluate.
#[derive(Debug, Clone, PartialEq)]
pub enum RelativeSpec {
    TwoD(LambdaGrid),
    ThreeD(LambdaGrid, LambdaGrid),
}

pub fn certify_relative(
    rho: &DensityMatrix,
    k: usize,
    l: usize,
    kind: Kind,
    rank: usize,
    spec: &RelativeSpec,
    budget: &Budget,
    opts: &CertifyOptions,
) -> Result<RelativeEntry> {
    let sigma = opts.sigma()?;
    let measured = local_coherence(rho, k, l)?.value;
    let query = ThresholdQuery::new(k, l, rank, kind).for_cutoff(rho.n_max());
    let cache = opts.cache.as_ref();
    let (probes, outcome) = match spec {
        RelativeSpec::TwoD(grid) => (
            "P_n",
            cached_curve(&query, grid, budget, cache)
                .and_then(|c| relative_certificate(rho, Envelope::Curve(&c), k, l)),
        ),
        RelativeSpec::ThreeD(gn, ge) => (
            "P_n,P_e",
            cached_surface(&query, gn, ge, budget, cache)
                .and_then(|s| relative_certificate(rho, Envelope::Surface(&s), k, l)),
        ),
    };
    match outcome {
        Ok(c) => Ok(RelativeEntry {
            kind,
            rank,
            probes: probes.into(),
            probe_values: c.probes,
            lambda: c.lambda,
            bound: Some(c.bound),
            measured,
            uncertainty: sigma,
            verdict: Verdict::decide(measured, sigma, c.bound),
            note: c.at_edge.then(|| "minimum on lambda grid edge".to_string()),
        }),
        Err(e) if e.is_numerical() => Ok(RelativeEntry {
            kind,
            rank,
            probes: probes.into(),
            probe_values: Vec::new(),
            lambda: Vec::new(),
            bound: None,
            measured,
            uncertainty: sigma,
            verdict: Verdict::Indeterminate,
            note: note(&e),
        }),
        Err(e) => Err(e),
    }
}

/// `G^theta` against `T_Q(theta)` on `theta_grid` (rank defaults to `l`).
pub fn certify_qubit(
    rho: &DensityMatrix,
    k: usize,
    l: usize,
    theta_grid: &[f64],
    kinds: &[Kind],
    rank: Option<usize>,
    budget: &Budget,
    opts: &CertifyOptions,
) -> Result<CertificationReport> {
    let sigma = opts.sigma()?;
    let rank = rank.unwrap_or(l);
    let coherence = local_coherence(rho, k, l)?.value;
    let mut entries = Vec::new();
    for &kind in kinds {
        let mut points = Vec::with_capacity(theta_grid.len());
        for &theta in theta_grid {
            let measured = qubit_coherence(rho, k, l, theta)?.value;
            let query = ThresholdQuery::new(k, l, rank, kind).for_cutoff(rho.n_max()).with_theta(theta);
            let (threshold, verdict) = match cached_threshold(&query, budget, opts.cache.as_ref()) {
                Ok(t) => (Some(t.value), Verdict::decide(measured, sigma, t.value)),
                Err(e) if e.is_numerical() => (None, Verdict::Indeterminate),
                Err(e) => return Err(e),
            };
            points.push(QubitPoint { theta, measured, threshold, verdict });
        }
        let mut windows: Vec<ThetaInterval> = Vec::new();
        let mut run: Option<(f64, f64)> = None;
        for p in &points {
            if p.verdict == Verdict::Pass {
                run = Some(run.map_or((p.theta, p.theta), |(lo, _)| (lo, p.theta)));
            } else if let Some((lo, hi)) = run.take() {
                windows.push(ThetaInterval { lo, hi });
            }
        }
        if let Some((lo, hi)) = run {
            windows.push(ThetaInterval { lo, hi });
        }
        let best = points
            .iter()
            .filter_map(|p| p.threshold.map(|t| (p.theta, p.measured - t)))
            .max_by(|a, b| a.1.total_cmp(&b.1));
        entries.push(QubitEntry {
            kind,
            rank,
            uncertainty: sigma,
            points,
            windows,
            best_theta: best.map(|b| b.0),
            best_margin: best.map(|b| b.1),
        });
    }
    Ok(CertificationReport {
        label: rho.label().to_string(),
        k,
        l,
        coherence,
        uncertainty: sigma,
        ranks: Vec::new(),
        relative: Vec::new(),
        qubit: entries,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Json,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "text" | "txt" => Ok(Format::Text),
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(Error::UnknownFormat(other.to_string())),
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.6}"))
}

pub fn report_render(report: &CertificationReport, format: Format) -> Result<String> {
    match format {
        Format::Json => Ok(serde_json::to_string_pretty(report)?),
        Format::Text => Ok(render_text(report)),
        Format::Csv => Ok(render_csv(report)),
    }
}

pub fn report_parse(text: &str) -> Result<CertificationReport> {
    Ok(serde_json::from_str(text)?)
}

fn render_text(r: &CertificationReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "state: {}", r.label);
    let _ = writeln!(out, "target: |{}> + |{}>   C = {:.6}   sigma = {:.4}", r.k, r.k + r.l, r.coherence, r.uncertainty);
    if !r.ranks.is_empty() {
        let _ = writeln!(out, "\n{:<10} {:>4} {:>10} {:>10} {:>10}  verdict", "kind", "rank", "measured", "threshold", "margin");
        for e in &r.ranks {
            let _ = writeln!(
                out,
                "{:<10} {:>4} {:>10.6} {:>10} {:>10}  {}",
                e.kind.to_string(),
                e.rank,
                e.measured,
                opt(e.threshold),
                opt(e.margin),
                e.verdict.as_str()
            );
        }
    }
    if !r.relative.is_empty() {
        let _ = writeln!(out, "\nrelative criteria");
        for e in &r.relative {
            let probes: Vec<String> = e.probe_values.iter().map(|p| format!("{p:.4}")).collect();
            let _ = writeln!(
                out,
                "{:<10} {:<8} at ({}) bound {}  measured {:.6}  {}",
                e.kind.to_string(),
                e.probes,
                probes.join(", "),
                opt(e.bound),
                e.measured,
                e.verdict.as_str()
            );
        }
    }
    for q in &r.qubit {
        let windows: Vec<String> =
            q.windows.iter().map(|w| format!("[{:.3}, {:.3}]", w.lo / FRAC_PI_2, w.hi / FRAC_PI_2)).collect();
        let _ = writeln!(
            out,
            "\nqubit {} rank {}: passing theta/(pi/2) {}; best margin {} at {}",
            q.kind,
            q.rank,
            if windows.is_empty() { "none".to_string() } else { windows.join(" ") },
            opt(q.best_margin),
            q.best_theta.map_or("-".to_string(), |t| format!("{:.3}", t / FRAC_PI_2)),
        );
    }
    out
}

fn render_csv(r: &CertificationReport) -> String {
    let mut out = String::new();
    if !r.ranks.is_empty() {
        out.push_str("kind,rank,measured,threshold,margin,uncertainty,verdict\n");
        for e in &r.ranks {
            let _ = writeln!(
                out,
                "{},{},{:.9},{},{},{},{}",
                e.kind,
                e.rank,
                e.measured,
                e.threshold.map_or(String::new(), |t| format!("{t:.9}")),
                e.margin.map_or(String::new(), |t| format!("{t:.9}")),
                e.uncertainty,
                e.verdict.as_str()
            );
        }
    }
    if !r.relative.is_empty() {
        out.push_str("kind,rank,probes,probe_values,lambda,bound,measured,verdict\n");
        for e in &r.relative {
            let join = |v: &[f64]| v.iter().map(|x| format!("{x:.9}")).collect::<Vec<_>>().join(";");
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{:.9},{}",
                e.kind,
                e.rank,
                e.probes.replace(',', ";"),
                join(&e.probe_values),
                join(&e.lambda),
                e.bound.map_or(String::new(), |t| format!("{t:.9}")),
                e.measured,
                e.verdict.as_str()
            );
        }
    }
    if !r.qubit.is_empty() {
        // one wide table: theta, one threshold column per kind, measured G
        out.push_str("theta_over_half_pi");
        for q in &r.qubit {
            let _ = write!(out, ",t_{}", q.kind);
        }
        out.push_str(",g_measured\n");
        for (i, p) in r.qubit[0].points.iter().enumerate() {
            let _ = write!(out, "{:.6}", p.theta / FRAC_PI_2);
            for q in &r.qubit {
                let _ = write!(out, ",{}", q.points.get(i).and_then(|p| p.threshold).map_or(String::new(), |t| format!("{t:.9}")));
            }
            let _ = writeln!(out, ",{:.9}", p.measured);
        }
    }
    out
}
