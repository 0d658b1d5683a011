//! `qng` command-line interface.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numerical non-convergence,
//! 64 usage error. Every output starts with the resolved configuration and
//! the SHA-256 of each input document, and contains nothing run-dependent,
//! so identical invocations produce identical bytes.

use clap::{Args, Parser, Subcommand};
use qng_core::certify::{
    cached_curve, cached_threshold, certify_hierarchy, certify_qubit, certify_relative, report_render,
    CertificationReport, CertifyOptions, Format, RelativeSpec,
};
use qng_core::fock::{load_density_matrix, wigner_value, DensityMatrix, ValidationOptions};
use qng_core::measures::local_coherence;
use qng_core::models::{min_eta, scan_csv, theta_window, ModelParams};
use qng_core::thresholds::cache::Cache;
use qng_core::thresholds::{Budget, Kind, LambdaGrid, ThresholdQuery};
use qng_core::tomography::{
    bootstrap_errorbars, ml_reconstruct, phase_schedule, read_dataset, sample_quadratures, write_dataset, Binning,
    MlOptions,
};
use qng_core::{fixtures, par, Error};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;
use std::path::PathBuf;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, Parser, Serialize)]
#[command(name = "qng", version, about = "Non-Gaussian coherence thresholds and certification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Seed for start points and sampling
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (0 = all logical cores, 1 = sequential)
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// Optimizer starts per window position
    #[arg(long, default_value_t = 64)]
    pub starts: usize,
    /// text, json or csv
    #[arg(long, default_value = "text")]
    pub format: String,
    /// Output file (stdout if omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Absolute or qubit threshold for one query
    Threshold {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        l: usize,
        #[arg(long, default_value_t = 1)]
        rank: usize,
        #[arg(long, value_parser = parse_kind, default_value = "gaussian")]
        kind: Kind,
        /// Qubit angle in units of pi/2
        #[arg(long, allow_hyphen_values = true)]
        theta: Option<f64>,
        #[arg(long, default_value_t = qng_core::thresholds::DEFAULT_M_MAX)]
        m_max: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Rank hierarchy verdicts for a state
    Certify {
        /// Density-matrix document, or fixture:0m1 / fixture:0p2
        #[arg(long)]
        state: String,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        l: usize,
        #[arg(long, value_parser = parse_kind, value_delimiter = ',', default_value = "classical,gaussian")]
        kinds: Vec<Kind>,
        /// Ranks to report (default 1..=l)
        #[arg(long, value_delimiter = ',')]
        ranks: Vec<usize>,
        /// Uncertainty subtracted from the measured value
        #[arg(long)]
        sigma: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Qubit coherence against T_Q on a theta grid
    Qubit {
        #[arg(long)]
        state: String,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        l: usize,
        #[arg(long, value_parser = parse_kind, value_delimiter = ',', default_value = "classical,gaussian")]
        kinds: Vec<Kind>,
        /// Free-window length (default l)
        #[arg(long)]
        rank: Option<usize>,
        /// start:stop:count in units of pi/2
        #[arg(long, default_value = "-1:1:41", allow_hyphen_values = true)]
        thetas: String,
        #[arg(long)]
        sigma: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Relative (2D or 3D) criterion for a state
    Relative {
        #[arg(long)]
        state: String,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        l: usize,
        #[arg(long, value_parser = parse_kind, value_delimiter = ',', default_value = "classical,gaussian")]
        kinds: Vec<Kind>,
        #[arg(long, default_value_t = 1)]
        rank: usize,
        /// 2 (probe P_n) or 3 (P_n and the tail P_e)
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 1e-3)]
        lambda_min: f64,
        #[arg(long, default_value_t = 1e3)]
        lambda_max: f64,
        /// Magnitudes per sign (default 60 in 2D, 20 in 3D)
        #[arg(long)]
        lambda_count: Option<usize>,
        #[arg(long)]
        sigma: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Lossy qubit model: theta windows or minimal transmission
    Model {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        eta: f64,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        phi: f64,
        #[arg(long, value_parser = parse_kind, default_value = "classical")]
        kind: Kind,
        /// Free-window length (default n)
        #[arg(long)]
        rank: Option<usize>,
        /// start:stop:count in units of pi/2
        #[arg(long, default_value = "-1:1:81", allow_hyphen_values = true)]
        thetas: String,
        /// Report the minimal eta at this angle (pi/2 units) instead of windows
        #[arg(long, allow_hyphen_values = true)]
        min_eta_at: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Simulated homodyne tomography with bootstrap error bars
    Tomo {
        #[arg(long)]
        state: String,
        /// Reconstruct from this `phase,x` CSV instead of simulating
        #[arg(long)]
        data: Option<PathBuf>,
        /// Write the simulated dataset (CSV plus .meta.json sidecar)
        #[arg(long)]
        dataset_out: Option<PathBuf>,
        #[arg(long, default_value_t = 40_000)]
        samples: usize,
        #[arg(long, default_value_t = 12)]
        phases: usize,
        /// Reconstruction cutoff (default: that of the state)
        #[arg(long)]
        n_max: Option<usize>,
        #[arg(long, default_value_t = 2000)]
        iterations: usize,
        /// Histogram samples (200 bins over [-6, 6]) before reconstruction
        #[arg(long)]
        binning: bool,
        /// Bootstrap datasets (0 = none)
        #[arg(long, default_value_t = 0)]
        bootstrap: usize,
        /// Samples per bootstrap dataset (default --samples)
        #[arg(long)]
        bootstrap_samples: Option<usize>,
        #[arg(long, default_value_t = 0)]
        k: usize,
        #[arg(long, default_value_t = 1)]
        l: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Wigner function on a phase-space grid
    Wigner {
        #[arg(long)]
        state: String,
        /// start:stop:count
        #[arg(long, default_value = "-4:4:81", allow_hyphen_values = true)]
        x: String,
        #[arg(long, default_value = "-4:4:81", allow_hyphen_values = true)]
        p: String,
        #[command(flatten)]
        common: Common,
    },
    /// Data tables behind the figures: 2, 3, 4, 5 or sm2
    Figdata {
        #[arg(long)]
        figure: String,
        #[command(flatten)]
        common: Common,
    },
}

fn parse_kind(s: &str) -> Result<Kind, String> {
    s.parse::<Kind>().map_err(|e| e.to_string())
}

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    Usage(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(Error::Io(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(Error::Json(e))
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Core(Error::InvalidParameter(msg.into()))
}

/// `start:stop:count`, inclusive.
pub fn parse_range(spec: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || invalid(format!("range `{spec}` is not start:stop:count"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if n == 0 || !a.is_finite() || !b.is_finite() {
        return Err(bad());
    }
    if n == 1 {
        return Ok(vec![a]);
    }
    Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect())
}

struct Input {
    name: String,
    text: String,
}

impl Input {
    fn sha256(&self) -> String {
        Sha256::digest(self.text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn read_state(spec: &str) -> CliResult<(Input, DensityMatrix)> {
    let text = match spec.strip_prefix("fixture:") {
        Some(name) => fixtures::by_name(name).ok_or_else(|| invalid(format!("unknown fixture `{name}`")))?.to_string(),
        None => std::fs::read_to_string(spec)?,
    };
    let rho = load_density_matrix(&text, ValidationOptions::default())?;
    Ok((Input { name: spec.to_string(), text }, rho))
}

fn budget(common: &Common) -> Budget {
    Budget { starts_per_m: common.starts, seed: common.seed, parallel: common.jobs != 1, ..Budget::default() }
}

fn format_of(common: &Common) -> CliResult<Format> {
    Ok(common.format.parse::<Format>()?)
}

/// Output document: header (config and input hashes) plus body.
struct Output {
    format: Format,
    json: Value,
    text: String,
    nonconverged: bool,
}

fn header_lines(cli: &Cli, inputs: &[Input]) -> CliResult<String> {
    let mut h = String::new();
    let _ = writeln!(h, "# qng {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(h, "# config: {}", serde_json::to_string(&cli.command)?);
    for i in inputs {
        let _ = writeln!(h, "# input {} sha256 {}", i.name, i.sha256());
    }
    Ok(h)
}

fn render(cli: &Cli, inputs: &[Input], out: &Output) -> CliResult<String> {
    match out.format {
        Format::Json => {
            let doc = json!({
                "qng": env!("CARGO_PKG_VERSION"),
                "config": &cli.command,
                "inputs": inputs.iter().map(|i| json!({"name": i.name, "sha256": i.sha256()})).collect::<Vec<_>>(),
                "result": out.json,
            });
            Ok(serde_json::to_string_pretty(&doc)? + "\n")
        }
        Format::Text | Format::Csv => Ok(header_lines(cli, inputs)? + &out.text),
    }
}

fn report_output(report: &CertificationReport, format: Format) -> CliResult<Output> {
    Ok(Output {
        format,
        json: serde_json::to_value(report)?,
        text: if format == Format::Json { String::new() } else { report_render(report, format)? },
        nonconverged: false,
    })
}

fn common_of(cmd: &Command) -> &Common {
    match cmd {
        Command::Threshold { common, .. }
        | Command::Certify { common, .. }
        | Command::Qubit { common, .. }
        | Command::Relative { common, .. }
        | Command::Model { common, .. }
        | Command::Tomo { common, .. }
        | Command::Wigner { common, .. }
        | Command::Figdata { common, .. } => common,
    }
}

fn certify_options(sigma: Option<f64>) -> CertifyOptions {
    CertifyOptions { uncertainty: sigma, cache: Cache::from_env() }
}

fn execute(cli: &Cli) -> CliResult<(Vec<Input>, Output)> {
    let common = common_of(&cli.command);
    let format = format_of(common)?;
    let budget = budget(common);
    match &cli.command {
        Command::Threshold { k, l, rank, kind, theta, m_max, .. } => {
            let mut q = ThresholdQuery::new(*k, *l, *rank, *kind).with_m_max(*m_max);
            if let Some(t) = theta {
                q = q.with_theta(t * FRAC_PI_2);
            }
            let r = cached_threshold(&q, &budget, Cache::from_env().as_ref())?;
            let text = match format {
                Format::Csv => format!(
                    "k,l,rank,kind,theta_over_half_pi,value,m,xi,alpha,phi_alpha,phi_xi,converged,boundary_hit\n{},{},{},{},{},{:.12},{},{:.9},{:.9},{:.9},{:.9},{},{}\n",
                    k, l, rank, kind, theta.map_or(String::new(), |t| t.to_string()), r.value, r.argmax.m,
                    r.argmax.params.xi, r.argmax.params.alpha, r.argmax.params.phi_alpha, r.argmax.params.phi_xi,
                    r.converged, r.boundary_hit
                ),
                _ => format!(
                    "threshold {:.12}\nargmax m={} xi={:.9} alpha={:.9} phi_alpha={:.9} phi_xi={:.9}\nconverged {}  boundary_hit {}  budget {}\n",
                    r.value, r.argmax.m, r.argmax.params.xi, r.argmax.params.alpha, r.argmax.params.phi_alpha,
                    r.argmax.params.phi_xi, r.converged, r.boundary_hit, budget.hash()
                ),
            };
            let json = json!({"threshold": r, "budget_hash": budget.hash()});
            Ok((Vec::new(), Output { format, json, text, nonconverged: !r.converged }))
        }
        Command::Certify { state, k, l, kinds, ranks, sigma, .. } => {
            let (input, rho) = read_state(state)?;
            let ranks: Vec<usize> = if ranks.is_empty() { (1..=*l).collect() } else { ranks.clone() };
            let max_rank = *ranks.iter().max().ok_or_else(|| invalid("no ranks"))?;
            let mut report = certify_hierarchy(&rho, *k, *l, kinds, max_rank, &budget, &certify_options(*sigma))?;
            report.ranks.retain(|e| ranks.contains(&e.rank));
            Ok((vec![input], report_output(&report, format)?))
        }
        Command::Qubit { state, k, l, kinds, rank, thetas, sigma, .. } => {
            let (input, rho) = read_state(state)?;
            let grid: Vec<f64> = parse_range(thetas)?.iter().map(|t| t * FRAC_PI_2).collect();
            let report = certify_qubit(&rho, *k, *l, &grid, kinds, *rank, &budget, &certify_options(*sigma))?;
            Ok((vec![input], report_output(&report, format)?))
        }
        Command::Relative { state, k, l, kinds, rank, dim, lambda_min, lambda_max, lambda_count, sigma, .. } => {
            let (input, rho) = read_state(state)?;
            let spec = match dim {
                2 => RelativeSpec::TwoD(LambdaGrid::signed_geometric(*lambda_min, *lambda_max, lambda_count.unwrap_or(60))?),
                3 => {
                    let g = LambdaGrid::signed_geometric(*lambda_min, *lambda_max, lambda_count.unwrap_or(20))?;
                    RelativeSpec::ThreeD(g.clone(), g)
                }
                other => return Err(invalid(format!("--dim must be 2 or 3, got {other}"))),
            };
            let opts = certify_options(*sigma);
            let mut report = certify_hierarchy(&rho, *k, *l, &[], 1, &budget, &opts)?;
            for kind in kinds {
                report.relative.push(certify_relative(&rho, *k, *l, *kind, *rank, &spec, &budget, &opts)?);
            }
            Ok((vec![input], report_output(&report, format)?))
        }
        Command::Model { n, eta, gamma, phi, kind, rank, thetas, min_eta_at, .. } => {
            let params = ModelParams { n: *n, theta: 0.0, phi: *phi, eta: *eta, gamma: *gamma };
            params.validate()?;
            let rank = rank.unwrap_or(*n);
            if let Some(t) = min_eta_at {
                let p = params.with_theta(t * FRAC_PI_2);
                let eta_min = min_eta(&p, *kind, rank, &budget)?;
                let text = match format {
                    Format::Csv => format!(
                        "theta_over_half_pi,min_eta\n{},{}\n",
                        t,
                        eta_min.map_or("none".to_string(), |e| format!("{e:.9}"))
                    ),
                    _ => format!("min eta at theta = {t} pi/2: {}\n", eta_min.map_or("none".to_string(), |e| format!("{e:.9}"))),
                };
                return Ok((Vec::new(), Output { format, json: json!({"theta": t, "min_eta": eta_min}), text, nonconverged: false }));
            }
            let grid: Vec<f64> = parse_range(thetas)?.iter().map(|t| t * FRAC_PI_2).collect();
            let w = theta_window(&params, *kind, rank, &grid, &budget)?;
            let mut text = String::new();
            for i in &w.intervals {
                let _ = writeln!(text, "# window {:.6} {:.6}", i.lo / FRAC_PI_2, i.hi / FRAC_PI_2);
            }
            if format == Format::Text && w.intervals.is_empty() {
                text.push_str("# no window\n");
            }
            text.push_str(&scan_csv(&w.scan));
            Ok((Vec::new(), Output { format, json: serde_json::to_value(&w)?, text, nonconverged: false }))
        }
        Command::Tomo {
            state, data, dataset_out, samples, phases, n_max, iterations, binning, bootstrap, bootstrap_samples, k, l, ..
        } => {
            let (input, rho) = read_state(state)?;
            let mut inputs = vec![input];
            let schedule = phase_schedule(*phases);
            let dataset = match data {
                Some(path) => {
                    inputs.push(Input { name: path.display().to_string(), text: std::fs::read_to_string(path)? });
                    read_dataset(path)?
                }
                None => sample_quadratures(&rho, *samples, &schedule, common.seed)?,
            };
            if let Some(path) = dataset_out {
                write_dataset(path, &dataset, &schedule)?;
            }
            let n_max = n_max.unwrap_or(rho.n_max());
            let opts = MlOptions { iterations: *iterations, binning: binning.then(Binning::default), ..MlOptions::default() };
            let rec = ml_reconstruct(&dataset, n_max, &opts)?;
            let distance = if n_max == rho.n_max() { Some(rec.rho.trace_distance(&rho)?) } else { None };
            let coherence = local_coherence(&rec.rho, *k, *l)?.value;
            let boot = if *bootstrap > 0 {
                let per = bootstrap_samples.unwrap_or(*samples);
                Some(bootstrap_errorbars(&rec.rho, *bootstrap, per, &schedule, common.seed ^ 0xB007, &opts, budget.parallel)?)
            } else {
                None
            };
            let sigma_c = boot.as_ref().map(|b| b.coherence_sigma(*k, *l)).transpose()?;
            let doc = rec.rho.to_document();
            let json = json!({
                "rho": doc,
                "iterations": rec.iterations,
                "converged": rec.converged,
                "log_likelihood": rec.log_likelihood.last(),
                "trace_distance_to_source": distance,
                "coherence": coherence,
                "sigma_coherence": sigma_c,
                "std_re": boot.as_ref().map(|b| b.std_re.row_iter().map(|r| r.iter().cloned().collect::<Vec<_>>()).collect::<Vec<_>>()),
                "std_im": boot.as_ref().map(|b| b.std_im.row_iter().map(|r| r.iter().cloned().collect::<Vec<_>>()).collect::<Vec<_>>()),
            });
            let mut text = String::new();
            match format {
                Format::Csv => {
                    text.push_str("m,n,re,im,std_re,std_im\n");
                    for m in 0..=n_max {
                        for n in 0..=n_max {
                            let z = rec.rho.entry(m, n);
                            let (sr, si) = boot.as_ref().map_or((String::new(), String::new()), |b| {
                                (format!("{:.9}", b.std_re[(m, n)]), format!("{:.9}", b.std_im[(m, n)]))
                            });
                            let _ = writeln!(text, "{m},{n},{:.9},{:.9},{sr},{si}", z.re, z.im);
                        }
                    }
                }
                _ => {
                    let _ = writeln!(text, "samples {}  iterations {}  converged {}", dataset.samples.len(), rec.iterations, rec.converged);
                    if let Some(d) = distance {
                        let _ = writeln!(text, "trace distance to source {d:.6}");
                    }
                    let _ = writeln!(text, "C_{{{k},{l}}} = {coherence:.6}");
                    if let Some(s) = sigma_c {
                        let _ = writeln!(text, "bootstrap sigma(C) = {s:.6} over {bootstrap} datasets");
                    }
                    let _ = writeln!(text, "re:");
                    for m in 0..=n_max {
                        let row: Vec<String> = (0..=n_max).map(|n| format!("{:>8.4}", rec.rho.entry(m, n).re)).collect();
                        let _ = writeln!(text, "{}", row.join(" "));
                    }
                    let _ = writeln!(text, "im:");
                    for m in 0..=n_max {
                        let row: Vec<String> = (0..=n_max).map(|n| format!("{:>8.4}", rec.rho.entry(m, n).im)).collect();
                        let _ = writeln!(text, "{}", row.join(" "));
                    }
                }
            }
            Ok((inputs, Output { format, json, text, nonconverged: !rec.converged }))
        }
        Command::Wigner { state, x, p, .. } => {
            let (input, rho) = read_state(state)?;
            let xs = parse_range(x)?;
            let ps = parse_range(p)?;
            let mut rows = Vec::with_capacity(xs.len() * ps.len());
            let mut text = String::from("x,p,w\n");
            for &xv in &xs {
                for &pv in &ps {
                    let w = wigner_value(&rho, xv, pv);
                    rows.push([xv, pv, w]);
                    let _ = writeln!(text, "{xv:.6},{pv:.6},{w:.9}");
                }
            }
            Ok((vec![input], Output { format, json: json!({"x_p_w": rows}), text, nonconverged: false }))
        }
        Command::Figdata { figure, .. } => figdata(figure, format, &budget),
    }
}

fn figdata(figure: &str, format: Format, budget: &Budget) -> CliResult<(Vec<Input>, Output)> {
    let cache = Cache::from_env();
    let fixture = |name: &str| -> CliResult<(Input, DensityMatrix)> { read_state(&format!("fixture:{name}")) };
    let plain = |json: Value, text: String| Output { format, json, text, nonconverged: false };
    match figure {
        "2" => {
            let mut text = String::from("n2,rank,kind,threshold\n");
            let mut rows = Vec::new();
            for n2 in 1..=5usize {
                for kind in [Kind::Classical, Kind::Gaussian] {
                    for rank in 1..=n2 {
                        let q = ThresholdQuery::new(0, n2, rank, kind);
                        let t = cached_threshold(&q, budget, cache.as_ref())?.value;
                        let _ = writeln!(text, "{n2},{rank},{kind},{t:.9}");
                        rows.push(json!({"n2": n2, "rank": rank, "kind": kind, "threshold": t}));
                    }
                }
            }
            Ok((Vec::new(), plain(Value::Array(rows), text)))
        }
        "3" => {
            let mut inputs = Vec::new();
            let mut reports = Vec::new();
            let mut text = String::from("state,kind,rank,measured,threshold,verdict\n");
            for (name, l) in [("0m1", 1usize), ("0p2", 2)] {
                let (input, rho) = fixture(name)?;
                let opts = CertifyOptions { uncertainty: None, cache: cache.clone() };
                let r = certify_hierarchy(&rho, 0, l, &[Kind::Classical, Kind::Gaussian], l, budget, &opts)?;
                for e in &r.ranks {
                    let _ = writeln!(
                        text,
                        "{name},{},{},{:.9},{},{}",
                        e.kind,
                        e.rank,
                        e.measured,
                        e.threshold.map_or(String::new(), |t| format!("{t:.9}")),
                        e.verdict.as_str()
                    );
                }
                inputs.push(input);
                reports.push(r);
            }
            Ok((inputs, plain(serde_json::to_value(&reports)?, text)))
        }
        "4" => {
            let (input, _) = fixture("0m1")?;
            let mut text = String::from("kind,lambda,value,coherence,probe\n");
            let mut curves = Vec::new();
            for kind in [Kind::Classical, Kind::Gaussian] {
                let q = ThresholdQuery::new(0, 1, 1, kind);
                let c = cached_curve(&q, &LambdaGrid::default_2d(), budget, cache.as_ref())?;
                for p in &c.points {
                    let _ = writeln!(text, "{kind},{:.9e},{:.9},{:.9},{:.9}", p.lambda, p.value, p.coherence, p.probe);
                }
                curves.push(c);
            }
            Ok((vec![input], plain(serde_json::to_value(&curves)?, text)))
        }
        "5" => {
            let (input, rho) = fixture("0p2")?;
            let grid: Vec<f64> = parse_range("-1:1:41")?.iter().map(|t| t * FRAC_PI_2).collect();
            let opts = CertifyOptions { uncertainty: None, cache };
            let r = certify_qubit(&rho, 0, 2, &grid, &[Kind::Classical, Kind::Gaussian], Some(2), budget, &opts)?;
            let text = report_render(&r, Format::Csv)?;
            Ok((vec![input], plain(serde_json::to_value(&r)?, text)))
        }
        "sm2" => {
            let params = ModelParams::new(2, 0.0, 0.77, 1.0)?;
            let grid: Vec<f64> = parse_range("-1:1:81")?.iter().map(|t| t * FRAC_PI_2).collect();
            let w = theta_window(&params, Kind::Classical, 2, &grid, budget)?;
            let mut text = String::new();
            for i in &w.intervals {
                let _ = writeln!(text, "# window {:.6} {:.6}", i.lo / FRAC_PI_2, i.hi / FRAC_PI_2);
            }
            text.push_str(&scan_csv(&w.scan));
            Ok((Vec::new(), plain(serde_json::to_value(&w)?, text)))
        }
        other => Err(invalid(format!("unknown figure `{other}` (expected 2, 3, 4, 5 or sm2)"))),
    }
}

/// Fill in defaults that depend on other arguments so the recorded config is complete.
fn resolve_defaults(cli: &mut Cli) {
    match &mut cli.command {
        Command::Certify { l, ranks, .. } if ranks.is_empty() => *ranks = (1..=*l).collect(),
        Command::Qubit { l, rank, .. } if rank.is_none() => *rank = Some(*l),
        Command::Model { n, rank, .. } if rank.is_none() => *rank = Some(*n),
        Command::Relative { dim, lambda_count, .. } if lambda_count.is_none() => {
            *lambda_count = Some(if *dim == 3 { 20 } else { 60 })
        }
        Command::Tomo { samples, bootstrap_samples, .. } if bootstrap_samples.is_none() => {
            *bootstrap_samples = Some(*samples)
        }
        _ => {}
    }
}

fn exit_code(e: &CliError) -> i32 {
    match e {
        CliError::Usage(_) => EXIT_USAGE,
        CliError::Core(e) if e.is_numerical() => EXIT_NONCONVERGENCE,
        CliError::Core(_) => EXIT_INVALID,
    }
}

/// Parse `argv` (including the program name), run, and return the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let mut cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    resolve_defaults(&mut cli);
    let jobs = common_of(&cli.command).jobs;
    let outcome = par::with_threads(jobs, || -> CliResult<(String, bool)> {
        let (inputs, out) = execute(&cli)?;
        Ok((render(&cli, &inputs, &out)?, out.nonconverged))
    });
    match outcome {
        Ok((doc, nonconverged)) => {
            let written = match &common_of(&cli.command).out {
                Some(path) => std::fs::write(path, doc.as_bytes()),
                None => {
                    print!("{doc}");
                    Ok(())
                }
            };
            if let Err(e) = written {
                eprintln!("error: {e}");
                return EXIT_INVALID;
            }
            if nonconverged {
                eprintln!("warning: optimizer did not converge");
                EXIT_NONCONVERGENCE
            } else {
                EXIT_OK
            }
        }
        Err(e) => {
            match &e {
                CliError::Core(err) => eprintln!("error: {err}"),
                CliError::Usage(msg) => eprintln!("usage: {msg}"),
            }
            exit_code(&e)
        }
    }
}
