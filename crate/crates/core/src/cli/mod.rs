//! Command-line front end.
//!
//! Exit codes: 0 success, 1 check failure, 2 usage or parse error, 3 IO
//! error.

mod scenario;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

use crate::dynamics::{classify, simulate, ConvergenceReport, RateFit};
use crate::json::{self, Num};
use crate::transition::{lifted_transition, TransitionBundle};
use crate::verify::{run_suite, ScenarioSpec, SuiteConfig, Tolerances};

pub use scenario::{
    parse_scenario, GraphSpec, LoadedScenario, Options, PeriodicSpec, ScenarioError, ScenarioFile, ScheduleSpec,
    ToleranceSpec,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;

/// Environment variable capping the verify worker count.
pub const THREADS_ENV: &str = "SIGNET_THREADS";

#[derive(Debug, Parser)]
#[command(name = "signet", version, about = "Signed switching network dynamics")]
pub struct Cli {
    /// Suppress the human-readable summary.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the signed flow and write the trajectory as CSV.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// CSV destination; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Final time; the horizon when absent.
        #[arg(long)]
        t: Option<f64>,
    },
    /// Classify the long-run behaviour and write the report as JSON.
    Classify {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Evaluation time; estimated from the decay rate when absent.
        #[arg(long)]
        t: Option<f64>,
        /// Overrides both classification tolerances.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Write every transition matrix over [t0, t] with identity residuals.
    Analyze {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// End of the span; the horizon when absent.
        #[arg(long)]
        t: Option<f64>,
    },
    /// Run the randomized check suite and write JSON lines.
    Verify {
        /// Suite configuration; the built-in 200-seed suite when absent.
        #[arg(long)]
        suite: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run only scenarios with this seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Global tolerance applied to every residual.
        #[arg(long)]
        tol: Option<f64>,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Scenario { path: String, source: ScenarioError },
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{0}")]
    Compute(String),
    #[error("{failed} of {total} checks failed")]
    ChecksFailed { failed: usize, total: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Scenario { source: ScenarioError::Io(_), .. } | CliError::Io { .. } => EXIT_IO,
            CliError::Scenario { .. } => EXIT_USAGE,
            CliError::Compute(_) | CliError::ChecksFailed { .. } => EXIT_CHECK_FAILED,
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. With `--out` the payload goes to the file and the
/// summary to `out`; without it the payload goes to `out` and the summary
/// to `err`.
pub fn run<I, A>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let (result, dest) = match &cli.command {
        Command::Simulate { scenario, out: dest, t } => (cmd_simulate(scenario, *t), dest),
        Command::Classify { scenario, out: dest, t, tol } => (cmd_classify(scenario, *t, *tol), dest),
        Command::Analyze { scenario, out: dest, t } => (cmd_analyze(scenario, *t), dest),
        Command::Verify { suite, out: dest, seed, tol } => (cmd_verify(suite.as_deref(), *seed, *tol), dest),
    };
    let output = match result {
        Ok(o) => o,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return e.exit_code();
        }
    };
    let written = match dest {
        Some(p) => write_file(p, &output.body),
        None => out.write_all(&output.body).and_then(|_| out.flush()).map_err(io_err("<stdout>")),
    };
    if let Err(e) = written {
        let _ = writeln!(err, "error: {e}");
        return e.exit_code();
    }
    if !cli.quiet {
        let sink: &mut dyn Write = if dest.is_some() { out } else { err };
        for line in &output.summary {
            let _ = writeln!(sink, "{line}");
        }
    }
    match output.failure {
        Some(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
        None => EXIT_OK,
    }
}

/// What a command produced: the payload, human-readable summary lines and
/// an error to report after the payload has been written.
#[derive(Debug)]
pub struct Output {
    pub body: Vec<u8>,
    pub summary: Vec<String>,
    pub failure: Option<CliError>,
}

fn load(path: &Path) -> Result<LoadedScenario, CliError> {
    parse_scenario(path).map_err(|source| CliError::Scenario { path: path.display().to_string(), source })
}

fn io_err(path: &str) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_string(), source }
}

fn write_file(path: &Path, body: &[u8]) -> Result<(), CliError> {
    let name = path.display().to_string();
    let mut w = BufWriter::new(File::create(path).map_err(io_err(&name))?);
    w.write_all(body).and_then(|_| w.flush()).map_err(io_err(&name))
}

fn compute<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Compute(e.to_string())
}

fn pretty_json(value: &impl Serialize) -> Vec<u8> {
    let mut body = serde_json::to_vec_pretty(value).expect("reports serialize");
    body.push(b'\n');
    body
}

fn record_time(s: &LoadedScenario, t: Option<f64>) -> Result<f64, CliError> {
    let t = t.unwrap_or(s.signal.horizon());
    s.signal.check_time(t).map_err(|e| CliError::Usage(format!("--t: {e}")))?;
    Ok(t)
}

fn echo(s: &LoadedScenario) -> String {
    format!("scenario: {}", s.resolved.to_json_compact())
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.16e}")).collect();
    format!("[{}]", parts.join(", "))
}

pub fn cmd_simulate(path: &Path, t: Option<f64>) -> Result<Output, CliError> {
    let s = load(path)?;
    let tf = record_time(&s, t)?;
    let traj = simulate(&s.signal, &s.x0, s.signal.t0(), tf, s.options.sample_dt).map_err(compute)?;
    let x0_norm = s.x0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let growth = traj.max_norm_growth();
    let bound = if growth <= 1e-12 * x0_norm.max(1.0) { "holds" } else { "VIOLATED" };
    Ok(Output {
        body: traj.to_csv().into_bytes(),
        summary: vec![
            echo(&s),
            format!("samples: {}", traj.len()),
            format!("final state at t = {tf:.16e}: {}", fmt_vec(traj.final_state())),
            format!("sup-norm bound ||x(t)|| <= ||x0|| = {x0_norm:.16e}: {bound} (excess {growth:.3e})"),
        ],
        failure: None,
    })
}

#[derive(Serialize)]
struct RateJson {
    rate: Num,
    intercept: Num,
    r2: Num,
    samples: usize,
}

impl From<&RateFit<f64>> for RateJson {
    fn from(r: &RateFit<f64>) -> Self {
        Self { rate: Num(r.rate), intercept: Num(r.intercept), r2: Num(r.r2), samples: r.samples }
    }
}

#[derive(Serialize)]
struct ReportJson<'a> {
    verdict: String,
    graph_verdict: String,
    numeric_verdict: String,
    reason: Option<&'a str>,
    inconsistency: Option<&'a str>,
    #[serde(rename = "D")]
    gauge: Option<&'a [i8]>,
    nu: Option<Vec<Num>>,
    c: Option<Num>,
    rate: Option<RateJson>,
    residual: Num,
    t_long: Num,
    phi_limit: Vec<Vec<Num>>,
}

impl<'a> From<&'a ConvergenceReport<f64>> for ReportJson<'a> {
    fn from(r: &'a ConvergenceReport<f64>) -> Self {
        Self {
            verdict: r.verdict.to_string(),
            graph_verdict: r.graph_verdict.to_string(),
            numeric_verdict: r.numeric_verdict.to_string(),
            reason: r.reason.as_deref(),
            inconsistency: r.inconsistency.as_deref(),
            gauge: r.gauge.as_ref().map(|g| g.signs()),
            nu: r.nu.as_deref().map(json::nums),
            c: r.c.map(Num),
            rate: r.rate.as_ref().map(RateJson::from),
            residual: Num(r.residual),
            t_long: Num(r.t_long),
            phi_limit: json::matrix(&r.phi_limit),
        }
    }
}

pub fn cmd_classify(path: &Path, t: Option<f64>, tol: Option<f64>) -> Result<Output, CliError> {
    let s = load(path)?;
    if let Some(t) = t {
        record_time(&s, Some(t))?;
    }
    if matches!(tol, Some(x) if !(x > 0.0)) {
        return Err(CliError::Usage("--tol must be positive".into()));
    }
    let tols = s.options.tolerances;
    let (tol_limit, tol_zero) = tol.map_or((tols.limit, tols.zero), |x| (x, x));
    let r = classify(&s.signal, s.signal.t0(), t, tol_limit, tol_zero, Some(&s.x0)).map_err(compute)?;
    let mut summary = vec![
        echo(&s),
        format!("verdict: {}", r.verdict),
        format!("graph-side: {}  numeric: {}", r.graph_verdict, r.numeric_verdict),
    ];
    summary.extend(r.reason.iter().map(|x| format!("reason: {x}")));
    summary.extend(r.inconsistency.iter().map(|x| format!("inconsistency: {x}")));
    summary.extend(r.rate.iter().map(|f| format!("rate: {:.6e} (R^2 {:.6})", f.rate, f.r2)));
    Ok(Output { body: pretty_json(&ReportJson::from(&r)), summary, failure: None })
}

#[derive(Serialize)]
struct ResidualsJson {
    decomposition: Num,
    sum: Num,
    bound: Num,
    norm: Num,
    block_symmetry: Num,
    substochastic_violation: Num,
    stochastic_defect: Num,
}

#[derive(Serialize)]
struct BundleJson {
    t0: Num,
    t: Num,
    phi: Vec<Vec<Num>>,
    phi_even: Vec<Vec<Num>>,
    phi_odd: Vec<Vec<Num>>,
    phi_abs: Vec<Vec<Num>>,
    psi: Vec<Vec<Num>>,
    phi_base: Vec<Vec<Num>>,
    residuals: ResidualsJson,
}

impl From<&TransitionBundle<f64>> for BundleJson {
    fn from(b: &TransitionBundle<f64>) -> Self {
        let r = &b.residuals;
        Self {
            t0: Num(b.t0),
            t: Num(b.t),
            phi: json::matrix(&b.phi),
            phi_even: json::matrix(&b.phi_even),
            phi_odd: json::matrix(&b.phi_odd),
            phi_abs: json::matrix(&b.phi_abs),
            psi: json::matrix(&b.psi),
            phi_base: json::matrix(&b.phi_base),
            residuals: ResidualsJson {
                decomposition: Num(r.decomposition),
                sum: Num(r.sum),
                bound: Num(r.bound),
                norm: Num(r.norm),
                block_symmetry: Num(r.block_symmetry),
                substochastic_violation: Num(b.substochastic_violation()),
                stochastic_defect: Num(b.stochastic_defect()),
            },
        }
    }
}

pub fn cmd_analyze(path: &Path, t: Option<f64>) -> Result<Output, CliError> {
    let s = load(path)?;
    let t = record_time(&s, t)?;
    let b = lifted_transition(&s.signal, s.signal.t0(), t).map_err(compute)?;
    let r = &b.residuals;
    let line = format!(
        "decomposition {:.3e}  sum {:.3e}  bound {:.3e}  norm {:.3e}  block symmetry {:.3e}",
        r.decomposition, r.sum, r.bound, r.norm, r.block_symmetry
    );
    Ok(Output { body: pretty_json(&BundleJson::from(&b)), summary: vec![echo(&s), line], failure: None })
}

/// Worker cap from `SIGNET_THREADS`; unset or unparsable means all cores.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse().ok()).filter(|&k: &usize| k > 0)
}

pub fn cmd_verify(suite: Option<&Path>, seed: Option<u64>, tol: Option<f64>) -> Result<Output, CliError> {
    let config = match suite {
        Some(p) => {
            let name = p.display().to_string();
            let text = std::fs::read_to_string(p).map_err(io_err(&name))?;
            let de = &mut serde_json::Deserializer::from_str(&text);
            serde_path_to_error::deserialize::<_, SuiteConfig>(de)
                .map_err(|e| CliError::Usage(format!("{name}: at `{}`: {}", e.path(), e.inner())))?
        }
        None => SuiteConfig::default_suite(),
    };
    let checks = config.selected_checks().map_err(|e| CliError::Usage(e.to_string()))?;
    let mut specs: Vec<ScenarioSpec> = config.specs();
    if let Some(seed) = seed {
        specs.retain(|s| s.seed == seed);
    }
    for s in &specs {
        s.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    }
    if matches!(tol, Some(x) if !(x >= 0.0)) {
        return Err(CliError::Usage("--tol must be nonnegative".into()));
    }
    let tolerances = Tolerances { global: tol, overrides: config.tolerances.clone() };
    let report = run_suite(&specs, &checks, &tolerances, thread_cap());
    let mut body = Vec::new();
    report.write_json_lines(&mut body).map_err(io_err("<report>"))?;
    let sm = report.summary;
    let line = format!("{} results: {} passed, {} failed, {} skipped", sm.total, sm.passed, sm.failed, sm.skipped);
    let failure = (!sm.ok()).then_some(CliError::ChecksFailed { failed: sm.failed, total: sm.total });
    Ok(Output { body, summary: vec![line], failure })
}
