//! Command-line front end. `main` only forwards to [`run`].

use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expansions::{
    empirical_domain, eval_expansion, make_spec, AppellRoute, ExpansionError, ExpansionKind,
    ExpansionSpec,
};
use crate::frobenius::{FrobeniusError, LocalRecurrence};
use crate::heun::{
    build_eq25, build_eq3_scaled, eval_oracle, frobenius_heun, ExponentChoice, HeunError,
    HeunParams,
};
use crate::special::{self, SpecialError};
use crate::termination::{five_term_termination, run_termination, Center, TerminationError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_PARTIAL: i32 = 2;
pub const EXIT_TOLERANCE: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

pub use crate::special::MAX_TERMS_ENV;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Expansion(#[from] ExpansionError),
    #[error(transparent)]
    Termination(#[from] TerminationError),
    #[error(transparent)]
    Frobenius(#[from] FrobeniusError),
    #[error(transparent)]
    Heun(#[from] HeunError),
    #[error(transparent)]
    Special(#[from] SpecialError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("internal: {0}")]
    Internal(String),
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Config(_) => "E_CONFIG",
            CliError::Expansion(_) => "E_EXPANSION",
            CliError::Termination(_) => "E_TERMINATION",
            CliError::Frobenius(_) => "E_FROBENIUS",
            CliError::Heun(_) => "E_HEUN",
            CliError::Special(_) => "E_SPECIAL",
            CliError::Io(_) => "E_IO",
            CliError::Internal(_) => "E_INTERNAL",
        }
    }

    fn exit_code(&self) -> i32 {
        match self {
            CliError::Internal(_) => EXIT_INTERNAL,
            _ => EXIT_ERROR,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(
    name = "heun",
    version,
    about = "Incomplete Beta and Appell expansions of the confluent Heun equation",
    allow_negative_numbers = true
)]
pub struct Cli {
    /// Read the run configuration from a JSON file instead of flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Print the parsed configuration as JSON and exit.
    #[arg(long)]
    pub dump_config: bool,
    #[command(subcommand)]
    pub command: Option<RunConfig>,
}

/// A complete run description; round-trips through JSON.
#[derive(Subcommand, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RunConfig {
    /// Evaluate an expansion at one point or along a grid.
    #[command(allow_negative_numbers = true)]
    Eval(EvalArgs),
    /// Compare an expansion with the Frobenius oracle at the origin.
    #[command(allow_negative_numbers = true)]
    Compare(CompareArgs),
    /// Dump the banded recurrence coefficients.
    #[command(allow_negative_numbers = true)]
    Recurrence(RecurrenceArgs),
    /// Find and certify terminating parameter sets.
    #[command(allow_negative_numbers = true)]
    Terminate(TerminateArgs),
    /// Measure the convergence radius over a one-parameter sweep.
    #[command(allow_negative_numbers = true)]
    Scan(ScanArgs),
    /// Evaluate a single special function.
    #[command(allow_negative_numbers = true)]
    Fn(FnArgs),
}

#[derive(Args, Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamArgs {
    #[arg(long)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.0)]
    pub gamma_im: f64,
    #[arg(long)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.0)]
    pub delta_im: f64,
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.0)]
    pub epsilon_im: f64,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    pub alpha_im: f64,
    #[arg(long)]
    pub q: f64,
    #[arg(long, default_value_t = 0.0)]
    pub q_im: f64,
}

impl ParamArgs {
    pub fn params(&self) -> HeunParams {
        HeunParams::new(
            Complex64::new(self.gamma, self.gamma_im),
            Complex64::new(self.delta, self.delta_im),
            Complex64::new(self.epsilon, self.epsilon_im),
            Complex64::new(self.alpha, self.alpha_im),
            Complex64::new(self.q, self.q_im),
        )
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Auto,
    Literal,
    Moments,
}

impl From<Route> for AppellRoute {
    fn from(r: Route) -> Self {
        match r {
            Route::Auto => AppellRoute::Auto,
            Route::Literal => AppellRoute::Literal,
            Route::Moments => AppellRoute::Moments,
        }
    }
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpansionArgs {
    /// type1beta0, type1beta1, type1appell, type2beta0, type2beta1, type2appell
    #[arg(long)]
    pub kind: String,
    #[command(flatten)]
    pub params: ParamArgs,
    /// zero, gamma, delta, two, or a complex number such as 0.5+0.1i
    #[arg(long, default_value = "zero")]
    pub mu: String,
    /// Center of the Appell kinds; defaults to an apparent singular point.
    #[arg(long)]
    pub center: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub center_im: f64,
    /// Which apparent point serves as default center (1 or 2).
    #[arg(long, default_value_t = 1)]
    pub apparent: usize,
    #[arg(long, value_enum, default_value_t = Route::Auto)]
    pub appell_route: Route,
    #[arg(long, default_value_t = crate::expansions::DEFAULT_TERMS)]
    pub terms: usize,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointArgs {
    #[arg(long, conflicts_with = "z_grid")]
    pub z: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub z_im: f64,
    /// Real grid `start:end:count`, endpoints included; `--z-im` shifts it.
    #[arg(long, allow_hyphen_values = true)]
    pub z_grid: Option<String>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputArgs {
    /// Output file; standard output when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalArgs {
    #[command(flatten)]
    pub expansion: ExpansionArgs,
    #[command(flatten)]
    pub points: PointArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareArgs {
    #[command(flatten)]
    pub expansion: ExpansionArgs,
    #[command(flatten)]
    pub points: PointArgs,
    /// Largest accepted relative deviation from the oracle fit.
    #[arg(long, default_value_t = 1e-6)]
    pub tolerance: f64,
    /// Terms of the oracle series.
    #[arg(long, default_value_t = 4000)]
    pub oracle_terms: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Equation {
    Eq3,
    Eq25,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecurrenceArgs {
    #[arg(long, value_enum, default_value_t = Equation::Eq3)]
    pub eq: Equation,
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, default_value_t = 0.0)]
    pub center: f64,
    #[arg(long, default_value_t = 0.0)]
    pub center_im: f64,
    #[arg(long, default_value = "zero")]
    pub mu: String,
    #[arg(long, default_value_t = 30)]
    pub n_max: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerminateArgs {
    #[arg(long = "N")]
    pub n: usize,
    /// zero, gamma, delta, two, or a number
    #[arg(long, default_value = "zero")]
    pub mu: String,
    /// Expansion center of the four-term search: 0 or 1.
    #[arg(long, default_value_t = 0)]
    pub center: u8,
    #[arg(long)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.0)]
    pub gamma_im: f64,
    #[arg(long)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.0)]
    pub delta_im: f64,
    /// Required for the four-term search; solved for in the five-term one.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub epsilon_im: f64,
    /// Expand about `z₀ = q/α` and solve for `(q, ε)` pairs.
    #[arg(long)]
    pub five_term: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Gamma,
    Delta,
    Epsilon,
    Alpha,
    Q,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanArgs {
    #[command(flatten)]
    pub expansion: ExpansionArgs,
    #[arg(long, value_enum)]
    pub sweep: SweepParam,
    /// Real grid `start:end:count` for the swept parameter.
    #[arg(long, allow_hyphen_values = true)]
    pub grid: String,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FnArgs {
    /// 2f1, beta, ibeta, f1, gamma or lgamma
    pub name: String,
    /// Arguments as complex numbers, e.g. `0.5` or `0.5+0.1i`.
    #[arg(allow_hyphen_values = true)]
    pub args: Vec<String>,
}

/// Run the command line `args` (program name first). Errors are written to
/// `err` as a JSON record; the return value is the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return EXIT_OK;
            }
            return report(err, &CliError::Config(e.kind().to_string()), Some(&e.to_string()));
        }
    };
    let outcome = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| dispatch(cli, out)));
    match outcome {
        Ok(Ok(code)) => code,
        Ok(Err(e)) => report(err, &e, None),
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            report(err, &CliError::Internal(msg), None)
        }
    }
}

fn report(err: &mut dyn Write, e: &CliError, detail: Option<&str>) -> i32 {
    let mut record = serde_json::json!({ "error": e.code(), "message": e.to_string() });
    if let Some(d) = detail {
        record["detail"] = serde_json::Value::String(d.trim_end().to_string());
    }
    let _ = writeln!(err, "{record}");
    e.exit_code()
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<i32> {
    let config = match (cli.config, cli.command) {
        (Some(_), Some(_)) => {
            return Err(CliError::Config("--config cannot be combined with a subcommand".into()))
        }
        (Some(path), None) => {
            let text = std::fs::read_to_string(&path)?;
            serde_json::from_str::<RunConfig>(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
        (None, Some(cmd)) => cmd,
        (None, None) => return Err(CliError::Config("no subcommand given".into())),
    };
    if cli.dump_config {
        let text = serde_json::to_string_pretty(&config).map_err(internal)?;
        writeln!(out, "{text}")?;
        return Ok(EXIT_OK);
    }
    execute(&config, out)
}

/// Execute a parsed configuration.
pub fn execute(config: &RunConfig, out: &mut dyn Write) -> Result<i32> {
    match config {
        RunConfig::Eval(a) => run_eval(a, out),
        RunConfig::Compare(a) => run_compare(a, out),
        RunConfig::Recurrence(a) => run_recurrence(a, out),
        RunConfig::Terminate(a) => run_terminate(a, out),
        RunConfig::Scan(a) => run_scan(a, out),
        RunConfig::Fn(a) => run_fn(a, out),
    }
}

fn internal(e: impl std::fmt::Display) -> CliError {
    CliError::Internal(e.to_string())
}

/// 17 significant digits, lowercase exponent.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

fn emit(text: &str, output: &OutputArgs, out: &mut dyn Write) -> Result<()> {
    match &output.output {
        Some(path) => std::fs::write(path, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn json_text<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(internal)?;
    s.push('\n');
    Ok(s)
}

fn parse_complex(s: &str) -> Result<Complex64> {
    Complex64::from_str(s.trim()).map_err(|_| CliError::Config(format!("not a number: {s:?}")))
}

fn resolve_mu(s: &str, p: &HeunParams) -> Result<Complex64> {
    match s.to_ascii_lowercase().as_str() {
        "zero" => Ok(Complex64::new(0.0, 0.0)),
        "gamma" => Ok(p.gamma),
        "delta" => Ok(p.delta),
        "two" => Ok(Complex64::new(2.0, 0.0)),
        other => parse_complex(other),
    }
}

fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let bad = || CliError::Config(format!("grid must be start:end:count, got {s:?}"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let a: f64 = parts[0].parse().map_err(|_| bad())?;
    let b: f64 = parts[1].parse().map_err(|_| bad())?;
    let n: usize = parts[2].parse().map_err(|_| bad())?;
    match n {
        0 => Err(bad()),
        1 => Ok(vec![a]),
        _ => Ok((0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()),
    }
}

fn points(p: &PointArgs) -> Result<Vec<Complex64>> {
    match (&p.z_grid, p.z) {
        (Some(g), _) => Ok(parse_grid(g)?
            .into_iter()
            .map(|x| Complex64::new(x, p.z_im))
            .collect()),
        (None, Some(z)) => Ok(vec![Complex64::new(z, p.z_im)]),
        (None, None) => Err(CliError::Config("one of --z or --z-grid is required".into())),
    }
}

fn term_cap(requested: usize) -> Result<usize> {
    match std::env::var(MAX_TERMS_ENV) {
        Ok(v) => {
            let cap: usize = v
                .parse()
                .map_err(|_| CliError::Config(format!("{MAX_TERMS_ENV} must be a count, got {v:?}")))?;
            Ok(requested.min(cap))
        }
        Err(_) => Ok(requested),
    }
}

fn build_spec(a: &ExpansionArgs, params: HeunParams) -> Result<ExpansionSpec> {
    let kind = ExpansionKind::from_str(&a.kind).map_err(|e| CliError::Config(e.to_string()))?;
    let mu = resolve_mu(&a.mu, &params)?;
    let center = match (kind.fixed_center(), a.center) {
        (Some(c), _) => c,
        (None, Some(re)) => Complex64::new(re, a.center_im),
        (None, None) => {
            let apparent: Vec<Complex64> = if kind.is_type2() {
                let (_, z1, z2) = build_eq25(&params)?;
                vec![z1, z2]
            } else {
                params.z0().into_iter().collect()
            };
            *apparent
                .get(a.apparent.saturating_sub(1))
                .ok_or_else(|| CliError::Config(format!("no apparent point #{}", a.apparent)))?
        }
    };
    Ok(make_spec(kind, params, center, mu)?.with_appell_route(a.appell_route.into()))
}

#[derive(Serialize)]
struct EvalRow {
    z: Complex64,
    u: Complex64,
    terms_used: usize,
    last_term_mag: f64,
    converged: bool,
}

pub fn run_eval(a: &EvalArgs, out: &mut dyn Write) -> Result<i32> {
    let spec = build_spec(&a.expansion, a.expansion.params.params())?;
    let terms = term_cap(a.expansion.terms)?;
    let mut rows = Vec::new();
    for z in points(&a.points)? {
        let e = eval_expansion(&spec, z, terms)?;
        rows.push(EvalRow {
            z,
            u: e.value,
            terms_used: e.diagnostics.terms_used,
            last_term_mag: e.diagnostics.last_term_magnitude,
            converged: e.diagnostics.converged,
        });
    }
    let text = match a.output.format.unwrap_or(Format::Csv) {
        Format::Json => json_text(&rows)?,
        Format::Csv => {
            let mut s = String::from("z_re,z_im,u_re,u_im,terms_used,last_term_mag,converged\n");
            for r in &rows {
                s += &format!(
                    "{},{},{},{},{},{},{}\n",
                    fmt_f64(r.z.re),
                    fmt_f64(r.z.im),
                    fmt_f64(r.u.re),
                    fmt_f64(r.u.im),
                    r.terms_used,
                    fmt_f64(r.last_term_mag),
                    r.converged
                );
            }
            s
        }
    };
    emit(&text, &a.output, out)?;
    Ok(if rows.iter().all(|r| r.converged) {
        EXIT_OK
    } else {
        EXIT_PARTIAL
    })
}

#[derive(Serialize)]
struct ComparePoint {
    z: Complex64,
    expansion: Complex64,
    oracle_fit: Complex64,
    deviation: f64,
}

#[derive(Serialize)]
struct CompareReport {
    kind: String,
    /// Weights of the exponent-0 and exponent-(1-γ) oracle branches.
    fit_coefficients: [Complex64; 2],
    points: Vec<ComparePoint>,
    max_deviation: f64,
    tolerance: f64,
    pass: bool,
}

/// Least-squares weights of the two oracle branches reproducing `values`.
fn oracle_fit(
    params: &HeunParams,
    zs: &[Complex64],
    values: &[Complex64],
    terms: usize,
) -> Result<(Vec<Complex64>, [Complex64; 2])> {
    let b0 = frobenius_heun(params, ExponentChoice::Zero, terms)?;
    let b1 = frobenius_heun(params, ExponentChoice::OneMinusGamma, terms)?;
    let mut m = DMatrix::<Complex64>::zeros(zs.len(), 2);
    for (i, &z) in zs.iter().enumerate() {
        m[(i, 0)] = eval_oracle(&b0, z)?.u;
        m[(i, 1)] = eval_oracle(&b1, z)?.u;
    }
    let y = DVector::from_column_slice(values);
    let x = m.clone().svd(true, true).solve(&y, 1e-300).map_err(internal)?;
    let fit = &m * &x;
    Ok((fit.iter().copied().collect(), [x[0], x[1]]))
}

pub fn run_compare(a: &CompareArgs, out: &mut dyn Write) -> Result<i32> {
    let params = a.expansion.params.params();
    let spec = build_spec(&a.expansion, params)?;
    let terms = term_cap(a.expansion.terms)?;
    let zs = points(&a.points)?;
    if let Some(z) = zs.iter().find(|z| z.norm() >= 1.0) {
        return Err(CliError::Config(format!("oracle needs |z| < 1, got {z}")));
    }
    let values = zs
        .iter()
        .map(|&z| eval_expansion(&spec, z, terms).map(|e| e.value))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let (fit, coefficients) = oracle_fit(&params, &zs, &values, a.oracle_terms)?;
    let pts: Vec<ComparePoint> = zs
        .iter()
        .zip(&values)
        .zip(&fit)
        .map(|((&z, &u), &f)| ComparePoint {
            z,
            expansion: u,
            oracle_fit: f,
            deviation: (u - f).norm() / u.norm(),
        })
        .collect();
    let max_deviation = pts.iter().map(|p| p.deviation).fold(0.0, f64::max);
    let pass = max_deviation < a.tolerance;
    let report = CompareReport {
        kind: spec.kind.to_string(),
        fit_coefficients: coefficients,
        points: pts,
        max_deviation,
        tolerance: a.tolerance,
        pass,
    };
    emit(&json_text(&report)?, &a.output, out)?;
    Ok(if pass { EXIT_OK } else { EXIT_TOLERANCE })
}

pub fn run_recurrence(a: &RecurrenceArgs, out: &mut dyn Write) -> Result<i32> {
    let params = a.params.params();
    let ode = match a.eq {
        Equation::Eq3 => build_eq3_scaled(&params),
        Equation::Eq25 => build_eq25(&params)?.0,
    };
    let center = Complex64::new(a.center, a.center_im);
    let mu = resolve_mu(&a.mu, &params)?;
    let rec = LocalRecurrence::unchecked(&ode, center, mu)?;
    let mut s = String::from("n,offset,re,im\n");
    for n in 0..=a.n_max {
        for (j, k) in rec.row(n).iter().enumerate() {
            s += &format!("{n},{j},{},{}\n", fmt_f64(k.re), fmt_f64(k.im));
        }
    }
    emit(&s, &a.output, out)?;
    Ok(EXIT_OK)
}

pub fn run_terminate(a: &TerminateArgs, out: &mut dyn Write) -> Result<i32> {
    let gamma = Complex64::new(a.gamma, a.gamma_im);
    let delta = Complex64::new(a.delta, a.delta_im);
    let p = HeunParams::new(gamma, delta, Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
    let mu = resolve_mu(&a.mu, &p)?;
    let (text, matched) = if a.five_term {
        let r = five_term_termination(a.n, mu, gamma, delta)?;
        (json_text(&r)?, !r.count_mismatch)
    } else {
        let center = match a.center {
            0 => Center::Zero,
            1 => Center::One,
            c => return Err(CliError::Config(format!("center must be 0 or 1, got {c}"))),
        };
        let eps = a
            .epsilon
            .ok_or_else(|| CliError::Config("--epsilon is required without --five-term".into()))?;
        let r = run_termination(a.n, mu, center, gamma, delta, Complex64::new(eps, a.epsilon_im))?;
        (json_text(&r)?, r.count_found == r.count_expected)
    };
    emit(&text, &a.output, out)?;
    Ok(if matched { EXIT_OK } else { EXIT_TOLERANCE })
}

pub fn run_scan(a: &ScanArgs, out: &mut dyn Write) -> Result<i32> {
    let base = a.expansion.params;
    let grid = parse_grid(&a.grid)?;
    let rows: Vec<(f64, Result<(f64, f64, f64)>)> = grid
        .par_iter()
        .map(|&v| {
            let mut p = base;
            match a.sweep {
                SweepParam::Gamma => p.gamma = v,
                SweepParam::Delta => p.delta = v,
                SweepParam::Epsilon => p.epsilon = v,
                SweepParam::Alpha => p.alpha = v,
                SweepParam::Q => p.q = v,
            }
            let r = build_spec(&a.expansion, p.params())
                .map(|s| (empirical_domain(&s, 0.0), s.true_radius(), s.stable_radius()));
            (v, r)
        })
        .collect();
    let mut s = String::from("index,value,radius,true_radius,stable_radius,error\n");
    for (i, (v, r)) in rows.iter().enumerate() {
        match r {
            Ok((rad, tr, st)) => {
                s += &format!("{i},{},{},{},{},\n", fmt_f64(*v), fmt_f64(*rad), fmt_f64(*tr), fmt_f64(*st))
            }
            Err(e) => s += &format!("{i},{},nan,nan,nan,{}\n", fmt_f64(*v), e.code()),
        }
    }
    emit(&s, &a.output, out)?;
    Ok(if rows.iter().all(|(_, r)| r.is_ok()) {
        EXIT_OK
    } else {
        EXIT_PARTIAL
    })
}

pub fn run_fn(a: &FnArgs, out: &mut dyn Write) -> Result<i32> {
    let args = a
        .args
        .iter()
        .map(|s| parse_complex(s))
        .collect::<Result<Vec<_>>>()?;
    let want = |n: usize| -> Result<()> {
        if args.len() == n {
            Ok(())
        } else {
            Err(CliError::Config(format!("{} takes {n} arguments, got {}", a.name, args.len())))
        }
    };
    let v = match a.name.to_ascii_lowercase().as_str() {
        "2f1" => {
            want(4)?;
            special::gauss_2f1(args[0], args[1], args[2], args[3])?.0
        }
        "beta" => {
            want(2)?;
            special::complete_beta(args[0], args[1])?
        }
        "ibeta" => {
            want(3)?;
            special::incomplete_beta(args[0], args[1], args[2])?.0
        }
        "f1" => {
            want(6)?;
            special::appell_f1(args[0], args[1], args[2], args[3], args[4], args[5])?.0
        }
        "gamma" => {
            want(1)?;
            special::gamma(args[0])?
        }
        "lgamma" => {
            want(1)?;
            special::log_gamma(args[0])?
        }
        other => return Err(CliError::Config(format!("unknown function {other:?}"))),
    };
    writeln!(out, "{},{}", fmt_f64(v.re), fmt_f64(v.im))?;
    Ok(EXIT_OK)
}
