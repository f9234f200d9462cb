//! Command-line front end: argument and config-file parsing, command dispatch,
//! CSV/JSON emission and the `verify` suites.
//!
//! Exit codes: 0 success, 1 numerical failure (or a failed check), 2 usage, 3 I/O.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::asymptotics::{compare, large_mu_model, small_mu_model, UStar};
use crate::branch::{analyze, sweep_with, BranchCurve, GridSpec, SweepOptions};
use crate::linearized::{assemble, eigenvalues, mass_derivative, mass_derivative_with, GridOptions, Which};
use crate::nonlinearity::{
    beta_star, check_hypotheses, constants, default_lambda_grid, dense_lambda_grid, mu_star, roots, Order,
};
use crate::profile::fmt17;
use crate::shooting::{diagnostics, linear_variation, solve_ground_state, ShootControls};
use crate::variational::{energy_landscape, i_of_lambda, lambda_grid, slopes_ordered, write_landscape_csv, IValue};
use crate::{Error, ProblemParams};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("numerical failure: {0}")]
    Numerical(Error),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 1,
            CliError::Io { .. } => 3,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Parameter(_) => CliError::Usage(e.to_string()),
            other => CliError::Numerical(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Suite {
    Constants,
    Solver,
    Endpoint,
    Small,
    Branch,
    Variational,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CommandKind {
    Constants,
    Solve,
    Branch,
    CheckHypotheses,
    Asymptotics,
    Landscape,
    NlsQ,
    Verify,
}

#[derive(Debug, Parser)]
#[command(name = "dpnls", version, about = "Ground states and mass curves of the double-power NLS")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// μ*, β*, x* and the Sobolev/mass regimes of (p, q, d)
    Constants(ExpArgs),
    /// Radial ground state at one μ (CSV profile, or JSON summary)
    Solve(SolveArgs),
    /// Mass curve over a logit-uniform μ/μ* grid (branch CSV schema)
    Branch(SweepArgs),
    /// (H1), (H2) and existence on a λ grid
    CheckHypotheses(HypArgs),
    /// Endpoint laws at μ → 0 and μ → μ* against the sampled curve
    Asymptotics(SweepArgs),
    /// I(λ) on the branch: lambda,I,n_minimizers,dI_left,dI_right
    Landscape(LandscapeArgs),
    /// Ground state Q of ΔQ + Q^q - Q = 0 and its integrals
    NlsQ(ExpArgs),
    /// Run a verification suite; exit 0 when every check passes
    Verify(VerifyArgs),
}

#[derive(Debug, Args, Default)]
struct ExpArgs {
    /// Defocusing exponent p > q
    #[arg(long, value_parser = parse_real)]
    p: Option<f64>,
    /// Focusing exponent q > 1
    #[arg(long, value_parser = parse_real)]
    q: Option<f64>,
    /// Dimension d ≥ 2
    #[arg(long)]
    d: Option<u32>,
    /// key = value file; flags given on the command line win
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output path (stdout when absent)
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Output format (default depends on the command)
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// ODE relative tolerance [default: 1e-11]
    #[arg(long)]
    rel_tol: Option<f64>,
    /// ODE absolute tolerance [default: 1e-13]
    #[arg(long)]
    abs_tol: Option<f64>,
}

#[derive(Debug, Args, Default)]
struct GridArgs {
    /// Number of μ samples [default: 120]
    #[arg(long)]
    points: Option<usize>,
    /// Smallest μ/μ* [default: 0.001]
    #[arg(long, value_parser = parse_real)]
    x_lo: Option<f64>,
    /// Largest μ/μ* [default: 0.995]
    #[arg(long, value_parser = parse_real)]
    x_hi: Option<f64>,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    exp: ExpArgs,
    /// Frequency 0 < μ < μ*
    #[arg(long, value_parser = parse_real)]
    mu: Option<f64>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    exp: ExpArgs,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Debug, Args)]
struct HypArgs {
    #[command(flatten)]
    exp: ExpArgs,
    /// μ > 0 [default: μ*/2]
    #[arg(long, value_parser = parse_real)]
    mu: Option<f64>,
    /// Use the 4× denser λ grid
    #[arg(long)]
    dense: bool,
}

#[derive(Debug, Args)]
struct LandscapeArgs {
    #[command(flatten)]
    exp: ExpArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Number of λ values [default: 200]
    #[arg(long)]
    lambda_points: Option<usize>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(flatten)]
    exp: ExpArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Suite to run [default: endpoint; (p, q, d) default to (5, 3, 3)]
    #[arg(long, value_enum)]
    suite: Option<Suite>,
}

/// Fully resolved invocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub d: Option<u32>,
    pub mu: Option<f64>,
    pub grid: GridSpec,
    pub controls: ShootControls,
    pub lambda_points: usize,
    pub dense: bool,
    pub suite: Suite,
    pub output_path: Option<PathBuf>,
    pub format: Option<Format>,
}

const CONFIG_KEYS: &[&str] =
    &["p", "q", "d", "mu", "points", "x_lo", "x_hi", "lambda_points", "dense", "suite", "format", "out", "rel_tol", "abs_tol"];

/// Parse a `key = value` file: `#` starts a comment, blank lines are skipped,
/// dashes in keys are read as underscores.
pub fn read_config_file(text: &str) -> Result<HashMap<String, String>, CliError> {
    let mut map = HashMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", no + 1)))?;
        let key = k.trim().replace('-', "_");
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return Err(CliError::Usage(format!("config line {}: unknown key '{}'", no + 1, k.trim())));
        }
        if map.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(CliError::Usage(format!("config line {}: duplicate key '{key}'", no + 1)));
        }
    }
    Ok(map)
}

/// A real number, also accepted as a ratio `a/b` (e.g. `7/3`).
pub fn parse_real(s: &str) -> Result<f64, String> {
    let bad = || format!("'{s}' is not a number or a ratio a/b");
    match s.split_once('/') {
        Some((a, b)) => {
            let (a, b): (f64, f64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
            Ok(a / b)
        }
        None => s.trim().parse().map_err(|_| bad()),
    }
}

struct FileValues(HashMap<String, String>);

impl FileValues {
    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::Usage(format!("config: cannot parse {key} = {v}"))),
        }
    }

    fn fill_real(&self, slot: &mut Option<f64>, key: &str) -> Result<(), CliError> {
        if slot.is_none() {
            if let Some(v) = self.0.get(key) {
                *slot = Some(parse_real(v).map_err(|e| CliError::Usage(format!("config: {key}: {e}")))?);
            }
        }
        Ok(())
    }

    fn fill<T: std::str::FromStr>(&self, slot: &mut Option<T>, key: &str) -> Result<(), CliError> {
        if slot.is_none() {
            *slot = self.get(key)?;
        }
        Ok(())
    }

    fn value_enum<T: ValueEnum>(&self, slot: &mut Option<T>, key: &str) -> Result<(), CliError> {
        if slot.is_none() {
            if let Some(v) = self.0.get(key) {
                *slot = Some(T::from_str(v, true).map_err(|_| CliError::Usage(format!("config: bad {key} = {v}")))?);
            }
        }
        Ok(())
    }
}

/// Parse argv (program name first) and an optional config file into a [`RunConfig`].
pub fn parse_config<I, T>(argv: I) -> Result<RunConfig, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv)?;
    resolve(cli.command).map_err(|e| clap::Error::raw(clap::error::ErrorKind::ValueValidation, format!("{e}\n")))
}

fn resolve(cmd: Command) -> Result<RunConfig, CliError> {
    let empty_grid = GridArgs::default();
    let (kind, mut exp, grid, mut mu, mut lambda_points, mut dense, mut suite) = match cmd {
        Command::Constants(a) => (CommandKind::Constants, a, empty_grid, None, None, None, None),
        Command::Solve(a) => (CommandKind::Solve, a.exp, empty_grid, a.mu, None, None, None),
        Command::Branch(a) => (CommandKind::Branch, a.exp, a.grid, None, None, None, None),
        Command::CheckHypotheses(a) => {
            (CommandKind::CheckHypotheses, a.exp, empty_grid, a.mu, None, a.dense.then_some(true), None)
        }
        Command::Asymptotics(a) => (CommandKind::Asymptotics, a.exp, a.grid, None, None, None, None),
        Command::Landscape(a) => (CommandKind::Landscape, a.exp, a.grid, None, a.lambda_points, None, None),
        Command::NlsQ(a) => (CommandKind::NlsQ, a, empty_grid, None, None, None, None),
        Command::Verify(a) => (CommandKind::Verify, a.exp, a.grid, None, None, None, a.suite),
    };
    let mut grid = grid;
    if let Some(path) = &exp.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let file = FileValues(read_config_file(&text)?);
        file.fill_real(&mut exp.p, "p")?;
        file.fill_real(&mut exp.q, "q")?;
        file.fill(&mut exp.d, "d")?;
        file.fill(&mut exp.out, "out")?;
        file.fill(&mut exp.rel_tol, "rel_tol")?;
        file.fill(&mut exp.abs_tol, "abs_tol")?;
        file.value_enum(&mut exp.format, "format")?;
        file.fill(&mut grid.points, "points")?;
        file.fill_real(&mut grid.x_lo, "x_lo")?;
        file.fill_real(&mut grid.x_hi, "x_hi")?;
        file.fill(&mut lambda_points, "lambda_points")?;
        file.fill(&mut dense, "dense")?;
        file.value_enum(&mut suite, "suite")?;
        if matches!(kind, CommandKind::Solve | CommandKind::CheckHypotheses) {
            file.fill_real(&mut mu, "mu")?;
        }
    }
    if kind == CommandKind::Verify {
        exp.p = exp.p.or(Some(5.0));
        exp.q = exp.q.or(Some(3.0));
        exp.d = exp.d.or(Some(3));
    }
    let missing: Vec<&str> = [
        ("--p", exp.p.is_none() && kind != CommandKind::NlsQ),
        ("--q", exp.q.is_none()),
        ("--d", exp.d.is_none()),
        ("--mu", mu.is_none() && kind == CommandKind::Solve),
    ]
    .iter()
    .filter(|(_, m)| *m)
    .map(|(n, _)| *n)
    .collect();
    if !missing.is_empty() {
        return Err(CliError::Usage(format!("missing required argument(s): {}", missing.join(", "))));
    }
    let defaults = GridSpec::default();
    let grid = GridSpec {
        n_points: grid.points.unwrap_or(defaults.n_points),
        x_lo: grid.x_lo.unwrap_or(defaults.x_lo),
        x_hi: grid.x_hi.unwrap_or(defaults.x_hi),
    };
    grid.validate()?;
    let mut controls = ShootControls::default();
    controls.rel_tol = exp.rel_tol.unwrap_or(controls.rel_tol);
    controls.abs_tol = exp.abs_tol.unwrap_or(controls.abs_tol);
    controls.validate()?;
    let lambda_points = lambda_points.unwrap_or(200);
    if lambda_points < 3 {
        return Err(CliError::Usage("lambda_points must be at least 3".into()));
    }
    Ok(RunConfig {
        command: kind,
        p: exp.p,
        q: exp.q,
        d: exp.d,
        mu,
        grid,
        controls,
        lambda_points,
        dense: dense.unwrap_or(false),
        suite: suite.unwrap_or(Suite::Endpoint),
        output_path: exp.out,
        format: exp.format,
    })
}

/// Write `content` to `path`, or to stdout when there is none.
pub fn emit(content: &str, path: Option<&Path>) -> Result<(), CliError> {
    let res = match path {
        Some(p) => std::fs::write(p, content.as_bytes()),
        None => io::stdout().lock().write_all(content.as_bytes()),
    };
    res.map_err(|source| CliError::Io { path: path.map_or("<stdout>".into(), |p| p.display().to_string()), source })
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable result");
    s.push('\n');
    s
}

fn csv_string(f: impl FnOnce(&mut Vec<u8>) -> io::Result<()>) -> String {
    let mut buf = Vec::new();
    f(&mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii csv")
}

/// Flatten a JSON object into `key,value` CSV rows (nested keys joined with '.').
fn json_to_kv_csv(v: &serde_json::Value) -> String {
    fn walk(prefix: &str, v: &serde_json::Value, out: &mut String) {
        match v {
            serde_json::Value::Object(m) => {
                for (k, x) in m {
                    let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&key, x, out);
                }
            }
            serde_json::Value::Number(n) => {
                let s = n.as_f64().map_or_else(|| n.to_string(), fmt17);
                writeln!(out, "{prefix},{s}").unwrap();
            }
            serde_json::Value::Array(a) => {
                for (i, x) in a.iter().enumerate() {
                    walk(&format!("{prefix}.{i}"), x, out);
                }
            }
            serde_json::Value::Null => writeln!(out, "{prefix},").unwrap(),
            serde_json::Value::String(s) => writeln!(out, "{prefix},{s}").unwrap(),
            serde_json::Value::Bool(b) => writeln!(out, "{prefix},{b}").unwrap(),
        }
    }
    let mut out = String::from("key,value\n");
    walk("", v, &mut out);
    out
}

/// Run a parsed configuration; returns the process exit code.
pub fn run(cfg: &RunConfig) -> Result<i32, CliError> {
    let out = cfg.output_path.as_deref();
    let (p, q, d) = (cfg.p.unwrap_or(f64::NAN), cfg.q.unwrap_or(f64::NAN), cfg.d.unwrap_or(0));
    match cfg.command {
        CommandKind::Constants => {
            let c = constants(p, q, d)?;
            let text = match cfg.format {
                None => format!(
                    "mu_star={}\nbeta_star={}\nx_star={}\nsobolev_regime={:?}\nmass_regime={:?}\n",
                    c.mu_star, c.beta_star, c.x_star, c.sobolev_regime, c.mass_regime
                ),
                Some(Format::Csv) => format!(
                    "mu_star,beta_star,x_star,sobolev_regime,mass_regime\n{},{},{},{:?},{:?}\n",
                    fmt17(c.mu_star),
                    fmt17(c.beta_star),
                    fmt17(c.x_star),
                    c.sobolev_regime,
                    c.mass_regime
                ),
                Some(Format::Json) => to_json(&json!({
                    "mu_star": c.mu_star,
                    "beta_star": c.beta_star,
                    "x_star": c.x_star,
                    "regimes": { "sobolev": c.sobolev_regime, "mass": c.mass_regime },
                })),
            };
            emit(&text, out)?;
        }
        CommandKind::Solve | CommandKind::NlsQ => {
            let params = if cfg.command == CommandKind::Solve {
                ProblemParams::double_power(p, q, d, cfg.mu.unwrap())?
            } else {
                ProblemParams::single_power_nls(q, d)?
            };
            let profile = solve_ground_state(&params, &cfg.controls)?;
            let text = match cfg.format {
                None | Some(Format::Csv) => csv_string(|b| profile.write_csv(b)),
                Some(Format::Json) => {
                    let diag = diagnostics(&profile);
                    let mut v = json!({
                        "params": params,
                        "y0": profile.y0,
                        "integrals": diag.integrals,
                        "diagnostics": diag,
                        "tail": profile.tail,
                    });
                    if cfg.command == CommandKind::Solve {
                        v["mass_derivative"] = json!(mass_derivative_with(&profile, &GridOptions::default())?);
                    } else if let Some(p) = cfg.p {
                        v["int_p1"] = json!(profile.integrate_full(|_, u, _| u.abs().powf(p + 1.0)));
                    }
                    to_json(&v)
                }
            };
            emit(&text, out)?;
        }
        CommandKind::Branch => {
            let curve = sweep_with(p, q, d, &cfg.grid, &sweep_opts(cfg))?;
            let analysis = if curve.valid_points().len() >= 20 { Some(analyze(&curve)?) } else { None };
            if let Some(a) = &analysis {
                eprintln!(
                    "sign changes of M': {}  crossings: {:?}  M' > 0 at end: {}  verdict: {:?}",
                    a.sign_changes, a.crossings, a.mp_positive_at_end, a.verdict
                );
            }
            let text = match cfg.format {
                None | Some(Format::Csv) => csv_string(|b| curve.write_csv(b)),
                Some(Format::Json) => to_json(&json!({ "curve": curve, "analysis": analysis })),
            };
            emit(&text, out)?;
        }
        CommandKind::CheckHypotheses => {
            let mu = cfg.mu.unwrap_or(0.5 * mu_star(p, q));
            let params = ProblemParams::double_power_relaxed(p, q, d, mu)?;
            let grid = if cfg.dense { dense_lambda_grid() } else { default_lambda_grid() };
            let rep = check_hypotheses(&params, &grid)?;
            let text = match cfg.format {
                None | Some(Format::Json) => to_json(&rep),
                Some(Format::Csv) => {
                    let mut s = String::from("lambda,roots_below_alpha,roots_alpha_beta\n");
                    for (l, (a, b)) in rep.lambda_grid.iter().zip(&rep.i_lambda_root_counts) {
                        writeln!(s, "{},{a},{b}", fmt17(*l)).unwrap();
                    }
                    s
                }
            };
            eprintln!("H1: {}  H2: {}  existence: {}", rep.h1_pass, rep.h2_pass, rep.existence_pass);
            emit(&text, out)?;
        }
        CommandKind::Asymptotics => {
            let curve = sweep_with(p, q, d, &cfg.grid, &sweep_opts(cfg))?;
            let small = small_mu_model(p, q, d)?;
            let large = large_mu_model(p, q, d)?;
            let cmp = compare(&curve, &small, &large)?;
            let v = json!({ "small_mu": small, "large_mu": large, "comparison": cmp });
            let text = match cfg.format {
                None | Some(Format::Json) => to_json(&v),
                Some(Format::Csv) => json_to_kv_csv(&v),
            };
            emit(&text, out)?;
        }
        CommandKind::Landscape => {
            let curve = sweep_with(p, q, d, &cfg.grid, &sweep_opts(cfg))?;
            let land = energy_landscape(&curve)?;
            let values = landscape_values(&land, cfg.lambda_points)?;
            let text = match cfg.format {
                None | Some(Format::Csv) => csv_string(|b| write_landscape_csv(&values, b)),
                Some(Format::Json) => to_json(&json!({
                    "mass_regime": land.mass_regime,
                    "lambda_c": land.lambda_c,
                    "lambda_c_conditional": land.lambda_c_conditional,
                    "e_zero_mu": land.e_zero_mu,
                    "theta": land.theta,
                    "c_gn": land.c_gn,
                    "segments_mu": land.segments.iter().map(|s| s.mu_range()).collect::<Vec<_>>(),
                    "values": values,
                })),
            };
            if land.lambda_c_conditional {
                eprintln!("note: lambda_c = {} rests on the single-zero-of-M' assumption", land.lambda_c);
            }
            emit(&text, out)?;
        }
        CommandKind::Verify => {
            let checks = verify(cfg)?;
            let all = checks.iter().all(|c| c.pass);
            let text = match cfg.format {
                Some(Format::Json) => to_json(&json!({ "pass": all, "checks": checks })),
                Some(Format::Csv) => {
                    let mut s = String::from("name,value,bound,pass\n");
                    for c in &checks {
                        writeln!(s, "{},{},{},{}", c.name, fmt17(c.value), c.bound, c.pass).unwrap();
                    }
                    s
                }
                None => {
                    let mut s = String::new();
                    for c in &checks {
                        let tag = if c.pass { "PASS" } else { "FAIL" };
                        writeln!(s, "{tag} {}: {:.6e} ({})", c.name, c.value, c.bound).unwrap();
                    }
                    writeln!(s, "{}", if all { "all checks passed" } else { "some checks failed" }).unwrap();
                    s
                }
            };
            emit(&text, out)?;
            return Ok(if all { 0 } else { 1 });
        }
    }
    Ok(0)
}

fn sweep_opts(cfg: &RunConfig) -> SweepOptions {
    SweepOptions { controls: cfg.controls, ..SweepOptions::default() }
}

fn landscape_values(land: &crate::variational::EnergyLandscape, n: usize) -> Result<Vec<IValue>, Error> {
    let mut values = vec![i_of_lambda(land, 0.0)?];
    if land.lambda_c > 0.0 {
        values.push(i_of_lambda(land, land.lambda_c)?);
    }
    for l in lambda_grid(land, n) {
        values.push(i_of_lambda(land, l)?);
    }
    Ok(values)
}

/// One verification check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: String,
    pub pass: bool,
}

fn check(name: impl Into<String>, value: f64, bound: impl Into<String>, pass: bool) -> Check {
    Check { name: name.into(), value, bound: bound.into(), pass }
}

fn at_most(name: impl Into<String>, value: f64, tol: f64) -> Check {
    check(name, value, format!("<= {tol:e}"), value <= tol)
}

fn within(name: impl Into<String>, ratio: f64, band: f64) -> Check {
    check(name, ratio, format!("ratio in [{}, {}]", 1.0 - band, 1.0 + band), (ratio - 1.0).abs() <= band)
}

/// Sign changes of M' the theory predicts for a curve that ends with M' > 0.
pub fn expected_sign_changes(p: f64, q: f64, d: u32) -> Result<Option<usize>, Error> {
    let model = small_mu_model(p, q, d)?;
    Ok(model.mp_sign_near_zero.map(|s| if s > 0.0 { 0 } else { 1 }))
}

/// Run the suite named in `cfg` on `(p, q, d)`.
pub fn verify(cfg: &RunConfig) -> Result<Vec<Check>, Error> {
    let (p, q, d) = (cfg.p.unwrap(), cfg.q.unwrap(), cfg.d.unwrap());
    let want = |s: Suite| cfg.suite == s || cfg.suite == Suite::All;
    let mut checks = Vec::new();
    if want(Suite::Constants) {
        checks.extend(verify_constants(p, q, d)?);
    }
    if want(Suite::Solver) {
        checks.extend(verify_solver(p, q, d, &cfg.controls)?);
    }
    if want(Suite::Small) {
        checks.extend(verify_small(p, q, d, &cfg.controls)?);
    }
    let needs_curve = [Suite::Endpoint, Suite::Branch, Suite::Variational].iter().any(|&s| want(s));
    if needs_curve {
        let curve = sweep_with(p, q, d, &cfg.grid, &sweep_opts(cfg))?;
        if want(Suite::Endpoint) {
            checks.extend(verify_endpoint(&curve)?);
        }
        if want(Suite::Branch) {
            checks.extend(verify_branch(&curve)?);
        }
        if want(Suite::Variational) {
            checks.extend(verify_variational(&curve)?);
        }
    }
    Ok(checks)
}

fn verify_constants(p: f64, q: f64, d: u32) -> Result<Vec<Check>, Error> {
    let (ms, bs) = (mu_star(p, q), beta_star(p, q));
    let params = ProblemParams::double_power_relaxed(p, q, d, ms)?;
    let r = roots(&params)?;
    Ok(vec![
        at_most("beta at mu_star vs beta_star", (r.beta_mu - bs).abs() / bs, 1e-10),
        at_most("G(beta_star) at mu_star", params.eval(bs, Order::Primitive)?.abs(), 1e-12),
        at_most("g(beta_star) at mu_star", params.eval(bs, Order::Value)?.abs(), 1e-12),
    ])
}

fn verify_solver(p: f64, q: f64, d: u32, controls: &ShootControls) -> Result<Vec<Check>, Error> {
    let mut out = Vec::new();
    for frac in [0.1, 0.5, 0.9] {
        let params = ProblemParams::double_power(p, q, d, frac * mu_star(p, q))?;
        let prof = solve_ground_state(&params, controls)?;
        let diag = diagnostics(&prof);
        let tag = format!("mu/mu_star={frac}");
        out.push(at_most(format!("{tag} pohozaev residual"), diag.pohozaev_residual, 1e-6));
        let bad = (diag.monotonicity_violations + diag.bound_violations + diag.energy_violations) as f64;
        out.push(at_most(format!("{tag} monotonicity/bound/energy violations"), bad, 0.0));
        let var = linear_variation(&params, &prof)?;
        out.push(check(
            format!("{tag} variation sign changes"),
            var.sign_changes as f64,
            "== 1 and diverges to -inf",
            var.sign_changes == 1 && var.diverged_to_minus_infinity,
        ));
        let ev = eigenvalues(&assemble(&prof, 0, Which::LMu)?, 2)?;
        out.push(check(format!("{tag} lambda1"), ev[0], "< 0", ev[0] < 0.0));
        out.push(check(format!("{tag} lambda2"), ev[1], "> 0", ev[1] > 0.0));
    }
    Ok(out)
}

fn verify_small(p: f64, q: f64, d: u32, controls: &ShootControls) -> Result<Vec<Check>, Error> {
    let model = small_mu_model(p, q, d)?;
    let mu = 1e-3 * mu_star(p, q);
    let prof = solve_ground_state(&ProblemParams::double_power(p, q, d, mu)?, controls)?;
    let mass = prof.integrals().mass;
    let (mp, _) = mass_derivative(&prof)?;
    let mut out = Vec::new();
    if let Some((one, two)) = model.mass(mu) {
        let (e1, e2) = ((mass - one).abs() / mass, (mass - two).abs() / mass);
        out.push(within("M mu^-leading / int Q^2", mass / one, 0.02));
        out.push(check("one-term / two-term error", e1 / e2, ">= 3", e1 >= 3.0 * e2));
    }
    match model.mp_sign_near_zero {
        Some(s) => out.push(check("sign of M' near 0", mp.signum(), format!("== {s}"), mp.signum() == s)),
        None => out.push(check("sign of M' near 0 (undetermined, reported)", mp.signum(), "none", true)),
    }
    Ok(out)
}

fn verify_endpoint(curve: &BranchCurve) -> Result<Vec<Check>, Error> {
    let (p, q, d) = (curve.p, curve.q, curve.d);
    let cmp = compare(curve, &small_mu_model(p, q, d)?, &large_mu_model(p, q, d)?)?;
    let ustar = UStar::new(p, q, 0.5 * beta_star(p, q))?;
    let fi = (0..=200).map(|i| ustar.first_integral_residual(-10.0 + 0.1 * i as f64)).fold(0.0, f64::max);
    Ok(vec![
        within("(mu*-mu)^d M / Lambda", cmp.mass_ratio, 0.05),
        within("(mu*-mu)^(d+1) M' / (d Lambda)", cmp.mass_derivative_ratio, 0.05),
        within("R_gamma (mu*-mu) / rho", cmp.radius_ratio, 0.05),
        within("lambda1 R_gamma^2 / -(d-1)", cmp.eigenvalue_ratio, 0.10),
        at_most("U* first integral residual", fi, 1e-9),
        at_most("sup |u - U*| / beta_star", cmp.profile_gap, 0.05),
    ])
}

/// Relative gap between the linear-solve and finite-difference M'.
pub fn mp_gap(mp_lin: f64, mp_fd: f64, mass: f64) -> f64 {
    (mp_lin - mp_fd).abs() / (mp_lin.abs() + 1e-12 * mass)
}

fn verify_branch(curve: &BranchCurve) -> Result<Vec<Check>, Error> {
    let a = analyze(curve)?;
    let pts = curve.valid_points();
    let worst = pts[1..pts.len() - 1].iter().map(|p| mp_gap(p.mp_lin, p.mp_fd, p.mass)).fold(0.0, f64::max);
    let mut out = vec![
        at_most("|Mp_lin - Mp_fd| / |Mp_lin|", worst, 1e-3),
        at_most("E' + mu M'/2 residual", a.e_identity_residual, 5e-3),
        check("M' > 0 at the last sample", if a.mp_positive_at_end { 1.0 } else { 0.0 }, "== 1", a.mp_positive_at_end),
    ];
    match expected_sign_changes(curve.p, curve.q, curve.d)? {
        Some(n) => out.push(check("sign changes of M'", a.sign_changes as f64, format!("== {n}"), a.sign_changes == n)),
        None => out.push(check("sign changes of M' (reported)", a.sign_changes as f64, "none", true)),
    }
    Ok(out)
}

fn verify_variational(curve: &BranchCurve) -> Result<Vec<Check>, Error> {
    let land = energy_landscape(curve)?;
    let values = landscape_values(&land, 200)?;
    let beyond: Vec<&IValue> = values.iter().filter(|v| v.lambda > land.lambda_c).collect();
    let worst = beyond
        .windows(3)
        .map(|w| {
            let (h0, h1) = (w[1].lambda - w[0].lambda, w[2].lambda - w[1].lambda);
            ((w[2].i - w[1].i) / h1 - (w[1].i - w[0].i) / h0) * h0 * h1 / (h0 + h1)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let below = values.iter().filter(|v| v.lambda <= land.lambda_c).map(|v| v.i.abs()).fold(0.0, f64::max);
    let neg = beyond.iter().map(|v| v.i).fold(f64::NEG_INFINITY, f64::max);
    let a = analyze(curve)?;
    Ok(vec![
        at_most("second difference of I", worst, 1e-8),
        at_most("|I| on [0, lambda_c]", below, 0.0),
        check("max I beyond lambda_c", neg, "< 0", neg < 0.0),
        check("slopes ordered", if slopes_ordered(&land) { 1.0 } else { 0.0 }, "== 1", slopes_ordered(&land)),
        at_most("E' + mu M'/2 residual", a.e_identity_residual, 5e-3),
    ])
}

/// Entry point for the binary: parse, run, report; returns the exit code.
pub fn main_with<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cfg = match parse_config(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match run(&cfg) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
