//! `ambistop solve | verify | sweep`.
//!
//! Exit codes: 0 ok, 2 spec or usage error, 3 solver error, 4 verification
//! failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ambistop_core::linear::compute_exponents;
use ambistop_core::pde::{solve_vi_linear, solve_vi_radial, Grid1D};
use ambistop_core::radial::{y_k_star, RadialFundamentals};
use ambistop_core::{linear, radial, Payoff, Solution};
use clap::{Parser, Subcommand, ValueEnum};

use crate::mc::{estimate_stopped_value, McError, PriorStrategy, Reduction, SimConfig, StoppingRule};
use crate::report::{value_table, ExtF64, McBlock, PdeBlock, RunReport, SolutionSummary, Timing, Verification};
use crate::spec::{Case, McSpec, Problem, ProblemSpec, SpecError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SPEC: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

/// Default PDE grid size.
pub const DEFAULT_GRID: usize = 4001;
/// Points in the `solve --format csv` table.
pub const TABLE_POINTS: usize = 2001;

#[derive(Debug, Parser)]
#[command(name = "ambistop", version, about = "Optimal stopping under drift ambiguity")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a problem and print the report (or a value table).
    Solve {
        /// Problem file (JSON).
        spec: PathBuf,
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// `csv` prints value, payoff and stopping flag on a grid.
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Solve, then check the solution with Monte Carlo and/or the PDE
    /// solver. Without --mc or --pde both run.
    Verify {
        /// Problem file (JSON).
        spec: PathBuf,
        /// Run the Monte Carlo check.
        #[arg(long)]
        mc: bool,
        /// Run the finite-difference check.
        #[arg(long)]
        pde: bool,
        /// Simulated paths (overrides `mc.paths`).
        #[arg(long)]
        paths: Option<u64>,
        /// PDE grid nodes (default 4001).
        #[arg(long)]
        grid: Option<usize>,
        /// RNG seed (overrides `mc.seed`).
        #[arg(long)]
        seed: Option<u64>,
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve over a list of parameter values and print a CSV table.
    Sweep {
        /// Problem file (JSON).
        spec: PathBuf,
        /// One of kappa, r, K, a_norm.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        values: Vec<f64>,
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("{0}")]
    Usage(String),
    #[error("solver error: {0}")]
    Solver(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Spec(_) | CliError::Usage(_) => EXIT_SPEC,
            CliError::Solver(_) => EXIT_SOLVER,
        }
    }
}

impl From<ambistop_core::Error> for CliError {
    fn from(e: ambistop_core::Error) -> Self {
        CliError::Solver(e.to_string())
    }
}

impl From<McError> for CliError {
    fn from(e: McError) -> Self {
        match e {
            McError::Core(e) => CliError::Solver(e.to_string()),
            other => CliError::Usage(other.to_string()),
        }
    }
}

/// A solved problem with the reporting defaults resolved.
#[derive(Debug, Clone)]
pub struct Solved {
    pub problem: Problem,
    pub solution: Solution,
    pub summary: SolutionSummary,
}

/// Reporting point: the problem file's `y_ref`, else `0` (linear), `K²` (straddle),
/// `1/(4r)` (identity) or the geometric mean of a table's positive abscissas.
pub fn default_y_ref(spec: &ProblemSpec, problem: &Problem) -> f64 {
    if let Some(y) = spec.y_ref {
        return y;
    }
    match (&problem.case, &problem.payoff) {
        (Case::Linear, _) => 0.0,
        (Case::Radial, Payoff::Straddle { strike }) => strike * strike,
        (Case::Radial, Payoff::IdentityRadial) => 0.25 / problem.params.r,
        (Case::Radial, p) => {
            let b = p.breakpoints();
            let lo = b.iter().copied().filter(|x| *x > 0.0).fold(f64::INFINITY, f64::min);
            let hi = b.iter().copied().fold(0.0, f64::max);
            if lo.is_finite() {
                (lo * hi).sqrt()
            } else {
                1.0
            }
        }
    }
}

pub fn solve_spec(spec: &ProblemSpec) -> Result<Solved, CliError> {
    let problem = spec.problem()?;
    let y_ref = default_y_ref(spec, &problem);
    let p = &problem.params;
    let solution = match problem.case {
        Case::Linear => linear::solve(p, &problem.payoff)?,
        Case::Radial => radial::solve(p, &problem.payoff, Some(y_ref))?,
    };
    let yk = match problem.payoff {
        Payoff::Straddle { strike } => RadialFundamentals::new(p).and_then(|f| y_k_star(&f, p, strike)).ok(),
        _ => None,
    };
    let summary = SolutionSummary::new(&solution, y_ref, yk);
    Ok(Solved { problem, solution, summary })
}

/// Finite continuation-interval ends strictly inside `(lo, hi)`.
fn interior_thresholds(sol: &Solution, lo: f64, hi: f64) -> Vec<f64> {
    let mut t: Vec<f64> = sol
        .continuation_intervals(lo, hi)
        .into_iter()
        .flat_map(|(a, b)| [a, b])
        .filter(|x| x.is_finite() && *x > lo && *x < hi)
        .collect();
    t.dedup();
    t
}

/// PDE domain: the problem file's `pde.lo/hi` where given, else the threshold hull
/// widened on both sides and pushed out into the stopping set.
pub fn pde_domain(spec: &ProblemSpec, s: &Solved) -> (f64, f64) {
    let sol = &s.solution;
    let y_ref = s.summary.y_ref;
    let (mut lo, mut hi) = match (&s.problem.case, &s.problem.payoff) {
        (Case::Linear, Payoff::PeriodicCosine) => {
            let tp = 2.0 * std::f64::consts::PI;
            (-2.0 * tp, 2.0 * tp)
        }
        (Case::Linear, _) => {
            let scale = compute_exponents(&s.problem.params).map(|e| 1.0 / e.psi.min(-e.phi)).unwrap_or(1.0);
            let t = &sol.thresholds;
            let (a, b) = match (t.first(), t.last()) {
                (Some(a), Some(b)) => (a.min(y_ref), b.max(y_ref)),
                _ => (y_ref, y_ref),
            };
            let w = (b - a).max(scale);
            let (mut lo, mut hi) = (a - w, b + w);
            for _ in 0..20 {
                if sol.in_stopping_set(lo) {
                    break;
                }
                lo -= w;
            }
            for _ in 0..20 {
                if sol.in_stopping_set(hi) {
                    break;
                }
                hi += w;
            }
            (lo, hi)
        }
        (Case::Radial, _) => {
            let top = sol.thresholds.last().copied().unwrap_or(y_ref).max(y_ref);
            let mut hi = 2.0 * top;
            for _ in 0..20 {
                if sol.in_stopping_set(hi) {
                    break;
                }
                hi *= 2.0;
            }
            (1e-6 * hi, hi)
        }
    };
    if let Some(pde) = &spec.pde {
        lo = pde.lo.unwrap_or(lo);
        hi = pde.hi.unwrap_or(hi);
    }
    (lo, hi)
}

pub fn run_pde(spec: &ProblemSpec, s: &Solved, n: usize) -> Result<PdeBlock, CliError> {
    let (lo, hi) = pde_domain(spec, s);
    let g = Grid1D::new(lo, hi, n)?;
    let p = &s.problem.params;
    let gs = match s.problem.case {
        Case::Linear => solve_vi_linear(p, &s.problem.payoff, g)?,
        Case::Radial => solve_vi_radial(p, &s.problem.payoff, g)?,
    };
    let h = g.spacing();
    let analytic = interior_thresholds(&s.solution, lo, hi);
    let detected = gs.detected_thresholds.clone();
    let nearest = |x: f64, set: &[f64]| set.iter().map(|y| (x - y).abs()).fold(f64::INFINITY, f64::min) / h;
    let mut max_delta = 0.0_f64;
    for a in &analytic {
        max_delta = max_delta.max(nearest(*a, &detected));
    }
    for d in &detected {
        max_delta = max_delta.max(nearest(*d, &analytic));
    }
    let value_gap_sup = gs
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| (v - s.solution.value(g.node(i))).abs())
        .fold(0.0, f64::max);
    let tol = spec.tolerances.pde_threshold_spacings;
    Ok(PdeBlock {
        grid: n,
        lo,
        hi,
        spacing: h,
        analytic_thresholds: analytic,
        detected_thresholds: detected,
        max_delta_spacings: ExtF64(max_delta),
        tolerance_spacings: tol,
        value_gap_sup,
        touches_boundary: gs.touches_boundary,
        outer_iterations: gs.outer_iterations,
        passed: max_delta <= tol && !gs.touches_boundary,
    })
}

pub fn run_mc(spec: &ProblemSpec, s: &Solved, mc: &McSpec) -> Result<McBlock, CliError> {
    let y0 = spec.y0.unwrap_or(s.summary.y_ref);
    let cfg = SimConfig { dt: mc.dt, n_paths: mc.paths, horizon: mc.horizon, seed: mc.seed, antithetic: mc.antithetic };
    let red = match s.problem.case {
        Case::Linear => Reduction::Linear,
        Case::Radial => Reduction::Radial,
    };
    let prior = PriorStrategy::Generator(s.solution.generator.clone());
    let rule = StoppingRule::from_solution(&s.solution);
    let est = estimate_stopped_value(&s.problem.params, red, &prior, y0, &cfg, &rule, &s.problem.payoff)?;
    let analytic = s.solution.value(y0);
    let abs_error = (est.mean - analytic).abs();
    let k = spec.tolerances.mc_std_errors;
    let conclusive = mc.paths >= spec.tolerances.mc_min_paths;
    let within = if est.std_error > 0.0 {
        abs_error <= k * est.std_error
    } else {
        abs_error <= 1e-12 * analytic.abs().max(1.0)
    };
    Ok(McBlock {
        y0,
        paths: mc.paths,
        dt: mc.dt,
        horizon: mc.horizon,
        antithetic: mc.antithetic,
        estimate: est.mean,
        std_error: est.std_error,
        n_effective: est.n_effective,
        fraction_stopped: est.fraction_stopped,
        cap_bias_bound: est.cap_bias_bound,
        analytic,
        abs_error,
        tolerance_std_errors: k,
        conclusive,
        passed: !conclusive || within,
    })
}

fn ms(t: Instant) -> f64 {
    (t.elapsed().as_secs_f64() * 1e3 * 1e3).round() / 1e3
}

fn emit(out: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display()))),
        None => stdout.write_all(text.as_bytes()).map_err(|e| CliError::Usage(format!("cannot write output: {e}"))),
    }
}

fn report_json(r: &RunReport) -> Result<String, CliError> {
    r.to_json().map_err(|e| CliError::Solver(format!("report serialization: {e}")))
}

pub fn cmd_solve(spec_path: &Path, out: Option<&Path>, format: Format, stdout: &mut dyn Write) -> Result<RunReport, CliError> {
    let spec = ProblemSpec::from_path(spec_path)?;
    let t = Instant::now();
    let s = solve_spec(&spec)?;
    let mut report = RunReport::new(spec, s.summary.clone());
    report.timing.solve_ms = ms(t);
    let text = match format {
        Format::Json => report_json(&report)?,
        Format::Csv => {
            let (lo, hi) = table_range(&s);
            value_table(&s.solution, lo, hi, TABLE_POINTS)
        }
    };
    emit(out, &text, stdout)?;
    Ok(report)
}

/// Continuation hull padded by half its width on each side.
fn table_range(s: &Solved) -> (f64, f64) {
    let t = &s.solution.thresholds;
    let y = s.summary.y_ref;
    let (a, b) = match (t.first(), t.last()) {
        (Some(a), Some(b)) if b > a => (*a, *b),
        (Some(a), _) => (a.min(y), a.max(y)),
        _ => (y, y),
    };
    let pad = if b > a { 0.5 * (b - a) } else { 1.0 };
    let (mut lo, hi) = (a - pad, b + pad);
    if s.problem.case == Case::Radial {
        lo = lo.max(1e-6 * hi);
    }
    (lo, hi)
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_verify(
    spec_path: &Path,
    mc: bool,
    pde: bool,
    paths: Option<u64>,
    grid: Option<usize>,
    seed: Option<u64>,
    out: Option<&Path>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<RunReport, CliError> {
    let spec = ProblemSpec::from_path(spec_path)?;
    let (mc, pde) = if !mc && !pde { (true, true) } else { (mc, pde) };
    let t = Instant::now();
    let s = solve_spec(&spec)?;
    let mut timing = Timing { solve_ms: ms(t), ..Timing::default() };
    let mut v = Verification { passed: true, mc: None, pde: None, warnings: Vec::new() };
    let mut seed_used = None;
    if pde {
        let n = grid.or(spec.pde.as_ref().and_then(|p| p.grid)).unwrap_or(DEFAULT_GRID);
        let t = Instant::now();
        let block = run_pde(&spec, &s, n)?;
        timing.pde_ms = Some(ms(t));
        if block.touches_boundary {
            v.warnings.push("PDE continuation set reaches the grid end; widen pde.lo/pde.hi".into());
        }
        v.passed &= block.passed;
        v.pde = Some(block);
    }
    if mc {
        let mut m = spec.mc.clone().unwrap_or_default();
        if let Some(n) = paths {
            m.paths = n;
        }
        if let Some(sd) = seed {
            m.seed = sd;
        }
        seed_used = Some(m.seed);
        let t = Instant::now();
        let block = run_mc(&spec, &s, &m)?;
        timing.mc_ms = Some(ms(t));
        if !block.conclusive {
            v.warnings.push(format!(
                "MC inconclusive: {} paths is below {}; standard error {:.3e} is too large for the check",
                block.paths, spec.tolerances.mc_min_paths, block.std_error
            ));
        }
        v.passed &= block.passed;
        v.mc = Some(block);
    }
    for w in &v.warnings {
        let _ = writeln!(stderr, "warning: {w}");
    }
    let mut report = RunReport::new(spec, s.summary);
    report.seed = seed_used;
    report.timing = timing;
    report.verification = Some(v);
    emit(out, &report_json(&report)?, stdout)?;
    Ok(report)
}

/// Rows of a parameter sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub value: f64,
    pub summary: SolutionSummary,
    /// Values so far move against kappa (kappa sweeps only).
    pub monotone: Option<bool>,
}

pub fn sweep(spec: &ProblemSpec, param: &str, values: &[f64]) -> Result<Vec<SweepRow>, CliError> {
    if values.is_empty() {
        return Err(CliError::Usage("--values is empty".into()));
    }
    // Hold the reporting point fixed across the sweep.
    let base = spec.problem()?;
    let mut fixed = spec.clone();
    fixed.y_ref = Some(default_y_ref(spec, &base));
    let mut rows: Vec<SweepRow> = Vec::with_capacity(values.len());
    let mut ok = true;
    for &v in values {
        let s = solve_spec(&fixed.with_param(param, v)?)?;
        let monotone = (param == "kappa").then(|| {
            if let Some(prev) = rows.last() {
                let (dk, dv) = (v - prev.value, s.summary.value_at_y_ref - prev.summary.value_at_y_ref);
                let slack = 1e-9 * prev.summary.value_at_y_ref.abs().max(1.0);
                ok &= dk * dv <= slack * dk.abs().max(f64::MIN_POSITIVE);
            }
            ok
        });
        rows.push(SweepRow { value: v, summary: s.summary, monotone });
    }
    Ok(rows)
}

pub fn sweep_csv(param: &str, rows: &[SweepRow]) -> String {
    let mono = rows.iter().any(|r| r.monotone.is_some());
    let mut out = format!("{param},regime,c_star,thresholds,lambda_star,value_at_y_ref,y_k_star");
    if mono {
        out.push_str(",monotone");
    }
    out.push('\n');
    for r in rows {
        let s = &r.summary;
        let th: Vec<String> = s.thresholds.iter().map(|t| t.to_string()).collect();
        let yk = s.y_k_star.map(|y| y.to_string()).unwrap_or_default();
        let _ = write!(
            out,
            "{},{},{},{},{},{},{}",
            r.value,
            s.regime,
            s.c_star.0,
            th.join(";"),
            s.lambda_star,
            s.value_at_y_ref,
            yk
        );
        if let Some(m) = r.monotone {
            let _ = write!(out, ",{m}");
        }
        out.push('\n');
    }
    out
}

pub fn cmd_sweep(spec_path: &Path, param: &str, values: &[f64], out: Option<&Path>, stdout: &mut dyn Write) -> Result<Vec<SweepRow>, CliError> {
    let spec = ProblemSpec::from_path(spec_path)?;
    let rows = sweep(&spec, param, values)?;
    emit(out, &sweep_csv(param, &rows), stdout)?;
    Ok(rows)
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_SPEC } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = stderr.write_all(text.as_bytes());
            } else {
                let _ = stdout.write_all(text.as_bytes());
            }
            return code;
        }
    };
    let result = match &cli.command {
        Command::Solve { spec, out, format } => cmd_solve(spec, out.as_deref(), *format, stdout).map(|_| EXIT_OK),
        Command::Verify { spec, mc, pde, paths, grid, seed, out } => {
            cmd_verify(spec, *mc, *pde, *paths, *grid, *seed, out.as_deref(), stdout, stderr).map(|r| {
                if r.verification.is_some_and(|v| v.passed) {
                    EXIT_OK
                } else {
                    EXIT_VERIFY
                }
            })
        }
        Command::Sweep { spec, param, values, out } => cmd_sweep(spec, param, values, out.as_deref(), stdout).map(|_| EXIT_OK),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
