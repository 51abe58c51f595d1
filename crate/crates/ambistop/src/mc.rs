//! Euler–Maruyama simulation of the reduced dynamics under admissible priors.
//!
//! Every prior is simulated directly under its own measure. Paths are split
//! into fixed-size chunks; chunk `k` draws from ChaCha8 stream `k` keyed by the
//! seed, and partial statistics are merged in chunk order, so results do not
//! depend on the number of worker threads.

use ambistop_core::linear::{compute_exponents, UcLinear};
use ambistop_core::radial::{RadialFundamentals, UcRadial};
use ambistop_core::types::{GeneratorKind, Segment, ValueFunction};
use ambistop_core::{AmbiguityParams, GeneratorDescriptor, Payoff, Solution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// Pairs (or single paths without antithetics) per random stream.
const CHUNK: u64 = 256;
/// Floor of the radius chart.
const Z_FLOOR: f64 = 1e-10;
const ADMISSIBILITY_SLACK: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum McError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("inadmissible prior: {0}")]
    Inadmissible(String),
    #[error(transparent)]
    Core(#[from] ambistop_core::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub n_paths: u64,
    /// Simulation cap `T_max`; also the terminal time of [`simulate_linear`]
    /// and [`simulate_radial`].
    pub horizon: f64,
    pub seed: u64,
    pub antithetic: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { dt: 1e-3, n_paths: 100_000, horizon: 200.0, seed: 0, antithetic: true }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), McError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(McError::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if self.n_paths < 100 {
            return Err(McError::Config(format!("n_paths must be at least 100, got {}", self.n_paths)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(McError::Config(format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.horizon / self.dt > 1e7 {
            return Err(McError::Config("horizon/dt exceeds 1e7 steps".into()));
        }
        Ok(())
    }

    fn steps(&self) -> u64 {
        (self.horizon / self.dt).round().max(1.0) as u64
    }

    /// Independent samples: antithetic pairs or single paths.
    fn units(&self) -> u64 {
        if self.antithetic {
            self.n_paths.div_ceil(2)
        } else {
            self.n_paths
        }
    }
}

/// Which scalar reduction the simulated process belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduction {
    /// `y = aᵀx`.
    Linear,
    /// `y = ‖x‖²`.
    Radial,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PriorStrategy {
    /// `θ = κ·â·sgn(y − c)`.
    WorstCaseLinear { c: f64 },
    /// `θ = κ·x/‖x‖·sgn(‖x‖² − c)`.
    WorstCaseRadial { c: f64 },
    /// Any worst-case generator reported by a solver.
    Generator(GeneratorDescriptor),
    /// Constant `θ`. For the linear reduction the first axis is `â`;
    /// for the radial one `theta` has `dim` entries and the full state is simulated.
    ConstantDirection { theta: Vec<f64> },
    /// `θ ≡ 0`.
    Null,
}

impl PriorStrategy {
    fn check(&self, p: &AmbiguityParams, red: Reduction) -> Result<(), McError> {
        let bound = p.kappa + ADMISSIBILITY_SLACK;
        match self {
            PriorStrategy::ConstantDirection { theta } => {
                let n = theta.iter().map(|t| t * t).sum::<f64>().sqrt();
                if !(n <= bound) {
                    return Err(McError::Inadmissible(format!("|theta| = {n} exceeds kappa = {}", p.kappa)));
                }
                if red == Reduction::Radial && theta.len() != p.dim as usize {
                    return Err(McError::Inadmissible(format!(
                        "theta has {} entries, dimension is {}",
                        theta.len(),
                        p.dim
                    )));
                }
                if theta.is_empty() {
                    return Err(McError::Inadmissible("theta is empty".into()));
                }
            }
            PriorStrategy::Generator(g) => {
                if !(g.kappa <= bound) {
                    return Err(McError::Inadmissible(format!(
                        "generator magnitude {} exceeds kappa = {}",
                        g.kappa, p.kappa
                    )));
                }
            }
            PriorStrategy::WorstCaseLinear { .. } if red != Reduction::Linear => {
                return Err(McError::Inadmissible("linear worst case used for a radial process".into()));
            }
            PriorStrategy::WorstCaseRadial { .. } if red != Reduction::Radial => {
                return Err(McError::Inadmissible("radial worst case used for a linear process".into()));
            }
            _ => {}
        }
        Ok(())
    }
}

/// Simulation kernel for one (reduction, prior) pair.
#[derive(Debug, Clone)]
enum Kernel {
    /// Scalar `y` with drift `−‖a‖·θ_â(y)`.
    Linear { a_norm: f64, theta: ScalarTheta },
    /// Radius chart `z = √y` with drift `(d−1)/(2z) − θ_r(z²)`; the
    /// `1/z` term is taken implicitly.
    RadialZ { half_dm1: f64, theta: ScalarTheta },
    /// Full state `x ∈ ℝ^d` with drift `−θ`.
    RadialFull { theta: Vec<f64> },
}

#[derive(Debug, Clone)]
enum ScalarTheta {
    Zero,
    /// Projection on the reduced direction and full norm of a constant vector.
    Constant { proj: f64, norm: f64 },
    Switching(GeneratorDescriptor),
}

impl ScalarTheta {
    #[inline]
    fn at(&self, y: f64) -> f64 {
        match self {
            ScalarTheta::Zero => 0.0,
            ScalarTheta::Constant { proj, .. } => *proj,
            ScalarTheta::Switching(g) => g.kappa * g.direction(y),
        }
    }

    fn norm(&self) -> f64 {
        match self {
            ScalarTheta::Zero => 0.0,
            ScalarTheta::Constant { norm, .. } => *norm,
            ScalarTheta::Switching(g) => g.kappa,
        }
    }
}

impl Kernel {
    fn new(p: &AmbiguityParams, red: Reduction, prior: &PriorStrategy) -> Result<Self, McError> {
        prior.check(p, red)?;
        let switching = |kind| ScalarTheta::Switching(GeneratorDescriptor { kind, kappa: p.kappa });
        Ok(match red {
            Reduction::Linear => {
                let theta = match prior {
                    PriorStrategy::WorstCaseLinear { c } => switching(GeneratorKind::SignSwitchLinear { c: *c }),
                    PriorStrategy::Generator(g) => ScalarTheta::Switching(g.clone()),
                    PriorStrategy::ConstantDirection { theta } => ScalarTheta::Constant {
                        proj: theta[0],
                        norm: theta.iter().map(|t| t * t).sum::<f64>().sqrt(),
                    },
                    PriorStrategy::Null => ScalarTheta::Zero,
                    PriorStrategy::WorstCaseRadial { .. } => unreachable!(),
                };
                Kernel::Linear { a_norm: p.a_norm, theta }
            }
            Reduction::Radial => {
                let theta = match prior {
                    PriorStrategy::WorstCaseRadial { c } => switching(GeneratorKind::SignSwitchRadial { c: *c }),
                    PriorStrategy::Generator(g) => ScalarTheta::Switching(g.clone()),
                    PriorStrategy::ConstantDirection { theta } => {
                        return Ok(Kernel::RadialFull { theta: theta.clone() })
                    }
                    PriorStrategy::Null => ScalarTheta::Zero,
                    PriorStrategy::WorstCaseLinear { .. } => unreachable!(),
                };
                Kernel::RadialZ { half_dm1: 0.5 * (p.dim as f64 - 1.0), theta }
            }
        })
    }

    fn noise_dim(&self) -> usize {
        match self {
            Kernel::RadialFull { theta } => theta.len(),
            _ => 1,
        }
    }

    fn init(&self, y0: f64) -> Vec<f64> {
        match self {
            Kernel::Linear { .. } => vec![y0],
            Kernel::RadialZ { .. } => vec![y0.sqrt()],
            Kernel::RadialFull { theta } => {
                let mut x = vec![0.0; theta.len()];
                x[0] = y0.sqrt();
                x
            }
        }
    }

    #[inline]
    fn y(&self, s: &[f64]) -> f64 {
        match self {
            Kernel::Linear { .. } => s[0],
            Kernel::RadialZ { .. } => s[0] * s[0],
            Kernel::RadialFull { .. } => s.iter().map(|v| v * v).sum(),
        }
    }

    /// One Euler step driven by `sign·xi`; returns the norm of the `θ` used.
    #[inline]
    fn step(&self, s: &mut [f64], xi: &[f64], sign: f64, dt: f64, sqdt: f64, stats: &mut Stats) -> f64 {
        match self {
            Kernel::Linear { a_norm, theta } => {
                let th = theta.at(s[0]);
                s[0] += -a_norm * th * dt + a_norm * sqdt * sign * xi[0];
                theta.norm()
            }
            Kernel::RadialZ { half_dm1, theta } => {
                // Drift-implicit in the singular term: z' = b + h·dt/z' has the
                // positive root below, so no step can cross the origin.
                let z = s[0];
                let b = z - theta.at(z * z) * dt + sqdt * sign * xi[0];
                let q = (b * b + 4.0 * half_dm1 * dt).sqrt();
                let next = if b >= 0.0 { 0.5 * (b + q) } else { 2.0 * half_dm1 * dt / (q - b) };
                if next < Z_FLOOR {
                    stats.guard_hits += 1;
                    s[0] = Z_FLOOR;
                } else {
                    s[0] = next;
                }
                theta.norm()
            }
            Kernel::RadialFull { theta } => {
                let mut n2 = 0.0;
                for ((x, t), w) in s.iter_mut().zip(theta).zip(xi) {
                    *x += -t * dt + sqdt * sign * w;
                    n2 += t * t;
                }
                n2.sqrt()
            }
        }
    }
}

/// Running mean and centered sum of squares (Chan et al. merge).
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, o: Moments) -> Moments {
        if self.n == 0 {
            return o;
        }
        if o.n == 0 {
            return self;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        Moments {
            n,
            mean: self.mean + d * o.n as f64 / n as f64,
            m2: self.m2 + o.m2 + d * d * (self.n as f64 * o.n as f64) / n as f64,
        }
    }

    fn std_error(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        (self.m2.max(0.0) / (self.n as f64 - 1.0) / self.n as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy)]
struct Stats {
    moments: Moments,
    paths: u64,
    stopped: u64,
    max_theta: f64,
    guard_hits: u64,
    y_min: f64,
    y_max: f64,
}

impl Default for Stats {
    fn default() -> Self {
        Stats {
            moments: Moments::default(),
            paths: 0,
            stopped: 0,
            max_theta: 0.0,
            guard_hits: 0,
            y_min: f64::INFINITY,
            y_max: f64::NEG_INFINITY,
        }
    }
}

impl Stats {
    fn merge(self, o: Stats) -> Stats {
        Stats {
            moments: self.moments.merge(o.moments),
            paths: self.paths + o.paths,
            stopped: self.stopped + o.stopped,
            max_theta: self.max_theta.max(o.max_theta),
            guard_hits: self.guard_hits + o.guard_hits,
            y_min: self.y_min.min(o.y_min),
            y_max: self.y_max.max(o.y_max),
        }
    }

    #[inline]
    fn visit(&mut self, y: f64) {
        self.y_min = self.y_min.min(y);
        self.y_max = self.y_max.max(y);
    }
}

/// Runs `units` independent samples. Each sample is a path or an antithetic
/// pair; `body` receives the stream, the path count of the unit and the sign
/// convention, and returns the unit's sample value.
fn run_units<F>(cfg: &SimConfig, body: F) -> Stats
where
    F: Fn(&mut ChaCha8Rng, &mut Stats) -> f64 + Sync,
{
    let units = cfg.units();
    let chunks = units.div_ceil(CHUNK);
    let partials: Vec<Stats> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(k);
            let mut st = Stats::default();
            let n = CHUNK.min(units - k * CHUNK);
            for _ in 0..n {
                let v = body(&mut rng, &mut st);
                st.moments.push(v);
            }
            st
        })
        .collect();
    partials.into_iter().fold(Stats::default(), Stats::merge)
}

#[inline]
fn fill_normals(rng: &mut ChaCha8Rng, xi: &mut [f64]) {
    for v in xi.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
}

/// Terminal states of a simulated batch.
#[derive(Debug, Clone)]
pub struct PathBatch {
    /// `Y` at the horizon; antithetic twins are adjacent.
    pub terminal: Vec<f64>,
    pub horizon: f64,
    /// Largest `‖θ‖` used on any step of any path.
    pub max_theta_norm: f64,
    /// Steps on which the radius guard replaced a nonpositive value.
    pub guard_hits: u64,
    /// Smallest reduced state visited.
    pub min_state: f64,
}

fn simulate(p: &AmbiguityParams, red: Reduction, prior: &PriorStrategy, y0: f64, cfg: &SimConfig) -> Result<PathBatch, McError> {
    cfg.validate()?;
    let kernel = Kernel::new(p, red, prior)?;
    let steps = cfg.steps();
    let (dt, sqdt) = (cfg.dt, cfg.dt.sqrt());
    let twins = if cfg.antithetic { 2 } else { 1 };
    let units = cfg.units();
    let chunks = units.div_ceil(CHUNK);
    let parts: Vec<(Vec<f64>, Stats)> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(k);
            let mut st = Stats::default();
            let n = CHUNK.min(units - k * CHUNK);
            let mut out = Vec::with_capacity((n * twins) as usize);
            let mut xi = vec![0.0; kernel.noise_dim()];
            for _ in 0..n {
                let mut s: Vec<Vec<f64>> = (0..twins).map(|_| kernel.init(y0)).collect();
                for _ in 0..steps {
                    fill_normals(&mut rng, &mut xi);
                    for (j, sj) in s.iter_mut().enumerate() {
                        let sign = if j == 0 { 1.0 } else { -1.0 };
                        let th = kernel.step(sj, &xi, sign, dt, sqdt, &mut st);
                        st.max_theta = st.max_theta.max(th);
                        st.visit(kernel.y(sj));
                    }
                }
                out.extend(s.iter().map(|sj| kernel.y(sj)));
            }
            (out, st)
        })
        .collect();
    let mut terminal = Vec::with_capacity((units * twins) as usize);
    let mut st = Stats::default();
    for (v, s) in parts {
        terminal.extend(v);
        st = st.merge(s);
    }
    Ok(PathBatch {
        terminal,
        horizon: steps as f64 * dt,
        max_theta_norm: st.max_theta,
        guard_hits: st.guard_hits,
        min_state: st.y_min,
    })
}

/// Simulates `y = aᵀx` up to the horizon.
pub fn simulate_linear(p: &AmbiguityParams, prior: &PriorStrategy, y0: f64, cfg: &SimConfig) -> Result<PathBatch, McError> {
    simulate(p, Reduction::Linear, prior, y0, cfg)
}

/// Simulates `y = ‖x‖²` up to the horizon, in the radius chart unless the
/// prior is a constant vector.
pub fn simulate_radial(p: &AmbiguityParams, prior: &PriorStrategy, y0: f64, cfg: &SimConfig) -> Result<PathBatch, McError> {
    if !(y0 > 0.0) {
        return Err(McError::Config(format!("radial start must be positive, got {y0}")));
    }
    simulate(p, Reduction::Radial, prior, y0, cfg)
}

/// First-exit rule from a union of open intervals, optionally periodic.
#[derive(Debug, Clone, PartialEq)]
pub struct StoppingRule {
    /// Open continuation intervals; ends may be infinite.
    pub intervals: Vec<(f64, f64)>,
    /// `(origin, period)`: states are reduced into `[origin, origin + period)`
    /// before the lookup.
    pub period: Option<(f64, f64)>,
}

impl StoppingRule {
    pub fn from_intervals(intervals: Vec<(f64, f64)>) -> Self {
        StoppingRule { intervals, period: None }
    }

    /// Stop immediately everywhere.
    pub fn immediate() -> Self {
        StoppingRule { intervals: Vec::new(), period: None }
    }

    /// Continuation set of a solved problem.
    pub fn from_solution(sol: &Solution) -> Self {
        let ValueFunction::Piecewise { breaks, segments, period, .. } = &sol.value;
        let mut intervals = Vec::new();
        for (i, s) in segments.iter().enumerate() {
            if let Segment::Continue { .. } = s {
                let a = if i == 0 { f64::NEG_INFINITY } else { breaks[i - 1] };
                let b = if i == breaks.len() { f64::INFINITY } else { breaks[i] };
                intervals.push((a, b));
            }
        }
        StoppingRule { intervals, period: *period }
    }

    #[inline]
    pub fn continues(&self, y: f64) -> bool {
        let y = match self.period {
            Some((o, p)) => o + (y - o).rem_euclid(p),
            None => y,
        };
        self.intervals.iter().any(|(a, b)| *a < y && y < *b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MCEstimate {
    pub mean: f64,
    pub std_error: f64,
    /// Independent samples behind `std_error` (pairs when antithetic).
    pub n_effective: u64,
    /// Fraction of paths stopped before the horizon.
    pub fraction_stopped: f64,
    /// Upper bound on the downward bias from paths cut at the horizon.
    pub cap_bias_bound: f64,
    pub max_theta_norm: f64,
    pub guard_hits: u64,
}

/// Discounted payoff at the first grid time outside the continuation set.
pub fn estimate_stopped_value(
    p: &AmbiguityParams,
    red: Reduction,
    prior: &PriorStrategy,
    y0: f64,
    cfg: &SimConfig,
    rule: &StoppingRule,
    payoff: &Payoff,
) -> Result<MCEstimate, McError> {
    cfg.validate()?;
    let kernel = Kernel::new(p, red, prior)?;
    if red == Reduction::Radial && !(y0 > 0.0) {
        return Err(McError::Config(format!("radial start must be positive, got {y0}")));
    }
    if !rule.continues(y0) {
        return Ok(MCEstimate {
            mean: payoff.eval(y0),
            std_error: 0.0,
            n_effective: cfg.units(),
            fraction_stopped: 1.0,
            cap_bias_bound: 0.0,
            max_theta_norm: 0.0,
            guard_hits: 0,
        });
    }
    let steps = cfg.steps();
    let (dt, sqdt, r) = (cfg.dt, cfg.dt.sqrt(), p.r);
    let twins = if cfg.antithetic { 2 } else { 1 };
    let st = run_units(cfg, |rng, st| {
        let mut xi = vec![0.0; kernel.noise_dim()];
        let mut s: Vec<Vec<f64>> = (0..twins).map(|_| kernel.init(y0)).collect();
        let mut alive = vec![true; twins];
        let mut total = 0.0;
        let mut left = twins;
        for k in 1..=steps {
            fill_normals(rng, &mut xi);
            for j in 0..twins {
                if !alive[j] {
                    continue;
                }
                let sign = if j == 0 { 1.0 } else { -1.0 };
                let th = kernel.step(&mut s[j], &xi, sign, dt, sqdt, st);
                st.max_theta = st.max_theta.max(th);
                let y = kernel.y(&s[j]);
                st.visit(y);
                if !rule.continues(y) {
                    alive[j] = false;
                    left -= 1;
                    st.stopped += 1;
                    total += (-r * k as f64 * dt).exp() * payoff.eval(y);
                }
            }
            if left == 0 {
                break;
            }
        }
        st.paths += twins as u64;
        total / twins as f64
    });
    let fraction_stopped = st.stopped as f64 / st.paths as f64;
    let sup = visited_sup(payoff, st.y_min.min(y0), st.y_max.max(y0));
    Ok(MCEstimate {
        mean: st.moments.mean,
        std_error: st.moments.std_error(),
        n_effective: st.moments.n,
        fraction_stopped,
        cap_bias_bound: (1.0 - fraction_stopped) * (-r * steps as f64 * dt).exp() * sup,
        max_theta_norm: st.max_theta,
        guard_hits: st.guard_hits,
    })
}

fn visited_sup(payoff: &Payoff, lo: f64, hi: f64) -> f64 {
    let mut pts: Vec<f64> = (0..=200).map(|i| lo + (hi - lo) * i as f64 / 200.0).collect();
    pts.extend(payoff.breakpoints().into_iter().filter(|b| *b >= lo && *b <= hi));
    pts.into_iter().map(|y| payoff.eval(y).abs()).fold(0.0, f64::max)
}

/// Estimates `E[e^{−rt}U_c(Y_t)]` at `t = t_check` under `prior` and returns
/// it together with `U_c(y0)`.
pub fn supermartingale_check(
    p: &AmbiguityParams,
    red: Reduction,
    c: f64,
    prior: &PriorStrategy,
    y0: f64,
    t_check: f64,
    cfg: &SimConfig,
) -> Result<(MCEstimate, f64), McError> {
    let cfg = SimConfig { horizon: t_check, ..cfg.clone() };
    cfg.validate()?;
    let kernel = Kernel::new(p, red, prior)?;
    let uc: Box<dyn Fn(f64) -> f64 + Sync> = match red {
        Reduction::Linear => {
            let u = UcLinear::new(compute_exponents(p)?, c);
            Box::new(move |y| u.value(y))
        }
        Reduction::Radial => {
            if !(y0 > 0.0) {
                return Err(McError::Config(format!("radial start must be positive, got {y0}")));
            }
            let u = UcRadial::new(RadialFundamentals::new(p)?, c)?;
            Box::new(move |y| u.value(y))
        }
    };
    let steps = cfg.steps();
    let (dt, sqdt) = (cfg.dt, cfg.dt.sqrt());
    let disc = (-p.r * steps as f64 * dt).exp();
    let twins = if cfg.antithetic { 2 } else { 1 };
    let st = run_units(&cfg, |rng, st| {
        let mut xi = vec![0.0; kernel.noise_dim()];
        let mut total = 0.0;
        let mut s: Vec<Vec<f64>> = (0..twins).map(|_| kernel.init(y0)).collect();
        for _ in 0..steps {
            fill_normals(rng, &mut xi);
            for (j, sj) in s.iter_mut().enumerate() {
                let sign = if j == 0 { 1.0 } else { -1.0 };
                let th = kernel.step(sj, &xi, sign, dt, sqdt, st);
                st.max_theta = st.max_theta.max(th);
            }
        }
        for sj in &s {
            total += disc * uc(kernel.y(sj));
        }
        st.paths += twins as u64;
        total / twins as f64
    });
    let est = MCEstimate {
        mean: st.moments.mean,
        std_error: st.moments.std_error(),
        n_effective: st.moments.n,
        fraction_stopped: 0.0,
        cap_bias_bound: 0.0,
        max_theta_norm: st.max_theta,
        guard_hits: st.guard_hits,
    };
    Ok((est, uc(y0)))
}

/// One-sample Kolmogorov–Smirnov distance between a sample and a CDF.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, x)| {
            let f = cdf(*x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}
