//! Payoffs of a linear combination `y = aᵀx`.
//!
//! Under the worst-case prior `y` is a Brownian motion with volatility `‖a‖`
//! and drift `−κ‖a‖·sgn(y − c)`. The excessive functions `U_c` solve
//! `½‖a‖²U'' − κ‖a‖·sgn(y − c)·U' − rU = 0` with `U_c(c) = 1`, `U_c'(c) = 0`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use libm::{cos, exp, pow, sin, sqrt};

use crate::error::{Error, Result};
use crate::numerics::{bisect, bisect_newton, expand_bracket, golden_max, grid_peaks};
use crate::types::{
    periodic_generator, AmbiguityParams, Excessive, GeneratorDescriptor, GeneratorKind, Payoff,
    Regime, Segment, Solution, ValueFunction, TWO_PI,
};

const ROOT_TOL: f64 = 1e-12;

/// Roots of `½‖a‖²β² − κ‖a‖β − r = 0` and their mirrors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponents {
    pub psi: f64,
    pub phi: f64,
    pub psi_hat: f64,
    pub phi_hat: f64,
}

pub fn compute_exponents(p: &AmbiguityParams) -> Result<Exponents> {
    p.validate()?;
    let s = sqrt(p.kappa * p.kappa + 2.0 * p.r);
    let psi = (p.kappa + s) / p.a_norm;
    // (κ − s)/‖a‖ rewritten to avoid cancellation for small κ² + 2r.
    let phi = -2.0 * p.r / (p.a_norm * (p.kappa + s));
    Ok(Exponents { psi, phi, psi_hat: -phi, phi_hat: -psi })
}

/// `U_c` for a reference point `c ∈ [−∞, ∞]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UcLinear {
    pub c: f64,
    pub ex: Exponents,
}

impl UcLinear {
    pub fn new(ex: Exponents, c: f64) -> Self {
        UcLinear { c, ex }
    }

    // H(s) and its derivatives for s = |y − c| ≥ 0.
    fn branch(&self, s: f64) -> (f64, f64, f64) {
        let Exponents { psi, phi, .. } = self.ex;
        let (ep, eq) = (exp(phi * s), exp(psi * s));
        let k = 1.0 / (psi - phi);
        (
            k * (psi * ep - phi * eq),
            k * psi * phi * (ep - eq),
            k * psi * phi * (phi * ep - psi * eq),
        )
    }

    /// `(U, U', U'')` at `y`.
    pub fn eval3(&self, y: f64) -> (f64, f64, f64) {
        let psi = self.ex.psi;
        if self.c == f64::NEG_INFINITY {
            let e = exp(psi * y);
            return (e, psi * e, psi * psi * e);
        }
        if self.c == f64::INFINITY {
            let e = exp(-psi * y);
            return (e, -psi * e, psi * psi * e);
        }
        let t = y - self.c;
        let (h, d1, d2) = self.branch(t.abs());
        if t >= 0.0 {
            (h, d1, d2)
        } else {
            (h, -d1, d2)
        }
    }

    pub fn value(&self, y: f64) -> f64 {
        self.eval3(y).0
    }

    pub fn deriv(&self, y: f64) -> f64 {
        self.eval3(y).1
    }

    pub fn deriv2(&self, y: f64) -> f64 {
        self.eval3(y).2
    }

    /// `h_1c`, the branch used on `y ≥ c`, continued to all of ℝ.
    pub fn h1(&self, y: f64) -> f64 {
        let Exponents { psi, phi, .. } = self.ex;
        let t = y - self.c;
        (psi * exp(phi * t) - phi * exp(psi * t)) / (psi - phi)
    }

    /// `h_2c`, the mirrored branch used on `y ≤ c`, continued to all of ℝ.
    pub fn h2(&self, y: f64) -> f64 {
        let Exponents { psi, phi, .. } = self.ex;
        let t = y - self.c;
        (-phi * exp(-psi * t) + psi * exp(-phi * t)) / (psi - phi)
    }

    /// Left-hand side of the ODE; zero up to rounding.
    pub fn ode_residual(&self, p: &AmbiguityParams, y: f64) -> f64 {
        let (u, d1, d2) = self.eval3(y);
        let sgn = if self.c == f64::NEG_INFINITY {
            1.0
        } else if self.c == f64::INFINITY || y < self.c {
            -1.0
        } else {
            1.0
        };
        0.5 * p.a_norm * p.a_norm * d2 - p.kappa * sgn * p.a_norm * d1 - p.r * u
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Representation {
    pub value: f64,
    pub c_star: f64,
    pub lambda_star: f64,
}

/// Search windows for the reference point and for the ratio maximizer.
fn windows(ex: &Exponents, payoff: &Payoff, y: f64) -> (f64, f64) {
    let scale = 1.0 / ex.psi.min(ex.psi_hat);
    let span = payoff.breakpoints().iter().fold(y.abs(), |m, b| m.max(b.abs()));
    let l = 2.0 * span + 10.0 * scale;
    (l, l + 40.0 * scale)
}

/// Refined local maxima of `F/U_c` on `[−w_lim, w_lim]`; `None` when the
/// ratio peaks at a window edge (it grows towards infinity).
fn ratio_peaks(payoff: &Payoff, uc: &UcLinear, w_lim: f64, n: usize) -> Option<Vec<(f64, f64)>> {
    let ratio = |w: f64| payoff.eval(w) / uc.value(w);
    let h = 2.0 * w_lim / (n - 1) as f64;
    let ws: Vec<f64> = (0..n).map(|i| -w_lim + i as f64 * h).collect();
    let mut extra = Vec::new();
    for b in payoff.breakpoints() {
        extra.push(b);
        extra.push(b - 1e-13 * b.abs().max(1.0));
    }
    let peaks = grid_peaks(ratio, &ws, &extra);
    let top = peaks.iter().copied().max_by(|a, b| a.1.total_cmp(&b.1))?;
    let edge = 0.5 * h;
    if top.0 <= -w_lim + edge || top.0 >= w_lim - edge {
        return None;
    }
    Some(peaks)
}

/// `sup_w F(w)/U_c(w)` and its location.
fn ratio_sup(payoff: &Payoff, uc: &UcLinear, w_lim: f64, n: usize) -> Option<(f64, f64)> {
    let peaks = ratio_peaks(payoff, uc, w_lim, n)?;
    peaks.into_iter().map(|(w, v)| (v, w)).max_by(|a, b| a.0.total_cmp(&b.0))
}

/// Pointwise value `inf_c λ(c)·U_c(y)` with `λ(c) = sup_w F(w)/U_c(w)`.
pub fn value_via_representation(p: &AmbiguityParams, payoff: &Payoff, y: f64) -> Result<Representation> {
    let ex = compute_exponents(p)?;
    payoff.validate()?;
    let (l, w_lim) = windows(&ex, payoff, y);
    let n_w = 2001;
    let objective = |c: f64| -> Option<(f64, f64)> {
        let uc = UcLinear::new(ex, c);
        ratio_sup(payoff, &uc, w_lim, n_w).map(|(lam, _)| (lam * uc.value(y), lam))
    };
    let mut grid = Vec::with_capacity(203);
    for j in 0..=100 {
        let m = l * pow(10.0, -4.0 * (1.0 - j as f64 / 100.0));
        grid.push(-m);
        grid.push(m);
    }
    grid.push(0.0);
    grid.sort_by(f64::total_cmp);

    let mut best: Option<(f64, f64, f64)> = None;
    let mut best_idx = None;
    for (i, &c) in grid.iter().enumerate() {
        if let Some((v, lam)) = objective(c) {
            if best.is_none_or(|b| v < b.0) {
                best = Some((v, c, lam));
                best_idx = Some(i);
            }
        }
    }
    for c in [f64::NEG_INFINITY, f64::INFINITY] {
        if let Some((v, lam)) = objective(c) {
            if best.is_none_or(|b| v < b.0) {
                best = Some((v, c, lam));
                best_idx = None;
            }
        }
    }
    let Some(mut best) = best else {
        return Err(Error::UnboundedRatio { direction: "every reference point" });
    };
    if let Some(i) = best_idx {
        let lo = grid[i.saturating_sub(1)];
        let hi = grid[(i + 1).min(grid.len() - 1)];
        let (c, negv) = golden_max(
            |c| objective(c).map_or(f64::NEG_INFINITY, |(v, _)| -v),
            lo,
            hi,
            1e-8,
        );
        if -negv < best.0 {
            let lam = objective(c).map_or(f64::NAN, |o| o.1);
            best = (-negv, c, lam);
        }
    }
    Ok(Representation { value: best.0, c_star: best.1, lambda_star: best.2 })
}

fn piecewise(payoff: &Payoff, breaks: Vec<f64>, segments: Vec<Segment>, period: Option<(f64, f64)>) -> ValueFunction {
    ValueFunction::Piecewise { payoff: payoff.clone(), breaks, segments, period }
}

fn sign_switch(kappa: f64, c: f64) -> GeneratorDescriptor {
    GeneratorDescriptor { kind: GeneratorKind::SignSwitchLinear { c }, kappa }
}

/// Five-point central difference.
fn numeric_deriv<F: Fn(f64) -> f64>(f: &F, x: f64) -> f64 {
    let h = 1e-3 * x.abs().max(1.0);
    (8.0 * (f(x + h) - f(x - h)) - (f(x + 2.0 * h) - f(x - 2.0 * h))) / (12.0 * h)
}

/// Maximizes `F/U` on `[lo, hi]`, rejecting ratios with several interior
/// local maxima. The maximizer is polished on the first-order condition
/// `F'U − FU' = 0`. Returns `(argmax, ratio)`.
fn unimodal_ratio_max<F, U, D>(f: F, u: U, du: D, lo: f64, hi: f64, n: usize, log_grid: bool) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64,
    U: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let xs: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / (n - 1) as f64;
            if log_grid {
                lo * pow(hi / lo, t)
            } else {
                lo + t * (hi - lo)
            }
        })
        .collect();
    let rs: Vec<f64> = xs.iter().map(|&x| f(x) / u(x)).collect();
    let scale = rs.iter().fold(0.0f64, |m, r| m.max(r.abs())).max(1e-300);
    let mut maxima = 0;
    let mut best = 0;
    for i in 0..n {
        if rs[i] > rs[best] {
            best = i;
        }
        let left_lower = i == 0 || rs[i] > rs[i - 1] + 1e-12 * scale;
        let right_lower = i == n - 1 || rs[i] > rs[i + 1] + 1e-12 * scale;
        if left_lower && right_lower {
            maxima += 1;
        }
    }
    if maxima > 1 {
        return Err(Error::NotUnimodal);
    }
    if best == n - 1 {
        return Err(Error::UnboundedRatio { direction: "upper end of the search window" });
    }
    if best == 0 {
        return Ok((xs[0], rs[0]));
    }
    let (a, b) = (xs[best - 1], xs[best + 1]);
    let ratio = |x: f64| f(x) / u(x);
    let (mut x, _) = golden_max(ratio, a, b, 1e-10 * b.abs().max(1.0));
    let foc = |x: f64| numeric_deriv(&f, x) * u(x) - f(x) * du(x);
    if foc(a).signum() != foc(b).signum() {
        if let Ok(r) = bisect(foc, a, b, ROOT_TOL) {
            x = r;
        }
    }
    Ok((x, ratio(x)))
}

/// Even payoffs: reference point `c* = 0` and a symmetric continuation
/// interval `(−x*, x*)`.
pub fn solve_even(p: &AmbiguityParams, payoff: &Payoff) -> Result<Solution> {
    let ex = compute_exponents(p)?;
    payoff.validate()?;
    let scale = 1.0 / ex.psi.min(ex.psi_hat);
    let span = payoff.breakpoints().iter().fold(0.0f64, |m, b| m.max(b.abs()));
    let hi = span + 60.0 * scale;
    for i in 1..=64 {
        let y = hi * i as f64 / 64.0;
        let (a, b) = (payoff.eval(y), payoff.eval(-y));
        if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
            return Err(Error::NotEven { at: y });
        }
    }
    let u0 = UcLinear::new(ex, 0.0);
    let (x_star, lambda) = match payoff {
        Payoff::EvenKink { k1 } if *k1 > 0.0 => {
            // F/U_0 is maximal where U_0(x) = x·U_0'(x).
            let foc = |x: f64| {
                let (u, d1, _) = u0.eval3(x);
                u - x * d1
            };
            let dfoc = |x: f64| -x * u0.deriv2(x);
            let (lo, hi) = expand_bracket(foc, 0.0, scale, 200, "even first-order condition")?;
            let x = bisect_newton(foc, dfoc, lo, hi, ROOT_TOL, 3)?;
            (x, k1 * x / u0.value(x))
        }
        _ => unimodal_ratio_max(
            |x| payoff.eval(x),
            |x| u0.value(x),
            |x| u0.deriv(x),
            1e-6 * scale,
            hi,
            4001,
            true,
        )?,
    };
    let breaks = vec![-x_star, x_star];
    let segments = vec![
        Segment::Stop,
        Segment::Continue { lambda, u: Excessive::Linear(u0) },
        Segment::Stop,
    ];
    Ok(Solution {
        regime: Regime::SymmetricTwoSided,
        c_star: 0.0,
        thresholds: vec![-x_star, x_star],
        lambda_star: lambda,
        value: piecewise(payoff, breaks, segments, None),
        generator: sign_switch(p.kappa, 0.0),
    })
}

/// Intermediate quantities of the digital solver for a reference point `c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DigitalBranch {
    pub c: f64,
    pub x1: f64,
    pub x2: f64,
    pub pi1: f64,
    pub pi2: f64,
}

struct Digital {
    ex: Exponents,
    k1: f64,
    k2: f64,
    k3: f64,
}

impl Digital {
    fn scale(&self) -> f64 {
        1.0 / self.ex.psi.min(self.ex.psi_hat)
    }

    // Root of f1 = k2·U − U'·(k2x + k3) on x > max(c, −k3/k2).
    fn x1(&self, c: f64) -> Result<f64> {
        let u = UcLinear::new(self.ex, c);
        let (k2, k3) = (self.k2, self.k3);
        let f1 = |x: f64| {
            let (h, d1, _) = u.eval3(x);
            k2 * h - d1 * (k2 * x + k3)
        };
        let df1 = |x: f64| -u.deriv2(x) * (k2 * x + k3);
        let lo = c.max(-k3 / k2);
        let (a, b) = expand_bracket(f1, lo, self.scale(), 200, "digital upper first-order condition")?;
        bisect_newton(f1, df1, a, b, ROOT_TOL, 3)
    }

    // Root of f2 = U'·x − U on x < min(c, 0).
    fn x2(&self, c: f64) -> Result<f64> {
        let u = UcLinear::new(self.ex, c);
        let f2 = |x: f64| {
            let (h, d1, _) = u.eval3(x);
            d1 * x - h
        };
        let df2 = |x: f64| u.deriv2(x) * x;
        let hi = c.min(0.0);
        let (a, b) = expand_bracket(f2, hi, -self.scale(), 200, "digital lower first-order condition")?;
        bisect_newton(f2, df2, a, b, ROOT_TOL, 3)
    }

    fn branch(&self, c: f64) -> Result<DigitalBranch> {
        let u = UcLinear::new(self.ex, c);
        let x1 = self.x1(c)?;
        let x2 = self.x2(c)?;
        Ok(DigitalBranch {
            c,
            x1,
            x2,
            pi1: (self.k2 * x1 + self.k3) / u.value(x1),
            pi2: -self.k1 * x2 / u.value(x2),
        })
    }
}

/// Solves a sign-changing continuous function of `c` that is monotone,
/// expanding from `start` in the direction that restores the sign change.
fn monotone_root<G: FnMut(f64) -> Result<f64>>(mut g: G, start: f64, step: f64, increasing: bool, cap: Option<f64>) -> Result<f64> {
    let g0 = g(start)?;
    if g0 == 0.0 {
        return Ok(start);
    }
    // increasing & g0 > 0 → root below start.
    let dir = if (g0 > 0.0) == increasing { -1.0 } else { 1.0 };
    let mut s = step;
    let mut prev = start;
    let mut far = start;
    let mut found = false;
    for _ in 0..200 {
        far = start + dir * s;
        if let Some(cap) = cap {
            if dir > 0.0 && far >= cap {
                far = prev + 0.5 * (cap - prev);
            }
        }
        let gf = g(far)?;
        if gf == 0.0 {
            return Ok(far);
        }
        if gf.signum() != g0.signum() {
            found = true;
            break;
        }
        prev = far;
        s *= 2.0;
    }
    if !found {
        return Err(Error::BracketFailure { what: "reference point", lo: start.min(far), hi: start.max(far) });
    }
    let (lo, hi) = if prev < far { (prev, far) } else { (far, prev) };
    let mut err = None;
    let root = bisect(
        |c| match g(c) {
            Ok(v) => v,
            Err(e) => {
                err = Some(e);
                f64::NAN
            }
        },
        lo,
        hi,
        ROOT_TOL,
    );
    match (root, err) {
        (_, Some(e)) => Err(e),
        (r, None) => r,
    }
}

/// Asymmetric digital payoff `(k2·y + k3)·1{y ≥ 0} − k1·y·1{y < 0}`.
pub fn solve_digital(p: &AmbiguityParams, payoff: &Payoff) -> Result<Solution> {
    let Payoff::DigitalAsymmetric { k1, k2, k3 } = *payoff else {
        return Err(Error::Unsupported("solve_digital needs a DigitalAsymmetric payoff"));
    };
    if !(k1 > 0.0 && k2 > 0.0 && k3 > 0.0) {
        return Err(Error::InvalidParams("digital payoff needs k1, k2, k3 > 0"));
    }
    let dig = Digital { ex: compute_exponents(p)?, k1, k2, k3 };
    let step = 0.1 * dig.scale();

    // Matching Π1(x1(c)) = Π2(x2(c)); the difference increases in c.
    let c_hat = monotone_root(|c| dig.branch(c).map(|b| b.pi1 - b.pi2), 0.0, step, true, None)?;
    let b = dig.branch(c_hat)?;
    if b.x1 >= 0.0 {
        let u = UcLinear::new(dig.ex, c_hat);
        let lambda = 0.5 * (b.pi1 + b.pi2);
        return Ok(Solution {
            regime: Regime::DigitalSmoothFit,
            c_star: c_hat,
            thresholds: vec![b.x2, b.x1],
            lambda_star: lambda,
            value: piecewise(
                payoff,
                vec![b.x2, b.x1],
                vec![Segment::Stop, Segment::Continue { lambda, u: Excessive::Linear(u) }, Segment::Stop],
                None,
            ),
            generator: sign_switch(p.kappa, c_hat),
        });
    }

    // Kink at zero: Π2(x2(c)) = k3/U_c(0) with c < 0; the difference
    // decreases in c.
    let g = |c: f64| -> Result<f64> {
        let x2 = dig.x2(c)?;
        let u = UcLinear::new(dig.ex, c);
        Ok(-k1 * x2 / u.value(x2) - k3 / u.value(0.0))
    };
    let c_star = monotone_root(g, c_hat, step, false, Some(0.0))?;
    let u = UcLinear::new(dig.ex, c_star);
    let x2 = dig.x2(c_star)?;
    let lambda = k3 / u.value(0.0);
    Ok(Solution {
        regime: Regime::DigitalKinkAtZero,
        c_star,
        thresholds: vec![x2, 0.0],
        lambda_star: lambda,
        value: piecewise(
            payoff,
            vec![x2, 0.0],
            vec![Segment::Stop, Segment::Continue { lambda, u: Excessive::Linear(u) }, Segment::Stop],
            None,
        ),
        generator: sign_switch(p.kappa, c_star),
    })
}

/// First-order condition of `cos(y)/U_π(y)` on `y > π`, scaled by `ψ − φ`.
pub fn periodic_u0(ex: &Exponents, y: f64) -> f64 {
    let Exponents { psi, phi, .. } = *ex;
    let (s, c) = (sin(y), cos(y));
    (phi * exp(psi * (y - PI)) * (s + psi * c) - psi * exp(phi * (y - PI)) * (s + phi * c)) / (psi - phi)
}

fn periodic_solution(
    p: &AmbiguityParams,
    payoff: &Payoff,
    ex: Exponents,
    x_max: f64,
    period: f64,
    z: f64,
) -> Solution {
    let x0 = x_max + 0.5 * period;
    let u = UcLinear::new(ex, x0);
    let lambda = payoff.eval(z) / u.value(z);
    let y = 2.0 * x0 - z;
    let mut thresholds = Vec::new();
    for k in -1..=0 {
        let s = k as f64 * period;
        thresholds.push(y + s);
        thresholds.push(z + s);
    }
    thresholds.sort_by(f64::total_cmp);
    Solution {
        regime: Regime::PeriodicMultiBoundary,
        c_star: x0,
        thresholds,
        lambda_star: lambda,
        value: piecewise(
            payoff,
            vec![y, z],
            vec![Segment::Stop, Segment::Continue { lambda, u: Excessive::Linear(u) }, Segment::Stop],
            Some((x_max, period)),
        ),
        generator: periodic_generator(p.kappa, period, x_max),
    }
}

/// `F(y) = cos(y)`: one continuation interval `(2π − z*, z*)` around each
/// odd multiple of π.
pub fn solve_periodic_cosine(p: &AmbiguityParams) -> Result<Solution> {
    let ex = compute_exponents(p)?;
    let z = bisect(|y| periodic_u0(&ex, y), 1.5 * PI, TWO_PI, ROOT_TOL)?;
    Ok(periodic_solution(p, &Payoff::PeriodicCosine, ex, 0.0, TWO_PI, z))
}

/// Periodic payoffs, symmetric about `x0 = x1 + P/2` within each period.
/// `x1` marks the start of a period (a maximum of the payoff).
pub fn solve_symmetric_periodic(p: &AmbiguityParams, payoff: &Payoff, period: f64, x1: f64) -> Result<Solution> {
    let ex = compute_exponents(p)?;
    payoff.validate()?;
    if !(period > 0.0) {
        return Err(Error::InvalidParams("period must be positive"));
    }
    let x0 = x1 + 0.5 * period;
    for i in 0..=64 {
        let x = 0.5 * period * i as f64 / 64.0;
        let (a, b) = (payoff.eval(x0 - x), payoff.eval(x0 + x));
        if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
            return Err(Error::SymmetryViolation { at: x0 + x });
        }
        let (c, d) = (payoff.eval(x1 + x), payoff.eval(x1 + x + period));
        if (c - d).abs() > 1e-12 * c.abs().max(d.abs()).max(1.0) {
            return Err(Error::SymmetryViolation { at: x1 + x });
        }
    }
    let u = UcLinear::new(ex, x0);
    let span = 0.5 * period;
    let (z, _) = unimodal_ratio_max(
        |x| payoff.eval(x),
        |x| u.value(x),
        |x| u.deriv(x),
        x0 + 1e-9 * span,
        x1 + period,
        4001,
        false,
    )?;
    Ok(periodic_solution(p, payoff, ex, x1, period, z))
}

/// Generic payoffs through the pointwise representation. A reference
/// point is fixed where the representation gap `V − F` is largest; the
/// continuation set is the connected component around that point.
pub fn solve_generic(p: &AmbiguityParams, payoff: &Payoff) -> Result<Solution> {
    let ex = compute_exponents(p)?;
    payoff.validate()?;
    let bps = payoff.breakpoints();
    let (lo, hi) = match (bps.first(), bps.last()) {
        (Some(a), Some(b)) if b > a => (*a, *b),
        (Some(a), _) => (a - 1.0 / ex.psi, a + 1.0 / ex.psi),
        _ => (-1.0 / ex.psi, 1.0 / ex.psi),
    };
    let n = 41;
    let mut best: Option<(f64, f64, Representation)> = None;
    for i in 0..n {
        let y = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        let rep = value_via_representation(p, payoff, y)?;
        let gap = rep.value - payoff.eval(y);
        if best.as_ref().is_none_or(|b| gap > b.0) {
            best = Some((gap, y, rep));
        }
    }
    let (gap, y_ref, rep) = best.expect("nonempty grid");
    let stop_everywhere = gap <= 1e-9 * payoff.eval(y_ref).abs().max(1.0);
    if stop_everywhere {
        let c = rep.c_star;
        return Ok(Solution {
            regime: Regime::GenericRepresentation,
            c_star: c,
            thresholds: Vec::new(),
            lambda_star: rep.lambda_star,
            value: piecewise(payoff, Vec::new(), vec![Segment::Stop], None),
            generator: sign_switch(p.kappa, c),
        });
    }
    let u = UcLinear::new(ex, rep.c_star);
    let lambda = rep.lambda_star;
    let (_, w_lim) = windows(&ex, payoff, y_ref);
    let peaks = ratio_peaks(payoff, &u, w_lim, 4001)
        .ok_or(Error::UnboundedRatio { direction: "at the optimal reference point" })?;
    // The boundaries are the maximizers of F/U_{c*} next to y_ref.
    let tight = |v: f64| v >= lambda - 1e-7 * lambda.abs().max(1e-300);
    let a = peaks.iter().rev().find(|(w, v)| *w < y_ref && tight(*v)).map(|p| p.0);
    let b = peaks.iter().find(|(w, v)| *w > y_ref && tight(*v)).map(|p| p.0);
    let cont = Segment::Continue { lambda, u: Excessive::Linear(u) };
    let (breaks, segments) = match (a, b) {
        (Some(a), Some(b)) => (vec![a, b], vec![Segment::Stop, cont, Segment::Stop]),
        (None, Some(b)) => (vec![b], vec![cont, Segment::Stop]),
        (Some(a), None) => (vec![a], vec![Segment::Stop, cont]),
        (None, None) => return Err(Error::UnboundedRatio { direction: "continuation set does not close" }),
    };
    Ok(Solution {
        regime: Regime::GenericRepresentation,
        c_star: rep.c_star,
        thresholds: breaks.clone(),
        lambda_star: lambda,
        value: piecewise(payoff, breaks, segments, None),
        generator: sign_switch(p.kappa, rep.c_star),
    })
}

/// Dispatches on the payoff kind.
pub fn solve(p: &AmbiguityParams, payoff: &Payoff) -> Result<Solution> {
    match payoff {
        Payoff::DigitalAsymmetric { .. } => solve_digital(p, payoff),
        Payoff::EvenKink { .. } => solve_even(p, payoff),
        Payoff::PeriodicCosine => solve_periodic_cosine(p),
        Payoff::UserTable(_) => solve_generic(p, payoff),
        Payoff::Straddle { .. } | Payoff::IdentityRadial => {
            Err(Error::Unsupported("radial payoff in the linear case"))
        }
    }
}
