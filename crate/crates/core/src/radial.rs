//! Payoffs of the squared radius `y = ‖x‖²`.
//!
//! Under the worst-case prior `y` solves
//! `dY = (d − 2κ√Y·sgn(Y − c))dt + 2√Y dW`, so the excessive functions
//! solve `2yU'' + (d − 2σκ√y)U' − rU = 0` with `σ = +1` above `c` (branch 1)
//! and `σ = −1` below (branch 2). In `s = √y` the fundamental solutions are
//! `e^{(σκ−γ)s}·M(α_σ, d−1, 2γs)` and the same with `U` in place of `M`,
//! where `γ = √(κ² + 2r)` and `α_σ = (d−1)/2·(1 − σκ/γ)`.

use alloc::vec;
use alloc::vec::Vec;

use libm::{exp, log, pow, sqrt};

use crate::error::{Error, Result};
use crate::numerics::{adaptive_simpson, bisect, expand_bracket, golden_max, grid_peaks};
use crate::specfun::{gamma, gamma_upper, kummer_m_with, rgamma, tricomi_u_with, SpecFunConfig};
use crate::types::{
    AmbiguityParams, Excessive, GeneratorDescriptor, GeneratorKind, Payoff, Regime, Segment, Solution,
    ValueFunction,
};


/// Sign of the ambiguous drift term on branch `i ∈ {1, 2}`.
#[inline]
fn sigma(i: usize) -> f64 {
    if i == 1 {
        1.0
    } else {
        -1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialFundamentals {
    pub kappa: f64,
    pub r: f64,
    pub dim: u32,
    /// `√(κ² + 2r)`.
    pub gamma: f64,
    /// `(2γ)^{(d−1)/2}`, the limit of `ψ_1` at the origin.
    pub pre: f64,
    /// `a_{±κ} = ±κ(d−1)/(2γ)`.
    pub a_kappa_plus: f64,
    pub a_kappa_minus: f64,
    /// `d/2 − 1`.
    pub b: f64,
    /// Wronskian constants `γΓ(d−1)/Γ(α_i)`.
    pub b1: f64,
    pub b2: f64,
    /// Derivatives come from finite differences when the analytic path
    /// failed the Wronskian self-check.
    pub numeric_derivatives: bool,
    cfg: SpecFunConfig,
}

impl RadialFundamentals {
    pub fn new(p: &AmbiguityParams) -> Result<Self> {
        Self::with_config(p, SpecFunConfig::default())
    }

    pub fn with_config(p: &AmbiguityParams, cfg: SpecFunConfig) -> Result<Self> {
        p.validate()?;
        cfg.validate()?;
        let d = p.dim as f64;
        let gamma = sqrt(p.kappa * p.kappa + 2.0 * p.r);
        let a_plus = p.kappa * (d - 1.0) / (2.0 * gamma);
        let mut f = RadialFundamentals {
            kappa: p.kappa,
            r: p.r,
            dim: p.dim,
            gamma,
            pre: pow(2.0 * gamma, 0.5 * (d - 1.0)),
            a_kappa_plus: a_plus,
            a_kappa_minus: -a_plus,
            b: 0.5 * d - 1.0,
            b1: gamma * gamma_fn(d - 1.0) * rgamma(0.5 * (d - 1.0) - a_plus),
            b2: gamma * gamma_fn(d - 1.0) * rgamma(0.5 * (d - 1.0) + a_plus),
            numeric_derivatives: false,
            cfg,
        };
        let mut worst: f64 = 0.0;
        for i in [1, 2] {
            for y in [0.01, 1.0, 25.0] {
                let w = f.wronskian(i, y)?;
                worst = worst.max((w / f.b_const(i) - 1.0).abs());
            }
        }
        if !(worst < 1e-12) {
            f.numeric_derivatives = true;
        }
        Ok(f)
    }

    pub fn alpha(&self, i: usize) -> f64 {
        0.5 * (self.dim as f64 - 1.0) * (1.0 - sigma(i) * self.kappa / self.gamma)
    }

    pub fn b_const(&self, i: usize) -> f64 {
        if i == 1 {
            self.b1
        } else {
            self.b2
        }
    }

    /// `ψ_i` (`second = false`) or `φ_i` and its `y`-derivative, analytically.
    fn one_analytic(&self, i: usize, y: f64, second: bool) -> Result<(f64, f64)> {
        if !(y > 0.0) {
            return Err(Error::Domain { what: "radial fundamental", value: y });
        }
        let s = sqrt(y);
        let a = self.alpha(i);
        let b = self.dim as f64 - 1.0;
        let z = 2.0 * self.gamma * s;
        let beta = sigma(i) * self.kappa - self.gamma;
        let e = self.pre * exp(beta * s);
        let (v0, v1) = if second {
            (
                tricomi_u_with(&self.cfg, a, b, z)?,
                -a * tricomi_u_with(&self.cfg, a + 1.0, b + 1.0, z)?,
            )
        } else {
            (
                kummer_m_with(&self.cfg, a, b, z)?,
                a / b * kummer_m_with(&self.cfg, a + 1.0, b + 1.0, z)?,
            )
        };
        Ok((e * v0, e * (beta * v0 + 2.0 * self.gamma * v1) * 0.5 / s))
    }

    fn one(&self, i: usize, y: f64, second: bool) -> Result<(f64, f64)> {
        let mut out = self.one_analytic(i, y, second)?;
        if self.numeric_derivatives {
            let h = (1e-5 * y.max(1.0)).min(0.25 * y);
            let v = |x: f64| self.one_analytic(i, x, second).map(|t| t.0);
            out.1 = (8.0 * (v(y + h)? - v(y - h)?) - (v(y + 2.0 * h)? - v(y - 2.0 * h)?)) / (12.0 * h);
        }
        Ok(out)
    }

    fn pair(&self, i: usize, y: f64) -> Result<[(f64, f64); 2]> {
        Ok([self.one(i, y, false)?, self.one(i, y, true)?])
    }

    /// `(ψ_i(y), ψ_i'(y))`.
    pub fn psi(&self, i: usize, y: f64) -> Result<(f64, f64)> {
        self.one(i, y, false)
    }

    /// `(φ_i(y), φ_i'(y))`.
    pub fn phi(&self, i: usize, y: f64) -> Result<(f64, f64)> {
        self.one(i, y, true)
    }

    pub fn s_prime(&self, i: usize, y: f64) -> f64 {
        exp(sigma(i) * 2.0 * self.kappa * sqrt(y) - 0.5 * self.dim as f64 * log(y))
    }

    pub fn m_prime(&self, i: usize, y: f64) -> f64 {
        1.0 / (2.0 * y * self.s_prime(i, y))
    }

    /// `(ψ_i'φ_i − φ_i'ψ_i)/S_i'`.
    pub fn wronskian(&self, i: usize, y: f64) -> Result<f64> {
        let [(p, dp), (q, dq)] = self.pair(i, y)?;
        Ok((dp * q - dq * p) / self.s_prime(i, y))
    }

    /// Second derivative of any solution on branch `i` from its value and slope.
    pub fn second_deriv(&self, i: usize, y: f64, h: f64, dh: f64) -> f64 {
        (self.r * h - (self.dim as f64 - 2.0 * sigma(i) * self.kappa * sqrt(y)) * dh) / (2.0 * y)
    }
}

fn gamma_fn(x: f64) -> f64 {
    gamma(x)
}

/// Coefficients of `ĥ_ic = p·ψ_i + q·φ_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Combo {
    p: f64,
    q: f64,
}

/// `U_c` for a reference point `c ∈ [0, ∞]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UcRadial {
    pub c: f64,
    pub f: RadialFundamentals,
    h: [Combo; 2],
}

impl UcRadial {
    pub fn new(f: RadialFundamentals, c: f64) -> Result<Self> {
        if !(c >= 0.0) {
            return Err(Error::Domain { what: "radial reference point", value: c });
        }
        let none = Combo { p: 0.0, q: 0.0 };
        if c == 0.0 {
            return Ok(UcRadial { c, f, h: [Combo { p: 1.0, q: 0.0 }, none] });
        }
        if c == f64::INFINITY {
            return Ok(UcRadial { c, f, h: [none, Combo { p: 0.0, q: 1.0 }] });
        }
        let mut h = [none; 2];
        for i in [1, 2] {
            let [(_, dp), (_, dq)] = f.pair(i, c)?;
            // Normalizing by the Wronskian computed at c gives U_c(c) = 1 to
            // rounding even where the closed-form constant is less accurate.
            let w = f.wronskian(i, c)? * f.s_prime(i, c);
            h[i - 1] = Combo { p: -dq / w, q: dp / w };
        }
        Ok(UcRadial { c, f, h })
    }

    /// Branch `i` continued to all `y > 0`, with its first two derivatives.
    pub fn branch(&self, i: usize, y: f64) -> Result<(f64, f64, f64)> {
        let Combo { p, q } = self.h[i - 1];
        let (mut h, mut dh) = (0.0, 0.0);
        if p != 0.0 {
            let (a, da) = self.f.psi(i, y)?;
            h += p * a;
            dh += p * da;
        }
        if q != 0.0 {
            let (b, db) = self.f.phi(i, y)?;
            h += q * b;
            dh += q * db;
        }
        Ok((h, dh, self.f.second_deriv(i, y, h, dh)))
    }

    pub fn branch_index(&self, y: f64) -> usize {
        if self.c == f64::INFINITY || (self.c > 0.0 && y < self.c) {
            2
        } else {
            1
        }
    }

    pub fn eval3(&self, y: f64) -> Result<(f64, f64, f64)> {
        if y == self.c {
            let i = self.branch_index(y);
            let (h, dh, d2) = self.branch(i, y)?;
            return Ok((h, if self.c > 0.0 { 0.0 } else { dh }, d2));
        }
        self.branch(self.branch_index(y), y)
    }

    /// `U_c(y)`; NaN if a special function fails.
    pub fn value(&self, y: f64) -> f64 {
        if y == self.c && self.c > 0.0 && self.c.is_finite() {
            return 1.0;
        }
        self.eval3(y).map_or(f64::NAN, |t| t.0)
    }

    pub fn deriv(&self, y: f64) -> f64 {
        self.eval3(y).map_or(f64::NAN, |t| t.1)
    }
}

fn radial_generator(kappa: f64, c: f64) -> GeneratorDescriptor {
    GeneratorDescriptor { kind: GeneratorKind::SignSwitchRadial { c }, kappa }
}

/// Root of `r(√y − K) + κ − (d−1)/(2√y)`, below which `F = √y − K` is
/// not superharmonic for the outward branch.
pub fn y_tilde_0(p: &AmbiguityParams, strike: f64) -> Result<f64> {
    let d = p.dim as f64;
    let g = |s: f64| p.r * (s - strike) + p.kappa - (d - 1.0) / (2.0 * s);
    let (lo, hi) = expand_bracket(g, 1e-12, 1.0, 200, "y_tilde_0")?;
    let s = bisect(g, lo.max(1e-300), hi, 1e-15)?;
    Ok(s * s)
}

/// First-order condition of `(√w − K)/h` and of `(K − √w)/h`: both vanish
/// where `h/(2√w) = h'·(√w − K)`.
fn straddle_foc(h: f64, dh: f64, w: f64, strike: f64) -> f64 {
    let s = sqrt(w);
    h / (2.0 * s) - dh * (s - strike)
}

/// Single-boundary threshold: root of `(√y − K)ψ_1' − ψ_1/(2√y)` above
/// `max(ỹ_0, K²)`.
pub fn y_k_star(f: &RadialFundamentals, p: &AmbiguityParams, strike: f64) -> Result<f64> {
    let lo = y_tilde_0(p, strike)?.max(strike * strike);
    let foc = |t: f64| {
        let w = exp(t);
        f.psi(1, w).map_or(f64::NAN, |(h, dh)| -straddle_foc(h, dh, w, strike))
    };
    let t0 = log(lo) + 1e-12;
    let (a, b) = expand_bracket(foc, t0, 0.05, 200, "single-boundary straddle threshold")?;
    Ok(exp(bisect(foc, a, b, 1e-15)?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StraddleSolution {
    pub regime: Regime,
    pub y1_star: f64,
    pub y2_star: Option<f64>,
    pub c_star: f64,
    pub lambda_star: f64,
    pub strike: f64,
    /// Single-boundary candidate and its regime test value `Π_0(y_K*)·(2γ)^{(d−1)/2}`.
    pub y_k_star: f64,
    pub regime_test: f64,
    pub u: UcRadial,
}

impl StraddleSolution {
    pub fn value(&self, y: f64) -> f64 {
        let lo = self.y2_star.unwrap_or(f64::NEG_INFINITY);
        if y > lo && y < self.y1_star {
            self.lambda_star * self.u.value(y)
        } else {
            (sqrt(y.max(0.0)) - self.strike).abs()
        }
    }

    pub fn into_solution(self) -> Solution {
        let payoff = Payoff::Straddle { strike: self.strike };
        let cont = Segment::Continue { lambda: self.lambda_star, u: Excessive::Radial(self.u) };
        let (breaks, segments, thresholds) = match self.y2_star {
            Some(y2) => (
                vec![y2, self.y1_star],
                vec![Segment::Stop, cont, Segment::Stop],
                vec![y2, self.y1_star],
            ),
            None => (vec![self.y1_star], vec![cont, Segment::Stop], vec![self.y1_star]),
        };
        Solution {
            regime: self.regime,
            c_star: self.c_star,
            thresholds,
            lambda_star: self.lambda_star,
            value: ValueFunction::Piecewise { payoff, breaks, segments, period: None },
            generator: radial_generator(self.u.f.kappa, self.c_star),
        }
    }
}

/// One side of the matching function: the best ratio and where it is attained.
#[derive(Debug, Clone, Copy)]
struct SideSup {
    value: f64,
    at: f64,
    interior: bool,
}

struct Straddle<'a> {
    f: &'a RadialFundamentals,
    strike: f64,
    upper_cap: f64,
}

impl Straddle<'_> {
    fn k2(&self) -> f64 {
        self.strike * self.strike
    }

    // FOC in t = ln w on the branch that U_c uses at w.
    fn foc(&self, u: &UcRadial, t: f64) -> f64 {
        let w = exp(t);
        u.eval3(w).map_or(f64::NAN, |(h, dh, _)| straddle_foc(h, dh, w, self.strike))
    }

    /// `sup_{w ≥ K²} F/U_c`.
    fn upper(&self, u: &UcRadial) -> Result<SideSup> {
        let c = u.c;
        let k2 = self.k2();
        let start = c.max(k2);
        let mut best = SideSup { value: f64::NEG_INFINITY, at: start, interior: false };
        if c > k2 {
            best = SideSup { value: sqrt(c) - self.strike, at: c, interior: false };
        }
        let t0 = log(start) + 1e-12;
        let g = |t: f64| -self.foc(u, t);
        if let Ok((a, b)) = bounded_bracket(g, t0, 0.05, log(self.upper_cap)) {
            let w = exp(bisect(g, a, b, 1e-14)?);
            let v = (sqrt(w) - self.strike) / u.value(w);
            if v > best.value {
                best = SideSup { value: v, at: w, interior: true };
            }
        }
        Ok(best)
    }

    /// `sup_{w ≤ K²} F/U_c`.
    fn lower(&self, u: &UcRadial) -> Result<SideSup> {
        let c = u.c;
        let k2 = self.k2();
        let start = c.min(k2);
        let mut best = SideSup { value: f64::NEG_INFINITY, at: start, interior: false };
        if c < k2 {
            best = SideSup { value: self.strike - sqrt(c), at: c, interior: false };
        }
        let t0 = log(start) - 1e-12;
        let g = |t: f64| self.foc(u, t);
        if let Ok((a, b)) = bounded_bracket(g, t0, -0.05, log(1e-14)) {
            let w = exp(bisect(g, a, b, 1e-14)?);
            let v = (self.strike - sqrt(w)) / u.value(w);
            if v > best.value {
                best = SideSup { value: v, at: w, interior: true };
            }
        }
        Ok(best)
    }

    fn matching(&self, c: f64) -> Result<(f64, SideSup, SideSup)> {
        let u = UcRadial::new(*self.f, c)?;
        let up = self.upper(&u)?;
        let lo = self.lower(&u)?;
        Ok((up.value - lo.value, up, lo))
    }
}

/// Like `expand_bracket` but never steps past `limit`.
fn bounded_bracket<F: FnMut(f64) -> f64>(mut g: F, near: f64, step: f64, limit: f64) -> Result<(f64, f64)> {
    let g0 = g(near);
    let mut s = step;
    let mut prev = near;
    loop {
        let mut x = near + s;
        let last = (step > 0.0 && x >= limit) || (step < 0.0 && x <= limit);
        if last {
            x = limit;
        }
        let gx = g(x);
        if gx == 0.0 || (gx.signum() != g0.signum() && !gx.is_nan()) {
            return Ok(if x < prev { (x, prev) } else { (prev, x) });
        }
        if last {
            return Err(Error::BracketFailure { what: "straddle first-order condition", lo: near.min(x), hi: near.max(x) });
        }
        prev = x;
        s *= 2.0;
    }
}

/// Counts sign changes of a first-order condition on a log grid.
fn count_roots<F: Fn(f64) -> f64>(g: F, lo: f64, hi: f64, n: usize) -> usize {
    let (a, b) = (log(lo), log(hi));
    let mut roots = 0;
    let mut prev = g(a);
    for k in 1..=n {
        let v = g(a + (b - a) * k as f64 / n as f64);
        if v.signum() != prev.signum() && v != 0.0 && prev != 0.0 {
            roots += 1;
        }
        if v != 0.0 {
            prev = v;
        }
    }
    roots
}

/// Straddle `|√y − K|`: one upper boundary when waiting from the origin
/// beats the payoff `K`, otherwise a continuation interval around `K²`.
pub fn solve_straddle(p: &AmbiguityParams, strike: f64) -> Result<StraddleSolution> {
    if !(strike > 0.0 && strike.is_finite()) {
        return Err(Error::InvalidParams("strike must be positive"));
    }
    let f = RadialFundamentals::new(p)?;
    let yk = y_k_star(&f, p, strike)?;
    let (psi, _) = f.psi(1, yk)?;
    let lambda0 = (sqrt(yk) - strike) / psi;
    let test = lambda0 * f.pre;
    if test >= strike {
        return Ok(StraddleSolution {
            regime: Regime::SingleUpperBoundary,
            y1_star: yk,
            y2_star: None,
            c_star: 0.0,
            lambda_star: lambda0,
            strike,
            y_k_star: yk,
            regime_test: test,
            u: UcRadial::new(f, 0.0)?,
        });
    }
    let st = Straddle { f: &f, strike, upper_cap: 16.0 * yk };
    let k2 = strike * strike;
    let d0 = st.matching(k2)?.0;
    // D grows with c: search on the side that restores the sign change.
    let (mut lo, mut hi) = (k2, k2);
    if d0 < 0.0 {
        loop {
            hi *= 2.0;
            if st.matching(hi)?.0 >= 0.0 {
                break;
            }
            if hi > 1e12 {
                return Err(Error::BracketFailure { what: "straddle reference point", lo: k2, hi });
            }
            lo = hi;
        }
    } else {
        loop {
            lo *= 0.5;
            if st.matching(lo)?.0 <= 0.0 {
                break;
            }
            if lo < 1e-12 {
                return Err(Error::BracketFailure { what: "straddle reference point", lo, hi: k2 });
            }
            hi = lo;
        }
    }
    let mut failed = None;
    let c = bisect(
        |c| match st.matching(c) {
            Ok(m) => m.0,
            Err(e) => {
                failed = Some(e);
                f64::NAN
            }
        },
        lo,
        hi,
        1e-8,
    );
    if let Some(e) = failed {
        return Err(e);
    }
    let c = c?;
    let (_, up, dn) = st.matching(c)?;
    if !(up.interior && dn.interior) {
        return Err(Error::NoConvergence("straddle boundaries not interior at the matching point"));
    }
    let u = UcRadial::new(f, c)?;
    let nu = count_roots(|t| st.foc(&u, t), c.max(k2) * (1.0 + 1e-9), st.upper_cap, 400);
    if nu > 1 {
        return Err(Error::InnerMaxNotUnique { side: "upper", roots: nu });
    }
    let nl = count_roots(|t| st.foc(&u, t), 1e-10, c.min(k2) * (1.0 - 1e-9), 400);
    if nl > 1 {
        return Err(Error::InnerMaxNotUnique { side: "lower", roots: nl });
    }
    Ok(StraddleSolution {
        regime: Regime::TwoBoundary,
        y1_star: up.at,
        y2_star: Some(dn.at),
        c_star: c,
        lambda_star: 0.5 * (up.value + dn.value),
        strike,
        y_k_star: yk,
        regime_test: test,
        u,
    })
}

/// Strike where the regime test holds with equality.
pub fn critical_strike(p: &AmbiguityParams) -> Result<f64> {
    let f = RadialFundamentals::new(p)?;
    let g = |k: f64| -> f64 {
        let Ok(yk) = y_k_star(&f, p, k) else { return f64::NAN };
        f.psi(1, yk).map_or(f64::NAN, |(psi, _)| (sqrt(yk) - k) / psi * f.pre - k)
    };
    bisect(g, 0.01, 10.0, 1e-10)
}

/// Normalizing constant of `m_c'(y) = ½y^{d/2−1}e^{−2κ|√y−√c|}`.
fn stationary_normalizer(p: &AmbiguityParams, c: f64) -> Result<f64> {
    let d = p.dim as f64;
    let k2 = 2.0 * p.kappa;
    let tc = k2 * sqrt(c);
    let upper = exp(tc) * gamma_upper(d, tc)?;
    let inner = adaptive_simpson(|t| exp((d - 1.0) * log(t.max(1e-300)) + t - tc), 0.0, tc, 1e-13);
    Ok(pow(k2, -d) * (upper + inner))
}

/// Stationary law of the worst-case squared radius with reference `c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryRadial {
    pub kappa: f64,
    pub dim: u32,
    pub c: f64,
    pub normalizer: f64,
}

impl StationaryRadial {
    pub fn new(p: &AmbiguityParams, c: f64) -> Result<Self> {
        p.validate()?;
        if p.kappa == 0.0 {
            return Err(Error::NoStationaryLaw);
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Domain { what: "stationary reference point", value: c });
        }
        Ok(StationaryRadial { kappa: p.kappa, dim: p.dim, c, normalizer: stationary_normalizer(p, c)? })
    }

    pub fn density(&self, y: f64) -> f64 {
        if !(y > 0.0) {
            return 0.0;
        }
        let d = self.dim as f64;
        0.5 * exp((0.5 * d - 1.0) * log(y) - 2.0 * self.kappa * (sqrt(y) - sqrt(self.c)).abs()) / self.normalizer
    }
}

/// Stationary density of the worst-case squared radius with reference `c`.
pub fn stationary_density_radial(p: &AmbiguityParams, c: f64, y: f64) -> Result<f64> {
    let law = StationaryRadial::new(p, c)?;
    if !(y > 0.0) {
        return Err(Error::Domain { what: "stationary density", value: y });
    }
    Ok(law.density(y))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Representation {
    pub value: f64,
    pub c_star: f64,
    pub lambda_star: f64,
}

fn log_grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let (a, b) = (log(lo), log(hi));
    (0..n).map(move |k| exp(a + (b - a) * k as f64 / (n - 1) as f64))
}

/// Refined local maxima of `F/U_c` on a log grid over `[w_lo, w_hi]`;
/// `None` when the ratio peaks at the top of the window.
fn ratio_peaks(payoff: &Payoff, u: &UcRadial, w_lo: f64, w_hi: f64) -> Option<Vec<(f64, f64)>> {
    let ws: Vec<f64> = log_grid(w_lo, w_hi, 161).collect();
    let extra: Vec<f64> = payoff.breakpoints().into_iter().filter(|b| *b > 0.0).collect();
    let peaks = grid_peaks(|w| payoff.eval(w) / u.value(w), &ws, &extra);
    let top = peaks.iter().copied().max_by(|a, b| a.1.total_cmp(&b.1))?;
    if top.0 >= ws[ws.len() - 2] {
        return None;
    }
    Some(peaks)
}

fn ratio_sup(payoff: &Payoff, u: &UcRadial, w_lo: f64, w_hi: f64) -> Option<(f64, f64)> {
    let peaks = ratio_peaks(payoff, u, w_lo, w_hi)?;
    peaks.into_iter().map(|(w, v)| (v, w)).max_by(|a, b| a.0.total_cmp(&b.0))
}

fn windows(f: &RadialFundamentals, payoff: &Payoff, y: f64) -> (f64, f64) {
    let span = payoff.breakpoints().iter().fold(y, |m, b| m.max(*b));
    let w_hi = 4.0 * span + 400.0 / (f.gamma * f.gamma);
    (1e-8 * w_hi, w_hi)
}

/// Pointwise value `inf_c λ(c)·U_c(y)` over `c ∈ [0, ∞]`.
pub fn value_via_representation(p: &AmbiguityParams, payoff: &Payoff, y: f64) -> Result<Representation> {
    payoff.validate()?;
    if !(y > 0.0) {
        return Err(Error::Domain { what: "radial representation", value: y });
    }
    let f = RadialFundamentals::new(p)?;
    let (w_lo, w_hi) = windows(&f, payoff, y);
    let objective = |c: f64| -> Option<(f64, f64)> {
        let u = UcRadial::new(f, c).ok()?;
        ratio_sup(payoff, &u, w_lo, w_hi).map(|(lam, _)| (lam * u.value(y), lam))
    };
    let mut grid = vec![0.0];
    grid.extend(log_grid(1e-6 * w_hi, 0.5 * w_hi, 25));
    let mut best: Option<(f64, f64, f64, Option<usize>)> = None;
    for (k, &c) in grid.iter().enumerate() {
        if let Some((v, lam)) = objective(c) {
            if best.is_none_or(|b| v < b.0) {
                best = Some((v, c, lam, Some(k)));
            }
        }
    }
    if let Some((v, lam)) = objective(f64::INFINITY) {
        if best.is_none_or(|b| v < b.0) {
            best = Some((v, f64::INFINITY, lam, None));
        }
    }
    let Some((mut v, mut c, mut lam, idx)) = best else {
        return Err(Error::UnboundedRatio { direction: "every reference point" });
    };
    if let Some(k) = idx {
        let a = grid[k.saturating_sub(1)];
        let b = grid[(k + 1).min(grid.len() - 1)];
        let (cr, negv) = golden_max(|c| objective(c).map_or(f64::NEG_INFINITY, |o| -o.0), a, b, 1e-7 * b.max(1e-12));
        if -negv < v {
            v = -negv;
            c = cr;
            lam = objective(cr).map_or(f64::NAN, |o| o.1);
        }
    }
    Ok(Representation { value: v, c_star: c, lambda_star: lam })
}

/// Generic radial payoffs: the representation at `y_ref` fixes `c*` and
/// `λ*`; the boundaries are where `λ*·U_{c*}` meets the payoff around `y_ref`.
pub fn solve_generic(p: &AmbiguityParams, payoff: &Payoff, y_ref: f64) -> Result<Solution> {
    let rep = value_via_representation(p, payoff, y_ref)?;
    let f = RadialFundamentals::new(p)?;
    let u = UcRadial::new(f, rep.c_star)?;
    let lambda = rep.lambda_star;
    let gap = |w: f64| lambda * u.value(w) - payoff.eval(w);
    let stop_here = gap(y_ref) <= 1e-9 * payoff.eval(y_ref).abs().max(1.0);
    let make = |breaks: Vec<f64>, segments: Vec<Segment>| Solution {
        regime: Regime::GenericRepresentation,
        c_star: rep.c_star,
        thresholds: breaks.clone(),
        lambda_star: lambda,
        value: ValueFunction::Piecewise { payoff: payoff.clone(), breaks, segments, period: None },
        generator: radial_generator(p.kappa, rep.c_star),
    };
    if stop_here {
        return Ok(make(Vec::new(), vec![Segment::Stop]));
    }
    let (w_lo, w_hi) = windows(&f, payoff, y_ref);
    let peaks = ratio_peaks(payoff, &u, w_lo, w_hi)
        .ok_or(Error::UnboundedRatio { direction: "at the optimal reference point" })?;
    // The boundaries are the maximizers of F/U_{c*} next to y_ref.
    let tight = |v: f64| v >= lambda - 1e-7 * lambda.abs().max(1e-300);
    let lower = peaks.iter().rev().find(|(w, v)| *w < y_ref && tight(*v)).map(|p| p.0);
    let upper = peaks.iter().find(|(w, v)| *w > y_ref && tight(*v)).map(|p| p.0);
    let cont = Segment::Continue { lambda, u: Excessive::Radial(u) };
    match (lower, upper) {
        (Some(a), Some(b)) => Ok(make(vec![a, b], vec![Segment::Stop, cont, Segment::Stop])),
        (None, Some(b)) => Ok(make(vec![b], vec![cont, Segment::Stop])),
        _ => Err(Error::UnboundedRatio { direction: "continuation set does not close above" }),
    }
}

/// Euclidean-ambiguity bounds for the sup-norm problem in the plane with
/// payoff `y`: levels `κ√2` (lower) and `κ` (upper).
pub fn sandwich_bounds(p2: &AmbiguityParams, payoff: &Payoff) -> Result<(Solution, Solution)> {
    if p2.dim != 2 {
        return Err(Error::InvalidParams("sandwich bounds need dim = 2"));
    }
    if *payoff != Payoff::IdentityRadial {
        return Err(Error::Unsupported("sandwich bounds are implemented for the identity payoff"));
    }
    let f0 = RadialFundamentals::new(&p2.with_kappa(0.0))?;
    let y_ref = 0.5 / (f0.gamma * f0.gamma);
    let lower = solve_generic(&p2.with_kappa(p2.kappa * core::f64::consts::SQRT_2), payoff, y_ref)?;
    let upper = solve_generic(p2, payoff, y_ref)?;
    Ok((lower, upper))
}

/// Dispatches on the payoff kind; `y_ref` is used by the generic path.
pub fn solve(p: &AmbiguityParams, payoff: &Payoff, y_ref: Option<f64>) -> Result<Solution> {
    match payoff {
        Payoff::Straddle { strike } => solve_straddle(p, *strike).map(StraddleSolution::into_solution),
        Payoff::IdentityRadial | Payoff::UserTable(_) => {
            let y = match y_ref {
                Some(y) => y,
                None => {
                    let b = payoff.breakpoints();
                    let lo = b.iter().copied().filter(|x| *x > 0.0).fold(f64::INFINITY, f64::min);
                    let hi = b.iter().copied().fold(0.0, f64::max);
                    if lo.is_finite() {
                        sqrt(lo * hi)
                    } else {
                        1.0
                    }
                }
            };
            solve_generic(p, payoff, y)
        }
        _ => Err(Error::Unsupported("linear payoff in the radial case")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p5() -> AmbiguityParams {
        AmbiguityParams::radial(0.02, 0.1, 5).unwrap()
    }

    #[test]
    fn origin_limit_of_psi1() {
        let f = RadialFundamentals::new(&p5()).unwrap();
        let want = pow(2.0 * sqrt(0.0004 + 0.2), 2.0);
        assert!((f.pre - want).abs() < 1e-14);
        let (v, _) = f.psi(1, 1e-12).unwrap();
        assert!((v / want - 1.0).abs() < 1e-6);
    }

    #[test]
    fn wronskian_constants() {
        let f = RadialFundamentals::new(&p5()).unwrap();
        assert!(!f.numeric_derivatives);
        // γΓ(4)/Γ(α_i), evaluated at 30 digits.
        assert!((f.b1 - 2.782_063_016_47).abs() < 1e-9, "{}", f.b1);
        assert!((f.b2 - 2.579_858_320_70).abs() < 1e-9, "{}", f.b2);
        for i in [1, 2] {
            for y in [1e-4, 0.3, 4.0, 50.0, 300.0] {
                let w = f.wronskian(i, y).unwrap();
                assert!((w / f.b_const(i) - 1.0).abs() < 1e-9, "i={i} y={y} {w}");
            }
        }
    }

    #[test]
    fn fundamentals_monotone_for_plain_bessel() {
        let f = RadialFundamentals::new(&AmbiguityParams::radial(0.0, 0.1, 2).unwrap()).unwrap();
        let mut last = (0.0, f64::INFINITY);
        for y in log_grid(1e-3, 100.0, 60) {
            let (a, _) = f.psi(1, y).unwrap();
            let (b, _) = f.phi(1, y).unwrap();
            assert!(a > last.0 && b < last.1);
            last = (a, b);
        }
    }

    #[test]
    fn uc_boundary_conditions_and_residual() {
        let p = p5();
        let f = RadialFundamentals::new(&p).unwrap();
        for c in [0.5, 9.0, 40.0] {
            let u = UcRadial::new(f, c).unwrap();
            assert_eq!(u.value(c), 1.0);
            for i in [1, 2] {
                let (h, dh, _) = u.branch(i, c).unwrap();
                assert!((h - 1.0).abs() < 1e-13, "{h}");
                assert!(dh.abs() < 1e-13);
            }
            let e = 1e-4 * c;
            assert!(((u.value(c + e) - u.value(c - e)) / (2.0 * e)).abs() < 1e-8);
            for y in log_grid(0.25 * c, 4.0 * c, 41) {
                let i = u.branch_index(y);
                let d1 = |x: f64| u.branch(i, x).unwrap().1;
                let h = 1e-3 * y;
                let d2 = (8.0 * (d1(y + h) - d1(y - h)) - (d1(y + 2.0 * h) - d1(y - 2.0 * h))) / (12.0 * h);
                let (v, dv, _) = u.branch(i, y).unwrap();
                let drift = p.dim as f64 - 2.0 * sigma(i) * p.kappa * sqrt(y);
                let terms = [2.0 * y * d2, drift * dv, p.r * v];
                let res = terms[0] + terms[1] - terms[2];
                let scale = terms.iter().fold(0.0f64, |m, t| m.max(t.abs()));
                assert!(res.abs() <= 1e-8 * scale, "c={c} y={y} res={res}");
                let (a, b) = (u.branch(1, y).unwrap().0, u.branch(2, y).unwrap().0);
                assert!((u.value(y) - a.max(b)).abs() <= 1e-12 * v);
            }
        }
    }

    #[test]
    fn uc_strictly_convex_and_blows_up() {
        let f = RadialFundamentals::new(&p5()).unwrap();
        let u = UcRadial::new(f, 9.0).unwrap();
        let ys: Vec<f64> = log_grid(1e-3, 300.0, 120).collect();
        for w in ys.windows(3) {
            let (a, b, c) = (u.value(w[0]), u.value(w[1]), u.value(w[2]));
            let slope1 = (b - a) / (w[1] - w[0]);
            let slope2 = (c - b) / (w[2] - w[1]);
            assert!(slope2 > slope1);
        }
        assert!(u.value(1e-6) > 1e3);
        assert!(u.value(2000.0) > 1e3);
    }

    #[test]
    fn convexity_integral_identity() {
        let p = p5();
        let f = RadialFundamentals::new(&p).unwrap();
        let c = 9.0;
        let u = UcRadial::new(f, c).unwrap();
        let y = 20.0;
        let (_, _, d2) = u.branch(1, y).unwrap();
        let integral = adaptive_simpson(
            |t| (2.0 * p.kappa * (sqrt(y) - sqrt(t)) + p.r * (y - t)) * u.branch(1, t).unwrap().0 * f.m_prime(1, t),
            c,
            y,
            1e-12,
        );
        let lhs = 2.0 * y * d2 / f.s_prime(1, y);
        let rhs = p.r / f.s_prime(1, c) + p.r * integral;
        assert!((lhs - rhs).abs() < 1e-8 * lhs.abs(), "{lhs} {rhs}");
    }

    #[test]
    fn entrance_boundary_flux_stabilizes() {
        let f = RadialFundamentals::new(&p5()).unwrap();
        let u = UcRadial::new(f, 9.0).unwrap();
        for i in [1, 2] {
            let a = u.branch(i, 1e-8).unwrap().1 / f.s_prime(i, 1e-8);
            let b = u.branch(i, 1e-10).unwrap().1 / f.s_prime(i, 1e-10);
            assert!(a.is_finite() && (a / b - 1.0).abs() < 1e-3, "i={i} {a} {b}");
        }
    }

    #[test]
    fn y_tilde_root() {
        let p = p5();
        let y = y_tilde_0(&p, 4.0).unwrap();
        let s = sqrt(y);
        assert!((0.1 * (s - 4.0) + 0.02 - 2.0 / s).abs() < 1e-12);
    }

    #[test]
    fn single_boundary_straddle() {
        let p = p5();
        let s = solve_straddle(&p, 0.85).unwrap();
        assert_eq!(s.regime, Regime::SingleUpperBoundary);
        assert!(s.y1_star > 0.85 * 0.85);
        assert!(s.y1_star > y_tilde_0(&p, 0.85).unwrap());
        let y = s.y1_star;
        let e = 1e-6 * y;
        let d_in = (s.value(y - e) - s.value(y - 2.0 * e)) / e;
        let d_out = 0.5 / sqrt(y);
        assert!((d_in - d_out).abs() < 1e-5, "{d_in} {d_out}");
        assert!(s.value(1e-9) >= 0.85);
    }

    #[test]
    fn two_boundary_straddle_smooth_fit() {
        let s = solve_straddle(&p5(), 4.0).unwrap();
        assert_eq!(s.regime, Regime::TwoBoundary);
        let y2 = s.y2_star.unwrap();
        assert!(y2 < 16.0 && 16.0 < s.y1_star);
        assert!(y2 < s.c_star && s.c_star < s.y1_star);
        for (y, slope) in [(s.y1_star, 0.5 / sqrt(s.y1_star)), (y2, -0.5 / sqrt(y2))] {
            let d = s.lambda_star * s.u.deriv(y);
            assert!((d - slope).abs() < 1e-6, "y={y} {d} {slope}");
            assert!((s.value(y) - (sqrt(y) - 4.0).abs()).abs() < 1e-9);
        }
    }

    #[test]
    fn y_k_star_increases_with_strike() {
        let p = p5();
        let f = RadialFundamentals::new(&p).unwrap();
        let a = y_k_star(&f, &p, 1.0).unwrap();
        let b = y_k_star(&f, &p, 2.0).unwrap();
        assert!(a < b);
        assert!(a > 1.0 && b > 4.0);
    }

    #[test]
    fn critical_strike_flips_regime() {
        let p = p5();
        let k = critical_strike(&p).unwrap();
        assert_eq!(solve_straddle(&p, 0.99 * k).unwrap().regime, Regime::SingleUpperBoundary);
        assert_eq!(solve_straddle(&p, 1.01 * k).unwrap().regime, Regime::TwoBoundary);
    }

    #[test]
    fn stationary_density_normalized() {
        let p = p5();
        let c = 9.072_78;
        let law = StationaryRadial::new(&p, c).unwrap();
        let total = adaptive_simpson(|s| 2.0 * s * law.density(s * s), 0.0, 3000.0, 1e-12);
        assert!((total - 1.0).abs() < 1e-8, "{total}");
        let at_c = stationary_density_radial(&p, c, c).unwrap();
        let direct = adaptive_simpson(
            |s| s * pow(s * s, 1.5) * exp(-0.04 * (s - sqrt(c)).abs()),
            0.0,
            3000.0,
            1e-6,
        );
        assert!((at_c - 0.5 * pow(c, 1.5) / direct).abs() < 1e-9 * at_c);
        assert_eq!(
            stationary_density_radial(&p.with_kappa(0.0), c, 1.0),
            Err(Error::NoStationaryLaw)
        );
    }

    #[test]
    fn stationary_mode() {
        let p = AmbiguityParams::radial(1.0, 0.1, 5).unwrap();
        let c = 0.5;
        let law = StationaryRadial::new(&p, c).unwrap();
        let (ym, _) = golden_max(|y| law.density(y), 0.01, 20.0, 1e-10);
        // d/dy[(d/2−1)ln y − 2κ(√y − √c)] = 0 at √y = (d/2−1)/κ.
        let want = 2.25;
        assert!((ym - want).abs() < 1e-6, "{ym}");
    }

    #[test]
    fn sandwich_identity_payoff() {
        let p = AmbiguityParams::radial(0.05, 0.1, 2).unwrap();
        let (lo, hi) = sandwich_bounds(&p, &Payoff::IdentityRadial).unwrap();
        assert!(lo.thresholds.last().unwrap() <= hi.thresholds.last().unwrap());
        for y in log_grid(0.01, 10.0, 20) {
            assert!(lo.value(y) <= hi.value(y) + 1e-9);
        }
        // With c* = 0 the boundary solves ψ_1(y) = y·ψ_1'(y).
        let f = RadialFundamentals::new(&p).unwrap();
        let foc = |y: f64| {
            let (h, dh) = f.psi(1, y).unwrap();
            h - y * dh
        };
        let (a, b) = expand_bracket(foc, 0.1, 0.1, 100, "t").unwrap();
        let y = bisect(foc, a, b, 1e-13).unwrap();
        assert!((hi.thresholds[0] - y).abs() < 1e-6 * y, "{:?} {y}", hi.thresholds);
        let same = AmbiguityParams::radial(0.0, 0.1, 2).unwrap();
        let (a, b) = sandwich_bounds(&same, &Payoff::IdentityRadial).unwrap();
        assert_eq!(a.thresholds, b.thresholds);
    }
}
