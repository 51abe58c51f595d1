//! Problem and solution vocabulary shared by the solvers and the
//! verification engines.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linear::UcLinear;
use crate::radial::UcRadial;

/// Ambiguity radius, discount rate and the factor structure of the problem.
///
/// `a_norm` is only read by the linear solvers and `dim` only by the radial
/// ones; the constructors fill the unused field with a harmless default.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmbiguityParams {
    pub kappa: f64,
    pub r: f64,
    pub a_norm: f64,
    pub dim: u32,
}

impl AmbiguityParams {
    pub fn linear(kappa: f64, r: f64, a_norm: f64) -> Result<Self> {
        let p = AmbiguityParams { kappa, r, a_norm, dim: 2 };
        p.validate()?;
        Ok(p)
    }

    pub fn radial(kappa: f64, r: f64, dim: u32) -> Result<Self> {
        let p = AmbiguityParams { kappa, r, a_norm: 1.0, dim };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(Error::InvalidParams("kappa must be finite and nonnegative"));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::InvalidParams("r must be finite and positive"));
        }
        if !(self.a_norm > 0.0 && self.a_norm.is_finite()) {
            return Err(Error::InvalidParams("a_norm must be finite and positive"));
        }
        if self.dim < 2 {
            return Err(Error::InvalidParams("dim must be at least 2"));
        }
        Ok(())
    }

    pub fn with_kappa(self, kappa: f64) -> Self {
        AmbiguityParams { kappa, ..self }
    }
}

/// Payoff as a function of the reduced coordinate.
#[derive(Debug, Clone, PartialEq)]
pub enum Payoff {
    /// `(k2·y + k3)·1{y ≥ 0} − k1·y·1{y < 0}`.
    DigitalAsymmetric { k1: f64, k2: f64, k3: f64 },
    /// `k1·|y|`.
    EvenKink { k1: f64 },
    /// `cos(y)`.
    PeriodicCosine,
    /// `|√y − K|` on `y ≥ 0`.
    Straddle { strike: f64 },
    /// `y` on `y ≥ 0`.
    IdentityRadial,
    /// Linear interpolation of `(y, F(y))` samples, constant outside the hull.
    UserTable(Vec<(f64, f64)>),
}

impl Payoff {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Payoff::DigitalAsymmetric { k1, k2, k3 } => {
                [k1, k2, k3].iter().all(|k| **k >= 0.0 && k.is_finite())
            }
            Payoff::EvenKink { k1 } => *k1 >= 0.0 && k1.is_finite(),
            Payoff::Straddle { strike } => *strike > 0.0 && strike.is_finite(),
            Payoff::PeriodicCosine | Payoff::IdentityRadial => true,
            Payoff::UserTable(s) => {
                !s.is_empty()
                    && s.iter().all(|(y, f)| y.is_finite() && f.is_finite())
                    && s.windows(2).all(|w| w[0].0 < w[1].0)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams("payoff parameters out of range"))
        }
    }

    /// Kinds that are only defined on `y ≥ 0`.
    pub fn is_radial_kind(&self) -> bool {
        matches!(self, Payoff::Straddle { .. } | Payoff::IdentityRadial)
    }

    pub fn evaluate(&self, y: f64) -> Result<f64> {
        if self.is_radial_kind() && !(y >= 0.0) {
            return Err(Error::Domain { what: "radial payoff", value: y });
        }
        Ok(self.eval(y))
    }

    /// Unchecked evaluation; radial kinds clamp negative arguments to 0.
    #[inline]
    pub fn eval(&self, y: f64) -> f64 {
        match self {
            Payoff::DigitalAsymmetric { k1, k2, k3 } => {
                if y >= 0.0 {
                    k2 * y + k3
                } else {
                    -k1 * y
                }
            }
            Payoff::EvenKink { k1 } => k1 * y.abs(),
            Payoff::PeriodicCosine => libm::cos(y),
            Payoff::Straddle { strike } => (libm::sqrt(y.max(0.0)) - strike).abs(),
            Payoff::IdentityRadial => y.max(0.0),
            Payoff::UserTable(s) => table_eval(s, y),
        }
    }

    /// Points where the payoff is not smooth; grids include them explicitly.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Payoff::DigitalAsymmetric { .. } | Payoff::EvenKink { .. } => alloc::vec![0.0],
            Payoff::Straddle { strike } => alloc::vec![strike * strike],
            Payoff::UserTable(s) => s.iter().map(|p| p.0).collect(),
            Payoff::PeriodicCosine | Payoff::IdentityRadial => Vec::new(),
        }
    }
}

fn table_eval(s: &[(f64, f64)], y: f64) -> f64 {
    let first = s[0];
    let last = s[s.len() - 1];
    if y <= first.0 {
        return first.1;
    }
    if y >= last.0 {
        return last.1;
    }
    let i = s.partition_point(|p| p.0 <= y);
    let (x0, f0) = s[i - 1];
    let (x1, f1) = s[i];
    f0 + (f1 - f0) * (y - x0) / (x1 - x0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    SymmetricTwoSided,
    PeriodicMultiBoundary,
    DigitalSmoothFit,
    DigitalKinkAtZero,
    GenericRepresentation,
    SingleUpperBoundary,
    TwoBoundary,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::SymmetricTwoSided => "SymmetricTwoSided",
            Regime::PeriodicMultiBoundary => "PeriodicMultiBoundary",
            Regime::DigitalSmoothFit => "DigitalSmoothFit",
            Regime::DigitalKinkAtZero => "DigitalKinkAtZero",
            Regime::GenericRepresentation => "GenericRepresentation",
            Regime::SingleUpperBoundary => "SingleUpperBoundary",
            Regime::TwoBoundary => "TwoBoundary",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorKind {
    /// `θ* = κ·â·sgn(y − c)`.
    SignSwitchLinear { c: f64 },
    /// `θ* = κ·x/‖x‖·sgn(‖x‖² − c)`.
    SignSwitchRadial { c: f64 },
    /// Direction `−1` on `[down_at, up_at)` and `+1` on `[up_at, down_at + period)`,
    /// repeated with the period.
    PeriodicSwitch { period: f64, down_at: f64, up_at: f64 },
}

/// Worst-case density generator as a function of the reduced state.
/// Its magnitude is always exactly `kappa`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorDescriptor {
    pub kind: GeneratorKind,
    pub kappa: f64,
}

impl GeneratorDescriptor {
    /// Sign of `θ*` relative to `â` (linear) or to the outward radial
    /// direction (radial). Ties go to `+1`.
    pub fn direction(&self, y: f64) -> f64 {
        match self.kind {
            GeneratorKind::SignSwitchLinear { c } | GeneratorKind::SignSwitchRadial { c } => {
                if y >= c {
                    1.0
                } else {
                    -1.0
                }
            }
            GeneratorKind::PeriodicSwitch { period, down_at, up_at } => {
                let t = wrap(y - down_at, period);
                if t < wrap(up_at - down_at, period) {
                    -1.0
                } else {
                    1.0
                }
            }
        }
    }

    /// Signed drift of the reduced linear coordinate, `−aᵀθ*`.
    pub fn linear_drift(&self, y: f64, a_norm: f64) -> f64 {
        -self.kappa * a_norm * self.direction(y)
    }

    /// Switch points of the generator in `[lo, hi]`.
    pub fn switch_points(&self, lo: f64, hi: f64) -> Vec<f64> {
        match self.kind {
            GeneratorKind::SignSwitchLinear { c } | GeneratorKind::SignSwitchRadial { c } => {
                if c >= lo && c <= hi {
                    alloc::vec![c]
                } else {
                    Vec::new()
                }
            }
            GeneratorKind::PeriodicSwitch { period, down_at, up_at } => {
                let mut out = Vec::new();
                for base in [down_at, up_at] {
                    let k0 = libm::floor((lo - base) / period) as i64;
                    let mut k = k0;
                    loop {
                        let x = base + k as f64 * period;
                        if x > hi {
                            break;
                        }
                        if x >= lo {
                            out.push(x);
                        }
                        k += 1;
                    }
                }
                out.sort_by(f64::total_cmp);
                out
            }
        }
    }
}

/// Excessive function scaled on a continuation segment.
#[derive(Debug, Clone)]
pub enum Excessive {
    Linear(UcLinear),
    Radial(UcRadial),
}

impl Excessive {
    pub fn eval(&self, y: f64) -> f64 {
        match self {
            Excessive::Linear(u) => u.value(y),
            Excessive::Radial(u) => u.value(y),
        }
    }

    pub fn deriv(&self, y: f64) -> f64 {
        match self {
            Excessive::Linear(u) => u.deriv(y),
            Excessive::Radial(u) => u.deriv(y),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Segment {
    /// Stopping: the value is the payoff.
    Stop,
    /// Continuation: the value is `lambda·U_c`.
    Continue { lambda: f64, u: Excessive },
}

/// Value function of a solved problem.
#[derive(Debug, Clone)]
pub enum ValueFunction {
    /// `segments[i]` covers `[breaks[i-1], breaks[i])`; with `period`
    /// `(origin, P)` the argument is first reduced into `[origin, origin + P)`.
    Piecewise {
        payoff: Payoff,
        breaks: Vec<f64>,
        segments: Vec<Segment>,
        period: Option<(f64, f64)>,
    },
}

impl ValueFunction {
    fn locate(&self, y: f64) -> (f64, &Segment) {
        let ValueFunction::Piecewise { breaks, segments, period, .. } = self;
        let y = match period {
            Some((origin, p)) => origin + wrap(y - origin, *p),
            None => y,
        };
        let i = breaks.partition_point(|b| *b <= y);
        (y, &segments[i])
    }

    pub fn payoff(&self) -> &Payoff {
        let ValueFunction::Piecewise { payoff, .. } = self;
        payoff
    }

    pub fn eval(&self, y: f64) -> f64 {
        match self.locate(y) {
            (yr, Segment::Continue { lambda, u }) => lambda * u.eval(yr),
            _ => self.payoff().eval(y),
        }
    }

    /// Derivative inside a continuation segment; `None` on the stopping set.
    pub fn continuation_deriv(&self, y: f64) -> Option<f64> {
        match self.locate(y) {
            (yr, Segment::Continue { lambda, u }) => Some(lambda * u.deriv(yr)),
            _ => None,
        }
    }

    pub fn in_stopping_set(&self, y: f64) -> bool {
        matches!(self.locate(y), (_, Segment::Stop))
    }
}

/// Output of every solver.
#[derive(Debug, Clone)]
pub struct Solution {
    pub regime: Regime,
    /// Reference point of the worst-case generator; may be `±∞`.
    pub c_star: f64,
    /// Stopping boundaries in the reduced coordinate, strictly increasing.
    /// Periodic solutions list the boundaries in `[−2π, 2π]`.
    pub thresholds: Vec<f64>,
    pub lambda_star: f64,
    pub value: ValueFunction,
    pub generator: GeneratorDescriptor,
}

impl Solution {
    pub fn value(&self, y: f64) -> f64 {
        self.value.eval(y)
    }

    pub fn payoff(&self) -> &Payoff {
        self.value.payoff()
    }

    pub fn in_stopping_set(&self, y: f64) -> bool {
        self.value.in_stopping_set(y)
    }

    /// Open continuation intervals meeting `[lo, hi]`, in increasing order.
    /// Unbounded ends are reported as `±∞`.
    pub fn continuation_intervals(&self, lo: f64, hi: f64) -> Vec<(f64, f64)> {
        let ValueFunction::Piecewise { breaks, segments, period, .. } = &self.value;
        let mut base = Vec::new();
        for (i, s) in segments.iter().enumerate() {
            if let Segment::Continue { .. } = s {
                let a = if i == 0 { f64::NEG_INFINITY } else { breaks[i - 1] };
                let b = if i == breaks.len() { f64::INFINITY } else { breaks[i] };
                base.push((a, b));
            }
        }
        match period {
            None => base.into_iter().filter(|(a, b)| *b > lo && *a < hi).collect(),
            Some((origin, p)) => {
                let mut out = Vec::new();
                let k0 = libm::floor((lo - origin) / p) as i64 - 1;
                let k1 = libm::ceil((hi - origin) / p) as i64 + 1;
                for k in k0..=k1 {
                    for (a, b) in &base {
                        let s = k as f64 * p;
                        let (a, b) = (a + s, b + s);
                        if b > lo && a < hi {
                            out.push((a, b));
                        }
                    }
                }
                merge_touching(out)
            }
        }
    }
}

fn merge_touching(mut v: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (a, b) in v {
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

/// Generator of the periodic worst case: flips at every minimum and maximum.
pub(crate) fn periodic_generator(kappa: f64, period: f64, x_max: f64) -> GeneratorDescriptor {
    GeneratorDescriptor {
        kind: GeneratorKind::PeriodicSwitch {
            period,
            down_at: x_max,
            up_at: x_max + 0.5 * period,
        },
        kappa,
    }
}

/// `x mod p` in `[0, p)`.
pub(crate) fn wrap(x: f64, p: f64) -> f64 {
    let m = x % p;
    if m < 0.0 {
        let w = m + p;
        if w >= p {
            0.0
        } else {
            w
        }
    } else {
        m
    }
}

pub(crate) const TWO_PI: f64 = 2.0 * PI;

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn payoff_examples() {
        let d = Payoff::DigitalAsymmetric { k1: 1.0, k2: 0.5, k3: 0.35 };
        assert_eq!(d.evaluate(0.0).unwrap(), 0.35);
        assert_eq!(Payoff::Straddle { strike: 4.0 }.evaluate(16.0).unwrap(), 0.0);
        assert_eq!(Payoff::PeriodicCosine.evaluate(PI).unwrap(), -1.0);
        assert!(Payoff::Straddle { strike: 4.0 }.evaluate(-1.0).is_err());
    }

    #[test]
    fn digital_jump_only_with_k3() {
        let d = Payoff::DigitalAsymmetric { k1: 1.0, k2: 0.5, k3: 0.35 };
        assert!(d.eval(-1e-12) < 1e-11);
        assert_eq!(d.eval(0.0), 0.35);
        let c = Payoff::DigitalAsymmetric { k1: 1.0, k2: 0.5, k3: 0.0 };
        assert!((c.eval(1e-12) - c.eval(-1e-12)).abs() < 1e-11);
    }

    #[test]
    fn table_interpolates_and_extrapolates_flat() {
        let t = Payoff::UserTable(alloc::vec![(0.0, 1.0), (1.0, 3.0), (3.0, -1.0)]);
        t.validate().unwrap();
        assert_eq!(t.eval(-5.0), 1.0);
        assert_eq!(t.eval(0.5), 2.0);
        assert_eq!(t.eval(2.0), 1.0);
        assert_eq!(t.eval(9.0), -1.0);
        let bad = Payoff::UserTable(alloc::vec![(0.0, 1.0), (0.0, 2.0)]);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn params_validation() {
        assert!(AmbiguityParams::linear(0.0, 0.02, 0.1).is_ok());
        assert!(AmbiguityParams::linear(-0.1, 0.02, 0.1).is_err());
        assert!(AmbiguityParams::linear(0.1, 0.0, 0.1).is_err());
        assert!(AmbiguityParams::radial(0.1, 0.1, 1).is_err());
    }

    #[test]
    fn periodic_generator_directions() {
        let g = periodic_generator(0.02, TWO_PI, 0.0);
        assert_eq!(g.direction(0.5), -1.0);
        assert_eq!(g.direction(PI + 0.1), 1.0);
        assert_eq!(g.direction(-0.1), 1.0);
        assert_eq!(g.direction(TWO_PI + 0.1), -1.0);
        let sp = g.switch_points(-0.1, TWO_PI + 0.1);
        assert_eq!(sp.len(), 3);
    }

    proptest! {
        #[test]
        fn payoff_matches_formula(y in -50.0f64..50.0, k1 in 0.0f64..3.0, k2 in 0.0f64..3.0, k3 in 0.0f64..3.0) {
            let d = Payoff::DigitalAsymmetric { k1, k2, k3 };
            let want = if y >= 0.0 { k2 * y + k3 } else { -k1 * y };
            prop_assert_eq!(d.eval(y), want);
            prop_assert_eq!(Payoff::EvenKink { k1 }.eval(y), k1 * y.abs());
            prop_assert_eq!(Payoff::PeriodicCosine.eval(y), libm::cos(y));
            let ya = y.abs();
            prop_assert_eq!(Payoff::Straddle { strike: k1 + 0.1 }.eval(ya), (libm::sqrt(ya) - (k1 + 0.1)).abs());
            prop_assert_eq!(Payoff::IdentityRadial.eval(ya), ya);
        }
    }
}
