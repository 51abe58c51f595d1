//! Finite-difference solver for the robust stopping variational inequality
//! `max(F − v, min_σ L^σ v − r·v) = 0` in the reduced coordinate.
//!
//! `L^σ v = D·v'' + b^σ·v'` with the drift sign `σ = ±1` chosen by the
//! adversary at every node. The discrete problem is solved by policy
//! iteration: an outer loop on the stopping set and an inner loop on the
//! drift signs, each step being one tridiagonal solve.

use alloc::vec;
use alloc::vec::Vec;

use libm::sqrt;

use crate::error::{Error, Result};
use crate::types::{AmbiguityParams, Payoff};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Grid1D {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        let g = Grid1D { lo, hi, n };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo < self.hi && self.lo.is_finite() && self.hi.is_finite()) {
            return Err(Error::InvalidParams("grid needs finite lo < hi"));
        }
        if self.n < 101 {
            return Err(Error::InvalidParams("grid needs at least 101 nodes"));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.n - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.n - 1 {
            self.hi
        } else {
            self.lo + i as f64 * self.spacing()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdeConfig {
    pub max_outer: usize,
    pub max_inner: usize,
}

impl Default for PdeConfig {
    fn default() -> Self {
        PdeConfig { max_outer: 10_000, max_inner: 200 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSolution {
    pub grid: Grid1D,
    pub values: Vec<f64>,
    pub stopping_mask: Vec<bool>,
    /// Adversarial drift sign per node (`+1` ties).
    pub drift_sign: Vec<i8>,
    /// Midpoints between neighbouring nodes whose mask differs.
    pub detected_thresholds: Vec<f64>,
    /// The continuation set reaches a node next to a closed grid end.
    pub touches_boundary: bool,
    pub outer_iterations: usize,
}

impl GridSolution {
    /// Piecewise-linear interpolation of the nodal values.
    pub fn interpolate(&self, y: f64) -> f64 {
        let g = &self.grid;
        let t = ((y - g.lo) / g.spacing()).clamp(0.0, (g.n - 1) as f64);
        let i = (t as usize).min(g.n - 2);
        let w = t - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }
}

#[derive(Clone, Copy)]
enum LowerEnd {
    /// `v = F` at the first node.
    Dirichlet,
    /// Entrance boundary: no condition is imposed; the first node uses
    /// the mirrored diffusion term plus an inward one-sided drift term.
    Entrance,
}

struct Operator<D, B> {
    diffusion: D,
    drift: B,
    lower: LowerEnd,
}

// Coefficients (α, β, γ) of `L v_i = α v_{i−1} + β v_i + γ v_{i+1}`: central
// where the cell Péclet number allows it, upwind otherwise. Both keep α, γ ≥ 0.
#[inline]
fn stencil(d: f64, b: f64, h: f64) -> (f64, f64, f64) {
    let dh = d / (h * h);
    if b.abs() * h <= 2.0 * d {
        let bh = 0.5 * b / h;
        (dh - bh, -2.0 * dh, dh + bh)
    } else if b > 0.0 {
        (dh, -2.0 * dh - b / h, dh + b / h)
    } else {
        (dh - b / h, -2.0 * dh + b / h, dh)
    }
}

/// Thomas algorithm; `a` is the sub-diagonal and `c` the super-diagonal.
fn thomas(a: &[f64], b: &[f64], c: &[f64], d: &mut [f64]) {
    let n = d.len();
    let mut cp = vec![0.0; n];
    let mut m = b[0];
    cp[0] = c[0] / m;
    d[0] /= m;
    for i in 1..n {
        m = b[i] - a[i] * cp[i - 1];
        cp[i] = c[i] / m;
        d[i] = (d[i] - a[i] * d[i - 1]) / m;
    }
    for i in (0..n - 1).rev() {
        d[i] -= cp[i] * d[i + 1];
    }
}

fn solve_vi<D, B>(r: f64, payoff: &Payoff, g: Grid1D, op: Operator<D, B>, cfg: PdeConfig) -> Result<GridSolution>
where
    D: Fn(f64) -> f64,
    B: Fn(f64, f64) -> f64,
{
    g.validate()?;
    payoff.validate()?;
    let n = g.n;
    let h = g.spacing();
    let x = g.nodes();
    let f: Vec<f64> = x.iter().map(|&y| payoff.eval(y)).collect();
    let fixed = |i: usize| i == n - 1 || (i == 0 && matches!(op.lower, LowerEnd::Dirichlet));

    let mut sten = [Vec::with_capacity(n), Vec::with_capacity(n)];
    for (k, s) in [1.0, -1.0].into_iter().enumerate() {
        for (i, &y) in x.iter().enumerate() {
            let d = (op.diffusion)(y);
            let st = if i == 0 && matches!(op.lower, LowerEnd::Entrance) {
                let w = 2.0 * d / (h * h) + (op.drift)(y, s).max(0.0) / h;
                (0.0, -w, w)
            } else {
                stencil(d, (op.drift)(y, s), h)
            };
            sten[k].push(st);
        }
    }
    let apply = |k: usize, v: &[f64], i: usize| {
        let (a, b, c) = sten[k][i];
        let left = if i > 0 { a * v[i - 1] } else { 0.0 };
        let right = if i + 1 < n { c * v[i + 1] } else { 0.0 };
        left + b * v[i] + right
    };

    let mut stop = vec![true; n];
    let mut sign = vec![0usize; n];
    let mut v;
    let (mut sub, mut diag, mut sup) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut outer = 0;
    loop {
        outer += 1;
        if outer > cfg.max_outer {
            return Err(Error::NoConvergence("stopping-set iteration"));
        }
        // Inner policy iteration on the drift signs for the current stopping set.
        let mut inner = 0;
        loop {
            inner += 1;
            if inner > cfg.max_inner {
                return Err(Error::NoConvergence("drift-sign iteration"));
            }
            let mut rhs = vec![0.0; n];
            for i in 0..n {
                if stop[i] {
                    sub[i] = 0.0;
                    diag[i] = 1.0;
                    sup[i] = 0.0;
                    rhs[i] = f[i];
                } else {
                    let (a, b, c) = sten[sign[i]][i];
                    sub[i] = -a;
                    diag[i] = r - b;
                    sup[i] = -c;
                }
            }
            thomas(&sub, &diag, &sup, &mut rhs);
            v = rhs;
            let mut changed = false;
            for i in 0..n {
                if stop[i] {
                    continue;
                }
                let best = if apply(1, &v, i) < apply(0, &v, i) { 1 } else { 0 };
                // Switch only on a gain above rounding, so ties cannot cycle.
                let (a, b, c) = sten[sign[i]][i];
                let noise = 1e-12 * (a.abs() + b.abs() + c.abs()) * v[i].abs().max(1e-300);
                if best != sign[i] && apply(best, &v, i) < apply(sign[i], &v, i) - noise {
                    sign[i] = best;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        // Stop wherever the payoff beats waiting under the current value.
        let mut changed = false;
        for i in 0..n {
            let want = fixed(i) || {
                let lv = apply(0, &v, i).min(apply(1, &v, i)) - r * v[i];
                f[i] - v[i] > lv
            };
            if want != stop[i] {
                stop[i] = want;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    for i in 0..n {
        sign[i] = if apply(1, &v, i) < apply(0, &v, i) { 1 } else { 0 };
    }

    let mut thresholds = Vec::new();
    for i in 1..n {
        if stop[i] != stop[i - 1] {
            thresholds.push(0.5 * (x[i - 1] + x[i]));
        }
    }
    let touches = (!stop[n - 2]) || (matches!(op.lower, LowerEnd::Dirichlet) && !stop[1]);
    Ok(GridSolution {
        grid: g,
        values: v,
        stopping_mask: stop,
        drift_sign: sign.iter().map(|&k| if k == 0 { 1 } else { -1 }).collect(),
        detected_thresholds: thresholds,
        touches_boundary: touches,
        outer_iterations: outer,
    })
}

/// Linear case: `D = ½‖a‖²`, `b^σ = −σκ‖a‖`, stopping enforced at both ends.
pub fn solve_vi_linear(p: &AmbiguityParams, payoff: &Payoff, g: Grid1D) -> Result<GridSolution> {
    solve_vi_linear_with(p, payoff, g, PdeConfig::default())
}

pub fn solve_vi_linear_with(p: &AmbiguityParams, payoff: &Payoff, g: Grid1D, cfg: PdeConfig) -> Result<GridSolution> {
    p.validate()?;
    let (a, k) = (p.a_norm, p.kappa);
    let op = Operator {
        diffusion: move |_| 0.5 * a * a,
        drift: move |_: f64, s: f64| -s * k * a,
        lower: LowerEnd::Dirichlet,
    };
    solve_vi(p.r, payoff, g, op, cfg)
}

/// Radial case: `D = 2y`, `b^σ = d − 2σκ√y`, entrance closure at `lo > 0`
/// and stopping enforced at `hi`.
pub fn solve_vi_radial(p: &AmbiguityParams, payoff: &Payoff, g: Grid1D) -> Result<GridSolution> {
    solve_vi_radial_with(p, payoff, g, PdeConfig::default())
}

pub fn solve_vi_radial_with(p: &AmbiguityParams, payoff: &Payoff, g: Grid1D, cfg: PdeConfig) -> Result<GridSolution> {
    p.validate()?;
    if !(g.lo > 0.0) {
        return Err(Error::InvalidParams("radial grid needs lo > 0"));
    }
    let (d, k) = (p.dim as f64, p.kappa);
    let op = Operator {
        diffusion: |y: f64| 2.0 * y,
        drift: move |y: f64, s: f64| d - 2.0 * s * k * sqrt(y),
        lower: LowerEnd::Entrance,
    };
    solve_vi(p.r, payoff, g, op, cfg)
}
