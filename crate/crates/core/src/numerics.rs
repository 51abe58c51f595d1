//! Root finding, one-dimensional maximization and quadrature.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use libm::{exp, sinh, cosh};

/// Bisection on a sign-changing bracket down to absolute width `tol`.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa.signum() != fb.signum()) || fa.is_nan() || fb.is_nan() {
        return Err(Error::BracketFailure { what: "bisection", lo, hi });
    }
    for _ in 0..400 {
        let m = 0.5 * (a + b);
        if b - a <= tol || m <= a || m >= b {
            return Ok(m);
        }
        let fm = f(m);
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.is_nan() {
            return Err(Error::NoConvergence("bisection hit NaN"));
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Bisection followed by up to `steps` Newton steps that are only kept
/// when they stay inside the bracket and reduce `|f|`.
pub fn bisect_newton<F, D>(mut f: F, mut df: D, lo: f64, hi: f64, tol: f64, steps: usize) -> Result<f64>
where
    F: FnMut(f64) -> f64,
    D: FnMut(f64) -> f64,
{
    let mut x = bisect(&mut f, lo, hi, tol)?;
    let mut fx = f(x);
    for _ in 0..steps {
        let d = df(x);
        if !(d.is_finite()) || d == 0.0 {
            break;
        }
        let xn = x - fx / d;
        if !(xn >= lo && xn <= hi) {
            break;
        }
        let fnew = f(xn);
        if !(fnew.abs() < fx.abs()) {
            break;
        }
        x = xn;
        fx = fnew;
    }
    Ok(x)
}

/// Moves `far` geometrically away from `near` until `f(far)` has the sign
/// opposite to `f(near)`. Returns the bracket ordered as `(lo, hi)`.
pub fn expand_bracket<F: FnMut(f64) -> f64>(
    mut f: F,
    near: f64,
    step: f64,
    max_doublings: usize,
    what: &'static str,
) -> Result<(f64, f64)> {
    let f0 = f(near);
    let mut s = step;
    let mut prev = near;
    for _ in 0..max_doublings {
        let x = near + s;
        let fx = f(x);
        if fx == 0.0 || (fx.signum() != f0.signum() && !fx.is_nan()) {
            return Ok(if x < prev { (x, prev) } else { (prev, x) });
        }
        prev = x;
        s *= 2.0;
    }
    let far = near + s;
    Err(Error::BracketFailure { what, lo: near.min(far), hi: near.max(far) })
}

/// Golden-section search for a maximum of a unimodal function on `[lo, hi]`.
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..300 {
        if b - a <= tol {
            break;
        }
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        }
    }
    let mut best = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    for x in [lo, hi] {
        let fx = f(x);
        if fx > best.1 {
            best = (x, fx);
        }
    }
    best
}

/// Local maxima of `f` sampled on the increasing grid `xs`, each refined by
/// golden section on its two neighbouring cells, plus the `extra` points
/// (kinks and jumps) that beat their neighbourhood. Sorted by location.
pub fn grid_peaks<F: Fn(f64) -> f64>(f: F, xs: &[f64], extra: &[f64]) -> Vec<(f64, f64)> {
    let n = xs.len();
    let fs: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let mut out = Vec::new();
    for i in 0..n {
        let left = i == 0 || fs[i] >= fs[i - 1];
        let right = i == n - 1 || fs[i] >= fs[i + 1];
        if !(left && right) || !fs[i].is_finite() {
            continue;
        }
        let a = xs[i.saturating_sub(1)];
        let b = xs[(i + 1).min(n - 1)];
        let (x, v) = golden_max(&f, a, b, 1e-10 * (b - a));
        out.push(if v >= fs[i] { (x, v) } else { (xs[i], fs[i]) });
    }
    for &x in extra {
        let v = f(x);
        if v.is_finite() {
            out.push((x, v));
        }
    }
    out.sort_by(|p, q| p.0.total_cmp(&q.0));
    out
}

/// Adaptive Simpson quadrature with absolute tolerance.
pub fn adaptive_simpson<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, abs_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(&mut f, a, b, fa, fm, fb, whole, abs_tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

const DE_T_MAX: f64 = 6.0;

/// Trapezoid sums of a double-exponential substitution, halving the step
/// until two levels agree to `rel_tol`. `g(t)` returns the weighted
/// integrand in the `t` variable. `points` is the node count of the first
/// level.
fn de_refine<G: FnMut(f64) -> f64>(mut g: G, rel_tol: f64, points: usize, max_levels: u32) -> Result<f64> {
    let n0 = points.max(8);
    let mut h = 2.0 * DE_T_MAX / n0 as f64;
    let mut sum = 0.0;
    for k in 0..=n0 {
        sum += finite_or_zero(g(-DE_T_MAX + k as f64 * h));
    }
    let mut est = sum * h;
    let mut nodes = n0;
    for _ in 0..max_levels {
        let mut add = 0.0;
        for k in 0..nodes {
            add += finite_or_zero(g(-DE_T_MAX + (k as f64 + 0.5) * h));
        }
        sum += add;
        h *= 0.5;
        nodes *= 2;
        let new = sum * h;
        if (new - est).abs() <= rel_tol * new.abs() {
            return Ok(new);
        }
        est = new;
    }
    Err(Error::NoConvergence("double-exponential quadrature"))
}

#[inline]
fn finite_or_zero(x: f64) -> f64 {
    if x.is_finite() {
        x
    } else {
        0.0
    }
}

const HALF_PI: f64 = core::f64::consts::FRAC_PI_2;

/// `∫_a^b f` by the tanh-sinh rule; tolerates integrable endpoint
/// singularities. `f` receives `(x, distance to the nearer endpoint)` so
/// that singular factors can be evaluated without cancellation.
pub fn tanh_sinh<F: FnMut(f64, f64) -> f64>(mut f: F, a: f64, b: f64, rel_tol: f64, points: usize) -> Result<f64> {
    let c = 0.5 * (b - a);
    de_refine(
        |t| {
            let u = HALF_PI * sinh(t);
            let ch = cosh(u);
            // 1 - tanh(|u|) without cancellation.
            let comp = exp(-u.abs()) / ch;
            let w = HALF_PI * cosh(t) / (ch * ch);
            let (x, dist) = if t < 0.0 {
                (a + c * comp, c * comp)
            } else {
                (b - c * comp, c * comp)
            };
            if dist <= 0.0 {
                return 0.0;
            }
            c * w * f(x, dist)
        },
        rel_tol,
        points,
        8,
    )
}

/// `∫_a^∞ f` by the exp-sinh rule. `f` receives `x − a` as well as `x`.
pub fn exp_sinh<F: FnMut(f64, f64) -> f64>(mut f: F, a: f64, rel_tol: f64, points: usize) -> Result<f64> {
    de_refine(
        |t| {
            let e = exp(HALF_PI * sinh(t));
            if e <= 0.0 || !e.is_finite() {
                return 0.0;
            }
            let w = HALF_PI * cosh(t) * e;
            w * f(a + e, e)
        },
        rel_tol,
        points,
        8,
    )
}
