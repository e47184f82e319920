//! Adaptive Simpson quadrature on breakpoint-aligned panels.

use crate::error::{Error, Result};

/// Tolerances for panel quadrature.
#[derive(Clone, Copy, Debug)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
    pub max_depth: u32,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            rel: 1e-7,
            abs: 1e-12,
            max_depth: 24,
        }
    }
}

/// Best-effort adaptive Simpson on `[a, b]` with a fixed absolute tolerance.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, max_depth: u32) -> f64 {
    if b <= a {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut unresolved = 0.0;
    recurse(f, a, b, fa, fm, fb, whole, tol, max_depth, 2, &mut unresolved)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    min_depth: u32,
    unresolved: &mut f64,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let sum = left + right;
    let diff = sum - whole;
    if min_depth == 0 && diff.abs() <= 15.0 * tol {
        return sum + diff / 15.0;
    }
    if depth == 0 {
        *unresolved += diff.abs() / 15.0;
        return sum + diff / 15.0;
    }
    let md = min_depth.saturating_sub(1);
    recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, md, unresolved)
        + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, md, unresolved)
}

/// Integrates `f` over consecutive panels `[breaks[i], breaks[i+1]]`.
///
/// A first pass estimates the magnitude of the integral; the second pass
/// refines every panel to `max(rel * |total|, abs)` split by panel width.
/// Fails when the refinement leaves more residual than the tolerance.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, breaks: &[f64], tol: Tolerance) -> Result<f64> {
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|x| x.is_finite()).collect();
    pts.sort_by(|a, b| a.total_cmp(b));
    pts.dedup();
    if pts.len() < 2 {
        return Ok(0.0);
    }
    let width = pts[pts.len() - 1] - pts[0];
    // Coarse magnitude from a composite Simpson pass with four subintervals per panel.
    let mut coarse_abs = 0.0;
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let step = (b - a) / 4.0;
        let mut s = 0.0;
        for k in 0..=4 {
            let c = if k == 0 || k == 4 { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
            s += c * f(a + k as f64 * step).abs();
        }
        coarse_abs += s * step / 3.0;
    }
    let target = (tol.rel * coarse_abs).max(tol.abs);
    let mut total = 0.0;
    let mut comp = 0.0;
    let mut unresolved = 0.0;
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let local = target * (b - a) / width;
        let m = 0.5 * (a + b);
        let (fa, fm, fb) = (f(a), f(m), f(b));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        let v = recurse(f, a, b, fa, fm, fb, whole, local, tol.max_depth, 2, &mut unresolved);
        // Neumaier summation over panels.
        let t = total + v;
        if total.abs() >= v.abs() {
            comp += (total - t) + v;
        } else {
            comp += (v - t) + total;
        }
        total = t;
    }
    let total = total + comp;
    if !total.is_finite() {
        return Err(Error::QuadratureFailure("non-finite integrand".into()));
    }
    if unresolved > 10.0 * target.max(tol.rel * total.abs()) {
        return Err(Error::QuadratureFailure(format!(
            "residual {unresolved:.3e} exceeds tolerance {target:.3e} after {} halvings",
            tol.max_depth
        )));
    }
    Ok(total)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Three-term recurrence for P_n and its derivative.
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Adaptive bisection with a 20-point Gauss-Legendre rule per interval.
/// Best effort: stops at `max_depth` without reporting.
pub fn adaptive_gauss<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, max_depth: u32) -> f64 {
    thread_local! {
        static RULE: (Vec<f64>, Vec<f64>) = gauss_legendre(20);
    }
    fn rule<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
        RULE.with(|(x, w)| {
            let c = 0.5 * (a + b);
            let r = 0.5 * (b - a);
            r * x.iter().zip(w).map(|(xi, wi)| wi * f(c + r * xi)).sum::<f64>()
        })
    }
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (l, r) = (rule(f, a, m), rule(f, m, b));
        if depth == 0 || (l + r - whole).abs() <= tol {
            return l + r;
        }
        rec(f, a, m, l, 0.5 * tol, depth - 1) + rec(f, m, b, r, 0.5 * tol, depth - 1)
    }
    if b <= a {
        return 0.0;
    }
    rec(f, a, b, rule(f, a, b), tol, max_depth)
}

/// Panel-wise adaptive Gauss-Legendre with the same tolerance contract as
/// [`integrate`]; suited to integrands that are smooth between breakpoints.
pub fn integrate_gauss<F: Fn(f64) -> f64>(f: &F, breaks: &[f64], tol: Tolerance) -> Result<f64> {
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|x| x.is_finite()).collect();
    pts.sort_by(|a, b| a.total_cmp(b));
    pts.dedup();
    if pts.len() < 2 {
        return Ok(0.0);
    }
    let (x, w) = gauss_legendre(20);
    let rule = |a: f64, b: f64, absolute: bool| {
        let c = 0.5 * (a + b);
        let r = 0.5 * (b - a);
        r * x
            .iter()
            .zip(&w)
            .map(|(xi, wi)| {
                let v = f(c + r * xi);
                wi * if absolute { v.abs() } else { v }
            })
            .sum::<f64>()
    };
    let width = pts[pts.len() - 1] - pts[0];
    let coarse: f64 = pts.windows(2).map(|p| rule(p[0], p[1], true)).sum();
    let target = (tol.rel * coarse).max(tol.abs);
    let mut unresolved = 0.0;
    let mut total = 0.0;
    let mut comp = 0.0;
    let mut stack: Vec<(f64, f64, f64, u32)> = Vec::new();
    for p in pts.windows(2) {
        let (a, b) = (p[0], p[1]);
        stack.push((a, b, rule(a, b, false), 0));
        while let Some((a, b, whole, depth)) = stack.pop() {
            let m = 0.5 * (a + b);
            let (l, r) = (rule(a, m, false), rule(m, b, false));
            let err = (l + r - whole).abs();
            let local = target * (b - a) / width;
            if err <= local || depth >= tol.max_depth {
                if err > local {
                    unresolved += err;
                }
                let v = l + r;
                let t = total + v;
                if total.abs() >= v.abs() {
                    comp += (total - t) + v;
                } else {
                    comp += (v - t) + total;
                }
                total = t;
            } else {
                stack.push((m, b, r, depth + 1));
                stack.push((a, m, l, depth + 1));
            }
        }
    }
    let total = total + comp;
    if !total.is_finite() {
        return Err(Error::QuadratureFailure("non-finite integrand".into()));
    }
    if unresolved > 10.0 * target {
        return Err(Error::QuadratureFailure(format!(
            "residual {unresolved:.3e} exceeds tolerance {target:.3e} after {} halvings",
            tol.max_depth
        )));
    }
    Ok(total)
}

/// Panels of `[lo, hi]` cut at every breakpoint that falls strictly inside.
pub fn panels(lo: f64, hi: f64, cuts: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut pts = vec![lo, hi];
    pts.extend(cuts.into_iter().filter(|c| *c > lo && *c < hi));
    pts.sort_by(|a, b| a.total_cmp(b));
    pts.dedup();
    pts
}
