//! Exact piecewise-polynomial kernels.
//!
//! The one-dimensional kernel is the alternating combination
//! `K(y) = -sum_{k=1..b} (-1)^k C(b,k) (1/k) D(y/k)` of dilations of the
//! rectangular base function `D = 1[-1/2, 1/2]`. It is a step function, its
//! autocorrelation `A = K * K` is piecewise linear, and both are stored with
//! exact rational breakpoints and coefficients. Norms and integrals are taken
//! in rational arithmetic and converted to `f64` once.
//!
//! The `d`-dimensional objects are the products `K(x) = prod K(x_j)` and
//! `T(x) = 2 K(x) - prod A(x_j)`, evaluated through a fast `f64` table.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Exact rational number used for kernel construction.
pub type Rational = BigRational;

/// Largest dimension for which a [`KernelSet`] can be built.
pub const MAX_DIM: usize = 3;
/// Largest supported kernel order.
pub const MAX_ORDER: u32 = 8;

fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

fn to_f64(q: &Rational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

fn binomial(n: u32, k: u32) -> i64 {
    let mut acc: i64 = 1;
    for i in 0..k as i64 {
        acc = acc * (n as i64 - i) / (i + 1);
    }
    acc
}

/// A compactly supported piecewise polynomial with rational data.
///
/// Segment `i` covers `[breakpoints[i], breakpoints[i+1])` and holds the
/// coefficients `c_0, c_1, ...` of `c_0 + c_1 x + ...` in the global variable.
/// Symmetric functions are evaluated at `|x|`; `p(x) == p(-x)` holds
/// exactly, including at breakpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewisePoly1D {
    breakpoints: Vec<Rational>,
    segments: Vec<Vec<Rational>>,
    symmetric: bool,
}

impl PiecewisePoly1D {
    /// Builds a piecewise polynomial, validating breakpoint order and detecting symmetry.
    pub fn new(breakpoints: Vec<Rational>, segments: Vec<Vec<Rational>>) -> Result<Self> {
        if breakpoints.len() < 2 || segments.len() + 1 != breakpoints.len() {
            return Err(Error::Domain(
                "piecewise polynomial needs n+1 breakpoints for n segments".into(),
            ));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain("breakpoints must be strictly increasing".into()));
        }
        let mut p = PiecewisePoly1D {
            breakpoints,
            segments,
            symmetric: false,
        };
        p.symmetric = p.check_symmetric();
        Ok(p)
    }

    pub fn breakpoints(&self) -> &[Rational] {
        &self.breakpoints
    }

    pub fn segments(&self) -> &[Vec<Rational>] {
        &self.segments
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Closed support interval `[first breakpoint, last breakpoint]`.
    pub fn support(&self) -> (Rational, Rational) {
        (
            self.breakpoints[0].clone(),
            self.breakpoints[self.breakpoints.len() - 1].clone(),
        )
    }

    pub fn degree(&self) -> usize {
        self.segments
            .iter()
            .map(|c| {
                c.iter()
                    .rposition(|v| !v.is_zero())
                    .unwrap_or(0)
            })
            .max()
            .unwrap_or(0)
    }

    fn check_symmetric(&self) -> bool {
        let (lo, hi) = self.support();
        if lo != -hi.clone() {
            return false;
        }
        // Each piece must be the mirror image of the piece across the origin:
        // c_k(x) on [a, b) equals (-1)^k c_k on (-b, -a].
        self.segments.iter().enumerate().all(|(i, c)| {
            let mid = (&self.breakpoints[i] + &self.breakpoints[i + 1]) / rat(2, 1);
            let mirror = self.coeffs_at(&-mid);
            let n = c.len().max(mirror.len());
            (0..n).all(|k| {
                let a = c.get(k).cloned().unwrap_or_else(Rational::zero);
                let b = mirror.get(k).cloned().unwrap_or_else(Rational::zero);
                if k % 2 == 0 { a == b } else { a == -b }
            })
        })
    }

    fn segment_index(&self, x: &Rational) -> Option<usize> {
        let n = self.breakpoints.len();
        if x < &self.breakpoints[0] || x >= &self.breakpoints[n - 1] {
            return None;
        }
        // Last breakpoint <= x.
        let idx = self.breakpoints.partition_point(|b| b <= x) - 1;
        Some(idx)
    }

    fn eval_segment_at(&self, x: &Rational) -> Rational {
        match self.segment_index(x) {
            Some(i) => horner(&self.segments[i], x),
            None => Rational::zero(),
        }
    }

    /// Exact evaluation; zero outside the support.
    pub fn eval_exact(&self, x: &Rational) -> Rational {
        if self.symmetric {
            self.eval_segment_at(&x.abs())
        } else {
            self.eval_segment_at(x)
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let q = Rational::from_float(x).unwrap_or_else(Rational::zero);
        to_f64(&self.eval_exact(&q))
    }

    /// Exact integral over the real line.
    pub fn integral(&self) -> Rational {
        self.segments
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let a = &self.breakpoints[i];
                let b = &self.breakpoints[i + 1];
                antiderivative(c, b) - antiderivative(c, a)
            })
            .fold(Rational::zero(), |acc, v| acc + v)
    }

    /// Exact `L1` norm; requires degree at most one.
    pub fn abs_integral(&self) -> Result<Rational> {
        if self.degree() > 1 {
            return Err(Error::Domain("abs_integral requires degree <= 1".into()));
        }
        let mut total = Rational::zero();
        for (i, c) in self.segments.iter().enumerate() {
            let a = &self.breakpoints[i];
            let b = &self.breakpoints[i + 1];
            let c0 = c.first().cloned().unwrap_or_else(Rational::zero);
            let c1 = c.get(1).cloned().unwrap_or_else(Rational::zero);
            total += abs_linear_integral(&c0, &c1, a, b);
        }
        Ok(total)
    }

    /// Exact sup norm: the largest absolute one-sided limit at segment endpoints.
    pub fn sup_abs(&self) -> Result<Rational> {
        if self.degree() > 1 {
            return Err(Error::Domain("sup_abs requires degree <= 1".into()));
        }
        let mut best = Rational::zero();
        for (i, c) in self.segments.iter().enumerate() {
            for x in [&self.breakpoints[i], &self.breakpoints[i + 1]] {
                let v = horner(c, x).abs();
                if v > best {
                    best = v;
                }
            }
        }
        Ok(best)
    }

    /// Exact `alpha * self + beta * other` on the merged partition.
    pub fn linear_combination(&self, alpha: &Rational, other: &Self, beta: &Rational) -> Result<Self> {
        let mut pts: Vec<Rational> = self.breakpoints.clone();
        pts.extend(other.breakpoints.iter().cloned());
        pts.sort();
        pts.dedup();
        let mut segments = Vec::with_capacity(pts.len() - 1);
        for w in pts.windows(2) {
            let mid = (&w[0] + &w[1]) / rat(2, 1);
            let ca = self.coeffs_at(&mid);
            let cb = other.coeffs_at(&mid);
            let n = ca.len().max(cb.len());
            let mut c = vec![Rational::zero(); n];
            for (k, v) in ca.iter().enumerate() {
                c[k] += alpha * v;
            }
            for (k, v) in cb.iter().enumerate() {
                c[k] += beta * v;
            }
            segments.push(c);
        }
        PiecewisePoly1D::new(pts, segments)
    }

    // Coefficients of the polynomial piece valid at an interior point.
    fn coeffs_at(&self, x: &Rational) -> Vec<Rational> {
        match self.segment_index(x) {
            Some(i) => self.segments[i].clone(),
            None => Vec::new(),
        }
    }

    /// Exact autocorrelation `y -> int p(v) p(y + v) dv` of a step function.
    pub fn autocorrelation(&self) -> Result<Self> {
        if self.degree() > 0 {
            return Err(Error::Domain("autocorrelation requires a step function".into()));
        }
        let pieces: Vec<(Rational, Rational, Rational)> = self
            .segments
            .iter()
            .enumerate()
            .filter_map(|(i, c)| {
                let v = c.first().cloned().unwrap_or_else(Rational::zero);
                (!v.is_zero()).then(|| (self.breakpoints[i].clone(), self.breakpoints[i + 1].clone(), v))
            })
            .collect();
        if pieces.is_empty() {
            return Err(Error::Domain("autocorrelation of the zero function".into()));
        }
        let mut pts = Vec::new();
        for (ai, bi, _) in &pieces {
            for (aj, bj, _) in &pieces {
                pts.push(aj - bi);
                pts.push(aj - ai);
                pts.push(bj - bi);
                pts.push(bj - ai);
            }
        }
        pts.sort();
        pts.dedup();
        let value_at = |y: &Rational| -> Rational {
            let mut acc = Rational::zero();
            for (ai, bi, ci) in &pieces {
                for (aj, bj, cj) in &pieces {
                    let lo = std::cmp::max(ai.clone(), aj - y);
                    let hi = std::cmp::min(bi.clone(), bj - y);
                    if hi > lo {
                        acc += ci * cj * (hi - lo);
                    }
                }
            }
            acc
        };
        let values: Vec<Rational> = pts.iter().map(value_at).collect();
        let segments = pts
            .windows(2)
            .zip(values.windows(2))
            .map(|(p, v)| {
                let slope = (&v[1] - &v[0]) / (&p[1] - &p[0]);
                let c0 = &v[0] - &slope * &p[0];
                vec![c0, slope]
            })
            .collect();
        PiecewisePoly1D::new(pts, segments)
    }

    /// `f64` evaluator for a symmetric piecewise-linear function.
    pub fn fast(&self) -> Result<FastPiecewise> {
        FastPiecewise::from_poly(self)
    }
}

fn horner(c: &[Rational], x: &Rational) -> Rational {
    c.iter()
        .rev()
        .fold(Rational::zero(), |acc, v| acc * x + v)
}

fn antiderivative(c: &[Rational], x: &Rational) -> Rational {
    let mut acc = Rational::zero();
    let mut pow = x.clone();
    for (k, v) in c.iter().enumerate() {
        acc += v * &pow / rat(k as i64 + 1, 1);
        pow *= x;
    }
    acc
}

// Exact integral of |c0 + c1 x| over [a, b].
fn abs_linear_integral(c0: &Rational, c1: &Rational, a: &Rational, b: &Rational) -> Rational {
    let prim = |x: &Rational| c0 * x + c1 * x * x / rat(2, 1);
    let signed = |lo: &Rational, hi: &Rational| prim(hi) - prim(lo);
    if c1.is_zero() {
        return c0.abs() * (b - a);
    }
    let root = -c0 / c1;
    if &root > a && &root < b {
        signed(a, &root).abs() + signed(&root, b).abs()
    } else {
        signed(a, b).abs()
    }
}

/// Fast table evaluator of a symmetric piecewise-linear function at `|x|`.
#[derive(Clone, Debug)]
pub struct FastPiecewise {
    // Breakpoints on [0, support), starting with 0.
    knots: Vec<f64>,
    c0: Vec<f64>,
    c1: Vec<f64>,
    right: f64,
    uniform_step: Option<f64>,
}

impl FastPiecewise {
    fn from_poly(p: &PiecewisePoly1D) -> Result<Self> {
        if !p.is_symmetric() || p.degree() > 1 {
            return Err(Error::Domain(
                "fast evaluator requires a symmetric piecewise-linear function".into(),
            ));
        }
        let zero = Rational::zero();
        let mut knots_q: Vec<Rational> = vec![zero.clone()];
        knots_q.extend(p.breakpoints.iter().filter(|b| **b > zero).cloned());
        let mut knots = Vec::new();
        let mut c0 = Vec::new();
        let mut c1 = Vec::new();
        for w in knots_q.windows(2) {
            let mid = (&w[0] + &w[1]) / rat(2, 1);
            let c = p.coeffs_at(&mid);
            knots.push(to_f64(&w[0]));
            c0.push(c.first().map(to_f64).unwrap_or(0.0));
            c1.push(c.get(1).map(to_f64).unwrap_or(0.0));
        }
        let right = to_f64(&knots_q[knots_q.len() - 1]);
        // Uniform spacing is checked exactly.
        let step_q = &knots_q[1] - &knots_q[0];
        let uniform = knots_q.windows(2).all(|w| &w[1] - &w[0] == step_q);
        Ok(FastPiecewise {
            knots,
            c0,
            c1,
            right,
            uniform_step: uniform.then(|| to_f64(&step_q)),
        })
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let a = x.abs();
        if a >= self.right {
            return 0.0;
        }
        let mut i = match self.uniform_step {
            Some(step) => ((a / step) as usize).min(self.knots.len() - 1),
            None => self.knots.partition_point(|k| *k <= a).saturating_sub(1),
        };
        // Division rounding can land one cell off near a knot.
        if a < self.knots[i] {
            i -= 1;
        } else if i + 1 < self.knots.len() && a >= self.knots[i + 1] {
            i += 1;
        }
        self.c0[i] + self.c1[i] * a
    }

    pub fn support_radius(&self) -> f64 {
        self.right
    }
}

/// The kernel family for a fixed order `b` and dimension `d`.
#[derive(Clone, Debug)]
pub struct KernelSet {
    b: u32,
    d: usize,
    kappa: PiecewisePoly1D,
    auto: PiecewisePoly1D,
    t: Rational,
    norm_t1: f64,
    norm_tinf: f64,
    varpi: f64,
    fast_kappa: FastPiecewise,
    fast_auto: FastPiecewise,
    t_f64: f64,
}

/// Builds the one-dimensional step kernel of order `b`.
pub fn build_kappa(b: u32) -> Result<PiecewisePoly1D> {
    if !(2..=MAX_ORDER).contains(&b) {
        return Err(Error::InvalidOrder(b));
    }
    // Dilation k contributes -(-1)^k C(b,k) / k on [-k/2, k/2].
    let weights: Vec<Rational> = (1..=b)
        .map(|k| {
            let sign = if k % 2 == 0 { -1 } else { 1 };
            rat(sign * binomial(b, k), k as i64)
        })
        .collect();
    let mut pts: Vec<Rational> = (1..=b as i64)
        .flat_map(|k| [rat(-k, 2), rat(k, 2)])
        .collect();
    pts.sort();
    pts.dedup();
    let segments = pts
        .windows(2)
        .map(|w| {
            let mid = ((&w[0] + &w[1]) / rat(2, 1)).abs();
            let v = weights
                .iter()
                .enumerate()
                .filter(|(k, _)| mid < rat(*k as i64 + 1, 2))
                .fold(Rational::zero(), |acc, (_, w)| acc + w);
            vec![v]
        })
        .collect();
    PiecewisePoly1D::new(pts, segments)
}

impl KernelSet {
    /// Builds the kernel of order `b` for dimension `d`.
    pub fn new(b: u32, d: usize) -> Result<Self> {
        if d == 0 || d > MAX_DIM {
            return Err(Error::InvalidDimension(d));
        }
        let kappa = build_kappa(b)?;
        let auto = kappa.autocorrelation()?;
        let t = rat(b as i64, 1);
        let fast_kappa = kappa.fast()?;
        let fast_auto = auto.fast()?;
        let norm_tinf = to_f64(&sup_abs_t(&kappa, &auto, d));
        let norm_t1 = if d == 1 {
            let t1 = kappa.linear_combination(&rat(2, 1), &auto, &rat(-1, 1))?;
            to_f64(&t1.abs_integral()?)
        } else {
            abs_integral_t(&kappa, &auto, d)
        };
        let varpi = 1f64.max(norm_t1).max(norm_tinf);
        Ok(KernelSet {
            b,
            d,
            t_f64: to_f64(&t),
            kappa,
            auto,
            t,
            norm_t1,
            norm_tinf,
            varpi,
            fast_kappa,
            fast_auto,
        })
    }

    pub fn order(&self) -> u32 {
        self.b
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn kappa(&self) -> &PiecewisePoly1D {
        &self.kappa
    }

    pub fn autocorr(&self) -> &PiecewisePoly1D {
        &self.auto
    }

    /// Support width: `K` lives on `(-t/2, t/2)` and `T` on `(-t, t)^d`.
    pub fn t(&self) -> f64 {
        self.t_f64
    }

    pub fn t_exact(&self) -> &Rational {
        &self.t
    }

    pub fn norm_t1(&self) -> f64 {
        self.norm_t1
    }

    pub fn norm_tinf(&self) -> f64 {
        self.norm_tinf
    }

    /// `max(1, ||T||_1, ||T||_inf)`.
    pub fn varpi(&self) -> f64 {
        self.varpi
    }

    #[inline]
    pub fn kappa_f64(&self, y: f64) -> f64 {
        self.fast_kappa.eval(y)
    }

    #[inline]
    pub fn auto_f64(&self, y: f64) -> f64 {
        self.fast_auto.eval(y)
    }

    /// Exact `int T = 2 (int K)^d - (int A)^d`.
    pub fn integral_t_exact(&self) -> Rational {
        let ik = self.kappa.integral();
        let ia = self.auto.integral();
        let mut pk = Rational::one();
        let mut pa = Rational::one();
        for _ in 0..self.d {
            pk *= &ik;
            pa *= &ia;
        }
        rat(2, 1) * pk - pa
    }

    /// `T` at an already scaled point `u = x / h`.
    #[inline]
    pub fn t_unscaled(&self, u: &[f64]) -> f64 {
        let mut pk = 1.0;
        let mut pa = 1.0;
        for &v in u {
            if v.abs() >= self.t_f64 {
                return 0.0;
            }
            pk *= self.fast_kappa.eval(v);
            pa *= self.fast_auto.eval(v);
        }
        2.0 * pk - pa
    }

    /// `K` at an already scaled point.
    #[inline]
    pub fn k_unscaled(&self, u: &[f64]) -> f64 {
        let mut pk = 1.0;
        for &v in u {
            pk *= self.fast_kappa.eval(v);
            if pk == 0.0 {
                return 0.0;
            }
        }
        pk
    }

    /// `T_h(x) = V_h^{-1} T(x / h)`.
    pub fn eval_t(&self, x: &[f64], h: &[f64]) -> Result<f64> {
        let (u, v) = self.scale(x, h)?;
        Ok(self.t_unscaled(&u) / v)
    }

    /// `K_h(x) = V_h^{-1} K(x / h)`.
    pub fn eval_k(&self, x: &[f64], h: &[f64]) -> Result<f64> {
        let (u, v) = self.scale(x, h)?;
        Ok(self.k_unscaled(&u) / v)
    }

    /// Cells of `[0, t)` on which `K` is constant and `A` is linear.
    pub fn axis_pieces(&self) -> Vec<AxisPiece> {
        axis_cells(&self.kappa, &self.auto)
            .iter()
            .map(|c| AxisPiece {
                lo: to_f64(&c.lo),
                hi: to_f64(&c.hi),
                k: to_f64(&c.k),
                a0: to_f64(&c.a0),
                a1: to_f64(&c.a1),
            })
            .collect()
    }

    /// Breakpoints and sign changes of the one-dimensional `T = 2K - A`, both signs.
    pub fn t_cuts_1d(&self) -> Vec<f64> {
        let mut cuts = vec![0.0];
        for p in self.axis_pieces() {
            cuts.push(p.hi);
            if p.a1 != 0.0 {
                let r = (2.0 * p.k - p.a0) / p.a1;
                if r > p.lo && r < p.hi {
                    cuts.push(r);
                }
            }
        }
        let mut out: Vec<f64> = cuts.iter().flat_map(|c| [-c, *c]).collect();
        out.sort_by(|a, b| a.total_cmp(b));
        out.dedup();
        out
    }

    fn scale(&self, x: &[f64], h: &[f64]) -> Result<(Vec<f64>, f64)> {
        if x.len() != self.d || h.len() != self.d {
            return Err(Error::Domain(format!(
                "point and bandwidth must have dimension {}",
                self.d
            )));
        }
        if h.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::Domain("bandwidth coordinates must be positive".into()));
        }
        let u = x.iter().zip(h).map(|(a, b)| a / b).collect();
        Ok((u, h.iter().product()))
    }
}

/// A cell `[lo, hi)` of the positive half-axis with `K = k` and `A(x) = a0 + a1 x`.
#[derive(Clone, Copy, Debug)]
pub struct AxisPiece {
    pub lo: f64,
    pub hi: f64,
    pub k: f64,
    pub a0: f64,
    pub a1: f64,
}

// One axis cell on [0, t): constant K value and linear A piece.
#[derive(Clone)]
struct AxisCell {
    lo: Rational,
    hi: Rational,
    k: Rational,
    a0: Rational,
    a1: Rational,
}

fn axis_cells(kappa: &PiecewisePoly1D, auto: &PiecewisePoly1D) -> Vec<AxisCell> {
    let zero = Rational::zero();
    let mut pts: Vec<Rational> = vec![zero.clone()];
    pts.extend(kappa.breakpoints().iter().filter(|b| **b > zero).cloned());
    pts.extend(auto.breakpoints().iter().filter(|b| **b > zero).cloned());
    pts.sort();
    pts.dedup();
    pts.windows(2)
        .map(|w| {
            let mid = (&w[0] + &w[1]) / rat(2, 1);
            let kc = kappa.coeffs_at(&mid);
            let ac = auto.coeffs_at(&mid);
            AxisCell {
                lo: w[0].clone(),
                hi: w[1].clone(),
                k: kc.first().cloned().unwrap_or_else(Rational::zero),
                a0: ac.first().cloned().unwrap_or_else(Rational::zero),
                a1: ac.get(1).cloned().unwrap_or_else(Rational::zero),
            }
        })
        .collect()
}

// T is multilinear on each product cell, so |T| peaks at a cell vertex.
// The set of reachable (prod K, prod A) pairs is accumulated axis by axis.
fn sup_abs_t(kappa: &PiecewisePoly1D, auto: &PiecewisePoly1D, d: usize) -> Rational {
    let cells = axis_cells(kappa, auto);
    let mut per_axis: Vec<(Rational, Rational)> = Vec::new();
    for c in &cells {
        for x in [&c.lo, &c.hi] {
            per_axis.push((c.k.clone(), &c.a0 + &c.a1 * x));
        }
    }
    per_axis.sort();
    per_axis.dedup();
    // Vertices of a product cell pick (cell, endpoint) independently per axis.
    let mut acc: Vec<(Rational, Rational)> = vec![(Rational::one(), Rational::one())];
    for _ in 0..d {
        let mut next = Vec::with_capacity(acc.len() * per_axis.len());
        for (pk, pa) in &acc {
            for (k, a) in &per_axis {
                next.push((pk * k, pa * a));
            }
        }
        next.sort();
        next.dedup();
        acc = next;
    }
    acc.iter()
        .map(|(pk, pa)| (rat(2, 1) * pk - pa).abs())
        .max()
        .unwrap_or_else(Rational::zero)
}

// L1 norm of T for d >= 2: symmetric in each axis, so integrate over the
// positive orthant. The innermost axis is integrated exactly; on the next
// axis the integrand is smooth between explicitly computed kinks; any
// further axes use adaptive Gauss-Legendre.
fn abs_integral_t(kappa: &PiecewisePoly1D, auto: &PiecewisePoly1D, d: usize) -> f64 {
    #[derive(Clone, Copy)]
    struct Cell {
        lo: f64,
        hi: f64,
        k: f64,
        a0: f64,
        a1: f64,
    }
    let cells: Vec<Cell> = axis_cells(kappa, auto)
        .iter()
        .map(|c| Cell {
            lo: to_f64(&c.lo),
            hi: to_f64(&c.hi),
            k: to_f64(&c.k),
            a0: to_f64(&c.a0),
            a1: to_f64(&c.a1),
        })
        .collect();

    fn abs_linear(alpha: f64, beta: f64, lo: f64, hi: f64) -> f64 {
        let prim = |x: f64| alpha * x + 0.5 * beta * x * x;
        if beta != 0.0 {
            let r = -alpha / beta;
            if r > lo && r < hi {
                return (prim(r) - prim(lo)).abs() + (prim(hi) - prim(r)).abs();
            }
        }
        (prim(hi) - prim(lo)).abs()
    }

    fn last(cells: &[Cell], pk: f64, pa: f64) -> f64 {
        cells
            .iter()
            .map(|c| abs_linear(2.0 * pk * c.k - pa * c.a0, -pa * c.a1, c.lo, c.hi))
            .sum()
    }

    // Integral over the last two axes given the running products.
    fn last_two(cells: &[Cell], pk: f64, pa: f64) -> f64 {
        let mut total = 0.0;
        for c in cells {
            let mut cuts = vec![c.lo, c.hi];
            if c.a1 != 0.0 {
                cuts.push(-c.a0 / c.a1);
                // Inner root meets an inner cell edge: linear in x.
                for e in cells {
                    for y in [e.lo, e.hi] {
                        let lin = e.a0 + e.a1 * y;
                        if pa * lin != 0.0 {
                            cuts.push((2.0 * pk * c.k * e.k / (pa * lin) - c.a0) / c.a1);
                        }
                    }
                }
            }
            let pts = crate::quadrature::panels(c.lo, c.hi, cuts);
            let f = |x: f64| last(cells, pk * c.k, pa * (c.a0 + c.a1 * x));
            for w in pts.windows(2) {
                total += crate::quadrature::adaptive_gauss(&f, w[0], w[1], 1e-14, 12);
            }
        }
        total
    }

    fn rec(cells: &[Cell], remaining: usize, pk: f64, pa: f64) -> f64 {
        if remaining == 1 {
            return last(cells, pk, pa);
        }
        if remaining == 2 {
            return last_two(cells, pk, pa);
        }
        cells
            .iter()
            .map(|c| {
                let f = |x: f64| rec(cells, remaining - 1, pk * c.k, pa * (c.a0 + c.a1 * x));
                crate::quadrature::adaptive_gauss(&f, c.lo, c.hi, 1e-11, 10)
            })
            .sum()
    }

    (1u32 << d) as f64 * rec(&cells, d, 1.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kappa_integrates_to_one_for_all_orders() {
        for b in 2..=MAX_ORDER {
            let k = build_kappa(b).unwrap();
            assert_eq!(k.integral(), Rational::one(), "b={b}");
            assert!(k.is_symmetric());
        }
    }

    #[test]
    fn order_two_values() {
        let k = build_kappa(2).unwrap();
        assert_eq!(k.eval_exact(&rat(0, 1)), rat(3, 2));
        assert_eq!(k.eval_exact(&rat(3, 4)), rat(-1, 2));
        assert_eq!(k.eval_exact(&rat(-3, 4)), rat(-1, 2));
        assert_eq!(k.eval_exact(&rat(1, 1)), Rational::zero());
        assert_eq!(k.eval_exact(&rat(7, 5)), Rational::zero());
        let a = k.autocorrelation().unwrap();
        assert_eq!(a.eval_exact(&rat(0, 1)), rat(5, 2));
        assert_eq!(a.support(), (rat(-2, 1), rat(2, 1)));
        assert_eq!(a.integral(), Rational::one());
    }

    #[test]
    fn invalid_order_rejected() {
        assert!(matches!(build_kappa(1), Err(Error::InvalidOrder(1))));
        assert!(matches!(KernelSet::new(0, 1), Err(Error::InvalidOrder(0))));
        assert!(matches!(KernelSet::new(2, 0), Err(Error::InvalidDimension(0))));
    }

    #[test]
    fn t_at_origin_order_two() {
        let ks = KernelSet::new(2, 1).unwrap();
        assert_eq!(ks.eval_t(&[0.0], &[1.0]).unwrap(), 0.5);
        assert_eq!(ks.eval_t(&[2.0], &[1.0]).unwrap(), 0.0);
        assert_eq!(ks.eval_t(&[-2.5], &[1.0]).unwrap(), 0.0);
        let ks2 = KernelSet::new(2, 2).unwrap();
        let h = [0.5, 0.25];
        let v = ks2.eval_k(&[0.0, 0.0], &h).unwrap();
        assert!((v - 1.5f64.powi(2) / 0.125).abs() < 1e-12);
        assert!(ks.eval_t(&[0.0], &[0.0]).is_err());
        assert!(ks.eval_t(&[0.0], &[-1.0]).is_err());
    }

    #[test]
    fn fast_matches_exact() {
        for b in 2..=MAX_ORDER {
            let k = build_kappa(b).unwrap();
            let a = k.autocorrelation().unwrap();
            let fk = k.fast().unwrap();
            let fa = a.fast().unwrap();
            for i in -400..=400 {
                let x = i as f64 * 0.0237;
                assert!((fk.eval(x) - k.eval(x)).abs() < 1e-12);
                assert!((fa.eval(x) - a.eval(x)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn integral_of_t_is_one() {
        for d in 1..=2 {
            let ks = KernelSet::new(3, d).unwrap();
            assert_eq!(ks.integral_t_exact(), Rational::one());
        }
    }

    #[test]
    fn varpi_at_least_one_and_norms_consistent() {
        for b in 2..=5 {
            for d in 1..=2 {
                let ks = KernelSet::new(b, d).unwrap();
                assert!(ks.varpi() >= 1.0);
                // ||T||_1 >= |int T| = 1.
                assert!(ks.norm_t1() >= 1.0 - 1e-12);
            }
        }
    }

    #[test]
    fn numeric_l1_matches_exact_in_one_dimension() {
        let k = build_kappa(3).unwrap();
        let a = k.autocorrelation().unwrap();
        let exact = to_f64(
            &k.linear_combination(&rat(2, 1), &a, &rat(-1, 1))
                .unwrap()
                .abs_integral()
                .unwrap(),
        );
        let numeric = abs_integral_t(&k, &a, 1);
        assert!((exact - numeric).abs() < 1e-12);
    }

    #[test]
    fn l1_norm_d2_matches_midpoint_sum() {
        let ks = KernelSet::new(2, 2).unwrap();
        let n = 1600;
        let step = 2.0 * ks.t() / n as f64;
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let u = [-ks.t() + (i as f64 + 0.5) * step, -ks.t() + (j as f64 + 0.5) * step];
                total += ks.t_unscaled(&u).abs();
            }
        }
        total *= step * step;
        assert!((total - ks.norm_t1()).abs() < 2e-4, "{total} vs {}", ks.norm_t1());
    }

    #[test]
    fn l1_norm_d3_is_consistent() {
        for b in [2, 4] {
            let ks = KernelSet::new(b, 3).unwrap();
            assert!(ks.norm_t1() >= 1.0 && ks.norm_t1().is_finite());
            assert!(ks.norm_t1() <= ks.norm_tinf() * (2.0 * ks.t()).powi(3));
        }
    }

    #[test]
    fn sup_norm_d1_matches_direct_scan() {
        let ks = KernelSet::new(2, 1).unwrap();
        let mut best: f64 = 0.0;
        for i in 0..200_000 {
            let x = i as f64 * 2.0 / 200_000.0;
            best = best.max(ks.t_unscaled(&[x]).abs());
        }
        assert!(best <= ks.norm_tinf() + 1e-12);
        assert!(ks.norm_tinf() - best < 1e-4);
    }

    #[test]
    fn bad_breakpoints_rejected() {
        let r = PiecewisePoly1D::new(vec![rat(1, 1), rat(0, 1)], vec![vec![rat(1, 1)]]);
        assert!(r.is_err());
    }
}
