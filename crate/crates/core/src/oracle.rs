//! Population quantities for a known density: bias, population upper
//! functions, oracle risks and the closed-form constants.
//!
//! Every zoo density is a mixture of product densities, so most functionals
//! factor into one-dimensional integrals of marginals, their kernel
//! smoothings `s = K_h * f` and the pointwise biases `s - f`.

use std::collections::HashMap;

use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::density::{DensityModel, Marginal};
use crate::error::{Error, Result};
use crate::grid::BandwidthGrid;
use crate::kernel::{AxisPiece, KernelSet};
use crate::quadrature::{gauss_legendre, integrate_gauss, panels, Tolerance};
use crate::ustat::s_of_q;

/// Largest dimension supported by the quadrature routines.
pub const MAX_ORACLE_DIM: usize = 2;

/// `Lambda_q`, `Lambda*_q` and `Omega_q` for a kernel with constant `varpi`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Constants {
    pub lambda_q: f64,
    pub lambda_star_q: f64,
    pub omega_q: f64,
}

pub fn constants(q: f64, varpi: f64, d: usize) -> Result<Constants> {
    if !(q >= 1.0) {
        return Err(Error::InvalidParameter(format!("q must be >= 1, got {q}")));
    }
    let g = gamma(q + 1.0);
    let two = |e: f64| 2f64.powf(e);
    let lambda_q = two(q + 1.0)
        * varpi.powf(q)
        * (1.0
            + two(2.0 * q - 1.0) * (1.0 + two(q) * g)
            + two(2.0 * q - 2.0)
                * g
                * (0.5 * (3.0 * (12.0 * q + 2.0).sqrt()).powf(q) + (28.0 * (6.0 * q + 1.0)).powf(q)));
    let lambda_star_q = two(q - 1.0) * lambda_q + g * (8.0 * varpi).powf(q);
    let omega_q = 3f64.powi(d as i32 + 1) * (24.0 * q + 4.0).powi(2) * varpi;
    Ok(Constants {
        lambda_q,
        lambda_star_q,
        omega_q,
    })
}

/// Which population quantities to compute.
#[derive(Clone, Copy, Debug)]
pub struct OracleOptions {
    /// Compute `J_h(f)`, `W_h(f)`, `U_h(f)` and `U*_h(f)`.
    pub population: bool,
    /// Compute the bias-gap term and the full oracle risk.
    pub bias_gap: bool,
    /// Grid points per axis for the supremum defining `W_h(f)` in one dimension.
    pub w_grid_points: usize,
}

impl OracleOptions {
    pub fn for_dim(d: usize) -> Self {
        OracleOptions {
            population: true,
            bias_gap: d == 1,
            w_grid_points: 4097,
        }
    }

    pub fn risk_only() -> Self {
        OracleOptions {
            population: false,
            bias_gap: false,
            w_grid_points: 4097,
        }
    }
}

/// Population quantities at one grid member.
#[derive(Clone, Debug, Serialize)]
pub struct OracleRow {
    pub exponents: Vec<u32>,
    pub h: Vec<f64>,
    pub volume: f64,
    pub small: bool,
    /// `int int T_h(y - z) f(y) f(z) dy dz`, the mean of `N_hat`.
    pub mean_n: f64,
    /// `||B_h||_2^2`.
    pub bias_sq: f64,
    pub bias_gap: Option<f64>,
    pub frak_b: f64,
    pub j: Option<f64>,
    pub w: Option<f64>,
    pub w_cal: f64,
    pub w_star: f64,
    pub kappa: f64,
    pub u_det: Option<f64>,
    pub u_star: Option<f64>,
    pub frak_u: f64,
}

/// Full oracle report over a grid.
#[derive(Clone, Debug, Serialize)]
pub struct OracleReport {
    pub density: String,
    pub m: usize,
    pub d: usize,
    pub q: f64,
    pub b: u32,
    pub l2_sq: f64,
    pub sup_norm: f64,
    pub remainder: f64,
    pub o_star: f64,
    pub o_star_argmin: Vec<u32>,
    pub o_full: Option<f64>,
    pub constants: Constants,
    pub rows: Vec<OracleRow>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Kind {
    F,
    S,
    D,
}

/// Kernel-smoothing helper for one marginal.
struct Smoother {
    // (lo, hi, value) of the 1-D kernel pieces.
    segments: Vec<(f64, f64, f64)>,
    breaks: Vec<f64>,
    half: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Smoother {
    fn new(kernels: &KernelSet) -> Self {
        let breaks: Vec<f64> = kernels
            .kappa()
            .breakpoints()
            .iter()
            .map(|b| num_traits::ToPrimitive::to_f64(b).expect("finite breakpoint"))
            .collect();
        let segments = breaks
            .windows(2)
            .map(|w| (w[0], w[1], kernels.kappa_f64(0.5 * (w[0] + w[1]))))
            .collect();
        let (nodes, weights) = gauss_legendre(20);
        Smoother {
            segments,
            half: 0.5 * kernels.order() as f64,
            breaks,
            nodes,
            weights,
        }
    }

    fn gl(&self, f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        let c = 0.5 * (a + b);
        let r = 0.5 * (b - a);
        r * self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(c + r * x))
            .sum::<f64>()
    }

    /// `s(x) = int K(u) f(x + a u) du`, split at the kinks of `f`.
    fn smooth(&self, m: &Marginal, kinks: &[f64], a: f64, x: f64) -> f64 {
        let mut total = 0.0;
        for &(lo, hi, c) in &self.segments {
            let mut cuts = vec![lo, hi];
            for k in kinks {
                let u = (k - x) / a;
                if u > lo && u < hi {
                    cuts.push(u);
                }
            }
            cuts.sort_by(|p, q| p.total_cmp(q));
            let f = |u: f64| m.pdf(x + a * u);
            for w in cuts.windows(2) {
                total += c * self.gl(&f, w[0], w[1]);
            }
        }
        total
    }

    fn eval(&self, kind: Kind, m: &Marginal, kinks: &[f64], a: f64, x: f64) -> f64 {
        match kind {
            Kind::F => m.pdf(x),
            Kind::S => self.smooth(m, kinks, a, x),
            Kind::D => self.smooth(m, kinks, a, x) - m.pdf(x),
        }
    }
}

fn tol(rel: f64) -> Tolerance {
    Tolerance {
        rel,
        abs: 1e-300,
        max_depth: 18,
    }
}

/// Oracle calculator bound to a density and kernel.
pub struct Oracle<'a> {
    model: &'a DensityModel,
    kernels: &'a KernelSet,
    smoother: Smoother,
    marginals: Vec<Marginal>,
    // comp_axis[c][j] = index into `marginals`.
    comp_axis: Vec<Vec<usize>>,
    weights: Vec<f64>,
    cache: HashMap<(usize, usize, Kind, Kind, u32), f64>,
}

/// Bandwidth `e^{-q4/4}` encoded by its quarter exponent.
fn quarter_h(q4: u32) -> f64 {
    (-(q4 as f64) / 4.0).exp()
}

impl<'a> Oracle<'a> {
    pub fn new(model: &'a DensityModel, kernels: &'a KernelSet) -> Result<Self> {
        let d = model.dim();
        if d > MAX_ORACLE_DIM {
            return Err(Error::InvalidDimension(d));
        }
        if kernels.dim() != d {
            return Err(Error::Domain("kernel and density dimensions differ".into()));
        }
        let mut marginals: Vec<Marginal> = Vec::new();
        let mut comp_axis = Vec::new();
        for c in model.components() {
            let mut row = Vec::new();
            for m in &c.marginals {
                let idx = match marginals.iter().position(|x| x == m) {
                    Some(i) => i,
                    None => {
                        marginals.push(m.clone());
                        marginals.len() - 1
                    }
                };
                row.push(idx);
            }
            comp_axis.push(row);
        }
        Ok(Oracle {
            model,
            kernels,
            smoother: Smoother::new(kernels),
            marginals,
            comp_axis,
            weights: model.components().iter().map(|c| c.weight).collect(),
            cache: HashMap::new(),
        })
    }

    fn ncomp(&self) -> usize {
        self.weights.len()
    }

    /// `int phi_a psi_b` for marginals `ia`, `ib` at bandwidth `e^{-q4/4}`.
    fn axis_integral(&mut self, ia: usize, ib: usize, ka: Kind, kb: Kind, q4: u32) -> Result<f64> {
        let (ia, ib, ka, kb) = if (ka, ia) <= (kb, ib) { (ia, ib, ka, kb) } else { (ib, ia, kb, ka) };
        let q4 = if ka == Kind::F && kb == Kind::F { 0 } else { q4 };
        if let Some(v) = self.cache.get(&(ia, ib, ka, kb, q4)) {
            return Ok(*v);
        }
        let ma = &self.marginals[ia];
        let mb = &self.marginals[ib];
        let v = if ka == Kind::F && kb == Kind::F && ma.cross_l2(mb).is_some() {
            ma.cross_l2(mb).expect("checked")
        } else {
            let a = quarter_h(q4);
            let sm = &self.smoother;
            let (la, ha) = ma.support();
            let (lb, hb) = mb.support();
            let pad = sm.half * a;
            let lo = la.min(lb) - pad;
            let hi = ha.max(hb) + pad;
            let kinks_a = ma.kinks();
            let kinks_b = mb.kinks();
            let mut cuts: Vec<f64> = Vec::new();
            for (kind, kinks) in [(ka, &kinks_a), (kb, &kinks_b)] {
                cuts.extend(kinks.iter().copied());
                if kind != Kind::F {
                    for k in kinks.iter() {
                        cuts.extend(sm.breaks.iter().map(|u| k - a * u));
                    }
                }
            }
            let f = |x: f64| sm.eval(ka, ma, &kinks_a, a, x) * sm.eval(kb, mb, &kinks_b, a, x);
            let floor = 1e-13 * ma.sup() * mb.sup() * (hi - lo);
            let tolerance = Tolerance { abs: floor, ..tol(1e-11) };
            integrate_gauss(&f, &panels(lo, hi, cuts), tolerance)?
        };
        self.cache.insert((ia, ib, ka, kb, q4), v);
        Ok(v)
    }

    /// `||B_h||_2^2` at the bandwidth with quarter exponents `q4` per axis.
    fn bias_sq_q4(&mut self, q4: &[u32]) -> Result<f64> {
        let d = q4.len();
        let n = self.ncomp();
        let kind = |l: usize, j: usize| {
            if j < l {
                Kind::F
            } else if j == l {
                Kind::D
            } else {
                Kind::S
            }
        };
        let mut total = 0.0;
        for c in 0..n {
            for c2 in 0..n {
                let w = self.weights[c] * self.weights[c2];
                for l in 0..d {
                    for l2 in 0..d {
                        let mut p = w;
                        for (j, &qj) in q4.iter().enumerate().take(d) {
                            let (ia, ib) = (self.comp_axis[c][j], self.comp_axis[c2][j]);
                            p *= self.axis_integral(ia, ib, kind(l, j), kind(l2, j), qj)?;
                        }
                        total += p;
                    }
                }
            }
        }
        Ok(total.max(0.0))
    }

    /// `||B_h||_2^2` for grid exponents.
    pub fn bias_sq(&mut self, exponents: &[u32]) -> Result<f64> {
        let q4: Vec<u32> = exponents.iter().map(|k| 4 * k).collect();
        self.bias_sq_q4(&q4)
    }

    /// `||b_{a,l}||_2` at `a = e^{-q4/4}`.
    fn b_norm(&mut self, l: usize, q4: u32) -> Result<f64> {
        let d = self.model.dim();
        let n = self.ncomp();
        let mut total = 0.0;
        for c in 0..n {
            for c2 in 0..n {
                let mut p = self.weights[c] * self.weights[c2];
                for j in 0..d {
                    let (ia, ib) = (self.comp_axis[c][j], self.comp_axis[c2][j]);
                    p *= if j == l {
                        self.axis_integral(ia, ib, Kind::D, Kind::D, q4)?
                    } else {
                        self.axis_integral(ia, ib, Kind::F, Kind::F, 0)?
                    };
                }
                total += p;
            }
        }
        Ok(total.max(0.0).sqrt())
    }

    /// `max_l sup_{a <= h_l} ||b_{a,l}||_2` over `a = h_l e^{-i/4}`, `i = 0..8`.
    pub fn frak_b(&mut self, exponents: &[u32]) -> Result<f64> {
        let mut best: f64 = 0.0;
        for (l, &k) in exponents.iter().enumerate() {
            for i in 0..=8 {
                best = best.max(self.b_norm(l, 4 * k + i)?);
            }
        }
        Ok(best)
    }

    /// `b_{a,j}(x)`, evaluated pointwise.
    pub fn b_aj(&self, a: f64, j: usize, x: &[f64]) -> f64 {
        let mut total = 0.0;
        for (c, comp) in self.model.components().iter().enumerate() {
            let mut p = self.weights[c];
            for (axis, m) in comp.marginals.iter().enumerate() {
                if axis == j {
                    p *= self.smoother.eval(Kind::D, m, &m.kinks(), a, x[axis]);
                } else {
                    p *= m.pdf(x[axis]);
                }
            }
            total += p;
            let _ = &self.comp_axis[c];
        }
        total
    }

    /// `B_h(x) = S_h(x) - f(x)`.
    pub fn bias_field(&self, h: &[f64], x: &[f64]) -> f64 {
        let mut s = 0.0;
        for (c, comp) in self.model.components().iter().enumerate() {
            let mut p = self.weights[c];
            for (axis, m) in comp.marginals.iter().enumerate() {
                p *= self.smoother.eval(Kind::S, m, &m.kinks(), h[axis], x[axis]);
            }
            s += p;
        }
        s - self.model.eval(x)
    }

    // (pair weight, marginal a, marginal b) for every component pair.
    fn pairs(&self) -> Vec<(f64, Vec<(usize, usize)>)> {
        let n = self.ncomp();
        let mut out = Vec::new();
        for c in 0..n {
            for c2 in 0..n {
                let axes = (0..self.model.dim())
                    .map(|j| (self.comp_axis[c][j], self.comp_axis[c2][j]))
                    .collect();
                out.push((self.weights[c] * self.weights[c2], axes));
            }
        }
        out
    }

    /// `int (kernel)(v) g(h v) dv` on one axis, with `g` the cross-correlation.
    fn kernel_against_g(&self, ia: usize, ib: usize, h: f64, auto: bool) -> Result<f64> {
        let ma = &self.marginals[ia];
        let mb = &self.marginals[ib];
        let radius = if auto { self.kernels.t() } else { self.smoother.half };
        let mut cuts: Vec<f64> = if auto {
            self.kernels
                .autocorr()
                .breakpoints()
                .iter()
                .map(|b| num_traits::ToPrimitive::to_f64(b).expect("finite"))
                .collect()
        } else {
            self.smoother.breaks.clone()
        };
        cuts.extend(ma.cross_correlation_kinks(mb).iter().map(|k| k / h));
        let ks = self.kernels;
        let f = |v: f64| {
            let k = if auto { ks.auto_f64(v) } else { ks.kappa_f64(v) };
            k * ma.cross_correlation(mb, h * v)
        };
        integrate_gauss(&f, &panels(-radius, radius, cuts), tol(1e-11))
    }

    /// `E N_hat_h = int T_h(u) g(u) du` through the product structure of `T`.
    pub fn mean_n(&self, h: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for (w, axes) in self.pairs() {
            let mut pk = 1.0;
            let mut pa = 1.0;
            for (j, &(ia, ib)) in axes.iter().enumerate() {
                pk *= self.kernel_against_g(ia, ib, h[j], false)?;
                pa *= self.kernel_against_g(ia, ib, h[j], true)?;
            }
            total += w * (2.0 * pk - pa);
        }
        Ok(total)
    }

    fn g_kinks(&self, axis: usize) -> Vec<f64> {
        let mut out = Vec::new();
        for (_, axes) in self.pairs() {
            let (ia, ib) = axes[axis];
            out.extend(self.marginals[ia].cross_correlation_kinks(&self.marginals[ib]));
        }
        out
    }

    /// `J_h(f) = int |T_h(u)| g(u) du`.
    pub fn j_pop(&self, h: &[f64]) -> Result<f64> {
        let pairs = self.pairs();
        let ks = self.kernels;
        let t = ks.t();
        let ga = |axis: usize, pair: &(f64, Vec<(usize, usize)>), u: f64| {
            let (ia, ib) = pair.1[axis];
            self.marginals[ia].cross_correlation(&self.marginals[ib], u)
        };
        match h.len() {
            1 => {
                let mut cuts = ks.t_cuts_1d();
                cuts.extend(self.g_kinks(0).iter().map(|k| k / h[0]));
                let f = |v: f64| {
                    let g: f64 = pairs.iter().map(|p| p.0 * ga(0, p, h[0] * v)).sum();
                    ks.t_unscaled(&[v]).abs() * g
                };
                integrate_gauss(&f, &panels(-t, t, cuts), tol(1e-10))
            }
            2 => {
                let pieces = ks.axis_pieces();
                let inner_kinks: Vec<f64> = self.g_kinks(1).iter().map(|k| k / h[1]).collect();
                let inner = |v1: f64| -> f64 {
                    let k1 = ks.kappa_f64(v1);
                    let a1 = ks.auto_f64(v1);
                    let coef: Vec<f64> = pairs.iter().map(|p| p.0 * ga(0, p, h[0] * v1)).collect();
                    let mut cuts = two_axis_roots(&pieces, k1, a1);
                    cuts.extend(inner_kinks.iter().copied());
                    let f = |v2: f64| {
                        let tv = 2.0 * k1 * ks.kappa_f64(v2) - a1 * ks.auto_f64(v2);
                        let g: f64 = pairs.iter().zip(&coef).map(|(p, c)| c * ga(1, p, h[1] * v2)).sum();
                        tv.abs() * g
                    };
                    integrate_gauss(&f, &panels(-t, t, cuts), tol(1e-10)).unwrap_or(f64::NAN)
                };
                let mut cuts = outer_kinks(&pieces);
                cuts.extend(self.g_kinks(0).iter().map(|k| k / h[0]));
                let v = integrate_gauss(&inner, &panels(-t, t, cuts), tol(1e-8))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::QuadratureFailure("inner integral of J did not converge".into()))
                }
            }
            d => Err(Error::InvalidDimension(d)),
        }
    }

    /// `x -> int |T_h(v)| f(x + h v) dv` (convolution of `|T_h|` with `f`).
    fn abs_t_conv(&self, h: &[f64], x: &[f64], nodes: &(Vec<f64>, Vec<f64>)) -> f64 {
        let ks = self.kernels;
        let t = ks.t();
        let kinks: Vec<Vec<f64>> = (0..h.len())
            .map(|j| {
                self.model
                    .components()
                    .iter()
                    .flat_map(|c| c.marginals[j].kinks())
                    .collect()
            })
            .collect();
        let gl = |f: &dyn Fn(f64) -> f64, a: f64, b: f64| {
            let c = 0.5 * (a + b);
            let r = 0.5 * (b - a);
            r * nodes.0.iter().zip(&nodes.1).map(|(z, w)| w * f(c + r * z)).sum::<f64>()
        };
        match h.len() {
            1 => {
                let mut cuts = ks.t_cuts_1d();
                cuts.extend(kinks[0].iter().map(|k| (k - x[0]) / h[0]));
                let f = |v: f64| ks.t_unscaled(&[v]).abs() * self.model.eval(&[x[0] + h[0] * v]);
                panels(-t, t, cuts).windows(2).map(|w| gl(&f, w[0], w[1])).sum()
            }
            _ => {
                let pieces = ks.axis_pieces();
                let mut outer = outer_kinks(&pieces);
                outer.extend(kinks[0].iter().map(|k| (k - x[0]) / h[0]));
                let inner = |v1: f64| {
                    let k1 = ks.kappa_f64(v1);
                    let a1 = ks.auto_f64(v1);
                    let mut cuts = two_axis_roots(&pieces, k1, a1);
                    cuts.extend(kinks[1].iter().map(|k| (k - x[1]) / h[1]));
                    let f = |v2: f64| {
                        let tv = 2.0 * k1 * ks.kappa_f64(v2) - a1 * ks.auto_f64(v2);
                        tv.abs() * self.model.eval(&[x[0] + h[0] * v1, x[1] + h[1] * v2])
                    };
                    panels(-t, t, cuts).windows(2).map(|w| gl(&f, w[0], w[1])).sum::<f64>()
                };
                panels(-t, t, outer).windows(2).map(|w| gl(&inner, w[0], w[1])).sum()
            }
        }
    }

    /// `W_h(f) = sup_x int |T_h(y - x)| f(y) dy`.
    ///
    /// One dimension: a uniform grid on the dilated support, then a
    /// golden-section polish around the best grid point. Two dimensions: a
    /// local stencil search from every component mode, then coordinatewise
    /// golden-section polish.
    pub fn w_pop(&self, h: &[f64], grid_points: usize) -> f64 {
        let nodes = gauss_legendre(20);
        let t = self.kernels.t();
        let eval = |x: &[f64]| self.abs_t_conv(h, x, &nodes);
        let sb = self.model.support_box();
        if h.len() == 1 {
            let (lo, hi) = (sb[0].0 - t * h[0], sb[0].1 + t * h[0]);
            let n = grid_points.max(3);
            let step = (hi - lo) / (n - 1) as f64;
            let mut best = (lo, f64::NEG_INFINITY);
            for i in 0..n {
                let x = lo + step * i as f64;
                let v = eval(&[x]);
                if v > best.1 {
                    best = (x, v);
                }
            }
            let polished = golden_max(&|x| eval(&[x]), best.0 - step, best.0 + step, 60);
            return best.1.max(polished.1);
        }
        let mut starts: Vec<Vec<f64>> = self
            .model
            .components()
            .iter()
            .map(|c| c.marginals.iter().map(Marginal::center).collect())
            .collect();
        starts.dedup();
        let mut best = f64::NEG_INFINITY;
        for s in starts {
            let mut x = s.clone();
            let mut fx = eval(&x);
            // 5 x 5 stencil at spacing t h_j / 2.
            for a in -2i32..=2 {
                for b in -2i32..=2 {
                    let y = [s[0] + 0.5 * t * h[0] * a as f64, s[1] + 0.5 * t * h[1] * b as f64];
                    let v = eval(&y);
                    if v > fx {
                        fx = v;
                        x = y.to_vec();
                    }
                }
            }
            for _ in 0..2 {
                for axis in 0..2 {
                    let r = 0.5 * t * h[axis];
                    let base = x.clone();
                    let line = |z: f64| {
                        let mut y = base.clone();
                        y[axis] = z;
                        eval(&y)
                    };
                    let (z, v) = golden_max(&line, x[axis] - r, x[axis] + r, 40);
                    if v > fx {
                        fx = v;
                        x[axis] = z;
                    }
                }
            }
            best = best.max(fx);
        }
        best
    }

    /// `sup_k P(X / h in Pi*_k)`.
    pub fn max_box_probability(&self, h: &[f64]) -> Result<f64> {
        let t = self.kernels.t();
        let sb = self.model.support_box();
        let ranges: Vec<(i64, i64)> = (0..h.len())
            .map(|j| {
                let w = t * h[j];
                ((sb[j].0 / w).floor() as i64 - 2, (sb[j].1 / w).ceil() as i64 + 2)
            })
            .collect();
        let count: f64 = ranges.iter().map(|(a, b)| (b - a + 1) as f64).product();
        if count > 2e7 {
            return Err(Error::UnsupportedParameters(format!(
                "{count:.0} boxes needed for the box-probability supremum"
            )));
        }
        let mut best: f64 = 0.0;
        let mut k: Vec<i64> = ranges.iter().map(|r| r.0).collect();
        loop {
            let lo: Vec<f64> = (0..h.len()).map(|j| (k[j] - 1) as f64 * t * h[j]).collect();
            let hi: Vec<f64> = (0..h.len()).map(|j| (k[j] + 2) as f64 * t * h[j]).collect();
            best = best.max(self.model.box_mass(&lo, &hi));
            let mut axis = 0;
            loop {
                if axis == h.len() {
                    return Ok(best);
                }
                k[axis] += 1;
                if k[axis] <= ranges[axis].1 {
                    break;
                }
                k[axis] = ranges[axis].0;
                axis += 1;
            }
        }
    }

    /// `W_cal_h(f) = V^{-1} max(256 s ln m / m, sup_k P(X/h in Pi*_k))`.
    pub fn w_cal(&self, h: &[f64], m: usize, q: f64) -> Result<f64> {
        let mf = m as f64;
        let v: f64 = h.iter().product();
        let floor = 256.0 * s_of_q(q) * mf.ln() / mf;
        let sup = if floor >= 1.0 { 0.0 } else { self.max_box_probability(h)? };
        Ok(floor.max(sup) / v)
    }

    /// Computes every row and the oracle risks.
    pub fn report(&mut self, grid: &BandwidthGrid, q: f64, opts: OracleOptions) -> Result<OracleReport> {
        let d = self.model.dim();
        if grid.dim() != d {
            return Err(Error::Domain("grid and density dimensions differ".into()));
        }
        let l2_sq = self
            .model
            .l2_sq_exact()
            .ok_or_else(|| Error::Domain("density has no closed-form L2 norm".into()))?;
        let l2 = l2_sq.sqrt();
        let sup = self.model.sup_norm();
        let m = grid.m();
        let mf = m as f64;
        let ln_m = mf.ln();
        let s = s_of_q(q);
        let varpi = self.kernels.varpi();
        let alpha = grid.alpha();
        let mut rows = Vec::with_capacity(grid.len());
        for mb in grid.members() {
            let v = mb.volume;
            let bias_sq = self.bias_sq(&mb.exponents)?;
            let frak_b = self.frak_b(&mb.exponents)?;
            let mean_n = self.mean_n(&mb.h)?;
            let w_cal = if mb.small { f64::NAN } else { self.w_cal(&mb.h, m, q)? };
            let w_star = if mb.small { 1.0 / alpha } else { w_cal };
            let kappa = if mb.small {
                1.0 / alpha
            } else {
                (256.0 * s * ln_m / (mf * v)).max(sup)
            };
            let frak_u = (kappa * l2_sq * ln_m / mf).sqrt()
                + (l2_sq * ln_m / (mf * mf * v)).sqrt()
                + kappa * ln_m / mf
                + mb.upsilon * ln_m / (mf * mf * v);
            let (j, w, u_det, u_star) = if opts.population {
                let j = self.j_pop(&mb.h)?;
                let w = self.w_pop(&mb.h, opts.w_grid_points);
                let tail = mb.upsilon * s * s * varpi * ln_m / (mf * mf * v);
                let second = (16.0 * s * varpi * j * ln_m / (mf * mf * v)).sqrt();
                let u_det = (16.0 * s * w * j * ln_m / mf).sqrt() + second + 23.0 * s * w * ln_m / mf + tail;
                let u_star = (16.0 * s * varpi * w_star * j * ln_m / mf).sqrt()
                    + second
                    + 147.0 * s * varpi * w_star * ln_m / mf
                    + tail;
                (Some(j), Some(w), Some(u_det), Some(u_star))
            } else {
                (None, None, None, None)
            };
            rows.push(OracleRow {
                exponents: mb.exponents.clone(),
                h: mb.h.clone(),
                volume: v,
                small: mb.small,
                mean_n,
                bias_sq,
                bias_gap: None,
                frak_b,
                j,
                w,
                w_cal: if mb.small { self.w_cal(&mb.h, m, q).unwrap_or(f64::NAN) } else { w_cal },
                w_star,
                kappa,
                u_det,
                u_star,
                frak_u,
            });
        }
        if opts.bias_gap {
            let b: Vec<f64> = rows.iter().map(|r| r.bias_sq).collect();
            for i in 0..rows.len() {
                let gap = (0..rows.len())
                    .map(|w| (b[grid.join(i, w)] - b[w]).abs())
                    .fold(0.0, f64::max);
                rows[i].bias_gap = Some(gap);
            }
        }
        let remainder = ln_m.powf(d as f64 / (2.0 * q)) / (mf * mf);
        let star: Vec<f64> = rows
            .iter()
            .map(|r| r.frak_b * r.frak_b + l2 * r.frak_b + r.frak_u)
            .collect();
        let (arg, o_star_min) = min_index(&star);
        let o_full = if opts.bias_gap {
            let full: Vec<f64> = rows
                .iter()
                .map(|r| r.bias_sq + r.bias_gap.unwrap_or(0.0) + r.frak_u)
                .collect();
            Some(min_index(&full).1 + remainder)
        } else {
            None
        };
        Ok(OracleReport {
            density: self.model.name.clone(),
            m,
            d,
            q,
            b: self.kernels.order(),
            l2_sq,
            sup_norm: sup,
            remainder,
            o_star: o_star_min + remainder,
            o_star_argmin: rows[arg].exponents.clone(),
            o_full,
            constants: constants(q, varpi, d)?,
            rows,
        })
    }
}

/// Index and value of the smallest entry (first on ties).
pub fn min_index(v: &[f64]) -> (usize, f64) {
    v.iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &x)| if x < acc.1 { (i, x) } else { acc })
}

/// `min_h (minimand_h) + remainder`.
pub fn oracle_min(minimand: &[f64], remainder: f64) -> f64 {
    min_index(minimand).1 + remainder
}

fn golden_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut e = a + g * (b - a);
    let (mut fc, mut fe) = (f(c), f(e));
    for _ in 0..iters {
        if fc > fe {
            b = e;
            e = c;
            fe = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + g * (b - a);
            fe = f(e);
        }
    }
    if fc > fe {
        (c, fc)
    } else {
        (e, fe)
    }
}

// Cuts in v2 for T(v1, .) with K(v1) = k1, A(v1) = a1: cell edges and roots.
fn two_axis_roots(pieces: &[AxisPiece], k1: f64, a1: f64) -> Vec<f64> {
    let mut cuts = vec![0.0];
    for p in pieces {
        cuts.push(p.hi);
        cuts.push(-p.hi);
        let slope = a1 * p.a1;
        if slope != 0.0 {
            let r = (2.0 * k1 * p.k - a1 * p.a0) / slope;
            if r > p.lo && r < p.hi {
                cuts.push(r);
                cuts.push(-r);
            }
        }
    }
    cuts
}

// Cuts in v1 where the inner root of T crosses an inner cell edge.
fn outer_kinks(pieces: &[AxisPiece]) -> Vec<f64> {
    let mut cuts = vec![0.0];
    for c in pieces {
        cuts.push(c.hi);
        cuts.push(-c.hi);
        if c.a1 == 0.0 {
            continue;
        }
        cuts.push(-c.a0 / c.a1);
        for e in pieces {
            for y in [e.lo, e.hi] {
                let lin = e.a0 + e.a1 * y;
                if lin != 0.0 {
                    let r = (2.0 * c.k * e.k / lin - c.a0) / c.a1;
                    if r > c.lo && r < c.hi {
                        cuts.push(r);
                        cuts.push(-r);
                    }
                }
            }
        }
    }
    cuts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::DensitySpec;

    fn model(name: &str, d: usize) -> DensityModel {
        DensityModel::new(&DensitySpec::parse(name, d, &[]).unwrap()).unwrap()
    }

    #[test]
    fn constants_examples() {
        let c = constants(1.0, 1.0, 1).unwrap();
        assert!((c.lambda_q - 834.449_9).abs() < 1e-3, "{}", c.lambda_q);
        assert_eq!(c.omega_q, 7056.0);
        assert!(c.lambda_star_q >= c.lambda_q);
        let c2 = constants(2.5, 1.7, 2).unwrap();
        assert!(c2.lambda_star_q >= 2f64.powf(1.5) * c2.lambda_q);
        assert!(constants(0.5, 1.0, 1).is_err());
    }

    #[test]
    fn uniform_interior_bias_vanishes() {
        let f = model("uniform", 1);
        let k = KernelSet::new(2, 1).unwrap();
        let o = Oracle::new(&f, &k).unwrap();
        assert!(o.bias_field(&[0.05], &[0.5]).abs() < 1e-14);
        assert!(o.b_aj(0.05, 0, &[0.5]).abs() < 1e-14);
        assert!(o.bias_field(&[0.05], &[0.01]).abs() > 1e-3);
    }

    #[test]
    fn bias_identity_d1() {
        let k = KernelSet::new(2, 1).unwrap();
        let g = BandwidthGrid::new(200, 1).unwrap();
        for name in ["gaussian", "uniform", "laplace", "triangular", "mixture"] {
            let f = model(name, 1);
            let mut o = Oracle::new(&f, &k).unwrap();
            for mb in g.members() {
                let lhs = o.mean_n(&mb.h).unwrap() + o.bias_sq(&mb.exponents).unwrap();
                let rhs = f.l2_sq_exact().unwrap();
                assert!((lhs - rhs).abs() < 1e-8, "{name} {:?}: {lhs} vs {rhs}", mb.exponents);
            }
        }
    }

    #[test]
    fn bias_identity_d2() {
        let k = KernelSet::new(2, 2).unwrap();
        for name in ["gaussian", "mixture", "uniform"] {
            let f = model(name, 2);
            let mut o = Oracle::new(&f, &k).unwrap();
            for ex in [[1u32, 1], [1, 3], [4, 2]] {
                let h: Vec<f64> = ex.iter().map(|k| (-(*k as f64)).exp()).collect();
                let lhs = o.mean_n(&h).unwrap() + o.bias_sq(&ex).unwrap();
                assert!((lhs - f.l2_sq_exact().unwrap()).abs() < 1e-8, "{name} {ex:?}");
            }
        }
    }

    #[test]
    fn bias_decreases_for_gaussian() {
        let f = model("gaussian", 1);
        let k = KernelSet::new(2, 1).unwrap();
        let mut o = Oracle::new(&f, &k).unwrap();
        let mut prev = f64::INFINITY;
        for e in 1..8 {
            let b = o.bias_sq(&[e]).unwrap();
            assert!(b < prev);
            prev = b;
        }
        let mut prev = f64::INFINITY;
        for i in 0..12 {
            let b = o.b_norm(0, 4 + i).unwrap();
            assert!(b <= prev * (1.0 + 1e-9));
            prev = b;
        }
        let fb = o.frak_b(&[2]).unwrap();
        assert!(fb >= o.b_norm(0, 8).unwrap());
    }

    #[test]
    fn bias_sq_matches_direct_quadrature() {
        let f = model("laplace", 1);
        let k = KernelSet::new(3, 1).unwrap();
        let mut o = Oracle::new(&f, &k).unwrap();
        let h = (-2f64).exp();
        let b = o.bias_sq(&[2]).unwrap();
        let step = 1e-3;
        let direct: f64 = (0..60_000)
            .map(|i| {
                let x = -30.0 + (i as f64 + 0.5) * step;
                o.bias_field(&[h], &[x]).powi(2)
            })
            .sum::<f64>()
            * step;
        assert!((b - direct).abs() < 1e-5 * b, "{b} vs {direct}");
    }

    #[test]
    fn uniform_w_equals_t_l1_norm_in_interior() {
        let f = model("uniform", 1);
        let k = KernelSet::new(2, 1).unwrap();
        let o = Oracle::new(&f, &k).unwrap();
        for e in 2..6 {
            let h = (-(e as f64)).exp();
            assert!(2.0 * k.t() * h <= 1.0);
            let w = o.w_pop(&[h], 4097);
            assert!((w - k.norm_t1()).abs() < 1e-6, "e={e}: {w} vs {}", k.norm_t1());
        }
    }

    #[test]
    fn population_dominations_d1() {
        let k = KernelSet::new(2, 1).unwrap();
        let g = BandwidthGrid::new(300, 1).unwrap();
        for name in ["gaussian", "uniform", "mixture"] {
            let f = model(name, 1);
            let mut o = Oracle::new(&f, &k).unwrap();
            let rep = o.report(&g, 1.0, OracleOptions { w_grid_points: 513, ..OracleOptions::for_dim(1) }).unwrap();
            let c = rep.constants;
            for r in &rep.rows {
                let j = r.j.unwrap();
                assert!(j <= k.varpi() * rep.l2_sq * (1.0 + 1e-9), "{name}");
                assert!(j >= r.mean_n.abs() * (1.0 - 1e-9));
                if !r.small {
                    assert!(r.w.unwrap() <= r.w_cal * (1.0 + 1e-9), "{name} {:?}", r.exponents);
                }
                assert!(r.u_star.unwrap() <= c.omega_q * r.frak_u, "{name}");
                let v = r.volume;
                let lnm = 300f64.ln();
                let mb = &g.members()[g.find(&r.exponents).unwrap()];
                let tail = mb.upsilon * 196.0 * k.varpi() * lnm / (9e4 * v);
                assert!(r.u_star.unwrap() >= tail);
            }
            assert!(rep.o_star >= rep.remainder);
            assert!(rep.o_full.unwrap() >= rep.remainder);
        }
    }

    #[test]
    fn oracle_min_hand_enumeration() {
        assert!((oracle_min(&[0.5, 0.2], 0.01) - 0.21).abs() < 1e-15);
    }

    #[test]
    fn gaussian_o_star_interior_argmin() {
        let f = model("gaussian", 1);
        let k = KernelSet::new(2, 1).unwrap();
        let g = BandwidthGrid::new(1000, 1).unwrap();
        let mut o = Oracle::new(&f, &k).unwrap();
        let rep = o.report(&g, 2.0, OracleOptions::risk_only()).unwrap();
        assert!(rep.o_star.is_finite());
        let last = g.members().last().unwrap().exponents.clone();
        assert_ne!(rep.o_star_argmin, last);
    }

    #[test]
    fn j_d2_matches_grid_sum() {
        let f = model("gaussian", 2);
        let k = KernelSet::new(2, 2).unwrap();
        let o = Oracle::new(&f, &k).unwrap();
        let h = [0.6, 0.3];
        let j = o.j_pop(&h).unwrap();
        let n = 800;
        let t = k.t();
        let step = 2.0 * t / n as f64;
        let mut total = 0.0;
        for a in 0..n {
            for b in 0..n {
                let v = [-t + (a as f64 + 0.5) * step, -t + (b as f64 + 0.5) * step];
                let g = f.autocorrelation(&[h[0] * v[0], h[1] * v[1]]);
                total += k.t_unscaled(&v).abs() * g;
            }
        }
        total *= step * step;
        assert!((j - total).abs() < 1e-4 * j, "{j} vs {total}");
    }

    #[test]
    fn box_probability_floor_shortcut() {
        let f = model("gaussian", 1);
        let k = KernelSet::new(2, 1).unwrap();
        let o = Oracle::new(&f, &k).unwrap();
        let h = [(-2f64).exp()];
        let w = o.w_cal(&h, 1000, 1.0).unwrap();
        assert!((w - 256.0 * 14.0 * 1000f64.ln() / 1000.0 / h[0]).abs() < 1e-9);
        let p = o.max_box_probability(&h).unwrap();
        assert!(p > 0.0 && p <= 1.0);
    }
}
