//! Data-dependent statistics per bandwidth: the decoupled U-statistics,
//! the sliding-box count and the random upper function.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::BandwidthGrid;
use crate::kernel::{KernelSet, MAX_DIM};

/// The two halves `X_j = row j` and `Y_i = row m + i` of a `2m x d` sample.
#[derive(Clone, Debug)]
pub struct SplitSample {
    m: usize,
    d: usize,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl SplitSample {
    /// Splits `n x d` row-major data; `n` must be even.
    pub fn from_rows(data: &[f64], d: usize) -> Result<Self> {
        if d == 0 || d > MAX_DIM {
            return Err(Error::InvalidDimension(d));
        }
        if !data.len().is_multiple_of(d) {
            return Err(Error::Domain(format!(
                "data length {} is not a multiple of d={d}",
                data.len()
            )));
        }
        let n = data.len() / d;
        if n % 2 == 1 {
            return Err(Error::OddSampleSize(n));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("observations must be finite".into()));
        }
        let m = n / 2;
        Ok(SplitSample {
            m,
            d,
            x: data[..m * d].to_vec(),
            y: data[m * d..].to_vec(),
        })
    }

    /// Builds a sample from explicit halves of equal shape.
    pub fn from_halves(x: Vec<f64>, y: Vec<f64>, d: usize) -> Result<Self> {
        if d == 0 || d > MAX_DIM {
            return Err(Error::InvalidDimension(d));
        }
        if x.len() != y.len() || !x.len().is_multiple_of(d) {
            return Err(Error::Domain("halves must have identical m x d shape".into()));
        }
        Ok(SplitSample { m: x.len() / d, d, x, y })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x_row(&self, j: usize) -> &[f64] {
        &self.x[j * self.d..(j + 1) * self.d]
    }

    pub fn y_row(&self, i: usize) -> &[f64] {
        &self.y[i * self.d..(i + 1) * self.d]
    }

    /// The sample with the roles of `X` and `Y` exchanged.
    pub fn swapped(&self) -> Self {
        SplitSample {
            m: self.m,
            d: self.d,
            x: self.y.clone(),
            y: self.x.clone(),
        }
    }
}

/// Neumaier-compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: CompensatedSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// `N_hat` and `J_hat` at one bandwidth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PairSums {
    pub n_hat: f64,
    pub j_hat: f64,
}

fn check_bandwidth(sample: &SplitSample, h: &[f64], kernels: &KernelSet) -> Result<()> {
    if h.len() != sample.d || kernels.dim() != sample.d {
        return Err(Error::Domain(format!(
            "bandwidth, sample and kernel dimensions differ ({}, {}, {})",
            h.len(),
            sample.d,
            kernels.dim()
        )));
    }
    if h.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::Domain("bandwidth coordinates must be positive".into()));
    }
    if sample.m == 0 {
        return Err(Error::Domain("empty sample".into()));
    }
    Ok(())
}

#[inline]
fn pair_term(kernels: &KernelSet, yi: &[f64], xj: &[f64], inv_h: &[f64], buf: &mut [f64; MAX_DIM]) -> f64 {
    let d = yi.len();
    for k in 0..d {
        buf[k] = (yi[k] - xj[k]) * inv_h[k];
    }
    kernels.t_unscaled(&buf[..d])
}

fn finish(n: CompensatedSum, j: CompensatedSum, m: usize, h: &[f64]) -> PairSums {
    let v: f64 = h.iter().product();
    let scale = 1.0 / ((m as f64) * (m as f64) * v);
    PairSums {
        n_hat: n.value() * scale,
        j_hat: j.value() * scale,
    }
}

/// Reference `O(m^2)` double sum over every pair.
pub fn pair_sums_naive(sample: &SplitSample, h: &[f64], kernels: &KernelSet) -> Result<PairSums> {
    check_bandwidth(sample, h, kernels)?;
    let inv_h: Vec<f64> = h.iter().map(|v| 1.0 / v).collect();
    let mut n = CompensatedSum::default();
    let mut j = CompensatedSum::default();
    let mut buf = [0.0; MAX_DIM];
    for i in 0..sample.m {
        let yi = sample.y_row(i);
        for jx in 0..sample.m {
            let v = pair_term(kernels, yi, sample.x_row(jx), &inv_h, &mut buf);
            n.add(v);
            j.add(v.abs());
        }
    }
    Ok(finish(n, j, sample.m, h))
}

/// Double sum restricted to pairs inside the support box of `T_h`.
///
/// In one dimension `X` is sorted and each `Y_i` scans a window; in higher
/// dimensions `X` is bucketed into cells of side `t h_j` and each `Y_i`
/// visits its `3^d` neighbouring cells. Pair terms are computed exactly as in
/// [`pair_sums_naive`]; only the summation order differs.
pub fn pair_sums(sample: &SplitSample, h: &[f64], kernels: &KernelSet) -> Result<PairSums> {
    check_bandwidth(sample, h, kernels)?;
    let inv_h: Vec<f64> = h.iter().map(|v| 1.0 / v).collect();
    let t = kernels.t();
    let mut n = CompensatedSum::default();
    let mut j = CompensatedSum::default();
    let mut buf = [0.0; MAX_DIM];
    if sample.d == 1 {
        let mut xs = sample.x.clone();
        xs.sort_by(|a, b| a.total_cmp(b));
        // Slightly widened window; the kernel itself rejects |u| >= t.
        let reach = t * h[0] * (1.0 + 1e-12);
        for &yi in &sample.y {
            let lo = xs.partition_point(|x| *x < yi - reach);
            let hi = xs.partition_point(|x| *x <= yi + reach);
            for xj in &xs[lo..hi] {
                let v = kernels.t_unscaled(&[(yi - xj) * inv_h[0]]);
                n.add(v);
                j.add(v.abs());
            }
        }
    } else {
        let cells = CellIndex::new(&sample.x, sample.d, h, t);
        let d = sample.d;
        for i in 0..sample.m {
            let yi = sample.y_row(i);
            let home = cells.cell_of(yi);
            for_each_offset(d, |off| {
                let mut key = [0i64; MAX_DIM];
                for k in 0..d {
                    key[k] = home[k] + off[k];
                }
                if let Some(members) = cells.get(&key) {
                    for &jx in members {
                        let v = pair_term(kernels, yi, sample.x_row(jx), &inv_h, &mut buf);
                        n.add(v);
                        j.add(v.abs());
                    }
                }
            });
        }
    }
    Ok(finish(n, j, sample.m, h))
}

struct CellIndex {
    d: usize,
    side: Vec<f64>,
    map: HashMap<[i64; MAX_DIM], Vec<usize>>,
}

impl CellIndex {
    fn new(points: &[f64], d: usize, h: &[f64], t: f64) -> Self {
        let side: Vec<f64> = h.iter().map(|hj| t * hj * (1.0 + 1e-9)).collect();
        let mut idx = CellIndex { d, side, map: HashMap::new() };
        for (row, p) in points.chunks_exact(d).enumerate() {
            let key = idx.cell_of(p);
            idx.map.entry(key).or_default().push(row);
        }
        idx
    }

    fn cell_of(&self, p: &[f64]) -> [i64; MAX_DIM] {
        let mut key = [0i64; MAX_DIM];
        for k in 0..self.d {
            key[k] = (p[k] / self.side[k]).floor() as i64;
        }
        key
    }

    fn get(&self, key: &[i64; MAX_DIM]) -> Option<&Vec<usize>> {
        self.map.get(key)
    }
}

/// Calls `f` with every offset in `{-1, 0, 1}^d` (trailing entries zero).
fn for_each_offset(d: usize, mut f: impl FnMut(&[i64; MAX_DIM])) {
    let total = 3usize.pow(d as u32);
    for code in 0..total {
        let mut off = [0i64; MAX_DIM];
        let mut c = code;
        for o in off.iter_mut().take(d) {
            *o = (c % 3) as i64 - 1;
            c /= 3;
        }
        f(&off);
    }
}

/// `s = 12 q + 2`.
pub fn s_of_q(q: f64) -> f64 {
    12.0 * q + 2.0
}

/// Cell `l` with `l t < u <= (l + 1) t`.
#[inline]
fn box_cell(u: f64, t: f64) -> i64 {
    let mut l = (u / t).ceil() as i64 - 1;
    if !((l as f64) * t < u) {
        l -= 1;
    }
    if !(u <= ((l + 1) as f64) * t) {
        l += 1;
    }
    l
}

/// `sup_k #{j : X_j / h in Pi*_k}` with `Pi*_k = prod ((k_i - 1) t, (k_i + 2) t]`.
pub fn max_box_count(points: &[f64], d: usize, h: &[f64], t: f64) -> usize {
    let mut counts: HashMap<[i64; MAX_DIM], usize> = HashMap::new();
    for p in points.chunks_exact(d) {
        let mut key = [0i64; MAX_DIM];
        for k in 0..d {
            key[k] = box_cell(p[k] / h[k], t);
        }
        *counts.entry(key).or_insert(0) += 1;
    }
    let mut best = 0;
    let mut seen: HashMap<[i64; MAX_DIM], ()> = HashMap::new();
    for cell in counts.keys() {
        for_each_offset(d, |off| {
            let mut k = [0i64; MAX_DIM];
            for i in 0..d {
                k[i] = cell[i] + off[i];
            }
            if seen.insert(k, ()).is_some() {
                return;
            }
            let mut total = 0;
            for_each_offset(d, |inner| {
                let mut c = [0i64; MAX_DIM];
                for i in 0..d {
                    c[i] = k[i] + inner[i];
                }
                total += counts.get(&c).copied().unwrap_or(0);
            });
            best = best.max(total);
        });
    }
    best
}

/// `(W_raw, W_hat)` for one bandwidth.
///
/// `W_raw = (m V)^{-1} max(256 s ln m, sup_k count_k)`; `W_hat` equals
/// `W_raw` when `m V >= ln m` and `1 / alpha_m` otherwise.
pub fn compute_w(sample: &SplitSample, h: &[f64], t: f64, q: f64, alpha: f64) -> (f64, f64) {
    let m = sample.m as f64;
    let v: f64 = h.iter().product();
    let floor = 256.0 * s_of_q(q) * m.ln();
    let count = max_box_count(&sample.x, sample.d, h, t) as f64;
    let raw = floor.max(count) / (m * v);
    let hat = if m * v >= m.ln() { raw } else { 1.0 / alpha };
    (raw, hat)
}

/// Inputs of the random upper function at one bandwidth.
#[derive(Clone, Copy, Debug)]
pub struct UcalInputs {
    pub m: usize,
    pub q: f64,
    pub varpi: f64,
    pub volume: f64,
    pub upsilon: f64,
    pub j_hat: f64,
    pub w_hat: f64,
}

/// `U_h = sqrt(16 s w W J ln m / m) + sqrt(16 s w J ln m / (m^2 V))
///        + 147 s w W ln m / m + s^2 w Upsilon ln m / (m^2 V)` with `w = varpi_T`.
pub fn ucal(inp: &UcalInputs) -> f64 {
    assert!(
        inp.j_hat >= 0.0 && inp.w_hat >= 0.0,
        "J_hat and W_hat are nonnegative by construction"
    );
    let m = inp.m as f64;
    let ln_m = m.ln();
    let s = s_of_q(inp.q);
    let w = inp.varpi;
    (16.0 * s * w * inp.w_hat * inp.j_hat * ln_m / m).sqrt()
        + (16.0 * s * w * inp.j_hat * ln_m / (m * m * inp.volume)).sqrt()
        + 147.0 * s * w * inp.w_hat * ln_m / m
        + s * s * w * inp.upsilon * ln_m / (m * m * inp.volume)
}

/// Statistics at one grid member.
#[derive(Clone, Debug, Serialize)]
pub struct StatRow {
    pub exponents: Vec<u32>,
    pub h: Vec<f64>,
    pub volume: f64,
    pub n_hat: f64,
    pub j_hat: f64,
    pub w_raw: f64,
    pub w_hat: f64,
    pub ucal: f64,
}

/// All per-bandwidth statistics over a grid, in grid order.
#[derive(Clone, Debug, Serialize)]
pub struct StatTable {
    pub q: f64,
    pub s: f64,
    pub varpi: f64,
    pub m: usize,
    pub rows: Vec<StatRow>,
}

impl StatTable {
    /// Evaluates every grid member; members are independent and are
    /// computed in parallel on the current rayon pool.
    pub fn build(sample: &SplitSample, grid: &BandwidthGrid, kernels: &KernelSet, q: f64) -> Result<Self> {
        if !(q >= 1.0) || !q.is_finite() {
            return Err(Error::InvalidParameter(format!("q must be >= 1, got {q}")));
        }
        if grid.m() != sample.m || grid.dim() != sample.d {
            return Err(Error::Domain("grid does not match the sample shape".into()));
        }
        let t = kernels.t();
        let varpi = kernels.varpi();
        let rows: Result<Vec<StatRow>> = grid
            .members()
            .par_iter()
            .map(|mb| {
                let ps = pair_sums(sample, &mb.h, kernels)?;
                let (w_raw, w_hat) = compute_w(sample, &mb.h, t, q, grid.alpha());
                let u = ucal(&UcalInputs {
                    m: sample.m,
                    q,
                    varpi,
                    volume: mb.volume,
                    upsilon: mb.upsilon,
                    j_hat: ps.j_hat,
                    w_hat,
                });
                Ok(StatRow {
                    exponents: mb.exponents.clone(),
                    h: mb.h.clone(),
                    volume: mb.volume,
                    n_hat: ps.n_hat,
                    j_hat: ps.j_hat,
                    w_raw,
                    w_hat,
                    ucal: u,
                })
            })
            .collect();
        Ok(StatTable {
            q,
            s: s_of_q(q),
            varpi,
            m: sample.m,
            rows: rows?,
        })
    }
}
