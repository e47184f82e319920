//! The finite bandwidth set and its regime flags.
//!
//! Levels are `e^{-k}` for `k = 1, ..., floor(2 ln m) - 1` together with
//! `k = 2 floor(ln m)`, kept as a set of integer exponents. A bandwidth is a
//! vector of exponents; its volume is `V_h = e^{-sum k}`.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};

/// Smallest half-sample size for which `alpha_m = 1/ln m` satisfies both
/// `alpha_m ln m >= 1` and `alpha_m <= 1/3`.
pub const MIN_HALF_SAMPLE: usize = 21;

/// `alpha_m = 1 / ln m`.
pub fn alpha_m(m: usize) -> Result<f64> {
    if m < MIN_HALF_SAMPLE {
        return Err(Error::UnsupportedSampleSize(m));
    }
    Ok(1.0 / (m as f64).ln())
}

/// Exponents of the level set, ascending and deduplicated.
pub fn level_exponents(m: usize) -> Vec<u32> {
    let ln_m = (m as f64).ln();
    let upper = (2.0 * ln_m).floor() as i64 - 1;
    let mut ks: Vec<u32> = (1..=upper.max(0)).map(|k| k as u32).collect();
    ks.push(2 * ln_m.floor() as u32);
    ks.sort_unstable();
    ks.dedup();
    ks
}

/// One grid member.
#[derive(Clone, Debug, Serialize)]
pub struct Member {
    /// Exponents `k_j` with `h_j = e^{-k_j}`.
    pub exponents: Vec<u32>,
    pub h: Vec<f64>,
    pub volume: f64,
    /// `m V_h < ln m`.
    pub small: bool,
    /// `m V_h <= alpha_m^2`.
    pub star: bool,
    pub upsilon: f64,
}

/// The bandwidth grid for a half-sample size `m` and dimension `d`.
#[derive(Clone, Debug)]
pub struct BandwidthGrid {
    m: usize,
    d: usize,
    alpha: f64,
    levels: Vec<u32>,
    members: Vec<Member>,
    index: HashMap<Vec<u32>, usize>,
}

/// `Upsilon_h(m)`: `10 ln m` off the star set, `17 ln m / |ln(m V_h)|` on it.
pub fn upsilon(m: usize, volume: f64, alpha: f64) -> f64 {
    let mf = m as f64;
    let mv = mf * volume;
    if mv > alpha * alpha {
        10.0 * mf.ln()
    } else {
        17.0 * mf.ln() / mv.ln().abs()
    }
}

impl BandwidthGrid {
    pub fn new(m: usize, d: usize) -> Result<Self> {
        let alpha = alpha_m(m)?;
        if d == 0 {
            return Err(Error::InvalidDimension(d));
        }
        let levels = level_exponents(m);
        let mf = m as f64;
        let ln_m = mf.ln();
        // m^2 V >= ln m bounds the exponent sum; enumerate with pruning.
        let max_sum = (2.0 * ln_m - ln_m.ln()).floor() as i64 + 1;
        let mut members = Vec::new();
        let mut current = Vec::with_capacity(d);
        enumerate(&levels, d, max_sum, &mut current, &mut |ks: &[u32]| {
            let sum: u32 = ks.iter().sum();
            let volume = (-(sum as f64)).exp();
            if mf * mf * volume >= ln_m {
                let h: Vec<f64> = ks.iter().map(|&k| (-(k as f64)).exp()).collect();
                members.push(Member {
                    exponents: ks.to_vec(),
                    h,
                    volume,
                    small: mf * volume < ln_m,
                    star: mf * volume <= alpha * alpha,
                    upsilon: upsilon(m, volume, alpha),
                });
            }
        });
        if members.is_empty() {
            return Err(Error::EmptyGrid { m, d });
        }
        let index = members
            .iter()
            .enumerate()
            .map(|(i, mb)| (mb.exponents.clone(), i))
            .collect();
        Ok(BandwidthGrid {
            m,
            d,
            alpha,
            levels,
            members,
            index,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn levels(&self) -> &[u32] {
        &self.levels
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn find(&self, exponents: &[u32]) -> Option<usize> {
        self.index.get(exponents).copied()
    }

    /// Index of the coordinatewise maximum `h v w` (minimum exponents).
    pub fn join(&self, a: usize, b: usize) -> usize {
        let ea = &self.members[a].exponents;
        let eb = &self.members[b].exponents;
        let key: Vec<u32> = ea.iter().zip(eb).map(|(x, y)| *x.min(y)).collect();
        // Closure of the grid under joins: V_{h v w} >= V_h.
        self.index[&key]
    }

    /// Index of the member with every coordinate at the largest level.
    pub fn top(&self) -> usize {
        let key = vec![self.levels[0]; self.d];
        self.index[&key]
    }
}

fn enumerate(levels: &[u32], d: usize, budget: i64, cur: &mut Vec<u32>, emit: &mut dyn FnMut(&[u32])) {
    if cur.len() == d {
        emit(cur);
        return;
    }
    let remaining = (d - cur.len() - 1) as i64 * levels[0] as i64;
    for &k in levels {
        if (k as i64) + remaining > budget {
            break;
        }
        cur.push(k);
        enumerate(levels, d, budget - k as i64, cur, emit);
        cur.pop();
    }
}
