//! Closed-form rate exponents, normalizations and the theoretical bandwidth.

use std::fmt;
use std::str::FromStr;

use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::grid::level_exponents;

/// An integrability index in `[1, inf]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Index {
    Finite(f64),
    Infinite,
}

impl Index {
    pub fn new(r: f64) -> Result<Self> {
        if r.is_infinite() && r > 0.0 {
            return Ok(Index::Infinite);
        }
        if !(r >= 1.0) {
            return Err(Error::InvalidParameter(format!("integrability index must be >= 1, got {r}")));
        }
        Ok(Index::Finite(r))
    }

    /// `1 / r` with `1 / inf = 0`.
    pub fn recip(self) -> f64 {
        match self {
            Index::Finite(r) => 1.0 / r,
            Index::Infinite => 0.0,
        }
    }

    pub fn at_least(self, v: f64) -> bool {
        match self {
            Index::Finite(r) => r >= v,
            Index::Infinite => true,
        }
    }

    pub fn at_most(self, v: f64) -> bool {
        match self {
            Index::Finite(r) => r <= v,
            Index::Infinite => false,
        }
    }

    /// `r / (r - 1)` for `r >= 2`, else `r`; equals `1` at infinity.
    pub fn p(self) -> f64 {
        match self {
            Index::Infinite => 1.0,
            Index::Finite(r) if r >= 2.0 => r / (r - 1.0),
            Index::Finite(r) => r,
        }
    }
}

impl FromStr for Index {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => Ok(Index::Infinite),
            other => {
                let v: f64 = other
                    .parse()
                    .map_err(|_| Error::InvalidParameter(format!("cannot parse index '{s}'")))?;
                Index::new(v)
            }
        }
    }
}

impl fmt::Display for Index {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Index::Finite(r) => write!(f, "{r}"),
            Index::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for Index {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Index::Finite(r) => s.serialize_f64(*r),
            Index::Infinite => s.serialize_str("inf"),
        }
    }
}

/// Anisotropic smoothness `(beta, r)` per axis.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Smoothness {
    pub beta: Vec<f64>,
    pub r: Vec<Index>,
}

impl Smoothness {
    pub fn new(beta: Vec<f64>, r: Vec<Index>) -> Result<Self> {
        if beta.is_empty() || beta.len() != r.len() {
            return Err(Error::InvalidParameter("beta and r must have equal nonzero length".into()));
        }
        if beta.iter().any(|b| !(*b > 0.0) || !b.is_finite()) {
            return Err(Error::InvalidParameter("beta must be positive and finite".into()));
        }
        Ok(Smoothness { beta, r })
    }

    pub fn isotropic(beta: f64, r: Index, d: usize) -> Result<Self> {
        Smoothness::new(vec![beta; d], vec![r; d])
    }

    pub fn dim(&self) -> usize {
        self.beta.len()
    }

    fn sum_inv_beta(&self) -> f64 {
        self.beta.iter().map(|b| 1.0 / b).sum()
    }

    fn sum_inv_beta_r(&self) -> f64 {
        self.beta.iter().zip(&self.r).map(|(b, r)| r.recip() / b).sum()
    }
}

/// `tau(s) = 1 - sum 1/(beta_j r_j) + (sum 1/beta_j) / s`, with `s` possibly infinite.
pub fn tau(p: &Smoothness, s: Index) -> f64 {
    1.0 - p.sum_inv_beta_r() + p.sum_inv_beta() * s.recip()
}

/// Which case of the rate-exponent formula applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RateCase {
    /// `1 / tau(1)`.
    Dense,
    /// `1 / (2 - tau(inf))`.
    Sparse,
    /// `1/2`.
    Parametric,
}

fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite parameter")
}

// tau(s) in rational arithmetic; `s = None` is infinity.
fn tau_exact(p: &Smoothness, s: Option<u32>) -> BigRational {
    let one = BigRational::one();
    let mut acc = one.clone();
    let mut inv_beta = BigRational::zero();
    for (b, r) in p.beta.iter().zip(&p.r) {
        let ib = one.clone() / exact(*b);
        if let Index::Finite(r) = r {
            acc -= ib.clone() / exact(*r);
        }
        inv_beta += ib;
    }
    match s {
        Some(s) => acc + inv_beta / BigRational::from_integer(s.into()),
        None => acc,
    }
}

/// Evaluates every case predicate; exactly one is expected to hold.
pub fn rate_case_flags(p: &Smoothness) -> [bool; 3] {
    let (t1, t2, ti) = (tau_exact(p, Some(1)), tau_exact(p, Some(2)), tau_exact(p, None));
    let one = BigRational::one();
    let two = BigRational::from_integer(2.into());
    let zero = BigRational::zero();
    let dense = t2 >= one && t1 > two;
    let sparse = t2 < one && ti < zero;
    let parametric = (t2 >= one && t1 <= two) || (t2 < one && ti >= zero);
    [dense, sparse, parametric]
}

/// The minimax rate exponent with its case, evaluated exactly and rounded once.
pub fn rate_exponent(p: &Smoothness) -> (f64, RateCase) {
    let [dense, sparse, _] = rate_case_flags(p);
    let one = BigRational::one();
    let to_f64 = |r: BigRational| r.to_f64().expect("finite exponent");
    if dense {
        (to_f64(one / tau_exact(p, Some(1))), RateCase::Dense)
    } else if sparse {
        let two = BigRational::from_integer(2.into());
        (to_f64(one / (two - tau_exact(p, None))), RateCase::Sparse)
    } else {
        (0.5, RateCase::Parametric)
    }
}

/// The isotropic case formula for scalar `(beta, r)` in dimension `d`.
pub fn rate_exponent_isotropic(beta: f64, r: Index, d: usize) -> f64 {
    let d = BigRational::from_integer((d as u64).into());
    let beta = exact(beta);
    let one = BigRational::one();
    let ratio = |num: BigRational, den: BigRational| {
        if num < den {
            (num.clone() / (num + den)).to_f64().expect("finite exponent")
        } else {
            0.5
        }
    };
    match r {
        Index::Infinite => ratio(beta, d),
        Index::Finite(r) if r >= 2.0 => {
            let r = exact(r);
            ratio(beta * r.clone(), d * (r - one))
        }
        Index::Finite(r) => ratio(beta * exact(r), d),
    }
}

/// Normalization family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Anisotropic,
    Isotropic,
}

/// `mu_m`: `sqrt(ln m)/m` below the parametric exponent, `ln(m)/m` at it
/// (`1/m` for the isotropic family).
pub fn mu(z: f64, m: usize, family: Family) -> f64 {
    let mf = m as f64;
    if z < 0.5 {
        mf.ln().sqrt() / mf
    } else {
        match family {
            Family::Anisotropic => mf.ln() / mf,
            Family::Isotropic => 1.0 / mf,
        }
    }
}

/// `mu_m^{z}`.
pub fn normalization(z: f64, m: usize, family: Family) -> Result<f64> {
    if m < 3 {
        return Err(Error::UnsupportedSampleSize(m));
    }
    Ok(mu(z, m, family).powf(z))
}

/// Regime of the integrability indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// All `r_j >= 2`.
    High,
    /// All `r_j <= 2`.
    Low,
}

pub fn regime(p: &Smoothness) -> Result<Regime> {
    if p.r.iter().all(|r| r.at_least(2.0)) {
        Ok(Regime::High)
    } else if p.r.iter().all(|r| r.at_most(2.0)) {
        Ok(Regime::Low)
    } else {
        Err(Error::UnsupportedParameters(
            "integrability indices mix r_j < 2 and r_j > 2".into(),
        ))
    }
}

/// `z = 1/tau(1)` for `r in [2, inf]^d` and `1/(2 - tau(inf))` for `r in [1, 2]^d`.
pub fn z_exponent(p: &Smoothness) -> Result<f64> {
    Ok(match regime(p)? {
        Regime::High => 1.0 / tau(p, Index::Finite(1.0)),
        Regime::Low => 1.0 / (2.0 - tau(p, Index::Infinite)),
    })
}

/// `1/upsilon = sum 1/(p_j beta_j)`.
pub fn inv_upsilon(p: &Smoothness) -> f64 {
    p.beta.iter().zip(&p.r).map(|(b, r)| 1.0 / (r.p() * b)).sum()
}

/// Theoretical bandwidth and its projection onto the grid levels.
#[derive(Clone, Debug, Serialize)]
pub struct OptimalBandwidth {
    pub mu: f64,
    pub h: Vec<f64>,
    /// Grid level exponents with `e^{-k} <= h_j`, as large as possible.
    pub projected_exponents: Vec<u32>,
    pub projected_h: Vec<f64>,
}

/// `h_j = mu_m^{2 / (beta_j p_j (1 + 1/upsilon))}`, then projected downward.
pub fn optimal_bandwidth(p: &Smoothness, m: usize) -> Result<OptimalBandwidth> {
    regime(p)?;
    if m < 3 {
        return Err(Error::UnsupportedSampleSize(m));
    }
    let (z, _) = rate_exponent(p);
    let mu_m = mu(z, m, Family::Anisotropic);
    let iu = inv_upsilon(p);
    let h: Vec<f64> = p
        .beta
        .iter()
        .zip(&p.r)
        .map(|(b, r)| mu_m.powf(2.0 / (b * r.p() * (1.0 + iu))))
        .collect();
    let levels = level_exponents(m);
    let projected_exponents: Vec<u32> = h
        .iter()
        .map(|hj| {
            levels
                .iter()
                .copied()
                .find(|&k| (-(k as f64)).exp() <= *hj)
                .unwrap_or(*levels.last().expect("level set is never empty"))
        })
        .collect();
    let projected_h = projected_exponents.iter().map(|&k| (-(k as f64)).exp()).collect();
    Ok(OptimalBandwidth {
        mu: mu_m,
        h,
        projected_exponents,
        projected_h,
    })
}
