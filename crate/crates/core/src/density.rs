//! Test densities: mixtures of product densities with exact functionals.

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::quadrature::{self, Tolerance};

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

/// A one-dimensional factor of a product density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Marginal {
    Uniform { lo: f64, hi: f64 },
    Gaussian { mean: f64, sd: f64 },
    /// Density `lambda/2 exp(-lambda |x - loc|)`.
    Laplace { loc: f64, lambda: f64 },
    /// Density `(1 - |x - center| / w) / w` on `|x - center| < w`.
    Triangular { center: f64, half_width: f64 },
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

impl Marginal {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Marginal::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && hi > lo,
            Marginal::Gaussian { mean, sd } => mean.is_finite() && sd > 0.0 && sd.is_finite(),
            Marginal::Laplace { loc, lambda } => loc.is_finite() && lambda > 0.0 && lambda.is_finite(),
            Marginal::Triangular { center, half_width } => {
                center.is_finite() && half_width > 0.0 && half_width.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("{self:?}")))
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            Marginal::Uniform { lo, hi } => {
                if x >= lo && x <= hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            Marginal::Gaussian { mean, sd } => {
                let z = (x - mean) / sd;
                (-0.5 * z * z).exp() / (SQRT_2PI * sd)
            }
            Marginal::Laplace { loc, lambda } => 0.5 * lambda * (-lambda * (x - loc).abs()).exp(),
            Marginal::Triangular { center, half_width } => {
                let a = (x - center).abs();
                if a < half_width {
                    (1.0 - a / half_width) / half_width
                } else {
                    0.0
                }
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Marginal::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            Marginal::Gaussian { mean, sd } => std_normal_cdf((x - mean) / sd),
            Marginal::Laplace { loc, lambda } => {
                let z = x - loc;
                if z < 0.0 {
                    0.5 * (lambda * z).exp()
                } else {
                    1.0 - 0.5 * (-lambda * z).exp()
                }
            }
            Marginal::Triangular { center, half_width } => {
                let z = (x - center) / half_width;
                if z <= -1.0 {
                    0.0
                } else if z < 0.0 {
                    0.5 * (1.0 + z) * (1.0 + z)
                } else if z < 1.0 {
                    1.0 - 0.5 * (1.0 - z) * (1.0 - z)
                } else {
                    1.0
                }
            }
        }
    }

    /// Probability of `(lo, hi]`, computed from the nearer tail to limit cancellation.
    pub fn mass(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        match *self {
            Marginal::Gaussian { mean, sd } => {
                let (a, b) = ((lo - mean) / sd, (hi - mean) / sd);
                let s = std::f64::consts::SQRT_2;
                if a > 0.0 {
                    0.5 * (erfc(a / s) - erfc(b / s))
                } else if b < 0.0 {
                    0.5 * (erfc(-b / s) - erfc(-a / s))
                } else {
                    1.0 - 0.5 * erfc(-a / s) - 0.5 * erfc(b / s)
                }
            }
            _ => (self.cdf(hi) - self.cdf(lo)).max(0.0),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Marginal::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            Marginal::Gaussian { mean, sd } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + sd * z
            }
            Marginal::Laplace { loc, lambda } => {
                let e: f64 = Exp::new(lambda).expect("validated rate").sample(rng);
                if rng.random::<bool>() {
                    loc + e
                } else {
                    loc - e
                }
            }
            Marginal::Triangular { center, half_width } => {
                let u: f64 = rng.random();
                let v: f64 = rng.random();
                center + half_width * (u + v - 1.0)
            }
        }
    }

    /// Points where the density or its derivative is discontinuous.
    pub fn kinks(&self) -> Vec<f64> {
        match *self {
            Marginal::Uniform { lo, hi } => vec![lo, hi],
            Marginal::Gaussian { .. } => vec![],
            Marginal::Laplace { loc, .. } => vec![loc],
            Marginal::Triangular { center, half_width } => {
                vec![center - half_width, center, center + half_width]
            }
        }
    }

    /// Interval with mass at least `1 - 1e-13`.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Marginal::Uniform { lo, hi } => (lo, hi),
            Marginal::Gaussian { mean, sd } => (mean - 7.7 * sd, mean + 7.7 * sd),
            Marginal::Laplace { loc, lambda } => {
                let r = 31.0 / lambda;
                (loc - r, loc + r)
            }
            Marginal::Triangular { center, half_width } => (center - half_width, center + half_width),
        }
    }

    pub fn sup(&self) -> f64 {
        match *self {
            Marginal::Uniform { lo, hi } => 1.0 / (hi - lo),
            Marginal::Gaussian { sd, .. } => 1.0 / (SQRT_2PI * sd),
            Marginal::Laplace { lambda, .. } => 0.5 * lambda,
            Marginal::Triangular { half_width, .. } => 1.0 / half_width,
        }
    }

    /// Closed-form `int f g`, when available.
    pub fn cross_l2(&self, other: &Marginal) -> Option<f64> {
        match (self, other) {
            (Marginal::Gaussian { mean: m1, sd: s1 }, Marginal::Gaussian { mean: m2, sd: s2 }) => {
                let s = (s1 * s1 + s2 * s2).sqrt();
                let z = (m1 - m2) / s;
                Some((-0.5 * z * z).exp() / (SQRT_2PI * s))
            }
            _ if self == other => Some(match *self {
                Marginal::Uniform { lo, hi } => 1.0 / (hi - lo),
                Marginal::Laplace { lambda, .. } => 0.25 * lambda,
                Marginal::Triangular { half_width, .. } => 2.0 / (3.0 * half_width),
                Marginal::Gaussian { .. } => unreachable!(),
            }),
            _ => None,
        }
    }

    /// Cross-correlation `u -> int f(x) g(x + u) dx`.
    pub fn cross_correlation(&self, other: &Marginal, u: f64) -> f64 {
        match (self, other) {
            (Marginal::Gaussian { mean: m1, sd: s1 }, Marginal::Gaussian { mean: m2, sd: s2 }) => {
                let s = (s1 * s1 + s2 * s2).sqrt();
                let z = (u - (m1 - m2)) / s;
                (-0.5 * z * z).exp() / (SQRT_2PI * s)
            }
            (Marginal::Uniform { lo, hi }, b) if self == b => {
                let l = hi - lo;
                let a = u.abs();
                if a < l {
                    (l - a) / (l * l)
                } else {
                    0.0
                }
            }
            (Marginal::Laplace { lambda, .. }, b) if self == b => {
                let a = lambda * u.abs();
                0.25 * lambda * (1.0 + a) * (-a).exp()
            }
            (Marginal::Triangular { half_width, .. }, b) if self == b => {
                // Difference of two triangular draws is a scaled Irwin-Hall(4) variable.
                let x = u / half_width + 2.0;
                if !(0.0..4.0).contains(&x) {
                    return 0.0;
                }
                let binom = [1.0, 4.0, 6.0, 4.0, 1.0];
                let mut acc = 0.0;
                for (k, c) in binom.iter().enumerate().take(x.floor() as usize + 1) {
                    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                    acc += sign * c * (x - k as f64).powi(3);
                }
                acc / (6.0 * half_width)
            }
            _ => {
                let (lo, hi) = self.support();
                let cuts: Vec<f64> = self
                    .kinks()
                    .into_iter()
                    .chain(other.kinks().into_iter().map(|k| k - u))
                    .collect();
                let f = |x: f64| self.pdf(x) * other.pdf(x + u);
                let tol = Tolerance { rel: 1e-10, abs: 1e-15, max_depth: 30 };
                quadrature::integrate(&f, &quadrature::panels(lo, hi, cuts), tol).unwrap_or(f64::NAN)
            }
        }
    }

    /// Kinks of the cross-correlation in `u`: offsets `kb - ka` that align a
    /// kink of `self` with a kink of `other`.
    pub fn cross_correlation_kinks(&self, other: &Marginal) -> Vec<f64> {
        let a = self.kinks();
        other
            .kinks()
            .iter()
            .flat_map(|kb| a.iter().map(move |ka| kb - ka))
            .collect()
    }

    /// Location of the mode.
    pub fn center(&self) -> f64 {
        match *self {
            Marginal::Uniform { lo, hi } => 0.5 * (lo + hi),
            Marginal::Gaussian { mean, .. } => mean,
            Marginal::Laplace { loc, .. } => loc,
            Marginal::Triangular { center, .. } => center,
        }
    }
}

/// One product component of a mixture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub weight: f64,
    pub marginals: Vec<Marginal>,
}

impl Component {
    pub fn pdf(&self, x: &[f64]) -> f64 {
        self.marginals.iter().zip(x).map(|(m, v)| m.pdf(*v)).product()
    }
}

/// Nominal smoothness label: documentation for expected-rate reporting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NominalSmoothness {
    pub beta: f64,
    /// `None` encodes `r = inf`.
    pub r: Option<f64>,
}

/// Parameters selecting a zoo density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum DensitySpec {
    UniformCube {
        d: usize,
    },
    GaussianProduct {
        d: usize,
        #[serde(default = "one")]
        sigma: f64,
        #[serde(default)]
        mean: f64,
    },
    LaplaceProduct {
        d: usize,
        #[serde(default = "one")]
        lambda: f64,
    },
    TriangularProduct {
        d: usize,
    },
    /// Isotropic Gaussian components centred at `centers[c]` (all axes share the value).
    GaussianMixture {
        d: usize,
        weights: Vec<f64>,
        centers: Vec<f64>,
        sigmas: Vec<f64>,
    },
}

fn one() -> f64 {
    1.0
}

impl DensitySpec {
    pub fn dim(&self) -> usize {
        match *self {
            DensitySpec::UniformCube { d }
            | DensitySpec::GaussianProduct { d, .. }
            | DensitySpec::LaplaceProduct { d, .. }
            | DensitySpec::TriangularProduct { d }
            | DensitySpec::GaussianMixture { d, .. } => d,
        }
    }

    /// Builds a spec from a name and `key=value` parameters.
    pub fn parse(name: &str, d: usize, params: &[(String, f64)]) -> Result<Self> {
        let get = |k: &str, default: f64| {
            params
                .iter()
                .find(|(key, _)| key == k)
                .map(|(_, v)| *v)
                .unwrap_or(default)
        };
        Ok(match name {
            "uniform" | "uniform_cube" => DensitySpec::UniformCube { d },
            "gaussian" | "gaussian_product" => DensitySpec::GaussianProduct {
                d,
                sigma: get("sigma", 1.0),
                mean: get("mean", 0.0),
            },
            "laplace" | "laplace_product" => DensitySpec::LaplaceProduct {
                d,
                lambda: get("lambda", 1.0),
            },
            "triangular" | "triangular_product" => DensitySpec::TriangularProduct { d },
            "mixture" | "gaussian_mixture" => default_mixture(d),
            other => return Err(Error::UnknownDensity(other.to_string())),
        })
    }
}

/// Two-component mixture with a narrow secondary bump.
pub fn default_mixture(d: usize) -> DensitySpec {
    DensitySpec::GaussianMixture {
        d,
        weights: vec![0.7, 0.3],
        centers: vec![-0.5, 1.0],
        sigmas: vec![0.5, 0.2],
    }
}

/// Names accepted by [`DensitySpec::parse`], for `zoo list`.
pub const ZOO: &[(&str, &str)] = &[
    ("uniform_cube", "uniform on [0,1]^d"),
    ("gaussian_product", "product of N(mean, sigma^2) (params: sigma, mean)"),
    ("laplace_product", "product of Laplace(lambda) (params: lambda)"),
    ("triangular_product", "product of triangular densities on [-1,1]"),
    ("gaussian_mixture", "0.7 N(-0.5, 0.5^2) + 0.3 N(1, 0.2^2), isotropic per axis"),
];

/// A test density with evaluation, exact functionals and a sampler.
#[derive(Clone, Debug)]
pub struct DensityModel {
    pub name: String,
    pub spec: DensitySpec,
    d: usize,
    components: Vec<Component>,
    cumulative: Vec<f64>,
    l2_sq_exact: Option<f64>,
    sup_norm: f64,
    smoothness: Option<NominalSmoothness>,
    support_box: Vec<(f64, f64)>,
}

impl DensityModel {
    pub fn new(spec: &DensitySpec) -> Result<Self> {
        let d = spec.dim();
        if d == 0 {
            return Err(Error::InvalidDimension(d));
        }
        let (name, components, smoothness) = match spec {
            DensitySpec::UniformCube { .. } => (
                "uniform_cube",
                vec![Component {
                    weight: 1.0,
                    marginals: vec![Marginal::Uniform { lo: 0.0, hi: 1.0 }; d],
                }],
                Some(NominalSmoothness { beta: 1.0, r: Some(1.0) }),
            ),
            DensitySpec::GaussianProduct { sigma, mean, .. } => (
                "gaussian_product",
                vec![Component {
                    weight: 1.0,
                    marginals: vec![Marginal::Gaussian { mean: *mean, sd: *sigma }; d],
                }],
                Some(NominalSmoothness { beta: 2.0, r: None }),
            ),
            DensitySpec::LaplaceProduct { lambda, .. } => (
                "laplace_product",
                vec![Component {
                    weight: 1.0,
                    marginals: vec![Marginal::Laplace { loc: 0.0, lambda: *lambda }; d],
                }],
                Some(NominalSmoothness { beta: 1.0, r: None }),
            ),
            DensitySpec::TriangularProduct { .. } => (
                "triangular_product",
                vec![Component {
                    weight: 1.0,
                    marginals: vec![Marginal::Triangular { center: 0.0, half_width: 1.0 }; d],
                }],
                Some(NominalSmoothness { beta: 1.0, r: None }),
            ),
            DensitySpec::GaussianMixture { weights, centers, sigmas, .. } => {
                if weights.is_empty() || weights.len() != centers.len() || weights.len() != sigmas.len() {
                    return Err(Error::InvalidParameter(
                        "mixture weights, centers and sigmas must have equal nonzero length".into(),
                    ));
                }
                if weights.iter().any(|w| !(*w > 0.0)) {
                    return Err(Error::InvalidParameter("mixture weights must be positive".into()));
                }
                let total: f64 = weights.iter().sum();
                let comps = weights
                    .iter()
                    .zip(centers)
                    .zip(sigmas)
                    .map(|((w, c), s)| Component {
                        weight: w / total,
                        marginals: vec![Marginal::Gaussian { mean: *c, sd: *s }; d],
                    })
                    .collect();
                ("gaussian_mixture", comps, Some(NominalSmoothness { beta: 2.0, r: None }))
            }
        };
        for c in &components {
            for m in &c.marginals {
                m.validate()?;
            }
        }
        let mut cumulative = Vec::with_capacity(components.len());
        let mut acc = 0.0;
        for c in &components {
            acc += c.weight;
            cumulative.push(acc);
        }
        let l2_sq_exact = {
            let mut total = 0.0;
            let mut ok = true;
            for a in &components {
                for b in &components {
                    let mut p = a.weight * b.weight;
                    for (ma, mb) in a.marginals.iter().zip(&b.marginals) {
                        match ma.cross_l2(mb) {
                            Some(v) => p *= v,
                            None => ok = false,
                        }
                    }
                    total += p;
                }
            }
            ok.then_some(total)
        };
        let support_box = (0..d)
            .map(|j| {
                components.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
                    let (a, b) = c.marginals[j].support();
                    (lo.min(a), hi.max(b))
                })
            })
            .collect();
        let mut model = DensityModel {
            name: name.to_string(),
            spec: spec.clone(),
            d,
            components,
            cumulative,
            l2_sq_exact,
            sup_norm: 0.0,
            smoothness,
            support_box,
        };
        model.sup_norm = model.compute_sup();
        Ok(model)
    }

    fn compute_sup(&self) -> f64 {
        if self.components.len() == 1 {
            return self.components[0].marginals.iter().map(Marginal::sup).product();
        }
        // Mixture of isotropic Gaussians: the maximum lies on the diagonal
        // segment spanned by the centres, so a 1-D search suffices.
        let on_diag = |t: f64| self.eval(&vec![t; self.d]);
        let (lo, hi) = self.support_box[0];
        let n = 20_000;
        let mut best = (lo, 0.0);
        for i in 0..=n {
            let t = lo + (hi - lo) * i as f64 / n as f64;
            let v = on_diag(t);
            if v > best.1 {
                best = (t, v);
            }
        }
        let step = (hi - lo) / n as f64;
        let (mut a, mut b) = (best.0 - step, best.0 + step);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..80 {
            let c = b - g * (b - a);
            let e = a + g * (b - a);
            if on_diag(c) > on_diag(e) {
                b = e;
            } else {
                a = c;
            }
        }
        best.1.max(on_diag(0.5 * (a + b)))
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.components.iter().map(|c| c.weight * c.pdf(x)).sum()
    }

    pub fn l2_sq_exact(&self) -> Option<f64> {
        self.l2_sq_exact
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    pub fn smoothness(&self) -> Option<&NominalSmoothness> {
        self.smoothness.as_ref()
    }

    pub fn support_box(&self) -> &[(f64, f64)] {
        &self.support_box
    }

    /// Probability of the box `prod (lo_j, hi_j]`.
    pub fn box_mass(&self, lo: &[f64], hi: &[f64]) -> f64 {
        self.components
            .iter()
            .map(|c| {
                c.weight
                    * c.marginals
                        .iter()
                        .enumerate()
                        .map(|(j, m)| m.mass(lo[j], hi[j]))
                        .product::<f64>()
            })
            .sum()
    }

    /// Autocorrelation `g(u) = int f(x) f(x + u) dx` at a point.
    pub fn autocorrelation(&self, u: &[f64]) -> f64 {
        let mut total = 0.0;
        for a in &self.components {
            for b in &self.components {
                let p: f64 = a
                    .marginals
                    .iter()
                    .zip(&b.marginals)
                    .zip(u)
                    .map(|((ma, mb), v)| ma.cross_correlation(mb, *v))
                    .product();
                total += a.weight * b.weight * p;
            }
        }
        total
    }

    /// `count` points, row-major, from a single RNG stream.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(count * self.d);
        for _ in 0..count {
            let comp = if self.components.len() == 1 {
                &self.components[0]
            } else {
                let u: f64 = rng.random();
                let idx = self.cumulative.partition_point(|c| *c <= u).min(self.components.len() - 1);
                &self.components[idx]
            };
            for m in &comp.marginals {
                out.push(m.sample(rng));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model(name: &str, d: usize) -> DensityModel {
        DensityModel::new(&DensitySpec::parse(name, d, &[]).unwrap()).unwrap()
    }

    #[test]
    fn closed_form_functionals() {
        let u = model("uniform", 3);
        assert_eq!(u.l2_sq_exact(), Some(1.0));
        assert_eq!(u.sup_norm(), 1.0);
        let g = model("gaussian", 1);
        assert!((g.l2_sq_exact().unwrap() - 0.282_094_791_773_878_1).abs() < 1e-15);
        let l = model("laplace", 2);
        assert!((l.l2_sq_exact().unwrap() - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn normalization_and_l2_by_quadrature() {
        let tol = Tolerance { rel: 1e-10, abs: 1e-14, max_depth: 30 };
        for name in ["uniform", "gaussian", "laplace", "triangular", "mixture"] {
            let m = model(name, 1);
            let (lo, hi) = m.support_box()[0];
            let cuts: Vec<f64> = m
                .components()
                .iter()
                .flat_map(|c| c.marginals[0].kinks())
                .collect();
            let p = quadrature::panels(lo, hi, cuts);
            let mass = quadrature::integrate(&|x| m.eval(&[x]), &p, tol).unwrap();
            assert!((mass - 1.0).abs() < 1e-6, "{name}: {mass}");
            let l2 = quadrature::integrate(&|x| m.eval(&[x]).powi(2), &p, tol).unwrap();
            assert!((l2 - m.l2_sq_exact().unwrap()).abs() < 1e-6, "{name}");
        }
    }

    #[test]
    fn cross_correlation_at_zero_is_l2() {
        for name in ["uniform", "gaussian", "laplace", "triangular"] {
            let m = model(name, 1);
            let g0 = m.autocorrelation(&[0.0]);
            assert!((g0 - m.l2_sq_exact().unwrap()).abs() < 1e-9, "{name}");
        }
    }

    #[test]
    fn closed_form_correlations_match_quadrature() {
        let tol = Tolerance { rel: 1e-11, abs: 1e-15, max_depth: 30 };
        let ms = [
            Marginal::Uniform { lo: 0.0, hi: 1.0 },
            Marginal::Laplace { loc: 0.0, lambda: 1.3 },
            Marginal::Triangular { center: 0.2, half_width: 0.8 },
            Marginal::Gaussian { mean: 0.1, sd: 0.7 },
        ];
        for m in &ms {
            for u in [-1.1, -0.3, 0.0, 0.45, 0.9, 1.7] {
                let (lo, hi) = m.support();
                let cuts: Vec<f64> = m.kinks().into_iter().chain(m.kinks().into_iter().map(|k| k - u)).collect();
                let f = |x: f64| m.pdf(x) * m.pdf(x + u);
                let q = quadrature::integrate(&f, &quadrature::panels(lo, hi, cuts), tol).unwrap();
                assert!((q - m.cross_correlation(m, u)).abs() < 1e-9, "{m:?} u={u}");
            }
        }
    }

    #[test]
    fn sampler_reproducible_and_in_range() {
        let m = model("uniform", 2);
        let a = m.sample(&mut ChaCha8Rng::seed_from_u64(9), 500);
        let b = m.sample(&mut ChaCha8Rng::seed_from_u64(9), 500);
        assert_eq!(a, b);
        assert!(a.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn gaussian_sample_mean() {
        let m = model("gaussian", 1);
        let x = m.sample(&mut ChaCha8Rng::seed_from_u64(1), 100_000);
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        assert!(mean.abs() < 0.02);
    }

    #[test]
    fn kolmogorov_smirnov_marginals() {
        for name in ["uniform", "gaussian", "laplace", "triangular", "mixture"] {
            let m = model(name, 2);
            let n = 10_000;
            let x = m.sample(&mut ChaCha8Rng::seed_from_u64(77), n);
            for j in 0..2 {
                let mut col: Vec<f64> = (0..n).map(|i| x[i * 2 + j]).collect();
                col.sort_by(|a, b| a.total_cmp(b));
                let cdf = |v: f64| {
                    m.components()
                        .iter()
                        .map(|c| c.weight * c.marginals[j].cdf(v))
                        .sum::<f64>()
                };
                let ks = col
                    .iter()
                    .enumerate()
                    .map(|(i, v)| {
                        let f = cdf(*v);
                        (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
                    })
                    .fold(0.0, f64::max);
                assert!(ks <= 0.025, "{name} axis {j}: {ks}");
            }
        }
    }

    #[test]
    fn unknown_and_invalid() {
        assert!(matches!(DensitySpec::parse("cauchy", 1, &[]), Err(Error::UnknownDensity(_))));
        let bad = DensitySpec::GaussianProduct { d: 1, sigma: -1.0, mean: 0.0 };
        assert!(matches!(DensityModel::new(&bad), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn mixture_sup_dominates_grid() {
        let m = model("mixture", 1);
        let mut best: f64 = 0.0;
        for i in 0..10_000 {
            let x = -3.0 + 6.0 * i as f64 / 10_000.0;
            best = best.max(m.eval(&[x]));
        }
        assert!(m.sup_norm() >= best - 1e-12);
        assert!(m.sup_norm() - best < 1e-4);
    }

    #[test]
    fn gaussian_mass_tails() {
        let g = Marginal::Gaussian { mean: 0.0, sd: 1.0 };
        let m = g.mass(6.0, 6.5);
        assert!((m - (std_normal_cdf(-6.0) - std_normal_cdf(-6.5))).abs() < 1e-20);
        assert!(m > 0.0);
    }
}
