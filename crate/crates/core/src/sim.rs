//! Seeded Monte Carlo experiments: risk curves, concentration exceedances,
//! oracle ratios and the isotropic combiner.
//!
//! Replication `i` of density `k` at half-sample size `m` draws from a
//! ChaCha8 stream seeded by mixing `(seed, k, m, i)`, so results do not depend
//! on the number of workers. Replications are collected in index order and
//! reduced sequentially.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::density::{DensityModel, DensitySpec};
use crate::error::{Error, Result};
use crate::grid::BandwidthGrid;
use crate::kernel::KernelSet;
use crate::oracle::{Oracle, OracleOptions, OracleReport};
use crate::rate::{optimal_bandwidth, Index, Smoothness};
use crate::selector::{combine_branch_with, combine_threshold, parametric_bandwidth, run_with_grid, Branch};
use crate::ustat::{pair_sums, SplitSample, StatTable};

/// Experiment families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Risk,
    Concentration,
    OracleRatio,
    Combiner,
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ExperimentKind::Risk => "risk",
            ExperimentKind::Concentration => "concentration",
            ExperimentKind::OracleRatio => "oracle_ratio",
            ExperimentKind::Combiner => "combiner",
        })
    }
}

/// Thresholds evaluated in `--check` mode. Absent entries are not checked.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    /// Every fitted log-log slope must be at most this.
    pub max_slope: Option<f64>,
    /// Every exceedance frequency must be at most this.
    pub max_frequency: Option<f64>,
    /// Largest over smallest oracle ratio must be at most this.
    pub max_ratio_spread: Option<f64>,
    /// Combined risk over the smaller branch risk must be at most this.
    pub max_combined_ratio: Option<f64>,
}

/// One experiment, as read from a JSON or TOML file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default = "default_suite")]
    pub densities: Vec<DensitySpec>,
    pub m: Vec<usize>,
    pub replications: usize,
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default = "default_b")]
    pub b: u32,
    #[serde(default)]
    pub seed: u64,
    /// Report the isotropic combined estimate instead of the selected one.
    #[serde(default)]
    pub isotropic: bool,
    /// Replaces `2 ln(m)/sqrt(m)` in the combiner.
    #[serde(default)]
    pub threshold: Option<f64>,
    /// Multiplies every population upper function in concentration runs.
    #[serde(default = "default_scale")]
    pub upper_scale: f64,
    /// Worker count; not serialised.
    #[serde(default, skip_serializing)]
    pub threads: Option<usize>,
    #[serde(default, skip_serializing)]
    pub output: Option<PathBuf>,
    /// Write `plotdata/` next to the reports.
    #[serde(default)]
    pub plotdata: bool,
    #[serde(default)]
    pub check: CheckSpec,
}

fn default_q() -> f64 {
    2.0
}
fn default_b() -> u32 {
    2
}
fn default_scale() -> f64 {
    1.0
}

/// Uniform, Gaussian, Laplace and the two-component mixture in `d = 1, 2`.
pub fn default_suite() -> Vec<DensitySpec> {
    let mut out = Vec::new();
    for d in [1, 2] {
        for name in ["uniform", "gaussian", "laplace", "mixture"] {
            out.push(DensitySpec::parse(name, d, &[]).expect("zoo name"));
        }
    }
    out
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind, densities: Vec<DensitySpec>, m: Vec<usize>, replications: usize) -> Self {
        ExperimentConfig {
            experiment,
            densities,
            m,
            replications,
            q: default_q(),
            b: default_b(),
            seed: 0,
            isotropic: false,
            threshold: None,
            upper_scale: 1.0,
            threads: None,
            output: None,
            plotdata: false,
            check: CheckSpec::default(),
        }
    }

    /// Reads JSON (`.json`) or TOML (anything else).
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if self.m.is_empty() {
            return Err(Error::Config("the m list is empty".into()));
        }
        if let Some(&m) = self.m.iter().find(|&&m| m < 21) {
            return Err(Error::UnsupportedSampleSize(m));
        }
        if self.densities.is_empty() {
            return Err(Error::Config("no densities given".into()));
        }
        if !(self.q >= 1.0) {
            return Err(Error::Config(format!("q must be at least 1, got {}", self.q)));
        }
        if !(2..=8).contains(&self.b) {
            return Err(Error::InvalidOrder(self.b));
        }
        if !(self.upper_scale > 0.0) {
            return Err(Error::Config("upper_scale must be positive".into()));
        }
        if matches!(self.experiment, ExperimentKind::Concentration | ExperimentKind::OracleRatio)
            && self.densities.iter().any(|d| d.dim() > crate::oracle::MAX_ORACLE_DIM)
        {
            return Err(Error::Config("oracle quantities need d <= 2".into()));
        }
        Ok(())
    }
}

/// A row of the long-format report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LongRow {
    pub experiment: String,
    pub density: String,
    pub m: usize,
    pub metric: String,
    pub value: f64,
}

/// A threshold comparison made in check mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

/// An x-y series for external plotting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotSeries {
    pub name: String,
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<(f64, f64)>,
}

/// Serialisable experiment outcome shared by every family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub experiment: ExperimentKind,
    pub config: ExperimentConfig,
    pub rows: Vec<LongRow>,
    pub summary: BTreeMap<String, f64>,
    pub checks: Vec<CheckOutcome>,
    pub plots: Vec<PlotSeries>,
}

impl SimReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Long-format CSV with floats at 17 significant digits.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["experiment", "density", "m", "metric", "value"])
            .map_err(csv_err)?;
        for r in &self.rows {
            w.write_record([
                r.experiment.as_str(),
                r.density.as_str(),
                &r.m.to_string(),
                r.metric.as_str(),
                &format_f64(r.value),
            ])
            .map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("utf-8 csv"))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Writes `report.csv`, `report.json` and optionally `plotdata/`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.csv"), self.to_csv()?)?;
        std::fs::write(dir.join("report.json"), self.to_json()?)?;
        if self.config.plotdata {
            let pd = dir.join("plotdata");
            std::fs::create_dir_all(&pd)?;
            for s in &self.plots {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record([s.x_label.as_str(), s.y_label.as_str()]).map_err(csv_err)?;
                for (x, y) in &s.points {
                    w.write_record([format_f64(*x), format_f64(*y)]).map_err(csv_err)?;
                }
                let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
                std::fs::write(pd.join(format!("{}.csv", s.name)), bytes)?;
            }
        }
        Ok(())
    }

    /// Summary table as `key,value` lines.
    pub fn summary_table(&self) -> String {
        self.summary
            .iter()
            .map(|(k, v)| format!("{k},{}\n", format_f64(*v)))
            .collect()
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("csv: {e}"))
}

/// `{:.16e}`: 17 significant digits, enough for a lossless round trip.
pub fn format_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for replication `index` of density `density` at size `m`.
pub fn replication_seed(seed: u64, density: usize, m: usize, index: usize) -> u64 {
    [density as u64, m as u64, index as u64]
        .iter()
        .fold(splitmix(seed), |acc, v| splitmix(acc ^ splitmix(*v)))
}

/// Draws `2m` points and splits them into the two halves.
pub fn draw_sample(model: &DensityModel, m: usize, seed: u64) -> Result<SplitSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = model.sample(&mut rng, 2 * m);
    SplitSample::from_rows(&data, model.dim())
}

/// Worker count: explicit, then `L2DENS_THREADS`, then available cores.
pub fn resolve_threads(explicit: Option<usize>) -> usize {
    explicit
        .or_else(|| std::env::var("L2DENS_THREADS").ok().and_then(|v| v.parse().ok()))
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Wilson score interval at 95%.
pub fn wilson(successes: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054;
    let nf = n as f64;
    let p = successes as f64 / nf;
    let denom = 1.0 + z * z / nf;
    let center = (p + z * z / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// OLS slope of `y` on `x` with a 95% confidence half-width (`None` with two points).
pub fn ols_slope(x: &[f64], y: &[f64]) -> (f64, Option<f64>) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    if x.len() < 3 {
        return (slope, None);
    }
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let df = n - 2.0;
    let se = (sse / df / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, df).expect("df > 0").inverse_cdf(0.975);
    (slope, Some(t * se))
}

/// Empirical q-risk of a set of errors and its delta-method standard error.
pub fn q_risk(errors: &[f64], q: f64) -> (f64, f64) {
    let n = errors.len() as f64;
    let pw: Vec<f64> = errors.iter().map(|e| e.abs().powf(q)).collect();
    let mean = pw.iter().sum::<f64>() / n;
    let var = if errors.len() > 1 {
        pw.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let risk = mean.powf(1.0 / q);
    let se_mean = (var / n).sqrt();
    let se = if mean > 0.0 { risk / (q * mean) * se_mean } else { 0.0 };
    (risk, se)
}

/// Label combining the zoo name and the dimension.
pub fn density_label(model: &DensityModel) -> String {
    format!("{}_d{}", model.name, model.dim())
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    pool: rayon::ThreadPool,
    rows: Vec<LongRow>,
    summary: BTreeMap<String, f64>,
    checks: Vec<CheckOutcome>,
    plots: Vec<PlotSeries>,
}

impl<'a> Ctx<'a> {
    fn new(cfg: &'a ExperimentConfig) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(resolve_threads(cfg.threads))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        Ok(Ctx {
            cfg,
            pool,
            rows: Vec::new(),
            summary: BTreeMap::new(),
            checks: Vec::new(),
            plots: Vec::new(),
        })
    }

    fn push(&mut self, density: &str, m: usize, metric: &str, value: f64) {
        if value.is_finite() {
            self.rows.push(LongRow {
                experiment: self.cfg.experiment.to_string(),
                density: density.to_string(),
                m,
                metric: metric.to_string(),
                value,
            });
        }
    }

    fn check(&mut self, name: String, value: f64, threshold: Option<f64>) {
        if let Some(t) = threshold {
            self.checks.push(CheckOutcome {
                name,
                value,
                threshold: t,
                passed: value <= t,
            });
        }
    }

    fn replicate<T, F>(&self, model: &DensityModel, k: usize, m: usize, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(SplitSample) -> Result<T> + Sync,
    {
        let label = density_label(model);
        self.pool.install(|| {
            (0..self.cfg.replications)
                .into_par_iter()
                .map(|i| {
                    draw_sample(model, m, replication_seed(self.cfg.seed, k, m, i))
                        .and_then(&f)
                        .map_err(|e| Error::Replication {
                            density: label.clone(),
                            m,
                            index: i,
                            source: Box::new(e),
                        })
                })
                .collect()
        })
    }

    fn finish(self) -> SimReport {
        SimReport {
            experiment: self.cfg.experiment,
            config: self.cfg.clone(),
            rows: self.rows,
            summary: self.summary,
            checks: self.checks,
            plots: self.plots,
        }
    }
}

fn kernel_for(cfg: &ExperimentConfig, d: usize) -> Result<KernelSet> {
    KernelSet::new(cfg.b, d)
}

fn exact_norm(model: &DensityModel) -> Result<f64> {
    model
        .l2_sq_exact()
        .map(f64::sqrt)
        .ok_or_else(|| Error::Domain(format!("{} has no exact L2 norm", model.name)))
}

/// One risk point per `(density, m)`.
#[derive(Clone, Debug, Serialize)]
pub struct RiskPoint {
    pub density: String,
    pub m: usize,
    pub risk: f64,
    pub se: f64,
    pub mean_h: Vec<f64>,
    pub parametric_frequency: Option<f64>,
    pub fixed_risk: Option<f64>,
}

// Per-replication output of the selection pipeline.
struct RepOut {
    estimate: f64,
    adaptive: f64,
    parametric: Option<f64>,
    branch: Option<Branch>,
    h: Vec<f64>,
    fixed: Option<f64>,
}

fn selection_replication(
    sample: &SplitSample,
    grid: &BandwidthGrid,
    kernels: &KernelSet,
    q: f64,
    isotropic: bool,
    threshold: f64,
    fixed_h: Option<&[f64]>,
) -> Result<RepOut> {
    let rep = run_with_grid(sample, grid, kernels, q, false)?;
    let adaptive = rep.selection.estimate;
    let (parametric, branch, estimate) = if isotropic {
        let n = pair_sums(sample, &parametric_bandwidth(sample.m(), sample.dim()), kernels)?.n_hat;
        let est_p = n.abs().sqrt();
        let br = combine_branch_with(adaptive, est_p, threshold);
        let est = if br == Branch::Parametric { est_p } else { adaptive };
        (Some(est_p), Some(br), est)
    } else {
        (None, None, adaptive)
    };
    let fixed = match fixed_h {
        Some(h) => Some(pair_sums(sample, h, kernels)?.n_hat.abs().sqrt()),
        None => None,
    };
    Ok(RepOut {
        estimate,
        adaptive,
        parametric,
        branch,
        h: rep.selection.h,
        fixed,
    })
}

fn fixed_bandwidth(model: &DensityModel, m: usize) -> Option<Vec<f64>> {
    let s = model.smoothness()?;
    let r = match s.r {
        Some(r) => Index::new(r).ok()?,
        None => Index::Infinite,
    };
    let p = Smoothness::isotropic(s.beta, r, model.dim()).ok()?;
    optimal_bandwidth(&p, m).ok().map(|o| o.projected_h)
}

/// Risk curves and slope fits.
pub fn run_risk(cfg: &ExperimentConfig) -> Result<SimReport> {
    cfg.validate()?;
    let mut ctx = Ctx::new(cfg)?;
    for (k, spec) in cfg.densities.iter().enumerate() {
        let model = DensityModel::new(spec)?;
        let label = density_label(&model);
        let norm = exact_norm(&model)?;
        let kernels = kernel_for(cfg, model.dim())?;
        let mut points = Vec::new();
        for &m in &cfg.m {
            let grid = BandwidthGrid::new(m, model.dim())?;
            let thr = cfg.threshold.unwrap_or_else(|| combine_threshold(m));
            let fixed = fixed_bandwidth(&model, m);
            let out = ctx.replicate(&model, k, m, |s| {
                selection_replication(&s, &grid, &kernels, cfg.q, cfg.isotropic, thr, fixed.as_deref())
            })?;
            let errs: Vec<f64> = out.iter().map(|o| o.estimate - norm).collect();
            let (risk, se) = q_risk(&errs, cfg.q);
            let r = out.len() as f64;
            let mean_h: Vec<f64> = (0..model.dim())
                .map(|j| out.iter().map(|o| o.h[j]).sum::<f64>() / r)
                .collect();
            let pf = cfg.isotropic.then(|| {
                out.iter().filter(|o| o.branch == Some(Branch::Parametric)).count() as f64 / r
            });
            let fixed_risk = fixed.as_ref().map(|_| {
                let e: Vec<f64> = out.iter().map(|o| o.fixed.expect("fixed") - norm).collect();
                q_risk(&e, cfg.q).0
            });
            ctx.push(&label, m, "risk", risk);
            ctx.push(&label, m, "risk_se", se);
            for (j, h) in mean_h.iter().enumerate() {
                ctx.push(&label, m, &format!("mean_h{}", j + 1), *h);
            }
            if let Some(p) = pf {
                ctx.push(&label, m, "parametric_frequency", p);
            }
            if let Some(fr) = fixed_risk {
                ctx.push(&label, m, "fixed_bandwidth_risk", fr);
            }
            points.push(RiskPoint {
                density: label.clone(),
                m,
                risk,
                se,
                mean_h,
                parametric_frequency: pf,
                fixed_risk,
            });
        }
        let x: Vec<f64> = points.iter().map(|p| (p.m as f64).ln()).collect();
        let y: Vec<f64> = points.iter().map(|p| p.risk.ln()).collect();
        if points.len() >= 2 {
            let (slope, hw) = ols_slope(&x, &y);
            ctx.summary.insert(format!("{label}.slope"), slope);
            if let Some(hw) = hw {
                ctx.summary.insert(format!("{label}.slope_half_width"), hw);
            }
            let monotone = points.windows(2).all(|w| w[1].risk < w[0].risk + w[0].se.max(w[1].se));
            ctx.summary.insert(format!("{label}.monotone_within_se"), f64::from(u8::from(monotone)));
            ctx.check(format!("{label}.slope"), slope, cfg.check.max_slope);
        }
        ctx.plots.push(PlotSeries {
            name: format!("risk_{label}"),
            x_label: "ln_m".into(),
            y_label: "ln_risk".into(),
            points: x.into_iter().zip(y).collect(),
        });
    }
    Ok(ctx.finish())
}

/// Builds the oracle table for one density and size, as used by the checks.
pub fn oracle_table(model: &DensityModel, kernels: &KernelSet, m: usize, q: f64, opts: OracleOptions) -> Result<OracleReport> {
    let grid = BandwidthGrid::new(m, model.dim())?;
    Oracle::new(model, kernels)?.report(&grid, q, opts)
}

/// Event indicators of one concentration replication.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Exceedances {
    pub signed: bool,
    pub absolute: bool,
    pub upper: bool,
    pub lower: bool,
}

/// Evaluates the exceedance events of one statistics table against an oracle table.
pub fn exceedances(table: &StatTable, oracle: &OracleReport, scale: f64) -> Exceedances {
    let mut e = Exceedances::default();
    for (row, orow) in table.rows.iter().zip(&oracle.rows) {
        let u_star = scale * orow.u_star.expect("population upper function");
        let centre = oracle.l2_sq - orow.bias_sq;
        e.signed |= (row.n_hat - centre).abs() - u_star > 0.0;
        e.absolute |= (row.j_hat - orow.j.expect("population J")).abs() - u_star > 0.0;
        e.upper |= row.ucal - 2.0 * u_star > 0.0;
        e.lower |= u_star - 9.0 * row.ucal > 0.0;
    }
    e
}

/// Empirical exceedance frequencies of the concentration events.
pub fn run_concentration(cfg: &ExperimentConfig) -> Result<SimReport> {
    cfg.validate()?;
    let mut ctx = Ctx::new(cfg)?;
    for (k, spec) in cfg.densities.iter().enumerate() {
        let model = DensityModel::new(spec)?;
        let label = density_label(&model);
        let d = model.dim();
        let kernels = kernel_for(cfg, d)?;
        for &m in &cfg.m {
            let oracle = oracle_table(&model, &kernels, m, cfg.q, OracleOptions::for_dim(d))?;
            let grid = BandwidthGrid::new(m, d)?;
            let events = ctx.replicate(&model, k, m, |s| {
                let table = StatTable::build(&s, &grid, &kernels, cfg.q)?;
                Ok(exceedances(&table, &oracle, cfg.upper_scale))
            })?;
            let n = events.len();
            let mf = m as f64;
            let lnm = mf.ln();
            for (name, count) in [
                ("signed", events.iter().filter(|e| e.signed).count()),
                ("absolute", events.iter().filter(|e| e.absolute).count()),
                ("upper", events.iter().filter(|e| e.upper).count()),
                ("lower", events.iter().filter(|e| e.lower).count()),
            ] {
                let freq = count as f64 / n as f64;
                let (lo, hi) = wilson(count, n);
                ctx.push(&label, m, &format!("{name}_frequency"), freq);
                ctx.push(&label, m, &format!("{name}_wilson_lo"), lo);
                ctx.push(&label, m, &format!("{name}_wilson_hi"), hi);
                ctx.summary.insert(format!("{label}.m{m}.{name}_frequency"), freq);
                ctx.check(format!("{label}.m{m}.{name}_frequency"), freq, cfg.check.max_frequency);
            }
            let bound3 = oracle.constants.lambda_star_q * (2.0 * lnm).powi(d as i32) * mf.powf(-4.0 * cfg.q);
            let shape4 = (2.0 * lnm).powf(d as f64 / 2.0) * mf.powf(-2.0 * cfg.q);
            ctx.push(&label, m, "deviation_bound", bound3);
            ctx.push(&label, m, "envelope_bound_shape", shape4);
        }
    }
    Ok(ctx.finish())
}

/// `min(O/||f||, sqrt(O))`.
pub fn oracle_denominator(o_star: f64, norm: f64) -> f64 {
    (o_star / norm).min(o_star.sqrt())
}

/// Empirical risk over the oracle bound for every density and size.
pub fn run_oracle_ratio(cfg: &ExperimentConfig) -> Result<SimReport> {
    cfg.validate()?;
    let mut ctx = Ctx::new(cfg)?;
    let mut ratios = Vec::new();
    for (k, spec) in cfg.densities.iter().enumerate() {
        let model = DensityModel::new(spec)?;
        let label = density_label(&model);
        let norm = exact_norm(&model)?;
        let d = model.dim();
        let kernels = kernel_for(cfg, d)?;
        let mut series = Vec::new();
        for &m in &cfg.m {
            let grid = BandwidthGrid::new(m, d)?;
            let oracle = Oracle::new(&model, &kernels)?.report(&grid, cfg.q, OracleOptions::risk_only())?;
            let thr = cfg.threshold.unwrap_or_else(|| combine_threshold(m));
            let out = ctx.replicate(&model, k, m, |s| {
                selection_replication(&s, &grid, &kernels, cfg.q, cfg.isotropic, thr, None)
            })?;
            let errs: Vec<f64> = out.iter().map(|o| o.estimate - norm).collect();
            let (risk, _) = q_risk(&errs, cfg.q);
            let denom = oracle_denominator(oracle.o_star, norm);
            let ratio = risk / denom;
            ctx.push(&label, m, "risk", risk);
            ctx.push(&label, m, "oracle_risk", oracle.o_star);
            ctx.push(&label, m, "denominator", denom);
            ctx.push(&label, m, "ratio", ratio);
            ratios.push(ratio);
            series.push(((m as f64).ln(), ratio));
        }
        ctx.plots.push(PlotSeries {
            name: format!("ratio_{label}"),
            x_label: "ln_m".into(),
            y_label: "ratio".into(),
            points: series,
        });
    }
    let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    ctx.summary.insert("ratio_max".into(), max);
    ctx.summary.insert("ratio_min".into(), min);
    ctx.summary.insert("ratio_spread".into(), max / min);
    ctx.check("ratio_spread".into(), max / min, cfg.check.max_ratio_spread);
    Ok(ctx.finish())
}

/// Branch frequencies and risks of the isotropic combiner.
pub fn run_combiner(cfg: &ExperimentConfig) -> Result<SimReport> {
    cfg.validate()?;
    let mut ctx = Ctx::new(cfg)?;
    for (k, spec) in cfg.densities.iter().enumerate() {
        let model = DensityModel::new(spec)?;
        let label = density_label(&model);
        let norm = exact_norm(&model)?;
        let kernels = kernel_for(cfg, model.dim())?;
        for &m in &cfg.m {
            let grid = BandwidthGrid::new(m, model.dim())?;
            let thr = cfg.threshold.unwrap_or_else(|| combine_threshold(m));
            let out = ctx.replicate(&model, k, m, |s| {
                selection_replication(&s, &grid, &kernels, cfg.q, true, thr, None)
            })?;
            let r = out.len() as f64;
            let freq = out.iter().filter(|o| o.branch == Some(Branch::Parametric)).count() as f64 / r;
            let risk = |f: &dyn Fn(&RepOut) -> f64| {
                let e: Vec<f64> = out.iter().map(|o| f(o) - norm).collect();
                q_risk(&e, cfg.q).0
            };
            let rp = risk(&|o| o.parametric.expect("combiner run"));
            let ra = risk(&|o| o.adaptive);
            let rc = risk(&|o| o.estimate);
            let rel = rc / rp.min(ra);
            ctx.push(&label, m, "parametric_frequency", freq);
            ctx.push(&label, m, "risk_parametric", rp);
            ctx.push(&label, m, "risk_adaptive", ra);
            ctx.push(&label, m, "risk_combined", rc);
            ctx.push(&label, m, "combined_over_min", rel);
            ctx.summary.insert(format!("{label}.m{m}.parametric_frequency"), freq);
            ctx.summary.insert(format!("{label}.m{m}.combined_over_min"), rel);
            ctx.check(format!("{label}.m{m}.combined_over_min"), rel, cfg.check.max_combined_ratio);
        }
    }
    Ok(ctx.finish())
}

/// Dispatches on the experiment kind.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<SimReport> {
    match cfg.experiment {
        ExperimentKind::Risk => run_risk(cfg),
        ExperimentKind::Concentration => run_concentration(cfg),
        ExperimentKind::OracleRatio => run_oracle_ratio(cfg),
        ExperimentKind::Combiner => run_combiner(cfg),
    }
}
