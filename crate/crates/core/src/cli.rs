//! Command-line front end.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::density::{DensityModel, DensitySpec, ZOO};
use crate::error::{Error, Result};
use crate::grid::BandwidthGrid;
use crate::io::read_observations;
use crate::kernel::{KernelSet, PiecewisePoly1D};
use crate::oracle::{Oracle, OracleOptions};
use crate::rate::{self, Family, Index, Smoothness};
use crate::selector;
use crate::sim::{format_f64, resolve_threads, run_experiment, ExperimentConfig};
use crate::ustat::SplitSample;

/// Exit code for a failed threshold in check mode.
pub const EXIT_CHECK_FAILED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "l2dens", version, about = "Adaptive estimation of the L2 norm of a density")]
pub struct Cli {
    /// Seed for simulations (overrides the config file).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true, env = "L2DENS_THREADS")]
    pub threads: Option<usize>,
    /// Output file or directory.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Exit with status 2 when a configured threshold is violated.
    #[arg(long, global = true)]
    pub check: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the L2 norm from a sample of 2m observations.
    Estimate(EstimateArgs),
    /// Run a Monte Carlo experiment described by a JSON or TOML file.
    Simulate(SimulateArgs),
    /// Population bias, upper functions and oracle risk for a zoo density.
    Oracle(OracleArgs),
    /// List the bandwidth grid.
    Grid(GridArgs),
    /// Minimax exponent and theoretical bandwidth for smoothness parameters.
    Rate(RateArgs),
    /// Kernel utilities.
    Kernel {
        #[command(subcommand)]
        action: KernelAction,
    },
    /// Density zoo utilities.
    Zoo {
        #[command(subcommand)]
        action: ZooAction,
    },
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Input file, one observation per row.
    #[arg(long)]
    pub input: PathBuf,
    /// Kernel order.
    #[arg(long, default_value_t = 2)]
    pub b: u32,
    /// Moment order of the risk.
    #[arg(long, default_value_t = 2.0)]
    pub q: f64,
    /// Apply the isotropic combiner.
    #[arg(long)]
    pub isotropic: bool,
    /// The CSV file has a header row.
    #[arg(long, conflicts_with = "binary")]
    pub header: bool,
    /// The input uses the binary layout.
    #[arg(long)]
    pub binary: bool,
    /// Include the full per-bandwidth table.
    #[arg(long)]
    pub table: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Experiment file (.json or .toml).
    #[arg(long)]
    pub config: PathBuf,
    /// Also write plotdata/.
    #[arg(long)]
    pub plotdata: bool,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    /// Density name; see `zoo list`.
    #[arg(long)]
    pub density: String,
    /// Dimension.
    #[arg(long)]
    pub d: usize,
    /// Half-sample size.
    #[arg(long)]
    pub m: usize,
    /// Moment order of the risk.
    #[arg(long, default_value_t = 2.0)]
    pub q: f64,
    /// Kernel order.
    #[arg(long, default_value_t = 2)]
    pub b: u32,
    /// Density parameter as key=value; repeatable.
    #[arg(long = "param", value_parser = parse_param)]
    pub params: Vec<(String, f64)>,
    /// Skip the population upper functions (faster in two dimensions).
    #[arg(long)]
    pub risk_only: bool,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Half-sample size.
    #[arg(long)]
    pub m: usize,
    /// Dimension.
    #[arg(long)]
    pub d: usize,
}

#[derive(Debug, Args)]
pub struct RateArgs {
    /// Smoothness per axis, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub beta: Vec<f64>,
    /// Integrability index per axis, comma separated; `inf` allowed.
    #[arg(long, value_delimiter = ',', required = true)]
    pub r: Vec<Index>,
    /// Dimension; replicates a single beta and r over every axis.
    #[arg(long)]
    pub d: Option<usize>,
    /// Half-sample size for the theoretical bandwidth.
    #[arg(long)]
    pub m: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum KernelAction {
    /// Print exact kernel pieces and norms.
    Dump {
        /// Kernel order.
        #[arg(long, default_value_t = 2)]
        b: u32,
        /// Dimension.
        #[arg(long, default_value_t = 1)]
        d: usize,
        /// Also tabulate the 1-D functions at this many equispaced points.
        #[arg(long)]
        points: Option<usize>,
    },
}

#[derive(Debug, Subcommand)]
pub enum ZooAction {
    /// List the available densities.
    List,
}

fn parse_param(s: &str) -> std::result::Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got '{s}'"))?;
    let v: f64 = v.trim().parse().map_err(|_| format!("'{v}' is not a number"))?;
    Ok((k.trim().to_string(), v))
}

fn emit(out: &mut dyn Write, target: &Option<PathBuf>, text: &str) -> Result<()> {
    match target {
        Some(path) => std::fs::write(path, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn piecewise_json(p: &PiecewisePoly1D) -> serde_json::Value {
    json!({
        "breakpoints": p.breakpoints().iter().map(|b| b.to_string()).collect::<Vec<_>>(),
        "coefficients": p.segments().iter()
            .map(|s| s.iter().map(|c| c.to_string()).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
    })
}

/// Runs a parsed command; returns the process exit code.
pub fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<i32> {
    match cli.command {
        Command::Estimate(a) => {
            let obs = read_observations(&a.input, a.binary, a.header)?;
            let sample = SplitSample::from_rows(&obs.data, obs.dim)?;
            let kernels = KernelSet::new(a.b, obs.dim)?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(resolve_threads(cli.threads))
                .build()
                .map_err(|e| Error::Config(e.to_string()))?;
            let rep = pool.install(|| selector::run(&sample, &kernels, a.q, a.isotropic))?;
            let mut v = json!({
                "m": rep.m,
                "d": rep.d,
                "b": rep.b,
                "q": rep.q,
                "estimate": rep.estimate(),
                "selected": {
                    "exponents": rep.selection.exponents,
                    "h": rep.selection.h,
                    "n_hat": rep.selection.n_hat,
                    "estimate": rep.selection.estimate,
                },
                "combined": rep.combined,
            });
            if a.table {
                v["table"] = serde_json::to_value(&rep.table)?;
                v["diagnostics"] = serde_json::to_value(&rep.selection.diagnostics)?;
            }
            emit(out, &cli.output, &to_json(&v)?)?;
            Ok(0)
        }
        Command::Simulate(a) => {
            let mut cfg = ExperimentConfig::from_path(&a.config)?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            if cli.threads.is_some() {
                cfg.threads = cli.threads;
            }
            if a.plotdata {
                cfg.plotdata = true;
            }
            let dir = cli
                .output
                .clone()
                .or_else(|| cfg.output.clone())
                .unwrap_or_else(|| PathBuf::from("l2dens-output"));
            let report = run_experiment(&cfg)?;
            report.write(&dir)?;
            out.write_all(report.summary_table().as_bytes())?;
            for c in &report.checks {
                writeln!(
                    out,
                    "check {}: {} (value {}, threshold {})",
                    c.name,
                    if c.passed { "pass" } else { "FAIL" },
                    format_f64(c.value),
                    format_f64(c.threshold)
                )?;
            }
            Ok(if cli.check && !report.passed() { EXIT_CHECK_FAILED } else { 0 })
        }
        Command::Oracle(a) => {
            let spec = DensitySpec::parse(&a.density, a.d, &a.params)?;
            let model = DensityModel::new(&spec)?;
            let kernels = KernelSet::new(a.b, a.d)?;
            let grid = BandwidthGrid::new(a.m, a.d)?;
            let opts = if a.risk_only { OracleOptions::risk_only() } else { OracleOptions::for_dim(a.d) };
            let rep = Oracle::new(&model, &kernels)?.report(&grid, a.q, opts)?;
            emit(out, &cli.output, &to_json(&rep)?)?;
            Ok(0)
        }
        Command::Grid(a) => {
            let grid = BandwidthGrid::new(a.m, a.d)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            let mut header: Vec<String> = (1..=a.d).map(|j| format!("k{j}")).collect();
            header.extend((1..=a.d).map(|j| format!("h{j}")));
            header.extend(["volume", "small", "star", "upsilon"].map(String::from));
            w.write_record(&header).map_err(|e| Error::Config(e.to_string()))?;
            for mb in grid.members() {
                let mut rec: Vec<String> = mb.exponents.iter().map(u32::to_string).collect();
                rec.extend(mb.h.iter().map(|h| format_f64(*h)));
                rec.push(format_f64(mb.volume));
                rec.push(mb.small.to_string());
                rec.push(mb.star.to_string());
                rec.push(format_f64(mb.upsilon));
                w.write_record(&rec).map_err(|e| Error::Config(e.to_string()))?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
            emit(out, &cli.output, &String::from_utf8(bytes).expect("utf-8"))?;
            Ok(0)
        }
        Command::Rate(a) => {
            let (beta, r) = match a.d {
                Some(d) if a.beta.len() == 1 && a.r.len() == 1 => (vec![a.beta[0]; d], vec![a.r[0]; d]),
                Some(d) if a.beta.len() != d => {
                    return Err(Error::InvalidParameter(format!("--d {d} but {} beta values", a.beta.len())))
                }
                _ => (a.beta.clone(), a.r.clone()),
            };
            let p = Smoothness::new(beta, r)?;
            let (z_star, case) = rate::rate_exponent(&p);
            let mut v = json!({
                "beta": p.beta,
                "r": p.r,
                "rate_exponent": z_star,
                "case": case,
                "tau_1": rate::tau(&p, Index::Finite(1.0)),
                "tau_inf": rate::tau(&p, Index::Infinite),
            });
            if let Ok(reg) = rate::regime(&p) {
                v["regime"] = serde_json::to_value(reg)?;
                v["z"] = json!(rate::z_exponent(&p)?);
                v["inv_upsilon"] = json!(rate::inv_upsilon(&p));
            }
            if let Some(m) = a.m {
                v["normalization"] = json!(rate::normalization(z_star, m, Family::Anisotropic)?);
                if rate::regime(&p).is_ok() {
                    v["optimal_bandwidth"] = serde_json::to_value(rate::optimal_bandwidth(&p, m)?)?;
                }
            }
            emit(out, &cli.output, &to_json(&v)?)?;
            Ok(0)
        }
        Command::Kernel {
            action: KernelAction::Dump { b, d, points },
        } => {
            let k = KernelSet::new(b, d)?;
            let mut v = json!({
                "b": b,
                "d": d,
                "t": k.t(),
                "l1_norm_t": k.norm_t1(),
                "sup_norm_t": k.norm_tinf(),
                "varpi": k.varpi(),
                "kernel": piecewise_json(k.kappa()),
                "autocorrelation": piecewise_json(k.autocorr()),
            });
            if let Some(n) = points {
                let n = n.max(2);
                let t = k.t();
                let rows: Vec<[f64; 3]> = (0..n)
                    .map(|i| {
                        let y = -t + 2.0 * t * i as f64 / (n - 1) as f64;
                        [y, k.kappa_f64(y), k.auto_f64(y)]
                    })
                    .collect();
                v["table"] = json!(rows);
            }
            emit(out, &cli.output, &to_json(&v)?)?;
            Ok(0)
        }
        Command::Zoo { action: ZooAction::List } => {
            let mut text = String::new();
            for (name, desc) in ZOO {
                text.push_str(&format!("{name}\t{desc}\n"));
            }
            emit(out, &cli.output, &text)?;
            Ok(0)
        }
    }
}

/// Parses `args` and runs the command, printing errors to stderr.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match dispatch(cli, &mut lock) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (Result<i32>, String) {
        let cli = Cli::try_parse_from(std::iter::once("l2dens").chain(args.iter().copied())).unwrap();
        let mut buf = Vec::new();
        let r = dispatch(cli, &mut buf);
        (r, String::from_utf8(buf).unwrap())
    }

    #[test]
    fn grid_lists_seven_members() {
        let (r, text) = run(&["grid", "--m", "100", "--d", "1"]);
        assert_eq!(r.unwrap(), 0);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 8);
        assert!(lines[1].starts_with("1,"));
        assert!(lines[7].starts_with("7,"));
    }

    #[test]
    fn conflicting_flags_named() {
        let e = Cli::try_parse_from(["l2dens", "estimate", "--input", "x", "--header", "--binary"]).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("--header") && msg.contains("--binary"), "{msg}");
        assert!(Cli::try_parse_from(["l2dens", "grid", "--m", "5", "--d", "1", "--bogus"]).is_err());
    }

    #[test]
    fn rate_isotropic_and_param_parsing() {
        let (r, text) = run(&["rate", "--beta", "2", "--r", "inf", "--d", "2", "--m", "1000"]);
        assert_eq!(r.unwrap(), 0);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["rate_exponent"], json!(0.5));
        assert_eq!(parse_param("sigma=2").unwrap(), ("sigma".into(), 2.0));
        assert!(parse_param("sigma").is_err());
    }

    #[test]
    fn zoo_and_kernel() {
        let (_, text) = run(&["zoo", "list"]);
        assert_eq!(text.lines().count(), ZOO.len());
        let (_, text) = run(&["kernel", "dump", "--b", "2", "--points", "5"]);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["table"][2][1], json!(1.5));
    }
}
