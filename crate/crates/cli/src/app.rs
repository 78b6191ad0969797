//! Command-line arguments and subcommand dispatch.

use std::path::PathBuf;
use std::process::ExitCode;

use ambit_core::estimate::fit_powerlaw;
use ambit_core::Axis;
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use crate::config::{ConfigErrors, RunConfig};
use crate::output::{emit, num, Table};
use crate::pipeline::{self, FieldSource};
use crate::tables;
use crate::verify;

#[derive(Debug, Parser)]
#[command(name = "ambit", version, about = "Ambit fields driven by Lévy bases: closed forms, simulation and estimation")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Global {
    /// TOML run configuration
    #[arg(long, global = true, env = "AMBIT_CONFIG")]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed
    #[arg(long, global = true, env = "AMBIT_SEED")]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true, env = "AMBIT_THREADS")]
    pub threads: Option<usize>,
    /// Output directory; tables go to stdout when absent
    #[arg(long, global = true, env = "AMBIT_OUT")]
    pub out: Option<PathBuf>,
    /// Print per-realization summaries instead of storing fields
    #[arg(long, global = true)]
    pub no_store: bool,
    /// Skip simulation in `verify`
    #[arg(long, global = true)]
    pub analytic_only: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exponent tables tau(n1, n2) and mu(n) with the multifractal condition
    Exponents {
        /// Largest order (default: estimate.max_order)
        #[arg(long)]
        max_order: Option<u32>,
    },
    /// Overlap volumes V(dx, dt)
    Volume(PairArgs),
    /// Closed-form two-point correlators
    Correlate {
        #[command(flatten)]
        pairs: PairArgs,
        /// Orders n1,n2
        #[arg(long, value_parser = parse_pair::<u32>, default_value = "1,1")]
        orders: (u32, u32),
    },
    /// Lattice realizations
    Simulate,
    /// Empirical two-point correlators and coarse moments
    Estimate {
        /// Directory written by `simulate`; realizations are generated when absent
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Power-law fit of a CSV column against its first column
    Fit {
        /// CSV written by `estimate` or `correlate`
        #[arg(long)]
        input: PathBuf,
        /// Column holding the values (default: the last one that is not a standard error)
        #[arg(long)]
        column: Option<String>,
        /// Fit range lo,hi
        #[arg(long, value_parser = parse_pair::<f64>)]
        range: Option<(f64, f64)>,
        /// Use the configured fit range of this axis
        #[arg(long, conflicts_with = "range", value_parser = parse_axis)]
        axis: Option<Axis>,
    },
    /// Nested integral F_n, its product bound and the relative-error bound
    Appendix {
        #[arg(long, value_delimiter = ',', default_values_t = [2u32, 3, 4])]
        orders: Vec<u32>,
        /// Ratios l / l_scal
        #[arg(long, value_delimiter = ',', default_values_t = [10.0, 100.0, 1000.0])]
        ratios: Vec<f64>,
        #[arg(long, default_value_t = 200_000)]
        samples: usize,
    },
    /// Analytic identities, simulation and fitted exponents with pass/fail
    Verify,
}

fn parse_pair<T: std::str::FromStr>(s: &str) -> Result<(T, T), String> {
    let parse = |v: &str| v.trim().parse::<T>().map_err(|_| format!("`{v}` is not a valid number"));
    match s.split_once(',') {
        Some((a, b)) => Ok((parse(a)?, parse(b)?)),
        None => Err(format!("expected two comma-separated values, got `{s}`")),
    }
}

fn parse_axis(s: &str) -> Result<Axis, String> {
    match s {
        "temporal" => Ok(Axis::Temporal),
        "spatial" => Ok(Axis::Spatial),
        _ => Err(format!("expected `temporal` or `spatial`, got `{s}`")),
    }
}

#[derive(Debug, Clone, Args)]
pub struct PairArgs {
    /// Spatial lags; with --dt, every combination is tabulated
    #[arg(long, value_delimiter = ',')]
    pub dx: Vec<f64>,
    /// Temporal lags
    #[arg(long, value_delimiter = ',')]
    pub dt: Vec<f64>,
}

impl PairArgs {
    fn pairs(&self, plan: &crate::config::Plan) -> Vec<(f64, f64)> {
        match (self.dx.is_empty(), self.dt.is_empty()) {
            (true, true) => tables::default_pairs(plan),
            (false, true) => tables::cross_pairs(&self.dx, &[0.0]),
            (true, false) => tables::cross_pairs(&[0.0], &self.dt),
            (false, false) => tables::cross_pairs(&self.dx, &self.dt),
        }
    }
}

/// Exit status for invalid configurations.
pub const EXIT_CONFIG: u8 = 2;
/// Exit status when `verify` ran but a check failed.
pub const EXIT_CHECKS: u8 = 1;

fn load_config(global: &Global) -> Result<RunConfig, ConfigErrors> {
    let mut config = RunConfig::load(global.config.as_deref())?;
    if let Some(seed) = global.seed {
        config.seed = seed;
    }
    Ok(config)
}

pub fn run(cli: Cli) -> ExitCode {
    if let Some(n) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} worker threads: {e}");
            return ExitCode::FAILURE;
        }
    }
    let config = match load_config(&cli.global) {
        Ok(c) => c,
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match dispatch(&cli, config) {
        Ok(code) => code,
        Err(e) => match e.downcast_ref::<ConfigErrors>() {
            Some(c) => {
                eprint!("{c}");
                ExitCode::from(EXIT_CONFIG)
            }
            None => {
                eprintln!("error: {e:#}");
                ExitCode::FAILURE
            }
        },
    }
}

fn dispatch(cli: &Cli, config: RunConfig) -> Result<ExitCode> {
    let g = &cli.global;
    let out = g.out.as_deref();
    match &cli.command {
        Command::Exponents { max_order } => {
            let plan = config.resolve(false)?;
            let max = max_order.unwrap_or(plan.config.estimate.max_order);
            emit(&tables::exponent_tables(&plan, max), out)?;
        }
        Command::Volume(pairs) => {
            let plan = config.resolve(false)?;
            emit(&[tables::volume_table(&plan, &pairs.pairs(&plan))?], out)?;
        }
        Command::Correlate { pairs, orders } => {
            let plan = config.resolve(false)?;
            let t = tables::correlate_table(&plan, &pairs.pairs(&plan), *orders)?;
            emit(&[t], out)?;
        }
        Command::Simulate => {
            let plan = config.resolve(true)?;
            if g.no_store {
                emit(&[pipeline::summary_table(&plan)?], out)?;
            } else {
                let dir = out.unwrap_or(&plan.config.output.dir);
                let files = pipeline::store_fields(&plan, dir)?;
                eprintln!("wrote {} files to {}", files.len(), dir.display());
            }
        }
        Command::Estimate { input } => {
            let estimates = match input {
                Some(dir) => {
                    let header = pipeline::read_header(dir)?;
                    let mut config = config;
                    config.seed = header.seed;
                    config.basis = header.basis;
                    config.scaling = header.scaling;
                    config.lattice.dx = header.dx;
                    config.lattice.dt = header.dt;
                    config.lattice.nx = header.nx;
                    config.lattice.nt = header.nt;
                    config.lattice.burn_in = Some(header.burn_in);
                    config.lattice.realizations = header.realizations;
                    let plan = config.resolve(true)?;
                    pipeline::estimate(&plan, FieldSource::Stored { dir, header: &header })?
                }
                None => {
                    let plan = config.resolve(true)?;
                    pipeline::estimate(&plan, FieldSource::Generate)?
                }
            };
            for w in estimates.warnings() {
                eprintln!("warning: {w}");
            }
            emit(&estimates.tables(), out)?;
        }
        Command::Fit { input, column, range, axis } => {
            let points = read_points(input, column.as_deref())?;
            let range = match (range, axis) {
                (Some(r), _) => *r,
                (None, Some(a)) => config.resolve(false)?.fit_range(*a),
                (None, None) => points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                    (lo.min(p.0), hi.max(p.0))
                }),
            };
            let fit = fit_powerlaw(&points, range)?;
            let mut t = Table::new("fit", &["slope", "intercept", "r2", "lo", "hi", "npoints"]);
            t.push(vec![
                num(fit.slope),
                num(fit.intercept),
                num(fit.r_squared),
                num(fit.lo),
                num(fit.hi),
                fit.points.to_string(),
            ]);
            emit(&[t], out)?;
        }
        Command::Appendix { orders, ratios, samples } => {
            let plan = config.resolve(false)?;
            emit(&tables::appendix_tables(&plan, orders, ratios, *samples)?, out)?;
        }
        Command::Verify => {
            let plan = config.resolve(!g.analytic_only)?;
            let dir = out.unwrap_or(&plan.config.output.dir).to_path_buf();
            let report = verify::run(&plan, &dir, g.analytic_only)?;
            print!("{}", report.summary());
            if !report.passed() {
                return Ok(ExitCode::from(EXIT_CHECKS));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

/// `(first column, value column)` pairs of a CSV table.
pub fn read_points(path: &std::path::Path, column: Option<&str>) -> Result<Vec<(f64, f64)>> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let header = reader.headers()?.clone();
    let index = match column {
        Some(c) => header
            .iter()
            .position(|h| h == c)
            .with_context(|| format!("{} has no column `{c}`", path.display()))?,
        None => (0..header.len())
            .rev()
            .find(|&i| &header[i] != "stderr")
            .filter(|&i| i > 0)
            .with_context(|| format!("{} needs at least two columns", path.display()))?,
    };
    let mut points = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let parse = |i: usize| -> Result<f64> {
            let s = record.get(i).unwrap_or_default();
            s.parse().with_context(|| format!("row {}: `{s}` is not a number", row + 1))
        };
        points.push((parse(0)?, parse(index)?));
    }
    if points.is_empty() {
        bail!("{} has no data rows", path.display());
    }
    Ok(points)
}
