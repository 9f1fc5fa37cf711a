//! Config-driven experiment runner behind the `qpost` binary.

mod config;
mod report;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

pub use config::{read_affine_spec, ExperimentConfig, LambdaPriorKind, PriorConfig, ReportOptions, ThetaPriorKind};
pub use report::{
    chain_block_len, chain_distance, run_experiment, BoundaryPoint, CellDistances, CellReport, ChainSummary,
    ExperimentReport, RegionSummary, Timings, SCHEMA_VERSION,
};

use crate::diagnostics::{exact_posterior_quadrature, l1_grid, DistanceResult};
use crate::error::{Error, Result};
use crate::examples::{ExampleBundle, ExampleId};
use crate::limit::{limiting_theta_density, LimitKind, LimitVariant};
use crate::model::Dataset;
use crate::region::{estimate_region, population_region};
use report::{create_file, run_conditions, sample_chain, write_json};

/// JSON schema of `report.json`.
pub const REPORT_SCHEMA: &str = include_str!("../../schema/report.schema.json");

#[derive(Debug, Parser)]
#[command(name = "qpost", version, about = "Quasi-Bayesian GMM inference under partial identification")]
pub struct Cli {
    /// TOML experiment config.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Replaces the config's seed list with this single seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset to data.csv.
    Generate(Source),
    /// Run the sampler and write draws.csv.
    Sample(Source),
    /// Write the limiting θ-density grid to limit_<variant>.csv.
    Limit {
        #[command(flatten)]
        source: Source,
        /// plugin or population.
        #[arg(long, default_value = "plugin")]
        variant: String,
    },
    /// Write an identification-region grid to region_<kind>.csv.
    Region {
        #[command(flatten)]
        source: Source,
        /// estimated or population.
        #[arg(long = "kind", default_value = "estimated")]
        kind: String,
    },
    /// Run the condition probes and write conditions.json.
    Conditions {
        #[command(flatten)]
        source: Source,
        /// Comma-separated condition ids; all seven by default.
        #[arg(long, value_delimiter = ',')]
        ids: Vec<u8>,
    },
    /// Compute limit, posterior and sampler distances and write compare.json.
    Compare {
        #[command(flatten)]
        source: Source,
        /// Also run the sampler and compare its histogram.
        #[arg(long)]
        mcmc: bool,
    },
    /// Run the full pipeline over every (n, seed) and write report.json.
    Report,
}

/// Where the model and data come from.
#[derive(Debug, Args)]
pub struct Source {
    /// Built-in bundle: rounded, endogenous, interval-reg, interval-quantile, moment-ineq.
    #[arg(long)]
    pub example: Option<String>,
    /// TOML affine moment-inequality spec.
    #[arg(long)]
    pub model_file: Option<PathBuf>,
    /// Sample size; defaults to the first entry of the config's n_list.
    #[arg(long)]
    pub n: Option<usize>,
    /// Dataset CSV replacing the generated data.
    #[arg(long)]
    pub data: Option<PathBuf>,
}

/// Output of `compare`.
#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub model: String,
    pub n: usize,
    pub seed: u64,
    pub plugin_vs_quadrature: Option<DistanceResult>,
    pub plugin_vs_population: Option<DistanceResult>,
    pub mcmc_vs_plugin: Option<DistanceResult>,
    pub mcmc_vs_quadrature: Option<DistanceResult>,
    pub skipped: Vec<String>,
}

/// Parses `args` (program name first) and runs the command.
pub fn run_from<I, S>(args: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::Config(e.to_string()))?;
    run(&cli)
}

/// Runs the binary with the process arguments and returns the exit code.
pub fn main_exit_code() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("qpost: {e}");
            e.exit_code()
        }
    }
}

struct Context {
    cfg: ExperimentConfig,
    out: PathBuf,
    quiet: bool,
}

impl Context {
    fn note(&self, path: &Path) {
        if !self.quiet {
            println!("{}", path.display());
        }
    }

    fn seed(&self) -> u64 {
        self.cfg.seeds[0]
    }

    /// Bundle for a single-cell subcommand, with `--data` swapped in.
    fn bundle(&self, source: &Source) -> Result<(ExampleBundle, usize)> {
        let n = source.n.unwrap_or(self.cfg.n_list[0]);
        let mut b = self.cfg.bundle(n, self.seed())?;
        if let Some(path) = &source.data {
            let data = Dataset::read_csv_path(path)?;
            if data.dim_w() != b.model.dim_w() {
                return Err(Error::input(format!(
                    "{} has {} columns, model expects {}",
                    path.display(),
                    data.dim_w(),
                    b.model.dim_w()
                )));
            }
            b.data = data;
        }
        let n = b.data.n();
        Ok((b, n))
    }
}

fn load_config(cli: &Cli, source: Option<&Source>) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::from_path(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = source {
        if let Some(e) = &s.example {
            cfg.example = Some(e.parse::<ExampleId>().map_err(|e| Error::Config(e.to_string()))?);
            cfg.model_file = None;
        }
        if let Some(m) = &s.model_file {
            cfg.model_file = Some(m.clone());
        }
    }
    if let Some(seed) = cli.seed {
        cfg.seeds = vec![seed];
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: &Cli) -> Result<()> {
    let source = match &cli.command {
        Command::Generate(s) | Command::Sample(s) => Some(s),
        Command::Limit { source, .. }
        | Command::Region { source, .. }
        | Command::Conditions { source, .. }
        | Command::Compare { source, .. } => Some(source),
        Command::Report => None,
    };
    let cfg = load_config(cli, source)?;
    let out = cli.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    let ctx = Context { cfg, out, quiet: cli.quiet };
    match &cli.command {
        Command::Generate(s) => {
            let (b, _) = ctx.bundle(s)?;
            let path = ctx.out.join("data.csv");
            write_with(&path, |w| b.data.write_csv(w))?;
            ctx.note(&path);
        }
        Command::Sample(s) => {
            let (b, _) = ctx.bundle(s)?;
            let chain = sample_chain(&b, &ctx.cfg.mcmc, ctx.seed())?;
            let path = ctx.out.join("draws.csv");
            write_with(&path, |w| chain.write_csv(w))?;
            ctx.note(&path);
        }
        Command::Limit { source, variant } => {
            let kind = LimitKind::parse(variant).map_err(|e| Error::Config(e.to_string()))?;
            let (b, _) = ctx.bundle(source)?;
            let (v, data) = match kind {
                LimitKind::Plugin => (LimitVariant::plugin(), Some(&b.data)),
                LimitKind::Population => (LimitVariant::population(), None),
            };
            let grid = limiting_theta_density(&b.model, &b.prior, &v, data, &ctx.cfg.grid)?;
            let name = match kind {
                LimitKind::Plugin => "limit_plugin.csv",
                LimitKind::Population => "limit_population.csv",
            };
            let path = ctx.out.join(name);
            write_with(&path, |w| grid.write_csv(w))?;
            ctx.note(&path);
        }
        Command::Region { source, kind } => {
            let (b, _) = ctx.bundle(source)?;
            let (grid, name) = match kind.as_str() {
                "estimated" => (estimate_region(&b.model, &b.data, &ctx.cfg.grid)?, "region_estimated.csv"),
                "population" => (population_region(&b.model, &ctx.cfg.grid)?, "region_population.csv"),
                other => {
                    return Err(Error::Config(format!("unknown region kind '{other}'; use estimated or population")))
                }
            };
            let path = ctx.out.join(name);
            write_with(&path, |w| grid.write_csv(w))?;
            ctx.note(&path);
        }
        Command::Conditions { source, ids } => {
            let ids: Vec<u8> = if ids.is_empty() { (1..=7).collect() } else { ids.clone() };
            let (b, _) = ctx.bundle(source)?;
            let reports = run_conditions(&b, &ctx.cfg, &ids, ctx.seed())?;
            let path = ctx.out.join("conditions.json");
            write_json(&path, &reports)?;
            ctx.note(&path);
        }
        Command::Compare { source, mcmc } => {
            let (b, n) = ctx.bundle(source)?;
            let r = compare(&ctx, &b, n, *mcmc)?;
            let path = ctx.out.join("compare.json");
            write_json(&path, &r)?;
            ctx.note(&path);
        }
        Command::Report => {
            run_experiment(&ctx.cfg, &ctx.out)?;
            ctx.note(&ctx.out.join("report.json"));
        }
    }
    Ok(())
}

fn write_with(path: &Path, f: impl FnOnce(&mut std::io::BufWriter<std::fs::File>) -> Result<()>) -> Result<()> {
    use std::io::Write;
    let mut w = create_file(path)?;
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

fn compare(ctx: &Context, b: &ExampleBundle, n: usize, mcmc: bool) -> Result<CompareReport> {
    let grid = &ctx.cfg.grid;
    let mut skipped = Vec::new();
    let plugin = limiting_theta_density(&b.model, &b.prior, &LimitVariant::plugin(), Some(&b.data), grid)?;
    let population = if b.model.has_population() {
        Some(limiting_theta_density(&b.model, &b.prior, &LimitVariant::population(), None, grid)?)
    } else {
        skipped.push("population limit: model has no population oracle".to_string());
        None
    };
    let quadrature = match exact_posterior_quadrature(&b.model, &b.data, &b.prior, &b.weight, grid) {
        Ok(q) => Some(q),
        Err(Error::Unsupported(m)) => {
            skipped.push(format!("quadrature posterior: {m}"));
            None
        }
        Err(e) => return Err(e),
    };
    let mut r = CompareReport {
        model: report::model_label(&ctx.cfg),
        n,
        seed: ctx.seed(),
        plugin_vs_quadrature: quadrature.as_ref().map(|q| l1_grid(&plugin, q)).transpose()?,
        plugin_vs_population: population.as_ref().map(|p| l1_grid(&plugin, p)).transpose()?,
        mcmc_vs_plugin: None,
        mcmc_vs_quadrature: None,
        skipped,
    };
    if mcmc {
        let chain = sample_chain(b, &ctx.cfg.mcmc, ctx.seed())?;
        let (bins, resamples) = (ctx.cfg.report.bins, ctx.cfg.report.bootstrap_resamples);
        r.mcmc_vs_plugin = Some(chain_distance(&chain, &plugin, bins, resamples, ctx.seed())?);
        if let Some(q) = &quadrature {
            r.mcmc_vs_quadrature = Some(chain_distance(&chain, q, bins, resamples, ctx.seed())?);
        }
    }
    Ok(r)
}
