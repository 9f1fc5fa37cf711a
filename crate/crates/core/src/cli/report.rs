use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::diagnostics::{
    check_condition, exact_posterior_quadrature, l1_grid, l1_samples_vs_grid, BootstrapOptions, ConditionInputs,
    ConditionReport, DistanceResult,
};
use crate::error::{Error, Result};
use crate::examples::ExampleBundle;
use crate::limit::{limiting_theta_density, DensityGrid, LimitVariant};
use crate::region::{boundary_mass_curve, estimate_region, population_region, region_symmetric_difference};
use crate::sampler::{run_chain, Chain, McmcConfig};

pub const SCHEMA_VERSION: u32 = 1;

/// Stage durations in seconds, keyed by stage name.
pub type Timings = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub model: String,
    pub n_list: Vec<usize>,
    pub seeds: Vec<u64>,
    pub grid_nodes: Vec<usize>,
    pub delta_list: Vec<f64>,
    pub cells: Vec<CellReport>,
    pub timings: Timings,
}

/// Everything measured at one `(n, seed)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub n: usize,
    pub seed: u64,
    /// The estimated region holds no grid node; plug-in quantities are absent.
    pub empty_region: bool,
    pub distances: CellDistances,
    pub region: RegionSummary,
    pub boundary_mass: Vec<BoundaryPoint>,
    pub chain: Option<ChainSummary>,
    pub conditions: Vec<ConditionReport>,
    /// Stages left out, with the reason.
    pub skipped: Vec<String>,
    /// Output files relative to the output directory.
    pub files: BTreeMap<String, String>,
    pub timings: Timings,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CellDistances {
    pub plugin_vs_quadrature: Option<DistanceResult>,
    pub plugin_vs_population: Option<DistanceResult>,
    pub mcmc_vs_plugin: Option<DistanceResult>,
    pub mcmc_vs_quadrature: Option<DistanceResult>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RegionSummary {
    pub estimated_nodes: usize,
    pub population_nodes: Option<usize>,
    pub symmetric_difference: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub delta: f64,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub draws: usize,
    pub acceptance_rate: f64,
    pub burn_in_acceptance_rate: f64,
    pub min_theta_ess: f64,
    /// Bootstrap block length used for the sample-grid distances.
    pub block_len: usize,
}

/// Creates `dir` (and parents) or fails with a config error.
pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::Config(format!("cannot create output directory {}: {e}", dir.display())))
}

/// Opens `path` for writing, creating parent directories.
pub fn create_file(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    let f = File::create(path).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
    Ok(BufWriter::new(f))
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut w = create_file(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// Runs one chain with the configured settings and `seed`.
pub fn sample_chain(b: &ExampleBundle, mcmc: &McmcConfig, seed: u64) -> Result<Chain<f64>> {
    run_chain(&b.model, &b.data, &b.prior, &b.weight, &McmcConfig { seed, ..mcmc.clone() })
}

/// `⌈draws / min θ-ESS⌉`, the block length matching the chain's autocorrelation.
pub fn chain_block_len(chain: &Chain<f64>) -> usize {
    let ess = chain.ess[chain.dim_lambda..].iter().cloned().fold(f64::INFINITY, f64::min);
    if !(ess.is_finite() && ess > 0.0) {
        return 1;
    }
    ((chain.len() as f64 / ess).ceil() as usize).clamp(1, chain.len().max(1))
}

/// Sample-grid L1 of the chain's θ-draws against `grid`.
pub fn chain_distance(
    chain: &Chain<f64>,
    grid: &DensityGrid<f64>,
    bins: Option<usize>,
    resamples: usize,
    seed: u64,
) -> Result<DistanceResult> {
    let opts = BootstrapOptions { resamples, block_len: chain_block_len(chain), seed };
    l1_samples_vs_grid(&chain.theta_draws(), grid, bins, &opts)
}

/// Runs conditions `ids` on the bundle's data and generator.
pub fn run_conditions(
    b: &ExampleBundle,
    cfg: &ExperimentConfig,
    ids: &[u8],
    seed: u64,
) -> Result<Vec<ConditionReport>> {
    let inputs = ConditionInputs {
        model: &b.model,
        prior: &b.prior,
        weight: &b.weight,
        data: Some(&b.data),
        generator: Some(&b.generator),
    };
    let settings = crate::diagnostics::ConditionSettings { seed, ..cfg.conditions.clone() };
    ids.iter().map(|&id| check_condition(id, &inputs, &settings)).collect()
}

fn is_empty_region(e: &Error) -> bool {
    matches!(e, Error::EmptyRegion { .. })
}

/// Clock for the per-stage timing record.
struct Stopwatch {
    timings: Timings,
    start: Instant,
}

impl Stopwatch {
    fn new() -> Self {
        Self { timings: Timings::new(), start: Instant::now() }
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.timings.insert(stage.to_string(), (now - self.start).as_secs_f64());
        self.start = now;
    }
}

fn run_cell(cfg: &ExperimentConfig, n: usize, seed: u64, out: &Path) -> Result<CellReport> {
    let mut clock = Stopwatch::new();
    let b = cfg.bundle(n, seed)?;
    let dir = format!("n{n}_seed{seed}");
    let mut files = BTreeMap::new();
    let mut save = |key: &str, name: &str, write: &dyn Fn(&mut BufWriter<File>) -> Result<()>| -> Result<()> {
        let rel = format!("{dir}/{name}");
        let mut w = create_file(&out.join(&rel))?;
        write(&mut w)?;
        w.flush()?;
        files.insert(key.to_string(), rel);
        Ok(())
    };
    save("data", "data.csv", &|w| b.data.write_csv(w))?;
    clock.lap("generate");

    let mut skipped = Vec::new();
    let mut distances = CellDistances::default();
    let has_oracle = b.model.has_population();
    if !has_oracle {
        skipped.push("population quantities: model has no population oracle".to_string());
    }

    let (plugin, empty_region) =
        match limiting_theta_density(&b.model, &b.prior, &LimitVariant::plugin(), Some(&b.data), &cfg.grid) {
            Ok(g) => (Some(g), false),
            Err(e) if is_empty_region(&e) => (None, true),
            Err(e) => return Err(e),
        };
    if let Some(g) = &plugin {
        save("limit_plugin", "limit_plugin.csv", &|w| g.write_csv(w))?;
    }
    let population = if has_oracle {
        match limiting_theta_density(&b.model, &b.prior, &LimitVariant::population(), None, &cfg.grid) {
            Ok(g) => Some(g),
            Err(e) if is_empty_region(&e) => {
                skipped.push("population limit: population region is empty on the grid".to_string());
                None
            }
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    if let Some(g) = &population {
        save("limit_population", "limit_population.csv", &|w| g.write_csv(w))?;
    }
    if let (Some(p), Some(q)) = (&plugin, &population) {
        distances.plugin_vs_population = Some(l1_grid(p, q)?);
    }
    clock.lap("limit");

    let quadrature = if cfg.report.quadrature {
        match exact_posterior_quadrature(&b.model, &b.data, &b.prior, &b.weight, &cfg.grid) {
            Ok(g) => Some(g),
            Err(Error::Unsupported(m)) => {
                skipped.push(format!("quadrature posterior: {m}"));
                None
            }
            Err(e) if is_empty_region(&e) => {
                skipped.push(format!("quadrature posterior: {e}"));
                None
            }
            Err(e) => return Err(e),
        }
    } else {
        skipped.push("quadrature posterior: disabled by report.quadrature".to_string());
        None
    };
    if let Some(q) = &quadrature {
        save("posterior_quadrature", "posterior_quadrature.csv", &|w| q.write_csv(w))?;
        if let Some(p) = &plugin {
            distances.plugin_vs_quadrature = Some(l1_grid(p, q)?);
        }
    }
    clock.lap("quadrature");

    let estimated = estimate_region(&b.model, &b.data, &cfg.grid)?;
    save("region_estimated", "region_estimated.csv", &|w| estimated.write_csv(w))?;
    let mut region = RegionSummary { estimated_nodes: estimated.count(), ..Default::default() };
    let mut boundary_mass = Vec::new();
    if has_oracle {
        let pop = population_region(&b.model, &cfg.grid)?;
        save("region_population", "region_population.csv", &|w| pop.write_csv(w))?;
        region.population_nodes = Some(pop.count());
        region.symmetric_difference = Some(region_symmetric_difference(&estimated, &pop)?);
        let masses = boundary_mass_curve(&b.model, &b.prior, &cfg.delta_list, &cfg.grid)?;
        boundary_mass = cfg.delta_list.iter().zip(masses).map(|(&delta, mass)| BoundaryPoint { delta, mass }).collect();
    }
    clock.lap("region");

    let mut chain_summary = None;
    if cfg.report.mcmc {
        let chain = sample_chain(&b, &cfg.mcmc, seed)?;
        save("draws", "draws.csv", &|w| chain.write_csv(w))?;
        let resamples = cfg.report.bootstrap_resamples;
        if let Some(p) = &plugin {
            distances.mcmc_vs_plugin = Some(chain_distance(&chain, p, cfg.report.bins, resamples, seed)?);
        }
        if let Some(q) = &quadrature {
            distances.mcmc_vs_quadrature = Some(chain_distance(&chain, q, cfg.report.bins, resamples, seed)?);
        }
        chain_summary = Some(ChainSummary {
            draws: chain.len(),
            acceptance_rate: chain.acceptance_rate,
            burn_in_acceptance_rate: chain.burn_in_acceptance_rate,
            min_theta_ess: chain.ess[chain.dim_lambda..].iter().cloned().fold(f64::INFINITY, f64::min),
            block_len: chain_block_len(&chain),
        });
    } else {
        skipped.push("mcmc: disabled by report.mcmc".to_string());
    }
    clock.lap("mcmc");

    let mut conditions = Vec::new();
    if cfg.report.conditions {
        for id in 1..=7 {
            match run_conditions(&b, cfg, &[id], seed) {
                Ok(mut r) => conditions.append(&mut r),
                Err(Error::Unsupported(m)) => skipped.push(format!("condition {id}: {m}")),
                Err(e) => return Err(e),
            }
        }
    } else {
        skipped.push("conditions: disabled by report.conditions".to_string());
    }
    clock.lap("conditions");

    Ok(CellReport {
        n,
        seed,
        empty_region,
        distances,
        region,
        boundary_mass,
        chain: chain_summary,
        conditions,
        skipped,
        files,
        timings: clock.timings,
    })
}

/// Runs every `(n, seed)` cell of `cfg`, writes per-cell CSVs under
/// `out/n{n}_seed{seed}/` and `out/report.json`, and returns the report.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentReport> {
    cfg.validate()?;
    ensure_dir(out)?;
    let start = Instant::now();
    let cells: Vec<(usize, u64)> = cfg.n_list.iter().flat_map(|&n| cfg.seeds.iter().map(move |&s| (n, s))).collect();
    let reports = cells.par_iter().map(|&(n, seed)| run_cell(cfg, n, seed, out)).collect::<Result<Vec<_>>>()?;
    let probe = cfg.bundle(cfg.n_list[0], cfg.seeds[0])?;
    let grid_nodes = cfg.grid.resolve(probe.model.dim_theta())?;
    let mut timings = Timings::new();
    timings.insert("total".to_string(), start.elapsed().as_secs_f64());
    let report = ExperimentReport {
        schema_version: SCHEMA_VERSION,
        model: model_label(cfg),
        n_list: cfg.n_list.clone(),
        seeds: cfg.seeds.clone(),
        grid_nodes,
        delta_list: cfg.delta_list.clone(),
        cells: reports,
        timings,
    };
    write_json(&out.join("report.json"), &report)?;
    Ok(report)
}

pub fn model_label(cfg: &ExperimentConfig) -> String {
    match (&cfg.model_file, cfg.example) {
        (Some(p), _) => format!("file:{}", p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()),
        (None, Some(id)) => id.to_string(),
        (None, None) => String::new(),
    }
}
