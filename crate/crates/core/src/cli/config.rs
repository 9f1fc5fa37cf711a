use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::criterion::WeightSpec;
use crate::diagnostics::ConditionSettings;
use crate::error::{Error, Result};
use crate::examples::{bundle, make_moment_inequality, AffineSpec, ExampleBundle, ExampleId, DEFAULT_N};
use crate::grid::GridSpec;
use crate::model::{LambdaPrior, ThetaPrior};
use crate::sampler::McmcConfig;

/// Experiment description read from a TOML file with dotted keys, e.g.
/// `mcmc.burn_in = 50000` or `grid.nodes_per_axis = [513]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Built-in bundle id. Ignored when `model_file` is set.
    pub example: Option<ExampleId>,
    /// TOML file holding an affine moment-inequality spec.
    pub model_file: Option<PathBuf>,
    pub n_list: Vec<usize>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub delta_list: Vec<f64>,
    pub grid: GridSpec,
    pub prior: PriorConfig,
    /// Replaces the bundle's weight when present.
    pub weight: Option<WeightSpec>,
    pub mcmc: McmcConfig,
    pub conditions: ConditionSettings,
    pub report: ReportOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            example: None,
            model_file: None,
            n_list: vec![DEFAULT_N],
            seeds: vec![0],
            output_dir: PathBuf::from("qpost-out"),
            delta_list: (0..=6).map(|k| 0.1 * 0.5f64.powi(k)).collect(),
            grid: GridSpec::default(),
            prior: PriorConfig::default(),
            weight: None,
            mcmc: McmcConfig::default(),
            conditions: ConditionSettings::default(),
            report: ReportOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThetaPriorKind {
    #[default]
    Default,
    Uniform,
    TruncatedGaussian,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaPriorKind {
    #[default]
    Default,
    /// Flat on the bundle's flat-λ bounds.
    Flat,
    Gaussian,
}

/// Overrides of the bundle's default prior.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorConfig {
    pub theta: ThetaPriorKind,
    pub theta_mean: Option<Vec<f64>>,
    pub theta_sd: Option<Vec<f64>>,
    pub lambda: LambdaPriorKind,
    pub lambda_mean: Option<Vec<f64>>,
    pub lambda_sd: Option<Vec<f64>>,
}

/// Stages of the `report` pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportOptions {
    pub mcmc: bool,
    pub quadrature: bool,
    pub conditions: bool,
    /// Histogram cells for MCMC comparisons; `None` picks from the draw count.
    pub bins: Option<usize>,
    pub bootstrap_resamples: usize,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self { mcmc: true, quadrature: true, conditions: true, bins: None, bootstrap_resamples: 200 }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config file. A relative `model_file` is taken
    /// relative to the config's directory.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let (Some(m), Some(dir)) = (&cfg.model_file, path.parent()) {
            if m.is_relative() {
                cfg.model_file = Some(dir.join(m));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_list.is_empty() {
            return Err(Error::Config("n_list must not be empty".into()));
        }
        if self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("n_list must be strictly ascending".into()));
        }
        if self.n_list[0] < 2 {
            return Err(Error::Config("sample sizes must be at least 2".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        if self.delta_list.is_empty() || self.delta_list.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return Err(Error::Config("delta_list must hold positive finite values".into()));
        }
        if self.report.bootstrap_resamples < 2 {
            return Err(Error::Config("report.bootstrap_resamples must be at least 2".into()));
        }
        if self.example.is_none() && self.model_file.is_none() {
            return Err(Error::Config("set either example or model_file".into()));
        }
        if let Some(w) = &self.weight {
            w.validate().map_err(as_config)?;
        }
        self.mcmc.validate().map_err(as_config)?;
        self.conditions.validate()?;
        Ok(())
    }

    /// Bundle for `(n, seed)` with the configured prior and weight applied.
    pub fn bundle(&self, n: usize, seed: u64) -> Result<ExampleBundle> {
        let mut b = match (&self.model_file, self.example) {
            (Some(path), _) => make_moment_inequality(&read_affine_spec(path)?, n, seed)?,
            (None, Some(id)) => bundle(id, n, seed)?,
            (None, None) => return Err(Error::Config("set either example or model_file".into())),
        };
        if let Some(w) = self.weight {
            b.weight = w;
        }
        b.prior = self.apply_prior(&b)?;
        Ok(b)
    }

    fn apply_prior(&self, b: &ExampleBundle) -> Result<crate::model::Prior<f64>> {
        let p = &self.prior;
        let mut prior = b.prior.clone();
        match p.theta {
            ThetaPriorKind::Default => {}
            ThetaPriorKind::Uniform => prior = prior.with_theta(ThetaPrior::Uniform)?,
            ThetaPriorKind::TruncatedGaussian => {
                let (mean, sd) = both(&p.theta_mean, &p.theta_sd, "prior.theta_mean and prior.theta_sd")?;
                prior = prior.with_theta(ThetaPrior::TruncatedGaussian { mean, sd })?;
            }
        }
        match p.lambda {
            LambdaPriorKind::Default => {}
            LambdaPriorKind::Flat => {
                prior = prior.with_lambda(LambdaPrior::Flat { bounds: Some(b.flat_lambda_bounds.clone()) })?
            }
            LambdaPriorKind::Gaussian => {
                let (mean, sd) = both(&p.lambda_mean, &p.lambda_sd, "prior.lambda_mean and prior.lambda_sd")?;
                prior = prior.with_lambda(LambdaPrior::Gaussian { mean, sd })?;
            }
        }
        Ok(prior)
    }
}

fn both(a: &Option<Vec<f64>>, b: &Option<Vec<f64>>, what: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    match (a, b) {
        (Some(a), Some(b)) => Ok((a.clone(), b.clone())),
        _ => Err(Error::Config(format!("{what} are required for this prior"))),
    }
}

fn as_config(e: Error) -> Error {
    match e {
        Error::Input(m) => Error::Config(m),
        other => other,
    }
}

/// Reads an affine moment-inequality spec from TOML.
pub fn read_affine_spec(path: &Path) -> Result<AffineSpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read model file {}: {e}", path.display())))?;
    let spec: AffineSpec = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    spec.validate().map_err(as_config)?;
    Ok(spec)
}
