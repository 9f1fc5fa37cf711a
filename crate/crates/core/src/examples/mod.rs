//! Built-in example bundles: model, default prior, weight choice, seeded
//! data generator, population oracle and ground truth.

mod affine;
mod endogenous;
mod interval;
mod rounded;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::criterion::WeightSpec;
use crate::error::{Error, Result};
use crate::model::{DataGenerator, Dataset, LambdaPrior, MomentModel, ParamBox, Prior};
use crate::scalar::std_normal_cdf;

pub use affine::{make_moment_inequality, AffineSpec};
pub use endogenous::{make_endogenous_regression, EndogenousSettings};
pub use interval::{make_interval_quantile, make_interval_regression, IntervalSettings, QuantileSettings};
pub use rounded::{make_rounded_data, RoundedSettings};

/// Identifiers of the built-in bundles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExampleId {
    Rounded,
    Endogenous,
    IntervalReg,
    IntervalQuantile,
    MomentIneq,
}

impl ExampleId {
    pub const ALL: [ExampleId; 5] = [
        ExampleId::Rounded,
        ExampleId::Endogenous,
        ExampleId::IntervalReg,
        ExampleId::IntervalQuantile,
        ExampleId::MomentIneq,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExampleId::Rounded => "rounded",
            ExampleId::Endogenous => "endogenous",
            ExampleId::IntervalReg => "interval-reg",
            ExampleId::IntervalQuantile => "interval-quantile",
            ExampleId::MomentIneq => "moment-ineq",
        }
    }
}

impl fmt::Display for ExampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExampleId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| {
                Error::input(format!(
                    "unknown example '{s}'; expected one of rounded, endogenous, interval-reg, interval-quantile, moment-ineq"
                ))
            })
    }
}

/// Known link `g` in `g(X θ)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Link {
    #[default]
    Exp,
    Logistic,
}

impl Link {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "exp" => Ok(Link::Exp),
            "logistic" => Ok(Link::Logistic),
            other => Err(Error::input(format!("unknown link '{other}'; expected exp or logistic"))),
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Link::Exp => x.exp(),
            Link::Logistic => {
                if x >= 0.0 {
                    1.0 / (1.0 + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (1.0 + e)
                }
            }
        }
    }

    /// `g⁻¹(c)`, `None` outside the range of `g`.
    pub fn inverse(&self, c: f64) -> Option<f64> {
        match self {
            Link::Exp => (c > 0.0).then(|| c.ln()),
            Link::Logistic => (c > 0.0 && c < 1.0).then(|| (c / (1.0 - c)).ln()),
        }
    }
}

/// Mean-zero, unit-variance noise family.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Noise {
    #[default]
    Gaussian,
    /// `Exp(1) − 1`.
    CenteredExponential,
}

impl Noise {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Noise::Gaussian),
            "centered-exponential" => Ok(Noise::CenteredExponential),
            other => Err(Error::input(format!("unknown noise '{other}'; expected gaussian or centered-exponential"))),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Noise::Gaussian => rng.sample(StandardNormal),
            Noise::CenteredExponential => {
                let e: f64 = Exp1.sample(rng);
                e - 1.0
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Noise::Gaussian => std_normal_cdf(x),
            Noise::CenteredExponential => {
                if x <= -1.0 {
                    0.0
                } else {
                    -(-(x + 1.0)).exp_m1()
                }
            }
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        use statrs::distribution::{ContinuousCDF, Normal};
        match self {
            Noise::Gaussian => Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(p),
            Noise::CenteredExponential => -(-p).ln_1p() - 1.0,
        }
    }
}

/// Ground-truth record shipped with a bundle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Truth {
    pub theta_true: Option<Vec<f64>>,
    pub lambda_formula: String,
    pub region: String,
    /// How the population oracle is computed.
    pub oracle_method: String,
    pub oracle_draws: Option<usize>,
    pub oracle_se: Option<f64>,
}

/// A ready-to-use example: model, default prior, weight, generator and a
/// dataset drawn at the requested `(n, seed)`.
#[derive(Clone)]
pub struct ExampleBundle {
    pub id: ExampleId,
    pub model: MomentModel<f64>,
    pub prior: Prior<f64>,
    pub weight: WeightSpec,
    pub generator: DataGenerator<f64>,
    pub truth: Truth,
    pub data: Dataset<f64>,
    /// Bounds used whenever a flat `p(λ|θ)` is substituted for the default.
    pub flat_lambda_bounds: ParamBox<f64>,
}

impl fmt::Debug for ExampleBundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExampleBundle")
            .field("id", &self.id)
            .field("model", &self.model)
            .field("n", &self.data.n())
            .field("truth", &self.truth)
            .finish_non_exhaustive()
    }
}

impl ExampleBundle {
    pub fn generate(&self, n: usize, seed: u64) -> Result<Dataset<f64>> {
        (self.generator)(n, seed)
    }

    /// Same bundle with a fresh dataset.
    pub fn with_data(&self, n: usize, seed: u64) -> Result<Self> {
        let mut out = self.clone();
        out.data = self.generate(n, seed)?;
        Ok(out)
    }

    /// Default θ-prior combined with a flat `p(λ|θ)` on `flat_lambda_bounds`.
    pub fn flat_prior(&self) -> Result<Prior<f64>> {
        self.prior.with_lambda(LambdaPrior::Flat { bounds: Some(self.flat_lambda_bounds.clone()) })
    }
}

/// Default sample size for bundles built by id.
pub const DEFAULT_N: usize = 1000;

/// Builds a bundle with its default settings.
pub fn bundle(id: ExampleId, n: usize, seed: u64) -> Result<ExampleBundle> {
    match id {
        ExampleId::Rounded => make_rounded_data(n, &RoundedSettings::default(), seed),
        ExampleId::Endogenous => make_endogenous_regression(n, &EndogenousSettings::default(), seed),
        ExampleId::IntervalReg => make_interval_regression(n, &IntervalSettings::default(), seed),
        ExampleId::IntervalQuantile => make_interval_quantile(n, &QuantileSettings::default(), seed),
        ExampleId::MomentIneq => make_moment_inequality(&AffineSpec::canonical(), n, seed),
    }
}

pub(crate) fn names(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

pub(crate) fn check_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::input(format!("sample size must be at least 2, got {n}")));
    }
    Ok(())
}
