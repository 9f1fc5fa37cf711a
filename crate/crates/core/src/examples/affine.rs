use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_n, ExampleBundle, ExampleId, Noise, Truth};
use crate::criterion::WeightSpec;
use crate::error::{Error, Result};
use crate::model::{Dataset, LambdaPrior, LambdaRegion, MomentModel, ParamBox, Prior, ThetaPrior};

/// Affine moment inequalities `m(W, θ) = Aθ + b + S·W`, `Em(θ) ≥ 0`,
/// with independent `W_j ~ w_mean_j + w_sd_j·N(0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineSpec {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub s: Vec<Vec<f64>>,
    pub w_mean: Vec<f64>,
    pub w_sd: Vec<f64>,
    pub theta_lower: Vec<f64>,
    pub theta_upper: Vec<f64>,
    /// Upper edge of the flat `p(λ|θ)` on `[0, bound]^dim_m`.
    #[serde(default = "default_bound")]
    pub lambda_bound: f64,
    /// Attach the closed-form population oracle `λ(θ) = Aθ + b + S·E[W]`.
    #[serde(default = "default_true")]
    pub population_oracle: bool,
}

fn default_bound() -> f64 {
    20.0
}

fn default_true() -> bool {
    true
}

impl AffineSpec {
    /// `m(W, θ) = (θ − W, W + 1 − θ)` with `W ~ N(0.4, 1)`: region `[0.4, 1.4]`.
    pub fn canonical() -> Self {
        Self {
            a: vec![vec![1.0], vec![-1.0]],
            b: vec![0.0, 1.0],
            s: vec![vec![-1.0], vec![1.0]],
            w_mean: vec![0.4],
            w_sd: vec![1.0],
            theta_lower: vec![-5.0],
            theta_upper: vec![5.0],
            lambda_bound: 20.0,
            population_oracle: true,
        }
    }

    pub fn dim_m(&self) -> usize {
        self.b.len()
    }

    pub fn dim_theta(&self) -> usize {
        self.theta_lower.len()
    }

    pub fn dim_w(&self) -> usize {
        self.w_mean.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (m, d, k) = (self.dim_m(), self.dim_theta(), self.dim_w());
        if m == 0 || d == 0 || k == 0 {
            return Err(Error::input("affine spec needs nonempty b, theta bounds and w_mean"));
        }
        if self.a.len() != m || self.a.iter().any(|r| r.len() != d) {
            return Err(Error::input(format!("affine spec: A must be {m} x {d}")));
        }
        if self.s.len() != m || self.s.iter().any(|r| r.len() != k) {
            return Err(Error::input(format!("affine spec: S must be {m} x {k}")));
        }
        if self.w_sd.len() != k || self.w_sd.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::input(format!("affine spec: w_sd needs {k} positive entries")));
        }
        if !(self.lambda_bound > 0.0) {
            return Err(Error::input("affine spec: lambda_bound must be positive"));
        }
        let all = self.a.iter().flatten().chain(&self.b).chain(self.s.iter().flatten()).chain(&self.w_mean);
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::input("affine spec: coefficients must be finite"));
        }
        Ok(())
    }

    /// Builds the model, attaching the oracle when requested.
    pub fn model(&self) -> Result<MomentModel<f64>> {
        self.validate()?;
        let theta_box = ParamBox::new(self.theta_lower.clone(), self.theta_upper.clone())?;
        let (a, b, s) = (self.a.clone(), self.b.clone(), self.s.clone());
        let eval = move |w: &[f64], th: &[f64], out: &mut [f64]| {
            for i in 0..b.len() {
                let lin: f64 = a[i].iter().zip(th).map(|(c, t)| c * t).sum();
                let noise: f64 = s[i].iter().zip(w).map(|(c, x)| c * x).sum();
                out[i] = lin + b[i] + noise;
            }
        };
        let model = MomentModel::new(
            "moment-ineq",
            self.dim_w(),
            theta_box,
            LambdaRegion::nonneg_orthant(self.dim_m())?,
            Arc::new(eval.clone()),
        )?;
        if !self.population_oracle {
            return Ok(model);
        }
        let w_mean = self.w_mean.clone();
        Ok(model.with_population(Arc::new(move |th: &[f64], out: &mut [f64]| eval(&w_mean, th, out))))
    }

    pub fn generator(&self) -> impl Fn(usize, u64) -> Result<Dataset<f64>> + Send + Sync {
        let (mean, sd) = (self.w_mean.clone(), self.w_sd.clone());
        let names: Vec<String> = (1..=mean.len()).map(|j| format!("w_{j}")).collect();
        move |n: usize, seed: u64| {
            check_n(n)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| mean.iter().zip(&sd).map(|(m, s)| m + s * Noise::Gaussian.sample(&mut rng)).collect())
                .collect();
            Dataset::from_rows(&rows, names.clone())
        }
    }
}

pub fn make_moment_inequality(spec: &AffineSpec, n: usize, seed: u64) -> Result<ExampleBundle> {
    check_n(n)?;
    let model = spec.model()?;
    let bounds = ParamBox::cube(spec.dim_m(), 0.0, spec.lambda_bound)?;
    let prior = Prior::new(
        model.theta_box().clone(),
        model.lambda_region().clone(),
        ThetaPrior::Uniform,
        LambdaPrior::Flat { bounds: Some(bounds.clone()) },
    )?;
    let generator = Arc::new(spec.generator());
    let data = generator(n, seed)?;
    Ok(ExampleBundle {
        id: ExampleId::MomentIneq,
        model,
        prior,
        weight: WeightSpec::identity(),
        generator,
        truth: Truth {
            theta_true: None,
            lambda_formula: "lambda(theta) = A theta + b + S E[W]".into(),
            region: "{theta : A theta + b + S E[W] >= 0}".into(),
            oracle_method: "closed form".into(),
            oracle_draws: None,
            oracle_se: Some(0.0),
        },
        data,
        flat_lambda_bounds: bounds,
    })
}
