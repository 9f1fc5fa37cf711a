use std::sync::Arc;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{check_n, names, ExampleBundle, ExampleId, Truth};
use crate::criterion::WeightSpec;
use crate::error::{Error, Result};
use crate::model::{Dataset, LambdaPrior, LambdaRegion, MomentModel, ParamBox, Prior, ThetaPrior};
use crate::scalar::std_normal_mass;

/// Latent `Y ~ N(y_mean, y_sd²)`, observed `W = ⌊Y⌋`.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundedSettings {
    pub y_mean: f64,
    pub y_sd: f64,
    pub theta_lower: f64,
    pub theta_upper: f64,
}

impl Default for RoundedSettings {
    fn default() -> Self {
        Self { y_mean: 0.0, y_sd: 1.0, theta_lower: -5.0, theta_upper: 5.0 }
    }
}

/// `E⌊Y⌋` by summing `k·P(k ≤ Y < k+1)` over all cells within 40 sd.
pub fn expected_floor(y_mean: f64, y_sd: f64) -> f64 {
    let lo = (y_mean - 40.0 * y_sd).floor() as i64;
    let hi = (y_mean + 40.0 * y_sd).ceil() as i64;
    (lo..=hi)
        .map(|k| {
            let a = (k as f64 - y_mean) / y_sd;
            let b = (k as f64 + 1.0 - y_mean) / y_sd;
            k as f64 * std_normal_mass(a, b)
        })
        .sum()
}

pub fn make_rounded_data(n: usize, settings: &RoundedSettings, seed: u64) -> Result<ExampleBundle> {
    check_n(n)?;
    let RoundedSettings { y_mean, y_sd, theta_lower, theta_upper } = settings.clone();
    if !(y_sd > 0.0 && y_sd.is_finite()) || !y_mean.is_finite() {
        return Err(Error::input(format!("rounded data needs finite mean and sd > 0, got sd {y_sd}")));
    }
    let ew = expected_floor(y_mean, y_sd);
    let theta_box = ParamBox::new(vec![theta_lower], vec![theta_upper])?;
    let unit = ParamBox::new(vec![0.0], vec![1.0])?;
    let model = MomentModel::new(
        "rounded",
        1,
        theta_box.clone(),
        LambdaRegion::boxed(unit.clone()),
        Arc::new(|w: &[f64], th: &[f64], out: &mut [f64]| out[0] = th[0] - w[0]),
    )?
    .with_population(Arc::new(move |th: &[f64], out: &mut [f64]| out[0] = th[0] - ew));
    let prior = Prior::new(
        theta_box,
        LambdaRegion::boxed(unit.clone()),
        ThetaPrior::Uniform,
        LambdaPrior::Flat { bounds: None },
    )?;
    let generator = Arc::new(move |n: usize, seed: u64| -> Result<Dataset<f64>> {
        check_n(n)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = Normal::new(y_mean, y_sd).map_err(|e| Error::input(e.to_string()))?;
        let w: Vec<f64> = (0..n).map(|_| dist.sample(&mut rng).floor()).collect();
        let rows = Array2::from_shape_vec((n, 1), w).map_err(|e| Error::input(e.to_string()))?;
        Dataset::new(rows, names(&["w"]))
    });
    let data = generator(n, seed)?;
    Ok(ExampleBundle {
        id: ExampleId::Rounded,
        model,
        prior,
        weight: WeightSpec::sample_covariance(0.0),
        generator,
        truth: Truth {
            theta_true: Some(vec![y_mean]),
            lambda_formula: format!("lambda(theta) = theta - E[W], E[W] = {ew:.12}"),
            region: format!("[{ew:.6}, {:.6}]", ew + 1.0),
            oracle_method: "exact series over integer cells".into(),
            oracle_draws: None,
            oracle_se: Some(0.0),
        },
        data,
        flat_lambda_bounds: unit,
    })
}
