use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_n, names, ExampleBundle, ExampleId, Link, Noise, Truth};
use crate::criterion::WeightSpec;
use crate::error::{Error, Result};
use crate::model::{Dataset, LambdaPrior, LambdaRegion, MomentModel, ParamBox, Prior, ThetaPrior};

/// `Y = g(X θ_true) + ε`, `ε = λ_true + (X − ½) + sqrt(11/12)·e`, `X ~ U[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EndogenousSettings {
    pub theta_true: f64,
    pub lambda_true: f64,
    pub link: Link,
    pub noise: Noise,
    pub theta_lower: f64,
    pub theta_upper: f64,
    /// Sd of the gaussian `p(λ|θ)` centred at 0.
    pub lambda_prior_sd: f64,
}

impl Default for EndogenousSettings {
    fn default() -> Self {
        Self {
            theta_true: 1.0,
            lambda_true: 0.5,
            link: Link::Exp,
            noise: Noise::Gaussian,
            theta_lower: -2.0,
            theta_upper: 3.0,
            lambda_prior_sd: 1.0,
        }
    }
}

/// Variance of the idiosyncratic part so that `var ε = 1`.
const IDIO_VAR: f64 = 11.0 / 12.0;

/// `E g(X θ)` for `X ~ U[0, 1]`, in closed form.
pub fn mean_link(link: Link, theta: f64) -> f64 {
    match link {
        Link::Exp => {
            if theta.abs() < 1e-8 {
                1.0 + 0.5 * theta
            } else {
                theta.exp_m1() / theta
            }
        }
        Link::Logistic => {
            if theta.abs() < 1e-4 {
                0.5 + theta / 8.0
            } else {
                let softplus = theta.max(0.0) + (-theta.abs()).exp().ln_1p();
                (softplus - std::f64::consts::LN_2) / theta
            }
        }
    }
}

pub fn make_endogenous_regression(n: usize, s: &EndogenousSettings, seed: u64) -> Result<ExampleBundle> {
    check_n(n)?;
    if !(s.lambda_prior_sd > 0.0) {
        return Err(Error::input("lambda prior sd must be positive"));
    }
    let theta_box = ParamBox::new(vec![s.theta_lower], vec![s.theta_upper])?;
    if !theta_box.contains(&[s.theta_true]) {
        return Err(Error::input("theta_true must lie inside the parameter box"));
    }
    let (link, noise, theta_true, lambda_true) = (s.link, s.noise, s.theta_true, s.lambda_true);
    let region = LambdaRegion::unconstrained(1)?;
    let ey = mean_link(link, theta_true) + lambda_true;
    let model = MomentModel::new(
        "endogenous",
        2,
        theta_box.clone(),
        region.clone(),
        Arc::new(move |w: &[f64], th: &[f64], out: &mut [f64]| out[0] = w[1] - link.eval(w[0] * th[0])),
    )?
    .with_population(Arc::new(move |th: &[f64], out: &mut [f64]| out[0] = ey - mean_link(link, th[0])));
    let prior = Prior::new(
        theta_box,
        region,
        ThetaPrior::Uniform,
        LambdaPrior::Gaussian { mean: vec![0.0], sd: vec![s.lambda_prior_sd] },
    )?;
    let idio_sd = IDIO_VAR.sqrt();
    let generator = Arc::new(move |n: usize, seed: u64| -> Result<Dataset<f64>> {
        check_n(n)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let x: f64 = rng.gen();
                let eps = lambda_true + (x - 0.5) + idio_sd * noise.sample(&mut rng);
                vec![x, link.eval(x * theta_true) + eps]
            })
            .collect();
        Dataset::from_rows(&rows, names(&["x", "y"]))
    });
    let data = generator(n, seed)?;
    Ok(ExampleBundle {
        id: ExampleId::Endogenous,
        model,
        prior,
        weight: WeightSpec::sample_covariance(0.0),
        generator,
        truth: Truth {
            theta_true: Some(vec![theta_true]),
            lambda_formula: format!("lambda(theta) = {ey:.12} - E g(X theta), X ~ U[0,1]"),
            region: "all of the parameter box (lambda unconstrained)".into(),
            oracle_method: "closed form".into(),
            oracle_draws: None,
            oracle_se: Some(0.0),
        },
        data,
        flat_lambda_bounds: ParamBox::new(vec![-50.0], vec![50.0])?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, QuadOptions};

    #[test]
    fn mean_link_matches_quadrature() {
        for link in [Link::Exp, Link::Logistic] {
            for th in [-2.0, -1e-6, 0.0, 3e-5, 0.7, 3.0] {
                let q = integrate(|x: f64| link.eval(x * th), 0.0, 1.0, &QuadOptions::default()).value;
                assert!((mean_link(link, th) - q).abs() < 1e-9, "{link:?} {th}");
            }
        }
    }

    #[test]
    fn truth_recovers_lambda_true() {
        let b = make_endogenous_regression(10, &EndogenousSettings::default(), 0).unwrap();
        assert!((b.model.population_moment(&[1.0]).unwrap()[0] - 0.5).abs() < 1e-12);
    }
}
