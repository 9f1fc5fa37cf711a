use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_n, names, ExampleBundle, ExampleId, Link, Noise, Truth};
use crate::criterion::WeightSpec;
use crate::error::{Error, Result};
use crate::model::{Dataset, LambdaPrior, LambdaRegion, MomentModel, ParamBox, Prior, ThetaPrior};
use crate::quadrature::{integrate, QuadOptions};

/// Regressor support `X ~ U[0, X_MAX]`; the instrument is `Z = X + Z_SHIFT`.
const X_MAX: f64 = 2.0;
const Z_SHIFT: f64 = 0.1;
const E_Z: f64 = 0.5 * X_MAX + Z_SHIFT;

/// Interval regression: `E(Y − g(Xθ) | Z) = 0`, only `[L, U)` observed.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalSettings {
    pub theta_true: f64,
    pub link: Link,
    pub censor_width: f64,
    pub noise: Noise,
    pub theta_lower: f64,
    pub theta_upper: f64,
}

impl Default for IntervalSettings {
    fn default() -> Self {
        Self {
            theta_true: 0.5,
            link: Link::Exp,
            censor_width: 1.0,
            noise: Noise::Gaussian,
            theta_lower: -1.0,
            theta_upper: 2.0,
        }
    }
}

/// Interval quantile regression: the q-quantile of `Y | X` is `g(Xθ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileSettings {
    pub q: f64,
    pub theta_true: f64,
    pub link: Link,
    pub censor_width: f64,
    pub noise: Noise,
    pub theta_lower: f64,
    pub theta_upper: f64,
}

impl Default for QuantileSettings {
    fn default() -> Self {
        Self {
            q: 0.5,
            theta_true: 0.5,
            link: Link::Exp,
            censor_width: 1.0,
            noise: Noise::Gaussian,
            theta_lower: -1.0,
            theta_upper: 2.0,
        }
    }
}

/// Shared censoring design: `Y = g(Xθ_true) + shift + e`, `L = w⌊Y/w⌋`, `U = L + w`.
#[derive(Debug, Clone, Copy)]
struct Design {
    theta_true: f64,
    link: Link,
    width: f64,
    noise: Noise,
    shift: f64,
}

impl Design {
    fn mu(&self, x: f64) -> f64 {
        self.link.eval(x * self.theta_true) + self.shift
    }

    fn generator(self) -> impl Fn(usize, u64) -> Result<Dataset<f64>> + Send + Sync {
        move |n: usize, seed: u64| {
            check_n(n)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| {
                    let x = X_MAX * rng.gen::<f64>();
                    let y = self.mu(x) + self.noise.sample(&mut rng);
                    let l = (y / self.width).floor() * self.width;
                    vec![x, l, l + self.width, x + Z_SHIFT]
                })
                .collect();
            Dataset::from_rows(&rows, names(&["x", "l", "u", "z"]))
        }
    }

    /// `P(Y < t | X = x)`.
    fn below(&self, t: f64, x: f64) -> f64 {
        self.noise.cdf(t - self.mu(x))
    }

    /// `E[L | X = x]`, summing over censoring cells within 40 noise units.
    fn mean_lower(&self, x: f64) -> f64 {
        let mu = self.mu(x);
        let w = self.width;
        let lo = ((mu - 40.0) / w).floor() as i64;
        let hi = ((mu + 40.0) / w).ceil() as i64;
        (lo..=hi)
            .map(|k| {
                let a = k as f64 * w;
                k as f64 * w * (self.noise.cdf(a + w - mu) - self.noise.cdf(a - mu))
            })
            .sum()
    }

    /// Points in `(0, X_MAX)` where `g(xθ)` crosses a multiple of the width.
    fn breakpoints(&self, theta: f64) -> Vec<f64> {
        let mut xs = vec![0.0, X_MAX];
        if theta != 0.0 {
            let c0 = self.link.eval(0.0);
            let c1 = self.link.eval(X_MAX * theta);
            let (cmin, cmax) = (c0.min(c1), c0.max(c1));
            let kmin = (cmin / self.width).ceil() as i64;
            let kmax = (cmax / self.width).floor() as i64;
            for k in kmin..=kmax {
                if let Some(u) = self.link.inverse(k as f64 * self.width) {
                    let x = u / theta;
                    if x > 0.0 && x < X_MAX {
                        xs.push(x);
                    }
                }
            }
        }
        xs.sort_by(|a, b| a.total_cmp(b));
        xs.dedup();
        xs
    }
}

fn quad(f: impl FnMut(f64) -> f64, a: f64, b: f64) -> f64 {
    let opts = QuadOptions { abs_tol: 1e-12, rel_tol: 1e-11, max_intervals: 200 };
    integrate(f, a, b, &opts).value
}

/// `E[h(X) Z]` with `X ~ U[0, X_MAX]`.
fn expect_z(mut h: impl FnMut(f64) -> f64, breaks: &[f64]) -> f64 {
    breaks.windows(2).map(|p| quad(|x| h(x) * (x + Z_SHIFT) / X_MAX, p[0], p[1])).sum()
}

fn validate(link_theta: f64, width: f64, lo: f64, hi: f64) -> Result<ParamBox<f64>> {
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::input(format!("censor width must be positive, got {width}")));
    }
    let b = ParamBox::new(vec![lo], vec![hi])?;
    if !b.contains(&[link_theta]) {
        return Err(Error::input("theta_true must lie inside the parameter box"));
    }
    Ok(b)
}

fn flat_prior(theta_box: &ParamBox<f64>) -> Result<(Prior<f64>, ParamBox<f64>)> {
    let bounds = ParamBox::cube(2, 0.0, 10.0)?;
    let prior = Prior::new(
        theta_box.clone(),
        LambdaRegion::ordered_cone(),
        ThetaPrior::Uniform,
        LambdaPrior::Flat { bounds: Some(bounds.clone()) },
    )?;
    Ok((prior, bounds))
}

pub fn make_interval_regression(n: usize, s: &IntervalSettings, seed: u64) -> Result<ExampleBundle> {
    check_n(n)?;
    let theta_box = validate(s.theta_true, s.censor_width, s.theta_lower, s.theta_upper)?;
    let design = Design { theta_true: s.theta_true, link: s.link, width: s.censor_width, noise: s.noise, shift: 0.0 };
    let link = s.link;
    let e_lz = expect_z(|x| design.mean_lower(x), &[0.0, X_MAX]);
    let lambda_2 = s.censor_width * E_Z;
    let model = MomentModel::new(
        "interval-reg",
        4,
        theta_box.clone(),
        LambdaRegion::ordered_cone(),
        Arc::new(move |w: &[f64], th: &[f64], out: &mut [f64]| {
            out[0] = (link.eval(w[0] * th[0]) - w[1]) * w[3];
            out[1] = (w[2] - w[1]) * w[3];
        }),
    )?
    .with_population(Arc::new(move |th: &[f64], out: &mut [f64]| {
        out[0] = expect_z(|x| link.eval(x * th[0]), &[0.0, X_MAX]) - e_lz;
        out[1] = lambda_2;
    }));
    let (prior, bounds) = flat_prior(&theta_box)?;
    let generator = Arc::new(design.generator());
    let data = generator(n, seed)?;
    Ok(ExampleBundle {
        id: ExampleId::IntervalReg,
        model,
        prior,
        weight: WeightSpec::sample_covariance(0.0),
        generator,
        truth: Truth {
            theta_true: Some(vec![s.theta_true]),
            lambda_formula: format!(
                "lambda(theta) = (E[g(X theta) Z] - {e_lz:.12}, {lambda_2:.12}), X ~ U[0,2], Z = X + 0.1"
            ),
            region: "{theta : 0 <= lambda_1(theta) <= lambda_2}".into(),
            oracle_method: "adaptive quadrature over X of exact censoring-cell sums".into(),
            oracle_draws: None,
            oracle_se: Some(0.0),
        },
        data,
        flat_lambda_bounds: bounds,
    })
}

pub fn make_interval_quantile(n: usize, s: &QuantileSettings, seed: u64) -> Result<ExampleBundle> {
    check_n(n)?;
    if !(s.q > 0.0 && s.q < 1.0) {
        return Err(Error::input(format!("quantile level must lie in (0, 1), got {}", s.q)));
    }
    let theta_box = validate(s.theta_true, s.censor_width, s.theta_lower, s.theta_upper)?;
    let design = Design {
        theta_true: s.theta_true,
        link: s.link,
        width: s.censor_width,
        noise: s.noise,
        shift: -s.noise.quantile(s.q),
    };
    let (link, q, w) = (s.link, s.q, s.censor_width);
    let model = MomentModel::new(
        "interval-quantile",
        4,
        theta_box.clone(),
        LambdaRegion::ordered_cone(),
        Arc::new(move |row: &[f64], th: &[f64], out: &mut [f64]| {
            let c = link.eval(row[0] * th[0]);
            let below_u = if row[2] <= c { 1.0 } else { 0.0 };
            let below_l = if row[1] <= c { 1.0 } else { 0.0 };
            out[0] = (q - below_u) * row[3];
            out[1] = (below_l - below_u) * row[3];
        }),
    )?
    .with_population(Arc::new(move |th: &[f64], out: &mut [f64]| {
        let breaks = design.breakpoints(th[0]);
        let cell = |x: f64| (link.eval(x * th[0]) / w).floor() * w;
        // P(U ≤ c | x) = P(Y < w⌊c/w⌋), P(L ≤ c | x) = P(Y < w⌊c/w⌋ + w)
        out[0] = expect_z(|x| q - design.below(cell(x), x), &breaks);
        out[1] = expect_z(|x| design.below(cell(x) + w, x) - design.below(cell(x), x), &breaks);
    }));
    let (prior, bounds) = flat_prior(&theta_box)?;
    let generator = Arc::new(design.generator());
    let data = generator(n, seed)?;
    Ok(ExampleBundle {
        id: ExampleId::IntervalQuantile,
        model,
        prior,
        weight: WeightSpec::identity(),
        generator,
        truth: Truth {
            theta_true: Some(vec![s.theta_true]),
            lambda_formula: "lambda(theta) = (E[(q - P(U <= g(X theta)|X)) Z], E[(P(L <= g|X) - P(U <= g|X)) Z])"
                .into(),
            region: "{theta : 0 <= lambda_1(theta) <= lambda_2(theta)}".into(),
            oracle_method: "piecewise adaptive quadrature over X between censoring breakpoints".into(),
            oracle_draws: None,
            oracle_se: Some(0.0),
        },
        data,
        flat_lambda_bounds: bounds,
    })
}
