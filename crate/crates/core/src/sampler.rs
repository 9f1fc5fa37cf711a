//! Seeded adaptive random-walk Metropolis over the joint `(λ, θ)` space.

use std::io::Write;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criterion::{lambda_tilde, MomentSummary, WeightSpec};
use crate::error::{Error, Result};
use crate::linalg::Cholesky;
use crate::model::{Dataset, MomentModel, Prior};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProposalKind {
    /// Joint gaussian step shaped by the burn-in covariance.
    #[default]
    AdaptiveCovariance,
    /// One coordinate at a time with its own scale.
    Componentwise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McmcConfig {
    pub total_iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// `(λ, θ)`; `None` pairs the centre of Θ with the projected `λ̃`.
    pub initial_point: Option<(Vec<f64>, Vec<f64>)>,
    /// Per-coordinate step sizes in `(λ, θ)` order.
    pub proposal_scale: Option<Vec<f64>>,
    pub adapt: bool,
    pub target_acceptance: f64,
    pub seed: u64,
    pub proposal: ProposalKind,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            total_iterations: 200_000,
            burn_in: 50_000,
            thin: 10,
            initial_point: None,
            proposal_scale: None,
            adapt: true,
            target_acceptance: 0.234,
            seed: 0,
            proposal: ProposalKind::AdaptiveCovariance,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.total_iterations == 0 || self.thin == 0 {
            return Err(Error::input("total_iterations and thin must be positive"));
        }
        if self.burn_in >= self.total_iterations {
            return Err(Error::input(format!(
                "burn_in ({}) must be smaller than total_iterations ({})",
                self.burn_in, self.total_iterations
            )));
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return Err(Error::input("target_acceptance must lie in (0, 1)"));
        }
        if let Some(s) = &self.proposal_scale {
            if s.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(Error::input("proposal_scale entries must be positive and finite"));
            }
        }
        Ok(())
    }
}

/// Retained draws, one row per draw, columns `λ_1..λ_k, θ_1..θ_d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain<T> {
    pub draws: Array2<T>,
    pub dim_lambda: usize,
    pub dim_theta: usize,
    /// Acceptance rate over the retained (post burn-in) iterations.
    pub acceptance_rate: f64,
    pub burn_in_acceptance_rate: f64,
    pub seed: u64,
    pub ess: Vec<f64>,
    pub degenerate: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Block {
    Lambda,
    Theta,
}

impl<T: Scalar> Chain<T> {
    pub fn len(&self) -> usize {
        self.draws.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.nrows() == 0
    }

    pub fn column_names(&self) -> Vec<String> {
        (1..=self.dim_lambda)
            .map(|i| format!("lambda_{i}"))
            .chain((1..=self.dim_theta).map(|i| format!("theta_{i}")))
            .collect()
    }

    /// Projection of the draws onto one coordinate.
    pub fn marginal_draws(&self, which: Block, coordinate: usize) -> Result<Vec<T>> {
        let (offset, dim) = match which {
            Block::Lambda => (0, self.dim_lambda),
            Block::Theta => (self.dim_lambda, self.dim_theta),
        };
        if coordinate >= dim {
            return Err(Error::input(format!("{which:?} coordinate {coordinate} out of range (dimension {dim})")));
        }
        Ok(self.draws.column(offset + coordinate).to_vec())
    }

    /// θ-blocks of all draws.
    pub fn theta_draws(&self) -> Vec<Vec<T>> {
        self.draws.rows().into_iter().map(|r| r.iter().skip(self.dim_lambda).copied().collect()).collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(self.column_names())?;
        for row in self.draws.rows() {
            wtr.write_record(row.iter().map(|v| v.to_string()))?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Per-coordinate ESS with flags for constant coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EssReport {
    pub ess: Vec<f64>,
    pub degenerate: Vec<bool>,
}

/// ESS of one series by Geyer's initial positive sequence.
fn ess_series(x: &[f64]) -> (f64, bool) {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let gamma = |lag: usize| -> f64 {
        centered[..n - lag].iter().zip(&centered[lag..]).map(|(a, b)| a * b).sum::<f64>() / n as f64
    };
    let g0 = gamma(0);
    if !(g0 > 1e-300 * (1.0 + mean * mean)) {
        return (n as f64, true);
    }
    // Sum of autocorrelation pairs Γ_k = ρ_{2k} + ρ_{2k+1} while positive.
    let mut tau = -1.0;
    let mut k = 0;
    while 2 * k + 1 < n {
        let pair = (gamma(2 * k) + gamma(2 * k + 1)) / g0;
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        k += 1;
    }
    let tau = tau.max(1.0 / n as f64);
    ((n as f64 / tau).min(n as f64), false)
}

/// Per-coordinate effective sample size of the retained draws.
pub fn effective_sample_size<T: Scalar>(draws: &Array2<T>) -> Result<EssReport> {
    if draws.nrows() < 100 {
        return Err(Error::input(format!("ESS needs at least 100 draws, got {}", draws.nrows())));
    }
    let (ess, degenerate) =
        draws.columns().into_iter().map(|c| ess_series(&c.iter().map(|v| v.as_f64()).collect::<Vec<_>>())).unzip();
    Ok(EssReport { ess, degenerate })
}

struct Target<'a, T> {
    model: &'a MomentModel<T>,
    data: &'a Dataset<T>,
    prior: &'a Prior<T>,
    spec: &'a WeightSpec,
    dim_lambda: usize,
    cache: Option<(Vec<T>, MomentSummary<T>)>,
}

impl<T: Scalar> Target<'_, T> {
    fn log_kernel(&mut self, x: &[T]) -> Result<T> {
        let (lambda, theta) = x.split_at(self.dim_lambda);
        let p = self.prior.prior_density(lambda, theta)?;
        if !(p > T::zero()) {
            return Ok(T::neg_infinity());
        }
        let hit = matches!(&self.cache, Some((t, _)) if t.as_slice() == theta);
        if !hit {
            let s = MomentSummary::new(self.model, self.data, theta, self.spec)?;
            self.cache = Some((theta.to_vec(), s));
        }
        let (_, s) = self.cache.as_ref().expect("cached summary");
        Ok(s.neg_n_risk(lambda) + p.ln())
    }
}

/// Centre of Θ with `λ̃` projected into Λ and clamped into the flat bounds.
pub fn default_initial_point<T: Scalar>(
    model: &MomentModel<T>,
    data: &Dataset<T>,
    prior: &Prior<T>,
    theta: Option<Vec<T>>,
) -> Result<(Vec<T>, Vec<T>)> {
    let theta = theta.unwrap_or_else(|| model.theta_box().center());
    let lt = lambda_tilde(model, data, &theta)?;
    let mut lambda = model.lambda_region().project(&lt);
    if let crate::model::LambdaPrior::Flat { bounds: Some(b) } = prior.lambda_spec() {
        let clamped = b.clamp(&lambda);
        lambda = model.lambda_region().project(&clamped);
    }
    Ok((lambda, theta))
}

/// Coarse search over Θ for a point with a finite kernel, best kernel first.
pub fn grid_search_initial_point<T: Scalar>(
    model: &MomentModel<T>,
    data: &Dataset<T>,
    prior: &Prior<T>,
    spec: &WeightSpec,
) -> Result<(Vec<T>, Vec<T>)> {
    let b = model.theta_box();
    let d = b.dim();
    let per_axis: usize = if d <= 2 { 41 } else { 5 };
    let total = per_axis.pow(d.min(4) as u32);
    let mut best: Option<(T, Vec<T>, Vec<T>)> = None;
    for flat in 0..total {
        let mut idx = flat;
        let theta: Vec<T> = (0..d)
            .map(|k| {
                let i = if k < 4 { idx % per_axis } else { per_axis / 2 };
                if k < 4 {
                    idx /= per_axis;
                }
                b.lower()[k] + b.width(k) * T::from_count(i) / T::from_count(per_axis - 1)
            })
            .collect();
        let (lambda, theta) = default_initial_point(model, data, prior, Some(theta))?;
        let k = crate::criterion::quasi_log_kernel(model, data, prior, &lambda, &theta, spec)?;
        if k.is_finite() && best.as_ref().is_none_or(|(bk, _, _)| k > *bk) {
            best = Some((k, lambda, theta));
        }
    }
    best.map(|(_, l, t)| (l, t))
        .ok_or_else(|| Error::input("no grid point of the parameter box has a finite quasi-posterior kernel"))
}

/// Runs one chain targeting `exp(quasi_log_kernel)`.
pub fn run_chain<T: Scalar>(
    model: &MomentModel<T>,
    data: &Dataset<T>,
    prior: &Prior<T>,
    spec: &WeightSpec,
    config: &McmcConfig,
) -> Result<Chain<T>> {
    config.validate()?;
    let k = model.dim_m();
    let p = model.dim_theta();
    let d = k + p;
    let (lambda0, theta0) = match &config.initial_point {
        Some((l, t)) => (l.iter().map(|v| T::lit(*v)).collect(), t.iter().map(|v| T::lit(*v)).collect()),
        None => {
            model.check_theta(&model.theta_box().center())?;
            default_initial_point(model, data, prior, None)?
        }
    };
    if lambda0.len() != k || theta0.len() != p {
        return Err(Error::input(format!("initial point must have dimensions ({k}, {p})")));
    }
    let mut target = Target { model, data, prior, spec, dim_lambda: k, cache: None };
    let mut x: Vec<T> = lambda0.iter().chain(&theta0).copied().collect();
    let mut log_k = target.log_kernel(&x)?;
    if !log_k.is_finite() {
        return Err(Error::input(format!(
            "quasi-posterior kernel is not finite at the initial point (lambda {lambda0:?}, theta {theta0:?})"
        )));
    }

    let base_scale: Vec<f64> = match &config.proposal_scale {
        Some(s) if s.len() == d => s.clone(),
        Some(s) => return Err(Error::input(format!("proposal_scale has {} entries, expected {d}", s.len()))),
        None => {
            let summary = MomentSummary::new(model, data, &theta0, spec)?;
            let sd = summary.lambda_sd();
            sd.iter()
                .map(|v| v.as_f64().max(1e-12))
                .chain((0..p).map(|i| model.theta_box().width(i).as_f64() / 10.0))
                .collect()
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let target_acc = config.target_acceptance;
    let mut log_scale = vec![0.0f64; d];
    let mut joint_factor: Option<Cholesky<f64>> = None;
    let mut joint_log_scale = 0.0f64;
    // Running moments of burn-in states for the covariance proposal.
    let mut mean = vec![0.0f64; d];
    let mut cov = vec![0.0f64; d * d];
    let mut seen = 0usize;
    let warmup = (100 * d).max(500).min(config.burn_in / 2);

    let retained = (config.total_iterations - config.burn_in) / config.thin;
    let mut draws = Vec::with_capacity(retained * d);
    let mut acc_burn = 0usize;
    let mut acc_main = 0usize;
    let mut proposal = x.clone();
    let mut z = vec![0.0f64; d];

    for it in 0..config.total_iterations {
        let burning = it < config.burn_in;
        proposal.copy_from_slice(&x);
        let coord = it % d;
        match config.proposal {
            ProposalKind::Componentwise => {
                let step: f64 = rng.sample::<f64, _>(StandardNormal) * base_scale[coord] * log_scale[coord].exp();
                proposal[coord] = proposal[coord] + T::lit(step);
            }
            ProposalKind::AdaptiveCovariance => {
                z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
                match &joint_factor {
                    Some(l) => {
                        let step = l.mul_lower(&z);
                        let s = joint_log_scale.exp();
                        for i in 0..d {
                            proposal[i] = proposal[i] + T::lit(s * step[i]);
                        }
                    }
                    None => {
                        let s = log_scale[0].exp();
                        for i in 0..d {
                            proposal[i] = proposal[i] + T::lit(s * base_scale[i] * z[i]);
                        }
                    }
                }
            }
        }
        let log_kp = target.log_kernel(&proposal)?;
        let u: f64 = rng.gen();
        let accept = log_kp.is_finite() && u.ln() < (log_kp - log_k).as_f64();
        if accept {
            x.copy_from_slice(&proposal);
            log_k = log_kp;
        }
        if burning {
            acc_burn += accept as usize;
            if config.adapt {
                let a = if accept { 1.0 } else { 0.0 };
                let gamma = 1.0 / ((it + 1) as f64).powf(0.6);
                match config.proposal {
                    ProposalKind::Componentwise => log_scale[coord] += gamma * (a - target_acc),
                    ProposalKind::AdaptiveCovariance => {
                        if joint_factor.is_some() {
                            joint_log_scale += gamma * (a - target_acc);
                        } else {
                            log_scale[0] += gamma * (a - target_acc);
                        }
                        seen += 1;
                        let xf: Vec<f64> = x.iter().map(|v| v.as_f64()).collect();
                        let w = 1.0 / seen as f64;
                        let delta: Vec<f64> = xf.iter().zip(&mean).map(|(a, m)| a - m).collect();
                        for i in 0..d {
                            mean[i] += w * delta[i];
                        }
                        for i in 0..d {
                            for j in 0..d {
                                cov[i * d + j] += (xf[i] - mean[i]) * delta[j];
                            }
                        }
                        if seen >= warmup && (seen - warmup).is_multiple_of(100) {
                            let mut c = Array2::zeros((d, d));
                            for i in 0..d {
                                for j in 0..d {
                                    c[[i, j]] = cov[i * d + j] / (seen - 1) as f64;
                                }
                                // Floor each variance at a small fraction of the base step.
                                c[[i, i]] += 1e-6 * base_scale[i] * base_scale[i];
                            }
                            if let Ok(l) = Cholesky::new(&c) {
                                if joint_factor.is_none() {
                                    joint_log_scale = (2.38 / (d as f64).sqrt()).ln();
                                }
                                joint_factor = Some(l);
                            }
                        }
                    }
                }
            }
            if it + 1 == config.burn_in && acc_burn == 0 && config.burn_in > 0 {
                return Err(Error::Diagnostics(format!(
                    "no proposal was accepted during {} burn-in iterations; use a smaller proposal_scale",
                    config.burn_in
                )));
            }
        } else {
            acc_main += accept as usize;
            if (it - config.burn_in + 1).is_multiple_of(config.thin) {
                draws.extend_from_slice(&x);
            }
        }
    }

    let rows = draws.len() / d;
    let draws = Array2::from_shape_vec((rows, d), draws).map_err(|e| Error::numerical(e.to_string()))?;
    let (ess, degenerate) = match effective_sample_size(&draws) {
        Ok(r) => (r.ess, r.degenerate),
        Err(_) => (vec![rows as f64; d], vec![false; d]),
    };
    Ok(Chain {
        draws,
        dim_lambda: k,
        dim_theta: p,
        acceptance_rate: acc_main as f64 / (config.total_iterations - config.burn_in) as f64,
        burn_in_acceptance_rate: if config.burn_in > 0 { acc_burn as f64 / config.burn_in as f64 } else { 0.0 },
        seed: config.seed,
        ess,
        degenerate,
    })
}

/// Independent chains for several seeds, returned in seed order.
pub fn run_chains<T: Scalar>(
    model: &MomentModel<T>,
    data: &Dataset<T>,
    prior: &Prior<T>,
    spec: &WeightSpec,
    config: &McmcConfig,
    seeds: &[u64],
) -> Result<Vec<Chain<T>>> {
    seeds.par_iter().map(|&seed| run_chain(model, data, prior, spec, &McmcConfig { seed, ..config.clone() })).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LambdaRegion, ParamBox};
    use rand_distr::Distribution;
    use std::sync::Arc;

    fn rounded(theta: (f64, f64), lam: (f64, f64)) -> (MomentModel<f64>, Prior<f64>) {
        let tb = ParamBox::new(vec![theta.0], vec![theta.1]).unwrap();
        let lb = ParamBox::new(vec![lam.0], vec![lam.1]).unwrap();
        let m = MomentModel::new(
            "rounded",
            1,
            tb.clone(),
            LambdaRegion::boxed(lb.clone()),
            Arc::new(|w: &[f64], th: &[f64], out: &mut [f64]| out[0] = th[0] - w[0]),
        )
        .unwrap();
        let p = Prior::flat(tb, LambdaRegion::boxed(lb), None).unwrap();
        (m, p)
    }

    fn small() -> McmcConfig {
        McmcConfig { total_iterations: 20_000, burn_in: 5_000, thin: 5, seed: 11, ..Default::default() }
    }

    #[test]
    fn draws_stay_in_tiny_support() {
        let (m, p) = rounded((0.4, 0.41), (0.0, 0.01));
        let d = Dataset::from_column("w", &[0.0, 1.0, 0.0, 1.0]).unwrap();
        let c = run_chain(&m, &d, &p, &WeightSpec::identity(), &small()).unwrap();
        for r in c.draws.rows() {
            assert!((0.0..=0.01).contains(&r[0]) && (0.4..=0.41).contains(&r[1]));
        }
        assert!((0.0..=1.0).contains(&c.acceptance_rate));
    }

    #[test]
    fn seeded_runs_are_identical() {
        let (m, p) = rounded((-5.0, 5.0), (0.0, 1.0));
        let d = Dataset::from_column("w", &[0.0, 1.0, 0.0, 1.0, 2.0, 0.0]).unwrap();
        let a = run_chain(&m, &d, &p, &WeightSpec::identity(), &small()).unwrap();
        let b = run_chain(&m, &d, &p, &WeightSpec::identity(), &small()).unwrap();
        assert_eq!(a.draws, b.draws);
        let cw = McmcConfig { proposal: ProposalKind::Componentwise, ..small() };
        let c1 = run_chain(&m, &d, &p, &WeightSpec::identity(), &cw).unwrap();
        let c2 = run_chain(&m, &d, &p, &WeightSpec::identity(), &cw).unwrap();
        assert_eq!(c1.draws, c2.draws);
    }

    #[test]
    fn non_finite_start_is_an_input_error() {
        let (m, p) = rounded((-5.0, 5.0), (0.0, 1.0));
        let d = Dataset::from_column("w", &[0.0, 1.0]).unwrap();
        let cfg = McmcConfig { initial_point: Some((vec![3.0], vec![0.0])), ..small() };
        assert!(matches!(run_chain(&m, &d, &p, &WeightSpec::identity(), &cfg), Err(Error::Input(_))));
    }

    #[test]
    fn huge_fixed_steps_are_diagnosed() {
        let (m, p) = rounded((-5.0, 5.0), (0.0, 1.0));
        let d = Dataset::from_column("w", &[0.0, 1.0]).unwrap();
        let cfg = McmcConfig { proposal_scale: Some(vec![1e9, 1e9]), adapt: false, ..small() };
        assert!(matches!(run_chain(&m, &d, &p, &WeightSpec::identity(), &cfg), Err(Error::Diagnostics(_))));
    }

    #[test]
    fn ess_of_iid_and_duplicated_chains() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xs: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let iid = Array2::from_shape_vec((10_000, 1), xs.clone()).unwrap();
        let e = effective_sample_size(&iid).unwrap().ess[0];
        assert!((8_000.0..=10_000.0).contains(&e), "{e}");
        // Each draw repeated twice: lag-1 autocorrelation 1/2, ESS ≈ the iid count of 5,000 draws.
        let dup: Vec<f64> = xs[..5_000].iter().flat_map(|v| [*v, *v]).collect();
        let dup = Array2::from_shape_vec((10_000, 1), dup).unwrap();
        let e2 = effective_sample_size(&dup).unwrap().ess[0];
        let e_half =
            effective_sample_size(&Array2::from_shape_vec((5_000, 1), xs[..5_000].to_vec()).unwrap()).unwrap().ess[0];
        assert!((e2 / e_half - 1.0).abs() < 0.2, "{e2} vs {e_half}");
        let flat = Array2::from_elem((200, 1), 3.0);
        assert!(effective_sample_size(&flat).unwrap().degenerate[0]);
        assert!(effective_sample_size(&Array2::<f64>::zeros((99, 1))).is_err());
    }

    #[test]
    fn marginal_projection() {
        let c = Chain {
            draws: ndarray::array![[0.1, 1.0], [0.2, 2.0]],
            dim_lambda: 1,
            dim_theta: 1,
            acceptance_rate: 0.5,
            burn_in_acceptance_rate: 0.5,
            seed: 0,
            ess: vec![2.0, 2.0],
            degenerate: vec![false, false],
        };
        assert_eq!(c.marginal_draws(Block::Theta, 0).unwrap(), vec![1.0, 2.0]);
        assert_eq!(c.marginal_draws(Block::Lambda, 0).unwrap(), vec![0.1, 0.2]);
        assert!(c.marginal_draws(Block::Theta, 1).is_err());
        assert_eq!(c.column_names(), vec!["lambda_1", "theta_1"]);
    }

    #[test]
    fn two_state_occupancy_and_flows() {
        // θ-prior with mass 1/3 on [0, 1) and 2/3 on (1, 2]; λ decoupled from θ.
        let tb = ParamBox::new(vec![0.0], vec![2.0]).unwrap();
        let lb = ParamBox::new(vec![-1.0], vec![1.0]).unwrap();
        let m = MomentModel::new(
            "decoupled",
            1,
            tb.clone(),
            LambdaRegion::boxed(lb.clone()),
            Arc::new(|w: &[f64], _: &[f64], out: &mut [f64]| out[0] = w[0]),
        )
        .unwrap();
        let p = Prior::new(
            tb,
            LambdaRegion::boxed(lb),
            crate::model::ThetaPrior::Tabulated {
                axes: vec![vec![0.0, 0.999_999, 1.000_001, 2.0]],
                values: vec![1.0, 1.0, 2.0, 2.0],
            },
            crate::model::LambdaPrior::Flat { bounds: None },
        )
        .unwrap();
        let d = Dataset::from_column("w", &[0.0, 0.5, -0.5, 0.0]).unwrap();
        let cfg = McmcConfig { total_iterations: 100_000, burn_in: 10_000, thin: 2, seed: 4, ..Default::default() };
        let c = run_chain(&m, &d, &p, &WeightSpec::identity(), &cfg).unwrap();
        let states: Vec<usize> =
            c.marginal_draws(Block::Theta, 0).unwrap().iter().map(|t| (*t > 1.0) as usize).collect();
        let frac = states.iter().sum::<usize>() as f64 / states.len() as f64;
        let ess = effective_sample_size(
            &Array2::from_shape_vec((states.len(), 1), states.iter().map(|s| *s as f64).collect()).unwrap(),
        )
        .unwrap()
        .ess[0];
        let se = (frac * (1.0 - frac) / ess).sqrt();
        assert!((frac - 2.0 / 3.0).abs() < 3.0 * se, "{frac} (se {se})");
        let up = states.windows(2).filter(|w| w[0] == 0 && w[1] == 1).count() as i64;
        let down = states.windows(2).filter(|w| w[0] == 1 && w[1] == 0).count() as i64;
        assert!((up - down).abs() <= 1);
    }
}
