//! Limiting marginal density of θ: the prior sliced along `λ̂(θ)` and
//! truncated to the identification region.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::criterion::lambda_tilde;
use crate::error::{Error, RawGrid, Result};
use crate::grid::{GridAxes, GridSpec, InterpolantSampler};
use crate::model::{Dataset, MomentModel, Prior};
use crate::scalar::Scalar;

/// Tolerance on the trapezoid integral of a normalized grid.
pub const NORMALIZATION_TOL: f64 = 1e-8;

/// Density values on a θ-grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid<T> {
    pub axes: GridAxes<T>,
    pub values: Vec<T>,
    pub normalized: bool,
    /// Trapezoid integral of the raw values once normalized, else 1.
    pub normalizer: T,
}

impl<T: Scalar> DensityGrid<T> {
    /// Unnormalized grid; values must be finite and nonnegative.
    pub fn new(axes: GridAxes<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != axes.len() {
            return Err(Error::input(format!("{} values for {} grid nodes", values.len(), axes.len())));
        }
        if values.iter().any(|v| !v.is_finite() || *v < T::zero()) {
            return Err(Error::input("density grid values must be finite and nonnegative"));
        }
        Ok(Self { axes, values, normalized: false, normalizer: T::one() })
    }

    pub fn dim(&self) -> usize {
        self.axes.dim()
    }

    pub fn integral(&self) -> T {
        self.axes.integrate(&self.values)
    }

    /// Value of the interpolant at `theta` (zero off the grid).
    pub fn density_at(&self, theta: &[T]) -> T {
        self.axes.interpolate(&self.values, theta)
    }

    pub fn is_identically_zero(&self) -> bool {
        self.values.iter().all(|v| *v == T::zero())
    }

    pub(crate) fn raw(&self) -> RawGrid {
        RawGrid {
            axes: self.axes.axes().iter().map(|a| a.iter().map(|x| x.as_f64()).collect()).collect(),
            values: self.values.iter().map(|v| v.as_f64()).collect(),
        }
    }

    /// CSV with columns `theta_1[,theta_2],density`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_node_csv(&self.axes, "density", self.values.iter().map(|v| v.as_f64().to_string()), writer)
    }
}

pub(crate) fn write_node_csv<T: Scalar, W: Write>(
    axes: &GridAxes<T>,
    value_column: &str,
    values: impl Iterator<Item = String>,
    writer: W,
) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (1..=axes.dim()).map(|k| format!("theta_{k}")).collect();
    header.push(value_column.to_string());
    out.write_record(&header)?;
    for (node, value) in axes.nodes().zip(values) {
        let mut rec: Vec<String> = node.iter().map(|x| x.as_f64().to_string()).collect();
        rec.push(value);
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LimitKind {
    /// `λ̂ = λ̃`, the sample moment.
    #[default]
    Plugin,
    /// `λ̂ = λ`, the population moment.
    Population,
}

impl LimitKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "plugin" => Ok(Self::Plugin),
            "population" => Ok(Self::Population),
            other => Err(Error::input(format!("unknown limit variant '{other}' (plugin, population)"))),
        }
    }
}

pub type TauFn<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;

/// Which `λ̂` slices the prior, and the `τ(θ)` factor (1 unless overridden).
#[derive(Clone, Default)]
pub struct LimitVariant<T> {
    pub kind: LimitKind,
    pub tau: Option<TauFn<T>>,
}

impl<T> fmt::Debug for LimitVariant<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LimitVariant").field("kind", &self.kind).field("tau", &self.tau.is_some()).finish()
    }
}

impl<T: Scalar> LimitVariant<T> {
    pub fn plugin() -> Self {
        Self { kind: LimitKind::Plugin, tau: None }
    }

    pub fn population() -> Self {
        Self { kind: LimitKind::Population, tau: None }
    }

    pub fn with_tau(mut self, tau: TauFn<T>) -> Self {
        self.tau = Some(tau);
        self
    }

    pub fn tau(&self, theta: &[T]) -> T {
        self.tau.as_ref().map_or(T::one(), |f| f(theta))
    }
}

/// `λ̂(θ)` for the given variant.
pub fn lambda_hat<T: Scalar>(
    model: &MomentModel<T>,
    data: Option<&Dataset<T>>,
    kind: LimitKind,
    theta: &[T],
) -> Result<Vec<T>> {
    match kind {
        LimitKind::Plugin => {
            let data = data.ok_or_else(|| Error::input("the plugin variant needs a dataset"))?;
            lambda_tilde(model, data, theta)
        }
        LimitKind::Population => model.population_moment(theta),
    }
}

pub(crate) fn check_prior<T: Scalar>(model: &MomentModel<T>, prior: &Prior<T>) -> Result<()> {
    if prior.theta_box() != model.theta_box() {
        return Err(Error::input(format!("prior parameter box differs from that of model '{}'", model.name())));
    }
    if prior.lambda_region().dim() != model.dim_m() {
        return Err(Error::input(format!(
            "prior lambda dimension {} differs from model '{}' moment dimension {}",
            prior.lambda_region().dim(),
            model.name(),
            model.dim_m()
        )));
    }
    Ok(())
}

/// Fails early when the variant cannot be evaluated at all.
pub(crate) fn check_variant<T: Scalar>(
    model: &MomentModel<T>,
    data: Option<&Dataset<T>>,
    kind: LimitKind,
) -> Result<()> {
    match kind {
        LimitKind::Plugin if data.is_none() => Err(Error::input("the plugin variant needs a dataset")),
        LimitKind::Population if !model.has_population() => {
            Err(Error::unsupported(format!("model '{}' carries no population moment oracle", model.name())))
        }
        _ => Ok(()),
    }
}

/// Normalized grid of `g(θ) ∝ τ(θ)·p(λ̂(θ), θ)·I_Ξ(λ̂(θ), θ)`.
pub fn limiting_theta_density<T: Scalar>(
    model: &MomentModel<T>,
    prior: &Prior<T>,
    variant: &LimitVariant<T>,
    data: Option<&Dataset<T>>,
    resolution: &GridSpec,
) -> Result<DensityGrid<T>> {
    check_prior(model, prior)?;
    check_variant(model, data, variant.kind)?;
    let axes = GridAxes::uniform(model.theta_box(), resolution)?;
    let values = (0..axes.len())
        .into_par_iter()
        .map(|i| {
            let theta = axes.node(i);
            let lambda = lambda_hat(model, data, variant.kind, &theta)?;
            let p = prior.prior_density(&lambda, &theta)?;
            if p == T::zero() {
                return Ok(p);
            }
            let tau = variant.tau(&theta);
            if !(tau > T::zero()) || !tau.is_finite() {
                return Err(Error::input(format!("tau must be positive and finite, got {tau} at {theta:?}")));
            }
            Ok(tau * p)
        })
        .collect::<Result<Vec<T>>>()?;
    normalize_density_grid(DensityGrid::new(axes, values)?)
}

/// Scales the grid to unit trapezoid integral, recording the normalizer.
pub fn normalize_density_grid<T: Scalar>(grid: DensityGrid<T>) -> Result<DensityGrid<T>> {
    let total = grid.integral();
    if grid.is_identically_zero() || !(total > T::zero()) {
        return Err(Error::EmptyRegion {
            detail: "density grid is identically zero (empty identification region on this grid)".into(),
            raw: Box::new(grid.raw()),
        });
    }
    if !total.is_finite() {
        return Err(Error::numerical("density grid integral overflowed"));
    }
    let values = grid.values.iter().map(|v| *v / total).collect();
    let normalizer = if grid.normalized { grid.normalizer * total } else { total };
    Ok(DensityGrid { axes: grid.axes, values, normalized: true, normalizer })
}

/// Seeded draws from the interpolant of a normalized grid.
pub fn sample_density_grid<T: Scalar>(grid: &DensityGrid<T>, count: usize, seed: u64) -> Result<Vec<Vec<T>>> {
    if !grid.normalized {
        return Err(Error::input("sample_density_grid needs a normalized grid"));
    }
    let sampler = InterpolantSampler::new(&grid.axes, &grid.values)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| sampler.draw(&mut rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples::{make_moment_inequality, make_rounded_data, AffineSpec, RoundedSettings};
    use crate::model::{LambdaPrior, ParamBox, ThetaPrior};
    use crate::scalar::{std_normal_cdf, std_normal_pdf};

    fn unit_axes(n: usize) -> GridAxes<f64> {
        GridAxes::uniform(&ParamBox::new(vec![0.0], vec![1.0]).unwrap(), &GridSpec::uniform(n)).unwrap()
    }

    /// Rounded-data bundle whose sample has mean exactly 0.4.
    fn rounded_with_mean(mean: f64) -> (crate::examples::ExampleBundle, Dataset<f64>) {
        let b = make_rounded_data(10, &RoundedSettings::default(), 0).unwrap();
        let data = Dataset::from_column("w", &[mean; 10]).unwrap();
        (b, data)
    }

    #[test]
    fn plugin_limit_is_uniform_on_shifted_interval() {
        let (b, data) = rounded_with_mean(0.4);
        let g = limiting_theta_density(&b.model, &b.prior, &LimitVariant::plugin(), Some(&data), &GridSpec::default())
            .unwrap();
        assert!((g.integral() - 1.0).abs() < NORMALIZATION_TOL);
        let h = g.axes.cell_volume();
        for (theta, v) in g.axes.nodes().zip(&g.values) {
            let inside = theta[0] >= 0.4 && theta[0] <= 1.4;
            if inside {
                // Trapezoid end corrections leave the height within one cell of 1.
                assert!((v - 1.0).abs() < 2.0 * h, "{theta:?} {v}");
            } else {
                assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn population_limit_with_gaussian_theta_prior() {
        let s = RoundedSettings { y_mean: 0.0, ..Default::default() };
        let b = make_rounded_data(10, &s, 0).unwrap();
        // Population oracle with E W = 0 exactly.
        let model = b.model.clone().with_population(Arc::new(|th: &[f64], out: &mut [f64]| out[0] = th[0]));
        let prior = b.prior.with_theta(ThetaPrior::TruncatedGaussian { mean: vec![0.0], sd: vec![1.0] }).unwrap();
        let g = limiting_theta_density(&model, &prior, &LimitVariant::population(), None, &GridSpec::uniform(20001))
            .unwrap();
        let expected = std_normal_pdf(1.0) / (std_normal_cdf(1.0) - std_normal_cdf(0.0));
        assert!((expected - 0.70888).abs() < 1e-5);
        // The node at θ = 1 sits on the region edge; the cell just inside carries the interior value.
        let interior = g.density_at(&[0.5]);
        let want = std_normal_pdf(0.5) / (std_normal_cdf(1.0) - std_normal_cdf(0.0));
        assert!((interior - want).abs() < 1e-3, "{interior} {want}");
        let at_one = g.density_at(&[1.0 - 1e-9]);
        assert!((at_one - expected).abs() < 2e-3, "{at_one} {expected}");
    }

    #[test]
    fn infeasible_moment_inequality_is_empty_region() {
        let spec = AffineSpec { b: vec![0.0, -100.0], ..AffineSpec::canonical() };
        let b = make_moment_inequality(&spec, 20, 0).unwrap();
        let err = limiting_theta_density(&b.model, &b.prior, &LimitVariant::population(), None, &GridSpec::default())
            .unwrap_err();
        match err {
            Error::EmptyRegion { raw, .. } => {
                assert_eq!(raw.values.len(), crate::grid::DEFAULT_NODES_1D);
                assert!(raw.values.iter().all(|v| *v == 0.0));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_inputs_rejected() {
        let (b, _) = rounded_with_mean(0.4);
        let plugin = limiting_theta_density(&b.model, &b.prior, &LimitVariant::plugin(), None, &GridSpec::default());
        assert!(matches!(plugin, Err(Error::Input(_))));
        let bare = b.model.clone().without_population();
        let pop = limiting_theta_density(&bare, &b.prior, &LimitVariant::population(), None, &GridSpec::default());
        assert!(matches!(pop, Err(Error::Unsupported(_))));
    }

    #[test]
    fn normalize_constant_triangle_and_idempotence() {
        let g = normalize_density_grid(DensityGrid::new(unit_axes(101), vec![2.0; 101]).unwrap()).unwrap();
        assert!(g.values.iter().all(|v| (v - 1.0).abs() < 1e-14));
        assert!((g.normalizer - 2.0).abs() < 1e-14);
        let again = normalize_density_grid(g.clone()).unwrap();
        assert!(g.values.iter().zip(&again.values).all(|(a, b)| (a - b).abs() < 1e-14));

        let axes = unit_axes(101);
        let tri: Vec<f64> = axes.nodes().map(|x| 1.0 - (2.0 * x[0] - 1.0).abs()).collect();
        let g = normalize_density_grid(DensityGrid::new(axes, tri).unwrap()).unwrap();
        let peak = g.values.iter().cloned().fold(0.0, f64::max);
        assert!((peak - 2.0).abs() < 1e-12, "{peak}");
    }

    #[test]
    fn all_zero_grid_is_empty_region() {
        let err = normalize_density_grid(DensityGrid::new(unit_axes(11), vec![0.0; 11]).unwrap()).unwrap_err();
        assert!(matches!(err, Error::EmptyRegion { .. }));
    }

    #[test]
    fn uniform_draws_pass_ks() {
        let g = normalize_density_grid(DensityGrid::new(unit_axes(64), vec![1.0; 64]).unwrap()).unwrap();
        let mut x: Vec<f64> = sample_density_grid(&g, 100_000, 3).unwrap().into_iter().map(|d| d[0]).collect();
        x.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = x.len() as f64;
        let ks = x
            .iter()
            .enumerate()
            .map(|(i, v)| (v - i as f64 / n).abs().max(((i + 1) as f64 / n - v).abs()))
            .fold(0.0, f64::max);
        // 0.1% critical value 1.95/sqrt(n) ≈ 0.0062.
        assert!(ks < 1.95 / n.sqrt(), "{ks}");
    }

    #[test]
    fn hot_node_draws_stay_in_its_support() {
        let axes = unit_axes(11);
        let mut v = vec![0.0; 11];
        v[4] = 1.0;
        let g = normalize_density_grid(DensityGrid::new(axes, v).unwrap()).unwrap();
        let draws = sample_density_grid(&g, 5000, 1).unwrap();
        assert!(draws.iter().all(|d| d[0] >= 0.3 - 1e-12 && d[0] <= 0.5 + 1e-12));
    }

    #[test]
    fn draws_are_seeded_and_need_normalization() {
        let raw = DensityGrid::new(unit_axes(11), vec![1.0; 11]).unwrap();
        assert!(matches!(sample_density_grid(&raw, 10, 0), Err(Error::Input(_))));
        let g = normalize_density_grid(raw).unwrap();
        assert_eq!(sample_density_grid(&g, 100, 9).unwrap(), sample_density_grid(&g, 100, 9).unwrap());
        assert_ne!(sample_density_grid(&g, 100, 9).unwrap(), sample_density_grid(&g, 100, 10).unwrap());
    }

    #[test]
    fn two_dimensional_draws_follow_marginals() {
        let bx = ParamBox::new(vec![0.0, 0.0], vec![1.0, 2.0]).unwrap();
        let axes = GridAxes::uniform(&bx, &GridSpec::uniform(65)).unwrap();
        // Density ∝ x on [0,1] × [0,2]: E x = 2/3, E y = 1.
        let vals: Vec<f64> = axes.nodes().map(|t| t[0]).collect();
        let g = normalize_density_grid(DensityGrid::new(axes, vals).unwrap()).unwrap();
        let d = sample_density_grid(&g, 40_000, 5).unwrap();
        let n = d.len() as f64;
        let mx = d.iter().map(|t| t[0]).sum::<f64>() / n;
        let my = d.iter().map(|t| t[1]).sum::<f64>() / n;
        assert!((mx - 2.0 / 3.0).abs() < 4.0 * (1.0f64 / 18.0).sqrt() / n.sqrt(), "{mx}");
        assert!((my - 1.0).abs() < 4.0 * (1.0f64 / 3.0).sqrt() / n.sqrt(), "{my}");
    }

    #[test]
    fn flat_prior_limit_is_restricted_prior() {
        let (b, data) = rounded_with_mean(0.4);
        let prior = b.prior.with_theta(ThetaPrior::TruncatedGaussian { mean: vec![1.0], sd: vec![0.5] }).unwrap();
        let g = limiting_theta_density(&b.model, &prior, &LimitVariant::plugin(), Some(&data), &GridSpec::default())
            .unwrap();
        let restricted: Vec<f64> = g
            .axes
            .nodes()
            .map(|t| if b.model.lambda_region().contains(&[t[0] - 0.4]) { prior.theta_density(&t) } else { 0.0 })
            .collect();
        let r = normalize_density_grid(DensityGrid::new(g.axes.clone(), restricted).unwrap()).unwrap();
        for (a, c) in g.values.iter().zip(&r.values) {
            assert!((a - c).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_tau_is_invisible() {
        let (b, data) = rounded_with_mean(0.4);
        let prior = b.prior.with_lambda(LambdaPrior::Flat { bounds: None }).unwrap();
        let base = limiting_theta_density(&b.model, &prior, &LimitVariant::plugin(), Some(&data), &GridSpec::default())
            .unwrap();
        let scaled = LimitVariant::plugin().with_tau(Arc::new(|_: &[f64]| 7.5));
        let g = limiting_theta_density(&b.model, &prior, &scaled, Some(&data), &GridSpec::default()).unwrap();
        assert!(base.values.iter().zip(&g.values).all(|(a, c)| (a - c).abs() < 1e-12));
    }

    #[test]
    fn csv_layout() {
        let g = normalize_density_grid(DensityGrid::new(unit_axes(3), vec![1.0; 3]).unwrap()).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "theta_1,density\n0,1\n0.5,1\n1,1\n");
    }
}
