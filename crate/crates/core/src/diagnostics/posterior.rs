use rayon::prelude::*;

use crate::criterion::{MomentSummary, WeightSpec};
use crate::error::{Error, Result};
use crate::grid::{GridAxes, GridSpec};
use crate::limit::{check_prior, normalize_density_grid, DensityGrid};
use crate::model::{Dataset, LambdaPrior, MomentModel, Prior};
use crate::quadrature::{integrate_nested, QuadOptions};
use crate::scalar::Scalar;

/// Half-width, in conditional sd, of the λ window around `λ̃(θ)`.
pub const SD_SPAN: f64 = 10.0;

/// Marginal quasi-posterior `q(θ | data) ∝ ∫ e^{−nR_n(λ, θ)} p(λ, θ) dλ` on a
/// θ-grid, by nested adaptive quadrature over `Λ ∩ [λ̃ ± SD_SPAN·sd]`.
pub fn exact_posterior_quadrature<T: Scalar>(
    model: &MomentModel<T>,
    data: &Dataset<T>,
    prior: &Prior<T>,
    spec: &WeightSpec,
    resolution: &GridSpec,
) -> Result<DensityGrid<T>> {
    check_prior(model, prior)?;
    let m = model.dim_m();
    if m > 2 {
        return Err(Error::unsupported(format!("quadrature posterior supports dim_m <= 2, got {m}")));
    }
    let axes = GridAxes::uniform(model.theta_box(), resolution)?;
    let flat_bounds = match prior.lambda_spec() {
        LambdaPrior::Flat { bounds: Some(b) } => Some(b.clone()),
        _ => None,
    };
    let region = prior.lambda_region();
    let opts = QuadOptions::default();
    let values = (0..axes.len())
        .into_par_iter()
        .map(|i| {
            let theta = axes.node(i);
            if prior.theta_density(&theta) == T::zero() {
                return Ok(T::zero());
            }
            let s = MomentSummary::new(model, data, &theta, spec)?;
            let span = T::lit(SD_SPAN);
            let mut lo: Vec<T> = s.m_bar().iter().zip(s.lambda_sd()).map(|(c, sd)| *c - span * sd).collect();
            let mut hi: Vec<T> = s.m_bar().iter().zip(s.lambda_sd()).map(|(c, sd)| *c + span * sd).collect();
            if let Some(b) = &flat_bounds {
                for k in 0..m {
                    lo[k] = lo[k].max(b.lower()[k]);
                    hi[k] = hi[k].min(b.upper()[k]);
                }
            }
            if (0..m).any(|k| !(hi[k] > lo[k])) {
                return Ok(T::zero());
            }
            let f = |lambda: &[T]| {
                let p = prior.prior_density(lambda, &theta).unwrap_or(T::zero());
                if p == T::zero() {
                    T::zero()
                } else {
                    p * s.neg_n_risk(lambda).exp()
                }
            };
            let limits = |k: usize, outer: &[T]| region.nested_limits(&lo, &hi, k, outer);
            integrate_nested(&f, m, &limits, &opts)
        })
        .collect::<Result<Vec<T>>>()?;
    normalize_density_grid(DensityGrid::new(axes, values)?).map_err(|e| match e {
        Error::EmptyRegion { raw, .. } => {
            Error::EmptyRegion { detail: "quadrature posterior is identically zero on the grid".into(), raw }
        }
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::l1_grid;
    use crate::examples::{bundle, make_rounded_data, ExampleId, RoundedSettings};
    use crate::limit::{limiting_theta_density, LimitVariant};
    use crate::model::ThetaPrior;
    use crate::scalar::std_normal_mass;

    #[test]
    fn rounded_posterior_matches_gaussian_window() {
        // Flat priors: q(θ) ∝ P(θ − W̄ + N(0, v/n) ∈ [0, 1]).
        let b = make_rounded_data(400, &RoundedSettings::default(), 3).unwrap();
        let q = exact_posterior_quadrature(&b.model, &b.data, &b.prior, &b.weight, &GridSpec::uniform(1001)).unwrap();
        let w: Vec<f64> = b.data.iter_rows().map(|r| r[0]).collect();
        let n = w.len() as f64;
        let mean = w.iter().sum::<f64>() / n;
        let var = w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let sd = (var / n).sqrt();
        let raw: Vec<f64> =
            q.axes.nodes().map(|t| std_normal_mass((-(t[0] - mean)) / sd, (1.0 - (t[0] - mean)) / sd)).collect();
        let want = normalize_density_grid(DensityGrid::new(q.axes.clone(), raw).unwrap()).unwrap();
        for (a, c) in q.values.iter().zip(&want.values) {
            assert!((a - c).abs() < 1e-8, "{a} {c}");
        }
    }

    #[test]
    fn near_asymptotic_rounded_posterior_is_the_limit() {
        // A narrower box keeps the 10⁶-row scans per node affordable.
        let s = RoundedSettings { theta_lower: -1.5, theta_upper: 1.5, ..Default::default() };
        let b = make_rounded_data(1_000_000, &s, 8).unwrap();
        let grid = GridSpec::uniform(513);
        let q = exact_posterior_quadrature(&b.model, &b.data, &b.prior, &b.weight, &grid).unwrap();
        let g = limiting_theta_density(&b.model, &b.prior, &LimitVariant::plugin(), Some(&b.data), &grid).unwrap();
        assert!(l1_grid(&q, &g).unwrap().l1 < 0.02);
    }

    #[test]
    fn spike_prior_dominates() {
        let b = make_rounded_data(200, &RoundedSettings::default(), 1).unwrap();
        let prior = b.prior.with_theta(ThetaPrior::TruncatedGaussian { mean: vec![0.0], sd: vec![1e-3] }).unwrap();
        let q = exact_posterior_quadrature(&b.model, &b.data, &prior, &b.weight, &GridSpec::default()).unwrap();
        let h = q.axes.cell_volume();
        let near: f64 = q.axes.nodes().zip(&q.values).filter(|(t, _)| t[0].abs() <= h * 1.01).map(|(_, v)| v * h).sum();
        assert!(near > 0.9, "{near}");
    }

    #[test]
    fn two_moment_bundles_integrate() {
        for id in [ExampleId::IntervalReg, ExampleId::MomentIneq] {
            let b = bundle(id, 500, 2).unwrap();
            let q =
                exact_posterior_quadrature(&b.model, &b.data, &b.prior, &b.weight, &GridSpec::uniform(257)).unwrap();
            assert!((q.integral() - 1.0).abs() < 1e-10, "{id}");
        }
    }
}
