use std::sync::Arc;

use qpost::criterion::{lambda_tilde, WeightSpec};
use qpost::diagnostics::exact_posterior_quadrature;
use qpost::grid::GridSpec;
use qpost::limit::{limiting_theta_density, LimitVariant};
use qpost::model::{LambdaRegion, ParamBox};
use qpost::region::estimate_region;
use qpost::{Dataset32, DensityGrid64, MomentModel32, Prior32, RegionGrid32};

fn rounded32() -> (MomentModel32, Prior32, Dataset32) {
    let tb = ParamBox::new(vec![-3.0f32], vec![3.0]).unwrap();
    let lb = ParamBox::new(vec![0.0f32], vec![1.0]).unwrap();
    let model = MomentModel32::new(
        "rounded32",
        1,
        tb.clone(),
        LambdaRegion::boxed(lb.clone()),
        Arc::new(|w: &[f32], t: &[f32], out: &mut [f32]| out[0] = t[0] - w[0]),
    )
    .unwrap();
    let prior = Prior32::flat(tb, LambdaRegion::boxed(lb), None).unwrap();
    let w: Vec<f32> = (0..400).map(|i| [-2.0f32, -1.0, 0.0, 1.0][i % 4]).collect();
    (model, prior, Dataset32::from_column("w", &w).unwrap())
}

#[test]
fn f32_pipeline_matches_hand_computation() {
    let (model, prior, data) = rounded32();
    // W̄ = -1/2, so λ̃(θ) = θ + 1/2 and the estimated region is [-1/2, 1/2].
    let lt = lambda_tilde(&model, &data, &[0.25f32]).unwrap();
    assert!((lt[0] - 0.75).abs() < 1e-6);
    let region: RegionGrid32 = estimate_region(&model, &data, &GridSpec::uniform(601)).unwrap();
    let (lo, hi) = region.bounding_box().unwrap();
    assert!((lo[0] + 0.5).abs() < 0.011 && (hi[0] - 0.5).abs() < 0.011, "{lo:?} {hi:?}");
    let g =
        limiting_theta_density(&model, &prior, &LimitVariant::plugin(), Some(&data), &GridSpec::uniform(601)).unwrap();
    assert!((g.integral() - 1.0).abs() < 1e-5);
    assert!((g.density_at(&[0.0]) - 1.0).abs() < 0.03);
}

#[test]
fn f32_and_f64_quadrature_posteriors_agree() {
    let (model, prior, data) = rounded32();
    let spec = WeightSpec::sample_covariance(0.0);
    let grid = GridSpec::uniform(301);
    let q32 = exact_posterior_quadrature(&model, &data, &prior, &spec, &grid).unwrap();
    let b = qpost::examples::make_rounded_data(
        2,
        &qpost::examples::RoundedSettings { theta_lower: -3.0, theta_upper: 3.0, ..Default::default() },
        0,
    )
    .unwrap();
    let data64 = data.rows().mapv(|v| v as f64);
    let data64 = qpost::Dataset64::new(data64, vec!["w".into()]).unwrap();
    let q64: DensityGrid64 = exact_posterior_quadrature(&b.model, &data64, &b.prior, &spec, &grid).unwrap();
    let worst = q32.values.iter().zip(&q64.values).map(|(a, c)| (*a as f64 - c).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-3, "{worst}");
}
