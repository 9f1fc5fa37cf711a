use approx::assert_relative_eq;
use ndarray::Array2;
use proptest::prelude::*;

use qpost::criterion::gmm_risk;
use qpost::diagnostics::l1_grid;
use qpost::examples::{bundle, ExampleId};
use qpost::grid::{GridAxes, GridSpec};
use qpost::limit::{normalize_density_grid, DensityGrid};
use qpost::model::{LambdaPrior, LambdaRegion, ParamBox, Prior, ThetaPrior};
use qpost::region::{estimate_region, region_symmetric_difference};

fn region_strategy() -> impl Strategy<Value = LambdaRegion<f64>> {
    prop_oneof![
        Just(LambdaRegion::nonneg_orthant(2).unwrap()),
        Just(LambdaRegion::ordered_cone()),
        Just(LambdaRegion::boxed(ParamBox::new(vec![-0.5, 0.0], vec![1.0, 2.0]).unwrap())),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn density_vanishes_off_support(
        region in region_strategy(),
        l in prop::array::uniform2(-3.0f64..3.0),
        t in -3.0f64..3.0,
    ) {
        let tb = ParamBox::new(vec![-2.0], vec![2.0]).unwrap();
        let bounds = ParamBox::new(vec![-1.0, -1.0], vec![2.5, 2.5]).unwrap();
        let prior = Prior::new(
            tb,
            region,
            ThetaPrior::TruncatedGaussian { mean: vec![0.3], sd: vec![0.8] },
            LambdaPrior::Flat { bounds: Some(bounds) },
        ).unwrap();
        let p = prior.prior_density(&l, &[t]).unwrap();
        prop_assert!(p >= 0.0);
        if !prior.in_support(&l, &[t]).unwrap() {
            prop_assert_eq!(p, 0.0);
        }
    }

    #[test]
    fn uniform_prior_is_reciprocal_volume(l in 0.0f64..1.0, t in prop::array::uniform2(0.0f64..1.0)) {
        let tb = ParamBox::new(vec![0.0, -1.0], vec![2.0, 1.5]).unwrap();
        let lb = ParamBox::new(vec![0.0], vec![1.0]).unwrap();
        let prior = Prior::flat(tb, LambdaRegion::boxed(lb), None).unwrap();
        let p = prior.prior_density(&[l], &[t[0], t[1] - 0.5]).unwrap();
        assert_relative_eq!(p, 1.0 / (2.0 * 2.5), max_relative = 1e-12);
    }

    #[test]
    fn moments_repeat_bitwise(u in 0.0f64..1.0, row in 0usize..200) {
        for id in ExampleId::ALL {
            let b = bundle(id, 200, 1).unwrap();
            let tb = b.model.theta_box();
            let t = [tb.lower()[0] + u * tb.width(0)];
            let w = b.data.row(row);
            let a = b.model.evaluate_moment(w, &t).unwrap();
            let c = b.model.evaluate_moment(w, &t).unwrap();
            prop_assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), c.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        }
    }

    #[test]
    fn risk_splits_into_its_parts(
        m in prop::array::uniform2(-2.0f64..2.0),
        l in prop::array::uniform2(-2.0f64..2.0),
        a in 0.1f64..2.0, c in 0.1f64..2.0, rho in -0.9f64..0.9,
        n in 2usize..5000,
    ) {
        let off = rho * (a * c).sqrt();
        let v = Array2::from_shape_vec((2, 2), vec![a, off, off, c]).unwrap();
        let r = gmm_risk(&m, &l, &v, n).unwrap();
        prop_assert!(r.quadratic_part >= 0.0);
        assert_relative_eq!(r.r_n, r.quadratic_part + r.log_det_part, max_relative = 1e-12);
        // Closed form of the 2x2 inverse.
        let det = a * c - off * off;
        let (d0, d1) = (m[0] - l[0], m[1] - l[1]);
        let quad = 0.5 * (c * d0 * d0 - 2.0 * off * d0 * d1 + a * d1 * d1) / det;
        assert_relative_eq!(r.quadratic_part, quad, max_relative = 1e-10, epsilon = 1e-14);
        let nf = n as f64;
        let log_det = 0.5 / nf * ((2.0 * std::f64::consts::PI / nf).powi(2) * det).ln();
        assert_relative_eq!(r.log_det_part, log_det, max_relative = 1e-10);
    }

    #[test]
    fn grid_distance_is_a_bounded_metric(
        f in prop::collection::vec(0.0f64..5.0, 65),
        g in prop::collection::vec(0.0f64..5.0, 65),
        h in prop::collection::vec(0.0f64..5.0, 65),
    ) {
        let axes = GridAxes::uniform(&ParamBox::new(vec![0.0], vec![1.0]).unwrap(), &GridSpec::uniform(65)).unwrap();
        let norm = |v: Vec<f64>| {
            let mut v = v;
            v[32] += 1.0;
            normalize_density_grid(DensityGrid::new(axes.clone(), v).unwrap()).unwrap()
        };
        let (f, g, h) = (norm(f), norm(g), norm(h));
        let fg = l1_grid(&f, &g).unwrap().l1;
        prop_assert!((0.0..=2.0).contains(&fg));
        prop_assert_eq!(fg, l1_grid(&g, &f).unwrap().l1);
        prop_assert_eq!(l1_grid(&f, &f).unwrap().l1, 0.0);
        let (fh, hg) = (l1_grid(&f, &h).unwrap().l1, l1_grid(&h, &g).unwrap().l1);
        prop_assert!(fg <= fh + hg + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn symmetric_difference_is_a_metric(s1 in 0u64..1000, s2 in 0u64..1000, s3 in 0u64..1000) {
        let grid = GridSpec::uniform(401);
        let est = |s| {
            let b = bundle(ExampleId::MomentIneq, 60, s).unwrap();
            estimate_region(&b.model, &b.data, &grid).unwrap()
        };
        let (a, b, c) = (est(s1), est(s2), est(s3));
        let ab = region_symmetric_difference(&a, &b).unwrap();
        prop_assert_eq!(ab, region_symmetric_difference(&b, &a).unwrap());
        prop_assert_eq!(region_symmetric_difference(&a, &a).unwrap(), 0.0);
        let (ac, cb) = (region_symmetric_difference(&a, &c).unwrap(), region_symmetric_difference(&c, &b).unwrap());
        prop_assert!(ab <= ac + cb + 1e-12);
    }
}
