use rand::Rng;

use super::space::{LambdaKind, LambdaRegion, ParamBox};
use crate::error::{Error, Result};
use crate::grid::GridAxes;
use crate::scalar::{std_normal_cdf, std_normal_mass, std_normal_pdf, Scalar};

/// Marginal prior family for θ.
#[derive(Debug, Clone, PartialEq)]
pub enum ThetaPrior<T> {
    /// Uniform on the parameter box.
    Uniform,
    /// Independent gaussians truncated to the box.
    TruncatedGaussian { mean: Vec<T>, sd: Vec<T> },
    /// Node values on a rectangular grid covering the box, interpolated
    /// piecewise-(bi)linearly and renormalized.
    Tabulated { axes: Vec<Vec<T>>, values: Vec<T> },
}

/// Conditional prior family for λ given θ (θ-independent here).
#[derive(Debug, Clone, PartialEq)]
pub enum LambdaPrior<T> {
    /// Constant on `Λ ∩ bounds`. `None` uses the bounds of a box-shaped Λ.
    Flat { bounds: Option<ParamBox<T>> },
    /// Independent gaussians restricted to Λ and renormalized.
    Gaussian { mean: Vec<T>, sd: Vec<T> },
}

#[derive(Debug, Clone)]
enum ThetaState<T> {
    Uniform { density: T },
    Gaussian { mean: Vec<T>, sd: Vec<T>, scale: T },
    Tabulated { grid: GridAxes<T>, values: Vec<T> },
}

#[derive(Debug, Clone)]
enum LambdaState<T> {
    Flat { bounds: ParamBox<T>, density: T },
    Gaussian { mean: Vec<T>, sd: Vec<T>, scale: T },
}

/// Factored prior `p(λ, θ) = p(θ)·p(λ|θ)` supported on `Λ × Θ`.
#[derive(Debug, Clone)]
pub struct Prior<T> {
    theta_box: ParamBox<T>,
    lambda_region: LambdaRegion<T>,
    theta_spec: ThetaPrior<T>,
    lambda_spec: LambdaPrior<T>,
    theta: ThetaState<T>,
    lambda: LambdaState<T>,
}

fn check_gaussian<T: Scalar>(what: &str, dim: usize, mean: &[T], sd: &[T]) -> Result<()> {
    if mean.len() != dim || sd.len() != dim {
        return Err(Error::input(format!(
            "{what} prior needs {dim} means and sds, got {} and {}",
            mean.len(),
            sd.len()
        )));
    }
    if mean.iter().any(|m| !m.is_finite()) || sd.iter().any(|s| !(s.is_finite() && *s > T::zero())) {
        return Err(Error::input(format!("{what} prior needs finite means and positive finite sds")));
    }
    Ok(())
}

impl<T: Scalar> Prior<T> {
    pub fn new(
        theta_box: ParamBox<T>,
        lambda_region: LambdaRegion<T>,
        theta: ThetaPrior<T>,
        lambda: LambdaPrior<T>,
    ) -> Result<Self> {
        let theta_state = Self::build_theta(&theta_box, &theta)?;
        let lambda_state = Self::build_lambda(&lambda_region, &lambda)?;
        Ok(Self {
            theta_box,
            lambda_region,
            theta_spec: theta,
            lambda_spec: lambda,
            theta: theta_state,
            lambda: lambda_state,
        })
    }

    /// Uniform θ and flat λ on a box-shaped Λ (or on `bounds`).
    pub fn flat(theta_box: ParamBox<T>, lambda_region: LambdaRegion<T>, bounds: Option<ParamBox<T>>) -> Result<Self> {
        Self::new(theta_box, lambda_region, ThetaPrior::Uniform, LambdaPrior::Flat { bounds })
    }

    fn build_theta(theta_box: &ParamBox<T>, spec: &ThetaPrior<T>) -> Result<ThetaState<T>> {
        let dim = theta_box.dim();
        match spec {
            ThetaPrior::Uniform => Ok(ThetaState::Uniform { density: T::one() / theta_box.volume() }),
            ThetaPrior::TruncatedGaussian { mean, sd } => {
                check_gaussian("theta", dim, mean, sd)?;
                let mut log_norm = 0.0;
                for i in 0..dim {
                    let (m, s) = (mean[i].as_f64(), sd[i].as_f64());
                    let a = (theta_box.lower()[i].as_f64() - m) / s;
                    let b = (theta_box.upper()[i].as_f64() - m) / s;
                    let mass = std_normal_mass(a, b);
                    if !(mass > 0.0) {
                        return Err(Error::input(format!(
                            "theta prior coordinate {i} puts no mass on the parameter box"
                        )));
                    }
                    log_norm += (mass * s).ln();
                }
                Ok(ThetaState::Gaussian { mean: mean.clone(), sd: sd.clone(), scale: T::lit((-log_norm).exp()) })
            }
            ThetaPrior::Tabulated { axes, values } => {
                if axes.len() != dim {
                    return Err(Error::input(format!("tabulated prior has {} axes, theta has {dim}", axes.len())));
                }
                let grid = GridAxes::from_axes(axes.clone())?;
                if values.len() != grid.len() {
                    return Err(Error::input(format!(
                        "tabulated prior has {} values for {} nodes",
                        values.len(),
                        grid.len()
                    )));
                }
                if values.iter().any(|v| !v.is_finite() || *v < T::zero()) {
                    return Err(Error::input("tabulated prior values must be finite and nonnegative"));
                }
                let tol = T::lit(1e-9);
                for k in 0..dim {
                    let ax = &axes[k];
                    let (lo, hi) = (theta_box.lower()[k], theta_box.upper()[k]);
                    if (ax[0] - lo).abs() > tol * (T::one() + lo.abs())
                        || (ax[ax.len() - 1] - hi).abs() > tol * (T::one() + hi.abs())
                    {
                        return Err(Error::input(format!("tabulated prior axis {k} must span the parameter box")));
                    }
                }
                let total = grid.integrate(values);
                if !(total > T::zero()) {
                    return Err(Error::input("tabulated prior has zero total mass"));
                }
                let values = values.iter().map(|v| *v / total).collect();
                Ok(ThetaState::Tabulated { grid, values })
            }
        }
    }

    fn build_lambda(region: &LambdaRegion<T>, spec: &LambdaPrior<T>) -> Result<LambdaState<T>> {
        let dim = region.dim();
        match spec {
            LambdaPrior::Flat { bounds } => {
                let bounds = match (bounds, region.bounds()) {
                    (Some(b), _) => b.clone(),
                    (None, Some(b)) => b.clone(),
                    (None, None) => {
                        return Err(Error::input("flat lambda prior on an unbounded region needs explicit bounds"))
                    }
                };
                if bounds.dim() != dim {
                    return Err(Error::input(format!(
                        "flat lambda prior bounds have dimension {}, lambda has {dim}",
                        bounds.dim()
                    )));
                }
                let vol = region.volume_within(&bounds);
                if !(vol > T::zero()) || !vol.is_finite() {
                    return Err(Error::input("flat lambda prior support has zero volume"));
                }
                Ok(LambdaState::Flat { bounds, density: T::one() / vol })
            }
            LambdaPrior::Gaussian { mean, sd } => {
                check_gaussian("lambda", dim, mean, sd)?;
                let mut log_norm = 0.0;
                for i in 0..dim {
                    let (m, s) = (mean[i].as_f64(), sd[i].as_f64());
                    let mass = match region.kind() {
                        LambdaKind::Unconstrained => 1.0,
                        LambdaKind::NonnegOrthant => std_normal_cdf(m / s),
                        LambdaKind::Box => {
                            let b = region.bounds().expect("box bounds");
                            std_normal_mass((b.lower()[i].as_f64() - m) / s, (b.upper()[i].as_f64() - m) / s)
                        }
                        LambdaKind::OrderedCone => {
                            return Err(Error::unsupported(
                                "gaussian lambda prior on the ordered cone is not supported; use a flat prior",
                            ))
                        }
                    };
                    if !(mass > 0.0) {
                        return Err(Error::input(format!("lambda prior coordinate {i} puts no mass on the region")));
                    }
                    log_norm += (mass * s).ln();
                }
                Ok(LambdaState::Gaussian { mean: mean.clone(), sd: sd.clone(), scale: T::lit((-log_norm).exp()) })
            }
        }
    }

    pub fn theta_box(&self) -> &ParamBox<T> {
        &self.theta_box
    }

    pub fn lambda_region(&self) -> &LambdaRegion<T> {
        &self.lambda_region
    }

    pub fn theta_spec(&self) -> &ThetaPrior<T> {
        &self.theta_spec
    }

    pub fn lambda_spec(&self) -> &LambdaPrior<T> {
        &self.lambda_spec
    }

    pub fn is_lambda_flat(&self) -> bool {
        matches!(self.lambda, LambdaState::Flat { .. })
    }

    /// Both built-in conditional families carry a closed-form λ-gradient.
    pub fn has_lambda_gradient(&self) -> bool {
        true
    }

    /// Same θ-prior with another conditional λ-prior.
    pub fn with_lambda(&self, lambda: LambdaPrior<T>) -> Result<Self> {
        Self::new(self.theta_box.clone(), self.lambda_region.clone(), self.theta_spec.clone(), lambda)
    }

    /// Same λ-prior with another θ-prior.
    pub fn with_theta(&self, theta: ThetaPrior<T>) -> Result<Self> {
        Self::new(self.theta_box.clone(), self.lambda_region.clone(), theta, self.lambda_spec.clone())
    }

    fn check_dims(&self, lambda: &[T], theta: &[T]) -> Result<()> {
        if lambda.len() != self.lambda_region.dim() || theta.len() != self.theta_box.dim() {
            return Err(Error::input(format!(
                "prior expects (lambda, theta) of dimensions ({}, {}), got ({}, {})",
                self.lambda_region.dim(),
                self.theta_box.dim(),
                lambda.len(),
                theta.len()
            )));
        }
        Ok(())
    }

    /// `I_Ξ(λ, θ)`.
    pub fn in_support(&self, lambda: &[T], theta: &[T]) -> Result<bool> {
        self.check_dims(lambda, theta)?;
        Ok(self.lambda_region.contains(lambda) && self.theta_box.contains(theta))
    }

    /// `p(θ)`; zero outside the box.
    pub fn theta_density(&self, theta: &[T]) -> T {
        if theta.len() != self.theta_box.dim() || !self.theta_box.contains(theta) {
            return T::zero();
        }
        match &self.theta {
            ThetaState::Uniform { density } => *density,
            ThetaState::Gaussian { mean, sd, scale } => {
                let mut d = *scale;
                for i in 0..theta.len() {
                    let z = ((theta[i] - mean[i]) / sd[i]).as_f64();
                    d = d * T::lit(std_normal_pdf(z));
                }
                d
            }
            ThetaState::Tabulated { grid, values } => grid.interpolate(values, theta),
        }
    }

    /// `p(λ|θ)`; zero outside Λ (and outside the flat bounds).
    pub fn lambda_density(&self, lambda: &[T], _theta: &[T]) -> T {
        if !self.lambda_region.contains(lambda) {
            return T::zero();
        }
        match &self.lambda {
            LambdaState::Flat { bounds, density } => {
                if bounds.contains(lambda) {
                    *density
                } else {
                    T::zero()
                }
            }
            LambdaState::Gaussian { mean, sd, scale } => {
                let mut d = *scale;
                for i in 0..lambda.len() {
                    let z = ((lambda[i] - mean[i]) / sd[i]).as_f64();
                    d = d * T::lit(std_normal_pdf(z));
                }
                d
            }
        }
    }

    /// `∂_λ p(λ|θ)` of the smooth extension beyond the support indicator.
    pub fn lambda_gradient(&self, lambda: &[T], _theta: &[T]) -> Vec<T> {
        match &self.lambda {
            LambdaState::Flat { .. } => vec![T::zero(); lambda.len()],
            LambdaState::Gaussian { mean, sd, scale } => {
                let mut d = *scale;
                for i in 0..lambda.len() {
                    let z = ((lambda[i] - mean[i]) / sd[i]).as_f64();
                    d = d * T::lit(std_normal_pdf(z));
                }
                (0..lambda.len()).map(|i| -d * (lambda[i] - mean[i]) / (sd[i] * sd[i])).collect()
            }
        }
    }

    /// `p(θ)·p(λ|θ)·I_Ξ(λ, θ)`.
    pub fn prior_density(&self, lambda: &[T], theta: &[T]) -> Result<T> {
        if !self.in_support(lambda, theta)? {
            return Ok(T::zero());
        }
        Ok(self.theta_density(theta) * self.lambda_density(lambda, theta))
    }

    pub fn log_prior_density(&self, lambda: &[T], theta: &[T]) -> Result<T> {
        Ok(self.prior_density(lambda, theta)?.ln())
    }

    /// One draw from `p(θ)`.
    pub fn sample_theta<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<T>> {
        let b = &self.theta_box;
        match &self.theta {
            ThetaState::Uniform { .. } => {
                Ok((0..b.dim()).map(|i| b.lower()[i] + b.width(i) * T::lit(rng.gen::<f64>())).collect())
            }
            ThetaState::Gaussian { mean, sd, .. } => {
                use statrs::distribution::{ContinuousCDF, Normal};
                let std = Normal::new(0.0, 1.0).expect("standard normal");
                Ok((0..b.dim())
                    .map(|i| {
                        let (m, s) = (mean[i].as_f64(), sd[i].as_f64());
                        let pa = std_normal_cdf((b.lower()[i].as_f64() - m) / s);
                        let pb = std_normal_cdf((b.upper()[i].as_f64() - m) / s);
                        let u = pa + (pb - pa) * rng.gen::<f64>();
                        let x = m + s * std.inverse_cdf(u.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON));
                        T::lit(x).max(b.lower()[i]).min(b.upper()[i])
                    })
                    .collect())
            }
            ThetaState::Tabulated { grid, values } => grid.sample_interpolant(values, rng),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit() -> ParamBox<f64> {
        ParamBox::new(vec![0.0], vec![1.0]).unwrap()
    }

    #[test]
    fn flat_unit_prior() {
        let p = Prior::flat(unit(), LambdaRegion::boxed(unit()), None).unwrap();
        assert_eq!(p.prior_density(&[0.5], &[0.5]).unwrap(), 1.0);
        assert_eq!(p.prior_density(&[-0.1], &[0.5]).unwrap(), 0.0);
        assert!(p.prior_density(&[0.5, 0.1], &[0.5]).is_err());
    }

    #[test]
    fn truncated_gaussian_density() {
        let p = Prior::new(
            ParamBox::new(vec![-5.0], vec![5.0]).unwrap(),
            LambdaRegion::boxed(unit()),
            ThetaPrior::TruncatedGaussian { mean: vec![0.0], sd: vec![1.0] },
            LambdaPrior::Flat { bounds: None },
        )
        .unwrap();
        // φ(1) / (Φ(5) − Φ(−5)), reference values from scipy.stats.norm
        let expected = 0.24197072451914337 / 0.9999994266968562;
        assert!((p.prior_density(&[0.2], &[1.0]).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn support_is_closed() {
        let th = unit();
        let cone =
            Prior::flat(th.clone(), LambdaRegion::ordered_cone(), Some(ParamBox::cube(2, 0.0, 1.0).unwrap())).unwrap();
        assert!(cone.in_support(&[0.2, 0.5], &[0.5]).unwrap());
        assert!(!cone.in_support(&[0.5, 0.2], &[0.5]).unwrap());
        // Triangle of area 1/2 inside the unit square.
        assert!((cone.prior_density(&[0.2, 0.5], &[0.5]).unwrap() - 2.0).abs() < 1e-12);
        let orth =
            Prior::flat(th, LambdaRegion::nonneg_orthant(2).unwrap(), Some(ParamBox::cube(2, -1.0, 1.0).unwrap()))
                .unwrap();
        assert!(orth.in_support(&[0.0, 0.0], &[0.5]).unwrap());
        assert_eq!(orth.prior_density(&[0.5, 0.5], &[0.5]).unwrap(), 1.0);
    }

    #[test]
    fn unbounded_and_degenerate_priors_rejected() {
        let r = LambdaRegion::<f64>::unconstrained(1).unwrap();
        assert!(Prior::flat(unit(), r.clone(), None).is_err());
        let bad = LambdaPrior::Gaussian { mean: vec![0.0], sd: vec![0.0] };
        assert!(Prior::new(unit(), r, ThetaPrior::Uniform, bad).is_err());
        let cone = LambdaPrior::Gaussian { mean: vec![0.0, 0.0], sd: vec![1.0, 1.0] };
        assert!(matches!(
            Prior::new(unit(), LambdaRegion::ordered_cone(), ThetaPrior::Uniform, cone),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn gaussian_lambda_normalized_on_orthant() {
        let p = Prior::new(
            unit(),
            LambdaRegion::nonneg_orthant(1).unwrap(),
            ThetaPrior::Uniform,
            LambdaPrior::Gaussian { mean: vec![0.0], sd: vec![1.0] },
        )
        .unwrap();
        let r = crate::quadrature::integrate(
            |x: f64| p.lambda_density(&[x], &[0.5]),
            0.0,
            40.0,
            &crate::quadrature::QuadOptions::default(),
        );
        assert!((r.value - 1.0).abs() < 1e-9);
        let g = p.lambda_gradient(&[0.7], &[0.5])[0];
        let h = 1e-6;
        let fd = (p.lambda_density(&[0.7 + h], &[0.5]) - p.lambda_density(&[0.7 - h], &[0.5])) / (2.0 * h);
        assert!((g - fd).abs() < 1e-7);
    }

    #[test]
    fn theta_densities_integrate_to_one() {
        let b1 = ParamBox::new(vec![-5.0], vec![5.0]).unwrap();
        let g1 = GridAxes::uniform(&b1, &GridSpec::uniform(2048)).unwrap();
        let tg = Prior::new(
            b1.clone(),
            LambdaRegion::boxed(unit()),
            ThetaPrior::TruncatedGaussian { mean: vec![0.5], sd: vec![0.7] },
            LambdaPrior::Flat { bounds: None },
        )
        .unwrap();
        let vals: Vec<f64> = g1.nodes().map(|t| tg.theta_density(&t)).collect();
        assert!((g1.integrate(&vals) - 1.0).abs() < 1e-6);

        let b2 = ParamBox::new(vec![0.0, -1.0], vec![2.0, 1.0]).unwrap();
        // 7 table cells refine evenly into the 511 check cells.
        let coarse = GridAxes::uniform(&b2, &GridSpec::uniform(8)).unwrap();
        let table: Vec<f64> = coarse.nodes().map(|t: Vec<f64>| 1.0 + t[0] * t[1].abs()).collect();
        let tab = Prior::new(
            b2.clone(),
            LambdaRegion::boxed(unit()),
            ThetaPrior::Tabulated { axes: coarse.axes().to_vec(), values: table },
            LambdaPrior::Flat { bounds: None },
        )
        .unwrap();
        let fine = GridAxes::uniform(&b2, &GridSpec::uniform(512)).unwrap();
        let vals: Vec<f64> = fine.nodes().map(|t| tab.theta_density(&t)).collect();
        let total = fine.integrate(&vals);
        assert!((total - 1.0).abs() < 1e-6, "{total}");
    }

    #[test]
    fn sampled_theta_stays_in_box() {
        let b = ParamBox::new(vec![-1.0, 2.0], vec![1.0, 3.0]).unwrap();
        let p = Prior::new(
            b.clone(),
            LambdaRegion::boxed(unit()),
            ThetaPrior::TruncatedGaussian { mean: vec![0.0, 0.0], sd: vec![1.0, 1.0] },
            LambdaPrior::Flat { bounds: None },
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            assert!(b.contains(&p.sample_theta(&mut rng).unwrap()));
        }
    }
}
