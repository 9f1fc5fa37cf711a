use std::fmt;
use std::sync::Arc;

use super::dataset::Dataset;
use super::space::{LambdaRegion, ParamBox};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `m(w, θ)` written into a caller-provided buffer of length `dim_m`.
pub type MomentFn<T> = Arc<dyn Fn(&[T], &[T], &mut [T]) + Send + Sync>;

/// Known population moment `Em(θ)` written into a buffer of length `dim_m`.
pub type PopulationFn<T> = Arc<dyn Fn(&[T], &mut [T]) + Send + Sync>;

/// Seeded synthetic data source: `(n, seed) -> Dataset`.
pub type DataGenerator<T> = Arc<dyn Fn(usize, u64) -> Result<Dataset<T>> + Send + Sync>;

/// A moment-condition model `Em(W, θ) − λ = 0`, `λ ∈ Λ`, `θ ∈ Θ`.
#[derive(Clone)]
pub struct MomentModel<T> {
    name: String,
    dim_w: usize,
    theta_box: ParamBox<T>,
    lambda_region: LambdaRegion<T>,
    moment_fn: MomentFn<T>,
    population: Option<PopulationFn<T>>,
}

impl<T> fmt::Debug for MomentModel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MomentModel")
            .field("name", &self.name)
            .field("dim_w", &self.dim_w)
            .field("has_population", &self.population.is_some())
            .finish_non_exhaustive()
    }
}

impl<T: Scalar> MomentModel<T> {
    pub fn new(
        name: impl Into<String>,
        dim_w: usize,
        theta_box: ParamBox<T>,
        lambda_region: LambdaRegion<T>,
        moment_fn: MomentFn<T>,
    ) -> Result<Self> {
        if dim_w == 0 {
            return Err(Error::input("observation dimension must be positive"));
        }
        Ok(Self { name: name.into(), dim_w, theta_box, lambda_region, moment_fn, population: None })
    }

    pub fn with_population(mut self, population: PopulationFn<T>) -> Self {
        self.population = Some(population);
        self
    }

    pub fn without_population(mut self) -> Self {
        self.population = None;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim_w(&self) -> usize {
        self.dim_w
    }

    pub fn dim_theta(&self) -> usize {
        self.theta_box.dim()
    }

    pub fn dim_m(&self) -> usize {
        self.lambda_region.dim()
    }

    pub fn theta_box(&self) -> &ParamBox<T> {
        &self.theta_box
    }

    pub fn lambda_region(&self) -> &LambdaRegion<T> {
        &self.lambda_region
    }

    pub fn has_population(&self) -> bool {
        self.population.is_some()
    }

    pub(crate) fn check_theta(&self, theta: &[T]) -> Result<()> {
        if theta.len() != self.dim_theta() {
            return Err(Error::input(format!(
                "theta has {} entries, model '{}' expects {}",
                theta.len(),
                self.name,
                self.dim_theta()
            )));
        }
        if !self.theta_box.contains(theta) {
            return Err(Error::input(format!("theta {theta:?} lies outside the parameter box")));
        }
        Ok(())
    }

    /// Unchecked per-row evaluation for hot loops; callers validate θ once.
    #[inline]
    pub(crate) fn moment_into(&self, w: &[T], theta: &[T], out: &mut [T]) {
        (self.moment_fn)(w, theta, out)
    }

    /// `m(w, θ)` for one observation row.
    pub fn evaluate_moment(&self, w: &[T], theta: &[T]) -> Result<Vec<T>> {
        if w.len() != self.dim_w {
            return Err(Error::input(format!(
                "observation has {} entries, model '{}' expects {}",
                w.len(),
                self.name,
                self.dim_w
            )));
        }
        self.check_theta(theta)?;
        let mut out = vec![T::zero(); self.dim_m()];
        self.moment_into(w, theta, &mut out);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::ModelEvaluation(format!(
                "model '{}' produced a non-finite moment at theta {theta:?}",
                self.name
            )));
        }
        Ok(out)
    }

    /// `λ(θ) = Em(θ)` from the model's population oracle.
    pub fn population_moment(&self, theta: &[T]) -> Result<Vec<T>> {
        let pop = self
            .population
            .as_ref()
            .ok_or_else(|| Error::unsupported(format!("model '{}' carries no population moment oracle", self.name)))?;
        self.check_theta(theta)?;
        let mut out = vec![T::zero(); self.dim_m()];
        pop(theta, &mut out);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::ModelEvaluation(format!(
                "population oracle of '{}' is non-finite at theta {theta:?}",
                self.name
            )));
        }
        Ok(out)
    }
}
