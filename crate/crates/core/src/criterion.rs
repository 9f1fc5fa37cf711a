//! The BGMM criterion `R_n`, sample moments, weight matrices and the
//! quasi-posterior log-kernel.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{identity, Cholesky};
use crate::model::{Dataset, MomentModel, Prior};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightMode {
    #[default]
    Identity,
    SampleCovariance,
}

/// Choice of `v`; `ridge` is added to the diagonal.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSpec {
    #[serde(default)]
    pub mode: WeightMode,
    #[serde(default)]
    pub ridge: f64,
}

impl WeightSpec {
    pub fn identity() -> Self {
        Self { mode: WeightMode::Identity, ridge: 0.0 }
    }

    pub fn sample_covariance(ridge: f64) -> Self {
        Self { mode: WeightMode::SampleCovariance, ridge }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(Error::input(format!("weight ridge must be finite and >= 0, got {}", self.ridge)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiskValue<T> {
    pub r_n: T,
    pub quadratic_part: T,
    pub log_det_part: T,
    pub n: usize,
}

fn check_data<T: Scalar>(model: &MomentModel<T>, data: &Dataset<T>) -> Result<()> {
    if data.n() == 0 {
        return Err(Error::input("dataset is empty"));
    }
    if data.dim_w() != model.dim_w() {
        return Err(Error::input(format!(
            "dataset has {} columns, model '{}' expects {}",
            data.dim_w(),
            model.name(),
            model.dim_w()
        )));
    }
    Ok(())
}

fn non_finite(model: &MomentModel<impl Scalar>, row: usize) -> Error {
    Error::ModelEvaluation(format!("model '{}' produced a non-finite moment at data row {}", model.name(), row + 1))
}

/// `m̄(θ) = n⁻¹ Σ m(Wᵢ, θ)`.
pub fn sample_moment<T: Scalar>(model: &MomentModel<T>, data: &Dataset<T>, theta: &[T]) -> Result<Vec<T>> {
    check_data(model, data)?;
    model.check_theta(theta)?;
    let k = model.dim_m();
    let mut sum = vec![T::zero(); k];
    let mut buf = vec![T::zero(); k];
    for (i, w) in data.iter_rows().enumerate() {
        model.moment_into(w, theta, &mut buf);
        for j in 0..k {
            sum[j] = sum[j] + buf[j];
        }
        if buf.iter().any(|v| !v.is_finite()) {
            return Err(non_finite(model, i));
        }
    }
    let n = T::from_count(data.n());
    Ok(sum.into_iter().map(|s| s / n).collect())
}

/// `λ̃(θ) = m̄(θ)`, the unconstrained minimizer of `R_n` over λ.
pub fn lambda_tilde<T: Scalar>(model: &MomentModel<T>, data: &Dataset<T>, theta: &[T]) -> Result<Vec<T>> {
    sample_moment(model, data, theta)
}

/// Sample mean and `v(θ)` from a single pass over the per-row moments.
fn moments_and_weight<T: Scalar>(
    model: &MomentModel<T>,
    data: &Dataset<T>,
    theta: &[T],
    spec: &WeightSpec,
) -> Result<(Vec<T>, Array2<T>)> {
    check_data(model, data)?;
    model.check_theta(theta)?;
    spec.validate()?;
    let k = model.dim_m();
    let n = data.n();
    let nf = T::from_count(n);
    let ridge = T::lit(spec.ridge);
    match spec.mode {
        WeightMode::Identity => {
            let m_bar = sample_moment(model, data, theta)?;
            let mut v = identity(k);
            for j in 0..k {
                v[[j, j]] = v[[j, j]] + ridge;
            }
            Ok((m_bar, v))
        }
        WeightMode::SampleCovariance => {
            // One pass of sums shifted by the first row's moments.
            let mut shift = vec![T::zero(); k];
            model.moment_into(data.row(0), theta, &mut shift);
            let mut buf = vec![T::zero(); k];
            let mut s1 = vec![T::zero(); k];
            let mut s2 = Array2::zeros((k, k));
            for w in data.iter_rows() {
                model.moment_into(w, theta, &mut buf);
                for a in 0..k {
                    let da = buf[a] - shift[a];
                    s1[a] = s1[a] + da;
                    for b in 0..=a {
                        s2[[a, b]] = s2[[a, b]] + da * (buf[b] - shift[b]);
                    }
                }
            }
            if s1.iter().chain(s2.iter()).chain(&shift).any(|v| !v.is_finite()) {
                let bad = data.iter_rows().position(|w| {
                    model.moment_into(w, theta, &mut buf);
                    buf.iter().any(|v| !v.is_finite())
                });
                return Err(match bad {
                    Some(i) => non_finite(model, i),
                    None => Error::numerical("moment sums overflowed"),
                });
            }
            let mean_d: Vec<T> = s1.iter().map(|x| *x / nf).collect();
            let m_bar: Vec<T> = shift.iter().zip(&mean_d).map(|(c, d)| *c + *d).collect();
            let mut v = Array2::zeros((k, k));
            for a in 0..k {
                for b in 0..=a {
                    let x = s2[[a, b]] / nf - mean_d[a] * mean_d[b];
                    v[[a, b]] = x;
                    v[[b, a]] = x;
                }
                v[[a, a]] = v[[a, a]].max(T::zero()) + ridge;
            }
            Ok((m_bar, v))
        }
    }
}

/// The weight matrix `v(θ)`: identity, or the covariance of the per-row
/// moments with divisor n, plus `ridge·I`.
pub fn weight_matrix<T: Scalar>(
    model: &MomentModel<T>,
    data: &Dataset<T>,
    theta: &[T],
    spec: &WeightSpec,
) -> Result<Array2<T>> {
    let (_, v) = moments_and_weight(model, data, theta, spec)?;
    factor_weight(&v, spec)?;
    Ok(v)
}

fn factor_weight<T: Scalar>(v: &Array2<T>, spec: &WeightSpec) -> Result<Cholesky<T>> {
    Cholesky::new(v).map_err(|_| {
        if spec.mode == WeightMode::SampleCovariance && spec.ridge == 0.0 {
            Error::numerical("sample covariance of the moments is singular; set weight.ridge > 0 (e.g. 1e-8)")
        } else {
            Error::numerical("weight matrix is not positive definite")
        }
    })
}

fn risk_with<T: Scalar>(chol: &Cholesky<T>, m_bar: &[T], lambda: &[T], n: usize) -> RiskValue<T> {
    let k = m_bar.len();
    let d: Vec<T> = m_bar.iter().zip(lambda).map(|(m, l)| *m - *l).collect();
    let half = T::lit(0.5);
    let nf = T::from_count(n);
    let quadratic_part = half * chol.quad_form(&d);
    // log|2πv/n| = k·log(2π/n) + log|v|
    let log_det = T::from_count(k) * (T::lit(2.0 * std::f64::consts::PI) / nf).ln() + chol.log_det();
    let log_det_part = half * log_det / nf;
    RiskValue { r_n: quadratic_part + log_det_part, quadratic_part, log_det_part, n }
}

/// `R_n = ½(m̄−λ)ᵀv⁻¹(m̄−λ) + ½n⁻¹ log|2πv/n|`.
pub fn gmm_risk<T: Scalar>(m_bar: &[T], lambda: &[T], v: &Array2<T>, n: usize) -> Result<RiskValue<T>> {
    let k = m_bar.len();
    if lambda.len() != k || v.dim() != (k, k) {
        return Err(Error::input(format!(
            "gmm_risk dimension mismatch: m_bar {k}, lambda {}, v {:?}",
            lambda.len(),
            v.dim()
        )));
    }
    if n == 0 {
        return Err(Error::input("sample size must be positive"));
    }
    let chol = Cholesky::new(v)?;
    Ok(risk_with(&chol, m_bar, lambda, n))
}

/// Everything the criterion needs at a fixed θ: `m̄(θ)`, `v(θ)` and its factor.
#[derive(Debug, Clone)]
pub struct MomentSummary<T> {
    m_bar: Vec<T>,
    v: Array2<T>,
    chol: Cholesky<T>,
    n: usize,
}

impl<T: Scalar> MomentSummary<T> {
    pub fn new(model: &MomentModel<T>, data: &Dataset<T>, theta: &[T], spec: &WeightSpec) -> Result<Self> {
        let (m_bar, v) = moments_and_weight(model, data, theta, spec)?;
        let chol = factor_weight(&v, spec)?;
        Ok(Self { m_bar, v, chol, n: data.n() })
    }

    pub fn m_bar(&self) -> &[T] {
        &self.m_bar
    }

    pub fn v(&self) -> &Array2<T> {
        &self.v
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn risk(&self, lambda: &[T]) -> RiskValue<T> {
        risk_with(&self.chol, &self.m_bar, lambda, self.n)
    }

    /// `−n·R_n(λ, θ)`; `exp` of this is the gaussian density `N(λ; m̄, v/n)`.
    pub fn neg_n_risk(&self, lambda: &[T]) -> T {
        -T::from_count(self.n) * self.risk(lambda).r_n
    }

    /// Conditional standard deviations `sqrt(v_ii / n)` of λ.
    pub fn lambda_sd(&self) -> Vec<T> {
        let nf = T::from_count(self.n);
        (0..self.m_bar.len()).map(|i| (self.v[[i, i]] / nf).sqrt()).collect()
    }
}

/// `−n·R_n + log p(λ, θ)`, or `−∞` off the support.
pub fn quasi_log_kernel<T: Scalar>(
    model: &MomentModel<T>,
    data: &Dataset<T>,
    prior: &Prior<T>,
    lambda: &[T],
    theta: &[T],
    spec: &WeightSpec,
) -> Result<T> {
    if !prior.in_support(lambda, theta)? {
        return Ok(T::neg_infinity());
    }
    let p = prior.prior_density(lambda, theta)?;
    if !(p > T::zero()) {
        return Ok(T::neg_infinity());
    }
    let s = MomentSummary::new(model, data, theta, spec)?;
    Ok(s.neg_n_risk(lambda) + p.ln())
}
