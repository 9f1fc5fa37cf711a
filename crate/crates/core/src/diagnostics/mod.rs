//! Distances between posteriors and limits, a quadrature posterior oracle,
//! numerical probes of the regularity conditions and inequality checks.

mod conditions;
mod distance;
mod lemmas;
mod posterior;

pub use conditions::{check_condition, ConditionInputs, ConditionReport, ConditionSettings, TraceEntry};
pub use distance::{default_bins, l1_grid, l1_samples_vs_grid, BootstrapOptions, DistanceMethod, DistanceResult};
pub use lemmas::{lemma_property_check, Lemma, LemmaReport};
pub use posterior::{exact_posterior_quadrature, SD_SPAN};

/// Serializes non-finite reals as `null`.
pub(crate) mod finite_or_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}
