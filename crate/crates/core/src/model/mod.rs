//! Parameter spaces, moment models, priors and datasets.

mod dataset;
mod moment;
mod prior;
mod space;

pub use dataset::Dataset;
pub use moment::{DataGenerator, MomentFn, MomentModel, PopulationFn};
pub use prior::{LambdaPrior, Prior, ThetaPrior};
pub(crate) use space::euclidean;
pub use space::{LambdaKind, LambdaRegion, ParamBox};
