//! Neural additive models over binned features with kernel-smoothed bin
//! embeddings, smooth-step feature gates, and survival support.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below pin the common double-precision instantiation.

pub mod data;
pub mod error;
pub mod explain;
pub mod metrics;
pub mod nn;
pub mod scalar;
pub mod selection;
pub mod survival;
pub mod task;
pub mod train;

pub use error::{Error, ErrorClass, Result};
pub use scalar::Scalar;
pub use task::Task;

pub type Ensemble = train::EnsembleModel<f64>;
pub type Ensemble32 = train::EnsembleModel<f32>;
pub type SplitModel = train::SingleSplitModel<f64>;
pub type Model = nn::AdditiveModel<f64>;
