//! The differentiable additive architecture: gates, kernel-smoothed bin
//! embeddings, per-term subnetworks and their exact gradients.

mod gate;
mod kernel;
mod mlp;
mod model;
mod term;

pub use gate::{smooth_step, smooth_step_grad, Gate};
pub use kernel::{kernel_weights, pair_smoothed_embedding, smoothed_embedding, EmbeddingTable, KernelConfig};
pub use mlp::{Activation, MlpCache, MlpShape};
pub use model::{AdditiveModel, GatePenalty, Gradients, Objective, TermGrad};
pub use term::{monotone_output, Architecture, Term, TermEval, TermKey};
