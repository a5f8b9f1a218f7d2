//! Strict trilinear multi-tensor factorization.

mod sampler;
mod state;

pub use sampler::MtfSampler;
pub(crate) use sampler::{slab_variance, MaskKind, ViewCache};
pub use state::{
    activity_mean, classify_components, component_structure, log_joint, training_sse,
    ComponentStructure, MtfState,
};
pub(crate) use state::merge_activity;
