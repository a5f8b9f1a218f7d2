//! Relaxed multi-tensor factorization: per-slab loadings shrunk toward the
//! trilinear mean with a learned precision `λ`.

mod sampler;
mod state;

pub use sampler::RmtfSampler;
pub use state::{LambdaIndex, RmtfState};

#[cfg(test)]
mod tests;
