//! Bayesian factorization of matrices and 3-way tensors coupled on their
//! first (sample) mode.
//!
//! Two Gibbs samplers are provided: [`mtf`] for the strict trilinear (CP)
//! model with spike-and-slab component selection, and [`rmtf`] for the
//! relaxed model whose per-slab loadings are shrunk toward the trilinear
//! mean. Everything is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix `f64`.

pub mod chain;
pub mod data;
pub mod diag;
pub mod dist;
pub mod error;
pub mod io;
mod kernels;
pub mod linalg;
pub mod mtf;
pub mod predict;
pub mod rmtf;
pub mod scalar;
pub mod simgen;
mod spike;

pub use chain::{
    run_chain, run_chains, GibbsSampler, HyperParams, LambdaMode, NoisePrior, PosteriorSamples,
    Schedule, SweepRecord, Trace,
};
pub use data::{Collection, MaskedTensor3, PreprocessTransform, ScaleMode, Tensor3, View};
pub use dist::RngStream;
pub use error::{Error, Result};
pub use linalg::Mat;
pub use mtf::{MtfSampler, MtfState};
pub use rmtf::{RmtfSampler, RmtfState};
pub use scalar::Scalar;

pub type Tensor = Tensor3<f64>;
pub type MaskedTensor = MaskedTensor3<f64>;
pub type Views = Collection<f64>;
pub type Matrix = Mat<f64>;
pub type Hypers = HyperParams<f64>;
pub type MtfStateF64 = MtfState<f64>;
pub type RmtfStateF64 = RmtfState<f64>;
