//! Sampling and verification tools for the Bayesian linear mixed model with a
//! normal-gamma shrinkage prior on the fixed effects.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod conditionals;
pub mod drift;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod gig;
pub mod io;
pub mod linalg;
pub mod model;
pub mod samplers;
pub mod special;

pub use config::{Config, SamplerConfig, SamplerKind};
pub use error::{Error, Result};
pub use gig::GigParams;
pub use model::{log_unnormalized_posterior, load_model, ChainState, DataPaths, Hyperparameters, MixedModelData, TauVector};
pub use samplers::{run_chain, ChainOutput, Kernel};
