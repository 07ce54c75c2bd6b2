//! Bayesian group selection for high-dimensional logistic regression with
//! group spike-and-slab priors.
//!
//! The crate provides:
//!
//! - two MCMC engines over the same posterior: a standard Gibbs sampler with
//!   marginalized group indicators ([`gibbs`]) and a neuronized
//!   reparameterization that removes explicit indicator variables
//!   ([`neuronized`]);
//! - the latent-variable logistic representation via a t₇.₃ scale mixture of
//!   normals ([`dist`]);
//! - a synthetic-experiment generator ([`simulate`]);
//! - selection, refitting, metrics, and ROC output ([`inference`]);
//! - exact-enumeration oracles and theory-condition diagnostics ([`oracle`]).
//!
//! The numeric core is generic over the scalar type via [`scalar::Scalar`];
//! `f64` aliases are exported at the crate root.

pub mod design;
pub mod dist;
pub mod error;
pub mod gibbs;
pub mod hyper;
pub mod inference;
pub mod neuronized;
pub mod oracle;
pub mod scalar;
pub mod simulate;
pub mod state;

pub use design::{validate_design, GroupedDesign};
pub use dist::{derive_seed, rng_from_seed, Rng};
pub use error::{Error, Result};
pub use hyper::Hyperparams;
pub use scalar::Scalar;
pub use state::{ChainState, Engine, InitPolicy, MetricSet, Model, PosteriorDraws, RunOptions, SelectionReport};

/// Concrete `f64` aliases for the generic core types.
pub type GroupedDesignF64 = GroupedDesign<f64>;
pub type HyperparamsF64 = Hyperparams<f64>;
pub type ChainStateF64 = ChainState<f64>;
pub type PosteriorDrawsF64 = PosteriorDraws<f64>;
pub type SimConfigF64 = simulate::SimConfig<f64>;
pub type SimDatasetF64 = simulate::SimDataset<f64>;

/// Concrete `f32` aliases.
pub type GroupedDesignF32 = GroupedDesign<f32>;
pub type HyperparamsF32 = Hyperparams<f32>;
pub type ChainStateF32 = ChainState<f32>;
pub type PosteriorDrawsF32 = PosteriorDraws<f32>;
