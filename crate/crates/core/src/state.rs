//! Chain state, stored draws, and selection reports.

use crate::scalar::Scalar;
use nalgebra::DVector;
use std::collections::BTreeMap;

/// A model is the sorted set of active group indices (0-based).
pub type Model = Vec<usize>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Gibbs,
    Neuronized,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::Gibbs => "gibbs",
            Engine::Neuronized => "neuronized",
        }
    }
}

/// How a chain is initialized.
#[derive(Debug, Clone)]
pub enum InitPolicy {
    /// Activate `n_active` distinct groups chosen uniformly at random
    /// (capped at r). The default activates three.
    RandomActive { n_active: usize },
    /// Start from an explicit activation pattern.
    FixedModel { z: Vec<bool> },
}

impl Default for InitPolicy {
    fn default() -> Self {
        InitPolicy::RandomActive { n_active: 3 }
    }
}

/// Full latent state of one chain.
///
/// `alpha` and `w` are populated by the neuronized engine only; the Gibbs
/// engine carries the coefficient vector and indicators directly.
#[derive(Debug, Clone)]
pub struct ChainState<T: Scalar> {
    pub beta: DVector<T>,
    pub z: Vec<bool>,
    pub y: DVector<T>,
    pub s2: DVector<T>,
    pub alpha: Option<DVector<T>>,
    pub w: Option<DVector<T>>,
}

/// Post-burn-in samples of the group indicators (and optionally β).
#[derive(Debug, Clone)]
pub struct PosteriorDraws<T: Scalar> {
    pub z_draws: Vec<Vec<bool>>,
    pub beta_draws: Option<Vec<DVector<T>>>,
    pub seed: u64,
    pub n_burnin: usize,
    pub n_samples: usize,
    pub engine: Engine,
}

impl<T: Scalar> PosteriorDraws<T> {
    pub fn r(&self) -> usize {
        self.z_draws.first().map_or(0, Vec::len)
    }

    /// Count how often each model appears among the stored draws.
    pub fn model_counts(&self) -> BTreeMap<Model, usize> {
        let mut counts = BTreeMap::new();
        for z in &self.z_draws {
            let model: Model = z
                .iter()
                .enumerate()
                .filter_map(|(j, &on)| on.then_some(j))
                .collect();
            *counts.entry(model).or_insert(0) += 1;
        }
        counts
    }
}

/// Options common to both samplers.
#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Store β alongside Z for every retained draw.
    pub store_beta: bool,
    /// Refresh incrementally maintained residuals from scratch every this
    /// many sweeps.
    pub recompute_every: usize,
    /// Dimension above which the structured (n×n) Gaussian sampler replaces
    /// the direct Cholesky draw; `None` compares against n.
    pub fast_sampler_threshold: Option<usize>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            store_beta: false,
            recompute_every: 100,
            fast_sampler_threshold: None,
        }
    }
}

/// Final selection output: inclusion probabilities, the selected set, refit
/// coefficients, and (when truth or a test set is known) evaluation metrics.
#[derive(Debug, Clone)]
pub struct SelectionReport {
    /// Per-group posterior inclusion probabilities.
    pub inclusion_prob: Vec<f64>,
    /// Median-probability model: groups with inclusion probability > 1/2.
    pub selected: Model,
    /// Most frequently visited model.
    pub highest_frequency: Model,
    /// Empirical frequency of every visited model.
    pub model_counts: BTreeMap<Model, usize>,
    /// GLM refit on the selected support, zero elsewhere.
    pub refit_beta: Vec<f64>,
    pub metrics: Option<MetricSet>,
}

/// Group-level selection accuracy plus prediction error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSet {
    pub sensitivity: f64,
    pub specificity: f64,
    pub mcc: f64,
    /// Mean squared prediction error on the test set; `None` without one.
    pub mspe: Option<f64>,
    /// False positives plus false negatives.
    pub n_errors: usize,
}
