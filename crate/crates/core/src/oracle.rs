//! Independent correctness oracles and theory-condition reports.
//!
//! With the latent responses and mixture precisions held fixed, the
//! conditional model over (Z, β) is exactly Gaussian linear-model selection,
//! where the marginal likelihood of every model is available in closed form.
//! Enumerating all 2^r models gives an exact posterior against which either
//! engine's model-moving kernel can be checked.

use crate::design::GroupedDesign;
use crate::dist::{cholesky, rng_from_seed, sigmoid};
use crate::error::{Error, Result};
use crate::gibbs::GibbsChain;
use crate::hyper::Hyperparams;
use crate::neuronized::NeuronizedChain;
use crate::scalar::Scalar;
use crate::simulate::SimDataset;
use crate::state::{Engine, InitPolicy, Model, PosteriorDraws};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use std::collections::BTreeMap;

/// Enumeration is capped here; beyond it the model count is prohibitive.
pub const MAX_ENUM_GROUPS: usize = 12;

/// Exact posterior over all 2^r models at fixed (Y, W).
#[derive(Debug, Clone)]
pub struct EnumeratedPosterior {
    pub r: usize,
    /// Gaussian log marginal likelihood per model, indexed by bitmask.
    pub log_marginals: Vec<f64>,
    /// Normalized posterior probabilities, indexed by bitmask.
    pub probs: Vec<f64>,
}

impl EnumeratedPosterior {
    pub fn bitmask(model: &[usize]) -> usize {
        model.iter().fold(0usize, |acc, &j| acc | (1 << j))
    }

    pub fn model_of(mask: usize, r: usize) -> Model {
        (0..r).filter(|j| mask & (1 << j) != 0).collect()
    }

    pub fn prob_of(&self, model: &[usize]) -> f64 {
        self.probs[Self::bitmask(model)]
    }
}

/// Exact posterior over models with Y and W frozen: β integrates out in
/// closed form, Y | Z=k ~ N(0, τ² X_{G_k} X_{G_k}ᵀ + W⁻¹).
pub fn enumerate_posterior<T: Scalar>(
    design: &GroupedDesign<T>,
    y_fixed: &DVector<T>,
    w_fixed: &DVector<T>,
    hyper: &Hyperparams<T>,
) -> Result<EnumeratedPosterior> {
    let r = design.r();
    if r > MAX_ENUM_GROUPS {
        return Err(Error::EnumerationTooLarge {
            got: r,
            max: MAX_ENUM_GROUPS,
        });
    }
    if y_fixed.len() != design.n() || w_fixed.len() != design.n() {
        return Err(Error::DimensionMismatch(
            "fixed latents must have length n".into(),
        ));
    }
    if w_fixed.iter().any(|v| !(*v > T::zero())) {
        return Err(Error::InvalidParameter(
            "fixed precisions must be strictly positive".into(),
        ));
    }

    let ln_q = hyper.q.as_f64().ln();
    let ln_1mq = (1.0 - hyper.q.as_f64()).ln();
    let n_models = 1usize << r;
    let mut log_marginals = Vec::with_capacity(n_models);
    let mut log_post = Vec::with_capacity(n_models);
    for mask in 0..n_models {
        let model = EnumeratedPosterior::model_of(mask, r);
        let lm = log_marginal_factored(design, y_fixed, w_fixed, hyper.tau2, &model)?;
        let k = model.len() as f64;
        log_marginals.push(lm);
        log_post.push(lm + k * ln_q + (r as f64 - k) * ln_1mq);
    }

    let max = log_post.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = log_post.iter().map(|l| (l - max).exp()).sum();
    let log_norm = max + sum.ln();
    let probs: Vec<f64> = log_post.iter().map(|l| (l - log_norm).exp()).collect();

    Ok(EnumeratedPosterior {
        r,
        log_marginals,
        probs,
    })
}

/// Log marginal N(y | 0, τ² X_k X_kᵀ + W⁻¹) via the p_k-dimensional inner
/// matrix A = X_kᵀ W X_k + I/τ².
pub fn log_marginal_factored<T: Scalar>(
    design: &GroupedDesign<T>,
    y: &DVector<T>,
    w: &DVector<T>,
    tau2: T,
    model: &[usize],
) -> Result<f64> {
    let n = design.n();
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    let ln_w_sum: f64 = w.iter().map(|v| v.as_f64().ln()).sum();
    let ywy: f64 = (0..n).map(|i| (w[i] * y[i] * y[i]).as_f64()).sum();

    let cols: Vec<usize> = model
        .iter()
        .flat_map(|&j| design.group(j).iter().copied())
        .collect();
    let (ln_det_c, quad) = if cols.is_empty() {
        (-ln_w_sum, ywy)
    } else {
        let k = cols.len();
        let x = design.x();
        let mut a = DMatrix::<T>::zeros(k, k);
        let mut b = DVector::<T>::zeros(k);
        for c1 in 0..k {
            for c2 in c1..k {
                let mut acc = T::zero();
                for i in 0..n {
                    acc += x[(i, cols[c1])] * w[i] * x[(i, cols[c2])];
                }
                a[(c1, c2)] = acc;
                a[(c2, c1)] = acc;
            }
            let mut acc = T::zero();
            for i in 0..n {
                acc += x[(i, cols[c1])] * w[i] * y[i];
            }
            b[c1] = acc;
        }
        let inv_tau2 = T::one() / tau2;
        for c in 0..k {
            a[(c, c)] += inv_tau2;
        }
        let chol = cholesky(&a)?;
        let ln_det_a: f64 = 2.0
            * (0..k)
                .map(|i| chol.l_dirty()[(i, i)].as_f64().ln())
                .sum::<f64>();
        let v = chol
            .l_dirty()
            .solve_lower_triangular(&b)
            .ok_or(Error::IllConditioned { min_pivot: 0.0 })?;
        let reduction = v.norm_squared().as_f64();
        (
            ln_det_a + k as f64 * tau2.as_f64().ln() - ln_w_sum,
            ywy - reduction,
        )
    };
    Ok(-0.5 * n as f64 * ln_2pi - 0.5 * ln_det_c - 0.5 * quad)
}

/// The same quantity through the n×n covariance directly; kept as the second
/// algebraic route for cross-checking.
pub fn log_marginal_direct<T: Scalar>(
    design: &GroupedDesign<T>,
    y: &DVector<T>,
    w: &DVector<T>,
    tau2: T,
    model: &[usize],
) -> Result<f64> {
    let n = design.n();
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();
    let cols: Vec<usize> = model
        .iter()
        .flat_map(|&j| design.group(j).iter().copied())
        .collect();
    let x = design.x();
    let mut c = DMatrix::<T>::zeros(n, n);
    for i in 0..n {
        c[(i, i)] = T::one() / w[i];
    }
    for &col in &cols {
        for i1 in 0..n {
            for i2 in 0..n {
                c[(i1, i2)] += tau2 * x[(i1, col)] * x[(i2, col)];
            }
        }
    }
    let chol = cholesky(&c)?;
    let ln_det: f64 = 2.0
        * (0..n)
            .map(|i| chol.l_dirty()[(i, i)].as_f64().ln())
            .sum::<f64>();
    let u = chol
        .l_dirty()
        .solve_lower_triangular(y)
        .ok_or(Error::IllConditioned { min_pivot: 0.0 })?;
    Ok(-0.5 * n as f64 * ln_2pi - 0.5 * ln_det - 0.5 * u.norm_squared().as_f64())
}

/// Run an engine's model-moving kernel with (Y, W) frozen and return the
/// total-variation distance between its empirical model frequencies and the
/// exact enumerated posterior.
///
/// With zero sweeps the empirical distribution is the point mass at the
/// initial state.
pub fn compare_chain_to_oracle<T: Scalar>(
    engine: Engine,
    design: &GroupedDesign<T>,
    y_fixed: &DVector<T>,
    w_fixed: &DVector<T>,
    hyper: &Hyperparams<T>,
    n_sweeps: usize,
    seed: u64,
) -> Result<f64> {
    let exact = enumerate_posterior(design, y_fixed, w_fixed, hyper)?;
    let mut rng = rng_from_seed(seed);
    let init = InitPolicy::RandomActive {
        n_active: 3.min(design.r()),
    };
    let mut counts = vec![0usize; 1 << design.r()];
    match engine {
        Engine::Gibbs => {
            let mut chain =
                GibbsChain::new_fixed_yw(design, y_fixed, w_fixed, hyper, &init, &mut rng)?;
            if n_sweeps == 0 {
                counts[EnumeratedPosterior::bitmask(&chain.model())] += 1;
            }
            for sweep in 0..n_sweeps {
                chain.sweep(&mut rng).map_err(|e| e.at_sweep(sweep))?;
                counts[EnumeratedPosterior::bitmask(&chain.model())] += 1;
            }
        }
        Engine::Neuronized => {
            let mut chain =
                NeuronizedChain::new_fixed_yw(design, y_fixed, w_fixed, hyper, &init, &mut rng)?;
            if n_sweeps == 0 {
                counts[EnumeratedPosterior::bitmask(&chain.model())] += 1;
            }
            for sweep in 0..n_sweeps {
                chain.sweep(&mut rng).map_err(|e| e.at_sweep(sweep))?;
                counts[EnumeratedPosterior::bitmask(&chain.model())] += 1;
            }
        }
    }
    let total: usize = counts.iter().sum();
    let tv = counts
        .iter()
        .zip(exact.probs.iter())
        .map(|(&c, &p)| (c as f64 / total as f64 - p).abs())
        .sum::<f64>()
        / 2.0;
    Ok(tv)
}

/// Empirical posterior-ratio estimates PR(k, t) from stored draws.
#[derive(Debug, Clone)]
pub struct RatioTrace {
    /// Empirical posterior mass of the true model.
    pub true_prob: f64,
    /// The true model was never visited; every ratio is +∞.
    pub true_visited: bool,
    /// freq(k)/freq(t) for every visited model k ≠ t.
    pub ratios: BTreeMap<Model, f64>,
}

pub fn posterior_ratio_trace<T: Scalar>(
    draws: &PosteriorDraws<T>,
    true_model: &[usize],
) -> Result<RatioTrace> {
    if draws.z_draws.is_empty() {
        return Err(Error::EmptyDraws);
    }
    let counts = draws.model_counts();
    let total = draws.z_draws.len() as f64;
    let mut truth: Model = true_model.to_vec();
    truth.sort_unstable();
    let t_count = counts.get(&truth).copied().unwrap_or(0);
    let mut ratios = BTreeMap::new();
    for (model, &count) in &counts {
        if *model == truth {
            continue;
        }
        let ratio = if t_count == 0 {
            f64::INFINITY
        } else {
            count as f64 / t_count as f64
        };
        ratios.insert(model.clone(), ratio);
    }
    Ok(RatioTrace {
        true_prob: t_count as f64 / total,
        true_visited: t_count > 0,
        ratios,
    })
}

/// Inputs of [`condition_report`].
#[derive(Debug, Clone, Copy)]
pub struct ConditionOptions {
    /// Growth exponent d of the restricted-eigenvalue upper bound.
    pub d: f64,
    /// Effective-dimension exponent d′ with 0 ≤ d < (1+d)/2 ≤ d′ ≤ 1.
    pub d_prime: f64,
    /// Hyperparameter-rule exponent offset δ.
    pub delta: f64,
    /// Random models probed per eigenvalue estimate.
    pub n_probe: usize,
    pub seed: u64,
}

impl Default for ConditionOptions {
    fn default() -> Self {
        ConditionOptions {
            d: 0.0,
            d_prime: 1.0,
            delta: 0.01,
            n_probe: 2000,
            seed: 0,
        }
    }
}

/// Measurable quantities of the regularity conditions, estimated by random
/// probing where exact combinatorial optimization is infeasible.
#[derive(Debug, Clone, Copy)]
pub struct ConditionReport {
    /// Effective dimension m_n = min{(n/log r)^{(1−d′)/2}, p}.
    pub m_n: f64,
    /// Sampled lower estimate of the restricted eigenvalue λ over probed
    /// models (min of λ_min(n⁻¹ H_n(β₀, G_k))).
    pub lambda_hat: f64,
    /// Sampled estimate of Λ (max of λ_max(n⁻¹ X_{G_k}ᵀ X_{G_k})).
    pub lambda_max_hat: f64,
    /// min_{j∈t} ‖β₀_{G_j}‖².
    pub beta_min_lhs: f64,
    /// |G_t| Λ̂_{|t|} log(r)/n, the beta-min reference with c₀ = 1.
    pub beta_min_rhs: f64,
    /// Reported c₀ = lhs/rhs.
    pub c0_ratio: f64,
    /// τ² within three orders of magnitude of (1 ∨ n⁻¹ r^{2+2δ}).
    pub tau2_rule_ok: bool,
    /// q·r within one order of magnitude of 1.
    pub q_rule_ok: bool,
}

pub fn condition_report<T: Scalar>(
    dataset: &SimDataset<T>,
    hyper: &Hyperparams<T>,
    opts: &ConditionOptions,
) -> Result<ConditionReport> {
    if !(0.0 <= opts.d && opts.d < (1.0 + opts.d) / 2.0 && (1.0 + opts.d) / 2.0 <= opts.d_prime
        && opts.d_prime <= 1.0)
    {
        return Err(Error::InvalidParameter(format!(
            "need 0 <= d < (1+d)/2 <= d' <= 1, got d = {}, d' = {}",
            opts.d, opts.d_prime
        )));
    }
    let design = &dataset.design;
    let n = design.n();
    let r = design.r();
    if r < 2 {
        return Err(Error::InvalidParameter("need r >= 2".into()));
    }
    let p = design.p();
    let log_r = (r as f64).ln();
    let m_n = ((n as f64 / log_r).powf((1.0 - opts.d_prime) / 2.0)).min(p as f64);

    let g_t: usize = dataset
        .true_model
        .iter()
        .map(|&j| design.group(j).len())
        .sum();
    let max_group = (0..r).map(|j| design.group(j).len()).max().unwrap_or(1);
    // Guarantee singleton models fit the probe budget.
    let col_budget = ((m_n.floor() as usize) + g_t).max(max_group);

    let mut rng = rng_from_seed(opts.seed);
    let mut order: Vec<usize> = (0..r).collect();
    let mut lambda_hat = f64::INFINITY;
    let mut lambda_max_hat: f64 = 0.0;
    let probe = |model: &[usize], lambda_hat: &mut f64, lambda_max_hat: &mut f64| {
        if model.is_empty() {
            return;
        }
        let lmin = hessian_min_eigen(dataset, model);
        let lmax = gram_max_eigen(design, model);
        *lambda_hat = lambda_hat.min(lmin);
        *lambda_max_hat = lambda_max_hat.max(lmax);
    };
    // Always include the truth and every singleton.
    probe(&dataset.true_model, &mut lambda_hat, &mut lambda_max_hat);
    for j in 0..r {
        probe(&[j], &mut lambda_hat, &mut lambda_max_hat);
    }
    for _ in 0..opts.n_probe {
        order.shuffle(&mut rng);
        let target = rng.random_range(1..=col_budget);
        let mut model = Vec::new();
        let mut used = 0;
        for &j in &order {
            let size = design.group(j).len();
            if used + size <= target {
                model.push(j);
                used += size;
            }
        }
        model.sort_unstable();
        probe(&model, &mut lambda_hat, &mut lambda_max_hat);
    }

    // Λ̂ restricted to models of at most |t| groups, for the beta-min bound.
    let t_groups = dataset.true_model.len().max(1);
    let mut lambda_t_hat = gram_max_eigen(design, &dataset.true_model);
    for _ in 0..opts.n_probe {
        order.shuffle(&mut rng);
        let count = rng.random_range(1..=t_groups);
        let mut model: Vec<usize> = order[..count].to_vec();
        model.sort_unstable();
        lambda_t_hat = lambda_t_hat.max(gram_max_eigen(design, &model));
    }

    let beta_min_lhs = dataset
        .true_model
        .iter()
        .map(|&j| {
            design
                .group(j)
                .iter()
                .map(|&c| dataset.beta0[c].as_f64().powi(2))
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min);
    let beta_min_rhs = g_t as f64 * lambda_t_hat * log_r / n as f64;

    let tau2_target = 1.0f64.max((r as f64).powf(2.0 + 2.0 * opts.delta) / n as f64);
    let tau2_ratio = hyper.tau2.as_f64() / tau2_target;
    let q_ratio = hyper.q.as_f64() * r as f64;

    Ok(ConditionReport {
        m_n,
        lambda_hat,
        lambda_max_hat,
        beta_min_lhs,
        beta_min_rhs,
        c0_ratio: beta_min_lhs / beta_min_rhs,
        tau2_rule_ok: (1e-3..=1e3).contains(&tau2_ratio),
        q_rule_ok: (0.1..=10.0).contains(&q_ratio),
    })
}

/// λ_min(n⁻¹ X_{G_k}ᵀ Σ(β₀_{G_k}) X_{G_k}) with logistic variance weights
/// evaluated at the true coefficients restricted to the model.
fn hessian_min_eigen<T: Scalar>(dataset: &SimDataset<T>, model: &[usize]) -> f64 {
    let design = &dataset.design;
    let n = design.n();
    let cols: Vec<usize> = model
        .iter()
        .flat_map(|&j| design.group(j).iter().copied())
        .collect();
    let x = design.x();
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let mut eta = T::zero();
        for &c in &cols {
            eta += x[(i, c)] * dataset.beta0[c];
        }
        let mu = sigmoid(eta).as_f64();
        weights.push(mu * (1.0 - mu));
    }
    let k = cols.len();
    let mut h = DMatrix::<f64>::zeros(k, k);
    for c1 in 0..k {
        for c2 in c1..k {
            let mut acc = 0.0;
            for i in 0..n {
                acc += x[(i, cols[c1])].as_f64() * weights[i] * x[(i, cols[c2])].as_f64();
            }
            h[(c1, c2)] = acc / n as f64;
            h[(c2, c1)] = h[(c1, c2)];
        }
    }
    h.symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b))
}

/// λ_max(n⁻¹ X_{G_k}ᵀ X_{G_k}).
fn gram_max_eigen<T: Scalar>(design: &GroupedDesign<T>, model: &[usize]) -> f64 {
    let n = design.n();
    let cols: Vec<usize> = model
        .iter()
        .flat_map(|&j| design.group(j).iter().copied())
        .collect();
    let x = design.x();
    let k = cols.len();
    let mut g = DMatrix::<f64>::zeros(k, k);
    for c1 in 0..k {
        for c2 in c1..k {
            let mut acc = 0.0;
            for i in 0..n {
                acc += x[(i, cols[c1])].as_f64() * x[(i, cols[c2])].as_f64();
            }
            g[(c1, c2)] = acc / n as f64;
            g[(c2, c1)] = g[(c1, c2)];
        }
    }
    g.symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(f64::NEG_INFINITY, |a, &b| a.max(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{gen_dataset, Covariance, SignalSetting, SimConfig};
    use crate::state::RunOptions;
    use crate::validate_design;

    fn tiny_dataset(r: usize, n: usize, seed: u64) -> SimDataset<f64> {
        let cfg = SimConfig {
            n,
            r,
            n_active: 1.min(r),
            covariance: Covariance::Isotropic,
            setting: SignalSetting::Constant { value: 2.0 },
            group_size_choices: vec![2],
            n_test: 10,
            seed,
        };
        gen_dataset(&cfg).unwrap()
    }

    fn fixed_latents(n: usize, e: &[bool], w_value: f64) -> (DVector<f64>, DVector<f64>) {
        let y = DVector::from_fn(n, |i, _| if e[i] { 1.0 } else { -1.0 });
        let w = DVector::from_element(n, w_value);
        (y, w)
    }

    #[test]
    fn probabilities_normalize() {
        let ds = tiny_dataset(3, 40, 1);
        let hyper = Hyperparams::<f64>::new(1.0, 0.3, 7.3).unwrap();
        let (y, w) = fixed_latents(40, &ds.e, 1.0);
        let exact = enumerate_posterior(&ds.design, &y, &w, &hyper).unwrap();
        let sum: f64 = exact.probs.iter().sum();
        assert!((sum - 1.0).abs() < 1e-10);
        assert_eq!(exact.probs.len(), 8);
    }

    #[test]
    fn no_information_limit_recovers_prior() {
        // W → 0 carries no data information, so every model keeps its prior
        // mass q^|k| (1−q)^(r−|k|).
        let ds = tiny_dataset(2, 30, 2);
        let q = 0.3;
        let hyper = Hyperparams::<f64>::new(1.0, q, 7.3).unwrap();
        let (y, w) = fixed_latents(30, &ds.e, 1e-14);
        let exact = enumerate_posterior(&ds.design, &y, &w, &hyper).unwrap();
        for mask in 0..4usize {
            let k = mask.count_ones() as f64;
            let want = q.powf(k) * (1.0 - q).powf(2.0 - k);
            assert!(
                (exact.probs[mask] - want).abs() < 1e-6,
                "mask {mask}: {} vs {want}",
                exact.probs[mask]
            );
        }
    }

    #[test]
    fn strong_signal_concentrates_on_generating_group() {
        // y built from group 0 only, n = 200: model {0} dominates.
        let cfg = SimConfig::<f64> {
            n: 200,
            r: 2,
            n_active: 1,
            covariance: Covariance::Isotropic,
            setting: SignalSetting::Constant { value: 1.0 },
            group_size_choices: vec![3],
            n_test: 10,
            seed: 3,
        };
        let ds = gen_dataset(&cfg).unwrap();
        let hyper = Hyperparams::<f64>::new(1.0, 0.5, 7.3).unwrap();
        let mut y = DVector::zeros(200);
        for i in 0..200 {
            let mut eta = 0.0;
            for &c in ds.design.group(0) {
                eta += ds.design.x()[(i, c)] * 1.0;
            }
            y[i] = eta + if ds.e[i] { 0.3 } else { -0.3 };
        }
        let w = DVector::from_element(200, 1.0);
        let exact = enumerate_posterior(&ds.design, &y, &w, &hyper).unwrap();
        assert!(
            exact.prob_of(&[0]) > 0.95,
            "P({{0}}) = {}",
            exact.prob_of(&[0])
        );
    }

    #[test]
    fn factored_and_direct_log_marginals_agree() {
        let ds = tiny_dataset(4, 35, 4);
        let hyper = Hyperparams::<f64>::new(0.8, 0.25, 7.3).unwrap();
        let mut rng = rng_from_seed(5);
        let y = DVector::from_fn(35, |_, _| f64::sample_std_normal(&mut rng));
        let w = DVector::from_fn(35, |_, _| 0.5 + f64::sample_open01(&mut rng));
        for mask in 0..16usize {
            let model = EnumeratedPosterior::model_of(mask, 4);
            let a = log_marginal_factored(&ds.design, &y, &w, hyper.tau2, &model).unwrap();
            let b = log_marginal_direct(&ds.design, &y, &w, hyper.tau2, &model).unwrap();
            assert!(
                (a - b).abs() < 1e-8,
                "mask {mask}: factored {a} vs direct {b}"
            );
        }
    }

    #[test]
    fn enumeration_is_invariant_to_group_relabeling() {
        let ds = tiny_dataset(3, 30, 6);
        let hyper = Hyperparams::<f64>::new(1.0, 0.3, 7.3).unwrap();
        let (y, w) = fixed_latents(30, &ds.e, 1.0);
        let exact = enumerate_posterior(&ds.design, &y, &w, &hyper).unwrap();

        // Same columns, groups listed in reverse order.
        let perm: Vec<usize> = (0..3).rev().collect();
        let groups_perm: Vec<Vec<usize>> = perm.iter().map(|&j| ds.design.group(j).to_vec()).collect();
        let raw = ds.design.x().clone(); // already standardized; re-validation is a no-op rescale
        let design_perm = validate_design(raw, groups_perm).unwrap();
        let exact_perm = enumerate_posterior(&design_perm, &y, &w, &hyper).unwrap();

        for mask in 0..8usize {
            let model = EnumeratedPosterior::model_of(mask, 3);
            let relabeled: Vec<usize> = model
                .iter()
                .map(|&j| perm.iter().position(|&pj| pj == j).unwrap())
                .collect();
            let a = exact.prob_of(&model);
            let b = exact_perm.prob_of(&relabeled);
            assert!((a - b).abs() < 1e-9, "mask {mask}: {a} vs {b}");
        }
    }

    #[test]
    fn enumeration_rejects_large_r() {
        let ds = tiny_dataset(3, 30, 7);
        let hyper = Hyperparams::<f64>::new(1.0, 0.3, 7.3).unwrap();
        let (y, w) = fixed_latents(30, &ds.e, 1.0);
        // Build a 13-group design to trip the cap.
        let cfg = SimConfig::<f64> {
            n: 30,
            r: 13,
            n_active: 1,
            covariance: Covariance::Isotropic,
            setting: SignalSetting::Constant { value: 1.0 },
            group_size_choices: vec![1],
            n_test: 5,
            seed: 8,
        };
        let big = gen_dataset(&cfg).unwrap();
        assert!(matches!(
            enumerate_posterior(&big.design, &DVector::zeros(30), &w, &hyper),
            Err(Error::EnumerationTooLarge { got: 13, max: 12 })
        ));
        // And the small one passes.
        assert!(enumerate_posterior(&ds.design, &y, &w, &hyper).is_ok());
    }

    #[test]
    fn both_engines_match_enumeration_on_a_small_instance() {
        let ds = tiny_dataset(2, 30, 9);
        let hyper = Hyperparams::<f64>::new(1.0, 0.4, 7.3).unwrap();
        let (y, w) = fixed_latents(30, &ds.e, 1.0);
        for engine in [Engine::Gibbs, Engine::Neuronized] {
            let tv =
                compare_chain_to_oracle(engine, &ds.design, &y, &w, &hyper, 30_000, 11).unwrap();
            assert!(tv < 0.03, "{:?}: tv = {tv}", engine);
        }
    }

    #[test]
    fn zero_sweeps_report_initial_point_mass() {
        let ds = tiny_dataset(2, 30, 10);
        let hyper = Hyperparams::<f64>::new(1.0, 0.4, 7.3).unwrap();
        let (y, w) = fixed_latents(30, &ds.e, 1.0);
        let tv =
            compare_chain_to_oracle(Engine::Gibbs, &ds.design, &y, &w, &hyper, 0, 12).unwrap();
        assert!((0.0..=1.0).contains(&tv));
        assert!(tv > 0.5, "point mass should be far from the posterior: {tv}");
    }

    #[test]
    fn ratio_trace_flags_and_concentration() {
        let mut z_draws = vec![vec![true, false, false]; 95];
        z_draws.extend(vec![vec![true, true, false]; 5]);
        let draws = PosteriorDraws::<f64> {
            z_draws,
            beta_draws: None,
            seed: 0,
            n_burnin: 0,
            n_samples: 100,
            engine: Engine::Gibbs,
        };
        let trace = posterior_ratio_trace(&draws, &[0]).unwrap();
        assert!(trace.true_visited);
        assert!((trace.true_prob - 0.95).abs() < 1e-12);
        assert!((trace.ratios[&vec![0usize, 1]] - 5.0 / 95.0).abs() < 1e-12);

        let missed = posterior_ratio_trace(&draws, &[2]).unwrap();
        assert!(!missed.true_visited);
        assert!(missed.ratios.values().all(|v| v.is_infinite()));
    }

    #[test]
    fn condition_report_matches_closed_forms() {
        let cfg = SimConfig::<f64>::preset_design(
            1,
            SignalSetting::Constant { value: 3.0 },
            Covariance::Isotropic,
            13,
        )
        .unwrap();
        let ds = gen_dataset(&cfg).unwrap();
        let hyper = Hyperparams::defaults(100, 50).unwrap();
        let opts = ConditionOptions {
            n_probe: 200,
            ..ConditionOptions::default()
        };
        let rep = condition_report(&ds, &hyper, &opts).unwrap();
        // d' = 1 gives (n/log r)^0 = 1.
        assert!((rep.m_n - 1.0).abs() < 1e-12);
        assert!(rep.lambda_hat <= rep.lambda_max_hat);
        assert!(rep.lambda_hat > 0.0);
        // Setting 4: ‖β₀_{G_j}‖² = 9·|G_j| ≥ 36.
        assert!(rep.beta_min_lhs >= 36.0 - 1e-9);
        assert!(rep.tau2_rule_ok);
        assert!(rep.q_rule_ok);
        assert!(rep.c0_ratio > 0.0);
    }

    #[test]
    fn condition_report_rejects_bad_exponents() {
        let ds = tiny_dataset(3, 30, 14);
        let hyper = Hyperparams::<f64>::new(1.0, 0.3, 7.3).unwrap();
        let opts = ConditionOptions {
            d: 0.9,
            d_prime: 0.2,
            ..ConditionOptions::default()
        };
        assert!(condition_report(&ds, &hyper, &opts).is_err());
    }
}
