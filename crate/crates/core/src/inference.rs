//! From posterior draws to decisions: inclusion probabilities, model
//! selection rules, GLM refitting on the selected support, group-level
//! accuracy metrics, and ROC output.

use crate::design::GroupedDesign;
use crate::dist::{cholesky, sigmoid};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::state::{MetricSet, Model, PosteriorDraws, SelectionReport};
use nalgebra::{DMatrix, DVector};

/// Scale on which the mean squared prediction error is computed.
///
/// `Probability` scores σ(x_iᵀβ̂) against the binary outcome (the Brier
/// score); `Linear` scores the raw linear predictor x_iᵀβ̂ against it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MspeScale {
    #[default]
    Probability,
    Linear,
}

/// Fraction of stored draws with z_j = 1, per group.
pub fn inclusion_probabilities<T: Scalar>(draws: &PosteriorDraws<T>) -> Result<Vec<f64>> {
    if draws.z_draws.is_empty() {
        return Err(Error::EmptyDraws);
    }
    let r = draws.r();
    let mut counts = vec![0usize; r];
    for z in &draws.z_draws {
        for (j, &on) in z.iter().enumerate() {
            if on {
                counts[j] += 1;
            }
        }
    }
    let total = draws.z_draws.len() as f64;
    Ok(counts.into_iter().map(|c| c as f64 / total).collect())
}

/// Median probability model: groups with inclusion probability strictly
/// above 1/2.
pub fn select_median_probability_model(inclusion: &[f64]) -> Model {
    inclusion
        .iter()
        .enumerate()
        .filter_map(|(j, &p)| (p > 0.5).then_some(j))
        .collect()
}

/// The most frequently visited model; ties broken by smaller model size,
/// then lexicographic order.
pub fn select_highest_frequency_model<T: Scalar>(draws: &PosteriorDraws<T>) -> Result<Model> {
    if draws.z_draws.is_empty() {
        return Err(Error::EmptyDraws);
    }
    let counts = draws.model_counts();
    let mut best: Option<(usize, &Model)> = None;
    for (model, &count) in &counts {
        best = Some(match best {
            None => (count, model),
            Some((bc, bm)) => {
                if count > bc
                    || (count == bc && model.len() < bm.len())
                    || (count == bc && model.len() == bm.len() && model < bm)
                {
                    (count, model)
                } else {
                    (bc, bm)
                }
            }
        });
    }
    Ok(best.map(|(_, m)| m.clone()).unwrap_or_default())
}

/// Result of the logistic refit.
#[derive(Debug, Clone)]
pub struct RefitFit<T: Scalar> {
    /// Length-p coefficient vector, zero outside the selected support.
    pub beta: DVector<T>,
    /// Perfect separation was detected and a ridge-stabilized estimate
    /// returned instead of the (divergent) MLE.
    pub separated: bool,
    pub iterations: usize,
}

const IRLS_TOL: f64 = 1e-8;
const IRLS_MAX_ITER: usize = 100;
const SEPARATION_NORM: f64 = 1e3;
const RIDGE_PENALTY: f64 = 1e-4;

/// Maximum-likelihood logistic refit over the columns of the selected
/// groups, by iteratively reweighted least squares; zeros elsewhere.
///
/// On perfect separation (coefficient norm exceeding 10³ with a score that
/// does not vanish) the fit restarts with an L2 penalty of 1e-4 and reports
/// it via [`RefitFit::separated`].
pub fn refit_glm<T: Scalar>(
    design: &GroupedDesign<T>,
    e: &[bool],
    selected: &[usize],
) -> Result<RefitFit<T>> {
    if e.len() != design.n() {
        return Err(Error::DimensionMismatch(format!(
            "response length {} vs n = {}",
            e.len(),
            design.n()
        )));
    }
    let mut cols: Vec<usize> = Vec::new();
    for &j in selected {
        if j >= design.r() {
            return Err(Error::InvalidParameter(format!(
                "selected group {j} out of range (r = {})",
                design.r()
            )));
        }
        cols.extend_from_slice(design.group(j));
    }
    cols.sort_unstable();
    let mut fit = RefitFit {
        beta: DVector::zeros(design.p()),
        separated: false,
        iterations: 0,
    };
    if cols.is_empty() {
        return Ok(fit);
    }

    let n = design.n();
    let k = cols.len();
    let xs = DMatrix::from_fn(n, k, |i, c| design.x()[(i, cols[c])]);
    let ev = DVector::from_fn(n, |i, _| if e[i] { T::one() } else { T::zero() });

    match irls(&xs, &ev, T::zero(), &mut fit.iterations) {
        Some(beta) => {
            for (c, &col) in cols.iter().enumerate() {
                fit.beta[col] = beta[c];
            }
        }
        None => {
            fit.separated = true;
            let beta = irls(&xs, &ev, T::of(RIDGE_PENALTY), &mut fit.iterations)
                .ok_or(Error::IllConditioned { min_pivot: 0.0 })?;
            for (c, &col) in cols.iter().enumerate() {
                fit.beta[col] = beta[c];
            }
        }
    }
    Ok(fit)
}

/// Newton/IRLS iterations with step halving; `None` signals a fit the plain
/// MLE cannot support (separation by the norm rule, a singular system, or
/// iteration exhaustion), which the caller retries with a penalty.
fn irls<T: Scalar>(
    xs: &DMatrix<T>,
    ev: &DVector<T>,
    penalty: T,
    iterations: &mut usize,
) -> Option<DVector<T>> {
    let (n, k) = xs.shape();
    let penalized = penalty > T::zero();
    let objective = |beta: &DVector<T>| -> T {
        let eta = xs * beta;
        let mut ll = T::zero();
        for i in 0..n {
            // log σ(η) if e = 1, log σ(−η) otherwise, in stable form.
            let sign = if ev[i] > T::of(0.5) { T::one() } else { -T::one() };
            let m = sign * eta[i];
            ll -= if m > T::zero() {
                (-m).exp().ln_1p()
            } else {
                -m + m.exp().ln_1p()
            };
        }
        if penalized {
            ll -= T::of(0.5) * penalty * beta.norm_squared();
        }
        ll
    };

    let mut beta: DVector<T> = DVector::zeros(k);
    let mut obj = objective(&beta);
    let max_iter = if penalized { 2 * IRLS_MAX_ITER } else { IRLS_MAX_ITER };
    for _ in 0..max_iter {
        *iterations += 1;
        let eta = xs * &beta;
        let mu = DVector::from_fn(n, |i, _| sigmoid(eta[i]));
        let mut score = xs.tr_mul(&(ev - &mu));
        if penalized {
            score -= &beta * penalty;
        }
        let max_score = score.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
        if max_score < T::of(IRLS_TOL) {
            return Some(beta);
        }
        if !penalized && beta.norm() > T::of(SEPARATION_NORM) {
            return None;
        }
        let mut h = DMatrix::zeros(k, k);
        for c1 in 0..k {
            for c2 in c1..k {
                let mut acc = T::zero();
                for i in 0..n {
                    acc += xs[(i, c1)] * mu[i] * (T::one() - mu[i]) * xs[(i, c2)];
                }
                h[(c1, c2)] = acc;
                h[(c2, c1)] = acc;
            }
        }
        if penalized {
            for c in 0..k {
                h[(c, c)] += penalty;
            }
        }
        let chol = match cholesky(&h) {
            Ok(c) => c,
            Err(_) => return None,
        };
        let mut step = chol.solve(&score);
        let mut improved = false;
        for _ in 0..30 {
            let candidate = &beta + &step;
            let cand_obj = objective(&candidate);
            if cand_obj >= obj || !obj.is_finite() {
                beta = candidate;
                obj = cand_obj;
                improved = true;
                break;
            }
            step *= T::of(0.5);
        }
        if !improved {
            // No ascent direction left at working precision.
            return Some(beta);
        }
    }
    // Out of iterations: usable only under the penalized objective.
    penalized.then_some(beta)
}

/// Group-level confusion metrics plus prediction error on a test set.
///
/// MCC follows the usual product formula and is defined as 0 whenever a
/// marginal factor of the denominator vanishes.
pub fn compute_metrics<T: Scalar>(
    selected: &[usize],
    true_model: &[usize],
    r: usize,
    refit_beta: &DVector<T>,
    test: Option<(&DMatrix<T>, &[bool])>,
    scale: MspeScale,
) -> Result<MetricSet> {
    if r == 0 {
        return Err(Error::InvalidParameter("r must be positive".into()));
    }
    let mut sel = vec![false; r];
    for &j in selected {
        if j >= r {
            return Err(Error::InvalidParameter(format!(
                "selected group {j} out of range"
            )));
        }
        sel[j] = true;
    }
    let mut truth = vec![false; r];
    for &j in true_model {
        if j >= r {
            return Err(Error::InvalidParameter(format!(
                "true group {j} out of range"
            )));
        }
        truth[j] = true;
    }
    let (mut tp, mut tn, mut fp, mut fnr) = (0usize, 0usize, 0usize, 0usize);
    for j in 0..r {
        match (sel[j], truth[j]) {
            (true, true) => tp += 1,
            (false, false) => tn += 1,
            (true, false) => fp += 1,
            (false, true) => fnr += 1,
        }
    }
    let sensitivity = if tp + fnr == 0 {
        0.0
    } else {
        tp as f64 / (tp + fnr) as f64
    };
    let specificity = if tn + fp == 0 {
        0.0
    } else {
        tn as f64 / (tn + fp) as f64
    };
    let mcc = mcc_from_counts(tp, tn, fp, fnr);

    let mspe = match test {
        None => None,
        Some((test_x, e_test)) => {
            if e_test.is_empty() || test_x.nrows() != e_test.len() {
                return Err(Error::DimensionMismatch(format!(
                    "test rows {} vs labels {}",
                    test_x.nrows(),
                    e_test.len()
                )));
            }
            let eta = test_x * refit_beta;
            let mut acc = 0.0;
            for i in 0..e_test.len() {
                let target = if e_test[i] { 1.0 } else { 0.0 };
                let pred = match scale {
                    MspeScale::Probability => sigmoid(eta[i]).as_f64(),
                    MspeScale::Linear => eta[i].as_f64(),
                };
                let d = pred - target;
                acc += d * d;
            }
            Some(acc / e_test.len() as f64)
        }
    };

    Ok(MetricSet {
        sensitivity,
        specificity,
        mcc,
        mspe,
        n_errors: fp + fnr,
    })
}

pub fn mcc_from_counts(tp: usize, tn: usize, fp: usize, fnr: usize) -> f64 {
    let denom_factors = [tp + fp, tp + fnr, tn + fp, tn + fnr];
    if denom_factors.iter().any(|&f| f == 0) {
        return 0.0;
    }
    let num = (tp * tn) as f64 - (fp * fnr) as f64;
    let denom = denom_factors.iter().map(|&f| f as f64).product::<f64>().sqrt();
    num / denom
}

/// ROC curve over descending probability thresholds.
#[derive(Debug, Clone)]
pub struct RocCurve {
    pub thresholds: Vec<f64>,
    pub fpr: Vec<f64>,
    pub tpr: Vec<f64>,
    pub auc: f64,
}

/// Sweep classification thresholds over the predicted probabilities
/// σ(x_iᵀβ̂) of a test set containing both classes; AUC by the trapezoid
/// rule. The endpoints (0,0) and (1,1) are always present.
pub fn roc_curve<T: Scalar>(
    refit_beta: &DVector<T>,
    test_x: &DMatrix<T>,
    e_test: &[bool],
) -> Result<RocCurve> {
    if test_x.nrows() != e_test.len() {
        return Err(Error::DimensionMismatch(format!(
            "test rows {} vs labels {}",
            test_x.nrows(),
            e_test.len()
        )));
    }
    let pos = e_test.iter().filter(|&&v| v).count();
    let neg = e_test.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClassTestSet);
    }

    let eta = test_x * refit_beta;
    let probs: Vec<f64> = eta.iter().map(|&v| sigmoid(v).as_f64()).collect();
    let mut thresholds: Vec<f64> = probs.clone();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    thresholds.insert(0, f64::INFINITY);

    let mut fpr = Vec::with_capacity(thresholds.len());
    let mut tpr = Vec::with_capacity(thresholds.len());
    for &t in &thresholds {
        let mut tp = 0usize;
        let mut fp = 0usize;
        for (i, &p) in probs.iter().enumerate() {
            if p >= t {
                if e_test[i] {
                    tp += 1;
                } else {
                    fp += 1;
                }
            }
        }
        tpr.push(tp as f64 / pos as f64);
        fpr.push(fp as f64 / neg as f64);
    }

    let mut auc = 0.0;
    for i in 1..thresholds.len() {
        auc += (fpr[i] - fpr[i - 1]) * (tpr[i] + tpr[i - 1]) / 2.0;
    }

    Ok(RocCurve {
        thresholds,
        fpr,
        tpr,
        auc,
    })
}

/// Full selection pipeline: inclusion probabilities, both model selection
/// rules, the GLM refit on the median-probability model, and (when a test
/// set or the truth is supplied) metrics.
pub fn selection_report<T: Scalar>(
    draws: &PosteriorDraws<T>,
    design: &GroupedDesign<T>,
    e: &[bool],
    true_model: Option<&[usize]>,
    test: Option<(&DMatrix<T>, &[bool])>,
    scale: MspeScale,
) -> Result<(SelectionReport, RefitFit<T>)> {
    let inclusion = inclusion_probabilities(draws)?;
    let selected = select_median_probability_model(&inclusion);
    let highest = select_highest_frequency_model(draws)?;
    let fit = refit_glm(design, e, &selected)?;
    let metrics = match true_model {
        Some(truth) => Some(compute_metrics(
            &selected,
            truth,
            design.r(),
            &fit.beta,
            test,
            scale,
        )?),
        None => None,
    };
    let report = SelectionReport {
        inclusion_prob: inclusion,
        selected,
        highest_frequency: highest,
        model_counts: draws.model_counts(),
        refit_beta: fit.beta.iter().map(|v| v.as_f64()).collect(),
        metrics,
    };
    Ok((report, fit))
}
