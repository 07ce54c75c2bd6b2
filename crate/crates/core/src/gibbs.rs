//! Standard Gibbs sampler: cycles the latent responses, the mixture scales,
//! and per group the marginalized activation indicator followed by the
//! coefficient block.
//!
//! The indicator update integrates the group coefficients out of the
//! likelihood, so the chain moves between models without reversible-jump
//! machinery. Each group visit performs one Cholesky factorization of the
//! group precision, which yields the log-determinant, the quadratic form,
//! and the coefficient draw; the activation probability is formed entirely
//! in log space.

use crate::design::GroupedDesign;
use crate::dist::{
    bernoulli_from_log_odds, cholesky, rng_from_seed, sample_inverse_gamma,
    sample_truncated_normal,
};
use crate::error::{Error, Result};
use crate::hyper::Hyperparams;
use crate::scalar::Scalar;
use crate::state::{ChainState, Engine, InitPolicy, Model, PosteriorDraws, RunOptions};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// One Gibbs chain with its incremental bookkeeping.
///
/// The fitted-value vector Xβ is maintained incrementally (O(n·|G_j|) per
/// group visit) and refreshed from scratch periodically.
pub struct GibbsChain<'a, T: Scalar> {
    design: &'a GroupedDesign<T>,
    e: Vec<bool>,
    hyper: Hyperparams<T>,
    beta: DVector<T>,
    z: Vec<bool>,
    y: DVector<T>,
    s2: DVector<T>,
    /// Mixture precisions 1/s².
    w: DVector<T>,
    /// Fitted values Xβ.
    xb: DVector<T>,
    /// Cached per-group column blocks.
    xj: Vec<DMatrix<T>>,
    prior_log_odds: T,
    ln_tau2: T,
    /// Frozen-(Y, W) mode: latent responses and scales are never updated.
    fixed_yw: bool,
    sweeps_done: usize,
    recompute_every: usize,
}

impl<'a, T: Scalar> GibbsChain<'a, T> {
    pub fn new<R: Rng + ?Sized>(
        design: &'a GroupedDesign<T>,
        e: &[bool],
        hyper: &Hyperparams<T>,
        init: &InitPolicy,
        rng: &mut R,
    ) -> Result<Self> {
        if e.len() != design.n() {
            return Err(Error::DimensionMismatch(format!(
                "response length {} vs n = {}",
                e.len(),
                design.n()
            )));
        }
        let y = DVector::from_fn(design.n(), |i, _| if e[i] { T::one() } else { -T::one() });
        let s2 = DVector::from_element(design.n(), hyper.prior_scale_mean());
        Self::with_latents(design, e.to_vec(), y, s2, hyper, init, false, rng)
    }

    /// Chain with (Y, W) frozen at the given values; only (Z, β) are updated.
    /// Used by the enumeration oracle to isolate the model-moving kernel.
    pub fn new_fixed_yw<R: Rng + ?Sized>(
        design: &'a GroupedDesign<T>,
        y_fixed: &DVector<T>,
        w_fixed: &DVector<T>,
        hyper: &Hyperparams<T>,
        init: &InitPolicy,
        rng: &mut R,
    ) -> Result<Self> {
        if y_fixed.len() != design.n() || w_fixed.len() != design.n() {
            return Err(Error::DimensionMismatch(format!(
                "fixed latents length {}/{} vs n = {}",
                y_fixed.len(),
                w_fixed.len(),
                design.n()
            )));
        }
        if w_fixed.iter().any(|v| !(*v > T::zero())) {
            return Err(Error::InvalidParameter(
                "fixed precisions must be strictly positive".into(),
            ));
        }
        let e = y_fixed.iter().map(|&v| v >= T::zero()).collect();
        let s2 = DVector::from_fn(design.n(), |i, _| T::one() / w_fixed[i]);
        Self::with_latents(design, e, y_fixed.clone(), s2, hyper, init, true, rng)
    }

    #[allow(clippy::too_many_arguments)]
    fn with_latents<R: Rng + ?Sized>(
        design: &'a GroupedDesign<T>,
        e: Vec<bool>,
        y: DVector<T>,
        s2: DVector<T>,
        hyper: &Hyperparams<T>,
        init: &InitPolicy,
        fixed_yw: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let r = design.r();
        let z = init_model(init, r, rng)?;
        let mut beta = DVector::zeros(design.p());
        for (j, &active) in z.iter().enumerate() {
            if active {
                for &col in design.group(j) {
                    beta[col] = T::of(0.1) * T::sample_std_normal(rng);
                }
            }
        }
        let w = DVector::from_fn(design.n(), |i, _| T::one() / s2[i]);
        let xj: Vec<DMatrix<T>> = (0..r).map(|j| design.group_columns(j)).collect();
        let xb = design.x() * &beta;
        let q = hyper.q;
        Ok(GibbsChain {
            design,
            e,
            hyper: *hyper,
            beta,
            z,
            y,
            s2,
            w,
            xb,
            xj,
            prior_log_odds: (q / (T::one() - q)).ln(),
            ln_tau2: hyper.tau2.ln(),
            fixed_yw,
            sweeps_done: 0,
            recompute_every: 100,
        })
    }

    pub fn set_recompute_every(&mut self, every: usize) {
        self.recompute_every = every.max(1);
    }

    /// Draw each latent response from its truncated normal conditional;
    /// the truncation side is pinned to the observed outcome.
    pub fn step_latent_y<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        for i in 0..self.design.n() {
            let mean = self.xb[i];
            let sd = self.s2[i].sqrt();
            let (lo, hi) = if self.e[i] {
                (T::zero(), T::infinity())
            } else {
                (T::neg_infinity(), T::zero())
            };
            self.y[i] = sample_truncated_normal(mean, sd, lo, hi, rng)?;
        }
        Ok(())
    }

    /// Draw each mixture scale s² from its inverse-gamma conditional with
    /// shape (1+ν)/2 and scale ((y_i − x_iᵀβ)² + σ₀²ν)/2.
    pub fn step_scales<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let shape = (T::one() + self.hyper.nu) / T::of(2.0);
        let prior_term = self.hyper.sigma02 * self.hyper.nu;
        for i in 0..self.design.n() {
            let resid = self.y[i] - self.xb[i];
            let scale = (resid * resid + prior_term) / T::of(2.0);
            let s2 = sample_inverse_gamma(shape, scale, rng)?;
            self.s2[i] = s2;
            self.w[i] = T::one() / s2;
        }
        Ok(())
    }

    /// Residual with group `j` excluded: Y − X_{−G_j} β_{−G_j}.
    fn residual_excluding(&self, j: usize) -> DVector<T> {
        let mut r = DVector::from_fn(self.design.n(), |i, _| self.y[i] - self.xb[i]);
        if self.z[j] {
            let xjm = &self.xj[j];
            let idx = self.design.group(j);
            for i in 0..self.design.n() {
                let mut contrib = T::zero();
                for (c, &col) in idx.iter().enumerate() {
                    contrib += xjm[(i, c)] * self.beta[col];
                }
                r[i] += contrib;
            }
        }
        r
    }

    /// Precision factorization of group `j` given the rest:
    /// A = X_{G_j}ᵀ W X_{G_j} + I/τ² and b = X_{G_j}ᵀ W (Y − X_{−G_j}β_{−G_j}).
    fn group_factorization(
        &self,
        j: usize,
    ) -> Result<(nalgebra::Cholesky<T, nalgebra::Dyn>, DVector<T>)> {
        let xjm = &self.xj[j];
        let g = xjm.ncols();
        let n = self.design.n();
        let rminus = self.residual_excluding(j);

        let mut a = DMatrix::zeros(g, g);
        let mut b = DVector::zeros(g);
        for c1 in 0..g {
            for c2 in c1..g {
                let mut acc = T::zero();
                for i in 0..n {
                    acc += xjm[(i, c1)] * self.w[i] * xjm[(i, c2)];
                }
                a[(c1, c2)] = acc;
                a[(c2, c1)] = acc;
            }
            let mut acc = T::zero();
            for i in 0..n {
                acc += xjm[(i, c1)] * self.w[i] * rminus[i];
            }
            b[c1] = acc;
        }
        let inv_tau2 = T::one() / self.hyper.tau2;
        for c in 0..g {
            a[(c, c)] += inv_tau2;
        }
        // I/τ² regularizes A, so the factorization cannot fail for finite τ².
        let chol = cholesky(&a)?;
        Ok((chol, b))
    }

    /// Log-odds of activating group `j` with β_{G_j} integrated out:
    /// ln(q/(1−q)) − (|G_j|/2)·ln τ² + ½ ln det Σ_{G_j} + ½ μᵀ Σ⁻¹ μ.
    pub fn group_log_odds(&self, j: usize) -> Result<T> {
        let (chol, b) = self.group_factorization(j)?;
        Ok(self.log_odds_from_factorization(&chol, &b)?.0)
    }

    fn log_odds_from_factorization(
        &self,
        chol: &nalgebra::Cholesky<T, nalgebra::Dyn>,
        b: &DVector<T>,
    ) -> Result<(T, usize)> {
        let g = b.len();
        let half = T::of(0.5);
        let v = chol
            .l_dirty()
            .solve_lower_triangular(b)
            .ok_or(Error::IllConditioned { min_pivot: 0.0 })?;
        let quad = v.norm_squared();
        let ln_det_prec =
            T::of(2.0) * (0..g).fold(T::zero(), |acc, i| acc + chol.l_dirty()[(i, i)].ln());
        let lo = self.prior_log_odds - T::of(g as f64) * half * self.ln_tau2 - half * ln_det_prec
            + half * quad;
        Ok((lo, g))
    }

    /// Update group `j`: draw Z_j from its marginalized conditional, then
    /// β_{G_j} from the spike-and-slab conditional, and refresh Xβ.
    pub fn step_group<R: Rng + ?Sized>(&mut self, j: usize, rng: &mut R) -> Result<()> {
        let n = self.design.n();
        let (chol, b) = self.group_factorization(j)?;
        let (log_odds, g) = self.log_odds_from_factorization(&chol, &b)?;

        let within_cap = match self.hyper.max_model_size {
            Some(cap) => {
                let others: usize = (0..self.design.r())
                    .filter(|&k| k != j && self.z[k])
                    .map(|k| self.design.group(k).len())
                    .sum();
                others + g <= cap
            }
            None => true,
        };
        let activate = within_cap && bernoulli_from_log_odds(log_odds, rng)?;

        // Fold the old contribution out of Xβ, then the new one in.
        let idx = self.design.group(j).to_vec();
        if self.z[j] {
            for i in 0..n {
                let mut contrib = T::zero();
                for (c, &col) in idx.iter().enumerate() {
                    contrib += self.xj[j][(i, c)] * self.beta[col];
                }
                self.xb[i] -= contrib;
            }
        }
        if activate {
            let mu = chol.solve(&b);
            let zdraw = DVector::from_fn(g, |_, _| T::sample_std_normal(rng));
            let tail = chol
                .l_dirty()
                .tr_solve_lower_triangular(&zdraw)
                .ok_or(Error::IllConditioned { min_pivot: 0.0 })?;
            let draw = mu + tail;
            for (c, &col) in idx.iter().enumerate() {
                self.beta[col] = draw[c];
            }
            for i in 0..n {
                let mut contrib = T::zero();
                for (c, &col) in idx.iter().enumerate() {
                    contrib += self.xj[j][(i, c)] * self.beta[col];
                }
                self.xb[i] += contrib;
            }
        } else {
            for &col in &idx {
                self.beta[col] = T::zero();
            }
        }
        self.z[j] = activate;
        Ok(())
    }

    /// One full sweep: Y, then s², then every group in the given order.
    pub fn sweep_with_order<R: Rng + ?Sized>(
        &mut self,
        order: &[usize],
        rng: &mut R,
    ) -> Result<()> {
        if !self.fixed_yw {
            self.step_latent_y(rng)?;
            self.step_scales(rng)?;
        }
        for &j in order {
            self.step_group(j, rng)?;
        }
        self.sweeps_done += 1;
        if self.sweeps_done % self.recompute_every == 0 {
            self.refresh_fitted();
        }
        debug_assert!(self.coupling_holds());
        Ok(())
    }

    pub fn sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let order: Vec<usize> = (0..self.design.r()).collect();
        self.sweep_with_order(&order, rng)
    }

    fn refresh_fitted(&mut self) {
        self.xb = self.design.x() * &self.beta;
    }

    fn coupling_holds(&self) -> bool {
        (0..self.design.r()).all(|j| {
            let nonzero = self
                .design
                .group(j)
                .iter()
                .any(|&c| self.beta[c] != T::zero());
            self.z[j] || !nonzero
        })
    }

    /// Relative drift between the incrementally maintained Xβ and a fresh
    /// recomputation.
    pub fn residual_drift(&self) -> T {
        let fresh = self.design.x() * &self.beta;
        let denom = fresh.norm().max(T::one());
        (&self.xb - &fresh).norm() / denom
    }

    /// Currently active groups.
    pub fn model(&self) -> Model {
        self.z
            .iter()
            .enumerate()
            .filter_map(|(j, &on)| on.then_some(j))
            .collect()
    }

    pub fn z(&self) -> &[bool] {
        &self.z
    }

    pub fn state(&self) -> ChainState<T> {
        ChainState {
            beta: self.beta.clone(),
            z: self.z.clone(),
            y: self.y.clone(),
            s2: self.s2.clone(),
            alpha: None,
            w: None,
        }
    }
}

pub(crate) fn init_model<R: Rng + ?Sized>(
    init: &InitPolicy,
    r: usize,
    rng: &mut R,
) -> Result<Vec<bool>> {
    match init {
        InitPolicy::RandomActive { n_active } => {
            let k = (*n_active).min(r);
            let chosen = rand::seq::index::sample(rng, r, k);
            let mut z = vec![false; r];
            for j in chosen {
                z[j] = true;
            }
            Ok(z)
        }
        InitPolicy::FixedModel { z } => {
            if z.len() != r {
                return Err(Error::DimensionMismatch(format!(
                    "init pattern length {} vs r = {}",
                    z.len(),
                    r
                )));
            }
            Ok(z.clone())
        }
    }
}

/// Run the Gibbs engine for `n_burnin + n_samples` sweeps and record the
/// post-burn-in indicator draws (and β when requested). Deterministic given
/// the seed.
pub fn run_gibbs<T: Scalar>(
    design: &GroupedDesign<T>,
    e: &[bool],
    hyper: &Hyperparams<T>,
    n_burnin: usize,
    n_samples: usize,
    init: &InitPolicy,
    seed: u64,
    opts: &RunOptions,
) -> Result<PosteriorDraws<T>> {
    let mut rng = rng_from_seed(seed);
    let mut chain = GibbsChain::new(design, e, hyper, init, &mut rng)?;
    chain.set_recompute_every(opts.recompute_every);
    let mut z_draws = Vec::with_capacity(n_samples);
    let mut beta_draws = opts.store_beta.then(Vec::new);
    for sweep in 0..n_burnin + n_samples {
        chain.sweep(&mut rng).map_err(|err| err.at_sweep(sweep))?;
        if sweep >= n_burnin {
            z_draws.push(chain.z.clone());
            if let Some(bd) = beta_draws.as_mut() {
                bd.push(chain.beta.clone());
            }
        }
    }
    Ok(PosteriorDraws {
        z_draws,
        beta_draws,
        seed,
        n_burnin,
        n_samples,
        engine: Engine::Gibbs,
    })
}
