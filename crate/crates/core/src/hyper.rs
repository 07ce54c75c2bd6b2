//! Prior hyperparameters and their default rule.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Hyperparameters of the group spike-and-slab prior plus the constants of
/// the t-approximation to the logistic latent density.
#[derive(Debug, Clone, Copy)]
pub struct Hyperparams<T: Scalar> {
    /// Slab variance τ².
    pub tau2: T,
    /// Shared prior inclusion probability q ∈ (0, 1).
    pub q: T,
    /// Degrees of freedom ν of the t-approximation (7.3 by default).
    pub nu: T,
    /// t scale σ₀² = π²(ν−2)/(3ν) when constructed from ν.
    pub sigma02: T,
    /// Activation threshold α₀ = Φ⁻¹(1−q) of the neuronized form.
    pub alpha0: T,
    /// Optional cap on the number of selected columns |G_Z|; activations that
    /// would exceed it are rejected. Off by default.
    pub max_model_size: Option<usize>,
}

pub const DEFAULT_NU: f64 = 7.3;

impl<T: Scalar> Hyperparams<T> {
    /// Build from (τ², q, ν); derives σ₀² and α₀.
    pub fn new(tau2: T, q: T, nu: T) -> Result<Self> {
        if !(tau2 > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "tau2 must be positive, got {}",
                tau2.as_f64()
            )));
        }
        if !(q > T::zero() && q < T::one()) {
            return Err(Error::InvalidParameter(format!(
                "q must be in (0, 1), got {}",
                q.as_f64()
            )));
        }
        if !(nu > T::of(2.0)) {
            return Err(Error::InvalidParameter(format!(
                "nu must exceed 2, got {}",
                nu.as_f64()
            )));
        }
        let sigma02 = T::pi() * T::pi() * (nu - T::of(2.0)) / (T::of(3.0) * nu);
        let alpha0 = T::norm_quantile(T::one() - q);
        Ok(Hyperparams {
            tau2,
            q,
            nu,
            sigma02,
            alpha0,
            max_model_size: None,
        })
    }

    /// Default rule: τ² = max{1, 0.01 n⁻¹ r^{2+2δ}} with δ = 0.01, q = 1/r,
    /// ν = 7.3.
    pub fn defaults(n: usize, r: usize) -> Result<Self> {
        Self::defaults_with_delta(n, r, T::of(0.01))
    }

    /// Same rule with the exponent offset δ exposed.
    pub fn defaults_with_delta(n: usize, r: usize, delta: T) -> Result<Self> {
        if n < 1 || r < 2 {
            return Err(Error::InvalidParameter(format!(
                "defaults need n >= 1 and r >= 2, got n = {n}, r = {r}"
            )));
        }
        let rf = T::of(r as f64);
        let nf = T::of(n as f64);
        let exponent = T::of(2.0) + T::of(2.0) * delta;
        let tau2 = T::one().max(T::of(0.01) * rf.powf(exponent) / nf);
        Self::new(tau2, T::one() / rf, T::of(DEFAULT_NU))
    }

    pub fn with_max_model_size(mut self, cap: Option<usize>) -> Self {
        self.max_model_size = cap;
        self
    }

    /// Prior mean of the latent scale s², used to initialize chains.
    pub fn prior_scale_mean(&self) -> T {
        self.sigma02 * self.nu / (self.nu - T::of(2.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_rule_matches_closed_forms() {
        let h = Hyperparams::<f64>::defaults(100, 50).unwrap();
        assert_eq!(h.tau2, 1.0); // 0.01 * 50^2.02 / 100 ≈ 0.270 < 1
        assert!((h.q - 0.02).abs() < 1e-15);

        let h = Hyperparams::<f64>::defaults(100, 100).unwrap();
        assert!((h.tau2 - 1.0965).abs() < 5e-4, "tau2 = {}", h.tau2);
        assert!((h.q - 0.01).abs() < 1e-15);
    }

    #[test]
    fn sigma02_formula() {
        let h = Hyperparams::<f64>::defaults(100, 50).unwrap();
        let want = std::f64::consts::PI.powi(2) * (7.3 - 2.0) / (3.0 * 7.3);
        assert!((h.sigma02 - want).abs() < 1e-12);
        assert!((h.sigma02 - 2.3885).abs() < 1e-4);
    }

    #[test]
    fn alpha0_inverts_q() {
        use crate::scalar::Scalar;
        for &q in &[0.5, 0.1, 0.02, 0.01] {
            let h = Hyperparams::<f64>::new(1.0, q, 7.3).unwrap();
            assert!(
                (h.alpha0.norm_cdf() - (1.0 - q)).abs() < 1e-10,
                "q = {q}: Phi(alpha0) = {}",
                h.alpha0.norm_cdf()
            );
        }
    }

    #[test]
    fn tau2_nondecreasing_in_r() {
        let mut prev = 0.0;
        for r in (2..400).step_by(7) {
            let h = Hyperparams::<f64>::defaults(100, r).unwrap();
            assert!(h.tau2 >= prev, "tau2 decreased at r = {r}");
            prev = h.tau2;
        }
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(Hyperparams::<f64>::new(0.0, 0.5, 7.3).is_err());
        assert!(Hyperparams::<f64>::new(1.0, 1.0, 7.3).is_err());
        assert!(Hyperparams::<f64>::new(1.0, 0.5, 2.0).is_err());
        assert!(Hyperparams::<f64>::defaults(100, 1).is_err());
    }
}
