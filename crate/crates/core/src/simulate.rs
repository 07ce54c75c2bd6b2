//! Synthetic experiments: grouped Gaussian covariates under three covariance
//! structures, sparse group-structured true coefficients, and logistic binary
//! responses, with a held-out test set standardized by the training moments.

use crate::design::{validate_design, GroupedDesign};
use crate::dist::{derive_seed, rng_from_seed, sigmoid};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Population covariance of the covariate rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Covariance<T: Scalar> {
    /// Σ = I.
    Isotropic,
    /// Σ_ij = ρ for i ≠ j, unit diagonal.
    CompoundSymmetry { rho: T },
    /// Σ_ij = ρ^|i−j|.
    Ar1 { rho: T },
}

impl<T: Scalar> Covariance<T> {
    pub fn compound_symmetry() -> Self {
        Covariance::CompoundSymmetry { rho: T::of(0.5) }
    }

    pub fn ar1() -> Self {
        Covariance::Ar1 { rho: T::of(0.5) }
    }
}

/// How the nonzero entries of the true coefficient vector are produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SignalSetting<T: Scalar> {
    Uniform { lo: T, hi: T },
    Constant { value: T },
}

impl<T: Scalar> SignalSetting<T> {
    /// The four standard settings: 1 = Unif(0.5, 1.5), 2 = 1.5,
    /// 3 = Unif(1.5, 3), 4 = 3.
    pub fn preset(index: u8) -> Result<Self> {
        Ok(match index {
            1 => SignalSetting::Uniform {
                lo: T::of(0.5),
                hi: T::of(1.5),
            },
            2 => SignalSetting::Constant { value: T::of(1.5) },
            3 => SignalSetting::Uniform {
                lo: T::of(1.5),
                hi: T::of(3.0),
            },
            4 => SignalSetting::Constant { value: T::of(3.0) },
            other => {
                return Err(Error::InvalidParameter(format!(
                    "signal setting must be 1..=4, got {other}"
                )))
            }
        })
    }
}

/// Configuration of one synthetic dataset.
#[derive(Debug, Clone)]
pub struct SimConfig<T: Scalar> {
    pub n: usize,
    pub r: usize,
    /// Number of active groups |t|; the active groups are always the first
    /// |t| groups.
    pub n_active: usize,
    pub covariance: Covariance<T>,
    pub setting: SignalSetting<T>,
    /// Candidate group sizes, drawn uniformly.
    pub group_size_choices: Vec<usize>,
    pub n_test: usize,
    pub seed: u64,
}

impl<T: Scalar> SimConfig<T> {
    /// The three standard dimension regimes: 1 = (r=50, |t|=3),
    /// 2 = (r=50, |t|=6), 3 = (r=100, |t|=3); n = 100 throughout.
    pub fn preset_design(
        design: u8,
        setting: SignalSetting<T>,
        covariance: Covariance<T>,
        seed: u64,
    ) -> Result<Self> {
        let (r, n_active) = match design {
            1 => (50, 3),
            2 => (50, 6),
            3 => (100, 3),
            other => {
                return Err(Error::InvalidParameter(format!(
                    "design must be 1..=3, got {other}"
                )))
            }
        };
        Ok(SimConfig {
            n: 100,
            r,
            n_active,
            covariance,
            setting,
            group_size_choices: vec![4, 5, 6],
            n_test: 100,
            seed,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.n_active > self.r {
            return Err(Error::InvalidParameter(format!(
                "n_active {} exceeds r {}",
                self.n_active, self.r
            )));
        }
        if self.r == 0 || self.n < 2 {
            return Err(Error::InvalidParameter("need r >= 1 and n >= 2".into()));
        }
        if self.group_size_choices.is_empty() || self.group_size_choices.contains(&0) {
            return Err(Error::InvalidParameter(
                "group size choices must be nonempty and positive".into(),
            ));
        }
        Ok(())
    }
}

/// One generated dataset: standardized training design, binary responses,
/// the truth behind them, and a held-out test set on the training scale.
#[derive(Debug, Clone)]
pub struct SimDataset<T: Scalar> {
    pub design: GroupedDesign<T>,
    pub e: Vec<bool>,
    /// Active groups (0-based), always `0..n_active`.
    pub true_model: Vec<usize>,
    /// True coefficients on the raw (pre-standardization) covariate scale.
    pub beta0: DVector<T>,
    /// Test covariates standardized with the training moments.
    pub test_x: DMatrix<T>,
    pub e_test: Vec<bool>,
    /// True success probabilities of the test rows.
    pub true_prob_test: DVector<T>,
    pub seed: u64,
}

/// Draw an n×p matrix of rows x_i ~ N_p(0, Σ).
pub fn gen_covariates<T: Scalar, R: Rng + ?Sized>(
    n: usize,
    p: usize,
    covariance: &Covariance<T>,
    rng: &mut R,
) -> DMatrix<T> {
    let mut x = DMatrix::zeros(n, p);
    match covariance {
        Covariance::Isotropic => {
            for v in x.iter_mut() {
                *v = T::sample_std_normal(rng);
            }
        }
        // Shared-factor construction: x_j = √ρ z₀ + √(1−ρ) z_j gives unit
        // variance and pairwise correlation ρ in O(np).
        Covariance::CompoundSymmetry { rho } => {
            let sr = rho.sqrt();
            let sc = (T::one() - *rho).sqrt();
            for i in 0..n {
                let shared = T::sample_std_normal(rng);
                for j in 0..p {
                    x[(i, j)] = sr * shared + sc * T::sample_std_normal(rng);
                }
            }
        }
        Covariance::Ar1 { rho } => {
            let innov = (T::one() - *rho * *rho).sqrt();
            for i in 0..n {
                let mut prev = T::sample_std_normal(rng);
                x[(i, 0)] = prev;
                for j in 1..p {
                    prev = *rho * prev + innov * T::sample_std_normal(rng);
                    x[(i, j)] = prev;
                }
            }
        }
    }
    x
}

/// Independent Bernoulli responses with P(E_i = 1) = σ(x_iᵀβ₀).
pub fn gen_response<T: Scalar, R: Rng + ?Sized>(
    x: &DMatrix<T>,
    beta0: &DVector<T>,
    rng: &mut R,
) -> Vec<bool> {
    let eta = x * beta0;
    eta.iter()
        .map(|&v| T::sample_open01(rng) < sigmoid(v))
        .collect()
}

/// Generate a full dataset; deterministic given `config.seed`.
///
/// If the training response degenerates (all outcomes equal) it is redrawn
/// with a fresh derived sub-seed, up to 100 attempts.
pub fn gen_dataset<T: Scalar>(config: &SimConfig<T>) -> Result<SimDataset<T>> {
    config.validate()?;
    let mut rng = rng_from_seed(config.seed);

    let sizes: Vec<usize> = (0..config.r)
        .map(|_| config.group_size_choices[rng.random_range(0..config.group_size_choices.len())])
        .collect();
    let p: usize = sizes.iter().sum();
    let mut groups = Vec::with_capacity(config.r);
    let mut next = 0;
    for &s in &sizes {
        groups.push((next..next + s).collect::<Vec<_>>());
        next += s;
    }

    let mut beta0 = DVector::zeros(p);
    for group in groups.iter().take(config.n_active) {
        for &col in group {
            beta0[col] = match config.setting {
                SignalSetting::Uniform { lo, hi } => lo + (hi - lo) * T::sample_open01(&mut rng),
                SignalSetting::Constant { value } => value,
            };
        }
    }

    let x_raw = gen_covariates(config.n, p, &config.covariance, &mut rng);
    let mut e = gen_response(&x_raw, &beta0, &mut rng);
    let mut attempts = 0;
    while e.iter().all(|&v| v) || e.iter().all(|&v| !v) {
        attempts += 1;
        if attempts > 100 {
            return Err(Error::DegenerateResponse { attempts });
        }
        let mut retry_rng = rng_from_seed(derive_seed(config.seed, attempts as u64));
        e = gen_response(&x_raw, &beta0, &mut retry_rng);
    }

    let test_raw = gen_covariates(config.n_test, p, &config.covariance, &mut rng);
    let e_test = gen_response(&test_raw, &beta0, &mut rng);
    let true_prob_test = DVector::from_iterator(
        config.n_test,
        (&test_raw * &beta0).iter().map(|&v| sigmoid(v)),
    );

    let design = validate_design(x_raw, groups)?;
    let test_x = design.standardize_with_train_moments(&test_raw)?;

    Ok(SimDataset {
        design,
        e,
        true_model: (0..config.n_active).collect(),
        beta0,
        test_x,
        e_test,
        true_prob_test,
        seed: config.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(seed: u64) -> SimConfig<f64> {
        SimConfig::preset_design(
            1,
            SignalSetting::preset(4).unwrap(),
            Covariance::Isotropic,
            seed,
        )
        .unwrap()
    }

    #[test]
    fn baseline_dataset_has_expected_shape() {
        let ds = gen_dataset(&cfg(7)).unwrap();
        assert_eq!(ds.design.r(), 50);
        assert!(ds.design.p() >= 200 && ds.design.p() <= 300);
        assert_eq!(ds.true_model, vec![0, 1, 2]);
        let total: usize = ds.design.groups().iter().map(Vec::len).sum();
        assert_eq!(total, ds.design.p());
        for g in ds.design.groups() {
            assert!(g.len() >= 4 && g.len() <= 6);
        }
    }

    #[test]
    fn same_seed_reproduces_dataset() {
        let a = gen_dataset(&cfg(42)).unwrap();
        let b = gen_dataset(&cfg(42)).unwrap();
        assert_eq!(a.design.p(), b.design.p());
        assert_eq!(a.e, b.e);
        assert_eq!(a.e_test, b.e_test);
        assert!(a
            .design
            .x()
            .iter()
            .zip(b.design.x().iter())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
        assert!(a
            .beta0
            .iter()
            .zip(b.beta0.iter())
            .all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn constant_setting_fills_active_groups_exactly() {
        let mut c = cfg(3);
        c.setting = SignalSetting::preset(2).unwrap();
        let ds = gen_dataset(&c).unwrap();
        let active_cols: Vec<usize> = (0..3).flat_map(|j| ds.design.group(j).to_vec()).collect();
        for col in 0..ds.design.p() {
            if active_cols.contains(&col) {
                assert_eq!(ds.beta0[col], 1.5);
            } else {
                assert_eq!(ds.beta0[col], 0.0);
            }
        }
    }

    #[test]
    fn setting_ranges_hold() {
        for (idx, lo, hi) in [(1u8, 0.5, 1.5), (3, 1.5, 3.0)] {
            let mut c = cfg(11 + idx as u64);
            c.setting = SignalSetting::preset(idx).unwrap();
            let ds = gen_dataset(&c).unwrap();
            for j in &ds.true_model {
                for &col in ds.design.group(*j) {
                    assert!(ds.beta0[col] > lo && ds.beta0[col] < hi);
                }
            }
        }
    }

    #[test]
    fn design3_has_100_groups() {
        let c: SimConfig<f64> = SimConfig::preset_design(
            3,
            SignalSetting::preset(4).unwrap(),
            Covariance::Isotropic,
            5,
        )
        .unwrap();
        let ds = gen_dataset(&c).unwrap();
        assert_eq!(ds.design.r(), 100);
    }

    #[test]
    fn null_model_response_is_balanced() {
        let mut rng = rng_from_seed(1);
        let x = DMatrix::<f64>::zeros(100_000, 1);
        let beta0 = DVector::zeros(1);
        let e = gen_response(&x, &beta0, &mut rng);
        let freq = e.iter().filter(|&&v| v).count() as f64 / 1e5;
        assert!((freq - 0.5).abs() < 0.005, "freq {freq}");
    }

    #[test]
    fn strong_negative_predictor_gives_all_zeros() {
        let mut rng = rng_from_seed(2);
        let x = DMatrix::from_element(1000, 1, 1.0);
        let beta0 = DVector::from_element(1, -50.0);
        let e = gen_response(&x, &beta0, &mut rng);
        assert!(e.iter().all(|&v| !v));
    }

    #[test]
    fn known_linear_predictor_hits_its_probability() {
        let mut rng = rng_from_seed(3);
        let x = DMatrix::from_element(100_000, 1, 1.0);
        let beta0 = DVector::from_element(1, 9.0f64.ln());
        let e = gen_response(&x, &beta0, &mut rng);
        let freq = e.iter().filter(|&&v| v).count() as f64 / 1e5;
        assert!((freq - 0.9).abs() < 0.005, "freq {freq}");
    }
}
