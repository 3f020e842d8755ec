use nalgebra::{DMatrix, DVector};

use super::spec::TemplateSpec;
use super::synthetic::smooth_deformation_covariance;
use crate::error::{Error, Result};

/// Template coefficients, pixel noise variance and deformation covariance.
///
/// Construction checks the invariants and caches `Gamma^{-1}` and
/// `log det Gamma`, so evaluating the model never refactorizes.
#[derive(Debug, Clone, PartialEq)]
pub struct BmeParams {
    pub alpha: Vec<f64>,
    pub sigma2: f64,
    gamma: DMatrix<f64>,
    gamma_inv: DMatrix<f64>,
    gamma_log_det: f64,
}

impl BmeParams {
    pub fn new(alpha: Vec<f64>, sigma2: f64, gamma: DMatrix<f64>) -> Result<Self> {
        if alpha.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite("template coefficients"));
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::Domain(format!("sigma2 = {sigma2} must be positive")));
        }
        if !gamma.is_square() || gamma.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotPositiveDefinite("deformation covariance"));
        }
        let gamma = symmetrize(&gamma);
        let chol = gamma
            .clone()
            .cholesky()
            .ok_or(Error::NotPositiveDefinite("deformation covariance"))?;
        let gamma_log_det = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let gamma_inv = symmetrize(&chol.inverse());
        Ok(Self {
            alpha,
            sigma2,
            gamma,
            gamma_inv,
            gamma_log_det,
        })
    }

    pub fn gamma(&self) -> &DMatrix<f64> {
        &self.gamma
    }

    pub fn gamma_inv(&self) -> &DMatrix<f64> {
        &self.gamma_inv
    }

    pub fn gamma_log_det(&self) -> f64 {
        self.gamma_log_det
    }

    /// Flat layout `alpha, sigma2, Gamma (row-major)`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.alpha.clone();
        v.push(self.sigma2);
        v.extend(self.gamma.transpose().iter());
        v
    }

    pub fn names(k_p: usize, dim: usize) -> Vec<String> {
        let mut names: Vec<String> = (0..k_p).map(|j| format!("alpha_{j}")).collect();
        names.push("sigma2".into());
        for r in 0..dim {
            for c in 0..dim {
                names.push(format!("gamma_{r}_{c}"));
            }
        }
        names
    }
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Conjugate-style priors on `(alpha, sigma2)` and `Gamma`.
#[derive(Debug, Clone, PartialEq)]
pub struct BmeHyperPriors {
    pub mu_p: Vec<f64>,
    pub sigma_p: DMatrix<f64>,
    pub sigma0_sq: f64,
    pub a_p: f64,
    pub sigma_g: DMatrix<f64>,
    pub a_g: f64,
    /// Declared bound `R` on `|alpha|`.
    pub alpha_bound: f64,
}

impl BmeHyperPriors {
    /// `mu_p = 0`, `Sigma_p = I`, `a_p = 3`, `a_g = 4 k_g + 1`, and
    /// `Sigma_g = sigma_g_scale * (K_g ⊗ I_2)` with `K_g` the Gram matrix of
    /// the geometric kernel, i.e. smooth displacement fields a priori.
    pub fn for_spec(spec: &TemplateSpec, sigma0_sq: f64, sigma_g_scale: f64) -> Result<Self> {
        let k = spec.k_g();
        let sigma_g = smooth_deformation_covariance(spec, sigma_g_scale, sigma_g_scale);
        let hyper = Self {
            mu_p: vec![0.0; spec.k_p()],
            sigma_p: DMatrix::identity(spec.k_p(), spec.k_p()),
            sigma0_sq,
            a_p: 3.0,
            sigma_g,
            a_g: 4.0 * k as f64 + 1.0,
            alpha_bound: 1e6,
        };
        hyper.validate(spec)?;
        Ok(hyper)
    }

    pub fn validate(&self, spec: &TemplateSpec) -> Result<()> {
        let (kp, dim) = (spec.k_p(), spec.latent_dim());
        if self.mu_p.len() != kp {
            return Err(Error::DimensionMismatch {
                expected: kp,
                got: self.mu_p.len(),
            });
        }
        if self.sigma_p.shape() != (kp, kp) {
            return Err(Error::DimensionMismatch {
                expected: kp,
                got: self.sigma_p.nrows(),
            });
        }
        if self.sigma_g.shape() != (dim, dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: self.sigma_g.nrows(),
            });
        }
        if self.sigma_p.clone().cholesky().is_none() {
            return Err(Error::NotPositiveDefinite("Sigma_p"));
        }
        if self.sigma_g.clone().cholesky().is_none() {
            return Err(Error::NotPositiveDefinite("Sigma_g"));
        }
        if !(self.sigma0_sq > 0.0) {
            return Err(Error::InvalidParameter("sigma0_sq must be positive".into()));
        }
        if !(self.a_p >= 3.0) {
            return Err(Error::InvalidParameter(format!(
                "a_p = {} must be at least 3",
                self.a_p
            )));
        }
        let min_ag = 4.0 * spec.k_g() as f64 + 1.0;
        if !(self.a_g >= min_ag) {
            return Err(Error::InvalidParameter(format!(
                "a_g = {} must be at least 4 k_g + 1 = {min_ag}",
                self.a_g
            )));
        }
        if !(self.alpha_bound > 0.0) {
            return Err(Error::InvalidParameter(
                "alpha_bound must be positive".into(),
            ));
        }
        Ok(())
    }

    pub(crate) fn sigma_p_inv(&self) -> DMatrix<f64> {
        self.sigma_p
            .clone()
            .cholesky()
            .expect("validated")
            .inverse()
    }

    pub(crate) fn sigma_p_inv_mu(&self) -> DVector<f64> {
        self.sigma_p_inv() * DVector::from_column_slice(&self.mu_p)
    }
}
