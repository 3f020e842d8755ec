//! Likelihood of a new image under a fitted model, approximated at the MAP
//! deformation with a Laplace correction.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::io::FittedModel;
use super::params::BmeParams;
use super::spec::TemplateSpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct MapFit {
    pub z: Vec<f64>,
    /// `|y - I|^2 / (2 sigma2) + z^T Gamma^{-1} z / 2` at `z`.
    pub objective: f64,
    pub iterations: usize,
}

fn objective(spec: &TemplateSpec, params: &BmeParams, y: &[f64], z: &[f64]) -> (f64, Vec<f64>) {
    let img = spec.deformed_template(&params.alpha, z);
    let r: Vec<f64> = y.iter().zip(&img).map(|(a, b)| a - b).collect();
    let zv = DVector::from_column_slice(z);
    let f = r.iter().map(|v| v * v).sum::<f64>() / (2.0 * params.sigma2)
        + 0.5 * zv.dot(&(params.gamma_inv() * &zv));
    (f, r)
}

/// Levenberg-Marquardt on the negative log-posterior of one deformation,
/// starting from `z = 0`.
pub fn map_latent(spec: &TemplateSpec, params: &BmeParams, y: &[f64]) -> MapFit {
    let d = spec.latent_dim();
    let mut z = vec![0.0; d];
    let (mut f, mut r) = objective(spec, params, y, &z);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    for it in 0..100 {
        iterations = it + 1;
        let jac = spec.deformation_jacobian(&params.alpha, &z);
        let zv = DVector::from_column_slice(&z);
        let rv = DVector::from_column_slice(&r);
        let h = jac.tr_mul(&jac) / params.sigma2 + params.gamma_inv();
        let g = jac.tr_mul(&rv) / params.sigma2 - params.gamma_inv() * &zv;
        let mut improved = false;
        while lambda < 1e12 {
            let damped = &h + DMatrix::from_diagonal(&h.diagonal()) * lambda;
            let Some(ch) = damped.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let step = ch.solve(&g);
            let cand: Vec<f64> = z.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let (fc, rc) = objective(spec, params, y, &cand);
            if fc < f {
                let gain = f - fc;
                z = cand;
                f = fc;
                r = rc;
                lambda = (lambda / 10.0).max(1e-12);
                improved = gain > 1e-12 * (1.0 + f.abs());
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    MapFit {
        z,
        objective: f,
        iterations,
    }
}

/// Laplace approximation of `log g(y; theta)` around the MAP deformation,
/// using the Gauss-Newton Hessian `J^T J / sigma2 + Gamma^{-1}`.
pub fn laplace_log_likelihood(spec: &TemplateSpec, params: &BmeParams, y: &[f64]) -> Result<f64> {
    if y.len() != spec.n_pixels() {
        return Err(Error::DimensionMismatch {
            expected: spec.n_pixels(),
            got: y.len(),
        });
    }
    let fit = map_latent(spec, params, y);
    let jac = spec.deformation_jacobian(&params.alpha, &fit.z);
    let h = jac.tr_mul(&jac) / params.sigma2 + params.gamma_inv();
    let ch = h
        .cholesky()
        .ok_or(Error::NotPositiveDefinite("Laplace Hessian"))?;
    let log_det_h = 2.0 * ch.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let npix = spec.n_pixels() as f64;
    Ok(-0.5 * npix * (2.0 * PI * params.sigma2).ln()
        - fit.objective
        - 0.5 * params.gamma_log_det()
        - 0.5 * log_det_h)
}

/// Approximate log-likelihood of `y` under each model, in model order.
pub fn class_scores(y: &[f64], models: &[FittedModel]) -> Result<Vec<f64>> {
    models
        .iter()
        .map(|m| laplace_log_likelihood(&m.spec, &m.params, y))
        .collect()
}

/// Index of the model with the largest approximate likelihood; ties go to
/// the lowest index.
pub fn classify(y: &[f64], models: &[FittedModel]) -> Result<usize> {
    if models.is_empty() {
        return Err(Error::InvalidParameter(
            "need at least one fitted model".into(),
        ));
    }
    let mut best = (0, f64::NEG_INFINITY);
    for (i, score) in class_scores(y, models)?.into_iter().enumerate() {
        if score > best.1 {
            best = (i, score);
        }
    }
    Ok(best.0)
}
