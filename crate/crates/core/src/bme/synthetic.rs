use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::params::BmeParams;
use super::spec::{Point, TemplateSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSample {
    pub images: Vec<Vec<f64>>,
    pub latents: Vec<Vec<f64>>,
}

/// `z ~ N(0, Gamma)`.
pub fn sample_deformation<R: Rng + ?Sized>(params: &BmeParams, rng: &mut R) -> Vec<f64> {
    let d = params.gamma().nrows();
    let l = params
        .gamma()
        .clone()
        .cholesky()
        .expect("Gamma is SPD by construction")
        .unpack();
    let xi = DVector::from_iterator(d, (0..d).map(|_| crate::std_normal(rng)));
    (l * xi).iter().cloned().collect()
}

/// Deformed template plus independent `N(0, sigma2)` pixel noise.
pub fn render<R: Rng + ?Sized>(
    spec: &TemplateSpec,
    params: &BmeParams,
    z: &[f64],
    rng: &mut R,
) -> Vec<f64> {
    let sd = params.sigma2.sqrt();
    spec.deformed_template(&params.alpha, z)
        .into_iter()
        .map(|v| v + sd * crate::std_normal(rng))
        .collect()
}

/// `count` images in `(+z, -z)` pairs sharing one deformation draw; an odd
/// count ends with an unpaired `+z`.
pub fn sample_synthetic<R: Rng + ?Sized>(
    params: &BmeParams,
    spec: &TemplateSpec,
    count: usize,
    rng: &mut R,
) -> Result<SyntheticSample> {
    if params.alpha.len() != spec.k_p() {
        return Err(Error::DimensionMismatch {
            expected: spec.k_p(),
            got: params.alpha.len(),
        });
    }
    if params.gamma().nrows() != spec.latent_dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.latent_dim(),
            got: params.gamma().nrows(),
        });
    }
    let mut images = Vec::with_capacity(count);
    let mut latents = Vec::with_capacity(count);
    while images.len() < count {
        let z = sample_deformation(params, rng);
        images.push(render(spec, params, &z, rng));
        if images.len() < count {
            let minus: Vec<f64> = z.iter().map(|v| -v).collect();
            images.push(render(spec, params, &minus, rng));
            latents.push(z);
            latents.push(minus);
        } else {
            latents.push(z);
        }
    }
    Ok(SyntheticSample { images, latents })
}

/// `count` images with independent deformations.
pub fn sample_independent<R: Rng + ?Sized>(
    params: &BmeParams,
    spec: &TemplateSpec,
    count: usize,
    rng: &mut R,
) -> Result<SyntheticSample> {
    if params.alpha.len() != spec.k_p() {
        return Err(Error::DimensionMismatch {
            expected: spec.k_p(),
            got: params.alpha.len(),
        });
    }
    if params.gamma().nrows() != spec.latent_dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.latent_dim(),
            got: params.gamma().nrows(),
        });
    }
    let latents: Vec<Vec<f64>> = (0..count)
        .map(|_| sample_deformation(params, rng))
        .collect();
    let images = latents
        .iter()
        .map(|z| render(spec, params, z, rng))
        .collect();
    Ok(SyntheticSample { images, latents })
}

/// Template coefficients `alpha_j = f(p_j)` at the photometric points.
pub fn template_coefficients(spec: &TemplateSpec, f: impl Fn(Point) -> f64) -> Vec<f64> {
    spec.photo_points().iter().map(|p| f(*p)).collect()
}

/// `K_g ⊗ diag(var_x, var_y)`: control-point moves correlated like the
/// geometric kernel, with separate horizontal and vertical variances.
pub fn smooth_deformation_covariance(spec: &TemplateSpec, var_x: f64, var_y: f64) -> DMatrix<f64> {
    let gram = spec.geo_gram();
    let n = 2 * spec.k_g();
    DMatrix::from_fn(n, n, |r, c| match (r % 2, c % 2) {
        (0, 0) => var_x * gram[(r / 2, c / 2)],
        (1, 1) => var_y * gram[(r / 2, c / 2)],
        _ => 0.0,
    })
}
