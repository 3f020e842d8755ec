use std::ops::Range;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use super::params::{symmetrize, BmeHyperPriors, BmeParams};
use super::spec::TemplateSpec;
use crate::error::{Error, Result};
use crate::model::LatentModel;

const JITTER: f64 = 1e-8;

/// `n` images observed on the grid of `spec`, each `y_i = I_alpha(v - m_{z_i}(v)) + sigma e`
/// with `z_i ~ N(0, Gamma)`; the latent is the stack `(z_1, ..., z_n)`.
///
/// Sufficient statistics, with `Phi_i = Phi(z_i)` the warped design matrix:
/// `S1 = sum Phi_i^T y_i`, `S2 = sum Phi_i^T Phi_i`, `S3 = sum z_i z_i^T`,
/// stored flat in that order (matrices row-major).
#[derive(Debug, Clone)]
pub struct BmeModel {
    spec: TemplateSpec,
    hyper: BmeHyperPriors,
    images: Vec<Vec<f64>>,
    y_sq: f64,
}

impl BmeModel {
    pub fn new(spec: TemplateSpec, hyper: BmeHyperPriors, images: Vec<Vec<f64>>) -> Result<Self> {
        hyper.validate(&spec)?;
        if images.is_empty() {
            return Err(Error::InvalidParameter("need at least one image".into()));
        }
        for img in &images {
            if img.len() != spec.n_pixels() {
                return Err(Error::DimensionMismatch {
                    expected: spec.n_pixels(),
                    got: img.len(),
                });
            }
            if img.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("image"));
            }
        }
        let y_sq = images.iter().flatten().map(|v| v * v).sum();
        Ok(Self {
            spec,
            hyper,
            images,
            y_sq,
        })
    }

    pub fn spec(&self) -> &TemplateSpec {
        &self.spec
    }

    pub fn hyper(&self) -> &BmeHyperPriors {
        &self.hyper
    }

    pub fn images(&self) -> &[Vec<f64>] {
        &self.images
    }

    pub fn n_images(&self) -> usize {
        self.images.len()
    }

    fn block(&self, i: usize) -> Range<usize> {
        let d = self.spec.latent_dim();
        i * d..(i + 1) * d
    }

    /// `-|y_i - I_alpha(. - m_z)|^2 / (2 sigma2) - z^T Gamma^{-1} z / 2` and
    /// its gradient in `z`.
    pub fn image_log_posterior_and_grad(
        &self,
        i: usize,
        z: &[f64],
        theta: &BmeParams,
    ) -> (f64, Vec<f64>) {
        let spec = &self.spec;
        let y = &self.images[i];
        let k = spec.k_g();
        let mut sq = 0.0;
        let mut grad = vec![0.0; 2 * k];
        for (u, w) in spec.warped_pixels(z).iter().enumerate() {
            let (val, gi) = spec.template_value_and_gradient(&theta.alpha, *w);
            let r = y[u] - val;
            sq += r * r;
            for (j, kg) in spec.geo_row(u).iter().enumerate() {
                grad[2 * j] -= r * gi[0] * kg;
                grad[2 * j + 1] -= r * gi[1] * kg;
            }
        }
        let zv = DVector::from_column_slice(z);
        let pz = theta.gamma_inv() * &zv;
        let lp = -sq / (2.0 * theta.sigma2) - 0.5 * zv.dot(&pz);
        for (g, p) in grad.iter_mut().zip(pz.iter()) {
            *g = *g / theta.sigma2 - p;
        }
        (lp, grad)
    }

    /// Residual sum of squares `sum_i |y_i - I_alpha(. - m_{z_i})|^2`.
    pub fn residual_sum_of_squares(&self, z: &[f64], alpha: &[f64]) -> f64 {
        (0..self.n_images())
            .map(|i| {
                let img = self.spec.deformed_template(alpha, &z[self.block(i)]);
                img.iter()
                    .zip(&self.images[i])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
            })
            .sum()
    }

    fn split_stats<'a>(&self, s: &'a [f64]) -> (&'a [f64], &'a [f64], &'a [f64]) {
        let kp = self.spec.k_p();
        let (s1, rest) = s.split_at(kp);
        let (s2, s3) = rest.split_at(kp * kp);
        (s1, s2, s3)
    }

    /// Penalized complete-data log-likelihood `L(s, theta)` (priors included,
    /// normalizing constants dropped). The M-step maximizes this in `theta`.
    pub fn surrogate(&self, s: &[f64], theta: &BmeParams) -> f64 {
        let kp = self.spec.k_p();
        let d = self.spec.latent_dim();
        let (s1, s2, s3) = self.split_stats(s);
        let h = &self.hyper;
        let n = self.n_images() as f64;
        let npix = (self.n_images() * self.spec.n_pixels()) as f64;
        let a = DVector::from_column_slice(&theta.alpha);
        let s1 = DVector::from_column_slice(s1);
        let s2 = DMatrix::from_row_slice(kp, kp, s2);
        let s3 = DMatrix::from_row_slice(d, d, s3);
        let rss = self.y_sq - 2.0 * a.dot(&s1) + (a.transpose() * &s2 * &a)[(0, 0)];
        let da = &a - DVector::from_column_slice(&h.mu_p);
        let prior_alpha = (da.transpose() * h.sigma_p_inv() * &da)[(0, 0)];
        let gi = theta.gamma_inv();
        -0.5 * (npix + h.a_p) * theta.sigma2.ln()
            - (rss + h.a_p * h.sigma0_sq) / (2.0 * theta.sigma2)
            - 0.5 * prior_alpha
            - 0.5 * (n + h.a_g) * theta.gamma_log_det()
            - 0.5 * (gi * (s3 + &h.sigma_g * h.a_g)).trace()
    }
}

fn min_eigenvalue(m: DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m).eigenvalues.min()
}

fn cholesky_solve_with_jitter(
    a: DMatrix<f64>,
    b: &DVector<f64>,
    what: &str,
) -> Result<DVector<f64>> {
    if let Some(ch) = a.clone().cholesky() {
        return Ok(ch.solve(b));
    }
    log::warn!("{what}: system not positive definite, adding {JITTER} I");
    let n = a.nrows();
    (a + DMatrix::identity(n, n) * JITTER)
        .cholesky()
        .map(|ch| ch.solve(b))
        .ok_or(Error::NotPositiveDefinite("template normal equations"))
}

impl LatentModel for BmeModel {
    type Theta = BmeParams;

    fn latent_dim(&self) -> usize {
        self.n_images() * self.spec.latent_dim()
    }

    fn stat_dim(&self) -> usize {
        let (kp, d) = (self.spec.k_p(), self.spec.latent_dim());
        kp + kp * kp + d * d
    }

    fn suff_stats(&self, z: &[f64]) -> Vec<f64> {
        let (kp, d) = (self.spec.k_p(), self.spec.latent_dim());
        let npix = self.spec.n_pixels();
        let parts: Vec<(DVector<f64>, DMatrix<f64>)> = (0..self.n_images())
            .into_par_iter()
            .map(|i| {
                let phi =
                    DMatrix::from_row_slice(npix, kp, &self.spec.design_matrix(&z[self.block(i)]));
                let y = DVector::from_column_slice(&self.images[i]);
                (phi.tr_mul(&y), phi.tr_mul(&phi))
            })
            .collect();
        let mut s1 = DVector::zeros(kp);
        let mut s2 = DMatrix::zeros(kp, kp);
        let mut s3 = DMatrix::zeros(d, d);
        for (i, (a, b)) in parts.into_iter().enumerate() {
            s1 += a;
            s2 += b;
            let zi = DVector::from_column_slice(&z[self.block(i)]);
            s3 += &zi * zi.transpose();
        }
        let mut out = Vec::with_capacity(self.stat_dim());
        out.extend(s1.iter());
        out.extend(s2.transpose().iter());
        out.extend(s3.transpose().iter());
        out
    }

    /// Finite entries, `S3` positive semidefinite, and the augmented matrix
    /// `[[Y, S1^T], [S1, S2]]` positive semidefinite, with `Y = sum |y_i|^2`.
    /// Convex combinations of attainable statistics stay in this set.
    fn in_stat_domain(&self, s: &[f64]) -> bool {
        if s.len() != self.stat_dim() || s.iter().any(|v| !v.is_finite()) {
            return false;
        }
        let (kp, d) = (self.spec.k_p(), self.spec.latent_dim());
        let (s1, s2, s3) = self.split_stats(s);
        let s3 = DMatrix::from_row_slice(d, d, s3);
        let tol3 = 1e-9 * (1.0 + s3.amax());
        if min_eigenvalue(symmetrize(&s3)) < -tol3 {
            return false;
        }
        let aug = DMatrix::from_fn(kp + 1, kp + 1, |r, c| match (r, c) {
            (0, 0) => self.y_sq,
            (0, c) => s1[c - 1],
            (r, 0) => s1[r - 1],
            (r, c) => s2[(r - 1) * kp + (c - 1)],
        });
        let tol = 1e-9 * (1.0 + aug.amax());
        min_eigenvalue(symmetrize(&aug)) >= -tol
    }

    /// `Gamma = (S3 + a_g Sigma_g) / (n + a_g)`; `(alpha, sigma2)` by
    /// alternating the two exact conditional maximizers
    /// `alpha = (S2 + sigma2 Sigma_p^{-1})^{-1} (S1 + sigma2 Sigma_p^{-1} mu_p)`,
    /// `sigma2 = (Y - 2 alpha^T S1 + alpha^T S2 alpha + a_p sigma0^2) / (n |Lambda| + a_p)`
    /// until `sigma2` stops moving.
    fn m_step(&self, s: &[f64]) -> Result<BmeParams> {
        if s.len() != self.stat_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.stat_dim(),
                got: s.len(),
            });
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sufficient statistic"));
        }
        let (kp, d) = (self.spec.k_p(), self.spec.latent_dim());
        let h = &self.hyper;
        let n = self.n_images() as f64;
        let npix = (self.n_images() * self.spec.n_pixels()) as f64;
        let (s1, s2, s3) = self.split_stats(s);
        let s1 = DVector::from_column_slice(s1);
        let s2 = symmetrize(&DMatrix::from_row_slice(kp, kp, s2));
        let s3 = symmetrize(&DMatrix::from_row_slice(d, d, s3));

        let gamma = (s3 + &h.sigma_g * h.a_g) / (n + h.a_g);

        let p_inv = h.sigma_p_inv();
        let p_inv_mu = h.sigma_p_inv_mu();
        let noise = |alpha: &DVector<f64>| {
            let rss = self.y_sq - 2.0 * alpha.dot(&s1) + (alpha.transpose() * &s2 * alpha)[(0, 0)];
            (rss.max(0.0) + h.a_p * h.sigma0_sq) / (npix + h.a_p)
        };
        let mut sigma2 = noise(&DVector::zeros(kp));
        let mut alpha = DVector::zeros(kp);
        for _ in 0..200 {
            alpha = cholesky_solve_with_jitter(
                &s2 + &p_inv * sigma2,
                &(&s1 + &p_inv_mu * sigma2),
                "template update",
            )?;
            let next = noise(&alpha);
            let done = (next - sigma2).abs() <= 1e-14 * sigma2;
            sigma2 = next;
            if done {
                break;
            }
        }
        if alpha.norm() >= h.alpha_bound {
            return Err(Error::Domain(format!(
                "|alpha| = {} exceeds the bound {}",
                alpha.norm(),
                h.alpha_bound
            )));
        }
        let alpha: Vec<f64> = alpha.iter().cloned().collect();
        match BmeParams::new(alpha.clone(), sigma2, gamma.clone()) {
            Ok(p) => Ok(p),
            Err(Error::NotPositiveDefinite(_)) => {
                log::warn!(
                    "deformation covariance update not positive definite, adding {JITTER} I"
                );
                BmeParams::new(alpha, sigma2, gamma + DMatrix::identity(d, d) * JITTER)
            }
            Err(e) => Err(e),
        }
    }

    fn theta_in_domain(&self, theta: &BmeParams) -> bool {
        let norm_alpha = theta.alpha.iter().map(|a| a * a).sum::<f64>().sqrt();
        theta.alpha.len() == self.spec.k_p()
            && norm_alpha < self.hyper.alpha_bound
            && theta.sigma2 > 0.0
            && theta.gamma().nrows() == self.spec.latent_dim()
            && theta.gamma().clone().cholesky().is_some()
    }

    fn theta_values(&self, theta: &BmeParams) -> Vec<f64> {
        theta.to_vec()
    }

    fn theta_names(&self) -> Vec<String> {
        BmeParams::names(self.spec.k_p(), self.spec.latent_dim())
    }

    fn log_posterior(&self, z: &[f64], theta: &BmeParams) -> f64 {
        self.log_posterior_and_grad(z, theta).0
    }

    fn grad_log_posterior(&self, z: &[f64], theta: &BmeParams) -> Vec<f64> {
        self.log_posterior_and_grad(z, theta).1
    }

    fn log_posterior_and_grad(&self, z: &[f64], theta: &BmeParams) -> (f64, Vec<f64>) {
        let parts: Vec<(f64, Vec<f64>)> = (0..self.n_images())
            .into_par_iter()
            .map(|i| self.image_log_posterior_and_grad(i, &z[self.block(i)], theta))
            .collect();
        let mut lp = 0.0;
        let mut grad = Vec::with_capacity(z.len());
        for (l, g) in parts {
            lp += l;
            grad.extend(g);
        }
        (lp, grad)
    }

    /// `|S| <= sum_i (sqrt(|Lambda| k_p) |y_i| + |Lambda| k_p) + |z|^2`,
    /// since every kernel value is at most one.
    fn stat_norm_bound(&self, z: &[f64]) -> f64 {
        let c = (self.spec.n_pixels() * self.spec.k_p()) as f64;
        let data: f64 = self
            .images
            .iter()
            .map(|y| c.sqrt() * y.iter().map(|v| v * v).sum::<f64>().sqrt() + c)
            .sum();
        data + z.iter().map(|v| v * v).sum::<f64>()
    }

    fn latent_blocks(&self) -> Vec<Range<usize>> {
        (0..self.n_images()).map(|i| self.block(i)).collect()
    }

    fn block_log_posterior_and_grad(
        &self,
        _z: &[f64],
        block: usize,
        x: &[f64],
        theta: &BmeParams,
    ) -> (f64, Vec<f64>) {
        self.image_log_posterior_and_grad(block, x, theta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{finite_difference_grad, relative_error, validate_model};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_model(spec: TemplateSpec, n: usize, seed: u64) -> (BmeModel, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let alpha: Vec<f64> = (0..spec.k_p())
            .map(|_| rng.random_range(0.0..2.0))
            .collect();
        let d = spec.latent_dim();
        let images = (0..n)
            .map(|_| {
                let z: Vec<f64> = (0..d).map(|_| rng.random_range(-0.1..0.1)).collect();
                spec.deformed_template(&alpha, &z)
                    .into_iter()
                    .map(|v| v + 0.2 * crate::std_normal(&mut rng))
                    .collect()
            })
            .collect();
        let hyper = BmeHyperPriors::for_spec(&spec, 0.04, 0.01).unwrap();
        (BmeModel::new(spec, hyper, images).unwrap(), alpha)
    }

    fn params(model: &BmeModel, alpha: Vec<f64>, sigma2: f64) -> BmeParams {
        BmeParams::new(alpha, sigma2, model.hyper().sigma_g.clone()).unwrap()
    }

    #[test]
    fn zero_residual_has_zero_data_term() {
        let spec = TemplateSpec::default();
        let alpha: Vec<f64> = (0..25).map(|i| (i as f64).cos()).collect();
        let image = spec.eval_template(&alpha, spec.pixels());
        let hyper = BmeHyperPriors::for_spec(&spec, 0.04, 0.01).unwrap();
        let model = BmeModel::new(spec, hyper, vec![image]).unwrap();
        let theta = params(&model, alpha, 1.0);
        let (lp, g) = model.log_posterior_and_grad(&[0.0; 18], &theta);
        assert_eq!(lp, 0.0);
        assert!(g.iter().all(|v| v.is_finite()));
        assert!(g.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn doubling_sigma2_halves_data_term() {
        let (model, alpha) = random_model(TemplateSpec::default(), 2, 1);
        let z = vec![0.05; 36];
        let prior = |t: &BmeParams| {
            let zz = DVector::from_column_slice(&z[..18]);
            let zz2 = DVector::from_column_slice(&z[18..]);
            -0.5 * (zz.dot(&(t.gamma_inv() * &zz)) + zz2.dot(&(t.gamma_inv() * &zz2)))
        };
        let (t1, t2) = (
            params(&model, alpha.clone(), 0.3),
            params(&model, alpha, 0.6),
        );
        let d1 = model.log_posterior(&z, &t1) - prior(&t1);
        let d2 = model.log_posterior(&z, &t2) - prior(&t2);
        assert!((d2 - 0.5 * d1).abs() < 1e-10 * d1.abs());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (model, _) = random_model(TemplateSpec::default(), 3, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..10 {
            let alpha: Vec<f64> = (0..25).map(|_| rng.random_range(0.0..2.0)).collect();
            let theta = params(&model, alpha, rng.random_range(0.02..0.5));
            let z: Vec<f64> = (0..54).map(|_| rng.random_range(-0.2..0.2)).collect();
            let g = model.grad_log_posterior(&z, &theta);
            let fd = finite_difference_grad(|x| model.log_posterior(x, &theta), &z);
            assert!(relative_error(&g, &fd) < 1e-5);
        }
    }

    #[test]
    fn validator_passes() {
        let (model, _) = random_model(TemplateSpec::square(10, 3, 2).unwrap(), 3, 3);
        let report = validate_model(&model, 50, 1);
        assert!(report.passed, "{report:?}");
    }

    #[test]
    fn blocks_match_full_posterior() {
        let (model, alpha) = random_model(TemplateSpec::default(), 3, 4);
        let theta = params(&model, alpha, 0.1);
        let z: Vec<f64> = (0..54).map(|i| 0.01 * (i as f64).sin()).collect();
        let (lp, g) = model.log_posterior_and_grad(&z, &theta);
        let mut total = 0.0;
        for (b, r) in model.latent_blocks().into_iter().enumerate() {
            let (l, gb) = model.block_log_posterior_and_grad(&z, b, &z[r.clone()], &theta);
            total += l;
            assert_eq!(gb, g[r].to_vec());
        }
        assert!((total - lp).abs() < 1e-9 * lp.abs());
    }

    #[test]
    fn statistics_are_consistent_with_rss() {
        let (model, alpha) = random_model(TemplateSpec::default(), 3, 5);
        let z: Vec<f64> = (0..54).map(|i| 0.02 * (i as f64).cos()).collect();
        let s = model.suff_stats(&z);
        assert!(model.in_stat_domain(&s));
        let (s1, s2, _) = model.split_stats(&s);
        let a = DVector::from_column_slice(&alpha);
        let rss = model.y_sq - 2.0 * a.dot(&DVector::from_column_slice(s1))
            + (a.transpose() * DMatrix::from_row_slice(25, 25, s2) * &a)[(0, 0)];
        let direct = model.residual_sum_of_squares(&z, &alpha);
        assert!((rss - direct).abs() < 1e-9 * direct);
        assert!(crate::model::norm(&s) <= model.stat_norm_bound(&z));
    }

    #[test]
    fn m_step_prior_cases() {
        let (model, _) = random_model(TemplateSpec::default(), 4, 6);
        let h = model.hyper().clone();
        let s = model.suff_stats(&vec![0.0; 72]);
        let theta = model.m_step(&s).unwrap();
        let expected = &h.sigma_g * (h.a_g / (4.0 + h.a_g));
        assert!((theta.gamma() - expected).norm() < 1e-12);

        // Images equal to an exactly representable template with zero
        // deformation and no prior pull: residual is only the prior floor.
        let spec = TemplateSpec::default();
        let alpha: Vec<f64> = (0..25).map(|i| 0.1 * i as f64).collect();
        let img = spec.eval_template(&alpha, spec.pixels());
        let mut hyper = BmeHyperPriors::for_spec(&spec, 0.04, 0.01).unwrap();
        hyper.sigma_p = DMatrix::identity(25, 25) * 1e12;
        let m = BmeModel::new(spec, hyper.clone(), vec![img; 3]).unwrap();
        let theta = m.m_step(&m.suff_stats(&[0.0; 54])).unwrap();
        let floor = hyper.a_p * hyper.sigma0_sq / (3.0 * 400.0 + hyper.a_p);
        assert!(
            (theta.sigma2 - floor).abs() < 1e-6 * floor,
            "{} vs {floor}",
            theta.sigma2
        );
    }

    #[test]
    fn m_step_with_zero_latents_is_ridge_regression() {
        let spec = TemplateSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let image: Vec<f64> = (0..400).map(|_| rng.random_range(0.0..2.0)).collect();
        let hyper = BmeHyperPriors::for_spec(&spec, 0.04, 0.01).unwrap();
        let n = 500;
        let model = BmeModel::new(spec.clone(), hyper, vec![image.clone(); n]).unwrap();
        let theta = model.m_step(&model.suff_stats(&vec![0.0; 18 * n])).unwrap();

        // Least squares of the image on the kernel basis via SVD.
        let phi = DMatrix::from_row_slice(400, 25, &spec.design_matrix(&[0.0; 18]));
        let ls = phi
            .clone()
            .svd(true, true)
            .solve(&DVector::from_column_slice(&image), 1e-12)
            .unwrap();
        let fitted = &phi * DVector::from_column_slice(&theta.alpha);
        let reference = &phi * ls;
        assert!((fitted - &reference).norm() < 1e-3 * reference.norm());
    }

    #[test]
    fn m_step_is_a_local_maximizer_of_the_surrogate() {
        let spec = TemplateSpec::square(6, 2, 1).unwrap();
        let (model, _) = random_model(spec, 5, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let z: Vec<f64> = (0..10).map(|_| rng.random_range(-0.2..0.2)).collect();
        let s = model.suff_stats(&z);
        let best = model.m_step(&s).unwrap();
        let l0 = model.surrogate(&s, &best);

        // Stationarity in every coordinate of (alpha, sigma2, Gamma), with
        // relative perturbations so the small variances get sensible steps.
        let flat = best.to_vec();
        let rebuild = |v: &[f64]| {
            let g = DMatrix::from_row_slice(2, 2, &v[5..9]);
            BmeParams::new(v[..4].to_vec(), v[4], symmetrize(&g))
        };
        let scaled = |u: &[f64]| {
            let v: Vec<f64> = flat.iter().zip(u).map(|(x, u)| x * (1.0 + u)).collect();
            rebuild(&v)
                .map(|t| model.surrogate(&s, &t))
                .unwrap_or(f64::NEG_INFINITY)
        };
        let grad = finite_difference_grad(scaled, &[0.0; 9]);
        let scale = 1.0 + l0.abs();
        assert!(grad.iter().all(|g| g.abs() < 1e-6 * scale), "{grad:?}");

        for _ in 0..500 {
            let v: Vec<f64> = flat
                .iter()
                .map(|x| x * (1.0 + rng.random_range(-0.05..0.05)))
                .collect();
            if let Ok(t) = rebuild(&v) {
                assert!(model.surrogate(&s, &t) <= l0 + 1e-9 * scale);
            }
        }
    }

    #[test]
    fn m_step_on_domain_boundary_is_valid() {
        let (model, _) = random_model(TemplateSpec::default(), 2, 9);
        // Zero data cross-products and a rank-deficient S2.
        let mut s = vec![0.0; model.stat_dim()];
        s[25] = 1.0;
        assert!(model.in_stat_domain(&s));
        let theta = model.m_step(&s).unwrap();
        assert!(model.theta_in_domain(&theta));
        let mut bad = s.clone();
        bad[25 + 625] = -1.0;
        assert!(!model.in_stat_domain(&bad));
    }

    #[test]
    fn m_step_is_deterministic() {
        let (model, _) = random_model(TemplateSpec::default(), 3, 10);
        let s = model.suff_stats(&vec![0.01; 54]);
        assert_eq!(model.m_step(&s).unwrap(), model.m_step(&s).unwrap());
    }
}
