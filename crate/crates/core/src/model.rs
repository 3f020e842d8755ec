//! The contract every estimable model satisfies, plus a mechanical validator
//! for the parts of it that can be checked numerically.
//!
//! A model lives in the curved exponential family: its complete likelihood
//! depends on the latent variables only through a sufficient statistic
//! `S(z)`, and the M-step is a closed-form map from statistics to
//! parameters. Samplers only ever see an unnormalized log-posterior and its
//! gradient, exposed through [`LogDensity`].

use std::fmt;
use std::ops::Range;
use std::panic::{catch_unwind, AssertUnwindSafe};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;

/// A differentiable, unnormalized log-density on `R^dim`.
pub trait LogDensity {
    fn dim(&self) -> usize;

    fn log_density(&self, x: &[f64]) -> f64;

    fn grad_log_density(&self, x: &[f64]) -> Vec<f64>;

    fn log_density_and_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        (self.log_density(x), self.grad_log_density(x))
    }
}

/// Latent-variable model with sufficient statistics and a closed-form M-step.
///
/// Implementations must be pure functions of their arguments so that a
/// shared model can be evaluated from several threads at once.
pub trait LatentModel: Sync {
    type Theta: Clone + fmt::Debug + Send + Sync;

    fn latent_dim(&self) -> usize;

    fn stat_dim(&self) -> usize;

    fn suff_stats(&self, z: &[f64]) -> Vec<f64>;

    /// Membership in the model's statistic domain. The default only asks for
    /// finite entries.
    fn in_stat_domain(&self, s: &[f64]) -> bool {
        s.iter().all(|v| v.is_finite())
    }

    /// Maximizer of the penalized complete-data surrogate for statistic `s`.
    fn m_step(&self, s: &[f64]) -> Result<Self::Theta>;

    fn theta_in_domain(&self, theta: &Self::Theta) -> bool;

    /// Flat view of the parameter, used for trajectories and CSV output.
    fn theta_values(&self, theta: &Self::Theta) -> Vec<f64>;

    fn theta_names(&self) -> Vec<String>;

    /// `log p(z | y; theta)` up to an additive constant.
    fn log_posterior(&self, z: &[f64], theta: &Self::Theta) -> f64;

    fn grad_log_posterior(&self, z: &[f64], theta: &Self::Theta) -> Vec<f64>;

    fn log_posterior_and_grad(&self, z: &[f64], theta: &Self::Theta) -> (f64, Vec<f64>) {
        (
            self.log_posterior(z, theta),
            self.grad_log_posterior(z, theta),
        )
    }

    /// Polynomial bound `P(z)` with `||S(z)|| <= P(z)`.
    fn stat_norm_bound(&self, z: &[f64]) -> f64;

    fn initial_latent(&self) -> Vec<f64> {
        vec![0.0; self.latent_dim()]
    }

    /// Partition of the latent coordinates into blocks that a sweep may
    /// update one at a time. One block covering everything by default.
    #[allow(clippy::single_range_in_vec_init)]
    fn latent_blocks(&self) -> Vec<Range<usize>> {
        vec![0..self.latent_dim()]
    }

    /// Log-posterior as a function of one block with the rest of `z` held
    /// fixed, and its gradient restricted to that block. Up to a constant
    /// that may depend on the other blocks.
    ///
    /// The default evaluates the full posterior; factorized models override
    /// it with the block's own term.
    fn block_log_posterior_and_grad(
        &self,
        z: &[f64],
        block: usize,
        x: &[f64],
        theta: &Self::Theta,
    ) -> (f64, Vec<f64>) {
        let range = self.latent_blocks()[block].clone();
        let mut full = z.to_vec();
        full[range.clone()].copy_from_slice(x);
        let (lp, grad) = self.log_posterior_and_grad(&full, theta);
        (lp, grad[range].to_vec())
    }

    fn block_log_posterior(&self, z: &[f64], block: usize, x: &[f64], theta: &Self::Theta) -> f64 {
        self.block_log_posterior_and_grad(z, block, x, theta).0
    }
}

/// The posterior of a model at a fixed parameter, viewed as a [`LogDensity`].
pub struct Posterior<'a, M: LatentModel> {
    pub model: &'a M,
    pub theta: &'a M::Theta,
}

impl<'a, M: LatentModel> Posterior<'a, M> {
    pub fn new(model: &'a M, theta: &'a M::Theta) -> Self {
        Self { model, theta }
    }
}

impl<M: LatentModel> LogDensity for Posterior<'_, M> {
    fn dim(&self) -> usize {
        self.model.latent_dim()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        self.model.log_posterior(x, self.theta)
    }

    fn grad_log_density(&self, x: &[f64]) -> Vec<f64> {
        self.model.grad_log_posterior(x, self.theta)
    }

    fn log_density_and_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        self.model.log_posterior_and_grad(x, self.theta)
    }
}

/// Conditional posterior of one latent block given the others.
pub struct BlockPosterior<'a, M: LatentModel> {
    pub model: &'a M,
    pub theta: &'a M::Theta,
    pub z: &'a [f64],
    pub block: usize,
    pub len: usize,
}

impl<M: LatentModel> LogDensity for BlockPosterior<'_, M> {
    fn dim(&self) -> usize {
        self.len
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        self.model
            .block_log_posterior(self.z, self.block, x, self.theta)
    }

    fn grad_log_density(&self, x: &[f64]) -> Vec<f64> {
        self.log_density_and_grad(x).1
    }

    fn log_density_and_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        self.model
            .block_log_posterior_and_grad(self.z, self.block, x, self.theta)
    }
}

/// Central finite-difference gradient with per-coordinate step
/// `1e-5 * (1 + |x_i|)`.
pub fn finite_difference_grad<F: Fn(&[f64]) -> f64>(f: F, x: &[f64]) -> Vec<f64> {
    let mut work = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = 1e-5 * (1.0 + x[i].abs());
            work[i] = x[i] + h;
            let up = f(&work);
            work[i] = x[i] - h;
            let down = f(&work);
            work[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `||a - b|| / max(||a||, ||b||)`, zero when both vanish.
pub fn relative_error(analytic: &[f64], reference: &[f64]) -> f64 {
    let diff = analytic
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let scale = norm(analytic).max(norm(reference));
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub const GRADIENT_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct ProbeResult {
    pub index: usize,
    pub grad_rel_error: f64,
    pub failure: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub probes: Vec<ProbeResult>,
    pub max_grad_error: f64,
    pub domain_violations: usize,
    pub passed: bool,
}

/// Probe a model at random latent points and check what can be checked:
/// analytic gradient against finite differences, M-step output inside the
/// parameter domain, statistics finite and under the declared bound.
///
/// The probe parameter is `m_step(S(z0 + xi))` with `z0` the model's initial
/// latent and `xi` standard Gaussian, so every probe also exercises the M-step.
pub fn validate_model<M: LatentModel>(
    model: &M,
    probe_count: usize,
    seed: u64,
) -> ValidationReport {
    assert!(probe_count >= 1, "probe_count must be at least 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = model.latent_dim();
    let base = model.initial_latent();

    let mut probes = Vec::with_capacity(probe_count);
    for index in 0..probe_count {
        let z: Vec<f64> = (0..l).map(|_| StandardNormal.sample(&mut rng)).collect();
        let z_theta: Vec<f64> = base
            .iter()
            .map(|b| b + crate::std_normal(&mut rng))
            .collect();
        let outcome = catch_unwind(AssertUnwindSafe(|| probe_once(model, &z, &z_theta)));
        probes.push(match outcome {
            Ok(Ok(err)) => ProbeResult {
                index,
                grad_rel_error: err,
                failure: None,
            },
            Ok(Err(msg)) => ProbeResult {
                index,
                grad_rel_error: f64::NAN,
                failure: Some(msg),
            },
            Err(_) => ProbeResult {
                index,
                grad_rel_error: f64::NAN,
                failure: Some("model evaluation panicked".into()),
            },
        });
    }

    let max_grad_error = probes
        .iter()
        .map(|p| p.grad_rel_error)
        .fold(0.0_f64, |acc, e| {
            if e.is_nan() {
                f64::INFINITY
            } else {
                acc.max(e)
            }
        });
    let domain_violations = probes.iter().filter(|p| p.failure.is_some()).count();
    let passed = domain_violations == 0 && max_grad_error <= GRADIENT_TOLERANCE;
    ValidationReport {
        probes,
        max_grad_error,
        domain_violations,
        passed,
    }
}

fn probe_once<M: LatentModel>(
    model: &M,
    z: &[f64],
    z_theta: &[f64],
) -> std::result::Result<f64, String> {
    let s = model.suff_stats(z_theta);
    if !model.in_stat_domain(&s) {
        return Err("sufficient statistic outside its domain".into());
    }
    if norm(&s) > model.stat_norm_bound(z_theta) {
        return Err("sufficient statistic exceeds its polynomial bound".into());
    }
    let theta = model
        .m_step(&s)
        .map_err(|e| format!("m_step failed: {e}"))?;
    if !model.theta_in_domain(&theta) {
        return Err("m_step output outside the parameter domain".into());
    }

    let (lp, grad) = model.log_posterior_and_grad(z, &theta);
    if !lp.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err("non-finite log-posterior or gradient".into());
    }
    let fd = finite_difference_grad(|x| model.log_posterior(x, &theta), z);
    Ok(relative_error(&grad, &fd))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    /// z ~ N(0, 1) posterior with a trivial statistic; optionally lies about
    /// its gradient.
    struct StdNormal {
        zero_grad: bool,
    }

    impl LatentModel for StdNormal {
        type Theta = f64;
        fn latent_dim(&self) -> usize {
            1
        }
        fn stat_dim(&self) -> usize {
            1
        }
        fn suff_stats(&self, z: &[f64]) -> Vec<f64> {
            vec![z[0] * z[0]]
        }
        fn m_step(&self, s: &[f64]) -> Result<f64> {
            if s[0] < 0.0 {
                return Err(Error::Domain("negative second moment".into()));
            }
            Ok(s[0].max(1e-10))
        }
        fn theta_in_domain(&self, theta: &f64) -> bool {
            *theta > 0.0
        }
        fn theta_values(&self, theta: &f64) -> Vec<f64> {
            vec![*theta]
        }
        fn theta_names(&self) -> Vec<String> {
            vec!["v".into()]
        }
        fn log_posterior(&self, z: &[f64], _: &f64) -> f64 {
            -0.5 * z[0] * z[0]
        }
        fn grad_log_posterior(&self, z: &[f64], _: &f64) -> Vec<f64> {
            if self.zero_grad {
                vec![0.0]
            } else {
                vec![-z[0]]
            }
        }
        fn stat_norm_bound(&self, z: &[f64]) -> f64 {
            1.0 + z[0] * z[0]
        }
    }

    #[test]
    fn single_probe_linear_gradient_passes() {
        let report = validate_model(&StdNormal { zero_grad: false }, 1, 3);
        assert!(report.passed, "{report:?}");
        assert!(report.max_grad_error < 1e-9);
    }

    #[test]
    fn zero_gradient_on_curved_density_fails() {
        let report = validate_model(&StdNormal { zero_grad: true }, 5, 3);
        assert!(!report.passed);
        assert!(report.max_grad_error > 0.5);
    }

    #[test]
    fn finite_differences_of_quadratic() {
        let g = finite_difference_grad(|x| x[0] * x[0] + 3.0 * x[1], &[2.0, -1.0]);
        assert!((g[0] - 4.0).abs() < 1e-8);
        assert!((g[1] - 3.0).abs() < 1e-8);
    }

    #[test]
    fn relative_error_handles_zero_vectors() {
        assert_eq!(relative_error(&[0.0, 0.0], &[0.0, 0.0]), 0.0);
        assert!((relative_error(&[1.0, 0.0], &[0.0, 0.0]) - 1.0).abs() < 1e-15);
    }
}
