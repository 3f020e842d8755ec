//! Models with exact answers: an anisotropic Gaussian target for sampler
//! benchmarks, simple 1-d targets, and a balanced one-way random-effects
//! model whose maximum-likelihood estimate is available in closed form.

use std::f64::consts::PI;
use std::io::{BufRead, Write};
use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{norm, LatentModel, LogDensity};

/// Floor applied to variance components so the M-step stays inside the open
/// parameter domain.
pub const VARIANCE_FLOOR: f64 = 1e-10;

/// `N(0, I_dim)`, unnormalized.
#[derive(Debug, Clone, Copy)]
pub struct StandardGaussian {
    pub dim: usize,
}

impl LogDensity for StandardGaussian {
    fn dim(&self) -> usize {
        self.dim
    }
    fn log_density(&self, x: &[f64]) -> f64 {
        -0.5 * x.iter().map(|v| v * v).sum::<f64>()
    }
    fn grad_log_density(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|v| -v).collect()
    }
}

/// Standard Student-t with `nu` degrees of freedom in one dimension.
#[derive(Debug, Clone, Copy)]
pub struct StudentT {
    pub nu: f64,
}

impl LogDensity for StudentT {
    fn dim(&self) -> usize {
        1
    }
    fn log_density(&self, x: &[f64]) -> f64 {
        -0.5 * (self.nu + 1.0) * (1.0 + x[0] * x[0] / self.nu).ln()
    }
    fn grad_log_density(&self, x: &[f64]) -> Vec<f64> {
        vec![-(self.nu + 1.0) * x[0] / (self.nu + x[0] * x[0])]
    }
}

/// Zero-mean Gaussian with covariance `R diag(eigenvalues) R^T`, `R` a
/// seeded random rotation.
#[derive(Debug, Clone)]
pub struct AnisoGaussianTarget {
    pub eigenvalues: Vec<f64>,
    pub rotation: DMatrix<f64>,
    precision: DMatrix<f64>,
}

impl AnisoGaussianTarget {
    pub fn new(eigenvalues: Vec<f64>, rotation_seed: u64) -> Result<Self> {
        if eigenvalues.is_empty() || eigenvalues.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::InvalidParameter(
                "eigenvalues must be positive".into(),
            ));
        }
        let dim = eigenvalues.len();
        let rotation = random_rotation(dim, rotation_seed);
        let inv = DMatrix::from_diagonal(&DVector::from_iterator(
            dim,
            eigenvalues.iter().map(|e| 1.0 / e),
        ));
        let precision = &rotation * inv * rotation.transpose();
        Ok(Self {
            eigenvalues,
            rotation,
            precision,
        })
    }

    /// Eigenvalues evenly spaced over `[lo, hi]`.
    pub fn linspace(dim: usize, lo: f64, hi: f64, rotation_seed: u64) -> Result<Self> {
        let eig = if dim == 1 {
            vec![lo]
        } else {
            (0..dim)
                .map(|i| lo + (hi - lo) * i as f64 / (dim - 1) as f64)
                .collect()
        };
        Self::new(eig, rotation_seed)
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        let d = DMatrix::from_diagonal(&DVector::from_column_slice(&self.eigenvalues));
        &self.rotation * d * self.rotation.transpose()
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }
}

impl LogDensity for AnisoGaussianTarget {
    fn dim(&self) -> usize {
        self.eigenvalues.len()
    }
    fn log_density(&self, x: &[f64]) -> f64 {
        self.log_density_and_grad(x).0
    }
    fn grad_log_density(&self, x: &[f64]) -> Vec<f64> {
        self.log_density_and_grad(x).1
    }
    fn log_density_and_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let xv = DVector::from_column_slice(x);
        let px = &self.precision * &xv;
        (-0.5 * xv.dot(&px), px.iter().map(|v| -v).collect())
    }
}

/// Haar-distributed orthogonal matrix from the QR factorization of a
/// Gaussian matrix, with the sign convention `diag(R) > 0`.
fn random_rotation(dim: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(dim, dim, |_, _| StandardNormal.sample(&mut rng));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyParams {
    pub mu: f64,
    pub tau2: f64,
    pub sigma2: f64,
}

impl ToyParams {
    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.mu, self.tau2, self.sigma2]
    }
}

/// Closed-form maximum-likelihood estimate. `at_boundary` is set when the
/// unconstrained solution has a non-positive variance component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlEstimate {
    pub theta: ToyParams,
    pub at_boundary: bool,
}

/// Balanced one-way random effects: `y_ij = z_i + e_ij`,
/// `z_i ~ N(mu, tau2)`, `e_ij ~ N(0, sigma2)`.
///
/// Sufficient statistics are `(sum z_i, sum z_i^2, sum_ij (y_ij - z_i)^2)`.
#[derive(Debug, Clone)]
pub struct RandomEffectsModel {
    n_groups: usize,
    n_reps: usize,
    data: Vec<f64>,
    group_sums: Vec<f64>,
    group_sq_sums: Vec<f64>,
}

impl RandomEffectsModel {
    /// `data` is row-major `n_groups x n_reps`.
    pub fn new(n_groups: usize, n_reps: usize, data: Vec<f64>) -> Result<Self> {
        if n_groups == 0 || n_reps == 0 {
            return Err(Error::InvalidParameter(
                "need at least one group and one replicate".into(),
            ));
        }
        if data.len() != n_groups * n_reps {
            return Err(Error::DimensionMismatch {
                expected: n_groups * n_reps,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("observations"));
        }
        let group_sums = data.chunks(n_reps).map(|g| g.iter().sum()).collect();
        let group_sq_sums = data
            .chunks(n_reps)
            .map(|g| g.iter().map(|v| v * v).sum())
            .collect();
        Ok(Self {
            n_groups,
            n_reps,
            data,
            group_sums,
            group_sq_sums,
        })
    }

    pub fn simulate<R: Rng + ?Sized>(
        n_groups: usize,
        n_reps: usize,
        truth: ToyParams,
        rng: &mut R,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(n_groups * n_reps);
        for _ in 0..n_groups {
            let z = truth.mu + truth.tau2.sqrt() * crate::std_normal(rng);
            for _ in 0..n_reps {
                let e: f64 = crate::std_normal(rng);
                data.push(z + truth.sigma2.sqrt() * e);
            }
        }
        Self::new(n_groups, n_reps, data)
    }

    pub fn n_groups(&self) -> usize {
        self.n_groups
    }

    pub fn n_reps(&self) -> usize {
        self.n_reps
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    fn group_means(&self) -> impl Iterator<Item = f64> + '_ {
        let j = self.n_reps as f64;
        self.group_sums.iter().map(move |s| s / j)
    }

    /// Posterior means `m_i` and common variance `v` of the latent group
    /// effects under `theta`.
    pub fn posterior_moments(&self, theta: &ToyParams) -> (Vec<f64>, f64) {
        let j = self.n_reps as f64;
        let v = 1.0 / (1.0 / theta.tau2 + j / theta.sigma2);
        let means = self
            .group_sums
            .iter()
            .map(|s| v * (theta.mu / theta.tau2 + s / theta.sigma2))
            .collect();
        (means, v)
    }

    /// Independent draw from the Gaussian posterior of the group effects.
    pub fn exact_posterior_sample<R: Rng + ?Sized>(
        &self,
        theta: &ToyParams,
        rng: &mut R,
    ) -> Vec<f64> {
        let (means, v) = self.posterior_moments(theta);
        let sd = v.sqrt();
        means
            .into_iter()
            .map(|m| m + sd * crate::std_normal(rng))
            .collect()
    }

    fn between_within(&self) -> (f64, f64, f64) {
        let j = self.n_reps as f64;
        let grand = self.group_sums.iter().sum::<f64>() / (self.n_groups as f64 * j);
        let ssb: f64 = self
            .group_means()
            .map(|m| j * (m - grand) * (m - grand))
            .sum();
        let ssw: f64 = self
            .group_sq_sums
            .iter()
            .zip(&self.group_sums)
            .map(|(sq, s)| (sq - s * s / j).max(0.0))
            .sum();
        (grand, ssb, ssw)
    }

    /// Maximizer of the observed likelihood.
    ///
    /// With `SSB = J sum (ybar_i - ybar)^2` and `SSW = sum (y_ij - ybar_i)^2`,
    /// the marginal likelihood separates into a within-group part in
    /// `sigma2` and a between-group part in `lambda = sigma2 + J tau2`, giving
    /// `sigma2 = SSW / (n (J-1))`, `lambda = SSB / n`. If that makes
    /// `tau2 < 0` the maximum is on `tau2 = 0` with
    /// `sigma2 = (SSW + SSB) / (n J)`.
    pub fn ml_oracle(&self) -> MlEstimate {
        let n = self.n_groups as f64;
        let j = self.n_reps as f64;
        let (mu, ssb, ssw) = self.between_within();
        if self.n_reps > 1 {
            let sigma2 = ssw / (n * (j - 1.0));
            let tau2 = (ssb / n - sigma2) / j;
            if tau2 > 0.0 && sigma2 > 0.0 {
                return MlEstimate {
                    theta: ToyParams { mu, tau2, sigma2 },
                    at_boundary: false,
                };
            }
        }
        let sigma2 = (ssw + ssb) / (n * j);
        MlEstimate {
            theta: ToyParams {
                mu,
                tau2: 0.0,
                sigma2,
            },
            at_boundary: true,
        }
    }

    /// Gaussian marginal log-likelihood `log g(y; theta)`.
    pub fn observed_log_likelihood(&self, theta: &ToyParams) -> f64 {
        let n = self.n_groups as f64;
        let j = self.n_reps as f64;
        let lambda = theta.sigma2 + j * theta.tau2;
        let mut within = 0.0;
        let mut between = 0.0;
        for (i, m) in self.group_means().enumerate() {
            within += self.group_sq_sums[i] - j * m * m;
            between += j * (m - theta.mu) * (m - theta.mu);
        }
        -0.5 * (n * j * (2.0 * PI).ln()
            + n * (j - 1.0) * theta.sigma2.ln()
            + within.max(0.0) / theta.sigma2
            + n * lambda.ln()
            + between / lambda)
    }

    fn group_term(&self, i: usize, z: f64, theta: &ToyParams) -> (f64, f64) {
        let j = self.n_reps as f64;
        let sum = self.group_sums[i];
        let resid = self.group_sq_sums[i] - 2.0 * z * sum + j * z * z;
        let lp = -(z - theta.mu).powi(2) / (2.0 * theta.tau2) - resid / (2.0 * theta.sigma2);
        let g = -(z - theta.mu) / theta.tau2 + (sum - j * z) / theta.sigma2;
        (lp, g)
    }

    /// CSV with header `group,rep,value`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "group,rep,value")?;
        for (idx, v) in self.data.iter().enumerate() {
            writeln!(
                out,
                "{},{},{:.16e}",
                idx / self.n_reps,
                idx % self.n_reps,
                v
            )?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.starts_with("group")) {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let parse = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|_| Error::Format(format!("line {}: bad number {s:?}", lineno + 1)))
            };
            if fields.len() != 3 {
                return Err(Error::Format(format!(
                    "line {}: expected group,rep,value",
                    lineno + 1
                )));
            }
            rows.push((
                parse(fields[0])? as usize,
                parse(fields[1])? as usize,
                parse(fields[2])?,
            ));
        }
        let n = rows.iter().map(|r| r.0 + 1).max().unwrap_or(0);
        let j = rows.iter().map(|r| r.1 + 1).max().unwrap_or(0);
        if rows.len() != n * j {
            return Err(Error::Format(
                "unbalanced design: every group needs the same replicates".into(),
            ));
        }
        let mut data = vec![f64::NAN; n * j];
        for (g, r, v) in rows {
            data[g * j + r] = v;
        }
        if data.iter().any(|v| v.is_nan()) {
            return Err(Error::Format(
                "duplicate or missing (group, rep) cells".into(),
            ));
        }
        Self::new(n, j, data)
    }
}

impl LatentModel for RandomEffectsModel {
    type Theta = ToyParams;

    fn latent_dim(&self) -> usize {
        self.n_groups
    }

    fn stat_dim(&self) -> usize {
        3
    }

    fn suff_stats(&self, z: &[f64]) -> Vec<f64> {
        let j = self.n_reps as f64;
        let mut s = [0.0; 3];
        for (i, zi) in z.iter().enumerate() {
            s[0] += zi;
            s[1] += zi * zi;
            s[2] += self.group_sq_sums[i] - 2.0 * zi * self.group_sums[i] + j * zi * zi;
        }
        s.to_vec()
    }

    /// Finite, nonnegative residual sum, and `n s2 >= s1^2` up to rounding.
    fn in_stat_domain(&self, s: &[f64]) -> bool {
        let n = self.n_groups as f64;
        s.len() == 3
            && s.iter().all(|v| v.is_finite())
            && s[2] >= 0.0
            && n * s[1] - s[0] * s[0] >= -1e-9 * (n * s[1]).abs().max(1.0)
    }

    fn m_step(&self, s: &[f64]) -> Result<ToyParams> {
        if !self.in_stat_domain(s) {
            return Err(Error::Domain(format!("statistic {s:?} outside the domain")));
        }
        let n = self.n_groups as f64;
        let mu = s[0] / n;
        let tau2 = (s[1] / n - mu * mu).max(VARIANCE_FLOOR);
        let sigma2 = (s[2] / (n * self.n_reps as f64)).max(VARIANCE_FLOOR);
        Ok(ToyParams { mu, tau2, sigma2 })
    }

    fn theta_in_domain(&self, theta: &ToyParams) -> bool {
        theta.mu.is_finite()
            && theta.tau2.is_finite()
            && theta.sigma2.is_finite()
            && theta.tau2 > 0.0
            && theta.sigma2 > 0.0
    }

    fn theta_values(&self, theta: &ToyParams) -> Vec<f64> {
        theta.to_vec()
    }

    fn theta_names(&self) -> Vec<String> {
        vec!["mu".into(), "tau2".into(), "sigma2".into()]
    }

    fn log_posterior(&self, z: &[f64], theta: &ToyParams) -> f64 {
        z.iter()
            .enumerate()
            .map(|(i, zi)| self.group_term(i, *zi, theta).0)
            .sum()
    }

    fn grad_log_posterior(&self, z: &[f64], theta: &ToyParams) -> Vec<f64> {
        z.iter()
            .enumerate()
            .map(|(i, zi)| self.group_term(i, *zi, theta).1)
            .collect()
    }

    fn log_posterior_and_grad(&self, z: &[f64], theta: &ToyParams) -> (f64, Vec<f64>) {
        let mut lp = 0.0;
        let grad = z
            .iter()
            .enumerate()
            .map(|(i, zi)| {
                let (l, g) = self.group_term(i, *zi, theta);
                lp += l;
                g
            })
            .collect();
        (lp, grad)
    }

    /// `sqrt(n)|z| + (1 + 2J)|z|^2 + 2 sum y^2`.
    fn stat_norm_bound(&self, z: &[f64]) -> f64 {
        let nz = norm(z);
        let j = self.n_reps as f64;
        let y2: f64 = self.group_sq_sums.iter().sum();
        (self.n_groups as f64).sqrt() * nz + (1.0 + 2.0 * j) * nz * nz + 2.0 * y2 + 1e-12
    }

    /// Group means, so the first M-step returns moment estimates.
    fn initial_latent(&self) -> Vec<f64> {
        self.group_means().collect()
    }

    fn latent_blocks(&self) -> Vec<Range<usize>> {
        (0..self.n_groups).map(|i| i..i + 1).collect()
    }

    fn block_log_posterior_and_grad(
        &self,
        _z: &[f64],
        block: usize,
        x: &[f64],
        theta: &ToyParams,
    ) -> (f64, Vec<f64>) {
        let (lp, g) = self.group_term(block, x[0], theta);
        (lp, vec![g])
    }
}
