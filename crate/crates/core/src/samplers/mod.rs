//! One-step Markov transitions targeting a [`LogDensity`]: the anisotropic
//! Langevin sampler (AMALA), isotropic MALA and a coordinate-wise
//! Metropolis-within-Gibbs sweep.

mod proposal;

pub use proposal::{
    anisotropic_term_amplitude, mala_proposal_logpdf, proposal_logpdf, truncated_drift,
    ProposalSpec,
};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::LogDensity;

/// Current point of a chain with the target quantities evaluated there.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub z: Vec<f64>,
    pub logp: f64,
    pub grad: Vec<f64>,
    pub drift: Vec<f64>,
}

impl ChainState {
    /// Evaluate the target at `z` and build a coherent cache. Fails if the
    /// log-density or its gradient is not finite there.
    pub fn new<T: LogDensity + ?Sized>(target: &T, z: Vec<f64>, b: f64) -> Result<Self> {
        if z.len() != target.dim() {
            return Err(Error::DimensionMismatch {
                expected: target.dim(),
                got: z.len(),
            });
        }
        let (logp, grad) = target.log_density_and_grad(&z);
        if !logp.is_finite() {
            return Err(Error::NonFinite("log-density at chain start"));
        }
        let drift = truncated_drift(&grad, b)?;
        Ok(Self {
            z,
            logp,
            grad,
            drift,
        })
    }

    /// Recompute-and-compare check of the cached values.
    pub fn is_coherent<T: LogDensity + ?Sized>(&self, target: &T, b: f64) -> bool {
        let (logp, grad) = target.log_density_and_grad(&self.z);
        logp == self.logp
            && grad == self.grad
            && truncated_drift(&grad, b)
                .map(|d| d == self.drift)
                .unwrap_or(false)
    }
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: ChainState,
    pub accepted: bool,
    /// `min(0, log alpha)`.
    pub log_alpha: f64,
}

/// Evaluate a candidate; `None` when the target or its gradient is not finite
/// there, which callers treat as an automatic rejection.
fn evaluate<T: LogDensity + ?Sized>(target: &T, z: Vec<f64>, b: f64) -> Option<ChainState> {
    let (logp, grad) = target.log_density_and_grad(&z);
    if !logp.is_finite() {
        return None;
    }
    let drift = truncated_drift(&grad, b).ok()?;
    Some(ChainState {
        z,
        logp,
        grad,
        drift,
    })
}

fn standard_normals<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn accept_reject<R: Rng + ?Sized>(
    rng: &mut R,
    current: &ChainState,
    candidate: Option<ChainState>,
    log_alpha: f64,
) -> StepOutcome {
    let u: f64 = rng.random();
    let log_alpha = log_alpha.min(0.0);
    match candidate {
        Some(state) if u.ln() < log_alpha => StepOutcome {
            state,
            accepted: true,
            log_alpha,
        },
        _ => StepOutcome {
            state: current.clone(),
            accepted: false,
            log_alpha,
        },
    }
}

/// One AMALA transition.
///
/// The candidate is `z + delta D + sqrt(delta) (sqrt(eps) xi + eta D)`, which
/// has covariance `delta (eps I + D D^T)`; `eta` is only drawn when `D != 0`.
/// The drift at an accepted candidate is cached in the returned state.
pub fn amala_step<T, R>(
    target: &T,
    state: &ChainState,
    spec: &ProposalSpec,
    rng: &mut R,
) -> StepOutcome
where
    T: LogDensity + ?Sized,
    R: Rng + ?Sized,
{
    let ProposalSpec { delta, b, eps } = *spec;
    let xi = standard_normals(rng, state.z.len());
    let drift_is_zero = state.drift.iter().all(|d| *d == 0.0);
    let eta: f64 = if drift_is_zero {
        0.0
    } else {
        StandardNormal.sample(rng)
    };

    let (sd_iso, sd_delta) = ((delta * eps).sqrt(), delta.sqrt());
    let z_c: Vec<f64> = state
        .z
        .iter()
        .zip(&state.drift)
        .zip(&xi)
        .map(|((z, d), x)| {
            if drift_is_zero {
                z + sd_iso * x
            } else {
                z + delta * d + sd_iso * x + sd_delta * eta * d
            }
        })
        .collect();

    let candidate = evaluate(target, z_c, b);
    let log_alpha = match &candidate {
        Some(c) => {
            (c.logp - state.logp) + proposal_logpdf(&c.z, &state.z, &c.drift, spec)
                - proposal_logpdf(&state.z, &c.z, &state.drift, spec)
        }
        None => f64::NEG_INFINITY,
    };
    accept_reject(rng, state, candidate, log_alpha)
}

/// One MALA transition: candidate `N(z + (delta/2) D, delta I)`.
pub fn mala_step<T, R>(
    target: &T,
    state: &ChainState,
    spec: &ProposalSpec,
    rng: &mut R,
) -> StepOutcome
where
    T: LogDensity + ?Sized,
    R: Rng + ?Sized,
{
    let ProposalSpec { delta, b, .. } = *spec;
    let sd = delta.sqrt();
    let xi = standard_normals(rng, state.z.len());
    let z_c: Vec<f64> = state
        .z
        .iter()
        .zip(&state.drift)
        .zip(&xi)
        .map(|((z, d), x)| z + 0.5 * delta * d + sd * x)
        .collect();

    let candidate = evaluate(target, z_c, b);
    let log_alpha = match &candidate {
        Some(c) => {
            (c.logp - state.logp) + mala_proposal_logpdf(&c.z, &state.z, &c.drift, delta)
                - mala_proposal_logpdf(&state.z, &c.z, &state.drift, delta)
        }
        None => f64::NEG_INFINITY,
    };
    accept_reject(rng, state, candidate, log_alpha)
}

/// One systematic-scan sweep of single-coordinate random-walk Metropolis
/// updates with proposal `N(z_i, per_coord_std^2)`.
///
/// `accepted` is true iff at least one coordinate moved. `log_alpha` holds the
/// log of the mean per-coordinate acceptance probability. The gradient cache
/// is refreshed once at the end of the sweep when the point moved.
pub fn hybrid_gibbs_step<T, R>(
    target: &T,
    state: &ChainState,
    per_coord_std: f64,
    b: f64,
    rng: &mut R,
) -> StepOutcome
where
    T: LogDensity + ?Sized,
    R: Rng + ?Sized,
{
    let l = state.z.len();
    let mut z = state.z.clone();
    let mut logp = state.logp;
    let mut moved = false;
    let mut alpha_sum = 0.0;
    for i in 0..l {
        let old = z[i];
        let step: f64 = StandardNormal.sample(rng);
        z[i] = old + per_coord_std * step;
        let lp_c = target.log_density(&z);
        let log_alpha = if lp_c.is_finite() {
            (lp_c - logp).min(0.0)
        } else {
            f64::NEG_INFINITY
        };
        alpha_sum += log_alpha.exp();
        let u: f64 = rng.random();
        if u.ln() < log_alpha {
            logp = lp_c;
            moved = true;
        } else {
            z[i] = old;
        }
    }
    let log_alpha = (alpha_sum / l as f64).ln();

    if !moved {
        return StepOutcome {
            state: state.clone(),
            accepted: false,
            log_alpha,
        };
    }
    match evaluate(target, z, b) {
        Some(state) => StepOutcome {
            state,
            accepted: true,
            log_alpha,
        },
        // The sweep only accepts finite log-densities; a non-finite gradient
        // at the end leaves the chain where it started.
        None => StepOutcome {
            state: state.clone(),
            accepted: false,
            log_alpha: f64::NEG_INFINITY,
        },
    }
}

/// Transition kernel selector used by the estimation engine and the CLI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sampler {
    Amala(ProposalSpec),
    Mala(ProposalSpec),
    HybridGibbs { per_coord_std: f64 },
}

impl Sampler {
    /// Truncation threshold used for the drift cache.
    pub fn drift_threshold(&self) -> f64 {
        match self {
            Sampler::Amala(spec) | Sampler::Mala(spec) => spec.b,
            Sampler::HybridGibbs { .. } => f64::INFINITY,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Sampler::Amala(_) => "amala",
            Sampler::Mala(_) => "mala",
            Sampler::HybridGibbs { .. } => "hybrid-gibbs",
        }
    }

    pub fn step<T, R>(&self, target: &T, state: &ChainState, rng: &mut R) -> StepOutcome
    where
        T: LogDensity + ?Sized,
        R: Rng + ?Sized,
    {
        match self {
            Sampler::Amala(spec) => amala_step(target, state, spec, rng),
            Sampler::Mala(spec) => mala_step(target, state, spec, rng),
            Sampler::HybridGibbs { per_coord_std } => {
                hybrid_gibbs_step(target, state, *per_coord_std, f64::INFINITY, rng)
            }
        }
    }
}

#[cfg(test)]
mod tests;
