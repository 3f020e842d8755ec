//! Gaussian proposals of the Langevin samplers.
//!
//! The anisotropic proposal from `x` is `N(x + delta D, delta (eps I + D D^T))`
//! with `D` the truncated gradient. Its density is evaluated in `O(l)` using
//!
//! ```text
//! Sigma^-1 = (I - D D^T / (eps + |D|^2)) / eps
//! det Sigma = eps^(l-1) (eps + |D|^2)
//! ```
//!
//! so the dense covariance is never formed.

use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProposalSpec {
    /// Step scale.
    pub delta: f64,
    /// Drift truncation threshold.
    pub b: f64,
    /// Isotropic regularization of the covariance.
    pub eps: f64,
}

impl ProposalSpec {
    pub fn new(delta: f64, b: f64, eps: f64) -> Result<Self> {
        let spec = Self { delta, b, eps };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("delta", self.delta), ("b", self.b), ("eps", self.eps)] {
            if !(v > 0.0) || v.is_nan() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be > 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Eigenvalue range `[delta eps, delta (eps + b^2)]` of the proposal
    /// covariance over all possible drifts.
    pub fn covariance_eigen_bounds(&self) -> (f64, f64) {
        (
            self.delta * self.eps,
            self.delta * (self.eps + self.b * self.b),
        )
    }
}

impl Default for ProposalSpec {
    fn default() -> Self {
        Self {
            delta: 1e-3,
            b: 1000.0,
            eps: 1e-4,
        }
    }
}

/// `(b / max(b, |grad|)) grad`.
pub fn truncated_drift(grad: &[f64], b: f64) -> Result<Vec<f64>> {
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("gradient"));
    }
    let n = dot(grad, grad).sqrt();
    if n <= b {
        return Ok(grad.to_vec());
    }
    let factor = b / n;
    Ok(grad.iter().map(|g| g * factor).collect())
}

/// Sole nonzero eigenvalue of `D D^T`.
pub fn anisotropic_term_amplitude(drift: &[f64]) -> f64 {
    dot(drift, drift)
}

/// Log-density of the anisotropic proposal from `from` evaluated at `to`.
pub fn proposal_logpdf(
    from: &[f64],
    to: &[f64],
    drift_at_from: &[f64],
    spec: &ProposalSpec,
) -> f64 {
    let l = from.len() as f64;
    let ProposalSpec { delta, eps, .. } = *spec;
    let d2 = dot(drift_at_from, drift_at_from);

    let r: Vec<f64> = from
        .iter()
        .zip(to)
        .zip(drift_at_from)
        .map(|((f, t), d)| t - (f + delta * d))
        .collect();
    // Split r into its component along D and the orthogonal rest; the
    // quadratic form is |r_perp|^2 / eps + (r.D)^2 / (|D|^2 (eps + |D|^2)),
    // which avoids cancellation when r is nearly parallel to D.
    let quad = if d2 > 0.0 {
        let rd = dot(&r, drift_at_from);
        let c = rd / d2;
        let perp2: f64 = r
            .iter()
            .zip(drift_at_from)
            .map(|(ri, di)| (ri - c * di).powi(2))
            .sum();
        (perp2 / eps + rd * rd / (d2 * (eps + d2))) / delta
    } else {
        dot(&r, &r) / (delta * eps)
    };
    let log_det = l * delta.ln() + (l - 1.0) * eps.ln() + (eps + d2).ln();
    -0.5 * (l * (2.0 * PI).ln() + log_det + quad)
}

/// Log-density of the MALA proposal `N(from + (delta/2) D, delta I)` at `to`.
pub fn mala_proposal_logpdf(from: &[f64], to: &[f64], drift_at_from: &[f64], delta: f64) -> f64 {
    let l = from.len() as f64;
    let r2: f64 = from
        .iter()
        .zip(to)
        .zip(drift_at_from)
        .map(|((f, t), d)| {
            let r = t - (f + 0.5 * delta * d);
            r * r
        })
        .sum();
    -0.5 * (l * (2.0 * PI * delta).ln() + r2 / delta)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
