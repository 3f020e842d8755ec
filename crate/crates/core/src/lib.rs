//! Maximum-likelihood estimation in latent-variable models with an
//! anisotropic Metropolis-adjusted Langevin sampler (AMALA) driving a
//! truncated stochastic-approximation EM (SAEM) loop.
//!
//! * [`model`]: the latent-model contract and its numerical validator.
//! * [`samplers`]: AMALA, MALA and Metropolis-within-Gibbs transitions.
//! * [`saem`]: step sizes, truncation on random boundaries, the estimation
//!   loop and the repeated-run study of the final estimates.
//! * [`toy`]: Gaussian targets and a random-effects model with exact answers.
//! * [`bme`]: the kernel deformable-template image model.
//! * [`diagnostics`]: chain summaries.
//! * [`experiment`]: config files and the experiment runner behind the CLI.

// `!(x > 0.0)` is used on purpose: it rejects NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bme;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod model;
pub mod saem;
pub mod samplers;
pub mod toy;

pub use error::{Error, Result};
pub use model::{LatentModel, LogDensity};

pub(crate) fn std_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    rand_distr::Distribution::<f64>::sample(&rand_distr::StandardNormal, rng)
}
