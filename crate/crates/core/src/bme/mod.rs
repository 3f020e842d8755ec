//! Kernel deformable-template model for 2-d gray-level images.
//!
//! A template `I_alpha` is a Gaussian-kernel expansion on photometric control
//! points; each observation sees it through a displacement field `m_z`, a
//! kernel expansion on geometric control points whose coefficients `z` are
//! Gaussian with covariance `Gamma`. Evaluating the template at displaced
//! positions is exact, so the model and its gradient involve no image
//! interpolation.

mod classify;
mod io;
mod model;
mod params;
mod spec;
mod synthetic;

pub use classify::{class_scores, classify, laplace_log_likelihood, map_latent, MapFit};
pub use io::{read_pgm, write_pgm, FittedModel, Pgm};
pub use model::BmeModel;
pub use params::{BmeHyperPriors, BmeParams};
pub use spec::{cell_centred_lattice, gaussian_kernel, gram, Point, TemplateSpec};
pub use synthetic::{
    render, sample_deformation, sample_independent, sample_synthetic,
    smooth_deformation_covariance, template_coefficients, SyntheticSample,
};
