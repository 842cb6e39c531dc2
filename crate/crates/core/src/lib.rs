//! Bayesian varying-coefficient mixed models for group-testing data.
//!
//! Individuals are screened in pools with imperfect assays; true statuses
//! are latent. The sampler combines Pólya-Gamma augmentation, a Gaussian
//! predictive-process prior for age-varying effects, three-state variable
//! selection, clinic random effects and unknown assay accuracies.

pub mod error;
pub mod gpp;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod model;
pub mod pg;
pub mod protocols;
pub mod rng;
pub mod sampler;
pub mod summary;

pub use error::{Error, Result};
