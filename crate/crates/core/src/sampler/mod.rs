//! Gibbs sampler for the varying-coefficient group-testing model.

mod conjugate;
mod gibbs;
mod output;
pub mod ssvs;

pub use conjugate::{assay_posterior, inclusion_prior, sigma2_posterior, tau_posterior, theta_posterior, BetaParams};
pub use gibbs::{phi_log_ratio_prior_only, propose_phi, PhiMoves, Sampler};
pub use output::{monitor_grid, run_chain, ChainMeta, ChainOutput, ETA_TOLERANCE};
