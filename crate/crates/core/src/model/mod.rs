//! Dataset schema, configuration and chain state.

mod config;
mod dataset;
mod state;

pub use config::{FitConfig, McmcConfig, PriorConfig};
pub use dataset::{validate, AgeTransform, Dataset, ValidationReport, Violation, ViolationKind};
pub use state::{assay_counts, init_state, initial_statuses, AssayCounts, ChainState, CoefState, Inclusion};
