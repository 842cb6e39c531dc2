//! Matérn kernel and Gaussian predictive process machinery.

mod bessel;
mod design;
mod kernel;

pub use bessel::{bessel_k, bessel_k_pair};
pub use design::{
    build_design, cross_correlation, equally_spaced_knots, factor_knots, knot_correlation,
    AgeLayout, CoefBasis, GppDesign,
};
pub use kernel::{matern_corr, Matern, MaternParams};
