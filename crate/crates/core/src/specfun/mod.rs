//! Special functions behind the closed-form outage expressions: real and
//! complex-order incomplete gamma functions and a Mellin-Barnes contour
//! evaluator for products of shifted exponentials.

mod gamma;
mod incgamma;
mod mellin;
mod quadrature;

pub use gamma::{
    gamma_complex, ln_gamma, ln_gamma_complex, lower_incomplete_gamma, regularized_lower_gamma,
    regularized_upper_gamma,
};
pub use incgamma::{incomplete_gamma_scaled, upper_incomplete_gamma_complex, ScaledIncompleteGamma};
pub use mellin::{
    mellin_barnes_cdf, mellin_barnes_cdf_detailed, ContourSpec, FactorKind, MellinEstimate, MellinFactor,
};
