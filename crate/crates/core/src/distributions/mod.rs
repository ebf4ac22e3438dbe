//! Categorical arithmetic, divergences, sampling and goodness-of-fit tests.
//!
//! Everything else in the crate is built from [`Categorical`] rows. Rows are
//! double precision and are renormalized on construction; the clamp operator
//! [`clamp_normalize`] is the `(f)_+ = max(0, f) / Σ max(0, f)` used by both
//! residual distributions.

mod categorical;
mod gof;
mod rng;

pub use categorical::{
    clamp_normalize, kl_divergence, sample, tv_distance, Categorical, CLAMP_EPS, SUM_TOL,
};
pub use gof::{chi_square_gof, chi_square_homogeneity, GofResult, MIN_EXPECTED};
pub use rng::RngStream;
