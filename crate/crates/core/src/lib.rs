//! Standard and reward-shifted speculative sampling over tabular
//! autoregressive models.
//!
//! The crate is organized bottom-up:
//!
//! - [`distributions`]: categorical rows, the clamp-normalization operator,
//!   divergences, seeded random streams and chi-square tests.
//! - [`models`]: tabular policies, token-level reward fields, reward-shifted
//!   models and the SFT / shifted-draft / target / optimal quartet.
//! - [`sampling`]: acceptance rules, residual (bonus) distributions and the
//!   vanilla, standard speculative and shifted speculative decoders.
//! - [`oracle`]: closed-form step laws, exact sequence laws, Monte Carlo
//!   estimation, distortion scans, acceptance tables and the best-of-N and
//!   rejection baselines.
//! - [`harness`]: experiment configs, the runnable suites and their reports.
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod distributions;
pub mod error;
pub mod harness;
pub mod models;
pub mod oracle;
pub mod sampling;

pub use error::{Error, Result};
