//! Ground truth for the decoders: closed-form step laws, exact sequence
//! laws, Monte Carlo estimates, distortion measurements for unmatched
//! quartets, acceptance-rate tables and sampling baselines.

mod acceptance;
mod baselines;
mod distortion;
mod monte_carlo;
mod step;

pub use acceptance::{acceptance_table, analytic_acceptance, instance_rate, AcceptanceCell, Rule};
pub use baselines::{best_of_n, rejection_baseline, BaselineOutcome};
pub use distortion::{correlation, distortion_report, distortion_scan, DistortionReport};
pub use monte_carlo::{monte_carlo_law, EmpiricalLaw, TraceTotals, MIN_RUNS};
pub use step::{
    exact_sequence_law, exact_step_ss, exact_step_sss, ss_sequence_law, sss_sequence_law, step_identities,
    StepIdentities, StepLaw,
};
