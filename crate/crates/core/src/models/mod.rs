//! Tabular autoregressive policies and the reward fields that shift them.
//!
//! A [`TabularModel`] stores one [`Categorical`](crate::distributions::Categorical)
//! row per context `(prompt_id, prefix)` for every prefix shorter than its
//! `max_depth`. Longer prefixes resolve to their trailing `max_depth − 1`
//! tokens, which lets Monte Carlo runs decode past the enumerable depth.
//!
//! A [`ModelQuartet`] ties together the SFT draft, the reward-shifted draft,
//! the unaligned target and the RLHF-optimal target, with per-context
//! tilting `row ⊙ exp(r / β)` linking the pairs.

mod io;
mod objective;
mod quartet;
mod reward;
mod sequence;
mod shape;
mod tabular;

pub use io::{read_model, read_reward, write_model, write_reward};
pub use objective::{rlhf_objective, sequence_optimal_law, sequence_rewards};
pub use quartet::{gen_matched_target, normalizer_ratio, ModelQuartet, QuartetSpec, MATCH_TOL};
pub use reward::{build_shifted_model, gen_random_reward, rlhf_optimal, RewardField, EXP_GUARD};
pub use sequence::{enumerate_law, sequence_distribution, SequenceLaw, MAX_ENUMERATION};
pub(crate) use sequence::decode_index;
pub use shape::{Context, ModelShape, Token};
pub use tabular::{gen_random_model, gen_random_model_with, TabularModel};
