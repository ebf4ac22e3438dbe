//! Acceptance rules, residual distributions and the three decoders.
//!
//! Both speculative decoders share one block engine: draft up to `K` tokens
//! from the proposal model, verify them left to right with one uniform draw
//! each, and on the first rejection emit a token from the residual law. The
//! standard decoder emits one extra target token after a fully accepted
//! block; the shifted decoder never does, since its goal is the
//! reward-tilted target rather than the target itself.

mod config;
mod decode;
mod rules;
mod trace;

pub use config::LookaheadConfig;
pub use decode::{
    decode_spec_shifted, decode_spec_standard, decode_vanilla, decode_with, BlockRules, Decoded,
    Decoder, DraftChoice, ShiftedRules, ShiftedSpecDecoder, StandardRules, StandardSpecDecoder,
    VanillaDecoder,
};
pub use rules::{
    accept_prob_shifted, accept_prob_standard, bonus_shifted, bonus_standard, shifted_accept,
    shifted_residual, standard_accept, standard_residual,
};
pub use trace::{BlockRecord, DecodeTrace};
