use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use super::config::LookaheadConfig;
use super::rules::{shifted_accept, shifted_residual, standard_accept, standard_residual};
use super::trace::{BlockRecord, DecodeTrace};
use crate::distributions::{sample, Categorical, RngStream};
use crate::error::{Error, Result};
use crate::models::{ModelQuartet, TabularModel, Token};

/// A decoded sequence with its trace.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub tokens: Vec<Token>,
    pub trace: DecodeTrace,
}

/// Anything that turns a prompt and a random stream into a sequence.
pub trait Decoder: Sync {
    fn vocab_size(&self) -> usize;

    fn max_length(&self) -> usize;

    fn decode(&self, prompt_id: usize, rng: &mut RngStream) -> Result<Decoded>;
}

/// The per-context laws one speculative block needs.
pub trait BlockRules {
    /// Law the draft tokens are drawn from.
    fn proposal(&self, prompt_id: usize, prefix: &[Token]) -> &Categorical;

    fn accept_prob(&self, prompt_id: usize, prefix: &[Token], token: Token) -> Result<f64>;

    /// Residual law after a rejection, and whether the degenerate-residual
    /// fallback row was substituted.
    fn residual(&self, prompt_id: usize, prefix: &[Token]) -> Result<(Categorical, bool)>;

    /// Row for the extra token after a fully accepted block, if the rule
    /// emits one.
    fn full_acceptance_row(&self, prompt_id: usize, prefix: &[Token]) -> Option<&Categorical>;
}

fn with_fallback(residual: Result<Categorical>, fallback: &Categorical) -> Result<(Categorical, bool)> {
    match residual {
        Ok(r) => Ok((r, false)),
        Err(Error::DegenerateResidual { .. }) => Ok((fallback.clone(), true)),
        Err(e) => Err(e),
    }
}

/// Accept with `min(1, target/draft)`, resample from `(target − draft)_+`,
/// and emit one extra target token after a fully accepted block.
#[derive(Debug, Clone, Copy)]
pub struct StandardRules<'a> {
    pub draft: &'a TabularModel,
    pub target: &'a TabularModel,
}

impl BlockRules for StandardRules<'_> {
    fn proposal(&self, prompt_id: usize, prefix: &[Token]) -> &Categorical {
        self.draft.row(prompt_id, prefix)
    }

    fn accept_prob(&self, prompt_id: usize, prefix: &[Token], token: Token) -> Result<f64> {
        standard_accept(self.draft.row(prompt_id, prefix), self.target.row(prompt_id, prefix), token)
    }

    fn residual(&self, prompt_id: usize, prefix: &[Token]) -> Result<(Categorical, bool)> {
        let t = self.target.row(prompt_id, prefix);
        with_fallback(standard_residual(self.draft.row(prompt_id, prefix), t), t)
    }

    fn full_acceptance_row(&self, prompt_id: usize, prefix: &[Token]) -> Option<&Categorical> {
        Some(self.target.row(prompt_id, prefix))
    }
}

/// Which quartet member proposes draft tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DraftChoice {
    Sft,
    ShiftedDraft,
}

/// Accept with `min(1, target/sft)`, resample from
/// `(shifted^γ (target/sft − 1))_+`, no extra token.
#[derive(Debug, Clone, Copy)]
pub struct ShiftedRules<'a> {
    pub quartet: &'a ModelQuartet,
    pub gamma: f64,
    pub proposal: DraftChoice,
}

impl<'a> ShiftedRules<'a> {
    pub fn new(quartet: &'a ModelQuartet, gamma: f64) -> Self {
        Self { quartet, gamma, proposal: DraftChoice::ShiftedDraft }
    }
}

impl BlockRules for ShiftedRules<'_> {
    fn proposal(&self, prompt_id: usize, prefix: &[Token]) -> &Categorical {
        match self.proposal {
            DraftChoice::Sft => self.quartet.sft().row(prompt_id, prefix),
            DraftChoice::ShiftedDraft => self.quartet.shifted_draft().row(prompt_id, prefix),
        }
    }

    fn accept_prob(&self, prompt_id: usize, prefix: &[Token], token: Token) -> Result<f64> {
        let q = self.quartet;
        shifted_accept(q.sft().row(prompt_id, prefix), q.target().row(prompt_id, prefix), token)
    }

    fn residual(&self, prompt_id: usize, prefix: &[Token]) -> Result<(Categorical, bool)> {
        let q = self.quartet;
        let h = q.shifted_draft().row(prompt_id, prefix);
        let r = shifted_residual(
            q.sft().row(prompt_id, prefix),
            h,
            q.target().row(prompt_id, prefix),
            self.gamma,
        );
        with_fallback(r, h)
    }

    fn full_acceptance_row(&self, _: usize, _: &[Token]) -> Option<&Categorical> {
        None
    }
}

/// Runs propose/verify blocks under `rules` until `max_length` tokens exist.
///
/// Near the budget a block proposes only as many tokens as remain, and the
/// extra token is skipped when no room is left. One uniform is consumed per
/// verified proposal, including proposals accepted with probability one.
pub fn decode_with<R: BlockRules + ?Sized>(
    rules: &R,
    lookahead: usize,
    max_length: usize,
    prompt_id: usize,
    rng: &mut RngStream,
) -> Result<Decoded> {
    if lookahead == 0 {
        return Err(Error::config("lookahead", "must be ≥ 1"));
    }
    let mut tokens: Vec<Token> = Vec::with_capacity(max_length);
    let mut trace = DecodeTrace::default();
    while tokens.len() < max_length {
        let start = tokens.len();
        let k = lookahead.min(max_length - start);

        let mut proposals = Vec::with_capacity(k);
        let mut scratch = tokens.clone();
        for _ in 0..k {
            let t = sample(rules.proposal(prompt_id, &scratch), rng);
            proposals.push(t);
            scratch.push(t);
        }

        let mut accepted = Vec::with_capacity(k);
        let mut uniforms = Vec::with_capacity(k);
        let mut bonus = None;
        let mut fallback = false;
        for &t in &proposals {
            let p = rules.accept_prob(prompt_id, &tokens, t)?;
            let u = rng.uniform();
            uniforms.push(u);
            if u < p {
                accepted.push(true);
                tokens.push(t);
            } else {
                accepted.push(false);
                let (residual, fell_back) = rules.residual(prompt_id, &tokens)?;
                fallback = fell_back;
                let b = sample(&residual, rng);
                bonus = Some(b);
                tokens.push(b);
                break;
            }
        }

        let mut extra = None;
        if bonus.is_none() && tokens.len() < max_length {
            if let Some(row) = rules.full_acceptance_row(prompt_id, &tokens) {
                let t = sample(row, rng);
                extra = Some(t);
                tokens.push(t);
            }
        }

        trace.push(BlockRecord { start, proposals, accepted, uniforms, bonus, extra, fallback });
    }
    Ok(Decoded { tokens, trace })
}

fn tempered_model(model: &TabularModel, temperature: f64) -> Result<Cow<'_, TabularModel>> {
    if temperature == 1.0 {
        Ok(Cow::Borrowed(model))
    } else {
        Ok(Cow::Owned(model.tempered(temperature)?))
    }
}

/// Ancestral sampling from one model, one target call per token.
#[derive(Debug, Clone)]
pub struct VanillaDecoder<'a> {
    model: Cow<'a, TabularModel>,
    cfg: LookaheadConfig,
}

impl<'a> VanillaDecoder<'a> {
    pub fn new(model: &'a TabularModel, cfg: LookaheadConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { model: tempered_model(model, cfg.temperature)?, cfg })
    }
}

impl Decoder for VanillaDecoder<'_> {
    fn vocab_size(&self) -> usize {
        self.model.vocab_size()
    }

    fn max_length(&self) -> usize {
        self.cfg.max_length
    }

    fn decode(&self, prompt_id: usize, rng: &mut RngStream) -> Result<Decoded> {
        let mut tokens = Vec::with_capacity(self.cfg.max_length);
        let mut trace = DecodeTrace::default();
        while tokens.len() < self.cfg.max_length {
            let t = sample(self.model.row(prompt_id, &tokens), rng);
            trace.push(BlockRecord {
                start: tokens.len(),
                proposals: Vec::new(),
                accepted: Vec::new(),
                uniforms: Vec::new(),
                bonus: None,
                extra: Some(t),
                fallback: false,
            });
            tokens.push(t);
        }
        Ok(Decoded { tokens, trace })
    }
}

/// Standard speculative sampling: recovers the target law.
#[derive(Debug, Clone)]
pub struct StandardSpecDecoder<'a> {
    draft: Cow<'a, TabularModel>,
    target: Cow<'a, TabularModel>,
    cfg: LookaheadConfig,
}

impl<'a> StandardSpecDecoder<'a> {
    pub fn new(draft: &'a TabularModel, target: &'a TabularModel, cfg: LookaheadConfig) -> Result<Self> {
        cfg.validate()?;
        if draft.shape() != target.shape() {
            return Err(Error::InvalidModel("draft and target shapes differ".into()));
        }
        Ok(Self {
            draft: tempered_model(draft, cfg.temperature)?,
            target: tempered_model(target, cfg.temperature)?,
            cfg,
        })
    }

    pub fn rules(&self) -> StandardRules<'_> {
        StandardRules { draft: &self.draft, target: &self.target }
    }
}

impl Decoder for StandardSpecDecoder<'_> {
    fn vocab_size(&self) -> usize {
        self.target.vocab_size()
    }

    fn max_length(&self) -> usize {
        self.cfg.max_length
    }

    fn decode(&self, prompt_id: usize, rng: &mut RngStream) -> Result<Decoded> {
        decode_with(&self.rules(), self.cfg.lookahead, self.cfg.max_length, prompt_id, rng)
    }
}

/// Shifted speculative sampling: proposals from the shifted draft, emission
/// law equal to the RLHF-optimal target on matched quartets.
#[derive(Debug, Clone)]
pub struct ShiftedSpecDecoder<'a> {
    quartet: Cow<'a, ModelQuartet>,
    cfg: LookaheadConfig,
}

impl<'a> ShiftedSpecDecoder<'a> {
    pub fn new(quartet: &'a ModelQuartet, cfg: LookaheadConfig) -> Result<Self> {
        cfg.validate()?;
        let quartet = if cfg.temperature == 1.0 {
            Cow::Borrowed(quartet)
        } else {
            Cow::Owned(quartet.tempered(cfg.temperature)?)
        };
        Ok(Self { quartet, cfg })
    }

    pub fn rules(&self) -> ShiftedRules<'_> {
        ShiftedRules::new(&self.quartet, self.cfg.gamma)
    }
}

impl Decoder for ShiftedSpecDecoder<'_> {
    fn vocab_size(&self) -> usize {
        self.quartet.shape().vocab_size
    }

    fn max_length(&self) -> usize {
        self.cfg.max_length
    }

    fn decode(&self, prompt_id: usize, rng: &mut RngStream) -> Result<Decoded> {
        decode_with(&self.rules(), self.cfg.lookahead, self.cfg.max_length, prompt_id, rng)
    }
}

pub fn decode_vanilla(
    model: &TabularModel,
    cfg: LookaheadConfig,
    prompt_id: usize,
    rng: &mut RngStream,
) -> Result<Decoded> {
    VanillaDecoder::new(model, cfg)?.decode(prompt_id, rng)
}

pub fn decode_spec_standard(
    draft: &TabularModel,
    target: &TabularModel,
    cfg: LookaheadConfig,
    prompt_id: usize,
    rng: &mut RngStream,
) -> Result<Decoded> {
    StandardSpecDecoder::new(draft, target, cfg)?.decode(prompt_id, rng)
}

pub fn decode_spec_shifted(
    quartet: &ModelQuartet,
    cfg: LookaheadConfig,
    prompt_id: usize,
    rng: &mut RngStream,
) -> Result<Decoded> {
    ShiftedSpecDecoder::new(quartet, cfg)?.decode(prompt_id, rng)
}
