use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::RngStream;
use crate::error::{Error, Result};
use crate::models::{Context, ModelQuartet};
use crate::sampling::{decode_with, shifted_accept, standard_accept, DraftChoice, ShiftedRules, StandardRules};

/// Which acceptance test verifies proposals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    /// `min(1, target/draft)` against the proposing draft.
    Standard,
    /// `min(1, target/sft)` regardless of the proposing draft.
    Shifted,
}

/// Mean per-token acceptance of one (rule, draft) configuration across a
/// set of quartets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcceptanceCell {
    pub rule: Rule,
    pub draft: DraftChoice,
    pub mean: f64,
    /// Standard error of `mean` across instances.
    pub std_err: f64,
    pub per_instance: Vec<f64>,
}

/// Monte Carlo acceptance rate: decodes `max_depth`-token sequences with
/// lookahead `lookahead` until at least `n_blocks` blocks have run on each
/// quartet, then reports accepted over verified proposals. Instance `i`
/// draws from `rng.derive(i)`.
pub fn acceptance_table(
    quartets: &[ModelQuartet],
    rule: Rule,
    draft: DraftChoice,
    lookahead: usize,
    n_blocks: u64,
    rng: &RngStream,
) -> Result<AcceptanceCell> {
    if quartets.len() < 2 {
        return Err(Error::InsufficientSamples("acceptance tables need at least two quartets".into()));
    }
    let per_instance = quartets
        .par_iter()
        .enumerate()
        .map(|(i, q)| instance_rate(q, rule, draft, lookahead, n_blocks, &mut rng.derive(i as u64)).map(|(r, _)| r))
        .collect::<Result<Vec<f64>>>()?;
    let n = per_instance.len() as f64;
    let mean = per_instance.iter().sum::<f64>() / n;
    let var = per_instance.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(AcceptanceCell { rule, draft, mean, std_err: (var / n).sqrt(), per_instance })
}

/// Acceptance rate on a single quartet and the number of verified
/// proposals behind it.
pub fn instance_rate(
    quartet: &ModelQuartet,
    rule: Rule,
    draft: DraftChoice,
    lookahead: usize,
    n_blocks: u64,
    rng: &mut RngStream,
) -> Result<(f64, u64)> {
    let length = quartet.shape().max_depth;
    let proposer = match draft {
        DraftChoice::Sft => quartet.sft(),
        DraftChoice::ShiftedDraft => quartet.shifted_draft(),
    };
    let standard = StandardRules { draft: proposer, target: quartet.target() };
    let shifted = ShiftedRules { quartet, gamma: 1.0, proposal: draft };
    let (mut blocks, mut verified, mut accepted) = (0u64, 0u64, 0u64);
    while blocks < n_blocks {
        let d = match rule {
            Rule::Standard => decode_with(&standard, lookahead, length, 0, rng)?,
            Rule::Shifted => decode_with(&shifted, lookahead, length, 0, rng)?,
        };
        blocks += d.trace.blocks.len() as u64;
        verified += d.trace.verified();
        accepted += d.trace.accepted();
    }
    Ok((accepted as f64 / verified as f64, verified))
}

/// Probability that a single proposal at `ctx` is accepted:
/// `Σ_x proposal(x) · accept(x)`.
pub fn analytic_acceptance(quartet: &ModelQuartet, rule: Rule, draft: DraftChoice, ctx: &Context) -> Result<f64> {
    let s = quartet.sft().row_at(ctx)?;
    let h = quartet.shifted_draft().row_at(ctx)?;
    let t = quartet.target().row_at(ctx)?;
    let proposal = match draft {
        DraftChoice::Sft => s,
        DraftChoice::ShiftedDraft => h,
    };
    let mut total = 0.0;
    for (x, &p) in proposal.probs().iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let a = match rule {
            Rule::Standard => standard_accept(proposal, t, x)?,
            Rule::Shifted => shifted_accept(s, t, x)?,
        };
        total += p * a;
    }
    Ok(total)
}
