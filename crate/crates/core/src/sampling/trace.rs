use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::Token;

/// One propose-then-verify cycle; costs exactly one target call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockRecord {
    /// Position of the first token emitted by this block.
    pub start: usize,
    /// Draft tokens proposed (at most `K`, fewer near the budget).
    pub proposals: Vec<Token>,
    /// Verification outcomes: a run of `true` then at most one `false`.
    pub accepted: Vec<bool>,
    /// The uniform draw consumed by each verified proposal.
    pub uniforms: Vec<f64>,
    /// Residual token emitted after a rejection.
    pub bonus: Option<Token>,
    /// Token sampled straight from the target row: the standard decoder's
    /// full-acceptance token, or the single token of a vanilla step.
    pub extra: Option<Token>,
    /// The residual was numerically empty and the fallback row was used.
    #[serde(default)]
    pub fallback: bool,
}

impl BlockRecord {
    pub fn accepted_count(&self) -> usize {
        self.accepted.iter().filter(|&&a| a).count()
    }

    pub fn rejected(&self) -> bool {
        self.accepted.iter().any(|&a| !a)
    }

    pub fn emitted(&self) -> usize {
        self.accepted_count() + self.bonus.is_some() as usize + self.extra.is_some() as usize
    }

    /// Tokens this block appended, in order.
    pub fn emitted_tokens(&self) -> Vec<Token> {
        let mut out: Vec<Token> = self.proposals.iter().take(self.accepted_count()).copied().collect();
        out.extend(self.bonus);
        out.extend(self.extra);
        out
    }
}

/// Per-block record of a decode plus its cost counters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DecodeTrace {
    pub blocks: Vec<BlockRecord>,
    /// Target forward passes; one per block.
    pub target_calls: u64,
    /// Draft forward passes; one per proposed token.
    pub draft_calls: u64,
    pub emitted_tokens: u64,
}

impl DecodeTrace {
    pub(crate) fn push(&mut self, block: BlockRecord) {
        self.target_calls += 1;
        self.draft_calls += block.proposals.len() as u64;
        self.emitted_tokens += block.emitted() as u64;
        self.blocks.push(block);
    }

    /// Proposals that faced the acceptance test.
    pub fn verified(&self) -> u64 {
        self.blocks.iter().map(|b| b.accepted.len() as u64).sum()
    }

    pub fn accepted(&self) -> u64 {
        self.blocks.iter().map(|b| b.accepted_count() as u64).sum()
    }

    /// Accepted over verified proposals; `None` without proposals.
    pub fn acceptance_rate(&self) -> Option<f64> {
        let v = self.verified();
        (v > 0).then(|| self.accepted() as f64 / v as f64)
    }

    pub fn tokens_per_target_call(&self) -> f64 {
        if self.target_calls == 0 {
            0.0
        } else {
            self.emitted_tokens as f64 / self.target_calls as f64
        }
    }

    /// Checks the structural invariants of every block and the counters.
    pub fn check(&self) -> Result<()> {
        let bad = |i: usize, why: &str| Err(Error::InvalidModel(format!("block {i}: {why}")));
        let mut pos = 0;
        for (i, b) in self.blocks.iter().enumerate() {
            if b.start != pos {
                return bad(i, "start does not follow the previous block");
            }
            if b.accepted.len() > b.proposals.len() || b.uniforms.len() != b.accepted.len() {
                return bad(i, "verification arrays disagree with proposals");
            }
            if let Some(first_false) = b.accepted.iter().position(|&a| !a) {
                if first_false + 1 != b.accepted.len() {
                    return bad(i, "accept flags are not a true-prefix");
                }
            }
            if b.rejected() != b.bonus.is_some() {
                return bad(i, "bonus present iff a proposal was rejected");
            }
            if b.rejected() && b.extra.is_some() {
                return bad(i, "extra token after a rejection");
            }
            pos += b.emitted();
        }
        if self.target_calls != self.blocks.len() as u64 {
            return Err(Error::InvalidModel("target_calls differs from block count".into()));
        }
        if self.emitted_tokens != pos as u64 {
            return Err(Error::InvalidModel("emitted_tokens differs from block emissions".into()));
        }
        let drafts: u64 = self.blocks.iter().map(|b| b.proposals.len() as u64).sum();
        if self.draft_calls != drafts {
            return Err(Error::InvalidModel("draft_calls differs from proposal count".into()));
        }
        Ok(())
    }

    /// One JSON object per block, with running counters.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        let mut t = DecodeTrace::default();
        for (i, b) in self.blocks.iter().enumerate() {
            t.push(b.clone());
            let line = TraceLine {
                block: i,
                record: b.clone(),
                target_calls: t.target_calls,
                draft_calls: t.draft_calls,
                emitted_tokens: t.emitted_tokens,
            };
            let s = serde_json::to_string(&line).map_err(|e| Error::Io(e.to_string()))?;
            writeln!(out, "{s}")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self> {
        let mut t = DecodeTrace::default();
        for (n, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: TraceLine = serde_json::from_str(&line)
                .map_err(|e| Error::Parse { line: n + 1, reason: e.to_string() })?;
            t.push(rec.record);
            if (t.target_calls, t.draft_calls, t.emitted_tokens)
                != (rec.target_calls, rec.draft_calls, rec.emitted_tokens)
            {
                return Err(Error::Parse { line: n + 1, reason: "running counters disagree".into() });
            }
        }
        t.check()?;
        Ok(t)
    }
}

#[derive(Serialize, Deserialize)]
struct TraceLine {
    block: usize,
    #[serde(flatten)]
    record: BlockRecord,
    target_calls: u64,
    draft_calls: u64,
    emitted_tokens: u64,
}
