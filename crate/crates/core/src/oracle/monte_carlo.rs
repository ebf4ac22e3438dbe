use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::distributions::{chi_square_gof, chi_square_homogeneity, GofResult, RngStream};
use crate::error::{Error, Result};
use crate::models::{SequenceLaw, Token};
use crate::sampling::{DecodeTrace, Decoder};

/// Fewest runs [`monte_carlo_law`] accepts.
pub const MIN_RUNS: u64 = 10_000;

/// Counters summed over every decode of a Monte Carlo run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct TraceTotals {
    pub runs: u64,
    pub blocks: u64,
    pub target_calls: u64,
    pub draft_calls: u64,
    pub verified: u64,
    pub accepted: u64,
    pub emitted_tokens: u64,
    pub fallbacks: u64,
}

impl TraceTotals {
    fn of(trace: &DecodeTrace) -> Self {
        Self {
            runs: 1,
            blocks: trace.blocks.len() as u64,
            target_calls: trace.target_calls,
            draft_calls: trace.draft_calls,
            verified: trace.verified(),
            accepted: trace.accepted(),
            emitted_tokens: trace.emitted_tokens,
            fallbacks: trace.blocks.iter().filter(|b| b.fallback).count() as u64,
        }
    }

    fn add(mut self, o: Self) -> Self {
        self.runs += o.runs;
        self.blocks += o.blocks;
        self.target_calls += o.target_calls;
        self.draft_calls += o.draft_calls;
        self.verified += o.verified;
        self.accepted += o.accepted;
        self.emitted_tokens += o.emitted_tokens;
        self.fallbacks += o.fallbacks;
        self
    }

    /// Accepted over verified proposals.
    pub fn acceptance_rate(&self) -> Option<f64> {
        (self.verified > 0).then(|| self.accepted as f64 / self.verified as f64)
    }

    /// Binomial standard error of [`acceptance_rate`](Self::acceptance_rate).
    /// Proposals within one decode are not independent, so this is a rough
    /// guide; per-run spreads are better when precision matters.
    pub fn acceptance_std_err(&self) -> Option<f64> {
        let p = self.acceptance_rate()?;
        Some((p * (1.0 - p) / self.verified as f64).sqrt())
    }

    pub fn tokens_per_target_call(&self) -> f64 {
        if self.target_calls == 0 {
            0.0
        } else {
            self.emitted_tokens as f64 / self.target_calls as f64
        }
    }

    pub fn mean_target_calls(&self) -> f64 {
        self.target_calls as f64 / self.runs.max(1) as f64
    }
}

/// Empirical law of decoded sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalLaw {
    pub vocab_size: usize,
    pub counts: BTreeMap<Vec<Token>, u64>,
    pub totals: TraceTotals,
}

impl EmpiricalLaw {
    pub fn n_runs(&self) -> u64 {
        self.totals.runs
    }

    pub fn frequency(&self, sequence: &[Token]) -> f64 {
        self.counts.get(sequence).copied().unwrap_or(0) as f64 / self.n_runs() as f64
    }

    pub fn frequencies(&self) -> BTreeMap<Vec<Token>, f64> {
        let n = self.n_runs() as f64;
        self.counts.iter().map(|(k, &c)| (k.clone(), c as f64 / n)).collect()
    }

    /// Counts laid out in [`SequenceLaw`] index order for sequences of
    /// `length` tokens.
    pub fn dense_counts(&self, length: usize) -> Result<Vec<u64>> {
        let cells = self.vocab_size.checked_pow(length as u32).ok_or(Error::EnumerationTooLarge {
            vocab: self.vocab_size,
            length,
        })?;
        let mut dense = vec![0u64; cells];
        for (seq, &c) in &self.counts {
            if seq.len() != length {
                return Err(Error::InvalidContext(format!(
                    "sampled sequence of length {} where {length} was expected",
                    seq.len()
                )));
            }
            let idx = seq.iter().fold(0usize, |acc, &t| acc * self.vocab_size + t);
            dense[idx] += c;
        }
        Ok(dense)
    }

    pub fn tv(&self, law: &SequenceLaw) -> Result<f64> {
        let dense = self.dense_counts(law.length())?;
        let n = self.n_runs() as f64;
        Ok(0.5 * dense.iter().zip(law.probs()).map(|(&c, p)| (c as f64 / n - p).abs()).sum::<f64>())
    }

    pub fn chi_square(&self, law: &SequenceLaw) -> Result<GofResult> {
        let dense = self.dense_counts(law.length())?;
        chi_square_gof(&dense, &law.to_categorical()?, self.n_runs())
    }

    /// Two-sample homogeneity test against another run over the same cells.
    pub fn concordance(&self, other: &EmpiricalLaw, length: usize) -> Result<GofResult> {
        chi_square_homogeneity(&self.dense_counts(length)?, &other.dense_counts(length)?)
    }

    /// Sample mean and standard error of `f` over the decoded sequences.
    pub fn mean_of<F: Fn(&[Token]) -> f64>(&self, f: F) -> (f64, f64) {
        let n = self.n_runs() as f64;
        let (mut s, mut s2) = (0.0, 0.0);
        for (seq, &c) in &self.counts {
            let v = f(seq);
            s += c as f64 * v;
            s2 += c as f64 * v * v;
        }
        let mean = s / n;
        let var = (s2 / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
        (mean, (var / n).sqrt())
    }
}

/// Decodes `n_runs` times from `prompt_id`, run `i` on `rng.derive(i)`.
///
/// Runs execute in parallel; counts and counters are sums, so the result is
/// identical for any thread count.
pub fn monte_carlo_law<D: Decoder + ?Sized>(
    decoder: &D,
    prompt_id: usize,
    n_runs: u64,
    rng: &RngStream,
) -> Result<EmpiricalLaw> {
    if n_runs < MIN_RUNS {
        return Err(Error::InsufficientSamples(format!("{n_runs} runs, need at least {MIN_RUNS}")));
    }
    let empty = || (BTreeMap::new(), TraceTotals::default());
    let (counts, totals) = (0..n_runs)
        .into_par_iter()
        .try_fold(empty, |(mut counts, totals): (BTreeMap<Vec<Token>, u64>, TraceTotals), i| {
            let d = decoder.decode(prompt_id, &mut rng.derive(i))?;
            let totals = totals.add(TraceTotals::of(&d.trace));
            *counts.entry(d.tokens).or_insert(0) += 1;
            Ok::<_, Error>((counts, totals))
        })
        .try_reduce(empty, |(mut a, ta), (b, tb)| {
            for (k, c) in b {
                *a.entry(k).or_insert(0) += c;
            }
            Ok((a, ta.add(tb)))
        })?;
    Ok(EmpiricalLaw { vocab_size: decoder.vocab_size(), counts, totals })
}
