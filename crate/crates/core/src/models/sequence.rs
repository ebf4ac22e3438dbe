use super::shape::{Context, Token};
use super::tabular::TabularModel;
use crate::distributions::Categorical;
use crate::error::{Error, Result};

/// Largest number of sequences an exact enumeration may visit.
pub const MAX_ENUMERATION: usize = 1_000_000;

/// Exact law over all `V^L` token sequences of one length, indexed
/// big-endian in base `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceLaw {
    vocab_size: usize,
    length: usize,
    probs: Vec<f64>,
}

fn sequence_count(vocab_size: usize, length: usize) -> Result<usize> {
    vocab_size
        .checked_pow(length as u32)
        .filter(|&n| n <= MAX_ENUMERATION)
        .ok_or(Error::EnumerationTooLarge { vocab: vocab_size, length })
}

impl SequenceLaw {
    pub fn new(vocab_size: usize, length: usize, probs: Vec<f64>) -> Result<Self> {
        let n = sequence_count(vocab_size, length)?;
        if probs.len() != n {
            return Err(Error::DimensionMismatch(probs.len(), n));
        }
        Ok(Self { vocab_size, length, probs })
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn prob(&self, sequence: &[Token]) -> f64 {
        self.probs[self.index_of(sequence)]
    }

    pub fn index_of(&self, sequence: &[Token]) -> usize {
        debug_assert_eq!(sequence.len(), self.length);
        sequence.iter().fold(0, |acc, &t| acc * self.vocab_size + t)
    }

    pub fn sequence(&self, index: usize) -> Vec<Token> {
        decode_index(index, self.vocab_size, self.length)
    }

    /// `(sequence, probability)` pairs in index order.
    pub fn iter(&self) -> impl Iterator<Item = (Vec<Token>, f64)> + '_ {
        self.probs.iter().enumerate().map(|(i, &p)| (self.sequence(i), p))
    }

    /// `E[f(Y)]`.
    pub fn expectation<F: FnMut(&[Token]) -> f64>(&self, mut f: F) -> f64 {
        self.iter().map(|(s, p)| if p == 0.0 { 0.0 } else { p * f(&s) }).sum()
    }

    fn check_same(&self, other: &SequenceLaw) -> Result<()> {
        if self.vocab_size != other.vocab_size || self.length != other.length {
            return Err(Error::DimensionMismatch(self.probs.len(), other.probs.len()));
        }
        Ok(())
    }

    pub fn tv(&self, other: &SequenceLaw) -> Result<f64> {
        self.check_same(other)?;
        Ok(0.5 * self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs()).sum::<f64>())
    }

    /// `KL(self ‖ other)`.
    pub fn kl(&self, other: &SequenceLaw) -> Result<f64> {
        self.check_same(other)?;
        let mut kl = 0.0;
        for (i, (&p, &q)) in self.probs.iter().zip(&other.probs).enumerate() {
            if p == 0.0 {
                continue;
            }
            if q == 0.0 {
                return Err(Error::SupportViolation { index: i });
            }
            kl += p * (p / q).ln();
        }
        Ok(kl.max(0.0))
    }

    /// The law as one categorical over sequence indices.
    pub fn to_categorical(&self) -> Result<Categorical> {
        Categorical::new(self.probs.clone())
    }
}

pub(crate) fn decode_index(mut index: usize, vocab_size: usize, length: usize) -> Vec<Token> {
    let mut seq = vec![0; length];
    for slot in seq.iter_mut().rev() {
        *slot = index % vocab_size;
        index /= vocab_size;
    }
    seq
}

/// Chains per-prefix next-token laws into the law of length-`length`
/// sequences. `next` is not consulted for zero-probability prefixes.
pub fn enumerate_law<F>(vocab_size: usize, length: usize, mut next: F) -> Result<SequenceLaw>
where
    F: FnMut(&[Token]) -> Result<Categorical>,
{
    let total = sequence_count(vocab_size, length)?;
    let mut level = vec![1.0];
    for depth in 0..length {
        let mut deeper = vec![0.0; level.len() * vocab_size];
        for (idx, &mass) in level.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let prefix = decode_index(idx, vocab_size, depth);
            let row = next(&prefix)?;
            if row.vocab_size() != vocab_size {
                return Err(Error::DimensionMismatch(row.vocab_size(), vocab_size));
            }
            for (t, p) in row.probs().iter().enumerate() {
                deeper[idx * vocab_size + t] = mass * p;
            }
        }
        level = deeper;
    }
    debug_assert_eq!(level.len(), total);
    SequenceLaw::new(vocab_size, length, level)
}

/// The exact law of `length`-token sequences sampled ancestrally from `model`.
pub fn sequence_distribution(model: &TabularModel, prompt_id: usize, length: usize) -> Result<SequenceLaw> {
    model.shape().check_context(&Context::root(prompt_id))?;
    enumerate_law(model.vocab_size(), length, |prefix| Ok(model.row(prompt_id, prefix).clone()))
}
