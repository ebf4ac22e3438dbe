use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Token = usize;

/// Upper bound on stored rows per model.
const MAX_ROWS: usize = 1 << 22;

/// Conditioning argument of a per-token policy: a prompt and the tokens
/// generated so far.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Context {
    pub prompt_id: usize,
    pub prefix: Vec<Token>,
}

impl Context {
    pub fn new(prompt_id: usize, prefix: Vec<Token>) -> Self {
        Self { prompt_id, prefix }
    }

    pub fn root(prompt_id: usize) -> Self {
        Self { prompt_id, prefix: Vec::new() }
    }

    pub fn depth(&self) -> usize {
        self.prefix.len()
    }

    /// This context extended by one token.
    pub fn child(&self, token: Token) -> Self {
        let mut prefix = self.prefix.clone();
        prefix.push(token);
        Self { prompt_id: self.prompt_id, prefix }
    }
}

/// Vocabulary, depth and prompt count shared by models and reward fields,
/// plus the dense row indexing they both use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    pub vocab_size: usize,
    pub max_depth: usize,
    pub num_prompts: usize,
}

impl ModelShape {
    pub fn new(vocab_size: usize, max_depth: usize, num_prompts: usize) -> Result<Self> {
        if vocab_size < 2 {
            return Err(Error::InvalidModel(format!("vocab_size {vocab_size} < 2")));
        }
        if max_depth < 1 {
            return Err(Error::InvalidModel("max_depth must be ≥ 1".into()));
        }
        if num_prompts < 1 {
            return Err(Error::InvalidModel("num_prompts must be ≥ 1".into()));
        }
        let shape = Self { vocab_size, max_depth, num_prompts };
        match shape.checked_rows() {
            Some(n) if n <= MAX_ROWS => Ok(shape),
            _ => Err(Error::InvalidModel(format!(
                "{vocab_size}^{max_depth} contexts exceed the table limit"
            ))),
        }
    }

    fn checked_rows(&self) -> Option<usize> {
        let mut total: usize = 0;
        let mut level: usize = 1;
        for _ in 0..self.max_depth {
            total = total.checked_add(level)?;
            level = level.checked_mul(self.vocab_size)?;
        }
        total.checked_mul(self.num_prompts)
    }

    /// Rows stored per prompt: `Σ_{d < L} V^d`.
    pub fn rows_per_prompt(&self) -> usize {
        (0..self.max_depth).map(|d| self.vocab_size.pow(d as u32)).sum()
    }

    pub fn num_rows(&self) -> usize {
        self.rows_per_prompt() * self.num_prompts
    }

    /// The part of `prefix` the table conditions on.
    #[inline]
    pub fn window<'a>(&self, prefix: &'a [Token]) -> &'a [Token] {
        if prefix.len() < self.max_depth {
            prefix
        } else {
            &prefix[prefix.len() + 1 - self.max_depth..]
        }
    }

    /// Dense row index of `(prompt_id, prefix)` after windowing.
    #[inline]
    pub fn index(&self, prompt_id: usize, prefix: &[Token]) -> usize {
        let w = self.window(prefix);
        let v = self.vocab_size;
        let mut offset = 0;
        let mut level = 1;
        for _ in 0..w.len() {
            offset += level;
            level *= v;
        }
        let code = w.iter().fold(0, |acc, &t| acc * v + t);
        prompt_id * self.rows_per_prompt() + offset + code
    }

    pub fn check_context(&self, ctx: &Context) -> Result<()> {
        if ctx.prompt_id >= self.num_prompts {
            return Err(Error::InvalidContext(format!(
                "prompt {} out of range ({} prompts)",
                ctx.prompt_id, self.num_prompts
            )));
        }
        if let Some(&t) = ctx.prefix.iter().find(|&&t| t >= self.vocab_size) {
            return Err(Error::InvalidContext(format!(
                "token {t} out of range for vocabulary {}",
                self.vocab_size
            )));
        }
        Ok(())
    }

    /// Every stored context, in row-index order.
    pub fn contexts(&self) -> Vec<Context> {
        let mut out = Vec::with_capacity(self.num_rows());
        for prompt_id in 0..self.num_prompts {
            for depth in 0..self.max_depth {
                let count = self.vocab_size.pow(depth as u32);
                for code in 0..count {
                    let mut prefix = vec![0; depth];
                    let mut c = code;
                    for slot in prefix.iter_mut().rev() {
                        *slot = c % self.vocab_size;
                        c /= self.vocab_size;
                    }
                    out.push(Context { prompt_id, prefix });
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contexts_match_index_order() {
        let shape = ModelShape::new(3, 3, 2).unwrap();
        let ctxs = shape.contexts();
        assert_eq!(ctxs.len(), shape.num_rows());
        assert_eq!(shape.num_rows(), 2 * (1 + 3 + 9));
        for (i, c) in ctxs.iter().enumerate() {
            assert_eq!(shape.index(c.prompt_id, &c.prefix), i);
        }
    }

    #[test]
    fn long_prefixes_use_trailing_window() {
        let shape = ModelShape::new(2, 3, 1).unwrap();
        assert_eq!(shape.window(&[1, 0, 1, 1]), &[1, 1]);
        assert_eq!(shape.index(0, &[0, 0, 1, 1]), shape.index(0, &[1, 1]));
        let flat = ModelShape::new(2, 1, 1).unwrap();
        assert_eq!(flat.index(0, &[1, 0, 1]), 0);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(ModelShape::new(1, 3, 1).is_err());
        assert!(ModelShape::new(2, 0, 1).is_err());
        assert!(ModelShape::new(64, 64, 1).is_err());
    }
}
