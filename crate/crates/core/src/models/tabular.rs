use rand_distr::{Distribution, Gamma};

use super::shape::{Context, ModelShape, Token};
use crate::distributions::{Categorical, RngStream};
use crate::error::{Error, Result};

/// A complete map from contexts to next-token laws.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularModel {
    shape: ModelShape,
    eos_token: Option<Token>,
    rows: Vec<Categorical>,
    eos_row: Option<Categorical>,
}

impl TabularModel {
    /// Builds a model row by row in [`ModelShape::contexts`] order.
    ///
    /// With an `eos_token`, contexts whose prefix already holds it are forced
    /// to a point mass on it and `row_fn` is not consulted for them.
    pub fn from_fn<F>(shape: ModelShape, eos_token: Option<Token>, mut row_fn: F) -> Result<Self>
    where
        F: FnMut(&Context) -> Result<Categorical>,
    {
        let eos_row = match eos_token {
            Some(t) => Some(Categorical::point_mass(shape.vocab_size, t)?),
            None => None,
        };
        let mut rows = Vec::with_capacity(shape.num_rows());
        for ctx in shape.contexts() {
            let row = match (&eos_row, eos_token) {
                (Some(r), Some(eos)) if ctx.prefix.contains(&eos) => r.clone(),
                _ => {
                    let row = row_fn(&ctx)?;
                    if row.vocab_size() != shape.vocab_size {
                        return Err(Error::DimensionMismatch(row.vocab_size(), shape.vocab_size));
                    }
                    row
                }
            };
            rows.push(row);
        }
        Ok(Self { shape, eos_token, rows, eos_row })
    }

    /// A model whose every context uses the same row.
    pub fn constant(row: Categorical, max_depth: usize) -> Result<Self> {
        let shape = ModelShape::new(row.vocab_size(), max_depth, 1)?;
        Self::from_fn(shape, None, |_| Ok(row.clone()))
    }

    pub fn shape(&self) -> ModelShape {
        self.shape
    }

    pub fn vocab_size(&self) -> usize {
        self.shape.vocab_size
    }

    pub fn max_depth(&self) -> usize {
        self.shape.max_depth
    }

    pub fn num_prompts(&self) -> usize {
        self.shape.num_prompts
    }

    pub fn eos_token(&self) -> Option<Token> {
        self.eos_token
    }

    /// Rows in [`ModelShape::contexts`] order.
    pub fn rows(&self) -> &[Categorical] {
        &self.rows
    }

    /// Next-token law after `prefix`. Tokens must be in range.
    #[inline]
    pub fn row(&self, prompt_id: usize, prefix: &[Token]) -> &Categorical {
        if let (Some(eos), Some(r)) = (self.eos_token, &self.eos_row) {
            if prefix.contains(&eos) {
                return r;
            }
        }
        &self.rows[self.shape.index(prompt_id, prefix)]
    }

    /// Checked lookup.
    pub fn row_at(&self, ctx: &Context) -> Result<&Categorical> {
        self.shape.check_context(ctx)?;
        Ok(self.row(ctx.prompt_id, &ctx.prefix))
    }

    /// A model of the same shape with each row transformed.
    pub fn map_rows<F>(&self, mut f: F) -> Result<Self>
    where
        F: FnMut(&Context, &Categorical) -> Result<Categorical>,
    {
        Self::from_fn(self.shape, self.eos_token, |ctx| {
            f(ctx, &self.rows[self.shape.index(ctx.prompt_id, &ctx.prefix)])
        })
    }

    /// Row-wise `p^(1/T)` renormalized.
    pub fn tempered(&self, temperature: f64) -> Result<Self> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::InvalidModel(format!("temperature {temperature} must be positive")));
        }
        self.map_rows(|_, r| r.tempered(temperature))
    }
}

/// Draws every row independently from a symmetric Dirichlet with the given
/// concentration. All entries are strictly positive.
pub fn gen_random_model(
    vocab_size: usize,
    max_depth: usize,
    concentration: f64,
    rng: &mut RngStream,
) -> Result<TabularModel> {
    let shape = ModelShape::new(vocab_size, max_depth, 1)?;
    gen_random_model_with(shape, None, concentration, rng)
}

/// [`gen_random_model`] with multiple prompts and an optional EOS token.
pub fn gen_random_model_with(
    shape: ModelShape,
    eos_token: Option<Token>,
    concentration: f64,
    rng: &mut RngStream,
) -> Result<TabularModel> {
    let gamma = Gamma::new(concentration, 1.0)
        .map_err(|e| Error::InvalidModel(format!("concentration {concentration}: {e}")))?;
    TabularModel::from_fn(shape, eos_token, |_| {
        let w: Vec<f64> = (0..shape.vocab_size)
            .map(|_| gamma.sample(rng).max(f64::MIN_POSITIVE))
            .collect();
        Categorical::from_weights(w)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_model_is_deterministic_and_positive() {
        let a = gen_random_model(4, 3, 1.0, &mut RngStream::new(1, 0)).unwrap();
        let b = gen_random_model(4, 3, 1.0, &mut RngStream::new(1, 0)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows().len(), 1 + 4 + 16);
        assert!(a.rows().iter().all(|r| r.probs().iter().all(|&p| p > 0.0)));
    }

    #[test]
    fn high_concentration_is_near_uniform() {
        let m = gen_random_model(4, 2, 1e4, &mut RngStream::new(2, 0)).unwrap();
        for r in m.rows() {
            let max = r.probs().iter().cloned().fold(f64::MIN, f64::max);
            let min = r.probs().iter().cloned().fold(f64::MAX, f64::min);
            assert!(max - min < 0.05, "spread {}", max - min);
        }
    }

    #[test]
    fn unit_vocab_is_rejected() {
        assert!(gen_random_model(1, 2, 1.0, &mut RngStream::new(0, 0)).is_err());
    }

    #[test]
    fn eos_contexts_are_absorbing() {
        let shape = ModelShape::new(3, 3, 1).unwrap();
        let m = gen_random_model_with(shape, Some(2), 1.0, &mut RngStream::new(3, 0)).unwrap();
        assert_eq!(m.row(0, &[2]).probs(), &[0.0, 0.0, 1.0]);
        assert_eq!(m.row(0, &[0, 2]).probs(), &[0.0, 0.0, 1.0]);
        assert_eq!(m.row(0, &[2, 2, 2, 2]).probs(), &[0.0, 0.0, 1.0]);
        assert!(m.row(0, &[0, 1]).prob(0) > 0.0);
    }

    #[test]
    fn row_at_checks_context() {
        let m = gen_random_model(2, 2, 1.0, &mut RngStream::new(0, 0)).unwrap();
        assert!(m.row_at(&Context::new(0, vec![2])).is_err());
        assert!(m.row_at(&Context::new(1, vec![])).is_err());
        assert!(m.row_at(&Context::new(0, vec![1])).is_ok());
    }
}
