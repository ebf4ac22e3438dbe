use rand::Rng;

use super::shape::{Context, ModelShape, Token};
use super::tabular::TabularModel;
use crate::distributions::{Categorical, RngStream};
use crate::error::{Error, Result};

/// Largest `|r / β|` accepted before `exp` would overflow.
pub const EXP_GUARD: f64 = 700.0;

/// Token-level reward increments `r_t(x, y_<t, y_t)` with inverse temperature
/// `β`. The sequence reward is the sum of increments along the sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardField {
    shape: ModelShape,
    beta: f64,
    /// `num_rows × vocab_size`, row-major in context order.
    values: Vec<f64>,
}

impl RewardField {
    pub fn from_fn<F>(shape: ModelShape, beta: f64, mut f: F) -> Result<Self>
    where
        F: FnMut(&Context, Token) -> f64,
    {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidModel(format!("beta {beta} must be positive")));
        }
        let mut values = Vec::with_capacity(shape.num_rows() * shape.vocab_size);
        for ctx in shape.contexts() {
            for t in 0..shape.vocab_size {
                let v = f(&ctx, t);
                if !v.is_finite() {
                    return Err(Error::InvalidModel(format!("non-finite reward at {ctx:?}, token {t}")));
                }
                values.push(v);
            }
        }
        Ok(Self { shape, beta, values })
    }

    pub fn zero(shape: ModelShape, beta: f64) -> Result<Self> {
        Self::from_fn(shape, beta, |_, _| 0.0)
    }

    /// The same increments at every context.
    pub fn constant(shape: ModelShape, beta: f64, per_token: &[f64]) -> Result<Self> {
        if per_token.len() != shape.vocab_size {
            return Err(Error::DimensionMismatch(per_token.len(), shape.vocab_size));
        }
        Self::from_fn(shape, beta, |_, t| per_token[t])
    }

    pub fn shape(&self) -> ModelShape {
        self.shape
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Increments for every token after `prefix`.
    #[inline]
    pub fn row(&self, prompt_id: usize, prefix: &[Token]) -> &[f64] {
        let v = self.shape.vocab_size;
        let i = self.shape.index(prompt_id, prefix);
        &self.values[i * v..(i + 1) * v]
    }

    #[inline]
    pub fn increment(&self, prompt_id: usize, prefix: &[Token], token: Token) -> f64 {
        self.row(prompt_id, prefix)[token]
    }

    /// Tilt weights `exp(r / β)` after `prefix`.
    pub fn weights(&self, prompt_id: usize, prefix: &[Token]) -> Result<Vec<f64>> {
        self.row(prompt_id, prefix)
            .iter()
            .map(|r| {
                let z = r / self.beta;
                if z.abs() > EXP_GUARD {
                    Err(Error::OverflowGuard { value: z })
                } else {
                    Ok(z.exp())
                }
            })
            .collect()
    }

    /// `r(x, y) = Σ_t r_t(x, y_<t, y_t)`.
    pub fn sequence_reward(&self, prompt_id: usize, sequence: &[Token]) -> f64 {
        (0..sequence.len())
            .map(|t| self.increment(prompt_id, &sequence[..t], sequence[t]))
            .sum()
    }

    pub fn negated(&self) -> Self {
        Self { values: self.values.iter().map(|v| -v).collect(), ..self.clone() }
    }

    /// Same increments under a different `β`.
    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidModel(format!("beta {beta} must be positive")));
        }
        Ok(Self { beta, ..self.clone() })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Increments drawn uniformly from `[−scale, scale]`.
pub fn gen_random_reward(
    shape: ModelShape,
    scale: f64,
    beta: f64,
    rng: &mut RngStream,
) -> Result<RewardField> {
    if !(scale >= 0.0 && scale.is_finite()) {
        return Err(Error::InvalidModel(format!("reward scale {scale} must be ≥ 0")));
    }
    if scale == 0.0 {
        return RewardField::zero(shape, beta);
    }
    RewardField::from_fn(shape, beta, |_, _| rng.random_range(-scale..=scale))
}

fn check_shapes(model: &TabularModel, reward: &RewardField) -> Result<()> {
    let (a, b) = (model.shape(), reward.shape());
    if a.vocab_size != b.vocab_size {
        return Err(Error::DimensionMismatch(a.vocab_size, b.vocab_size));
    }
    if a != b {
        return Err(Error::InvalidModel(format!("model shape {a:?} differs from reward shape {b:?}")));
    }
    Ok(())
}

/// Per context, `π'(x) ∝ π_base(x) · exp(r(x) / β)`.
pub fn build_shifted_model(base: &TabularModel, reward: &RewardField) -> Result<TabularModel> {
    check_shapes(base, reward)?;
    base.map_rows(|ctx, row| {
        let w = reward.weights(ctx.prompt_id, &ctx.prefix)?;
        Categorical::from_weights(row.probs().iter().zip(&w).map(|(p, w)| p * w).collect())
    })
}

/// The RLHF-optimal policy `π* ∝ π_ref · exp(r / β)`, per context.
pub fn rlhf_optimal(target: &TabularModel, reward: &RewardField) -> Result<TabularModel> {
    build_shifted_model(target, reward)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::tv_distance;
    use crate::models::tabular::gen_random_model;

    fn single_row(p: &[f64]) -> TabularModel {
        TabularModel::constant(Categorical::new(p.to_vec()).unwrap(), 1).unwrap()
    }

    #[test]
    fn zero_reward_is_identity() {
        let base = gen_random_model(5, 2, 1.0, &mut RngStream::new(4, 0)).unwrap();
        let r = RewardField::zero(base.shape(), 0.7).unwrap();
        let shifted = build_shifted_model(&base, &r).unwrap();
        for (a, b) in base.rows().iter().zip(shifted.rows()) {
            assert!(tv_distance(a, b).unwrap() < 1e-16);
        }
    }

    #[test]
    fn hand_computed_shift() {
        // weights (0.5, 0.6, 0.8) / 1.9
        let base = single_row(&[0.5, 0.3, 0.2]);
        let r = RewardField::constant(base.shape(), 1.0, &[0.0, 2f64.ln(), 4f64.ln()]).unwrap();
        let s = build_shifted_model(&base, &r).unwrap();
        let expect = [5.0 / 19.0, 6.0 / 19.0, 8.0 / 19.0];
        for (a, b) in s.row(0, &[]).probs().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn rlhf_optimal_examples() {
        let t = single_row(&[0.3, 0.6, 0.1]);
        let r = RewardField::constant(t.shape(), 1.0, &[0.0, 2f64.ln(), 4f64.ln()]).unwrap();
        let opt = rlhf_optimal(&t, &r).unwrap();
        let expect = [3.0 / 19.0, 12.0 / 19.0, 4.0 / 19.0];
        for (a, b) in opt.row(0, &[]).probs().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }

        let t = single_row(&[0.5, 0.5]);
        let r = RewardField::constant(t.shape(), 1.0, &[0.0, 2f64.ln()]).unwrap();
        let opt = rlhf_optimal(&t, &r).unwrap();
        assert!((opt.row(0, &[]).prob(0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((opt.row(0, &[]).prob(1) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn huge_beta_is_continuous_at_zero_shift() {
        let base = gen_random_model(4, 2, 1.0, &mut RngStream::new(8, 0)).unwrap();
        let r = gen_random_reward(base.shape(), 1.0, 1e9, &mut RngStream::new(8, 1)).unwrap();
        let s = build_shifted_model(&base, &r).unwrap();
        for (a, b) in base.rows().iter().zip(s.rows()) {
            assert!(tv_distance(a, b).unwrap() < 1e-6);
        }
    }

    #[test]
    fn overflow_guard() {
        let base = single_row(&[0.5, 0.5]);
        let r = RewardField::constant(base.shape(), 0.001, &[0.0, 1.0]).unwrap();
        assert!(matches!(build_shifted_model(&base, &r), Err(Error::OverflowGuard { .. })));
    }

    #[test]
    fn negated_reward_round_trips() {
        let base = gen_random_model(6, 3, 0.5, &mut RngStream::new(9, 0)).unwrap();
        let r = gen_random_reward(base.shape(), 1.0, 0.5, &mut RngStream::new(9, 1)).unwrap();
        let back = build_shifted_model(&build_shifted_model(&base, &r).unwrap(), &r.negated()).unwrap();
        for (a, b) in base.rows().iter().zip(back.rows()) {
            assert!(tv_distance(a, b).unwrap() < 1e-12);
        }
    }

    #[test]
    fn sequence_reward_sums_increments() {
        let shape = ModelShape::new(2, 2, 1).unwrap();
        let r = RewardField::from_fn(shape, 1.0, |ctx, t| (ctx.depth() * 10 + t) as f64).unwrap();
        // depth 0 token 1 → 1; depth 1 token 0 → 10; third token windows to depth 1: token 1 → 11
        assert_eq!(r.sequence_reward(0, &[1, 0, 1]), 22.0);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let base = gen_random_model(3, 2, 1.0, &mut RngStream::new(0, 0)).unwrap();
        let r = RewardField::zero(ModelShape::new(3, 1, 1).unwrap(), 1.0).unwrap();
        assert!(build_shifted_model(&base, &r).is_err());
    }
}
