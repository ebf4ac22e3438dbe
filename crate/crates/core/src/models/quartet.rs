use rand::Rng;
use serde::{Deserialize, Serialize};

use super::reward::{build_shifted_model, gen_random_reward, rlhf_optimal, RewardField};
use super::shape::{Context, ModelShape};
use super::tabular::{gen_random_model_with, TabularModel};
use crate::distributions::{Categorical, RngStream};
use crate::error::{Error, Result};

/// Relative tolerance under which two per-context normalizers count as equal.
pub const MATCH_TOL: f64 = 1e-12;

/// `Z* / Z_d` at one context: `Σ target·w / Σ sft·w`.
pub fn normalizer_ratio(sft: &Categorical, target: &Categorical, weights: &[f64]) -> f64 {
    let zd: f64 = sft.expectation(weights);
    let zs: f64 = target.expectation(weights);
    zs / zd
}

/// The SFT draft, reward-shifted draft, unaligned target and RLHF-optimal
/// target, sharing one reward field.
///
/// `matched` records whether every context satisfies
/// `Σ sft·e^{r/β} = Σ target·e^{r/β}`, the regime in which shifted
/// speculative sampling emits the optimal policy exactly.
#[derive(Debug, Clone)]
pub struct ModelQuartet {
    sft: TabularModel,
    shifted_draft: TabularModel,
    target: TabularModel,
    optimal: TabularModel,
    reward: RewardField,
    matched: bool,
}

impl ModelQuartet {
    /// Derives the shifted draft and the optimal policy from `sft`, `target`
    /// and `reward`, and measures whether the normalizers match.
    pub fn new(sft: TabularModel, target: TabularModel, reward: RewardField) -> Result<Self> {
        if sft.shape() != target.shape() {
            return Err(Error::InvalidModel(format!(
                "sft shape {:?} differs from target shape {:?}",
                sft.shape(),
                target.shape()
            )));
        }
        let shifted_draft = build_shifted_model(&sft, &reward)?;
        let optimal = rlhf_optimal(&target, &reward)?;
        let mut quartet = Self { sft, shifted_draft, target, optimal, reward, matched: false };
        quartet.matched = quartet.max_mismatch()? <= MATCH_TOL;
        Ok(quartet)
    }

    /// Assembles a quartet without deriving or checking anything. Used for
    /// hand-built instances and negative controls.
    pub fn from_parts(
        sft: TabularModel,
        shifted_draft: TabularModel,
        target: TabularModel,
        optimal: TabularModel,
        reward: RewardField,
        matched: bool,
    ) -> Self {
        Self { sft, shifted_draft, target, optimal, reward, matched }
    }

    pub fn sft(&self) -> &TabularModel {
        &self.sft
    }

    pub fn shifted_draft(&self) -> &TabularModel {
        &self.shifted_draft
    }

    pub fn target(&self) -> &TabularModel {
        &self.target
    }

    pub fn optimal(&self) -> &TabularModel {
        &self.optimal
    }

    pub fn reward(&self) -> &RewardField {
        &self.reward
    }

    pub fn is_matched(&self) -> bool {
        self.matched
    }

    pub fn shape(&self) -> ModelShape {
        self.sft.shape()
    }

    /// `Z*/Z_d − 1` at one context.
    pub fn mismatch_at(&self, ctx: &Context) -> Result<f64> {
        let w = self.reward.weights(ctx.prompt_id, &ctx.prefix)?;
        let s = self.sft.row(ctx.prompt_id, &ctx.prefix);
        let t = self.target.row(ctx.prompt_id, &ctx.prefix);
        Ok(normalizer_ratio(s, t, &w) - 1.0)
    }

    /// Largest `|Z*/Z_d − 1|` over all stored contexts.
    pub fn max_mismatch(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for ctx in self.shape().contexts() {
            worst = worst.max(self.mismatch_at(&ctx)?.abs());
        }
        Ok(worst)
    }

    /// The quartet after row-wise temperature scaling. Tempering the tilted
    /// rows equals tilting the tempered rows with `β · T`, so the result is
    /// rebuilt from the tempered SFT and target.
    pub fn tempered(&self, temperature: f64) -> Result<Self> {
        if temperature == 1.0 {
            return Ok(self.clone());
        }
        Self::new(
            self.sft.tempered(temperature)?,
            self.target.tempered(temperature)?,
            self.reward.with_beta(self.reward.beta() * temperature)?,
        )
    }
}

/// Builds a target whose per-context normalizer equals the SFT draft's.
///
/// Per context with weights `w = e^{r/β}` and `Z_d = Σ sft·w`, picks `i`, `j`
/// with `w_i < Z_d < w_j`, forms the two-point law
/// `u = λ e_i + (1−λ) e_j` with `λ = (w_j − Z_d)/(w_j − w_i)` (so `Σ u·w = Z_d`)
/// and returns `(1 − mix)·sft + mix·u`. Contexts with constant weights keep
/// the SFT row.
pub fn gen_matched_target(
    sft: &TabularModel,
    reward: &RewardField,
    mix: f64,
    rng: &mut RngStream,
) -> Result<TabularModel> {
    if !(0.0..=1.0).contains(&mix) {
        return Err(Error::InvalidModel(format!("mix {mix} outside [0, 1]")));
    }
    if sft.shape() != reward.shape() {
        return Err(Error::InvalidModel("sft and reward shapes differ".into()));
    }
    sft.map_rows(|ctx, row| {
        let w = reward.weights(ctx.prompt_id, &ctx.prefix)?;
        let (wmin, wmax) = w
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        if mix == 0.0 || wmax - wmin <= f64::EPSILON * wmax {
            return Ok(row.clone());
        }
        let zd = row.expectation(&w);
        let lows: Vec<usize> = (0..w.len()).filter(|&i| w[i] < zd).collect();
        let highs: Vec<usize> = (0..w.len()).filter(|&j| w[j] > zd).collect();
        if lows.is_empty() || highs.is_empty() {
            return Err(Error::NoFeasibleVertex { normalizer: zd, min_weight: wmin, max_weight: wmax });
        }
        let i = lows[rng.random_range(0..lows.len())];
        let j = highs[rng.random_range(0..highs.len())];
        let lambda = (w[j] - zd) / (w[j] - w[i]);
        let mut probs: Vec<f64> = row.probs().iter().map(|p| (1.0 - mix) * p).collect();
        probs[i] += mix * lambda;
        probs[j] += mix * (1.0 - lambda);
        Categorical::from_weights(probs)
    })
}

/// Recipe for random quartets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuartetSpec {
    pub vocab_size: usize,
    pub max_depth: usize,
    /// Symmetric Dirichlet concentration of the random rows.
    pub concentration: f64,
    /// Reward increments are uniform on `[−reward_scale, reward_scale]`.
    pub reward_scale: f64,
    pub beta: f64,
    /// Weight of the non-SFT component of the target.
    pub mix: f64,
}

impl Default for QuartetSpec {
    fn default() -> Self {
        Self { vocab_size: 4, max_depth: 3, concentration: 1.0, reward_scale: 1.0, beta: 0.5, mix: 0.5 }
    }
}

impl QuartetSpec {
    fn sft_and_reward(&self, rng: &mut RngStream) -> Result<(TabularModel, RewardField)> {
        let shape = ModelShape::new(self.vocab_size, self.max_depth, 1)?;
        let sft = gen_random_model_with(shape, None, self.concentration, rng)?;
        let reward = gen_random_reward(shape, self.reward_scale, self.beta, rng)?;
        Ok((sft, reward))
    }

    /// A quartet satisfying the matched-normalizer condition at every context.
    pub fn matched(&self, rng: &mut RngStream) -> Result<ModelQuartet> {
        let (sft, reward) = self.sft_and_reward(rng)?;
        let target = gen_matched_target(&sft, &reward, self.mix, rng)?;
        let q = ModelQuartet::new(sft, target, reward)?;
        if !q.is_matched() {
            return Err(Error::InvalidModel(format!(
                "matched construction left mismatch {:e}",
                q.max_mismatch()?
            )));
        }
        Ok(q)
    }

    /// A quartet whose target mixes the SFT draft with an independent random
    /// model, without the normalizer constraint.
    pub fn unmatched(&self, rng: &mut RngStream) -> Result<ModelQuartet> {
        let (sft, reward) = self.sft_and_reward(rng)?;
        let other = gen_random_model_with(sft.shape(), None, self.concentration, rng)?;
        let mix = self.mix;
        let target = sft.map_rows(|ctx, row| {
            let o = other.row(ctx.prompt_id, &ctx.prefix);
            Categorical::from_weights(
                row.probs().iter().zip(o.probs()).map(|(a, b)| (1.0 - mix) * a + mix * b).collect(),
            )
        })?;
        ModelQuartet::new(sft, target, reward)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::tv_distance;

    fn worked_sft() -> (TabularModel, RewardField) {
        let sft = TabularModel::constant(Categorical::new(vec![0.5, 0.3, 0.2]).unwrap(), 1).unwrap();
        let r = RewardField::constant(sft.shape(), 1.0, &[0.0, 2f64.ln(), 4f64.ln()]).unwrap();
        (sft, r)
    }

    #[test]
    fn mix_zero_returns_sft() {
        let (sft, r) = worked_sft();
        let t = gen_matched_target(&sft, &r, 0.0, &mut RngStream::new(0, 0)).unwrap();
        assert_eq!(t, sft);
    }

    #[test]
    fn matched_target_satisfies_linear_constraint() {
        // q0 + 2 q1 + 4 q2 = 1.9 for any matched output.
        let (sft, r) = worked_sft();
        for seed in 0..50 {
            let mix = (seed as f64) / 49.0;
            let t = gen_matched_target(&sft, &r, mix, &mut RngStream::new(seed, 0)).unwrap();
            let q = t.row(0, &[]).probs();
            assert!((q[0] + 2.0 * q[1] + 4.0 * q[2] - 1.9).abs() < 1e-12);
        }
    }

    #[test]
    fn worked_target_is_matched() {
        // b + 3c = 0.9 holds for [0.3, 0.6, 0.1]: 0.3 + 1.2 + 0.4 = 1.9.
        let (sft, r) = worked_sft();
        let t = TabularModel::constant(Categorical::new(vec![0.3, 0.6, 0.1]).unwrap(), 1).unwrap();
        let q = ModelQuartet::new(sft, t, r).unwrap();
        assert!(q.is_matched());
        let t2 = TabularModel::constant(Categorical::new(vec![0.4, 0.5, 0.1]).unwrap(), 1).unwrap();
        let q2 = ModelQuartet::new(q.sft().clone(), t2, q.reward().clone()).unwrap();
        assert!(!q2.is_matched());
        assert!((q2.mismatch_at(&Context::root(0)).unwrap() - (1.8 / 1.9 - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn random_matched_quartets_are_consistent() {
        let spec = QuartetSpec { vocab_size: 7, ..Default::default() };
        for s in 0..20 {
            let q = spec.matched(&mut RngStream::new(s, 0)).unwrap();
            assert!(q.max_mismatch().unwrap() <= MATCH_TOL);
            let sd = build_shifted_model(q.sft(), q.reward()).unwrap();
            for (a, b) in sd.rows().iter().zip(q.shifted_draft().rows()) {
                assert!(tv_distance(a, b).unwrap() < 1e-12);
            }
        }
    }

    #[test]
    fn unmatched_quartets_usually_mismatch() {
        let spec = QuartetSpec::default();
        let q = spec.unmatched(&mut RngStream::new(3, 0)).unwrap();
        assert!(!q.is_matched());
    }

    #[test]
    fn infeasible_vertex_is_reported() {
        // Point mass on the heaviest-weight token puts Z_d at max w.
        let sft = TabularModel::constant(Categorical::new(vec![0.0, 1.0]).unwrap(), 1).unwrap();
        let r = RewardField::constant(sft.shape(), 1.0, &[0.0, 1.0]).unwrap();
        assert!(matches!(
            gen_matched_target(&sft, &r, 0.5, &mut RngStream::new(0, 0)),
            Err(Error::NoFeasibleVertex { .. })
        ));
    }

    #[test]
    fn tempered_quartet_stays_consistent() {
        let q = QuartetSpec::default().matched(&mut RngStream::new(5, 0)).unwrap();
        let hot = q.tempered(0.8).unwrap();
        let direct = q.shifted_draft().tempered(0.8).unwrap();
        for (a, b) in direct.rows().iter().zip(hot.shifted_draft().rows()) {
            assert!(tv_distance(a, b).unwrap() < 1e-12);
        }
    }
}
