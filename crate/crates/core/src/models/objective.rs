use super::reward::RewardField;
use super::sequence::{sequence_distribution, SequenceLaw};
use super::tabular::TabularModel;
use crate::error::{Error, Result};

/// Sequence rewards `r(x, y)` for every length-`length` sequence, in
/// [`SequenceLaw`] index order.
pub fn sequence_rewards(reward: &RewardField, prompt_id: usize, length: usize) -> Result<Vec<f64>> {
    let v = reward.shape().vocab_size;
    let template = SequenceLaw::new(v, length, vec![0.0; v.pow(length as u32)])?;
    Ok((0..template.probs().len())
        .map(|i| reward.sequence_reward(prompt_id, &template.sequence(i)))
        .collect())
}

/// `E_{y∼candidate}[r(x, y)] − β · KL(candidate ‖ target)` over full
/// sequences of length `max_depth`, computed by exact enumeration. The KL
/// weight of the objective is identified with the `β` of the reward field.
pub fn rlhf_objective(
    candidate: &TabularModel,
    target: &TabularModel,
    reward: &RewardField,
    prompt_id: usize,
) -> Result<f64> {
    if candidate.shape() != target.shape() {
        return Err(Error::InvalidModel("candidate and target shapes differ".into()));
    }
    let length = candidate.max_depth();
    let c = sequence_distribution(candidate, prompt_id, length)?;
    let t = sequence_distribution(target, prompt_id, length)?;
    let rewards = sequence_rewards(reward, prompt_id, length)?;
    let expected: f64 = c.probs().iter().zip(&rewards).map(|(p, r)| p * r).sum();
    Ok(expected - reward.beta() * c.kl(&t)?)
}

/// The maximizer of [`rlhf_objective`] over all sequence laws:
/// `P(y) ∝ π_ref(y) · exp(r(x, y) / β)`.
///
/// At depth 1 this is the per-context optimal row. At larger depths it
/// differs from chaining per-context tilted rows, because the per-token tilt
/// ignores the reward still to come.
pub fn sequence_optimal_law(
    target: &TabularModel,
    reward: &RewardField,
    prompt_id: usize,
    length: usize,
) -> Result<SequenceLaw> {
    let t = sequence_distribution(target, prompt_id, length)?;
    let rewards = sequence_rewards(reward, prompt_id, length)?;
    let beta = reward.beta();
    let shift = rewards.iter().cloned().fold(f64::NEG_INFINITY, f64::max) / beta;
    let w: Vec<f64> = t
        .probs()
        .iter()
        .zip(&rewards)
        .map(|(p, r)| p * (r / beta - shift).exp())
        .collect();
    let z: f64 = w.iter().sum();
    SequenceLaw::new(t.vocab_size(), length, w.into_iter().map(|x| x / z).collect())
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{Categorical, RngStream};
    use crate::models::{gen_random_model, gen_random_reward, rlhf_optimal};

    #[test]
    fn zero_reward_identity_policy_scores_zero() {
        let t = gen_random_model(3, 2, 1.0, &mut RngStream::new(0, 0)).unwrap();
        let r = RewardField::zero(t.shape(), 1.0).unwrap();
        assert_eq!(rlhf_objective(&t, &t, &r, 0).unwrap(), 0.0);
    }

    #[test]
    fn two_token_closed_form() {
        // β log Σ π_ref e^{r/β} = log((1 + e) / 2)
        let t = TabularModel::constant(Categorical::uniform(2).unwrap(), 1).unwrap();
        let r = RewardField::constant(t.shape(), 1.0, &[0.0, 1.0]).unwrap();
        let opt = rlhf_optimal(&t, &r).unwrap();
        let v = rlhf_objective(&opt, &t, &r, 0).unwrap();
        assert!((v - ((1.0 + std::f64::consts::E) / 2.0).ln()).abs() < 1e-12);
        assert!((v - 0.620_114_506_958_277_5).abs() < 1e-12);
    }

    #[test]
    fn per_context_optimum_never_beats_sequence_optimum() {
        for seed in 0..10 {
            let mut rng = RngStream::new(seed, 0);
            let t = gen_random_model(3, 3, 1.0, &mut rng).unwrap();
            let r = gen_random_reward(t.shape(), 1.0, 0.5, &mut rng).unwrap();
            let per_ctx = rlhf_objective(&rlhf_optimal(&t, &r).unwrap(), &t, &r, 0).unwrap();
            let seq = sequence_optimal_law(&t, &r, 0, 3).unwrap();
            let tl = sequence_distribution(&t, 0, 3).unwrap();
            let rw = sequence_rewards(&r, 0, 3).unwrap();
            let best: f64 = seq.probs().iter().zip(&rw).map(|(p, x)| p * x).sum::<f64>()
                - r.beta() * seq.kl(&tl).unwrap();
            // Closed form: β log E_ref[e^{R/β}].
            let log_z = (tl.probs().iter().zip(&rw).map(|(p, x)| p * (x / r.beta()).exp()))
                .sum::<f64>()
                .ln()
                * r.beta();
            assert!((best - log_z).abs() < 1e-10);
            assert!(per_ctx <= best + 1e-12);
        }
    }
}
