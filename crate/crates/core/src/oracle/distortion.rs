use serde::Serialize;
use statrs::statistics::Statistics;

use super::step::sss_sequence_law;
use crate::distributions::{Categorical, RngStream};
use crate::error::{Error, Result};
use crate::models::{
    decode_index, gen_random_model, sequence_distribution, sequence_rewards, Context, ModelQuartet, RewardField,
    SequenceLaw, TabularModel,
};

/// How far shifted speculative sampling lands from the optimal policy on
/// one quartet, over outputs of `max_depth` tokens from prompt 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistortionReport {
    /// Mean of the per-context `Z*/Z_d − 1`, weighted by how often the
    /// emitted law visits each context.
    pub mismatch: f64,
    /// The same weighted mean of `|Z*/Z_d − 1|`.
    pub abs_mismatch: f64,
    pub tv_to_optimal: f64,
    /// `E_{π*}[r] − E_{emitted}[r]`.
    pub expected_reward_gap: f64,
    /// `KL(emitted ‖ target)` over sequences.
    pub kl_to_target: f64,
}

/// Probability that `law` passes through each prefix of each depth below
/// its length, in the row order of a fresh `ModelShape`.
fn prefix_masses(law: &SequenceLaw) -> Vec<(usize, usize, f64)> {
    let v = law.vocab_size();
    let l = law.length();
    let mut out = Vec::new();
    for depth in 0..l {
        let block = v.pow((l - depth) as u32);
        for (code, chunk) in law.probs().chunks(block).enumerate() {
            out.push((depth, code, chunk.iter().sum()));
        }
    }
    out
}

pub fn distortion_report(quartet: &ModelQuartet) -> Result<DistortionReport> {
    let shape = quartet.shape();
    let l = shape.max_depth;
    let emitted = sss_sequence_law(quartet, 1.0, 0, l)?;
    let optimal = sequence_distribution(quartet.optimal(), 0, l)?;
    let target = sequence_distribution(quartet.target(), 0, l)?;

    let (mut mismatch, mut abs_mismatch) = (0.0, 0.0);
    for (depth, code, mass) in prefix_masses(&emitted) {
        if mass == 0.0 {
            continue;
        }
        let prefix = decode_index(code, shape.vocab_size, depth);
        let m = quartet.mismatch_at(&Context::new(0, prefix))?;
        mismatch += mass * m / l as f64;
        abs_mismatch += mass * m.abs() / l as f64;
    }

    let rewards = sequence_rewards(quartet.reward(), 0, l)?;
    let mean_reward = |law: &SequenceLaw| -> f64 { law.probs().iter().zip(&rewards).map(|(p, r)| p * r).sum() };
    Ok(DistortionReport {
        mismatch,
        abs_mismatch,
        tv_to_optimal: emitted.tv(&optimal)?,
        expected_reward_gap: mean_reward(&optimal) - mean_reward(&emitted),
        kl_to_target: emitted.kl(&target)?,
    })
}

/// Blends `sft` towards one independent random model by each weight in
/// `mix_grid`, with no normalizer constraint, and reports the distortion of
/// each resulting quartet. Weight `0` reproduces `sft` as the target, the
/// exactly matched case. Reports come back sorted by `abs_mismatch`.
pub fn distortion_scan(
    sft: &TabularModel,
    reward: &RewardField,
    mix_grid: &[f64],
    rng: &mut RngStream,
) -> Result<Vec<DistortionReport>> {
    let other = gen_random_model(sft.vocab_size(), sft.max_depth(), 1.0, rng)?;
    if other.shape() != sft.shape() {
        return Err(Error::InvalidModel("distortion scans need a single-prompt model".into()));
    }
    let mut reports = mix_grid
        .iter()
        .map(|&mix| {
            if !(0.0..=1.0).contains(&mix) {
                return Err(Error::InvalidModel(format!("mix {mix} outside [0, 1]")));
            }
            let target = sft.map_rows(|ctx, row| {
                let o = other.row(ctx.prompt_id, &ctx.prefix);
                Categorical::from_weights(
                    row.probs().iter().zip(o.probs()).map(|(a, b)| (1.0 - mix) * a + mix * b).collect(),
                )
            })?;
            distortion_report(&ModelQuartet::new(sft.clone(), target, reward.clone())?)
        })
        .collect::<Result<Vec<_>>>()?;
    reports.sort_by(|a, b| a.abs_mismatch.total_cmp(&b.abs_mismatch));
    Ok(reports)
}

/// Pearson correlation; `NaN` when either side is constant.
pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    let cov = xs.covariance(ys);
    cov / (xs.std_dev() * ys.std_dev())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::QuartetSpec;

    #[test]
    fn matched_quartets_have_no_distortion() {
        let q = QuartetSpec::default().matched(&mut RngStream::new(31, 0)).unwrap();
        let r = distortion_report(&q).unwrap();
        assert!(r.abs_mismatch < 1e-12);
        assert!(r.tv_to_optimal < 1e-12);
        assert!(r.expected_reward_gap.abs() < 1e-12);
    }

    #[test]
    fn perturbed_worked_case() {
        let sft = TabularModel::constant(Categorical::new(vec![0.5, 0.3, 0.2]).unwrap(), 1).unwrap();
        let target = TabularModel::constant(Categorical::new(vec![0.4, 0.5, 0.1]).unwrap(), 1).unwrap();
        let r = RewardField::constant(sft.shape(), 1.0, &[0.0, 2f64.ln(), 4f64.ln()]).unwrap();
        let rep = distortion_report(&ModelQuartet::new(sft, target, r).unwrap()).unwrap();
        assert!((rep.mismatch - (1.8 / 1.9 - 1.0)).abs() < 1e-12);
        assert!((rep.abs_mismatch - (1.0 - 1.8 / 1.9)).abs() < 1e-12);
        assert!((rep.tv_to_optimal - 4.0 / 171.0).abs() < 1e-12);
    }

    #[test]
    fn scan_starts_matched_and_grows() {
        let mut rng = RngStream::new(32, 0);
        let spec = QuartetSpec::default();
        let sft = gen_random_model(spec.vocab_size, spec.max_depth, 1.0, &mut rng).unwrap();
        let reward = crate::models::gen_random_reward(sft.shape(), 1.0, 0.5, &mut rng).unwrap();
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let reps = distortion_scan(&sft, &reward, &grid, &mut rng).unwrap();
        assert_eq!(reps.len(), 11);
        assert!(reps[0].abs_mismatch < 1e-12);
        assert!(reps[0].tv_to_optimal < 1e-12);
        assert!(reps.windows(2).all(|w| w[0].abs_mismatch <= w[1].abs_mismatch));
        let xs: Vec<f64> = reps.iter().map(|r| r.abs_mismatch).collect();
        let ys: Vec<f64> = reps.iter().map(|r| r.tv_to_optimal).collect();
        assert!(correlation(&xs, &ys) > 0.0);
    }

    #[test]
    fn correlation_of_a_line() {
        let xs = [1.0, 2.0, 3.0];
        assert!((correlation(&xs, &[2.0, 4.0, 6.0]) - 1.0).abs() < 1e-12);
        assert!((correlation(&xs, &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
    }
}
