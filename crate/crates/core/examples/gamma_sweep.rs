// Exact reward, KL to the target and distance to the optimal law as the
// shifted-draft exponent in the residual moves from 0 to 1.

use shiftspec::distributions::RngStream;
use shiftspec::models::{sequence_distribution, sequence_rewards, QuartetSpec};
use shiftspec::oracle::sss_sequence_law;

pub fn run() -> shiftspec::Result<Vec<(f64, f64, f64)>> {
    let spec = QuartetSpec::default();
    let q = spec.matched(&mut RngStream::new(9, 0))?;
    let l = spec.max_depth;
    let rewards = sequence_rewards(q.reward(), 0, l)?;
    let target = sequence_distribution(q.target(), 0, l)?;
    let optimal = sequence_distribution(q.optimal(), 0, l)?;

    println!("gamma   reward     kl      tv*");
    let mut rows = Vec::new();
    for step in 0..=10 {
        let gamma = step as f64 / 10.0;
        let law = sss_sequence_law(&q, gamma, 0, l)?;
        let reward: f64 = law.probs().iter().zip(&rewards).map(|(p, r)| p * r).sum();
        let kl = law.kl(&target)?;
        let tv = law.tv(&optimal)?;
        println!("{gamma:>4.1}  {reward:>8.4}  {kl:>7.4}  {tv:.2e}");
        rows.push((gamma, kl, tv));
    }
    Ok(rows)
}

fn main() -> shiftspec::Result<()> {
    run().map(|_| ())
}
