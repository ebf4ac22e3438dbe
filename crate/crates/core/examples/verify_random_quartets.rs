// Exact sequence laws of shifted speculative sampling on random matched
// quartets, compared with the optimal policy, plus one unmatched quartet
// for contrast.

use shiftspec::distributions::RngStream;
use shiftspec::models::{sequence_distribution, QuartetSpec};
use shiftspec::oracle::sss_sequence_law;

pub fn run(instances: u64) -> shiftspec::Result<f64> {
    let rng = RngStream::new(7, 0);
    let mut worst: f64 = 0.0;
    for i in 0..instances {
        let spec = QuartetSpec { vocab_size: 2 + (i as usize % 6), max_depth: 3, ..Default::default() };
        let q = spec.matched(&mut rng.derive(i))?;
        let emitted = sss_sequence_law(&q, 1.0, 0, spec.max_depth)?;
        let optimal = sequence_distribution(q.optimal(), 0, spec.max_depth)?;
        let tv = emitted.tv(&optimal)?;
        worst = worst.max(tv);
        println!("V={} matched   tv = {tv:.2e}", spec.vocab_size);
    }

    let spec = QuartetSpec { vocab_size: 4, max_depth: 3, ..Default::default() };
    let q = spec.unmatched(&mut rng.derive(instances))?;
    let tv = sss_sequence_law(&q, 1.0, 0, 3)?.tv(&sequence_distribution(q.optimal(), 0, 3)?)?;
    println!("V=4 unmatched tv = {tv:.2e} (max mismatch {:.3})", q.max_mismatch()?);
    println!("worst matched tv over {instances} instances: {worst:.2e}");
    Ok(worst)
}

fn main() -> shiftspec::Result<()> {
    run(12).map(|_| ())
}
