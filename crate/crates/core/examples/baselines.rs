// Reward and target-call cost of vanilla decoding, best-of-N, rejection
// sampling and both speculative decoders on 32-token outputs.

use shiftspec::distributions::RngStream;
use shiftspec::models::QuartetSpec;
use shiftspec::oracle::{best_of_n, rejection_baseline};
use shiftspec::sampling::{Decoder, LookaheadConfig, ShiftedSpecDecoder, StandardSpecDecoder, VanillaDecoder};

const LENGTH: usize = 32;

fn report(name: &str, reward: f64, calls: f64) {
    println!("{name:<10} reward {reward:>7.3}  target calls {calls:>7.2}");
}

pub fn run(trials: u64) -> shiftspec::Result<f64> {
    let q = QuartetSpec { vocab_size: 8, ..Default::default() }.matched(&mut RngStream::new(13, 0))?;
    let cfg = LookaheadConfig::new(4, LENGTH)?;
    let rng = RngStream::new(13, 1);
    let r = q.reward();
    let n = trials as f64;

    let decoders: [(&str, Box<dyn Decoder + '_>); 3] = [
        ("vanilla", Box::new(VanillaDecoder::new(q.target(), cfg)?)),
        ("standard", Box::new(StandardSpecDecoder::new(q.sft(), q.target(), cfg)?)),
        ("shifted", Box::new(ShiftedSpecDecoder::new(&q, cfg)?)),
    ];
    let mut vanilla_mean = 0.0;
    let mut shifted_calls = 0.0;
    for (k, (name, dec)) in decoders.iter().enumerate() {
        let (mut reward, mut calls) = (0.0, 0.0);
        for i in 0..trials {
            let d = dec.decode(0, &mut rng.sibling(k as u64 + 10).derive(i))?;
            reward += r.sequence_reward(0, &d.tokens);
            calls += d.trace.target_calls as f64;
        }
        report(name, reward / n, calls / n);
        if k == 0 {
            vanilla_mean = reward / n;
        }
        shifted_calls = calls / n;
    }

    let (mut reward, mut calls) = (0.0, 0.0);
    for i in 0..trials {
        let o = best_of_n(q.target(), r, 10, LENGTH, 0, &mut rng.sibling(20).derive(i))?;
        reward += o.reward;
        calls += o.target_calls as f64;
    }
    report("best-of-10", reward / n, calls / n);

    let (mut reward, mut calls) = (0.0, 0.0);
    for i in 0..trials {
        let o = rejection_baseline(q.target(), r, vanilla_mean + 1.0, 10, LENGTH, 0, &mut rng.sibling(21).derive(i))?;
        reward += o.reward;
        calls += o.target_calls as f64;
    }
    report("rejection", reward / n, calls / n);
    Ok(shifted_calls)
}

fn main() -> shiftspec::Result<()> {
    run(2000).map(|_| ())
}
