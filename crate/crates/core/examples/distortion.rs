// How far shifted speculative sampling drifts from the optimal policy as
// the target moves away from the matched condition.

use shiftspec::distributions::RngStream;
use shiftspec::models::{gen_random_model, gen_random_reward};
use shiftspec::oracle::{correlation, distortion_scan, DistortionReport};

pub fn run() -> shiftspec::Result<Vec<DistortionReport>> {
    let mut rng = RngStream::new(17, 0);
    let sft = gen_random_model(4, 3, 1.0, &mut rng)?;
    let reward = gen_random_reward(sft.shape(), 1.0, 0.5, &mut rng)?;
    let grid: Vec<f64> = (0..=8).map(|i| i as f64 / 8.0).collect();
    let reports = distortion_scan(&sft, &reward, &grid, &mut rng)?;

    println!("|mismatch|  tv*       reward gap  kl(target)");
    for r in &reports {
        println!(
            "{:>9.4}  {:>8.4}  {:>10.4}  {:>9.4}",
            r.abs_mismatch, r.tv_to_optimal, r.expected_reward_gap, r.kl_to_target
        );
    }
    let xs: Vec<f64> = reports.iter().map(|r| r.abs_mismatch).collect();
    let ys: Vec<f64> = reports.iter().map(|r| r.tv_to_optimal).collect();
    println!("correlation(|mismatch|, tv*) = {:.3}", correlation(&xs, &ys));
    Ok(reports)
}

fn main() -> shiftspec::Result<()> {
    run().map(|_| ())
}
