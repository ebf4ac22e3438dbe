// Monte Carlo decodes of the shifted and standard decoders, compared with
// their exact sequence laws by tv and a chi-square test.

use shiftspec::distributions::RngStream;
use shiftspec::models::{sequence_distribution, QuartetSpec};
use shiftspec::oracle::monte_carlo_law;
use shiftspec::sampling::{LookaheadConfig, ShiftedSpecDecoder, StandardSpecDecoder};

pub fn run(n_runs: u64) -> shiftspec::Result<(f64, f64)> {
    let q = QuartetSpec::default().matched(&mut RngStream::new(11, 0))?;
    let cfg = LookaheadConfig::new(2, 3)?;
    let rng = RngStream::new(11, 1);

    let optimal = sequence_distribution(q.optimal(), 0, 3)?;
    let sss = monte_carlo_law(&ShiftedSpecDecoder::new(&q, cfg)?, 0, n_runs, &rng)?;
    let gof = sss.chi_square(&optimal)?;
    let sss_tv = sss.tv(&optimal)?;
    println!(
        "shifted  vs optimal: tv {sss_tv:.4} chi2 {:.1} dof {} p {:.3} tokens/call {:.3}",
        gof.statistic,
        gof.dof,
        gof.p_value,
        sss.totals.tokens_per_target_call()
    );

    let target = sequence_distribution(q.target(), 0, 3)?;
    let ss = monte_carlo_law(&StandardSpecDecoder::new(q.sft(), q.target(), cfg)?, 0, n_runs, &rng.sibling(2))?;
    let gof = ss.chi_square(&target)?;
    let ss_tv = ss.tv(&target)?;
    println!(
        "standard vs target : tv {ss_tv:.4} chi2 {:.1} dof {} p {:.3} tokens/call {:.3}",
        gof.statistic,
        gof.dof,
        gof.p_value,
        ss.totals.tokens_per_target_call()
    );
    Ok((sss_tv, ss_tv))
}

fn main() -> shiftspec::Result<()> {
    run(100_000).map(|_| ())
}
