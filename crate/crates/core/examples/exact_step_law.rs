// Closed-form next-token law of one shifted speculative step on the
// three-token worked quartet, checked against the reward-tilted target.

use shiftspec::distributions::tv_distance;
use shiftspec::harness::worked_quartet;
use shiftspec::models::Context;
use shiftspec::oracle::{exact_step_sss, step_identities};

pub fn run() -> shiftspec::Result<f64> {
    let q = worked_quartet()?;
    let ctx = Context::root(0);
    let step = exact_step_sss(&q, &ctx, 1.0)?;
    let optimal = q.optimal().row_at(&ctx)?;

    println!("sft          {:?}", q.sft().row_at(&ctx)?.probs());
    println!("shifted      {:?}", q.shifted_draft().row_at(&ctx)?.probs());
    println!("target       {:?}", q.target().row_at(&ctx)?.probs());
    println!("optimal      {:?}", optimal.probs());
    println!("accepted     {:?}", step.accepted_mass);
    println!("reject mass  {:.6}", step.reject_mass);
    println!("bonus        {:?}", step.bonus.probs());
    println!("emitted      {:?}", step.emitted.probs());

    let ids = step_identities(&q, &ctx)?;
    println!("identities   ratio {:.1e} split {:.1e} reject {:.1e}", ids.ratio, ids.split, ids.reject_mass);

    let tv = tv_distance(&step.emitted, optimal)?;
    println!("tv(emitted, optimal) = {tv:.2e}");
    Ok(tv)
}

fn main() -> shiftspec::Result<()> {
    run().map(|_| ())
}
