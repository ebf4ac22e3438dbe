// Acceptance rates of the four rule and draft combinations. Proposing
// from the shifted draft under the standard test loses acceptance; the
// shifted test recovers it.

use shiftspec::distributions::RngStream;
use shiftspec::models::{ModelQuartet, QuartetSpec};
use shiftspec::oracle::{acceptance_table, AcceptanceCell, Rule};
use shiftspec::sampling::DraftChoice;

pub fn run(instances: u64, blocks: u64) -> shiftspec::Result<Vec<AcceptanceCell>> {
    let spec = QuartetSpec { vocab_size: 16, max_depth: 3, ..Default::default() };
    let rng = RngStream::new(5, 0);
    let quartets =
        (0..instances).map(|i| spec.matched(&mut rng.derive(i))).collect::<shiftspec::Result<Vec<ModelQuartet>>>()?;

    let mut cells = Vec::new();
    for rule in [Rule::Standard, Rule::Shifted] {
        for draft in [DraftChoice::Sft, DraftChoice::ShiftedDraft] {
            let cell = acceptance_table(&quartets, rule, draft, 2, blocks, &rng.sibling(1))?;
            println!("{:<8?} {:<12?} {:.4} ± {:.4}", rule, draft, cell.mean, cell.std_err);
            cells.push(cell);
        }
    }
    Ok(cells)
}

fn main() -> shiftspec::Result<()> {
    run(100, 2000).map(|_| ())
}
