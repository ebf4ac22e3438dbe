// Runs a harness suite from key-value config text and prints its report
// as CSV. Pass a suite name as the first argument (default `verify`).

use shiftspec::harness::{parse_kv, run as run_config, ExperimentConfig, Format, RunReport};

pub fn run(suite: &str, extra: &str) -> shiftspec::Result<RunReport> {
    let text = format!("suite = {suite}\nseed = 3\n{extra}");
    let cfg = ExperimentConfig::from_pairs(parse_kv(&text)?)?;
    let report = run_config(&cfg)?;
    print!("{}", report.to_string(Format::Csv)?);
    Ok(report)
}

fn main() -> shiftspec::Result<()> {
    let suite = std::env::args().nth(1).unwrap_or_else(|| "verify".into());
    let report = run(&suite, "")?;
    if !report.passed() {
        std::process::exit(1);
    }
    Ok(())
}
