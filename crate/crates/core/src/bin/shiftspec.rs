use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use shiftspec::harness::{run, ExperimentConfig};

/// Run a verification or measurement suite and emit its report.
#[derive(Parser, Debug)]
#[command(name = "shiftspec", version)]
struct Cli {
    /// verify | simulate | acceptance | gamma-sweep | baselines | distortion
    suite: Option<String>,
    /// Flat `key = value` config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    vocab: Option<usize>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    lookahead: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    reward_scale: Option<f64>,
    #[arg(long)]
    mix: Option<f64>,
    #[arg(long)]
    runs: Option<u64>,
    #[arg(long)]
    instances: Option<u64>,
    /// csv | jsonl
    #[arg(long)]
    format: Option<String>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Cli {
    fn overrides(&self) -> Vec<(String, String)> {
        let mut kv = Vec::new();
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                kv.push((k.to_string(), v));
            }
        };
        push("suite", self.suite.clone());
        push("seed", self.seed.map(|x| x.to_string()));
        push("vocab_size", self.vocab.map(|x| x.to_string()));
        push("depth", self.depth.map(|x| x.to_string()));
        push("lookahead", self.lookahead.map(|x| x.to_string()));
        push("gamma", self.gamma.map(|x| x.to_string()));
        push("beta", self.beta.map(|x| x.to_string()));
        push("reward_scale", self.reward_scale.map(|x| x.to_string()));
        push("mix", self.mix.map(|x| x.to_string()));
        push("n_runs", self.runs.map(|x| x.to_string()));
        push("n_instances", self.instances.map(|x| x.to_string()));
        push("format", self.format.clone());
        push("output_path", self.out.as_ref().map(|p| p.display().to_string()));
        kv
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = ExperimentConfig::load(cli.config.as_deref(), &cli.overrides()).and_then(|cfg| {
        let report = run(&cfg)?;
        let out: Box<dyn Write> = match &cfg.output_path {
            Some(p) => Box::new(BufWriter::new(File::create(p)?)),
            None => Box::new(io::stdout().lock()),
        };
        report.write(cfg.format, out)?;
        Ok(report.passed())
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("shiftspec: {e}");
            ExitCode::from(2)
        }
    }
}
