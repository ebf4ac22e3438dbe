use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::MAX_ENUMERATION;
use crate::oracle::MIN_RUNS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Verify,
    Simulate,
    Acceptance,
    GammaSweep,
    Baselines,
    Distortion,
}

impl Suite {
    pub const ALL: [Suite; 6] =
        [Suite::Verify, Suite::Simulate, Suite::Acceptance, Suite::GammaSweep, Suite::Baselines, Suite::Distortion];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Verify => "verify",
            Suite::Simulate => "simulate",
            Suite::Acceptance => "acceptance",
            Suite::GammaSweep => "gamma-sweep",
            Suite::Baselines => "baselines",
            Suite::Distortion => "distortion",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::config("suite", format!("unknown suite {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Jsonl,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "jsonl" => Ok(Format::Jsonl),
            _ => Err(Error::config("format", format!("expected csv or jsonl, got {s:?}"))),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Jsonl => "jsonl",
        })
    }
}

/// Everything a suite run depends on. Keys not set explicitly take the
/// defaults of [`ExperimentConfig::defaults`] for the chosen suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub suite: Suite,
    /// Vocabulary size. `verify` cycles through `2..=vocab_size`.
    pub vocab_size: usize,
    /// Model depth `L`: the enumerated output length.
    pub depth: usize,
    pub lookahead: usize,
    pub gamma: f64,
    pub beta: f64,
    pub reward_scale: f64,
    pub mix: f64,
    /// Decodes per Monte Carlo estimate; blocks per instance in `acceptance`.
    pub n_runs: u64,
    pub n_instances: u64,
    pub seed: u64,
    pub output_path: Option<PathBuf>,
    pub format: Format,
    /// Decode length of the `baselines` suite.
    pub length: usize,
    /// Candidates for best-of-N, and the attempt cap of the rejection baseline.
    pub bon_n: u64,
    /// Reward threshold of the rejection baseline; unset means one standard
    /// deviation above the vanilla mean.
    pub threshold: Option<f64>,
    /// Mass moved between two tokens of every optimal row in `verify`, as a
    /// negative control.
    pub corrupt: f64,
}

pub const KEYS: [&str; 17] = [
    "suite",
    "vocab_size",
    "depth",
    "lookahead",
    "gamma",
    "beta",
    "reward_scale",
    "mix",
    "n_runs",
    "n_instances",
    "seed",
    "output_path",
    "format",
    "length",
    "bon_n",
    "threshold",
    "corrupt",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::config(key, format!("cannot parse {value:?}")))
}

impl ExperimentConfig {
    pub fn defaults(suite: Suite) -> Self {
        let mut cfg = Self {
            suite,
            vocab_size: 4,
            depth: 3,
            lookahead: 2,
            gamma: 1.0,
            beta: 0.5,
            reward_scale: 1.0,
            mix: 0.5,
            n_runs: 200_000,
            n_instances: 1000,
            seed: 42,
            output_path: None,
            format: Format::Csv,
            length: 128,
            bon_n: 10,
            threshold: None,
            corrupt: 0.0,
        };
        match suite {
            Suite::Verify => cfg.vocab_size = 16,
            Suite::Simulate => {}
            Suite::Acceptance => {
                cfg.vocab_size = 16;
                cfg.n_instances = 200;
                cfg.n_runs = 2000;
            }
            Suite::GammaSweep => cfg.n_instances = 200,
            Suite::Baselines => cfg.n_runs = 10_000,
            Suite::Distortion => cfg.n_instances = 500,
        }
        cfg
    }

    /// Builds a config from `key = value` pairs applied in order. `suite`
    /// must be among them; later pairs override earlier ones.
    pub fn from_pairs<I, K, V>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let pairs: Vec<(String, String)> =
            pairs.into_iter().map(|(k, v)| (k.as_ref().to_string(), v.as_ref().to_string())).collect();
        let suite = pairs
            .iter()
            .rev()
            .find(|(k, _)| k == "suite")
            .ok_or_else(|| Error::config("suite", "missing"))?
            .1
            .parse()?;
        let mut cfg = Self::defaults(suite);
        for (k, v) in &pairs {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a flat `key = value` file (`#` starts a comment), then applies
    /// `overrides` on top.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut pairs = match path {
            Some(p) => parse_kv(&fs::read_to_string(p)?)?,
            None => Vec::new(),
        };
        pairs.extend(overrides.iter().cloned());
        Self::from_pairs(pairs)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "suite" => self.suite = value.parse()?,
            "vocab_size" => self.vocab_size = parse(key, value)?,
            "depth" => self.depth = parse(key, value)?,
            "lookahead" => self.lookahead = parse(key, value)?,
            "gamma" => self.gamma = parse(key, value)?,
            "beta" => self.beta = parse(key, value)?,
            "reward_scale" => self.reward_scale = parse(key, value)?,
            "mix" => self.mix = parse(key, value)?,
            "n_runs" => self.n_runs = parse(key, value)?,
            "n_instances" => self.n_instances = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "output_path" => self.output_path = (!value.is_empty()).then(|| PathBuf::from(value)),
            "format" => self.format = value.parse()?,
            "length" => self.length = parse(key, value)?,
            "bon_n" => self.bon_n = parse(key, value)?,
            "threshold" => self.threshold = if value.is_empty() { None } else { Some(parse(key, value)?) },
            "corrupt" => self.corrupt = parse(key, value)?,
            _ => return Err(Error::config(key, "unknown key")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |key: &str, reason: &str| Err(Error::config(key, reason));
        if !(2..=64).contains(&self.vocab_size) {
            return fail("vocab_size", "must be in 2..=64");
        }
        if self.depth < 1 {
            return fail("depth", "must be ≥ 1");
        }
        if (self.vocab_size as f64).powi(self.depth as i32) > MAX_ENUMERATION as f64 {
            return fail("depth", "vocab_size^depth exceeds the enumeration limit");
        }
        if self.lookahead < 1 {
            return fail("lookahead", "must be ≥ 1");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return fail("gamma", "must be in [0, 1]");
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return fail("beta", "must be positive");
        }
        if !(self.reward_scale >= 0.0 && self.reward_scale.is_finite()) {
            return fail("reward_scale", "must be ≥ 0");
        }
        if !(0.0..=1.0).contains(&self.mix) {
            return fail("mix", "must be in [0, 1]");
        }
        if self.n_instances < 2 {
            return fail("n_instances", "must be ≥ 2");
        }
        if matches!(self.suite, Suite::Simulate | Suite::Baselines) && self.n_runs < MIN_RUNS {
            return fail("n_runs", "Monte Carlo suites need at least 10000 runs");
        }
        if self.n_runs < 1 {
            return fail("n_runs", "must be ≥ 1");
        }
        if self.length < 1 {
            return fail("length", "must be ≥ 1");
        }
        if self.bon_n < 1 {
            return fail("bon_n", "must be ≥ 1");
        }
        if !(0.0..0.5).contains(&self.corrupt) {
            return fail("corrupt", "must be in [0, 0.5)");
        }
        Ok(())
    }

    /// The config as `(key, value)` strings, in [`KEYS`] order.
    pub fn echo(&self) -> Vec<(&'static str, String)> {
        let opt = |x: &Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        let values = [
            self.suite.to_string(),
            self.vocab_size.to_string(),
            self.depth.to_string(),
            self.lookahead.to_string(),
            self.gamma.to_string(),
            self.beta.to_string(),
            self.reward_scale.to_string(),
            self.mix.to_string(),
            self.n_runs.to_string(),
            self.n_instances.to_string(),
            self.seed.to_string(),
            self.output_path.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
            self.format.to_string(),
            self.length.to_string(),
            self.bon_n.to_string(),
            opt(&self.threshold),
            self.corrupt.to_string(),
        ];
        KEYS.into_iter().zip(values).collect()
    }
}

/// Parses flat `key = value` text.
pub fn parse_kv(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse { line: i + 1, reason: format!("expected key = value, got {line:?}") })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_suite_is_named() {
        let err = ExperimentConfig::from_pairs([("seed", "1")]).unwrap_err();
        assert_eq!(err, Error::config("suite", "missing"));
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = ExperimentConfig::from_pairs([("suite", "verify"), ("vocab", "3")]).unwrap_err();
        assert!(matches!(err, Error::ConfigInvalid { ref key, .. } if key == "vocab"));
    }

    #[test]
    fn later_pairs_win_and_suite_defaults_apply() {
        let cfg = ExperimentConfig::from_pairs([("suite", "acceptance"), ("seed", "1"), ("seed", "9")]).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.vocab_size, 16);
        assert_eq!(cfg.n_instances, 200);
    }

    #[test]
    fn simulate_needs_enough_runs() {
        let err = ExperimentConfig::from_pairs([("suite", "simulate"), ("n_runs", "9999")]).unwrap_err();
        assert!(matches!(err, Error::ConfigInvalid { ref key, .. } if key == "n_runs"));
    }

    #[test]
    fn kv_text() {
        let pairs = parse_kv("# experiment\nsuite = simulate\n\nseed=7 # trailing\n").unwrap();
        assert_eq!(pairs, vec![("suite".into(), "simulate".into()), ("seed".into(), "7".into())]);
        assert!(matches!(parse_kv("suite simulate"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn echo_covers_every_key() {
        let cfg = ExperimentConfig::defaults(Suite::Simulate);
        let echo = cfg.echo();
        assert_eq!(echo.len(), KEYS.len());
        let back = ExperimentConfig::from_pairs(echo.iter().map(|(k, v)| (*k, v.as_str()))).unwrap();
        assert_eq!(back, cfg);
    }
}
