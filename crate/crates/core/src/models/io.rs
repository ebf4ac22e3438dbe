//! Plain-text model and reward files.
//!
//! ```text
//! # shiftspec tabular-model v1
//! vocab_size 3
//! max_depth 2
//! num_prompts 1
//! eos none
//! 0 |  | 5.0000000000000000e-1 3.0000000000000000e-1 2.0000000000000000e-1
//! 0 | 0 | ...
//! ```
//!
//! One record per stored context: prompt id, prefix tokens (space separated,
//! empty for the root), then the row with 17 significant digits. Reward
//! files use the header `# shiftspec reward-field v1`, a `beta` line instead
//! of `eos`, and reward increments in place of probabilities.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use super::reward::RewardField;
use super::shape::{Context, ModelShape, Token};
use super::tabular::TabularModel;
use crate::distributions::Categorical;
use crate::error::{Error, Result};

const MODEL_MAGIC: &str = "# shiftspec tabular-model v1";
const REWARD_MAGIC: &str = "# shiftspec reward-field v1";

fn write_record<W: Write>(out: &mut W, ctx: &Context, values: &[f64]) -> Result<()> {
    let prefix: Vec<String> = ctx.prefix.iter().map(|t| t.to_string()).collect();
    let vals: Vec<String> = values.iter().map(|v| format!("{v:.16e}")).collect();
    writeln!(out, "{} | {} | {}", ctx.prompt_id, prefix.join(" "), vals.join(" "))?;
    Ok(())
}

fn write_shape<W: Write>(out: &mut W, shape: ModelShape) -> Result<()> {
    writeln!(out, "vocab_size {}", shape.vocab_size)?;
    writeln!(out, "max_depth {}", shape.max_depth)?;
    writeln!(out, "num_prompts {}", shape.num_prompts)?;
    Ok(())
}

pub fn write_model<W: Write>(model: &TabularModel, mut out: W) -> Result<()> {
    writeln!(out, "{MODEL_MAGIC}")?;
    write_shape(&mut out, model.shape())?;
    match model.eos_token() {
        Some(t) => writeln!(out, "eos {t}")?,
        None => writeln!(out, "eos none")?,
    }
    for (ctx, row) in model.shape().contexts().iter().zip(model.rows()) {
        write_record(&mut out, ctx, row.probs())?;
    }
    Ok(())
}

pub fn write_reward<W: Write>(reward: &RewardField, mut out: W) -> Result<()> {
    writeln!(out, "{REWARD_MAGIC}")?;
    write_shape(&mut out, reward.shape())?;
    writeln!(out, "beta {:.16e}", reward.beta())?;
    for ctx in reward.shape().contexts() {
        write_record(&mut out, &ctx, reward.row(ctx.prompt_id, &ctx.prefix))?;
    }
    Ok(())
}

struct Parsed {
    header: HashMap<String, String>,
    records: HashMap<(usize, Vec<Token>), Vec<f64>>,
}

fn parse_err(line: usize, reason: impl Into<String>) -> Error {
    Error::Parse { line, reason: reason.into() }
}

fn parse<R: BufRead>(input: R, magic: &str, header_keys: &[&str]) -> Result<Parsed> {
    let mut lines = input.lines().enumerate();
    match lines.next() {
        Some((_, Ok(l))) if l.trim() == magic => {}
        _ => return Err(parse_err(1, format!("expected `{magic}`"))),
    }
    let mut header = HashMap::new();
    let mut records = HashMap::new();
    for (i, line) in lines {
        let line = line?;
        let n = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if header.len() < header_keys.len() {
            let (k, v) = line.split_once(' ').ok_or_else(|| parse_err(n, "expected `key value`"))?;
            if !header_keys.contains(&k) {
                return Err(parse_err(n, format!("unexpected header key `{k}`")));
            }
            header.insert(k.to_string(), v.trim().to_string());
            continue;
        }
        let parts: Vec<&str> = line.split('|').collect();
        if parts.len() != 3 {
            return Err(parse_err(n, "expected `prompt | prefix | values`"));
        }
        let prompt: usize = parts[0].trim().parse().map_err(|e| parse_err(n, format!("prompt: {e}")))?;
        let prefix = parts[1]
            .split_whitespace()
            .map(|t| t.parse::<Token>().map_err(|e| parse_err(n, format!("token: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        let values = parts[2]
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| parse_err(n, format!("value: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        if records.insert((prompt, prefix), values).is_some() {
            return Err(parse_err(n, "duplicate context"));
        }
    }
    Ok(Parsed { header, records })
}

fn header_usize(p: &Parsed, key: &str) -> Result<usize> {
    p.header
        .get(key)
        .ok_or_else(|| parse_err(0, format!("missing header `{key}`")))?
        .parse()
        .map_err(|e| parse_err(0, format!("{key}: {e}")))
}

fn parsed_shape(p: &Parsed) -> Result<ModelShape> {
    ModelShape::new(
        header_usize(p, "vocab_size")?,
        header_usize(p, "max_depth")?,
        header_usize(p, "num_prompts")?,
    )
}

fn take_record<'a>(p: &'a Parsed, ctx: &Context) -> Result<&'a Vec<f64>> {
    p.records
        .get(&(ctx.prompt_id, ctx.prefix.clone()))
        .ok_or_else(|| parse_err(0, format!("missing record for {ctx:?}")))
}

pub fn read_model<R: BufRead>(input: R) -> Result<TabularModel> {
    let p = parse(input, MODEL_MAGIC, &["vocab_size", "max_depth", "num_prompts", "eos"])?;
    let shape = parsed_shape(&p)?;
    let eos = match p.header.get("eos").map(String::as_str) {
        Some("none") => None,
        Some(t) => Some(t.parse::<Token>().map_err(|e| parse_err(0, format!("eos: {e}")))?),
        None => return Err(parse_err(0, "missing header `eos`")),
    };
    if p.records.len() != shape.num_rows() {
        return Err(parse_err(0, format!("{} records for {} contexts", p.records.len(), shape.num_rows())));
    }
    TabularModel::from_fn(shape, eos, |ctx| Categorical::verbatim(take_record(&p, ctx)?.clone()))
}

pub fn read_reward<R: BufRead>(input: R) -> Result<RewardField> {
    let p = parse(input, REWARD_MAGIC, &["vocab_size", "max_depth", "num_prompts", "beta"])?;
    let shape = parsed_shape(&p)?;
    let beta: f64 = p.header["beta"].parse().map_err(|e| parse_err(0, format!("beta: {e}")))?;
    for ctx in shape.contexts() {
        let rec = take_record(&p, &ctx)?;
        if rec.len() != shape.vocab_size {
            return Err(parse_err(0, format!("record for {ctx:?} has {} values", rec.len())));
        }
    }
    RewardField::from_fn(shape, beta, |ctx, t| p.records[&(ctx.prompt_id, ctx.prefix.clone())][t])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::RngStream;
    use crate::models::tabular::gen_random_model_with;
    use crate::models::gen_random_reward;

    #[test]
    fn model_round_trip_is_bit_exact() {
        let shape = ModelShape::new(3, 3, 2).unwrap();
        let m = gen_random_model_with(shape, Some(2), 0.7, &mut RngStream::new(1, 0)).unwrap();
        let mut buf = Vec::new();
        write_model(&m, &mut buf).unwrap();
        let back = read_model(buf.as_slice()).unwrap();
        assert_eq!(back.eos_token(), Some(2));
        assert_eq!(back, m);
    }

    #[test]
    fn reward_round_trip_is_bit_exact() {
        let shape = ModelShape::new(4, 2, 1).unwrap();
        let r = gen_random_reward(shape, 1.0, 0.5, &mut RngStream::new(2, 0)).unwrap();
        let mut buf = Vec::new();
        write_reward(&r, &mut buf).unwrap();
        let back = read_reward(buf.as_slice()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn rejects_truncated_files() {
        let text = "# shiftspec tabular-model v1\nvocab_size 2\nmax_depth 2\nnum_prompts 1\neos none\n0 | | 0.5 0.5\n";
        assert!(read_model(text.as_bytes()).is_err());
        assert!(read_model("garbage".as_bytes()).is_err());
    }

    #[test]
    fn reads_hand_written_file() {
        let text = "# shiftspec tabular-model v1\nvocab_size 2\nmax_depth 2\nnum_prompts 1\neos none\n\
                    0 | | 0.25 0.75\n0 | 0 | 1 0\n0 | 1 | 0.5 0.5\n";
        let m = read_model(text.as_bytes()).unwrap();
        assert_eq!(m.row(0, &[]).probs(), &[0.25, 0.75]);
        assert_eq!(m.row(0, &[0]).probs(), &[1.0, 0.0]);
    }
}
