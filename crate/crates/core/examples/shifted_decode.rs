// One shifted speculative decode with its per-block trace, written as
// JSONL and read back.

use std::io::Write;

use shiftspec::distributions::RngStream;
use shiftspec::models::QuartetSpec;
use shiftspec::sampling::{DecodeTrace, Decoder, LookaheadConfig, ShiftedSpecDecoder};

pub fn run<W: Write>(mut out: W) -> shiftspec::Result<DecodeTrace> {
    let spec = QuartetSpec { vocab_size: 8, max_depth: 3, ..Default::default() };
    let q = spec.matched(&mut RngStream::new(3, 0))?;
    let cfg = LookaheadConfig::new(4, 24)?;
    let decoder = ShiftedSpecDecoder::new(&q, cfg)?;
    let d = decoder.decode(0, &mut RngStream::new(3, 1))?;

    writeln!(out, "tokens: {:?}", d.tokens)?;
    d.trace.write_jsonl(&mut out)?;
    writeln!(
        out,
        "blocks {} target calls {} draft calls {} acceptance {:.3} tokens/call {:.3}",
        d.trace.blocks.len(),
        d.trace.target_calls,
        d.trace.draft_calls,
        d.trace.acceptance_rate().unwrap_or(f64::NAN),
        d.trace.tokens_per_target_call(),
    )?;

    let mut buf = Vec::new();
    d.trace.write_jsonl(&mut buf)?;
    let back = DecodeTrace::read_jsonl(buf.as_slice())?;
    assert_eq!(back, d.trace);
    Ok(back)
}

fn main() -> shiftspec::Result<()> {
    run(std::io::stdout().lock()).map(|_| ())
}
