use serde::Serialize;

use crate::distributions::{Categorical, CLAMP_EPS};
use crate::error::{Error, Result};
use crate::models::{enumerate_law, Context, ModelQuartet, SequenceLaw, TabularModel};
use crate::sampling::{shifted_residual, standard_residual};

/// Exact law of the next emitted token at one context.
///
/// A proposal `x` is emitted directly with mass `accepted_mass[x]`; with
/// probability `reject_mass` the token comes from `bonus` instead.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepLaw {
    pub context: Context,
    pub emitted: Categorical,
    pub reject_mass: f64,
    pub accepted_mass: Vec<f64>,
    /// The residual law drawn from on rejection, or the fallback row when the
    /// residual was degenerate.
    pub bonus: Categorical,
    pub fallback: bool,
}

fn assemble(
    context: &Context,
    proposal: &Categorical,
    compensated: Vec<f64>,
    residual: Result<Categorical>,
    fallback_row: &Categorical,
) -> Result<StepLaw> {
    let accepted_mass: Vec<f64> =
        proposal.probs().iter().zip(&compensated).map(|(p, c)| p.min(*c)).collect();
    let reject_mass: f64 =
        proposal.probs().iter().zip(&compensated).map(|(p, c)| (p - c).max(0.0)).sum();
    let (bonus, fallback) = match residual {
        Ok(r) => (r, false),
        Err(Error::DegenerateResidual { .. }) => (fallback_row.clone(), true),
        Err(e) => return Err(e),
    };
    let emitted: Vec<f64> =
        accepted_mass.iter().zip(bonus.probs()).map(|(a, b)| a + reject_mass * b).collect();
    Ok(StepLaw {
        context: context.clone(),
        emitted: Categorical::new(emitted)?,
        reject_mass,
        accepted_mass,
        bonus,
        fallback,
    })
}

/// Closed-form step law of shifted speculative sampling: proposals from the
/// shifted draft, acceptance `min(1, target/sft)`, bonus from the
/// `γ`-modified shifted residual.
pub fn exact_step_sss(quartet: &ModelQuartet, ctx: &Context, gamma: f64) -> Result<StepLaw> {
    quartet.shape().check_context(ctx)?;
    let s = quartet.sft().row_at(ctx)?;
    let h = quartet.shifted_draft().row_at(ctx)?;
    let t = quartet.target().row_at(ctx)?;
    // Compensated law `h · t / s`: accepting `x` with `min(1, t/s)` keeps
    // `min(h, h·t/s)` of the proposal mass.
    let mut compensated = Vec::with_capacity(h.vocab_size());
    for x in 0..h.vocab_size() {
        let (hx, sx) = (h.prob(x), s.prob(x));
        if sx == 0.0 {
            if hx > 0.0 {
                return Err(Error::ZeroSftMass { token: x });
            }
            compensated.push(0.0);
        } else {
            compensated.push(hx * t.prob(x) / sx);
        }
    }
    assemble(ctx, h, compensated, shifted_residual(s, h, t, gamma), h)
}

/// Closed-form step law of standard speculative sampling. The emitted law
/// equals the target row for any draft.
pub fn exact_step_ss(draft: &TabularModel, target: &TabularModel, ctx: &Context) -> Result<StepLaw> {
    if draft.shape() != target.shape() {
        return Err(Error::InvalidModel("draft and target shapes differ".into()));
    }
    draft.shape().check_context(ctx)?;
    let d = draft.row_at(ctx)?;
    let t = target.row_at(ctx)?;
    assemble(ctx, d, t.probs().to_vec(), standard_residual(d, t), t)
}

/// Chains step laws along every prefix into the exact law of
/// `length`-token outputs for `prompt_id`.
pub fn exact_sequence_law<F>(
    mut step_fn: F,
    vocab_size: usize,
    prompt_id: usize,
    length: usize,
) -> Result<SequenceLaw>
where
    F: FnMut(&Context) -> Result<StepLaw>,
{
    enumerate_law(vocab_size, length, |prefix| {
        Ok(step_fn(&Context::new(prompt_id, prefix.to_vec()))?.emitted)
    })
}

/// [`exact_sequence_law`] for shifted speculative sampling on `quartet`.
pub fn sss_sequence_law(quartet: &ModelQuartet, gamma: f64, prompt_id: usize, length: usize) -> Result<SequenceLaw> {
    exact_sequence_law(
        |ctx| exact_step_sss(quartet, &windowed(quartet.shape(), ctx), gamma),
        quartet.shape().vocab_size,
        prompt_id,
        length,
    )
}

/// [`exact_sequence_law`] for standard speculative sampling.
pub fn ss_sequence_law(
    draft: &TabularModel,
    target: &TabularModel,
    prompt_id: usize,
    length: usize,
) -> Result<SequenceLaw> {
    exact_sequence_law(
        |ctx| exact_step_ss(draft, target, &windowed(draft.shape(), ctx)),
        draft.vocab_size(),
        prompt_id,
        length,
    )
}

fn windowed(shape: crate::models::ModelShape, ctx: &Context) -> Context {
    Context::new(ctx.prompt_id, shape.window(&ctx.prefix).to_vec())
}

/// Residuals of the identities behind exactness at one context of a
/// quartet, each `0` in exact arithmetic on matched quartets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepIdentities {
    /// `max_x |π*(x)·sft(x) − h(x)·target(x)|`: the ratio identity
    /// `π*/h = target/sft`, cross-multiplied.
    pub ratio: f64,
    /// `max_x |min(h, π*) + (π* − h)_+ − π*|`.
    pub split: f64,
    /// Relative gap between `Σ (h − h·t/s)_+` and `Σ (π* − h)_+`.
    pub reject_mass: f64,
}

pub fn step_identities(quartet: &ModelQuartet, ctx: &Context) -> Result<StepIdentities> {
    let s = quartet.sft().row_at(ctx)?;
    let h = quartet.shifted_draft().row_at(ctx)?;
    let t = quartet.target().row_at(ctx)?;
    let o = quartet.optimal().row_at(ctx)?;
    let mut ratio: f64 = 0.0;
    let mut split: f64 = 0.0;
    let mut via_compensated = 0.0;
    let mut via_optimal = 0.0;
    for x in 0..h.vocab_size() {
        let (sx, hx, tx, ox) = (s.prob(x), h.prob(x), t.prob(x), o.prob(x));
        ratio = ratio.max((ox * sx - hx * tx).abs());
        split = split.max((hx.min(ox) + (ox - hx).max(0.0) - ox).abs());
        if sx > 0.0 {
            via_compensated += (hx - hx * tx / sx).max(0.0);
        }
        via_optimal += (ox - hx).max(0.0);
    }
    let scale = via_compensated.max(via_optimal);
    let reject_mass = if scale <= CLAMP_EPS { 0.0 } else { (via_compensated - via_optimal).abs() / scale };
    Ok(StepIdentities { ratio, split, reject_mass })
}
