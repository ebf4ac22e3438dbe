use crate::distributions::{clamp_normalize, Categorical};
use crate::error::{Error, Result};
use crate::models::{Context, ModelQuartet, TabularModel, Token};

/// `min(1, target(token) / draft(token))`.
pub fn standard_accept(draft: &Categorical, target: &Categorical, token: Token) -> Result<f64> {
    let d = draft.prob(token);
    if d == 0.0 {
        return Err(Error::ZeroDraftMass { token });
    }
    Ok((target.prob(token) / d).min(1.0))
}

/// `min(1, target(token) / sft(token))`. The denominator is the SFT draft
/// even though the token was proposed by the shifted draft.
pub fn shifted_accept(sft: &Categorical, target: &Categorical, token: Token) -> Result<f64> {
    let s = sft.prob(token);
    if s == 0.0 {
        return Err(Error::ZeroSftMass { token });
    }
    Ok((target.prob(token) / s).min(1.0))
}

/// `(target − draft)_+`.
pub fn standard_residual(draft: &Categorical, target: &Categorical) -> Result<Categorical> {
    if draft.vocab_size() != target.vocab_size() {
        return Err(Error::DimensionMismatch(draft.vocab_size(), target.vocab_size()));
    }
    let diff: Vec<f64> = target.probs().iter().zip(draft.probs()).map(|(t, d)| t - d).collect();
    clamp_normalize(&diff)
}

/// `(shifted^γ · (target / sft − 1))_+`. With `γ = 1` the shifted row enters
/// unexponentiated.
pub fn shifted_residual(
    sft: &Categorical,
    shifted: &Categorical,
    target: &Categorical,
    gamma: f64,
) -> Result<Categorical> {
    let v = sft.vocab_size();
    if shifted.vocab_size() != v || target.vocab_size() != v {
        return Err(Error::DimensionMismatch(v, shifted.vocab_size().max(target.vocab_size())));
    }
    let mut w = Vec::with_capacity(v);
    for x in 0..v {
        let (s, h, t) = (sft.prob(x), shifted.prob(x), target.prob(x));
        if s == 0.0 {
            if t > 0.0 {
                return Err(Error::ZeroSftMass { token: x });
            }
            w.push(0.0);
            continue;
        }
        let factor = if gamma == 1.0 { h } else { h.powf(gamma) };
        w.push(factor * (t / s - 1.0));
    }
    clamp_normalize(&w)
}

fn rows<'a>(
    a: &'a TabularModel,
    b: &'a TabularModel,
    ctx: &Context,
) -> Result<(&'a Categorical, &'a Categorical)> {
    if a.vocab_size() != b.vocab_size() {
        return Err(Error::DimensionMismatch(a.vocab_size(), b.vocab_size()));
    }
    Ok((a.row_at(ctx)?, b.row_at(ctx)?))
}

fn check_token(model: &TabularModel, token: Token) -> Result<()> {
    if token >= model.vocab_size() {
        return Err(Error::InvalidContext(format!("token {token} out of range")));
    }
    Ok(())
}

pub fn accept_prob_standard(
    draft: &TabularModel,
    target: &TabularModel,
    ctx: &Context,
    token: Token,
) -> Result<f64> {
    check_token(draft, token)?;
    let (d, t) = rows(draft, target, ctx)?;
    standard_accept(d, t, token)
}

pub fn accept_prob_shifted(quartet: &ModelQuartet, ctx: &Context, token: Token) -> Result<f64> {
    check_token(quartet.sft(), token)?;
    let (s, t) = rows(quartet.sft(), quartet.target(), ctx)?;
    shifted_accept(s, t, token)
}

pub fn bonus_standard(draft: &TabularModel, target: &TabularModel, ctx: &Context) -> Result<Categorical> {
    let (d, t) = rows(draft, target, ctx)?;
    standard_residual(d, t)
}

pub fn bonus_shifted(quartet: &ModelQuartet, ctx: &Context, gamma: f64) -> Result<Categorical> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::config("gamma", format!("{gamma} outside [0, 1]")));
    }
    let (s, t) = rows(quartet.sft(), quartet.target(), ctx)?;
    shifted_residual(s, quartet.shifted_draft().row_at(ctx)?, t, gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::tv_distance;
    use crate::models::RewardField;

    fn c(p: &[f64]) -> Categorical {
        Categorical::new(p.to_vec()).unwrap()
    }

    fn worked_quartet() -> ModelQuartet {
        let sft = TabularModel::constant(c(&[0.5, 0.3, 0.2]), 1).unwrap();
        let target = TabularModel::constant(c(&[0.3, 0.6, 0.1]), 1).unwrap();
        let r = RewardField::constant(sft.shape(), 1.0, &[0.0, 2f64.ln(), 4f64.ln()]).unwrap();
        ModelQuartet::new(sft, target, r).unwrap()
    }

    #[test]
    fn standard_accept_examples() {
        let p = c(&[0.2, 0.8]);
        assert_eq!(standard_accept(&p, &p, 0).unwrap(), 1.0);
        assert_eq!(standard_accept(&p, &p, 1).unwrap(), 1.0);
        assert_eq!(standard_accept(&c(&[0.5, 0.5]), &c(&[0.6, 0.4]), 0).unwrap(), 1.0);
        assert_eq!(standard_accept(&c(&[0.4, 0.6]), &c(&[0.1, 0.9]), 0).unwrap(), 0.25);
        assert_eq!(
            standard_accept(&c(&[0.0, 1.0]), &c(&[0.5, 0.5]), 0),
            Err(Error::ZeroDraftMass { token: 0 })
        );
    }

    #[test]
    fn shifted_accept_examples() {
        let q = worked_quartet();
        let ctx = Context::root(0);
        let expect = [0.6, 1.0, 0.5];
        for (tok, e) in expect.iter().enumerate() {
            assert!((accept_prob_shifted(&q, &ctx, tok).unwrap() - e).abs() < 1e-15);
        }
        // Matched: min(1, optimal/shifted) gives the same values.
        for tok in 0..3 {
            let h = q.shifted_draft().row(0, &[]).prob(tok);
            let o = q.optimal().row(0, &[]).prob(tok);
            let alt = (o / h).min(1.0);
            let a = accept_prob_shifted(&q, &ctx, tok).unwrap();
            assert!((a - alt).abs() <= 1e-10 * alt);
        }
        let same = TabularModel::constant(c(&[0.5, 0.5]), 1).unwrap();
        assert_eq!(accept_prob_standard(&same, &same, &ctx, 1).unwrap(), 1.0);
    }

    #[test]
    fn standard_residual_examples() {
        let b = standard_residual(&c(&[0.4, 0.6]), &c(&[0.6, 0.4])).unwrap();
        assert_eq!(b.probs(), &[1.0, 0.0]);
        let b = standard_residual(&c(&[0.2, 0.3, 0.5]), &c(&[0.5, 0.3, 0.2])).unwrap();
        assert_eq!(b.probs(), &[1.0, 0.0, 0.0]);
        let p = c(&[0.3, 0.7]);
        assert!(matches!(standard_residual(&p, &p), Err(Error::DegenerateResidual { .. })));
    }

    #[test]
    fn shifted_residual_examples() {
        let q = worked_quartet();
        let ctx = Context::root(0);
        let b = bonus_shifted(&q, &ctx, 1.0).unwrap();
        assert_eq!(b.probs(), &[0.0, 1.0, 0.0]);

        let direct = standard_residual(q.shifted_draft().row(0, &[]), q.optimal().row(0, &[])).unwrap();
        assert!(tv_distance(&b, &direct).unwrap() < 1e-10);

        // γ = 0 ignores the shifted row entirely.
        let g0 = bonus_shifted(&q, &ctx, 0.0).unwrap();
        let expect = clamp_normalize(&[0.3 / 0.5 - 1.0, 0.6 / 0.3 - 1.0, 0.1 / 0.2 - 1.0]).unwrap();
        assert!(tv_distance(&g0, &expect).unwrap() < 1e-15);
        assert!(bonus_shifted(&q, &ctx, 2.0).is_err());
    }

    #[test]
    fn shifted_residual_reports_zero_sft_mass() {
        let s = c(&[0.0, 1.0]);
        let t = c(&[0.5, 0.5]);
        assert_eq!(shifted_residual(&s, &s, &t, 1.0), Err(Error::ZeroSftMass { token: 0 }));
        // Zero target mass at a zero-SFT token is fine.
        let t2 = c(&[0.0, 1.0]);
        assert!(matches!(shifted_residual(&s, &s, &t2, 1.0), Err(Error::DegenerateResidual { .. })));
    }
}
