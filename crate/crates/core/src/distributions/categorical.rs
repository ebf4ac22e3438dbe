use serde::{Deserialize, Serialize};

use super::RngStream;
use crate::error::{Error, Result};

/// Total positive mass below which a clamped residual counts as empty.
pub const CLAMP_EPS: f64 = 1e-12;

/// Absolute tolerance on the sum of a probability vector.
pub const SUM_TOL: f64 = 1e-9;

/// A probability vector over a finite vocabulary.
///
/// Entries are nonnegative, sum to one, and there are at least two of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Categorical {
    probs: Vec<f64>,
}

impl Categorical {
    /// Validates `probs` and renormalizes it by its sum.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let sum = Self::validated_sum(&probs)?;
        Ok(Self::renormalized(probs, sum))
    }

    /// Validates `probs` like [`Categorical::new`] but keeps the entries
    /// bit for bit.
    pub fn verbatim(probs: Vec<f64>) -> Result<Self> {
        Self::validated_sum(&probs)?;
        Ok(Self { probs })
    }

    fn validated_sum(probs: &[f64]) -> Result<f64> {
        if probs.len() < 2 {
            return Err(Error::InvalidDistribution(format!(
                "vocabulary size {} < 2",
                probs.len()
            )));
        }
        if let Some((i, &p)) = probs.iter().enumerate().find(|(_, p)| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidDistribution(format!("entry {i} = {p}")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidDistribution(format!("entries sum to {sum}")));
        }
        Ok(sum)
    }

    /// Normalizes arbitrary nonnegative weights with positive total.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.len() < 2 {
            return Err(Error::InvalidDistribution(format!(
                "vocabulary size {} < 2",
                weights.len()
            )));
        }
        if let Some((i, &w)) = weights.iter().enumerate().find(|(_, w)| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidDistribution(format!("weight {i} = {w}")));
        }
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0 && sum.is_finite()) {
            return Err(Error::InvalidDistribution(format!("weights sum to {sum}")));
        }
        Ok(Self::renormalized(weights, sum))
    }

    pub fn uniform(vocab_size: usize) -> Result<Self> {
        Self::from_weights(vec![1.0; vocab_size])
    }

    /// Point mass on `token`.
    pub fn point_mass(vocab_size: usize, token: usize) -> Result<Self> {
        if token >= vocab_size {
            return Err(Error::InvalidDistribution(format!(
                "token {token} out of range for vocabulary {vocab_size}"
            )));
        }
        let mut probs = vec![0.0; vocab_size];
        probs[token] = 1.0;
        Self::new(probs)
    }

    fn renormalized(mut probs: Vec<f64>, sum: f64) -> Self {
        if sum != 1.0 {
            probs.iter_mut().for_each(|p| *p /= sum);
        }
        Self { probs }
    }

    #[inline]
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    #[inline]
    pub fn vocab_size(&self) -> usize {
        self.probs.len()
    }

    #[inline]
    pub fn prob(&self, token: usize) -> f64 {
        self.probs[token]
    }

    /// Row-wise `p^(1/temperature)`, renormalized.
    pub fn tempered(&self, temperature: f64) -> Result<Self> {
        if temperature == 1.0 {
            return Ok(self.clone());
        }
        let inv = 1.0 / temperature;
        Self::from_weights(self.probs.iter().map(|p| p.powf(inv)).collect())
    }

    /// Expectation of `values` under this law.
    pub fn expectation(&self, values: &[f64]) -> f64 {
        self.probs.iter().zip(values).map(|(p, v)| p * v).sum()
    }
}

impl TryFrom<Vec<f64>> for Categorical {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Categorical::new(v)
    }
}

impl From<Categorical> for Vec<f64> {
    fn from(c: Categorical) -> Self {
        c.probs
    }
}

/// The clamp-normalization operator `max(0, w) / Σ max(0, w)`.
///
/// Fails with [`Error::DegenerateResidual`] when the positive mass is at most
/// [`CLAMP_EPS`].
pub fn clamp_normalize(weights: &[f64]) -> Result<Categorical> {
    if weights.len() < 2 {
        return Err(Error::InvalidDistribution(format!(
            "vocabulary size {} < 2",
            weights.len()
        )));
    }
    if weights.iter().any(|w| w.is_nan()) {
        return Err(Error::InvalidDistribution("NaN weight".into()));
    }
    let clamped: Vec<f64> = weights.iter().map(|&w| w.max(0.0)).collect();
    let mass: f64 = clamped.iter().sum();
    if mass <= CLAMP_EPS {
        return Err(Error::DegenerateResidual { mass });
    }
    Categorical::from_weights(clamped)
}

fn check_dims(p: &Categorical, q: &Categorical) -> Result<()> {
    if p.vocab_size() != q.vocab_size() {
        return Err(Error::DimensionMismatch(p.vocab_size(), q.vocab_size()));
    }
    Ok(())
}

/// Total variation distance `½ Σ |p_i − q_i|`.
pub fn tv_distance(p: &Categorical, q: &Categorical) -> Result<f64> {
    check_dims(p, q)?;
    Ok(0.5 * p.probs.iter().zip(&q.probs).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// `KL(p ‖ q)` in nats, with `0 · log 0 = 0`.
pub fn kl_divergence(p: &Categorical, q: &Categorical) -> Result<f64> {
    check_dims(p, q)?;
    let mut kl = 0.0;
    for (i, (&a, &b)) in p.probs.iter().zip(&q.probs).enumerate() {
        if a == 0.0 {
            continue;
        }
        if b == 0.0 {
            return Err(Error::SupportViolation { index: i });
        }
        kl += a * (a / b).ln();
    }
    // Rounding can leave a tiny negative value for p ≈ q.
    Ok(kl.max(0.0))
}

/// Inverse-CDF draw over the stored symbol order.
///
/// Never returns a zero-mass symbol: the final fallback is the last symbol
/// with positive mass.
pub fn sample(p: &Categorical, rng: &mut RngStream) -> usize {
    let u = rng.uniform();
    let mut cum = 0.0;
    let mut last_positive = 0;
    for (i, &pi) in p.probs.iter().enumerate() {
        if pi > 0.0 {
            cum += pi;
            last_positive = i;
            if u < cum {
                return i;
            }
        }
    }
    last_positive
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cat(v: &[f64]) -> Categorical {
        Categorical::new(v.to_vec()).unwrap()
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert!(Categorical::new(vec![1.0]).is_err());
        assert!(Categorical::new(vec![0.5, 0.6]).is_err());
        assert!(Categorical::new(vec![1.1, -0.1]).is_err());
        assert!(Categorical::new(vec![f64::NAN, 1.0]).is_err());
        assert!(Categorical::uniform(1).is_err());
    }

    #[test]
    fn clamp_normalize_examples() {
        let c = clamp_normalize(&[0.2, -0.1, 0.3]).unwrap();
        assert!((c.prob(0) - 0.4).abs() < 1e-15);
        assert_eq!(c.prob(1), 0.0);
        assert!((c.prob(2) - 0.6).abs() < 1e-15);

        let p = cat(&[0.1, 0.2, 0.7]);
        let q = clamp_normalize(p.probs()).unwrap();
        assert!(tv_distance(&p, &q).unwrap() < 1e-16);

        assert!(matches!(
            clamp_normalize(&[-0.1, -0.2]),
            Err(Error::DegenerateResidual { .. })
        ));
        assert!(matches!(
            clamp_normalize(&[1e-13, -0.2]),
            Err(Error::DegenerateResidual { .. })
        ));
    }

    #[test]
    fn tv_examples() {
        let p = cat(&[0.3, 0.7]);
        assert_eq!(tv_distance(&p, &p).unwrap(), 0.0);
        assert_eq!(tv_distance(&cat(&[1.0, 0.0]), &cat(&[0.0, 1.0])).unwrap(), 1.0);
        let d = tv_distance(&cat(&[0.5, 0.5]), &cat(&[0.6, 0.4])).unwrap();
        assert!((d - 0.1).abs() < 1e-15);
        assert!(matches!(
            tv_distance(&cat(&[0.5, 0.5]), &cat(&[0.2, 0.3, 0.5])),
            Err(Error::DimensionMismatch(2, 3))
        ));
    }

    #[test]
    fn kl_examples() {
        let p = cat(&[0.25, 0.75]);
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        let d = kl_divergence(&cat(&[1.0, 0.0]), &cat(&[0.5, 0.5])).unwrap();
        assert!((d - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(
            kl_divergence(&cat(&[0.5, 0.5]), &cat(&[0.0, 1.0])),
            Err(Error::SupportViolation { index: 0 })
        );
    }

    #[test]
    fn sample_point_mass_and_determinism() {
        let p = cat(&[1.0, 0.0, 0.0]);
        let mut rng = RngStream::new(3, 0);
        assert!((0..1000).all(|_| sample(&p, &mut rng) == 0));

        let q = cat(&[0.2, 0.5, 0.3]);
        let mut a = RngStream::new(7, 0);
        let mut b = RngStream::new(7, 0);
        let xs: Vec<usize> = (0..500).map(|_| sample(&q, &mut a)).collect();
        let ys: Vec<usize> = (0..500).map(|_| sample(&q, &mut b)).collect();
        assert_eq!(xs, ys);
    }

    #[test]
    fn sample_fair_coin_frequency() {
        // 3σ binomial bound for n = 1e6, p = 0.5: 3 · sqrt(0.25 / 1e6) = 0.0015 < 0.002.
        let p = cat(&[0.5, 0.5]);
        let mut rng = RngStream::new(11, 0);
        let n = 1_000_000;
        let zeros = (0..n).filter(|_| sample(&p, &mut rng) == 0).count();
        let freq = zeros as f64 / n as f64;
        assert!((freq - 0.5).abs() < 0.002, "freq = {freq}");
    }

    #[test]
    fn tempered_flattens_and_sharpens() {
        let p = cat(&[0.2, 0.8]);
        let hot = p.tempered(2.0).unwrap();
        let cold = p.tempered(0.5).unwrap();
        assert!(hot.prob(1) < 0.8 && cold.prob(1) > 0.8);
        assert_eq!(p.tempered(1.0).unwrap(), p);
    }
}
