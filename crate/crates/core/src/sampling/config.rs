use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Decoding knobs shared by all decoders.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LookaheadConfig {
    /// Draft tokens proposed per target call (`K`).
    pub lookahead: usize,
    /// Token budget per decoded sequence.
    pub max_length: usize,
    /// Exponent on the shifted-draft factor of the shifted residual.
    pub gamma: f64,
    /// Applied row-wise to every model before decoding.
    pub temperature: f64,
}

impl Default for LookaheadConfig {
    fn default() -> Self {
        Self { lookahead: 2, max_length: 3, gamma: 1.0, temperature: 1.0 }
    }
}

impl LookaheadConfig {
    pub fn new(lookahead: usize, max_length: usize) -> Result<Self> {
        let cfg = Self { lookahead, max_length, ..Default::default() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.lookahead < 1 {
            return Err(Error::config("lookahead", "must be ≥ 1"));
        }
        if self.max_length < 1 {
            return Err(Error::config("max_length", "must be ≥ 1"));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::config("gamma", format!("{} outside [0, 1]", self.gamma)));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::config("temperature", "must be positive"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(LookaheadConfig::new(0, 3).is_err());
        assert!(LookaheadConfig::new(1, 0).is_err());
        assert!(LookaheadConfig::default().with_gamma(1.5).validate().is_err());
        assert!(LookaheadConfig::default().with_temperature(0.0).validate().is_err());
        assert!(LookaheadConfig::default().with_gamma(0.0).validate().is_ok());
    }
}
