//! Threshold (non-number-resolving) single-photon detector model.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// A gated threshold detector: it clicks or it doesn't, once per pulse.
///
/// For `n` photons incident in a gate the click probability is
/// `1 - (1 - dark_prob) * (1 - efficiency)^n`, i.e. independent per-photon
/// detection combined with an independent dark click.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    /// Detection probability per incident photon.
    pub efficiency: f64,
    /// Dark-click probability per pulse gate.
    pub dark_prob: f64,
}

impl DetectorSpec {
    pub fn new(efficiency: f64, dark_prob: f64) -> Result<Self> {
        let d = DetectorSpec {
            efficiency,
            dark_prob,
        };
        d.validate()?;
        Ok(d)
    }

    /// A unit-efficiency, dark-free detector.
    pub fn ideal() -> Self {
        DetectorSpec {
            efficiency: 1.0,
            dark_prob: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("detector efficiency", self.efficiency),
            ("detector dark_prob", self.dark_prob),
        ] {
            if !(0.0..=1.0).contains(&value) || !value.is_finite() {
                return Err(SimError::InvalidProbability { name, value });
            }
        }
        Ok(())
    }

    /// Click probability given `n` incident photons.
    pub fn click_probability(&self, n: u32) -> f64 {
        1.0 - (1.0 - self.dark_prob) * (1.0 - self.efficiency).powi(n as i32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn click_probability_limits() {
        let d = DetectorSpec::new(0.12, 1e-5).unwrap();
        assert!((d.click_probability(0) - 1e-5).abs() < 1e-12);
        let ideal = DetectorSpec::ideal();
        assert_eq!(ideal.click_probability(0), 0.0);
        assert_eq!(ideal.click_probability(3), 1.0);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(DetectorSpec::new(1.2, 0.0).is_err());
        assert!(DetectorSpec::new(0.5, -0.1).is_err());
    }
}
