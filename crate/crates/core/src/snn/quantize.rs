//! Snapping trained weights onto the levels a synapse can store.

use serde::{Deserialize, Serialize};

use super::network::SpikingNetwork;
use crate::error::{Error, Result};

/// Most levels a 4-bit synapse can hold.
pub const MAX_LEVELS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantizationScheme {
    pub levels: usize,
    pub w_min: f64,
    pub w_max: f64,
}

impl QuantizationScheme {
    pub fn new(levels: usize, w_min: f64, w_max: f64) -> Result<Self> {
        let s = QuantizationScheme { levels, w_min, w_max };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=MAX_LEVELS).contains(&self.levels) {
            return Err(Error::invalid(format!("level count must be in 2..={MAX_LEVELS}, got {}", self.levels)));
        }
        if !(self.w_min < self.w_max) {
            return Err(Error::invalid(format!("empty weight range [{}, {}]", self.w_min, self.w_max)));
        }
        Ok(())
    }

    fn step(&self) -> f64 {
        (self.w_max - self.w_min) / (self.levels - 1) as f64
    }

    /// Nearest level index, clamped to the grid.
    pub fn index(&self, w: f64) -> usize {
        let top = (self.levels - 1) as f64;
        ((w - self.w_min) / (self.w_max - self.w_min) * top).round().clamp(0.0, top) as usize
    }

    pub fn level(&self, index: usize) -> f64 {
        self.w_min + index as f64 * self.step()
    }

    pub fn snap(&self, w: f64) -> f64 {
        self.level(self.index(w))
    }
}

/// Copy of `net` with every weight snapped; thresholds, leaks, delays and
/// topology are untouched.
pub fn quantize(net: &SpikingNetwork, scheme: &QuantizationScheme) -> SpikingNetwork {
    let mut out = net.clone();
    for c in &mut out.connections {
        c.weight = scheme.snap(c.weight);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unsigned_four_bit_examples() {
        let two = QuantizationScheme::new(2, 0.0, 15.0).unwrap();
        assert_eq!(two.index(15.0), 1);
        assert_eq!(two.index(7.0), 0);
        assert_eq!(two.snap(15.0), 15.0);
        let sixteen = QuantizationScheme::new(16, 0.0, 15.0).unwrap();
        for w in 0..16 {
            assert_eq!(sixteen.snap(f64::from(w)), f64::from(w));
        }
    }

    #[test]
    fn scheme_validation() {
        assert!(QuantizationScheme::new(1, 0.0, 1.0).is_err());
        assert!(QuantizationScheme::new(17, 0.0, 1.0).is_err());
        assert!(QuantizationScheme::new(4, 1.0, 1.0).is_err());
    }
}
