//! Memristor terminal behavior under current-compliance programming.
//!
//! A SET limited to compliance current `I` leaves the filament at a low
//! resistance given by a power law through two anchor points:
//! `R = R_lo * (I / I_lo)^alpha` with `alpha = ln(R_lo/R_hi) / ln(I_lo/I_hi)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProgrammingAnchor {
    /// Compliance current, amps.
    pub current: f64,
    /// Resulting LRS resistance, ohms.
    pub resistance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MemristorParams {
    pub r_hrs: f64,
    pub anchor_lo: ProgrammingAnchor,
    pub anchor_hi: ProgrammingAnchor,
    pub r_min: f64,
    pub r_max: f64,
    /// Cycle-to-cycle LRS spread at `r_min`, ohms.
    pub sigma0: f64,
    /// Growth exponent of the spread with resistance.
    pub gamma: f64,
}

impl Default for MemristorParams {
    fn default() -> Self {
        MemristorParams {
            r_hrs: 100e3,
            anchor_lo: ProgrammingAnchor { current: 34.3e-6, resistance: 20e3 },
            anchor_hi: ProgrammingAnchor { current: 291.8e-6, resistance: 5e3 },
            r_min: 4e3,
            r_max: 100e3,
            sigma0: 200.0,
            gamma: 2.0,
        }
    }
}

impl MemristorParams {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = (self.anchor_lo, self.anchor_hi);
        if !(lo.current > 0.0 && hi.current > 0.0 && lo.current != hi.current) {
            return Err(Error::invalid("memristor anchor currents must be positive and distinct"));
        }
        let r_small = lo.resistance.min(hi.resistance);
        let r_large = lo.resistance.max(hi.resistance);
        if !(self.r_min > 0.0 && self.r_min <= r_small && r_large <= self.r_max && self.r_max <= self.r_hrs) {
            return Err(Error::invalid(format!(
                "memristor bounds must satisfy 0 < r_min <= anchors <= r_max <= r_hrs (got r_min={}, r_max={}, r_hrs={})",
                self.r_min, self.r_max, self.r_hrs
            )));
        }
        if self.alpha() >= 0.0 {
            return Err(Error::invalid("memristor programming law must be decreasing in current"));
        }
        if self.sigma0 < 0.0 || !self.gamma.is_finite() {
            return Err(Error::invalid("memristor noise shape must have sigma0 >= 0 and finite gamma"));
        }
        Ok(())
    }

    /// Power-law exponent of the SET law (negative).
    pub fn alpha(&self) -> f64 {
        (self.anchor_lo.resistance / self.anchor_hi.resistance).ln()
            / (self.anchor_lo.current / self.anchor_hi.current).ln()
    }

    /// Unclamped power law.
    #[inline]
    fn law(&self, i_compliance: f64) -> f64 {
        self.anchor_lo.resistance * (i_compliance / self.anchor_lo.current).powf(self.alpha())
    }

    /// Compliance current that programs resistance `r` (inverse of the
    /// unclamped law).
    pub fn compliance_for_resistance(&self, r: f64) -> Result<f64> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::invalid(format!("resistance must be positive, got {r}")));
        }
        Ok(self.anchor_lo.current * (r / self.anchor_lo.resistance).powf(1.0 / self.alpha()))
    }

    /// Standard deviation of the cycle-to-cycle LRS spread at `nominal_r`.
    pub fn lrs_sigma(&self, nominal_r: f64) -> f64 {
        self.sigma0 * (nominal_r / self.r_min).powf(self.gamma)
    }
}

/// LRS resistance left behind by a SET limited to `i_compliance`.
pub fn lrs_from_compliance(params: &MemristorParams, i_compliance: f64) -> Result<f64> {
    if !(i_compliance > 0.0) || !i_compliance.is_finite() {
        return Err(Error::invalid(format!("compliance current must be positive, got {i_compliance}")));
    }
    Ok(params.law(i_compliance).clamp(params.r_min, params.r_max))
}

/// Perturb a programmed LRS value by a unit-normal draw.
pub fn stochastic_lrs(params: &MemristorParams, nominal_r: f64, noise_draw: f64) -> Result<f64> {
    if !(params.r_min..=params.r_max).contains(&nominal_r) {
        return Err(Error::invalid(format!(
            "nominal resistance {nominal_r} outside [{}, {}]",
            params.r_min, params.r_max
        )));
    }
    let r = nominal_r + noise_draw * params.lrs_sigma(nominal_r);
    Ok(r.clamp(params.r_min, params.r_hrs))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResistiveMode {
    Hrs,
    Lrs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemristorState {
    pub mode: ResistiveMode,
    pub resistance: f64,
}

impl MemristorState {
    pub fn hrs(params: &MemristorParams) -> Self {
        MemristorState { mode: ResistiveMode::Hrs, resistance: params.r_hrs }
    }

    pub fn lrs(params: &MemristorParams, resistance: f64) -> Result<Self> {
        if !(params.r_min..=params.r_max).contains(&resistance) {
            return Err(Error::invalid(format!("LRS resistance {resistance} outside programmable window")));
        }
        Ok(MemristorState { mode: ResistiveMode::Lrs, resistance })
    }

    pub fn is_consistent(&self, params: &MemristorParams) -> bool {
        match self.mode {
            ResistiveMode::Hrs => self.resistance == params.r_hrs,
            ResistiveMode::Lrs => (params.r_min..=params.r_max).contains(&self.resistance),
        }
    }
}
