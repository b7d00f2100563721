//! All-region MOSFET drain-current law.
//!
//! The model interpolates smoothly between weak and strong inversion:
//!
//! ```text
//! Id = (1 + lambda*vds) * 2*n*k'*(W/L)*Vt^2
//!      * [ ln^2(1 + e^((vgs-vth)/(2*n*Vt))) - ln^2(1 + e^((vgs-vth-n*vds)/(2*n*Vt))) ]
//! ```
//!
//! The forward and reverse terms cancel at `vds = 0`, the expression
//! collapses to an exponential below threshold and to the familiar
//! `(k'/2n)(W/L)(vgs-vth)^2` above it. It is smooth everywhere, which the
//! bracketing solvers do not need but the calibration Newton step does.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Thermal voltage at 300 K.
pub const V_THERMAL: f64 = 0.0258;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Nmos,
    Pmos,
}

/// Drawn width and length, in micrometers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MosfetGeometry {
    pub width: f64,
    pub length: f64,
}

impl MosfetGeometry {
    /// PMOS isolation switch.
    pub const MP1: MosfetGeometry = MosfetGeometry { width: 2.5, length: 0.5 };
    /// NMOS compliance / read-bias transistor.
    pub const MN1: MosfetGeometry = MosfetGeometry { width: 5.0, length: 0.5 };
    /// NMOS second-stage read transistor.
    pub const MN2: MosfetGeometry = MosfetGeometry { width: 0.5, length: 2.5 };

    pub fn new(width: f64, length: f64) -> Result<Self> {
        let g = MosfetGeometry { width, length };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.width.is_finite() && self.width > 0.0) {
            return Err(Error::invalid(format!("width must be positive, got {}", self.width)));
        }
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(Error::invalid(format!("length must be positive, got {}", self.length)));
        }
        Ok(())
    }

    pub fn aspect(&self) -> f64 {
        self.width / self.length
    }

    /// Gate area in square micrometers.
    pub fn area(&self) -> f64 {
        self.width * self.length
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MosfetParams {
    pub polarity: Polarity,
    /// Threshold magnitude, volts.
    pub vth: f64,
    /// Process transconductance, A/V^2.
    pub k_prime: f64,
    /// Subthreshold slope factor.
    pub n_slope: f64,
    /// Channel-length modulation, 1/V.
    pub lambda: f64,
    #[serde(default = "default_vt")]
    pub v_thermal: f64,
}

fn default_vt() -> f64 {
    V_THERMAL
}

impl MosfetParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.vth > 0.0
            && self.vth < 1.5
            && (1.0..=2.0).contains(&self.n_slope)
            && self.k_prime > 0.0
            && self.k_prime.is_finite()
            && (0.0..=0.5).contains(&self.lambda)
            && self.v_thermal > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("MOSFET parameters out of range: {self:?}")))
        }
    }

    /// A copy with the threshold shifted and k' scaled, as produced by a
    /// mismatch draw.
    pub fn perturbed(&self, delta_vth: f64, k_factor: f64) -> MosfetParams {
        MosfetParams { vth: self.vth + delta_vth, k_prime: self.k_prime * k_factor, ..*self }
    }
}

/// Current and its partial derivatives at one bias point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmallSignal {
    pub id: f64,
    pub gm: f64,
    pub gds: f64,
}

#[inline]
fn softplus(x: f64) -> f64 {
    // ln(1 + e^x) without overflow for large x
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn check_finite(vgs: f64, vds: f64) -> Result<()> {
    if vgs.is_finite() && vds.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("non-finite bias vgs={vgs} vds={vds}")))
    }
}

/// Terminal voltages in the device's own sign convention. PMOS voltages are
/// negative when the device conducts and are flipped before evaluation.
#[inline]
fn oriented(params: &MosfetParams, vgs: f64, vds: f64) -> (f64, f64) {
    match params.polarity {
        Polarity::Nmos => (vgs, vds),
        Polarity::Pmos => (-vgs, -vds),
    }
}

/// Drain current magnitude. For NMOS `vgs`/`vds` are the usual gate-source
/// and drain-source voltages; for PMOS pass them as-is (typically negative).
pub fn drain_current(params: &MosfetParams, geom: &MosfetGeometry, vgs: f64, vds: f64) -> Result<f64> {
    check_finite(vgs, vds)?;
    let (vgs, vds) = oriented(params, vgs, vds);
    Ok(current_unchecked(params, geom.aspect(), vgs, vds))
}

/// Hot-path evaluation without argument checks; voltages already oriented.
#[inline]
pub(crate) fn current_unchecked(p: &MosfetParams, aspect: f64, vgs: f64, vds: f64) -> f64 {
    let two_n_vt = 2.0 * p.n_slope * p.v_thermal;
    let fwd = softplus((vgs - p.vth) / two_n_vt);
    let rev = softplus((vgs - p.vth - p.n_slope * vds) / two_n_vt);
    let scale = 2.0 * p.n_slope * p.k_prime * aspect * p.v_thermal * p.v_thermal;
    (1.0 + p.lambda * vds) * scale * (fwd * fwd - rev * rev)
}

/// Current with analytic gm = dId/dVgs and gds = dId/dVds (oriented voltages
/// for PMOS, i.e. derivatives with respect to vsg and vsd).
pub fn small_signal(params: &MosfetParams, geom: &MosfetGeometry, vgs: f64, vds: f64) -> Result<SmallSignal> {
    check_finite(vgs, vds)?;
    let (vgs, vds) = oriented(params, vgs, vds);
    let p = params;
    let two_n_vt = 2.0 * p.n_slope * p.v_thermal;
    let xf = (vgs - p.vth) / two_n_vt;
    let xr = (vgs - p.vth - p.n_slope * vds) / two_n_vt;
    let (lf, lr) = (softplus(xf), softplus(xr));
    let scale = 2.0 * p.n_slope * p.k_prime * geom.aspect() * p.v_thermal * p.v_thermal;
    let clm = 1.0 + p.lambda * vds;
    let core = lf * lf - lr * lr;
    let d_fwd = 2.0 * lf * logistic(xf) / two_n_vt;
    let d_rev = 2.0 * lr * logistic(xr) / two_n_vt;
    Ok(SmallSignal {
        id: clm * scale * core,
        gm: clm * scale * (d_fwd - d_rev),
        gds: p.lambda * scale * core + clm * scale * d_rev * p.n_slope,
    })
}

/// A sized transistor: parameters plus geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transistor {
    pub params: MosfetParams,
    pub geom: MosfetGeometry,
}

impl Transistor {
    pub fn new(params: MosfetParams, geom: MosfetGeometry) -> Self {
        Transistor { params, geom }
    }

    /// Current for non-negative "magnitude" biases (vgs, vds for NMOS;
    /// vsg, vsd for PMOS).
    #[inline]
    pub fn current(&self, v_drive: f64, v_channel: f64) -> f64 {
        current_unchecked(&self.params, self.geom.aspect(), v_drive, v_channel)
    }
}
