//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use memsynapse::devices::{MosfetGeometry, MosfetParams};

fn ln1p_exp(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// Drain current written out directly from the all-region law, for
/// non-negative oriented biases.
pub fn reference_current(p: &MosfetParams, g: &MosfetGeometry, vgs: f64, vds: f64) -> f64 {
    let vt = p.v_thermal;
    let f = ln1p_exp((vgs - p.vth) / (2.0 * p.n_slope * vt));
    let r = ln1p_exp((vgs - p.vth - p.n_slope * vds) / (2.0 * p.n_slope * vt));
    (1.0 + p.lambda * vds) * 2.0 * p.n_slope * p.k_prime * (g.width / g.length) * vt * vt * (f * f - r * r)
}

pub struct StackCase {
    pub rail: f64,
    pub v_readb: f64,
    pub v_gate: f64,
    pub r: f64,
    pub mp1: (MosfetParams, MosfetGeometry),
    pub mn1: (MosfetParams, MosfetGeometry),
}

#[derive(Debug, Clone, Copy)]
pub struct ScanPoint {
    pub v_top: f64,
    pub v_bot: f64,
    pub current: f64,
}

/// Scan the bottom node in 1 uV steps over `[0, rail]`. For each candidate
/// the memristor current equals MN1's, which fixes the top node; the root is
/// where MP1 supplies exactly that current. The sign change is refined by
/// linear interpolation inside the 1 uV cell.
pub fn scan_stack(c: &StackCase) -> ScanPoint {
    let v_sg = c.rail - c.v_readb;
    let mismatch = |v_bot: f64| {
        let i_n = reference_current(&c.mn1.0, &c.mn1.1, c.v_gate, v_bot);
        let v_top = v_bot + i_n * c.r;
        if v_top > c.rail {
            return -i_n;
        }
        reference_current(&c.mp1.0, &c.mp1.1, v_sg, c.rail - v_top) - i_n
    };
    let step = 1e-6;
    let steps = (c.rail / step).ceil() as usize;
    let mut prev = (0.0, mismatch(0.0));
    let mut v_bot = c.rail;
    for k in 1..=steps {
        let v = (k as f64 * step).min(c.rail);
        let m = mismatch(v);
        if prev.1 > 0.0 && m <= 0.0 {
            v_bot = prev.0 + (v - prev.0) * prev.1 / (prev.1 - m);
            break;
        }
        prev = (v, m);
    }
    let current = reference_current(&c.mn1.0, &c.mn1.1, c.v_gate, v_bot);
    ScanPoint { v_top: v_bot + current * c.r, v_bot, current }
}
