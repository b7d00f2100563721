//! Fitting the MOSFET law to measured operating currents.

use serde::{Deserialize, Serialize};

use super::mosfet::{current_unchecked, small_signal, MosfetGeometry, MosfetParams, Polarity, V_THERMAL};
use crate::error::{Error, Result};
use crate::numeric::bisect_decreasing;

/// Drain bias at which the IO-device anchors are defined.
pub const IO_ANCHOR_VDS: f64 = 1.0;

/// Smallest adjacent stage-2 current difference an ADC can resolve.
pub const MIN_LEVEL_SPACING: f64 = 20e-9;

/// Fixed shape parameters of the low-threshold read transistor.
pub const MN2_VTH: f64 = 0.35;
pub const MN2_N_SLOPE: f64 = 1.3;
pub const MN2_N_STEP: f64 = 0.05;

/// Output conductance used for devices whose k' is fitted in-circuit.
pub const DEFAULT_LAMBDA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurrentAnchor {
    pub vgs: f64,
    pub current: f64,
}

/// Operating currents of the MN1-sized (5/0.5) IO transistor.
pub const IO_ANCHORS: [CurrentAnchor; 3] = [
    CurrentAnchor { vgs: 0.6, current: 1.8e-6 },
    CurrentAnchor { vgs: 0.8, current: 34.3e-6 },
    CurrentAnchor { vgs: 1.2, current: 291.8e-6 },
];

const MAX_NEWTON_ITERS: usize = 200;

fn io_params(k_prime: f64, vth: f64, n_slope: f64) -> MosfetParams {
    MosfetParams { polarity: Polarity::Nmos, vth, k_prime, n_slope, lambda: 0.0, v_thermal: V_THERMAL }
}

fn log_residuals(anchors: &[CurrentAnchor; 3], aspect: f64, ln_k: f64, vth: f64, n: f64) -> [f64; 3] {
    let p = io_params(ln_k.exp(), vth, n);
    anchors.map(|a| (current_unchecked(&p, aspect, a.vgs, IO_ANCHOR_VDS) / a.current).ln())
}

#[allow(clippy::needless_range_loop)]
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Solve `(k', vth, n)` so the IO transistor at MN1 geometry reproduces all
/// three anchor currents at `vds = 1 V`, `lambda = 0`.
///
/// Damped Newton iteration on the log-current residuals; the log makes k'
/// enter linearly and balances the three decades of current.
pub fn calibrate_nmos_io(anchors: &[CurrentAnchor]) -> Result<MosfetParams> {
    let anchors: [CurrentAnchor; 3] = anchors
        .try_into()
        .map_err(|_| Error::invalid(format!("expected exactly three anchors, got {}", anchors.len())))?;
    if anchors.iter().any(|a| !(a.current > 0.0) || !a.vgs.is_finite()) {
        return Err(Error::invalid("anchor currents must be positive with finite gate voltages"));
    }
    let geom = MosfetGeometry::MN1;
    let aspect = geom.aspect();

    let mut vth = 0.59;
    let mut n = 1.25;
    let top = anchors.iter().max_by(|a, b| a.vgs.total_cmp(&b.vgs)).unwrap();
    let unit = current_unchecked(&io_params(1.0, vth, n), aspect, top.vgs, IO_ANCHOR_VDS);
    let mut ln_k = (top.current / unit).ln();

    let abs_residuals = |ln_k: f64, vth: f64, n: f64| -> Vec<f64> {
        let p = io_params(ln_k.exp(), vth, n);
        anchors.iter().map(|a| current_unchecked(&p, aspect, a.vgs, IO_ANCHOR_VDS) - a.current).collect()
    };

    let mut r = log_residuals(&anchors, aspect, ln_k, vth, n);
    for iter in 0..MAX_NEWTON_ITERS {
        let norm = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if norm < 1e-14 {
            return finish(ln_k, vth, n, abs_residuals(ln_k, vth, n), iter);
        }

        // d ln I / d ln k' = 1, d ln I / d vth = -gm / I, n by central difference.
        let p = io_params(ln_k.exp(), vth, n);
        let h = 1e-6;
        let rp = log_residuals(&anchors, aspect, ln_k, vth, n + h);
        let rm = log_residuals(&anchors, aspect, ln_k, vth, n - h);
        let mut jac = [[0.0; 3]; 3];
        for (i, a) in anchors.iter().enumerate() {
            let ss = small_signal(&p, &geom, a.vgs, IO_ANCHOR_VDS)?;
            jac[i] = [1.0, -ss.gm / ss.id, (rp[i] - rm[i]) / (2.0 * h)];
        }
        let Some(step) = solve3(jac, r.map(|v| -v)) else {
            break;
        };

        // Backtrack until the residual shrinks and n stays physical.
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let (lk, vt, nn) = (ln_k + t * step[0], vth + t * step[1], n + t * step[2]);
            if (1.0..=2.0).contains(&nn) && vt > 0.0 {
                let trial = log_residuals(&anchors, aspect, lk, vt, nn);
                let tn = trial.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if tn.is_finite() && tn < norm {
                    ln_k = lk;
                    vth = vt;
                    n = nn;
                    r = trial;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            // Stalled at floating-point resolution: accept if already tight.
            let res = abs_residuals(ln_k, vth, n);
            if res.iter().all(|v| v.abs() < 1e-9) {
                return finish(ln_k, vth, n, res, iter);
            }
            break;
        }
    }
    Err(Error::Calibration {
        reason: "IO transistor anchors not matched".into(),
        iterations: MAX_NEWTON_ITERS,
        residuals: abs_residuals(ln_k, vth, n),
    })
}

fn finish(ln_k: f64, vth: f64, n: f64, residuals: Vec<f64>, iterations: usize) -> Result<MosfetParams> {
    let p = io_params(ln_k.exp(), vth, n);
    if residuals.iter().all(|v| v.abs() < 1e-9) && p.validate().is_ok() {
        Ok(p)
    } else {
        Err(Error::Calibration {
            reason: format!("solution outside valid parameter range: {p:?}"),
            iterations,
            residuals,
        })
    }
}

/// PMOS isolation device derived from the calibrated NMOS: mobility ratio
/// 0.4, threshold 0.65 V.
pub fn pmos_from_nmos(nmos: &MosfetParams) -> MosfetParams {
    MosfetParams { polarity: Polarity::Pmos, vth: 0.65, k_prime: 0.4 * nmos.k_prime, lambda: DEFAULT_LAMBDA, ..*nmos }
}

/// Result of fitting the second-stage read transistor.
#[derive(Debug, Clone, PartialEq)]
pub struct Mn2Calibration {
    pub params: MosfetParams,
    pub currents: Vec<f64>,
    pub mean_current: f64,
    pub min_spacing: f64,
}

fn level_currents(params: &MosfetParams, geom: &MosfetGeometry, gates: &[f64], vds: f64) -> Vec<f64> {
    gates.iter().map(|&vg| current_unchecked(params, geom.aspect(), vg, vds)).collect()
}

pub fn min_adjacent_spacing(currents: &[f64]) -> f64 {
    currents.windows(2).map(|w| (w[1] - w[0]).abs()).fold(f64::INFINITY, f64::min)
}

/// Fit k' of the read transistor so the mean second-stage current over the
/// given gate voltages equals `target_avg_current`.
///
/// Threshold is held at 0.35 V. The slope factor starts at 1.3 and is lowered
/// in 0.05 steps while adjacent levels are closer than 20 nA.
pub fn calibrate_mn2(
    target_avg_current: f64,
    node_voltages: &[f64],
    geom: &MosfetGeometry,
    vds: f64,
) -> Result<Mn2Calibration> {
    if node_voltages.len() < 2 {
        return Err(Error::invalid("need at least two node voltages"));
    }
    if !(target_avg_current > 0.0) {
        return Err(Error::invalid("target current must be positive"));
    }
    geom.validate()?;

    let mut n_slope = MN2_N_SLOPE;
    let mut last_spacing = 0.0;
    let mut attempts = 0;
    while n_slope >= 1.0 - 1e-12 {
        attempts += 1;
        let base = MosfetParams {
            polarity: Polarity::Nmos,
            vth: MN2_VTH,
            k_prime: 1.0,
            n_slope: n_slope.max(1.0),
            lambda: DEFAULT_LAMBDA,
            v_thermal: V_THERMAL,
        };
        let mean_at = |ln_k: f64| {
            let p = MosfetParams { k_prime: ln_k.exp(), ..base };
            let c = level_currents(&p, geom, node_voltages, vds);
            c.iter().sum::<f64>() / c.len() as f64
        };
        let b = bisect_decreasing(
            |x| target_avg_current - mean_at(x),
            (1e-12f64).ln(),
            (10.0f64).ln(),
            1e-13,
            target_avg_current * 1e-9,
            400,
        );
        let params = MosfetParams { k_prime: b.x.exp(), ..base };
        let currents = level_currents(&params, geom, node_voltages, vds);
        let mean_current = currents.iter().sum::<f64>() / currents.len() as f64;
        if (mean_current / target_avg_current - 1.0).abs() > 0.01 {
            return Err(Error::Calibration {
                reason: "could not reach target mean read current".into(),
                iterations: b.iterations,
                residuals: vec![mean_current - target_avg_current],
            });
        }
        let min_spacing = min_adjacent_spacing(&currents);
        if min_spacing >= MIN_LEVEL_SPACING {
            return Ok(Mn2Calibration { params, currents, mean_current, min_spacing });
        }
        last_spacing = min_spacing;
        n_slope -= MN2_N_STEP;
    }
    Err(Error::Calibration {
        reason: format!("adjacent read levels closer than {MIN_LEVEL_SPACING:e} A for every slope factor >= 1"),
        iterations: attempts,
        residuals: vec![last_spacing],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve3_matches_hand_system() {
        let a = [[2.0, 1.0, -1.0], [-3.0, -1.0, 2.0], [-2.0, 1.0, 2.0]];
        let x = solve3(a, [8.0, -11.0, -3.0]).unwrap();
        for (got, want) in x.iter().zip([2.0, 3.0, -1.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn wrong_anchor_count_rejected() {
        assert!(calibrate_nmos_io(&IO_ANCHORS[..2]).is_err());
    }

    #[test]
    fn equal_gate_voltages_cannot_be_resolved() {
        let gates = [0.9; 16];
        match calibrate_mn2(5.4e-6, &gates, &MosfetGeometry::MN2, 1.2) {
            Err(Error::Calibration { residuals, .. }) => assert_eq!(residuals, vec![0.0]),
            other => panic!("expected calibration failure, got {other:?}"),
        }
    }

    #[test]
    fn pmos_mirror_rules() {
        let n = calibrate_nmos_io(&IO_ANCHORS).unwrap();
        let p = pmos_from_nmos(&n);
        assert_eq!(p.polarity, Polarity::Pmos);
        assert_eq!(p.vth, 0.65);
        assert!((p.k_prime / n.k_prime - 0.4).abs() < 1e-15);
    }
}
