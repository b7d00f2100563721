mod common;

use approx::assert_relative_eq;
use memsynapse::devices::{
    calibrate_mn2, calibrate_nmos_io, drain_current, lrs_from_compliance, pmos_from_nmos, small_signal, stochastic_lrs,
    CurrentAnchor, MemristorParams, MosfetGeometry, MosfetParams, Polarity, IO_ANCHORS, IO_ANCHOR_VDS, V_THERMAL,
};
use proptest::prelude::*;

use common::reference_current;

fn io() -> MosfetParams {
    calibrate_nmos_io(&IO_ANCHORS).unwrap()
}

#[test]
fn calibrated_io_device_hits_every_anchor() {
    let p = io();
    for a in IO_ANCHORS {
        let id = drain_current(&p, &MosfetGeometry::MN1, a.vgs, IO_ANCHOR_VDS).unwrap();
        assert_relative_eq!(id, a.current, max_relative = 1e-6);
    }
}

/// Exhaustive search over (vth, n) with k' pinned by the strongest anchor,
/// minimizing squared log error on the other two.
fn grid_search(anchors: &[CurrentAnchor; 3]) -> (f64, f64, f64) {
    let g = MosfetGeometry::MN1;
    let mut best = (f64::INFINITY, 0.0, 0.0, 0.0);
    for i in 0..=300 {
        let vth = 0.50 + i as f64 * 5e-4;
        for j in 0..=450 {
            let n = 1.05 + j as f64 * 1e-3;
            let unit = MosfetParams {
                polarity: Polarity::Nmos,
                vth,
                k_prime: 1.0,
                n_slope: n,
                lambda: 0.0,
                v_thermal: V_THERMAL,
            };
            let kp = anchors[2].current / reference_current(&unit, &g, anchors[2].vgs, IO_ANCHOR_VDS);
            let p = MosfetParams { k_prime: kp, ..unit };
            let err: f64 = anchors[..2]
                .iter()
                .map(|a| (reference_current(&p, &g, a.vgs, IO_ANCHOR_VDS) / a.current).ln().powi(2))
                .sum();
            if err < best.0 {
                best = (err, vth, n, kp);
            }
        }
    }
    (best.1, best.2, best.3)
}

#[test]
fn calibration_agrees_with_grid_search() {
    let p = io();
    let (vth, n, kp) = grid_search(&IO_ANCHORS);
    assert!((p.vth - vth).abs() <= 1e-3, "vth {} vs grid {}", p.vth, vth);
    assert!((p.n_slope - n).abs() <= 2e-3, "n {} vs grid {}", p.n_slope, n);
    assert_relative_eq!(p.k_prime, kp, max_relative = 0.02);
}

#[test]
fn anchor_current_scale_only_moves_k_prime() {
    let base = io();
    let scaled = calibrate_nmos_io(&IO_ANCHORS.map(|a| CurrentAnchor { current: 2.0 * a.current, ..a })).unwrap();
    assert_relative_eq!(scaled.vth, base.vth, epsilon = 1e-9);
    assert_relative_eq!(scaled.n_slope, base.n_slope, epsilon = 1e-9);
    assert_relative_eq!(scaled.k_prime, 2.0 * base.k_prime, max_relative = 1e-8);
}

#[test]
fn anchor_gate_shift_moves_threshold_by_the_same_amount() {
    let base = io();
    let shifted = calibrate_nmos_io(&IO_ANCHORS.map(|a| CurrentAnchor { vgs: a.vgs + 0.05, ..a })).unwrap();
    assert_relative_eq!(shifted.vth, base.vth + 0.05, epsilon = 1e-8);
    assert_relative_eq!(shifted.n_slope, base.n_slope, epsilon = 1e-8);
}

#[test]
fn calibration_rejects_bad_anchors() {
    assert!(calibrate_nmos_io(&IO_ANCHORS[..2]).is_err());
    let mut a = IO_ANCHORS;
    a[1].current = -1.0;
    assert!(calibrate_nmos_io(&a).is_err());
}

#[test]
fn analytic_derivatives_match_finite_differences() {
    let p = MosfetParams { lambda: 0.05, ..io() };
    let g = MosfetGeometry::MN1;
    let h = 1e-6;
    for &(vgs, vds) in &[(0.3, 0.05), (0.6, 0.2), (0.8, 1.0), (1.2, 0.1), (1.2, 1.2)] {
        let ss = small_signal(&p, &g, vgs, vds).unwrap();
        let id = |a: f64, b: f64| drain_current(&p, &g, a, b).unwrap();
        let gm = (id(vgs + h, vds) - id(vgs - h, vds)) / (2.0 * h);
        let gds = (id(vgs, vds + h) - id(vgs, vds - h)) / (2.0 * h);
        assert_relative_eq!(ss.gm, gm, max_relative = 1e-5);
        assert_relative_eq!(ss.gds, gds, max_relative = 1e-5, epsilon = 1e-15);
        assert_relative_eq!(ss.id, id(vgs, vds), max_relative = 1e-12);
    }
}

#[test]
fn strong_inversion_reduces_to_square_law() {
    let p = io();
    let g = MosfetGeometry::MN1;
    let vov = 2.0;
    let id = drain_current(&p, &g, p.vth + vov, 5.0).unwrap();
    let square = p.k_prime / (2.0 * p.n_slope) * g.aspect() * vov * vov;
    assert_relative_eq!(id, square, max_relative = 1e-6);
}

#[test]
fn zero_drain_bias_carries_no_current() {
    let p = io();
    for vgs in [0.0, 0.5, 1.2] {
        assert_eq!(drain_current(&p, &MosfetGeometry::MN1, vgs, 0.0).unwrap(), 0.0);
    }
}

#[test]
fn current_is_monotone_on_a_bias_grid() {
    for p in [MosfetParams { lambda: 0.05, ..io() }, io()] {
        let g = MosfetGeometry::MN1;
        let at = |i: usize, j: usize| drain_current(&p, &g, i as f64 * 0.015, j as f64 * 0.015).unwrap();
        for i in 0..100 {
            for j in 0..100 {
                assert!(at(i + 1, j) >= at(i, j));
                assert!(at(i, j + 1) >= at(i, j));
            }
        }
    }
}

#[test]
fn pmos_uses_source_referenced_magnitudes() {
    let p = pmos_from_nmos(&io());
    let g = MosfetGeometry::MP1;
    let id = drain_current(&p, &g, -1.2, -0.3).unwrap();
    assert_relative_eq!(id, reference_current(&p, &g, 1.2, 0.3), max_relative = 1e-12);
    assert_eq!(p.vth, 0.65);
    assert_relative_eq!(p.k_prime, 0.4 * io().k_prime);
}

#[test]
fn nonfinite_bias_is_rejected() {
    assert!(drain_current(&io(), &MosfetGeometry::MN1, f64::NAN, 0.1).is_err());
    assert!(MosfetGeometry::new(-0.5, 0.5).is_err());
}

#[test]
fn read_transistor_fit_hits_target_mean() {
    let gates: Vec<f64> = (0..16).map(|k| 0.15 + 0.01 * k as f64).collect();
    let fit = calibrate_mn2(5.4e-6, &gates, &MosfetGeometry::MN2, 1.2).unwrap();
    assert_relative_eq!(fit.mean_current, 5.4e-6, max_relative = 1e-6);
    assert!(fit.min_spacing >= 20e-9);
    assert!(calibrate_mn2(5.4e-6, &[0.1; 16], &MosfetGeometry::MN2, 1.2).is_err());
}

#[test]
fn set_law_passes_through_anchors_and_clamps() {
    let m = MemristorParams::default();
    assert_relative_eq!(lrs_from_compliance(&m, 34.3e-6).unwrap(), 20e3, max_relative = 1e-12);
    assert_relative_eq!(lrs_from_compliance(&m, 291.8e-6).unwrap(), 5e3, max_relative = 1e-12);
    assert_eq!(lrs_from_compliance(&m, 1.0).unwrap(), m.r_min);
    assert_eq!(lrs_from_compliance(&m, 1e-9).unwrap(), m.r_max);
    assert!(lrs_from_compliance(&m, 0.0).is_err());
    assert_eq!(stochastic_lrs(&m, 5e3, -1e3).unwrap(), m.r_min);
}

proptest! {
    #[test]
    fn set_law_round_trips(r in 4.0e3f64..100.0e3) {
        let m = MemristorParams::default();
        let i = m.compliance_for_resistance(r).unwrap();
        prop_assert!((lrs_from_compliance(&m, i).unwrap() / r - 1.0).abs() < 1e-9);
    }

    #[test]
    fn set_law_is_decreasing(a in 1e-6f64..1e-3, b in 1e-6f64..1e-3) {
        let m = MemristorParams::default();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(lrs_from_compliance(&m, lo).unwrap() >= lrs_from_compliance(&m, hi).unwrap());
    }

    #[test]
    fn lrs_spread_grows_with_resistance(a in 4.0e3f64..100.0e3, b in 4.0e3f64..100.0e3) {
        let m = MemristorParams::default();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(m.lrs_sigma(lo) <= m.lrs_sigma(hi));
    }
}
