mod common;

use approx::assert_relative_eq;
use memsynapse::devices::{MemristorState, MosfetGeometry, ResistiveMode, Transistor};
use memsynapse::solver::{
    apply_reset, apply_set, apply_set_with_damping, level_resistances, solve_read_point, solve_stack, stack_currents,
    DeviceModels, SupplyConfig, Synapse, SynapseSizing,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{scan_stack, StackCase};

fn models() -> DeviceModels {
    DeviceModels::calibrated().unwrap()
}

fn synapse() -> Synapse {
    Synapse::new(models(), SynapseSizing::default())
}

#[test]
fn fifty_random_points_match_brute_force_scan() {
    let m = models();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut worst_v, mut worst_i) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let rail = rng.random_range(0.8..1.6);
        let v_gate = rng.random_range(0.3..1.3);
        let r = rng.random_range(4e3..100e3);
        let mp1 = MosfetGeometry { width: rng.random_range(0.5..5.0), length: 0.5 };
        let mn1 = MosfetGeometry { width: rng.random_range(0.5..5.0), length: 0.5 };
        let case = StackCase { rail, v_readb: 0.0, v_gate, r, mp1: (m.pmos_io, mp1), mn1: (m.nmos_io, mn1) };
        let oracle = scan_stack(&case);
        let (p, n) = (Transistor::new(m.pmos_io, mp1), Transistor::new(m.nmos_io, mn1));
        let op = solve_stack(rail, 0.0, &p, r, &n, v_gate).unwrap();
        worst_v = worst_v.max((op.v_mem_bot - oracle.v_bot).abs()).max((op.v_mem_top - oracle.v_top).abs());
        worst_i = worst_i.max((op.i_stage1 - oracle.current).abs());
    }
    println!("worst node deviation {worst_v:e} V, worst current deviation {worst_i:e} A");
    assert!(worst_v <= 10e-6);
    assert!(worst_i <= 1e-12);
}

#[test]
fn branch_currents_agree_at_the_solution() {
    let syn = synapse();
    let s = SupplyConfig::default();
    for r in [4e3, 5e3, 12e3, 20e3, 100e3] {
        for (rail, gate) in [(s.vdd_read, s.v_gate), (s.vdd_set, 0.8), (s.vdd_set, 1.2)] {
            let op = solve_stack(rail, s.v_readb, &syn.mp1(), r, &syn.mn1(), gate).unwrap();
            let i = stack_currents(rail, s.v_readb, &syn.mp1(), r, &syn.mn1(), gate, op.v_mem_top, op.v_mem_bot);
            assert!((i[0] - i[1]).abs() < 1e-12 && (i[1] - i[2]).abs() < 1e-12, "{i:?}");
            assert!(0.0 <= op.v_mem_bot && op.v_mem_bot <= op.v_mem_top && op.v_mem_top <= rail);
        }
    }
}

#[test]
fn set_programs_the_anchor_resistances() {
    let syn = synapse();
    let s = SupplyConfig::default();
    let hrs = MemristorState::hrs(&syn.models.memristor);
    let lo = apply_set(&hrs, &syn, &s, 0.8).unwrap();
    let hi = apply_set(&hrs, &syn, &s, 1.2).unwrap();
    assert_relative_eq!(lo.state.resistance, 20e3, max_relative = 0.05);
    assert_relative_eq!(hi.state.resistance, 5e3, max_relative = 0.05);
    assert_eq!(lo.state.mode, ResistiveMode::Lrs);
    assert_relative_eq!(s.set_power(lo.compliance_current), 0.113e-3, max_relative = 0.05);
    assert_relative_eq!(s.set_power(hi.compliance_current), 0.963e-3, max_relative = 0.05);
}

#[test]
fn set_result_does_not_depend_on_damping() {
    let syn = synapse();
    let s = SupplyConfig::default();
    let hrs = MemristorState::hrs(&syn.models.memristor);
    for gate in [0.7, 0.8, 1.0, 1.2] {
        let a = apply_set_with_damping(&hrs, &syn, &s, gate, 0.3).unwrap();
        let b = apply_set_with_damping(&hrs, &syn, &s, gate, 0.7).unwrap();
        assert!((a.state.resistance - b.state.resistance).abs() < 5.0, "gate {gate}");
    }
}

#[test]
fn reset_then_set_composes() {
    let syn = synapse();
    let s = SupplyConfig::default();
    let mem = &syn.models.memristor;
    let first = apply_set(&MemristorState::hrs(mem), &syn, &s, 1.0).unwrap();
    assert!(apply_set(&first.state, &syn, &s, 1.0).is_err());
    let reset = apply_reset(&first.state, mem);
    assert_eq!(reset, MemristorState::hrs(mem));
    let again = apply_set(&reset, &syn, &s, 1.0).unwrap();
    assert_eq!(again.state, first.state);
}

#[test]
fn read_point_matches_calibration() {
    let syn = synapse();
    let s = SupplyConfig::default();
    let ops: Vec<_> = level_resistances().map(|r| solve_read_point(&syn, &s, r).unwrap()).collect();
    let mean_i2 = ops.iter().map(|o| o.i_stage2).sum::<f64>() / ops.len() as f64;
    assert_relative_eq!(mean_i2, 5.4e-6, max_relative = 0.01);
    for w in ops.windows(2) {
        assert!(w[1].v_mem_bot < w[0].v_mem_bot);
        assert!(w[1].i_stage2 < w[0].i_stage2);
    }
    let hrs = solve_read_point(&syn, &s, syn.models.memristor.r_hrs).unwrap();
    assert!(hrs.i_stage2 < ops[15].i_stage2);
}

#[test]
fn wider_read_transistor_draws_more_current() {
    let sizing = SynapseSizing { mn2: MosfetGeometry { width: 2.5, length: 0.5 }, ..SynapseSizing::default() };
    let syn = Synapse::new(models(), sizing);
    let op = solve_read_point(&syn, &SupplyConfig::default(), 5e3).unwrap();
    assert!(op.i_stage2 > 25e-6);
}

#[test]
fn invalid_inputs_are_rejected() {
    let syn = synapse();
    assert!(solve_stack(0.0, 0.0, &syn.mp1(), 5e3, &syn.mn1(), 0.6).is_err());
    assert!(solve_stack(1.2, 0.0, &syn.mp1(), -5e3, &syn.mn1(), 0.6).is_err());
    assert!(solve_stack(1.2, 0.0, &syn.mp1(), 5e3, &syn.mn1(), f64::NAN).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stack_current_falls_with_resistance(a in 4e3f64..100e3, b in 4e3f64..100e3, gate in 0.4f64..1.3) {
        let syn = synapse();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let i = |r| solve_stack(1.2, 0.0, &syn.mp1(), r, &syn.mn1(), gate).unwrap().i_stage1;
        prop_assert!(i(hi) <= i(lo) + 1e-12);
    }

    #[test]
    fn stack_current_rises_with_gate(a in 0.3f64..1.3, b in 0.3f64..1.3, r in 4e3f64..100e3) {
        let syn = synapse();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let i = |g| solve_stack(1.2, 0.0, &syn.mp1(), r, &syn.mn1(), g).unwrap().i_stage1;
        prop_assert!(i(hi) + 1e-12 >= i(lo));
    }

    #[test]
    fn set_power_and_energy_identities(i in 1e-6f64..1e-3) {
        let s = SupplyConfig::default();
        prop_assert_eq!(s.set_power(i), s.vdd_set * i);
        prop_assert_eq!(s.energy(s.set_power(i)), s.set_power(i) * 1e-6);
    }
}
