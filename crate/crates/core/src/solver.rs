//! DC operating points of the 3T1R synapse.
//!
//! Both operations share one series stack between a supply rail and ground:
//!
//! ```text
//!   rail ── MP1 (gate = V_READB) ── v_mem_top ── memristor ── v_mem_bot ── MN1 (gate = V_SET/READ) ── gnd
//! ```
//!
//! During READ the bottom node also drives the gate of MN2, whose drain
//! current is the second-stage output.

use serde::{Deserialize, Serialize};

use crate::devices::{
    calibrate_mn2, calibrate_nmos_io, lrs_from_compliance, pmos_from_nmos, MemristorParams, MemristorState,
    MosfetGeometry, MosfetParams, ResistiveMode, Transistor, IO_ANCHORS,
};
use crate::error::{Error, Result};
use crate::numeric::bisect_decreasing;

/// Node-voltage convergence tolerance.
pub const V_TOL: f64 = 1e-6;
/// Kirchhoff current tolerance.
pub const I_TOL: f64 = 1e-12;
pub const MAX_OUTER_ITERS: usize = 200;

pub const SET_MAX_ITERS: usize = 100;
pub const SET_DAMPING: f64 = 0.5;
/// Fixed-point convergence threshold on resistance, ohms.
pub const SET_R_TOL: f64 = 1.0;

/// Mean second-stage current the read transistor is fitted to.
pub const MN2_TARGET_CURRENT: f64 = 5.4e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynapseSizing {
    pub mp1: MosfetGeometry,
    pub mn1: MosfetGeometry,
    pub mn2: MosfetGeometry,
}

impl Default for SynapseSizing {
    fn default() -> Self {
        SynapseSizing { mp1: MosfetGeometry::MP1, mn1: MosfetGeometry::MN1, mn2: MosfetGeometry::MN2 }
    }
}

impl SynapseSizing {
    pub fn validate(&self) -> Result<()> {
        for (name, g) in [("mp1", &self.mp1), ("mn1", &self.mn1), ("mn2", &self.mn2)] {
            g.validate().map_err(|e| Error::invalid(format!("sizing.{name}: {e}")))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SupplyConfig {
    pub vdd_set: f64,
    pub vdd_read: f64,
    pub v_readb: f64,
    /// V_SET/READ applied at the MN1 gate during READ.
    pub v_gate: f64,
    /// Window over which power is integrated into energy, seconds.
    pub energy_window: f64,
}

impl Default for SupplyConfig {
    fn default() -> Self {
        SupplyConfig { vdd_set: 3.3, vdd_read: 1.2, v_readb: 0.0, v_gate: 0.6, energy_window: 1e-6 }
    }
}

impl SupplyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.vdd_set > 0.0 && self.vdd_set <= 4.0) {
            return Err(Error::invalid(format!("vdd_set must be in (0, 4] V, got {}", self.vdd_set)));
        }
        if !(self.vdd_read > 0.0 && self.vdd_read <= 2.0) {
            return Err(Error::invalid(format!("vdd_read must be in (0, 2] V, got {}", self.vdd_read)));
        }
        if !(0.0..=self.vdd_set).contains(&self.v_gate) {
            return Err(Error::invalid(format!("v_gate must be in [0, vdd_set], got {}", self.v_gate)));
        }
        if !self.v_readb.is_finite() {
            return Err(Error::invalid("v_readb must be finite"));
        }
        if !(self.energy_window > 0.0) {
            return Err(Error::invalid("energy_window must be positive"));
        }
        Ok(())
    }

    pub fn energy(&self, power: f64) -> f64 {
        power * self.energy_window
    }

    pub fn set_power(&self, compliance_current: f64) -> f64 {
        self.vdd_set * compliance_current
    }

    pub fn read_power(&self, op: &OperatingPoint) -> f64 {
        self.vdd_read * op.total_read_current()
    }
}

/// Calibrated parameters of every device in the cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceModels {
    /// MN1 (and the template for MP1).
    pub nmos_io: MosfetParams,
    /// MP1.
    pub pmos_io: MosfetParams,
    /// MN2.
    pub nmos_read: MosfetParams,
    pub memristor: MemristorParams,
}

impl DeviceModels {
    /// Full calibration chain with default memristor and supplies.
    pub fn calibrated() -> Result<Self> {
        Self::calibrate(MemristorParams::default(), &SupplyConfig::default())
    }

    /// Fit MN1/MP1 to the IO anchors, then fit MN2 on the sixteen READ
    /// bottom-node voltages (5..20 kOhm) at the default sizing.
    pub fn calibrate(memristor: MemristorParams, supplies: &SupplyConfig) -> Result<Self> {
        memristor.validate()?;
        supplies.validate()?;
        let nmos_io = calibrate_nmos_io(&IO_ANCHORS)?;
        let pmos_io = pmos_from_nmos(&nmos_io);
        let sizing = SynapseSizing::default();
        let mp1 = Transistor::new(pmos_io, sizing.mp1);
        let mn1 = Transistor::new(nmos_io, sizing.mn1);
        let gates = level_resistances()
            .map(|r| {
                solve_stack(supplies.vdd_read, supplies.v_readb, &mp1, r, &mn1, supplies.v_gate).map(|op| op.v_mem_bot)
            })
            .collect::<Result<Vec<_>>>()?;
        let mn2 = calibrate_mn2(MN2_TARGET_CURRENT, &gates, &sizing.mn2, supplies.vdd_read)?;
        Ok(DeviceModels { nmos_io, pmos_io, nmos_read: mn2.params, memristor })
    }
}

/// The sixteen programmable LRS levels, 5 kOhm to 20 kOhm in 1 kOhm steps.
pub fn level_resistances() -> impl Iterator<Item = f64> + Clone {
    (5..=20).map(|k| k as f64 * 1e3)
}

/// A sized synapse cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Synapse {
    pub models: DeviceModels,
    pub sizing: SynapseSizing,
}

impl Synapse {
    pub fn new(models: DeviceModels, sizing: SynapseSizing) -> Self {
        Synapse { models, sizing }
    }

    pub fn mp1(&self) -> Transistor {
        Transistor::new(self.models.pmos_io, self.sizing.mp1)
    }

    pub fn mn1(&self) -> Transistor {
        Transistor::new(self.models.nmos_io, self.sizing.mn1)
    }

    pub fn mn2(&self) -> Transistor {
        Transistor::new(self.models.nmos_read, self.sizing.mn2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub v_mem_top: f64,
    pub v_mem_bot: f64,
    pub i_stage1: f64,
    /// Zero for SET-path solves.
    pub i_stage2: f64,
}

impl OperatingPoint {
    pub fn total_read_current(&self) -> f64 {
        self.i_stage1 + self.i_stage2
    }
}

/// Currents through MP1, the memristor and MN1 at the given node voltages.
#[allow(clippy::too_many_arguments)]
pub fn stack_currents(
    rail: f64,
    v_readb: f64,
    mp1: &Transistor,
    memristor_r: f64,
    mn1: &Transistor,
    v_gate: f64,
    v_top: f64,
    v_bot: f64,
) -> [f64; 3] {
    [mp1.current(rail - v_readb, rail - v_top), (v_top - v_bot) / memristor_r, mn1.current(v_gate, v_bot)]
}

/// Top-node voltage and branch current for a fixed bottom-node voltage:
/// MP1 in series with the memristor between `rail` and `v_bot`.
fn upper_branch(rail: f64, v_sg: f64, mp1: &Transistor, r: f64, v_bot: f64) -> (f64, f64) {
    let b = bisect_decreasing(
        |v_top| mp1.current(v_sg, rail - v_top) - (v_top - v_bot) / r,
        v_bot,
        rail,
        V_TOL * 1e-3,
        I_TOL * 1e-2,
        MAX_OUTER_ITERS,
    );
    (b.x, (b.x - v_bot) / r)
}

/// Sign-correct lower bound on `i_branch(v_bot) - i_ref`.
///
/// Runs the inner bisection only until the bracket on `v_mem_top` (and hence
/// on the branch current) excludes `i_ref`; falls back to the fully
/// converged difference otherwise.
fn branch_mismatch_bound(rail: f64, v_sg: f64, mp1: &Transistor, r: f64, v_bot: f64, i_ref: f64) -> f64 {
    let (mut lo, mut hi) = (v_bot, rail);
    for _ in 0..MAX_OUTER_ITERS {
        let i_lo = (lo - v_bot) / r;
        let i_hi = (hi - v_bot) / r;
        if i_lo > i_ref {
            return i_lo - i_ref;
        }
        if i_hi < i_ref {
            return i_hi - i_ref;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo < V_TOL * 1e-3 {
            break;
        }
        if mp1.current(v_sg, rail - mid) - (mid - v_bot) / r > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    upper_branch(rail, v_sg, mp1, r, v_bot).1 - i_ref
}

/// Solve the rail / MP1 / memristor / MN1 stack.
///
/// Nested bisection: the outer loop brackets `v_mem_bot` in `[0, rail]` on
/// the mismatch between the upper-branch current and MN1's current (which
/// is monotone decreasing in `v_mem_bot`); the inner loop brackets
/// `v_mem_top` in `[v_mem_bot, rail]`. Converged when the outer bracket is
/// under 1 uV and the current mismatch under 1 pA.
pub fn solve_stack(
    rail: f64,
    v_readb: f64,
    mp1: &Transistor,
    memristor_r: f64,
    mn1: &Transistor,
    v_gate: f64,
) -> Result<OperatingPoint> {
    if !(rail > 0.0 && rail.is_finite()) {
        return Err(Error::invalid(format!("supply rail must be positive, got {rail}")));
    }
    if !(memristor_r > 0.0 && memristor_r.is_finite()) {
        return Err(Error::invalid(format!("memristor resistance must be positive, got {memristor_r}")));
    }
    if !v_gate.is_finite() || !v_readb.is_finite() {
        return Err(Error::invalid("gate voltages must be finite"));
    }
    let v_sg = rail - v_readb;
    let exact = |v_bot: f64| upper_branch(rail, v_sg, mp1, memristor_r, v_bot).1 - mn1.current(v_gate, v_bot);

    let (mut lo, mut hi) = (0.0, rail);
    let mut mismatch = f64::NAN;
    for _ in 0..MAX_OUTER_ITERS {
        let mid = 0.5 * (lo + hi);
        let stalled = mid <= lo || mid >= hi;
        if hi - lo < V_TOL || stalled {
            mismatch = exact(mid);
            if mismatch.abs() < I_TOL || stalled {
                let (v_top, _) = upper_branch(rail, v_sg, mp1, memristor_r, mid);
                return Ok(OperatingPoint {
                    v_mem_top: v_top,
                    v_mem_bot: mid,
                    i_stage1: mn1.current(v_gate, mid),
                    i_stage2: 0.0,
                });
            }
        }
        let f = branch_mismatch_bound(rail, v_sg, mp1, memristor_r, mid, mn1.current(v_gate, mid));
        if f > 0.0 {
            lo = mid;
        } else if f < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            hi = mid;
        }
    }
    Err(Error::Solver { lo, hi, mismatch })
}

/// READ operating point: stage-1 stack on the read rail, MN2 gated by the
/// memristor bottom node with its drain held at `vdd_read`.
pub fn solve_read_point(syn: &Synapse, supplies: &SupplyConfig, memristor_r: f64) -> Result<OperatingPoint> {
    let mut op =
        solve_stack(supplies.vdd_read, supplies.v_readb, &syn.mp1(), memristor_r, &syn.mn1(), supplies.v_gate)?;
    op.i_stage2 = syn.mn2().current(op.v_mem_bot, supplies.vdd_read);
    Ok(op)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SetOutcome {
    pub state: MemristorState,
    pub compliance_current: f64,
    pub operating_point: OperatingPoint,
    pub iterations: usize,
}

/// Program an HRS memristor with MN1's gate at `v_set_gate`.
pub fn apply_set(
    state: &MemristorState,
    syn: &Synapse,
    supplies: &SupplyConfig,
    v_set_gate: f64,
) -> Result<SetOutcome> {
    apply_set_with_damping(state, syn, supplies, v_set_gate, SET_DAMPING)
}

/// Quasi-static SET: iterate `R <- R + d * (lrs(I(R)) - R)` from the HRS value
/// until the step is below 1 ohm. The returned resistance is the one the
/// final compliance current programs.
pub fn apply_set_with_damping(
    state: &MemristorState,
    syn: &Synapse,
    supplies: &SupplyConfig,
    v_set_gate: f64,
    damping: f64,
) -> Result<SetOutcome> {
    if state.mode != ResistiveMode::Hrs {
        return Err(Error::InvalidState("SET requires a preceding RESET (memristor is in LRS)".into()));
    }
    if !(damping > 0.0 && damping <= 1.0) {
        return Err(Error::invalid(format!("damping must be in (0, 1], got {damping}")));
    }
    let mem = &syn.models.memristor;
    let (mp1, mn1) = (syn.mp1(), syn.mn1());
    let mut r = mem.r_hrs;
    let mut last_step = f64::INFINITY;
    for it in 1..=SET_MAX_ITERS {
        let op = solve_stack(supplies.vdd_set, supplies.v_readb, &mp1, r, &mn1, v_set_gate)?;
        let target = if op.i_stage1 > 0.0 { lrs_from_compliance(mem, op.i_stage1)? } else { mem.r_max };
        let next = r + damping * (target - r);
        last_step = (next - r).abs();
        if last_step < SET_R_TOL {
            return Ok(SetOutcome {
                state: MemristorState { mode: ResistiveMode::Lrs, resistance: target },
                compliance_current: op.i_stage1,
                operating_point: op,
                iterations: it,
            });
        }
        r = next;
    }
    Err(Error::Set { iterations: SET_MAX_ITERS, last_step })
}

pub fn apply_reset(_state: &MemristorState, params: &MemristorParams) -> MemristorState {
    MemristorState::hrs(params)
}
