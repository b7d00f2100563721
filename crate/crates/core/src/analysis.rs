//! Design-space sweeps, power accounting, read resolution and readability.

use serde::Serialize;

use crate::devices::{MemristorState, MosfetGeometry};
use crate::error::{Error, Result};
use crate::numeric::KahanSum;
use crate::solver::{
    apply_set, level_resistances, solve_read_point, DeviceModels, SupplyConfig, Synapse, SynapseSizing,
};
use crate::table::{Cell, Table};

/// Resolution of the downstream ADC, amps.
pub const DEFAULT_ADC_RESOLUTION: f64 = 20e-9;

pub const SET_SWEEP_RANGE: (f64, f64) = (0.6, 1.3);
pub const READ_SWEEP_RANGE: (f64, f64) = (0.5, 0.8);
/// Resistance pair defining the sensing window.
pub const VRANGE_PAIR: (f64, f64) = (5e3, 20e3);

pub const LEVEL_COUNT: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DesignCase {
    pub id: u8,
    pub sizing: SynapseSizing,
}

const fn geom(width: f64, length: f64) -> MosfetGeometry {
    MosfetGeometry { width, length }
}

/// The six read-path sizings compared for 4-bit storage. Case 6 is the
/// default sizing.
pub fn design_cases() -> [DesignCase; 6] {
    let case = |id, mn1_w, mp1_w, mn2_w, mn2_l| DesignCase {
        id,
        sizing: SynapseSizing { mp1: geom(mp1_w, 0.5), mn1: geom(mn1_w, 0.5), mn2: geom(mn2_w, mn2_l) },
    };
    [
        case(1, 1.0, 0.5, 0.5, 0.5),
        case(2, 1.0, 2.5, 0.5, 0.5),
        case(3, 5.0, 0.5, 0.5, 0.5),
        case(4, 5.0, 2.5, 0.5, 0.5),
        case(5, 5.0, 2.5, 2.5, 0.5),
        case(6, 5.0, 2.5, 0.5, 2.5),
    ]
}

pub fn design_case(id: u8) -> Result<DesignCase> {
    design_cases()
        .into_iter()
        .find(|c| c.id == id)
        .ok_or_else(|| Error::invalid(format!("design case must be 1..=6, got {id}")))
}

/// `count` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count).map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64).collect(),
    }
}

fn check_range(points: &[f64], (lo, hi): (f64, f64), what: &str) -> Result<()> {
    // allow for rounding in generated grids
    let eps = 1e-9;
    match points.iter().find(|v| !(*v >= &(lo - eps) && *v <= &(hi + eps))) {
        Some(v) => Err(Error::invalid(format!("{what} gate voltage {v} outside [{lo}, {hi}] V"))),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SetSweepRow {
    pub v_gate: f64,
    pub compliance_current: f64,
    pub resistance: f64,
    pub power: f64,
    pub energy: f64,
    pub error: Option<String>,
}

/// SET from HRS at each gate voltage. Solver failures are recorded on the
/// row and the sweep continues.
pub fn sweep_set(syn: &Synapse, supplies: &SupplyConfig, gates: &[f64]) -> Result<Vec<SetSweepRow>> {
    check_range(gates, SET_SWEEP_RANGE, "SET")?;
    supplies.validate()?;
    let hrs = MemristorState::hrs(&syn.models.memristor);
    Ok(gates
        .iter()
        .map(|&v| match apply_set(&hrs, syn, supplies, v) {
            Ok(out) => {
                let power = supplies.set_power(out.compliance_current);
                SetSweepRow {
                    v_gate: v,
                    compliance_current: out.compliance_current,
                    resistance: out.state.resistance,
                    power,
                    energy: supplies.energy(power),
                    error: None,
                }
            }
            Err(e) => SetSweepRow {
                v_gate: v,
                compliance_current: f64::NAN,
                resistance: f64::NAN,
                power: f64::NAN,
                energy: f64::NAN,
                error: Some(e.to_string()),
            },
        })
        .collect())
}

pub fn set_sweep_table(rows: &[SetSweepRow]) -> Table {
    let mut t = Table::new(["v_gate_v", "compliance_amp", "resistance_ohm", "power_w", "energy_j", "error"]);
    for r in rows {
        t.push(vec![
            r.v_gate.into(),
            r.compliance_current.into(),
            r.resistance.into(),
            r.power.into(),
            r.energy.into(),
            r.error.clone().unwrap_or_default().into(),
        ]);
    }
    t
}

/// Bottom-node voltage difference between the two resistances of
/// `r_pair` at the supplies' read gate voltage.
pub fn vrange(syn: &Synapse, supplies: &SupplyConfig, r_pair: (f64, f64)) -> Result<f64> {
    let a = solve_read_point(syn, supplies, r_pair.0)?;
    let b = solve_read_point(syn, supplies, r_pair.1)?;
    Ok((a.v_mem_bot - b.v_mem_bot).abs())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReadSweepRow {
    pub v_gate: f64,
    pub vrange: f64,
    /// Stage-1 current at each resistance of the pair.
    pub i_stage1: [f64; 2],
    pub i_stage2: [f64; 2],
    pub error: Option<String>,
}

pub fn sweep_read(
    syn: &Synapse,
    supplies: &SupplyConfig,
    gates: &[f64],
    r_pair: (f64, f64),
) -> Result<Vec<ReadSweepRow>> {
    check_range(gates, READ_SWEEP_RANGE, "READ")?;
    supplies.validate()?;
    Ok(gates
        .iter()
        .map(|&v| {
            let s = SupplyConfig { v_gate: v, ..*supplies };
            let solved =
                solve_read_point(syn, &s, r_pair.0).and_then(|a| Ok((a, solve_read_point(syn, &s, r_pair.1)?)));
            match solved {
                Ok((a, b)) => ReadSweepRow {
                    v_gate: v,
                    vrange: (a.v_mem_bot - b.v_mem_bot).abs(),
                    i_stage1: [a.i_stage1, b.i_stage1],
                    i_stage2: [a.i_stage2, b.i_stage2],
                    error: None,
                },
                Err(e) => ReadSweepRow {
                    v_gate: v,
                    vrange: f64::NAN,
                    i_stage1: [f64::NAN; 2],
                    i_stage2: [f64::NAN; 2],
                    error: Some(e.to_string()),
                },
            }
        })
        .collect())
}

pub fn read_sweep_table(rows: &[ReadSweepRow]) -> Table {
    let mut t =
        Table::new(["v_gate_v", "vrange_v", "i1_lo_r_amp", "i1_hi_r_amp", "i2_lo_r_amp", "i2_hi_r_amp", "error"]);
    for r in rows {
        t.push(vec![
            r.v_gate.into(),
            r.vrange.into(),
            r.i_stage1[0].into(),
            r.i_stage1[1].into(),
            r.i_stage2[0].into(),
            r.i_stage2[1].into(),
            r.error.clone().unwrap_or_default().into(),
        ]);
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReadPower {
    pub avg_power: f64,
    pub avg_energy: f64,
    pub mean_i_stage1: f64,
    pub mean_i_stage2: f64,
}

/// READ power and energy averaged over the sixteen LRS levels.
pub fn read_power_energy(syn: &Synapse, supplies: &SupplyConfig) -> Result<ReadPower> {
    let (mut p, mut i1, mut i2) = (KahanSum::default(), KahanSum::default(), KahanSum::default());
    let mut n = 0usize;
    for r in level_resistances() {
        let op = solve_read_point(syn, supplies, r)?;
        p.add(supplies.read_power(&op));
        i1.add(op.i_stage1);
        i2.add(op.i_stage2);
        n += 1;
    }
    let avg_power = p.value() / n as f64;
    Ok(ReadPower {
        avg_power,
        avg_energy: supplies.energy(avg_power),
        mean_i_stage1: i1.value() / n as f64,
        mean_i_stage2: i2.value() / n as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResolutionLevel {
    pub resistance: f64,
    /// 4-bit code, 0 at 5 kOhm.
    pub code: u8,
    pub i_stage2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolutionTable {
    pub levels: Vec<ResolutionLevel>,
}

impl ResolutionTable {
    pub fn currents(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.i_stage2).collect()
    }

    /// Differences between successive levels.
    pub fn adjacent_differences(&self) -> Vec<f64> {
        self.levels.windows(2).map(|w| (w[1].i_stage2 - w[0].i_stage2).abs()).collect()
    }

    pub fn to_table(&self, report: Option<&ReadabilityReport>) -> Table {
        let mut t = Table::new(["level_ohm", "code", "i2_amp", "readable"]);
        for (k, l) in self.levels.iter().enumerate() {
            let readable = report.map(|r| Cell::from(r.readable[k])).unwrap_or(Cell::Text(String::new()));
            t.push(vec![l.resistance.into(), format!("{:04b}", l.code).into(), l.i_stage2.into(), readable]);
        }
        t
    }
}

/// Second-stage current at each of the sixteen levels.
pub fn resolution_table(syn: &Synapse, supplies: &SupplyConfig) -> Result<ResolutionTable> {
    let levels = level_resistances()
        .enumerate()
        .map(|(code, r)| {
            let op = solve_read_point(syn, supplies, r)?;
            Ok(ResolutionLevel { resistance: r, code: code as u8, i_stage2: op.i_stage2 })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ResolutionTable { levels })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReadabilityReport {
    pub readable: Vec<bool>,
    pub readable_count: usize,
    pub readability_pct: f64,
    pub bit_precision: u32,
}

/// Greedy chain: the first level is readable, each later level is readable
/// if it differs from the last readable one by at least `adc_resolution`.
pub fn readability_of_currents(currents: &[f64], adc_resolution: f64) -> ReadabilityReport {
    let mut readable = Vec::with_capacity(currents.len());
    let mut last: Option<f64> = None;
    for &i in currents {
        let ok = match last {
            None => true,
            Some(prev) => (i - prev).abs() >= adc_resolution,
        };
        if ok {
            last = Some(i);
        }
        readable.push(ok);
    }
    let count = readable.iter().filter(|&&b| b).count();
    ReadabilityReport {
        readable_count: count,
        readability_pct: if currents.is_empty() { 0.0 } else { count as f64 / currents.len() as f64 * 100.0 },
        bit_precision: if count == 0 { 0 } else { count.ilog2() },
        readable,
    }
}

pub fn readability(table: &ResolutionTable, adc_resolution: f64) -> ReadabilityReport {
    readability_of_currents(&table.currents(), adc_resolution)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseReport {
    pub case: DesignCase,
    pub table: ResolutionTable,
    pub report: ReadabilityReport,
}

impl CaseReport {
    /// Distinct weight levels a network can use on this cell (at least 2).
    pub fn weight_levels(&self) -> usize {
        self.report.readable_count.max(2)
    }
}

/// Resolution table and readability for all six cases. Every case shares
/// the same device parameters; only geometries differ.
pub fn evaluate_cases(models: &DeviceModels, supplies: &SupplyConfig, adc_resolution: f64) -> Result<Vec<CaseReport>> {
    design_cases()
        .into_iter()
        .map(|case| {
            let syn = Synapse::new(*models, case.sizing);
            let table = resolution_table(&syn, supplies)?;
            let report = readability(&table, adc_resolution);
            Ok(CaseReport { case, table, report })
        })
        .collect()
}

pub fn case_summary_table(reports: &[CaseReport]) -> Table {
    let mut t = Table::new([
        "case",
        "mn1_w_um",
        "mp1_w_um",
        "mn2_w_um",
        "mn2_l_um",
        "readable_count",
        "readability_pct",
        "bit_precision",
        "readable_mask",
    ]);
    for c in reports {
        let s = c.case.sizing;
        let mask: String = c.report.readable.iter().map(|&b| if b { '1' } else { '0' }).collect();
        t.push(vec![
            c.case.id.into(),
            s.mn1.width.into(),
            s.mp1.width.into(),
            s.mn2.width.into(),
            s.mn2.length.into(),
            c.report.readable_count.into(),
            c.report.readability_pct.into(),
            u64::from(c.report.bit_precision).into(),
            mask.into(),
        ]);
    }
    t
}
