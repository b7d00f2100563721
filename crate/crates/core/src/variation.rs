//! Seeded Monte Carlo over transistor mismatch and memristor spread.
//!
//! Every random quantity is addressed by `(seed, sample index, device)`: a
//! ChaCha8 stream is selected by the sample index and each device reads a
//! fixed block of that stream. Any sample can therefore be regenerated in
//! isolation, and results do not depend on how samples are spread over
//! worker threads.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::devices::{stochastic_lrs, MemristorState, MosfetParams};
use crate::error::{Error, Result};
use crate::numeric::{mean, std_dev};
use crate::parallel::run_indexed;
use crate::solver::{apply_set, solve_read_point, SupplyConfig, Synapse, SynapseSizing};

/// Threshold-mismatch coefficient of the thin-oxide read device relative to
/// the thick-oxide IO devices (ratio of oxide thicknesses).
pub const CORE_TO_IO_VTH_RATIO: f64 = 0.5;

pub const HISTOGRAM_BINS: usize = 50;
/// Histogram half-width in standard deviations.
pub const HISTOGRAM_SPAN: f64 = 5.0;

/// Fraction of failed samples above which a run is rejected.
pub const MAX_FAILURE_FRACTION: f64 = 0.01;

pub const MIN_SAMPLES: usize = 100;

/// SET ratio anchor used to fit the IO threshold coefficient.
pub const SET_RATIO_ANCHOR: f64 = 0.0974;
pub const SET_RATIO_ANCHOR_GATE: f64 = 1.2;

/// Area-law mismatch coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MismatchParams {
    /// Threshold coefficient of IO devices (MP1, MN1), mV*um.
    pub a_vth_io: f64,
    /// Threshold coefficient of the core read device (MN2), mV*um.
    pub a_vth_core: f64,
    /// Current-factor coefficient, %*um.
    pub a_beta: f64,
    pub include_memristor_noise: bool,
}

impl Default for MismatchParams {
    fn default() -> Self {
        MismatchParams::from_io_coefficient(DEFAULT_A_VTH_IO)
    }
}

/// Result of [`calibrate_a_vth`] with the default seed and 5000 samples.
pub const DEFAULT_A_VTH_IO: f64 = 46.41;

impl MismatchParams {
    pub fn zero() -> Self {
        MismatchParams { a_vth_io: 0.0, a_vth_core: 0.0, a_beta: 0.0, include_memristor_noise: false }
    }

    /// IO coefficient `a_vth_io`, core coefficient at the fixed oxide ratio,
    /// 1 %*um current-factor mismatch.
    pub fn from_io_coefficient(a_vth_io: f64) -> Self {
        MismatchParams {
            a_vth_io,
            a_vth_core: a_vth_io * CORE_TO_IO_VTH_RATIO,
            a_beta: 1.0,
            include_memristor_noise: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.a_vth_io >= 0.0 && self.a_vth_core >= 0.0 && self.a_beta >= 0.0 {
            Ok(())
        } else {
            Err(Error::invalid(format!("mismatch coefficients must be non-negative: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum DeviceId {
    Mp1 = 0,
    Mn1 = 1,
    Mn2 = 2,
    Memristor = 3,
}

/// 32-bit words of the per-sample stream reserved for each device.
const WORDS_PER_DEVICE: u128 = 16;

/// Two independent unit normals for `(seed, index, device)` (Box-Muller on
/// exactly two 64-bit words, so consumption is fixed).
pub fn unit_normals(seed: u64, index: u64, device: DeviceId) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng.set_word_pos(device as u128 * WORDS_PER_DEVICE);
    let a = rng.next_u64();
    let b = rng.next_u64();
    // u1 in (0, 1], u2 in [0, 1)
    let u1 = ((a >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
    let u2 = (b >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    let r = (-2.0 * u1.ln()).sqrt();
    let theta = 2.0 * std::f64::consts::PI * u2;
    (r * theta.cos(), r * theta.sin())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceDelta {
    /// Threshold shift, volts.
    pub delta_vth: f64,
    /// Multiplier on k'.
    pub k_factor: f64,
}

impl DeviceDelta {
    pub fn apply(&self, params: &MosfetParams) -> MosfetParams {
        params.perturbed(self.delta_vth, self.k_factor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleDraw {
    pub mp1: DeviceDelta,
    pub mn1: DeviceDelta,
    pub mn2: DeviceDelta,
    pub memristor_noise: Option<f64>,
}

/// Pelgrom sigmas `(sigma_vth [V], sigma_k / k)` for a device of `area` um^2.
pub fn area_law_sigmas(a_vth: f64, a_beta: f64, area: f64) -> (f64, f64) {
    let s = area.sqrt();
    (a_vth * 1e-3 / s, a_beta * 1e-2 / s)
}

pub fn draw_sample(mismatch: &MismatchParams, sizing: &SynapseSizing, seed: u64, index: u64) -> SampleDraw {
    let delta = |device: DeviceId, a_vth: f64, area: f64| {
        let (z_vth, z_k) = unit_normals(seed, index, device);
        let (s_vth, s_k) = area_law_sigmas(a_vth, mismatch.a_beta, area);
        DeviceDelta { delta_vth: z_vth * s_vth, k_factor: 1.0 + z_k * s_k }
    };
    SampleDraw {
        mp1: delta(DeviceId::Mp1, mismatch.a_vth_io, sizing.mp1.area()),
        mn1: delta(DeviceId::Mn1, mismatch.a_vth_io, sizing.mn1.area()),
        mn2: delta(DeviceId::Mn2, mismatch.a_vth_core, sizing.mn2.area()),
        memristor_noise: mismatch.include_memristor_noise.then(|| unit_normals(seed, index, DeviceId::Memristor).0),
    }
}

pub fn perturbed_synapse(syn: &Synapse, draw: &SampleDraw) -> Synapse {
    let mut out = *syn;
    out.models.pmos_io = draw.mp1.apply(&syn.models.pmos_io);
    out.models.nmos_io = draw.mn1.apply(&syn.models.nmos_io);
    out.models.nmos_read = draw.mn2.apply(&syn.models.nmos_read);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    /// `HISTOGRAM_BINS + 1` ascending edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// Uniform bins over `center +- HISTOGRAM_SPAN * sigma`; values outside
    /// land in the end bins so counts always sum to the sample count.
    pub fn build(values: &[f64], center: f64, sigma: f64) -> Histogram {
        let half = if sigma > 0.0 {
            HISTOGRAM_SPAN * sigma
        } else {
            // degenerate distribution: a vanishing window around the center
            center.abs().max(f64::MIN_POSITIVE) * 1e-9
        };
        let lo = center - half;
        let width = 2.0 * half / HISTOGRAM_BINS as f64;
        let edges = (0..=HISTOGRAM_BINS).map(|k| lo + k as f64 * width).collect();
        let mut counts = vec![0; HISTOGRAM_BINS];
        for &v in values {
            let bin = ((v - lo) / width).floor();
            let bin = if bin.is_nan() { 0.0 } else { bin.clamp(0.0, (HISTOGRAM_BINS - 1) as f64) };
            counts[bin as usize] += 1;
        }
        Histogram { edges, counts }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McStats {
    pub n: usize,
    pub failures: usize,
    pub mean: f64,
    pub std_dev: f64,
    /// `std_dev / mean`.
    pub ratio: f64,
    pub histogram: Histogram,
}

impl McStats {
    pub fn from_values(values: &[f64], failures: usize) -> McStats {
        let m = mean(values);
        let s = std_dev(values);
        McStats {
            n: values.len(),
            failures,
            mean: m,
            std_dev: s,
            ratio: if m > 0.0 { s / m } else { f64::NAN },
            histogram: Histogram::build(values, m, s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SetSample {
    pub compliance_current: f64,
    pub resistance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadSample {
    pub i_stage1: f64,
    pub i_stage2: f64,
    pub resistance: f64,
}

fn split_failures<T>(results: Vec<Result<T>>) -> Result<(Vec<T>, usize)> {
    let total = results.len();
    let mut ok = Vec::with_capacity(total);
    let mut first = None;
    let mut failed = 0;
    for r in results {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => {
                failed += 1;
                first.get_or_insert_with(|| e.to_string());
            }
        }
    }
    if failed as f64 > MAX_FAILURE_FRACTION * total as f64 {
        return Err(Error::MonteCarlo { failed, total, first: first.unwrap_or_default() });
    }
    Ok((ok, failed))
}

/// Monte Carlo driver for one synapse design.
#[derive(Debug, Clone, Copy)]
pub struct MonteCarlo {
    pub synapse: Synapse,
    pub supplies: SupplyConfig,
    pub mismatch: MismatchParams,
    pub workers: usize,
}

impl MonteCarlo {
    pub fn new(synapse: Synapse, supplies: SupplyConfig, mismatch: MismatchParams) -> Self {
        MonteCarlo { synapse, supplies, mismatch, workers: 1 }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }

    fn check(&self, n: usize) -> Result<()> {
        if n < MIN_SAMPLES {
            return Err(Error::invalid(format!("Monte Carlo needs at least {MIN_SAMPLES} samples, got {n}")));
        }
        self.mismatch.validate()?;
        self.supplies.validate()
    }

    /// One SET from HRS per sample.
    pub fn set_samples(&self, n: usize, v_set_gate: f64, seed: u64) -> Result<(Vec<SetSample>, usize)> {
        self.check(n)?;
        let results = run_indexed(self.workers, n, |index| {
            let draw = draw_sample(&self.mismatch, &self.synapse.sizing, seed, index);
            let syn = perturbed_synapse(&self.synapse, &draw);
            let hrs = MemristorState::hrs(&syn.models.memristor);
            let out = apply_set(&hrs, &syn, &self.supplies, v_set_gate)?;
            let resistance = match draw.memristor_noise {
                Some(z) => stochastic_lrs(&syn.models.memristor, out.state.resistance, z)?,
                None => out.state.resistance,
            };
            Ok(SetSample { compliance_current: out.compliance_current, resistance })
        })?;
        split_failures(results)
    }

    /// Statistics of the SET compliance current.
    pub fn mc_set(&self, n: usize, v_set_gate: f64, seed: u64) -> Result<McStats> {
        let (samples, failures) = self.set_samples(n, v_set_gate, seed)?;
        let currents: Vec<f64> = samples.iter().map(|s| s.compliance_current).collect();
        Ok(McStats::from_values(&currents, failures))
    }

    /// One READ at a fixed programmed resistance per sample.
    pub fn read_samples(&self, n: usize, memristor_r: f64, seed: u64) -> Result<(Vec<ReadSample>, usize)> {
        self.check(n)?;
        let results = run_indexed(self.workers, n, |index| {
            let draw = draw_sample(&self.mismatch, &self.synapse.sizing, seed, index);
            let syn = perturbed_synapse(&self.synapse, &draw);
            let mem = &syn.models.memristor;
            let r = match draw.memristor_noise {
                Some(z) if (mem.r_min..=mem.r_max).contains(&memristor_r) => stochastic_lrs(mem, memristor_r, z)?,
                _ => memristor_r,
            };
            let op = solve_read_point(&syn, &self.supplies, r)?;
            Ok(ReadSample { i_stage1: op.i_stage1, i_stage2: op.i_stage2, resistance: r })
        })?;
        split_failures(results)
    }

    /// Statistics of the second-stage READ current.
    pub fn mc_read(&self, n: usize, memristor_r: f64, seed: u64) -> Result<McStats> {
        let (samples, failures) = self.read_samples(n, memristor_r, seed)?;
        let currents: Vec<f64> = samples.iter().map(|s| s.i_stage2).collect();
        Ok(McStats::from_values(&currents, failures))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AvthFit {
    pub mismatch: MismatchParams,
    pub stats: McStats,
    pub evaluations: usize,
}

/// Fit the IO threshold coefficient so the SET current spread at
/// `v_set_gate` has the target std/mean ratio. The core coefficient follows
/// at [`CORE_TO_IO_VTH_RATIO`]; `a_beta` and the noise flag are kept.
///
/// Secant iteration on a common-random-numbers objective (same seed for
/// every trial), which makes the ratio a smooth increasing function of the
/// coefficient.
pub fn calibrate_a_vth(base: &MonteCarlo, target_ratio: f64, v_set_gate: f64, n: usize, seed: u64) -> Result<AvthFit> {
    const RATIO_TOL: f64 = 5e-5;
    const MAX_EVALS: usize = 25;
    if !(target_ratio > 0.0) {
        return Err(Error::invalid("target ratio must be positive"));
    }
    let eval = |a: f64| -> Result<(MismatchParams, McStats)> {
        let mismatch = MismatchParams { a_vth_io: a, a_vth_core: a * CORE_TO_IO_VTH_RATIO, ..base.mismatch };
        let mc = MonteCarlo { mismatch, ..*base };
        Ok((mismatch, mc.mc_set(n, v_set_gate, seed)?))
    };

    let mut x0 = if base.mismatch.a_vth_io > 0.0 { base.mismatch.a_vth_io } else { DEFAULT_A_VTH_IO };
    let (mut m0, mut s0) = eval(x0)?;
    let mut evals = 1;
    if (s0.ratio - target_ratio).abs() < RATIO_TOL {
        return Ok(AvthFit { mismatch: m0, stats: s0, evaluations: evals });
    }
    // proportional first guess
    let mut x1 = (x0 * target_ratio / s0.ratio).clamp(0.0, 1e3);
    loop {
        let (m1, s1) = eval(x1)?;
        evals += 1;
        let f1 = s1.ratio - target_ratio;
        if f1.abs() < RATIO_TOL {
            return Ok(AvthFit { mismatch: m1, stats: s1, evaluations: evals });
        }
        if evals >= MAX_EVALS {
            return Err(Error::Calibration {
                reason: "mismatch coefficient search did not reach the target ratio".into(),
                iterations: evals,
                residuals: vec![f1],
            });
        }
        let f0 = s0.ratio - target_ratio;
        let slope = (f1 - f0) / (x1 - x0);
        let next = if slope > 0.0 && slope.is_finite() { x1 - f1 / slope } else { x1 * target_ratio / s1.ratio };
        (x0, m0, s0) = (x1, m1, s1);
        x1 = next.clamp(0.0, 1e3);
        let _ = &m0;
    }
}
