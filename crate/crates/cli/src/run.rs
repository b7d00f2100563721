//! Experiment execution and run-directory bookkeeping.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use memsynapse::analysis::{
    case_summary_table, evaluate_cases, linspace, read_power_energy, read_sweep_table, resolution_table,
    set_sweep_table, sweep_read, sweep_set,
};
use memsynapse::devices::{drain_current, MosfetGeometry, MosfetParams, IO_ANCHORS, IO_ANCHOR_VDS};
use memsynapse::snn::{self, StudyRow};
use memsynapse::solver::{level_resistances, solve_read_point, DeviceModels, Synapse};
use memsynapse::table::{Cell, Table};
use memsynapse::variation::{calibrate_a_vth, McStats, MismatchParams, MonteCarlo};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{Experiment, ExperimentConfig};
use crate::CliError;

/// Everything produced by one invocation.
#[derive(Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub files: Vec<String>,
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    dir: PathBuf,
    files: Vec<String>,
    models: Option<DeviceModels>,
    mismatch: Option<MismatchParams>,
    inputs: Vec<(String, Vec<u8>)>,
}

impl Context<'_> {
    fn emit(&mut self, stem: &str, table: &Table) -> Result<(), CliError> {
        table.write_files(&self.dir, stem)?;
        self.files.push(format!("{stem}.csv"));
        self.files.push(format!("{stem}.dat"));
        Ok(())
    }

    fn models(&mut self) -> Result<DeviceModels, CliError> {
        if self.models.is_none() {
            self.models = Some(DeviceModels::calibrate(self.cfg.memristor, &self.cfg.supplies)?);
        }
        Ok(self.models.unwrap())
    }

    fn synapse(&mut self) -> Result<Synapse, CliError> {
        Ok(Synapse::new(self.models()?, self.cfg.sizing()?))
    }

    fn monte_carlo(&mut self) -> Result<MonteCarlo, CliError> {
        let syn = self.synapse()?;
        let mc_cfg = &self.cfg.monte_carlo;
        let base = MonteCarlo::new(syn, self.cfg.supplies, mc_cfg.mismatch).with_workers(self.cfg.threads);
        if self.mismatch.is_none() {
            let mismatch = if mc_cfg.fit_a_vth {
                let fit =
                    calibrate_a_vth(&base, mc_cfg.fit_target_ratio, mc_cfg.fit_gate, mc_cfg.samples, self.cfg.seed)?;
                let mut t = Table::new([
                    "a_vth_io_mv_um",
                    "a_vth_core_mv_um",
                    "a_beta_pct_um",
                    "set_gate_v",
                    "ratio",
                    "evaluations",
                ]);
                t.push(vec![
                    fit.mismatch.a_vth_io.into(),
                    fit.mismatch.a_vth_core.into(),
                    fit.mismatch.a_beta.into(),
                    mc_cfg.fit_gate.into(),
                    fit.stats.ratio.into(),
                    fit.evaluations.into(),
                ]);
                self.emit("mismatch_fit", &t)?;
                fit.mismatch
            } else {
                mc_cfg.mismatch
            };
            self.mismatch = Some(mismatch);
        }
        Ok(MonteCarlo { mismatch: self.mismatch.unwrap(), ..base })
    }

    fn read_input(&mut self, path: &Path) -> Result<String, CliError> {
        let bytes = fs::read(path).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
        let text =
            String::from_utf8(bytes.clone()).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
        self.inputs.push((path.display().to_string(), bytes));
        Ok(text)
    }
}

fn params_row(t: &mut Table, device: &str, p: &MosfetParams) {
    t.push(vec![
        device.into(),
        format!("{:?}", p.polarity).to_lowercase().into(),
        p.vth.into(),
        p.k_prime.into(),
        p.n_slope.into(),
        p.lambda.into(),
        p.v_thermal.into(),
    ]);
}

fn calibrate(ctx: &mut Context) -> Result<(), CliError> {
    let m = ctx.models()?;
    let mut t =
        Table::new(["device", "polarity", "vth_v", "k_prime_a_per_v2", "n_slope", "lambda_per_v", "v_thermal_v"]);
    params_row(&mut t, "mn1", &m.nmos_io);
    params_row(&mut t, "mp1", &m.pmos_io);
    params_row(&mut t, "mn2", &m.nmos_read);
    ctx.emit("calibration", &t)?;

    let mut a = Table::new(["vgs_v", "vds_v", "target_amp", "model_amp", "rel_error"]);
    let anchor_params = MosfetParams { lambda: 0.0, ..m.nmos_io };
    for anchor in IO_ANCHORS {
        let id = drain_current(&anchor_params, &MosfetGeometry::MN1, anchor.vgs, IO_ANCHOR_VDS)?;
        a.push(vec![
            anchor.vgs.into(),
            IO_ANCHOR_VDS.into(),
            anchor.current.into(),
            id.into(),
            ((id - anchor.current) / anchor.current).into(),
        ]);
    }
    ctx.emit("calibration_anchors", &a)?;

    let mut r = Table::new(["r_hrs_ohm", "r_min_ohm", "r_max_ohm", "alpha", "sigma0_ohm", "gamma"]);
    let mem = m.memristor;
    r.push(vec![
        mem.r_hrs.into(),
        mem.r_min.into(),
        mem.r_max.into(),
        mem.alpha().into(),
        mem.sigma0.into(),
        mem.gamma.into(),
    ]);
    ctx.emit("memristor", &r)
}

fn sweep_set_exp(ctx: &mut Context) -> Result<(), CliError> {
    let syn = ctx.synapse()?;
    let s = &ctx.cfg.sweep;
    let gates = linspace(s.set_gate_start, s.set_gate_stop, s.set_gate_points);
    let rows = sweep_set(&syn, &ctx.cfg.supplies, &gates)?;
    ctx.emit("sweep_set", &set_sweep_table(&rows))
}

fn sweep_read_exp(ctx: &mut Context) -> Result<(), CliError> {
    let syn = ctx.synapse()?;
    let supplies = ctx.cfg.supplies;
    let s = ctx.cfg.sweep.clone();
    let gates = linspace(s.read_gate_start, s.read_gate_stop, s.read_gate_points);
    let rows = sweep_read(&syn, &supplies, &gates, (s.read_pair[0], s.read_pair[1]))?;
    ctx.emit("sweep_read", &read_sweep_table(&rows))?;

    let mut levels = Table::new(["level_ohm", "v_mem_top_v", "v_mem_bot_v", "i1_amp", "i2_amp", "power_w", "energy_j"]);
    for r in level_resistances() {
        let op = solve_read_point(&syn, &supplies, r)?;
        let p = supplies.read_power(&op);
        levels.push(vec![
            r.into(),
            op.v_mem_top.into(),
            op.v_mem_bot.into(),
            op.i_stage1.into(),
            op.i_stage2.into(),
            p.into(),
            supplies.energy(p).into(),
        ]);
    }
    ctx.emit("read_levels", &levels)?;

    let rp = read_power_energy(&syn, &supplies)?;
    let mut t = Table::new(["avg_power_w", "avg_energy_j", "mean_i1_amp", "mean_i2_amp"]);
    t.push(vec![rp.avg_power.into(), rp.avg_energy.into(), rp.mean_i_stage1.into(), rp.mean_i_stage2.into()]);
    ctx.emit("read_power", &t)
}

fn stats_row(key: f64, s: &McStats) -> Vec<Cell> {
    vec![key.into(), s.n.into(), s.failures.into(), s.mean.into(), s.std_dev.into(), s.ratio.into()]
}

fn histogram_rows(t: &mut Table, key: f64, s: &McStats) {
    for (k, &count) in s.histogram.counts.iter().enumerate() {
        t.push(vec![key.into(), s.histogram.edges[k].into(), s.histogram.edges[k + 1].into(), count.into()]);
    }
}

fn mc_set_exp(ctx: &mut Context) -> Result<(), CliError> {
    let mc = ctx.monte_carlo()?;
    let mut t = Table::new(["v_gate_v", "n", "failures", "mean_amp", "std_amp", "ratio"]);
    let mut h = Table::new(["v_gate_v", "bin_lo_amp", "bin_hi_amp", "count"]);
    for &v in &ctx.cfg.monte_carlo.set_gates {
        let s = mc.mc_set(ctx.cfg.monte_carlo.samples, v, ctx.cfg.seed)?;
        t.push(stats_row(v, &s));
        histogram_rows(&mut h, v, &s);
    }
    ctx.emit("mc_set", &t)?;
    ctx.emit("mc_set_histogram", &h)
}

fn mc_read_exp(ctx: &mut Context) -> Result<(), CliError> {
    let mc = ctx.monte_carlo()?;
    let mut t = Table::new(["resistance_ohm", "n", "failures", "mean_amp", "std_amp", "ratio"]);
    let mut h = Table::new(["resistance_ohm", "bin_lo_amp", "bin_hi_amp", "count"]);
    for &r in &ctx.cfg.monte_carlo.read_resistances {
        let s = mc.mc_read(ctx.cfg.monte_carlo.samples, r, ctx.cfg.seed)?;
        t.push(stats_row(r, &s));
        histogram_rows(&mut h, r, &s);
    }
    ctx.emit("mc_read", &t)?;
    ctx.emit("mc_read_histogram", &h)
}

fn readability_exp(ctx: &mut Context) -> Result<Vec<(u8, usize)>, CliError> {
    let models = ctx.models()?;
    let reports = evaluate_cases(&models, &ctx.cfg.supplies, ctx.cfg.readability.adc_resolution)?;
    for c in &reports {
        ctx.emit(&format!("resolution_case{}", c.case.id), &c.table.to_table(Some(&c.report)))?;
    }
    ctx.emit("readability", &case_summary_table(&reports))?;
    // the selected design, if overridden, is reported separately
    let syn = ctx.synapse()?;
    if syn.sizing != memsynapse::analysis::design_case(ctx.cfg.design.case)?.sizing {
        let table = resolution_table(&syn, &ctx.cfg.supplies)?;
        let report = memsynapse::analysis::readability(&table, ctx.cfg.readability.adc_resolution);
        ctx.emit("resolution_custom", &table.to_table(Some(&report)))?;
    }
    Ok(reports.iter().map(|c| (c.case.id, c.weight_levels())).collect())
}

fn snn_runs(ctx: &mut Context, variants: &[(Option<u8>, usize)]) -> Result<Vec<StudyRow>, CliError> {
    let snn_cfg = ctx.cfg.snn.clone();
    let mut rows = Vec::new();
    for spec in &snn_cfg.datasets {
        let text = ctx.read_input(&spec.path)?;
        let source = spec.path.display().to_string();
        for seed in ctx.cfg.seed..ctx.cfg.seed + snn_cfg.seeds {
            let train = snn_cfg.train_for(spec, seed, ctx.cfg.threads);
            let load = snn_cfg.load_options(spec, seed);
            rows.extend(snn::run_seed(&source, &spec.name, &text, &load, &train, seed, variants)?);
        }
    }
    Ok(rows)
}

fn snn_train_exp(ctx: &mut Context) -> Result<(), CliError> {
    let rows = snn_runs(ctx, &[])?;
    ctx.emit("snn_train", &snn::study_table(&rows))
}

fn snn_cases_exp(ctx: &mut Context, case_levels: Option<Vec<(u8, usize)>>) -> Result<(), CliError> {
    let case_levels = match case_levels {
        Some(c) => c,
        None => {
            let models = ctx.models()?;
            evaluate_cases(&models, &ctx.cfg.supplies, ctx.cfg.readability.adc_resolution)?
                .iter()
                .map(|c| (c.case.id, c.weight_levels()))
                .collect()
        }
    };
    let mut variants: Vec<(Option<u8>, usize)> = case_levels.iter().map(|&(id, l)| (Some(id), l)).collect();
    variants.extend(ctx.cfg.snn.levels.iter().map(|&l| (None, l)));
    let rows = snn_runs(ctx, &variants)?;
    ctx.emit("snn_cases", &snn::study_table(&rows))?;

    let mut summary = Table::new(["dataset", "levels", "mean_test_acc", "seeds"]);
    for spec in &ctx.cfg.snn.datasets {
        let mine: Vec<StudyRow> = rows.iter().filter(|r| r.dataset == spec.name && r.case.is_none()).cloned().collect();
        let mut keys: Vec<Option<usize>> = vec![None];
        keys.extend(ctx.cfg.snn.levels.iter().map(|&l| Some(l)));
        for key in keys {
            summary.push(vec![
                spec.name.as_str().into(),
                key.map(|l| l.to_string()).unwrap_or_else(|| "full".into()).into(),
                snn::mean_test_accuracy(&mine, key).into(),
                ctx.cfg.snn.seeds.into(),
            ]);
        }
    }
    ctx.emit("snn_levels_summary", &summary)
}

fn execute(ctx: &mut Context) -> Result<(), CliError> {
    match ctx.cfg.experiment {
        Experiment::Calibrate => calibrate(ctx),
        Experiment::SweepSet => sweep_set_exp(ctx),
        Experiment::SweepRead => sweep_read_exp(ctx),
        Experiment::McSet => mc_set_exp(ctx),
        Experiment::McRead => mc_read_exp(ctx),
        Experiment::Readability => readability_exp(ctx).map(|_| ()),
        Experiment::SnnTrain => snn_train_exp(ctx),
        Experiment::SnnCases => snn_cases_exp(ctx, None),
        Experiment::ReportAll => {
            calibrate(ctx)?;
            sweep_set_exp(ctx)?;
            sweep_read_exp(ctx)?;
            mc_set_exp(ctx)?;
            mc_read_exp(ctx)?;
            let levels = readability_exp(ctx)?;
            snn_cases_exp(ctx, Some(levels))
        }
    }
}

/// Fresh directory `<root>/<experiment>-seed<seed>-<NNNN>`; existing runs are
/// never touched.
fn allocate_run_dir(root: &Path, cfg: &ExperimentConfig) -> Result<PathBuf, CliError> {
    fs::create_dir_all(root).map_err(|e| CliError::Io(format!("{}: {e}", root.display())))?;
    for k in 1..=9999 {
        let dir = root.join(format!("{}-seed{}-{k:04}", cfg.experiment.name(), cfg.seed));
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(CliError::Io(format!("{}: {e}", dir.display()))),
        }
    }
    Err(CliError::Io(format!("{}: no free run directory", root.display())))
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Serialize)]
struct OutputEntry {
    file: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    experiment: &'static str,
    seed: u64,
    threads: usize,
    input_sha256: String,
    inputs: Vec<OutputEntry>,
    outputs: Vec<OutputEntry>,
    started_unix_s: u64,
    wall_time_s: f64,
    status: String,
}

/// Validate, run, and record one experiment. On failure the run directory
/// still receives the resolved configuration and a manifest with the error.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome, CliError> {
    cfg.validate()?;
    let resolved = cfg.to_toml()?;
    let dir = allocate_run_dir(&cfg.output_dir, cfg)?;
    fs::write(dir.join("config.resolved.toml"), &resolved)?;

    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let clock = Instant::now();
    let mut ctx =
        Context { cfg, dir: dir.clone(), files: Vec::new(), models: None, mismatch: None, inputs: Vec::new() };
    let result = execute(&mut ctx);

    let mut hasher = Sha256::new();
    hasher.update(resolved.as_bytes());
    for (_, bytes) in &ctx.inputs {
        hasher.update(bytes);
    }
    let outputs = ctx
        .files
        .iter()
        .map(|f| Ok(OutputEntry { file: f.clone(), sha256: sha256_hex(&fs::read(dir.join(f))?) }))
        .collect::<Result<Vec<_>, CliError>>()?;
    let manifest = Manifest {
        tool: "memsynapse",
        version: env!("CARGO_PKG_VERSION"),
        experiment: cfg.experiment.name(),
        seed: cfg.seed,
        threads: cfg.threads,
        input_sha256: hex::encode(hasher.finalize()),
        inputs: ctx.inputs.iter().map(|(p, b)| OutputEntry { file: p.clone(), sha256: sha256_hex(b) }).collect(),
        outputs,
        started_unix_s: started,
        wall_time_s: clock.elapsed().as_secs_f64(),
        status: match &result {
            Ok(()) => "ok".into(),
            Err(e) => format!("error: {e}"),
        },
    };
    let mut f = fs::File::create(dir.join("manifest.json"))?;
    serde_json::to_writer_pretty(&mut f, &manifest).map_err(|e| CliError::Io(e.to_string()))?;
    f.write_all(b"\n")?;
    result?;
    Ok(RunOutcome { dir, files: ctx.files })
}
