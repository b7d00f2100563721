//! Experiment configuration file.

use std::path::{Path, PathBuf};

use memsynapse::analysis::{design_case, DEFAULT_ADC_RESOLUTION, VRANGE_PAIR};
use memsynapse::devices::MemristorParams;
use memsynapse::snn::{LoadOptions, TrainConfig};
use memsynapse::solver::{SupplyConfig, SynapseSizing};
use memsynapse::variation::{MismatchParams, SET_RATIO_ANCHOR, SET_RATIO_ANCHOR_GATE};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Calibrate,
    SweepSet,
    SweepRead,
    McSet,
    McRead,
    Readability,
    SnnTrain,
    SnnCases,
    ReportAll,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Calibrate => "calibrate",
            Experiment::SweepSet => "sweep-set",
            Experiment::SweepRead => "sweep-read",
            Experiment::McSet => "mc-set",
            Experiment::McRead => "mc-read",
            Experiment::Readability => "readability",
            Experiment::SnnTrain => "snn-train",
            Experiment::SnnCases => "snn-cases",
            Experiment::ReportAll => "report-all",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub threads: usize,
    /// Root under which run directories are created.
    pub output_dir: PathBuf,
    pub supplies: SupplyConfig,
    pub memristor: MemristorParams,
    pub design: DesignConfig,
    pub sweep: SweepConfig,
    pub monte_carlo: MonteCarloConfig,
    pub readability: ReadabilityConfig,
    pub snn: SnnConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: Experiment::ReportAll,
            seed: 1,
            threads: 1,
            output_dir: PathBuf::from("runs"),
            supplies: SupplyConfig::default(),
            memristor: MemristorParams::default(),
            design: DesignConfig::default(),
            sweep: SweepConfig::default(),
            monte_carlo: MonteCarloConfig::default(),
            readability: ReadabilityConfig::default(),
            snn: SnnConfig::default(),
        }
    }
}

/// Cell sizing for single-design experiments: one of the six design cases,
/// optionally overridden device by device.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DesignConfig {
    pub case: u8,
    pub sizing: SynapseSizing,
}

impl Default for DesignConfig {
    fn default() -> Self {
        DesignConfig { case: 6, sizing: SynapseSizing::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub set_gate_start: f64,
    pub set_gate_stop: f64,
    pub set_gate_points: usize,
    pub read_gate_start: f64,
    pub read_gate_stop: f64,
    pub read_gate_points: usize,
    pub read_pair: [f64; 2],
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            set_gate_start: 0.6,
            set_gate_stop: 1.3,
            set_gate_points: 15,
            read_gate_start: 0.5,
            read_gate_stop: 0.8,
            read_gate_points: 13,
            read_pair: [VRANGE_PAIR.0, VRANGE_PAIR.1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonteCarloConfig {
    pub samples: usize,
    pub set_gates: Vec<f64>,
    pub read_resistances: Vec<f64>,
    /// Fit the IO threshold coefficient to the SET ratio anchor first.
    pub fit_a_vth: bool,
    pub fit_target_ratio: f64,
    pub fit_gate: f64,
    pub mismatch: MismatchParams,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        MonteCarloConfig {
            samples: 5000,
            set_gates: vec![0.7, 0.8, 1.0, 1.2],
            read_resistances: vec![5e3, 25e3, 50e3, 100e3],
            fit_a_vth: true,
            fit_target_ratio: SET_RATIO_ANCHOR,
            fit_gate: SET_RATIO_ANCHOR_GATE,
            mismatch: MismatchParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReadabilityConfig {
    pub adc_resolution: f64,
}

impl Default for ReadabilityConfig {
    fn default() -> Self {
        ReadabilityConfig { adc_resolution: DEFAULT_ADC_RESOLUTION }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub name: String,
    /// Relative paths resolve against the configuration file's directory.
    pub path: PathBuf,
    #[serde(default)]
    pub label_column: Option<usize>,
    pub population: usize,
    pub generations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SnnConfig {
    /// Runs use seeds `seed .. seed + seeds`.
    pub seeds: u64,
    /// Level counts evaluated besides the design cases.
    pub levels: Vec<usize>,
    pub split_fraction: f64,
    pub datasets: Vec<DatasetSpec>,
    /// Shared training settings; `seed` and `workers` are set per run and
    /// population/generations per dataset.
    pub train: TrainConfig,
}

impl Default for SnnConfig {
    fn default() -> Self {
        SnnConfig {
            seeds: 10,
            levels: vec![2, 4, 8, 16],
            split_fraction: 0.7,
            datasets: vec![
                DatasetSpec {
                    name: "wine".into(),
                    path: PathBuf::from("data/wine.csv"),
                    label_column: None,
                    population: 32,
                    generations: 120,
                },
                DatasetSpec {
                    name: "breast_cancer".into(),
                    path: PathBuf::from("data/breast_cancer.csv"),
                    label_column: None,
                    population: 24,
                    generations: 60,
                },
            ],
            train: TrainConfig::default(),
        }
    }
}

impl SnnConfig {
    pub fn train_for(&self, spec: &DatasetSpec, seed: u64, workers: usize) -> TrainConfig {
        TrainConfig { seed, workers, population: spec.population, generations: spec.generations, ..self.train }
    }

    pub fn load_options(&self, spec: &DatasetSpec, seed: u64) -> LoadOptions {
        LoadOptions { split_fraction: self.split_fraction, seed, label_column: spec.label_column }
    }
}

fn field(key: &str, r: memsynapse::Result<()>) -> Result<(), CliError> {
    r.map_err(|e| CliError::Invalid(format!("{key}: {e}")))
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Invalid(format!("configuration: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for d in &mut cfg.snn.datasets {
            if d.path.is_relative() {
                d.path = base.join(&d.path);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string_pretty(self).map_err(|e| CliError::Invalid(format!("cannot serialize configuration: {e}")))
    }

    /// Sizing of the selected design with per-device overrides applied.
    pub fn sizing(&self) -> Result<SynapseSizing, CliError> {
        let case = design_case(self.design.case).map_err(|e| CliError::Invalid(format!("design.case: {e}")))?;
        let default = SynapseSizing::default();
        let pick = |over, base, case_val| if over != base { over } else { case_val };
        Ok(SynapseSizing {
            mp1: pick(self.design.sizing.mp1, default.mp1, case.sizing.mp1),
            mn1: pick(self.design.sizing.mn1, default.mn1, case.sizing.mn1),
            mn2: pick(self.design.sizing.mn2, default.mn2, case.sizing.mn2),
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.threads == 0 {
            return Err(CliError::Invalid("threads: must be at least 1".into()));
        }
        field("supplies", self.supplies.validate())?;
        field("memristor", self.memristor.validate())?;
        for (name, g) in [
            ("design.sizing.mp1", &self.design.sizing.mp1),
            ("design.sizing.mn1", &self.design.sizing.mn1),
            ("design.sizing.mn2", &self.design.sizing.mn2),
        ] {
            field(name, g.validate())?;
        }
        self.sizing()?;
        let s = &self.sweep;
        if s.set_gate_points == 0 || s.read_gate_points == 0 {
            return Err(CliError::Invalid("sweep: point counts must be positive".into()));
        }
        if !(s.read_pair[0] > 0.0 && s.read_pair[1] > 0.0) {
            return Err(CliError::Invalid("sweep.read_pair: resistances must be positive".into()));
        }
        let mc = &self.monte_carlo;
        field("monte_carlo.mismatch", mc.mismatch.validate())?;
        if mc.samples < memsynapse::variation::MIN_SAMPLES {
            return Err(CliError::Invalid(format!(
                "monte_carlo.samples: need at least {}, got {}",
                memsynapse::variation::MIN_SAMPLES,
                mc.samples
            )));
        }
        if !(self.readability.adc_resolution >= 0.0) {
            return Err(CliError::Invalid("readability.adc_resolution: must be non-negative".into()));
        }
        let snn = &self.snn;
        if snn.levels.iter().any(|l| !(2..=16).contains(l)) {
            return Err(CliError::Invalid("snn.levels: each level count must be in 2..=16".into()));
        }
        if !(snn.split_fraction > 0.0 && snn.split_fraction <= 1.0) {
            return Err(CliError::Invalid("snn.split_fraction: must be in (0, 1]".into()));
        }
        for d in &snn.datasets {
            field(&format!("snn.datasets.{}", d.name), snn.train_for(d, 0, 1).validate())?;
        }
        Ok(())
    }
}
