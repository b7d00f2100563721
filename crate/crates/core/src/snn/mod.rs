//! Spiking classification harness: how many weight levels a network needs.

pub mod dataset;
pub mod evolve;
pub mod network;
pub mod quantize;

use serde::Serialize;

pub use dataset::{load_dataset, parse_dataset, Dataset, LoadOptions};
pub use evolve::{accuracy, evolve, EncodedSet, EvolveResult, Fitness, TrainConfig};
pub use network::{argmax, encode, CompiledNetwork, Connection, Neuron, SpikingNetwork, Trace};
pub use quantize::{quantize, QuantizationScheme, MAX_LEVELS};

use crate::error::Result;
use crate::table::Table;

/// One evaluated network variant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRow {
    pub dataset: String,
    /// Design case the level count came from, if any.
    pub case: Option<u8>,
    /// `None` for the unquantized network.
    pub levels: Option<usize>,
    pub seed: u64,
    pub train_acc: f64,
    pub test_acc: f64,
}

/// Accuracy of `net` and of its quantized variants. `variants` pairs an
/// optional case id with a level count.
pub fn case_study(
    data: &Dataset,
    net: &SpikingNetwork,
    cfg: &TrainConfig,
    variants: &[(Option<u8>, usize)],
) -> Result<Vec<StudyRow>> {
    let train = EncodedSet::new(data, &data.train, cfg.sim_window, cfg.max_rate);
    let test = EncodedSet::new(data, &data.test, cfg.sim_window, cfg.max_rate);
    let row = |case, levels, n: &SpikingNetwork| StudyRow {
        dataset: data.name.clone(),
        case,
        levels,
        seed: cfg.seed,
        train_acc: accuracy(n, &train),
        test_acc: accuracy(n, &test),
    };
    let mut rows = vec![row(None, None, net)];
    for &(case, levels) in variants {
        let scheme = QuantizationScheme::new(levels.min(MAX_LEVELS), net.w_min, net.w_max)?;
        rows.push(row(case, Some(scheme.levels), &quantize(net, &scheme)));
    }
    Ok(rows)
}

/// Parse and split `text` with `seed`, train with `seed`, and evaluate the
/// variants.
pub fn run_seed(
    source: &str,
    name: &str,
    text: &str,
    load: &LoadOptions,
    cfg: &TrainConfig,
    seed: u64,
    variants: &[(Option<u8>, usize)],
) -> Result<Vec<StudyRow>> {
    let data = parse_dataset(text, source, name, &LoadOptions { seed, ..*load })?;
    let cfg = TrainConfig { seed, ..*cfg };
    let trained = evolve(&data, &cfg)?;
    case_study(&data, &trained.network, &cfg, variants)
}

pub fn study_table(rows: &[StudyRow]) -> Table {
    let mut t = Table::new(["dataset", "case", "levels", "seed", "train_acc", "test_acc"]);
    for r in rows {
        t.push(vec![
            r.dataset.as_str().into(),
            r.case.map(|c| c.to_string()).unwrap_or_else(|| "-".into()).into(),
            r.levels.map(|l| l.to_string()).unwrap_or_else(|| "full".into()).into(),
            r.seed.into(),
            r.train_acc.into(),
            r.test_acc.into(),
        ]);
    }
    t
}

/// Mean test accuracy per level count (`None` = unquantized) across rows.
pub fn mean_test_accuracy(rows: &[StudyRow], levels: Option<usize>) -> f64 {
    let picked: Vec<f64> = rows.iter().filter(|r| r.levels == levels).map(|r| r.test_acc).collect();
    crate::numeric::mean(&picked)
}
