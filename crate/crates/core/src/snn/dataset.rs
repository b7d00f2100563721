//! Tabular classification data: CSV ingestion, stratified split, min-max
//! scaling fitted on the training rows.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoadOptions {
    /// Fraction of each class placed in the training split, in (0, 1].
    pub split_fraction: f64,
    pub seed: u64,
    /// Column holding the class label; `None` means the last column.
    pub label_column: Option<usize>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions { split_fraction: 0.7, seed: 0, label_column: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub feature_names: Vec<String>,
    /// Scaled into [0, 1] with the training-split bounds.
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    /// Original label text, indexed by class.
    pub class_names: Vec<String>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub feature_min: Vec<f64>,
    pub feature_max: Vec<f64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        self.feature_names.len()
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    /// Share of the most common class among `indices`.
    pub fn majority_rate(&self, indices: &[usize]) -> f64 {
        if indices.is_empty() {
            return 0.0;
        }
        let mut counts = vec![0usize; self.class_count()];
        for &i in indices {
            counts[self.labels[i]] += 1;
        }
        *counts.iter().max().unwrap_or(&0) as f64 / indices.len() as f64
    }
}

pub fn load_dataset(path: &Path, name: &str, opts: &LoadOptions) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Ingestion {
        path: path.display().to_string(),
        row: 0,
        message: e.to_string(),
    })?;
    parse_dataset(&text, &path.display().to_string(), name, opts)
}

/// Parse comma-separated records. A first row whose feature fields are not
/// all numeric is taken as the header. Rows are numbered from 1 as they
/// appear in the file.
pub fn parse_dataset(text: &str, source: &str, name: &str, opts: &LoadOptions) -> Result<Dataset> {
    if !(opts.split_fraction > 0.0 && opts.split_fraction <= 1.0) {
        return Err(Error::invalid(format!("split_fraction must be in (0, 1], got {}", opts.split_fraction)));
    }
    let fail = |row: usize, message: String| Error::Ingestion { path: source.to_owned(), row, message };

    let mut reader =
        csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut records = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| fail(k + 1, e.to_string()))?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        records.push((k + 1, rec.iter().map(str::to_owned).collect::<Vec<_>>()));
    }
    let Some((_, first)) = records.first() else {
        return Err(fail(0, "no records".into()));
    };
    let width = first.len();
    if width < 2 {
        return Err(fail(1, "need at least one feature and a label".into()));
    }
    let label_col = opts.label_column.unwrap_or(width - 1);
    if label_col >= width {
        return Err(fail(1, format!("label column {label_col} out of range for {width} columns")));
    }
    let is_numeric_row =
        |fields: &[String]| fields.iter().enumerate().all(|(c, f)| c == label_col || f.parse::<f64>().is_ok());
    let (feature_names, body) = if is_numeric_row(first) {
        let names = (0..width).filter(|&c| c != label_col).map(|c| format!("f{c}")).collect();
        (names, &records[..])
    } else {
        let names = first.iter().enumerate().filter(|&(c, _)| c != label_col).map(|(_, n)| n.clone()).collect();
        (names, &records[1..])
    };

    let mut raw = Vec::with_capacity(body.len());
    let mut label_text = Vec::with_capacity(body.len());
    for (row, fields) in body {
        if fields.len() != width {
            return Err(fail(*row, format!("expected {width} fields, found {}", fields.len())));
        }
        let label = &fields[label_col];
        if label.is_empty() {
            return Err(fail(*row, "missing label".into()));
        }
        let mut x = Vec::with_capacity(width - 1);
        for (c, f) in fields.iter().enumerate().filter(|&(c, _)| c != label_col) {
            let v: f64 = f.parse().map_err(|_| fail(*row, format!("column {c}: '{f}' is not a number")))?;
            if !v.is_finite() {
                return Err(fail(*row, format!("column {c}: non-finite value")));
            }
            x.push(v);
        }
        raw.push(x);
        label_text.push(label.clone());
    }
    if raw.is_empty() {
        return Err(fail(1, "header only, no data rows".into()));
    }

    let class_names = sorted_classes(&label_text);
    if class_names.len() < 2 {
        return Err(fail(body[0].0, format!("only one class ('{}') present", class_names[0])));
    }
    let index: BTreeMap<&str, usize> = class_names.iter().enumerate().map(|(k, c)| (c.as_str(), k)).collect();
    let labels: Vec<usize> = label_text.iter().map(|l| index[l.as_str()]).collect();

    let (train, test) = stratified_split(&labels, class_names.len(), opts.split_fraction, opts.seed);
    let (feature_min, feature_max) = bounds(&raw, &train);
    let features = raw
        .iter()
        .map(|x| {
            x.iter()
                .zip(feature_min.iter().zip(&feature_max))
                .map(|(&v, (&lo, &hi))| if hi > lo { ((v - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.0 })
                .collect()
        })
        .collect();

    Ok(Dataset {
        name: name.to_owned(),
        feature_names,
        features,
        labels,
        class_names,
        train,
        test,
        feature_min,
        feature_max,
    })
}

/// Distinct labels, numerically ordered when they all parse as numbers.
fn sorted_classes(labels: &[String]) -> Vec<String> {
    let mut distinct: Vec<String> = labels.to_vec();
    distinct.sort();
    distinct.dedup();
    if distinct.iter().all(|l| l.parse::<f64>().is_ok()) {
        distinct.sort_by(|a, b| a.parse::<f64>().unwrap().total_cmp(&b.parse::<f64>().unwrap()));
    }
    distinct
}

fn stratified_split(labels: &[usize], classes: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in 0..classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        let take = ((members.len() as f64 * fraction).round() as usize).min(members.len());
        train.extend_from_slice(&members[..take]);
        test.extend_from_slice(&members[take..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

fn bounds(raw: &[Vec<f64>], rows: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let d = raw[0].len();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for &i in rows {
        for (j, &v) in raw[i].iter().enumerate() {
            lo[j] = lo[j].min(v);
            hi[j] = hi[j].max(v);
        }
    }
    (lo, hi)
}
