//! Benchmark datasets: CSV ingestion, the two bundled word/sentence-pair
//! benchmarks, seeded train/validation splits and published reference
//! scores.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const MC30_CSV: &str = include_str!("../data/mc30.csv");
const GERESID50_CSV: &str = include_str!("../data/geresid50.csv");

pub const BUNDLED: [&str; 2] = ["mc30", "geresid50"];
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.7;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("no `response` column in header")]
    MissingResponseColumn,
    #[error("row {row}, column `{column}`: `{value}` is not a number")]
    NonNumericCell { row: usize, column: String, value: String },
    #[error("row {row} has {found} fields, header has {expected}")]
    RaggedRow { row: usize, expected: usize, found: usize },
    #[error("row {row}, column `{column}`: value is not finite")]
    NonFinite { row: usize, column: String },
    #[error("dataset has no feature columns")]
    NoFeatures,
    #[error("truth value {value} at row {row} is outside [0, 1]")]
    TruthOutOfRange { row: usize, value: f64 },
    #[error("unknown dataset `{0}` (bundled: mc30, geresid50)")]
    UnknownDataset(String),
    #[error("split of {rows} rows at fraction {fraction} leaves one side empty")]
    SplitTooSmall { rows: usize, fraction: f64 },
    #[error("train fraction must lie strictly between 0 and 1, got {0}")]
    BadFraction(f64),
    #[error("split index {index} out of range for {rows} rows")]
    BadSplit { index: usize, rows: usize },
    #[error("matrix rows have unequal lengths")]
    Ragged,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Column-major matrix of feature values.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n_rows: usize,
    columns: Vec<Vec<f64>>,
}

impl FeatureMatrix {
    pub fn from_columns(columns: Vec<Vec<f64>>) -> Result<Self, DataError> {
        let n_rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != n_rows) {
            return Err(DataError::Ragged);
        }
        Ok(Self { n_rows, columns })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, DataError> {
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(DataError::Ragged);
        }
        let columns = (0..n_cols).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        Ok(Self {
            n_rows: rows.len(),
            columns,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            n_rows: rows.len(),
            columns: self
                .columns
                .iter()
                .map(|c| rows.iter().map(|&i| c[i]).collect())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub case_ids: Vec<String>,
    pub truth: Vec<f64>,
    pub feature_names: Vec<String>,
    pub features: FeatureMatrix,
}

impl Dataset {
    pub fn n_rows(&self) -> usize {
        self.truth.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.n_cols()
    }

    pub fn row_of(&self, case_id: &str) -> Option<usize> {
        self.case_ids.iter().position(|c| c == case_id)
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|c| c == name)
    }

    /// Subset of rows, in the given order.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            case_ids: rows.iter().map(|&i| self.case_ids[i].clone()).collect(),
            truth: rows.iter().map(|&i| self.truth[i]).collect(),
            feature_names: self.feature_names.clone(),
            features: self.features.select_rows(rows),
        }
    }

    pub fn training(&self, split: &DatasetSplit) -> Dataset {
        self.subset(&split.train)
    }

    pub fn validation(&self, split: &DatasetSplit) -> Dataset {
        self.subset(&split.validation)
    }
}

/// Reads a comma-separated file with a header row. The `response` column
/// holds the gold standard; an optional `id` column supplies case ids; every
/// other column is a feature, kept in file order.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    let dataset = parse_csv(&name, &text)?;
    if let Some((row, value)) = first_out_of_range(&dataset.truth) {
        log::warn!("{name}: truth value {value} at row {row} is outside [0, 1]");
    }
    Ok(dataset)
}

pub fn parse_csv(name: &str, text: &str) -> Result<Dataset, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let response = header
        .iter()
        .position(|h| h == "response")
        .ok_or(DataError::MissingResponseColumn)?;
    let id = header.iter().position(|h| h == "id");
    let feature_cols: Vec<usize> = (0..header.len()).filter(|&j| j != response && Some(j) != id).collect();
    if feature_cols.is_empty() {
        return Err(DataError::NoFeatures);
    }

    let mut case_ids = Vec::new();
    let mut truth = Vec::new();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        // 1-based, counting the header as row 1
        let row = i + 2;
        if record.len() != header.len() {
            return Err(DataError::RaggedRow {
                row,
                expected: header.len(),
                found: record.len(),
            });
        }
        let number = |j: usize| -> Result<f64, DataError> {
            let cell = &record[j];
            let value: f64 = cell.parse().map_err(|_| DataError::NonNumericCell {
                row,
                column: header[j].clone(),
                value: cell.to_string(),
            })?;
            if !value.is_finite() {
                return Err(DataError::NonFinite {
                    row,
                    column: header[j].clone(),
                });
            }
            Ok(value)
        };
        truth.push(number(response)?);
        rows.push(feature_cols.iter().map(|&j| number(j)).collect::<Result<Vec<_>, _>>()?);
        case_ids.push(match id {
            Some(j) => record[j].to_string(),
            None => format!("{}", i + 1),
        });
    }

    let mut features = FeatureMatrix::from_rows(rows)?;
    if features.n_cols() == 0 {
        features.columns = vec![Vec::new(); feature_cols.len()];
    }
    Ok(Dataset {
        name: name.to_string(),
        case_ids,
        truth,
        feature_names: feature_cols.iter().map(|&j| header[j].clone()).collect(),
        features,
    })
}

fn first_out_of_range(truth: &[f64]) -> Option<(usize, f64)> {
    truth
        .iter()
        .enumerate()
        .find(|(_, v)| !(0.0..=1.0).contains(*v))
        .map(|(i, v)| (i, *v))
}

/// The benchmark datasets shipped with the crate, features ordered Cos, Man,
/// Euc, Inn, Ang.
pub fn bundled(name: &str) -> Result<Dataset, DataError> {
    let text = match name.to_ascii_lowercase().as_str() {
        "mc30" => MC30_CSV,
        "geresid50" => GERESID50_CSV,
        _ => return Err(DataError::UnknownDataset(name.to_string())),
    };
    let dataset = parse_csv(&name.to_ascii_lowercase(), text)?;
    if let Some((row, value)) = first_out_of_range(&dataset.truth) {
        return Err(DataError::TruthOutOfRange { row, value });
    }
    Ok(dataset)
}

/// Raw CSV text of a bundled dataset.
pub fn bundled_source(name: &str) -> Option<&'static str> {
    match name {
        "mc30" => Some(MC30_CSV),
        "geresid50" => Some(GERESID50_CSV),
        _ => None,
    }
}

/// Loads a bundled dataset by name, or a CSV file by path.
pub fn resolve(name_or_path: &str) -> Result<Dataset, DataError> {
    if BUNDLED.contains(&name_or_path.to_ascii_lowercase().as_str()) {
        bundled(name_or_path)
    } else if Path::new(name_or_path).exists() {
        load_csv(name_or_path)
    } else {
        Err(DataError::UnknownDataset(name_or_path.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

impl DatasetSplit {
    /// Uses the given index lists, checking they partition `rows`.
    pub fn from_indices(rows: usize, train: Vec<usize>, validation: Vec<usize>) -> Result<Self, DataError> {
        let mut seen = vec![false; rows];
        for &i in train.iter().chain(&validation) {
            if i >= rows || seen[i] {
                return Err(DataError::BadSplit { index: i, rows });
            }
            seen[i] = true;
        }
        if train.is_empty() || validation.is_empty() || seen.iter().any(|s| !s) {
            return Err(DataError::SplitTooSmall {
                rows,
                fraction: train.len() as f64 / rows.max(1) as f64,
            });
        }
        Ok(Self { train, validation })
    }

    pub fn all_rows(&self) -> Vec<usize> {
        let mut rows: Vec<usize> = self.train.iter().chain(&self.validation).copied().collect();
        rows.sort_unstable();
        rows
    }
}

/// Seeded shuffle, then the first `ceil(fraction * rows)` rows train and the
/// rest validate. Both sides are returned in ascending row order.
pub fn split(dataset: &Dataset, train_fraction: f64, seed: u64) -> Result<DatasetSplit, DataError> {
    split_rows(dataset.n_rows(), train_fraction, seed)
}

pub fn split_rows(rows: usize, train_fraction: f64, seed: u64) -> Result<DatasetSplit, DataError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DataError::BadFraction(train_fraction));
    }
    // Guard against 0.7 * 30 landing a hair above 21.
    let n_train = (train_fraction * rows as f64 - 1e-9).ceil().max(0.0) as usize;
    if n_train == 0 || n_train >= rows {
        return Err(DataError::SplitTooSmall {
            rows,
            fraction: train_fraction,
        });
    }
    let mut order: Vec<usize> = (0..rows).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train = order[..n_train].to_vec();
    let mut validation = order[n_train..].to_vec();
    train.sort_unstable();
    validation.sort_unstable();
    Ok(DatasetSplit { train, validation })
}

/// Published medians over 30 runs (and single-measure scores) for the three
/// benchmarks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceScores {
    pub dataset: &'static str,
    pub metric: &'static str,
    /// Bert-Cos, Bert-Man, Bert-Euc, Bert-Inn, Bert-Ang.
    pub measures: [f64; 5],
    pub lr: f64,
    pub tgp: f64,
    pub lgp: f64,
    pub cgp: f64,
    pub ge: f64,
    pub ge_interp: f64,
    /// False when the published value cannot be reproduced from the
    /// published data (WS353 LR was measured on an unknown split).
    pub lr_reproducible: bool,
}

pub const MEASURE_NAMES: [&str; 5] = ["Bert-Cos", "Bert-Man", "Bert-Euc", "Bert-Inn", "Bert-Ang"];

pub const REFERENCE_SCORES: [ReferenceScores; 6] = [
    ReferenceScores {
        dataset: "mc30",
        metric: "pcc",
        measures: [0.740, 0.744, 0.751, 0.728, 0.746],
        lr: 0.757,
        tgp: 0.757,
        lgp: 0.845,
        cgp: 0.777,
        ge: 0.794,
        ge_interp: 0.752,
        lr_reproducible: true,
    },
    ReferenceScores {
        dataset: "mc30",
        metric: "srcc",
        measures: [0.701, 0.689, 0.718, 0.711, 0.701],
        lr: 0.770,
        tgp: 0.758,
        lgp: 0.822,
        cgp: 0.766,
        ge: 0.859,
        ge_interp: 0.827,
        lr_reproducible: true,
    },
    ReferenceScores {
        dataset: "geresid50",
        metric: "pcc",
        measures: [0.725, 0.706, 0.711, 0.735, 0.722],
        lr: 0.736,
        tgp: 0.735,
        lgp: 0.756,
        cgp: 0.738,
        ge: 0.743,
        ge_interp: 0.735,
        lr_reproducible: true,
    },
    ReferenceScores {
        dataset: "geresid50",
        metric: "srcc",
        measures: [0.724, 0.715, 0.727, 0.740, 0.724],
        lr: 0.744,
        tgp: 0.740,
        lgp: 0.752,
        cgp: 0.745,
        ge: 0.779,
        ge_interp: 0.740,
        lr_reproducible: true,
    },
    ReferenceScores {
        dataset: "ws353",
        metric: "pcc",
        measures: [0.810, 0.752, 0.762, 0.811, 0.777],
        lr: 0.262,
        tgp: 0.811,
        lgp: 0.817,
        cgp: 0.811,
        ge: 0.827,
        ge_interp: 0.811,
        lr_reproducible: false,
    },
    ReferenceScores {
        dataset: "ws353",
        metric: "srcc",
        measures: [0.817, 0.792, 0.817, 0.817, 0.817],
        lr: 0.470,
        tgp: 0.812,
        lgp: 0.817,
        cgp: 0.812,
        ge: 0.817,
        ge_interp: 0.804,
        lr_reproducible: false,
    },
];

pub fn reference_scores(dataset: &str, metric: &str) -> Option<&'static ReferenceScores> {
    let dataset = dataset.to_ascii_lowercase();
    let metric = metric.to_ascii_lowercase();
    REFERENCE_SCORES
        .iter()
        .find(|r| r.dataset == dataset && r.metric == metric)
}
