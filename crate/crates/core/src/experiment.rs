//! Seeded multi-run batches: output files, summaries, baselines and formula
//! export.
//!
//! A batch writes into `<out>/<dataset>_<metric>/`:
//!
//! ```text
//! run_<seed>/avg_fitness.txt        generation value, one line per generation
//! run_<seed>/avg_genome_length.txt
//! run_<seed>/avg_tree_nodes.txt
//! run_<seed>/best_fitness.txt
//! run_<seed>/formula.txt            commented header + formula
//! run_<seed>/record.json
//! validation_fitness.txt            seed value, one line per run
//! summary.txt
//! summary.json
//! ```
//!
//! Nothing time-dependent is written, so identical configurations produce
//! byte-identical trees.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::data::{self, reference_scores, DataError, Dataset, DatasetSplit, ReferenceScores, DEFAULT_TRAIN_FRACTION};
use crate::evolution::{self, EvolutionConfig, EvolutionError, RunRecord};
use crate::fitness::{ensemble_fitness, fit_linear_regression, mean_ensemble, FitnessError, FitnessReport, Metric};
use crate::grammar::{Grammar, GrammarError};
use crate::phenotype::{Expression, PhenotypeError};

pub const DEFAULT_RUNS: usize = 30;
pub const DEFAULT_BASE_SEED: u64 = 1;
pub const DEFAULT_SPLIT_SEED: u64 = 1;

/// Features averaged by the mean-ensemble baseline when present.
pub const MEAN_ENSEMBLE_FEATURES: [&str; 3] = ["Bert-Cos", "Bert-Euc", "Bert-Man"];

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("grammar: {0}")]
    Grammar(#[from] GrammarError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("formula: {0}")]
    Formula(#[from] PhenotypeError),
    #[error(transparent)]
    Engine(#[from] EvolutionError),
    #[error(transparent)]
    Fitness(#[from] FitnessError),
    #[error("run record holds no valid individual")]
    NoValidIndividual,
}

impl ExperimentError {
    /// Process exit code: 1 usage, 2 data, 3 engine.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Usage(_) => 1,
            ExperimentError::Data(_)
            | ExperimentError::Grammar(_)
            | ExperimentError::Io { .. }
            | ExperimentError::Formula(_) => 2,
            ExperimentError::Engine(_) | ExperimentError::Fitness(_) | ExperimentError::NoValidIndividual => 3,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Builtin grammar name or a path to a BNF file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum GrammarChoice {
    Ensemble,
    EnsembleInterp,
    File(PathBuf),
}

impl GrammarChoice {
    pub fn parse(s: &str) -> Self {
        match s {
            "ensemble" => GrammarChoice::Ensemble,
            "ensemble_interp" | "ge-i" => GrammarChoice::EnsembleInterp,
            path => GrammarChoice::File(PathBuf::from(path)),
        }
    }

    pub fn load(&self) -> Result<Grammar, ExperimentError> {
        match self {
            GrammarChoice::Ensemble => Ok(Grammar::ensemble()),
            GrammarChoice::EnsembleInterp => Ok(Grammar::ensemble_interp()),
            GrammarChoice::File(path) => {
                let text = fs::read_to_string(path).map_err(io_err(path))?;
                Ok(Grammar::parse(&text)?)
            }
        }
    }

    /// Engine defaults for this grammar before overrides.
    pub fn base_config(&self) -> EvolutionConfig {
        match self {
            GrammarChoice::EnsembleInterp => EvolutionConfig::interpretable(),
            _ => EvolutionConfig::default(),
        }
    }
}

impl fmt::Display for GrammarChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GrammarChoice::Ensemble => f.write_str("ensemble"),
            GrammarChoice::EnsembleInterp => f.write_str("ensemble_interp"),
            GrammarChoice::File(p) => write!(f, "{}", p.display()),
        }
    }
}

/// Engine settings that replace the grammar's defaults when set.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Overrides {
    pub population_size: Option<usize>,
    pub generations: Option<usize>,
    pub crossover_probability: Option<f64>,
    pub mutation_probability: Option<f64>,
    pub tournament_size: Option<usize>,
    pub elite_count: Option<usize>,
    pub max_genome_length: Option<usize>,
    pub max_init_tree_depth: Option<usize>,
    pub max_tree_depth: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, mut c: EvolutionConfig) -> EvolutionConfig {
        c.population_size = self.population_size.unwrap_or(c.population_size);
        c.generations = self.generations.unwrap_or(c.generations);
        c.crossover_probability = self.crossover_probability.unwrap_or(c.crossover_probability);
        c.mutation_probability = self.mutation_probability.or(c.mutation_probability);
        c.tournament_size = self.tournament_size.unwrap_or(c.tournament_size);
        c.elite_count = self.elite_count.unwrap_or(c.elite_count);
        c.max_genome_length = self.max_genome_length.unwrap_or(c.max_genome_length);
        c.max_init_tree_depth = self.max_init_tree_depth.unwrap_or(c.max_init_tree_depth);
        c.max_tree_depth = self.max_tree_depth.unwrap_or(c.max_tree_depth);
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    /// Bundled dataset name or CSV path.
    pub dataset: String,
    pub grammar: GrammarChoice,
    pub metric: Metric,
    pub runs: usize,
    pub base_seed: u64,
    pub overrides: Overrides,
    pub out_dir: PathBuf,
    pub split_fraction: f64,
    pub split_seed: u64,
}

impl ExperimentConfig {
    pub fn new(dataset: impl Into<String>, metric: Metric) -> Self {
        Self {
            dataset: dataset.into(),
            grammar: GrammarChoice::Ensemble,
            metric,
            runs: DEFAULT_RUNS,
            base_seed: DEFAULT_BASE_SEED,
            overrides: Overrides::default(),
            out_dir: PathBuf::from("results"),
            split_fraction: DEFAULT_TRAIN_FRACTION,
            split_seed: DEFAULT_SPLIT_SEED,
        }
    }

    /// Engine config for one run, before the seed is set.
    pub fn evolution_config(&self) -> EvolutionConfig {
        self.overrides.apply(self.grammar.base_config())
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.runs < 1 {
            return Err(ExperimentError::Usage("runs must be at least 1".into()));
        }
        self.evolution_config()
            .validate()
            .map_err(|e| ExperimentError::Usage(e.to_string()))
    }

    /// Applies one `KEY=value` setting. Engine keys use the run-parameter
    /// names (`POPULATION_SIZE`, `GENERATIONS`, ...); operator-choice keys are
    /// accepted only with the single value this engine implements.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ExperimentError> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ExperimentError> {
            value
                .parse()
                .map_err(|_| ExperimentError::Usage(format!("{key}: cannot parse `{value}`")))
        }
        let fixed = |expected: &str| {
            if value.eq_ignore_ascii_case(expected) {
                Ok(())
            } else {
                Err(ExperimentError::Usage(format!(
                    "{key}: only `{expected}` is supported, got `{value}`"
                )))
            }
        };
        let o = &mut self.overrides;
        match key.to_ascii_uppercase().as_str() {
            "POPULATION_SIZE" => o.population_size = Some(num(key, value)?),
            "GENERATIONS" => o.generations = Some(num(key, value)?),
            "CROSSOVER_PROBABILITY" => o.crossover_probability = Some(num(key, value)?),
            "MUTATION_PROBABILITY" => o.mutation_probability = Some(num(key, value)?),
            "TOURNAMENT_SIZE" => o.tournament_size = Some(num(key, value)?),
            "ELITE_SIZE" => o.elite_count = Some(num(key, value)?),
            "MAX_GENOME_LENGTH" => o.max_genome_length = Some(num(key, value)?),
            "MAX_INIT_TREE_DEPTH" => o.max_init_tree_depth = Some(num(key, value)?),
            "MAX_TREE_DEPTH" => o.max_tree_depth = Some(num(key, value)?),
            "RANDOM_SEED" => self.base_seed = num(key, value)?,
            "CROSSOVER" => fixed("variable_onepoint")?,
            "INITIALISATION" => fixed("PI_grow")?,
            "INVALID_SELECTION" => fixed("False")?,
            "MUTATION" => fixed("int_flip_per_codon")?,
            "FITNESS_FUNCTION" => fixed("max")?,
            "REPLACEMENT" => fixed("generational")?,
            "SELECTION" => fixed("tournament")?,
            "DATASET" => self.dataset = value.to_string(),
            "GRAMMAR" => self.grammar = GrammarChoice::parse(value),
            "METRIC" => {
                self.metric = value
                    .parse()
                    .map_err(|_| ExperimentError::Usage(format!("unknown metric `{value}`")))?
            }
            "RUNS" => self.runs = num(key, value)?,
            "SPLIT" => self.split_fraction = num(key, value)?,
            "SPLIT_SEED" => self.split_seed = num(key, value)?,
            "OUT" => self.out_dir = PathBuf::from(value),
            _ => return Err(ExperimentError::Usage(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Applies a flat `KEY=value` file; blank lines and `#` comments are
    /// skipped.
    pub fn apply_config_text(&mut self, text: &str) -> Result<(), ExperimentError> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ExperimentError::Usage(format!("config line {}: expected KEY=value", n + 1)))?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn apply_config_file(&mut self, path: &Path) -> Result<(), ExperimentError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        self.apply_config_text(&text)
    }

    /// `<out>/<dataset>_<metric>` for the given dataset.
    pub fn batch_dir(&self, dataset: &Dataset) -> PathBuf {
        self.out_dir.join(format!("{}_{}", dataset.name, self.metric.name()))
    }
}

/// Min, quartiles and max, with quartiles interpolated linearly between
/// order statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl FiveNumber {
    /// `None` for an empty sample.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Some(Self {
            min: sorted[0],
            q1: quantile(&sorted, 0.25),
            median: quantile(&sorted, 0.5),
            q3: quantile(&sorted, 0.75),
            max: sorted[sorted.len() - 1],
        })
    }
}

/// Linear-interpolation quantile of an ascending sample.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub training_fitness: f64,
    /// `None` when the formula is degenerate on the validation rows.
    pub validation_fitness: Option<f64>,
    pub node_count: usize,
    pub formula: String,
}

/// Published medians for the batch's dataset and metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReferenceDelta {
    pub reference_ge: f64,
    pub reference_ge_interp: f64,
    pub reference_lr: f64,
    /// Batch median minus the published median of the matching variant.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchSummary {
    pub dataset: String,
    pub metric: Metric,
    pub grammar: String,
    pub runs: Vec<RunSummary>,
    /// Per-run validation fitness; degenerate runs count as 0.
    pub validation_fitness: Vec<f64>,
    pub five_number: FiveNumber,
    pub median_node_count: f64,
    /// Seed of the run with the best training fitness (ties: fewer nodes,
    /// lower seed).
    pub best_seed: u64,
    pub best_formula: String,
    pub reference: Option<ReferenceDelta>,
}

impl BatchSummary {
    pub fn from_records(
        dataset: &str,
        metric: Metric,
        grammar: &GrammarChoice,
        records: &[RunRecord],
    ) -> Result<Self, ExperimentError> {
        let runs: Vec<RunSummary> = records
            .iter()
            .map(|r| RunSummary {
                seed: r.seed,
                training_fitness: r.best.training_fitness,
                validation_fitness: r.best.validation_fitness,
                node_count: r.best.node_count,
                formula: r.best.formula.clone(),
            })
            .collect();
        let validation_fitness: Vec<f64> = runs.iter().map(|r| r.validation_fitness.unwrap_or(0.0)).collect();
        let five_number = FiveNumber::of(&validation_fitness).ok_or(ExperimentError::NoValidIndividual)?;
        let nodes: Vec<f64> = runs.iter().map(|r| r.node_count as f64).collect();
        let median_node_count = FiveNumber::of(&nodes).map_or(0.0, |f| f.median);
        let best = runs
            .iter()
            .min_by(|a, b| {
                b.training_fitness
                    .total_cmp(&a.training_fitness)
                    .then(a.node_count.cmp(&b.node_count))
                    .then(a.seed.cmp(&b.seed))
            })
            .expect("non-empty");
        let reference = reference_scores(dataset, metric.name()).map(|r| ReferenceDelta {
            reference_ge: r.ge,
            reference_ge_interp: r.ge_interp,
            reference_lr: r.lr,
            delta: five_number.median
                - match grammar {
                    GrammarChoice::EnsembleInterp => r.ge_interp,
                    _ => r.ge,
                },
        });
        Ok(Self {
            dataset: dataset.to_string(),
            metric,
            grammar: grammar.to_string(),
            best_seed: best.seed,
            best_formula: best.formula.clone(),
            runs,
            validation_fitness,
            five_number,
            median_node_count,
            reference,
        })
    }
}

impl fmt::Display for BatchSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = &self.five_number;
        writeln!(
            f,
            "{} / {} / {} ({} runs)",
            self.dataset,
            self.metric.name(),
            self.grammar,
            self.runs.len()
        )?;
        writeln!(
            f,
            "validation {}: min {:.4}  q1 {:.4}  median {:.4}  q3 {:.4}  max {:.4}",
            self.metric.name(),
            s.min,
            s.q1,
            s.median,
            s.q3,
            s.max
        )?;
        writeln!(f, "median node count: {}", self.median_node_count)?;
        if let Some(r) = &self.reference {
            writeln!(
                f,
                "reference median: GE {:.3}, GE-i {:.3}, LR {:.3}; delta {:+.4}",
                r.reference_ge, r.reference_ge_interp, r.reference_lr, r.delta
            )?;
        }
        writeln!(f, "best formula (seed {}): {}", self.best_seed, self.best_formula)
    }
}

/// Runs `config.runs` seeded runs and writes the batch output tree.
pub fn run_experiment(config: &ExperimentConfig) -> Result<BatchSummary, ExperimentError> {
    config.validate()?;
    let dataset = data::resolve(&config.dataset)?;
    let grammar = config.grammar.load()?;
    let split = data::split(&dataset, config.split_fraction, config.split_seed)?;
    let records = run_batch(config, &grammar, &dataset, &split)?;
    let summary = BatchSummary::from_records(&dataset.name, config.metric, &config.grammar, &records)?;

    let batch_dir = config.batch_dir(&dataset);
    let staging = staging_dir(&batch_dir);
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(io_err(&staging))?;
    }
    let written = write_batch(&staging, &dataset.name, &records, &summary);
    if let Err(e) = written {
        let _ = fs::remove_dir_all(&staging);
        return Err(e);
    }
    if batch_dir.exists() {
        fs::remove_dir_all(&batch_dir).map_err(io_err(&batch_dir))?;
    }
    fs::rename(&staging, &batch_dir).map_err(io_err(&batch_dir))?;
    Ok(summary)
}

/// The runs alone, without touching the filesystem. Records come back in
/// seed order.
pub fn run_batch(
    config: &ExperimentConfig,
    grammar: &Grammar,
    dataset: &Dataset,
    split: &DatasetSplit,
) -> Result<Vec<RunRecord>, ExperimentError> {
    let base = config.evolution_config();
    (0..config.runs as u64)
        .into_par_iter()
        .map(|i| {
            let mut c = base.clone();
            c.rng_seed = config.base_seed + i;
            evolution::run(grammar, dataset, split, &c, config.metric).map_err(ExperimentError::from)
        })
        .collect()
}

fn staging_dir(batch_dir: &Path) -> PathBuf {
    let name = batch_dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    batch_dir.with_file_name(format!(".{name}.partial"))
}

fn write_batch(
    dir: &Path,
    dataset: &str,
    records: &[RunRecord],
    summary: &BatchSummary,
) -> Result<(), ExperimentError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for record in records {
        write_run(&dir.join(format!("run_{}", record.seed)), dataset, record)?;
    }
    let per_run: String = summary
        .runs
        .iter()
        .zip(&summary.validation_fitness)
        .map(|(r, v)| format!("{} {}\n", r.seed, v))
        .collect();
    write(&dir.join("validation_fitness.txt"), &per_run)?;
    write(&dir.join("summary.txt"), &summary.to_string())?;
    write(&dir.join("summary.json"), &to_json(summary)?)
}

/// Writes one run's stats files, formula file and JSON record.
pub fn write_run(dir: &Path, dataset: &str, record: &RunRecord) -> Result<(), ExperimentError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let series = |value: fn(&evolution::GenerationStats) -> f64| -> String {
        record
            .stats
            .iter()
            .map(|s| format!("{} {}\n", s.generation, value(s)))
            .collect()
    };
    write(&dir.join("avg_fitness.txt"), &series(|s| s.average_fitness))?;
    write(&dir.join("avg_genome_length.txt"), &series(|s| s.average_genome_length))?;
    write(&dir.join("avg_tree_nodes.txt"), &series(|s| s.average_tree_nodes))?;
    write(&dir.join("best_fitness.txt"), &series(|s| s.best_fitness))?;
    write(&dir.join("formula.txt"), &export_formula(record, dataset)?)?;
    write(&dir.join("record.json"), &to_json(record)?)
}

fn write(path: &Path, text: &str) -> Result<(), ExperimentError> {
    fs::write(path, text).map_err(io_err(path))
}

fn to_json<T: Serialize>(value: &T) -> Result<String, ExperimentError> {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    Ok(s)
}

/// Formula file text: a `#` header followed by the formula in numpy form.
///
/// ```text
/// # dataset: mc30
/// # metric: pcc
/// # seed: 7
/// # training_fitness: 0.83
/// # validation_fitness: 0.79
/// x[:,2]+x[:,0]
/// ```
pub fn export_formula(record: &RunRecord, dataset: &str) -> Result<String, ExperimentError> {
    let formula = record.best.formula.trim();
    if formula.is_empty() {
        return Err(ExperimentError::NoValidIndividual);
    }
    let validation = record
        .best
        .validation_fitness
        .map_or_else(|| "degenerate".to_string(), |v| v.to_string());
    Ok(format!(
        "# dataset: {dataset}\n# metric: {}\n# seed: {}\n# training_fitness: {}\n# validation_fitness: {validation}\n{formula}\n",
        record.metric.name(),
        record.seed,
        record.best.training_fitness,
    ))
}

/// Parsed formula file.
#[derive(Debug, Clone, PartialEq)]
pub struct FormulaFile {
    /// Header entries in file order.
    pub header: Vec<(String, String)>,
    pub expression: Expression,
}

impl FormulaFile {
    pub fn parse(text: &str) -> Result<Self, ExperimentError> {
        let mut header = Vec::new();
        let mut body = String::new();
        for line in text.lines() {
            let line = line.trim();
            if let Some(comment) = line.strip_prefix('#') {
                if let Some((k, v)) = comment.split_once(':') {
                    header.push((k.trim().to_string(), v.trim().to_string()));
                }
            } else {
                body.push_str(line);
            }
        }
        Ok(Self {
            header,
            expression: Expression::parse(&body)?,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.header.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

/// Scores a formula on a dataset.
pub fn evaluate_formula(
    expr: &Expression,
    dataset: &Dataset,
    metric: Metric,
) -> Result<FitnessReport, ExperimentError> {
    if let Some(j) = expr.max_feature() {
        if j >= dataset.n_features() {
            return Err(ExperimentError::Formula(PhenotypeError::FeatureOutOfRange {
                index: j,
                available: dataset.n_features(),
            }));
        }
    }
    Ok(ensemble_fitness(expr, dataset, metric)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureScore {
    pub name: String,
    /// |ρ| over all rows; `None` for a constant column.
    pub full: Option<f64>,
    pub validation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineReport {
    pub dataset: String,
    pub metric: Metric,
    pub features: Vec<FeatureScore>,
    /// Regression fitted on the training rows, scored on validation rows.
    pub lr_validation: Option<f64>,
    /// Regression fitted and scored on all rows.
    pub lr_in_sample: Option<f64>,
    pub mean_ensemble_features: Vec<String>,
    pub mean_ensemble_full: Option<f64>,
    pub mean_ensemble_validation: Option<f64>,
    #[serde(skip)]
    pub reference: Option<&'static ReferenceScores>,
}

/// Single features, linear regression and the mean ensemble, on the full
/// data and on the validation side of `split`.
pub fn report_baselines(
    dataset: &Dataset,
    metric: Metric,
    split: &DatasetSplit,
) -> Result<BaselineReport, ExperimentError> {
    let training = dataset.training(split);
    let validation = dataset.validation(split);
    let score =
        |y: &[f64], yhat: &[f64]| -> Result<Option<f64>, ExperimentError> { Ok(metric.correlate(y, yhat)?.fitness()) };

    let mut features = Vec::with_capacity(dataset.n_features());
    for (j, name) in dataset.feature_names.iter().enumerate() {
        features.push(FeatureScore {
            name: name.clone(),
            full: score(&dataset.truth, dataset.features.column(j))?,
            validation: score(&validation.truth, validation.features.column(j))?,
        });
    }

    let lr_validation = match fit_linear_regression(&training.features, &training.truth) {
        Ok(model) => score(&validation.truth, &model.predict(&validation.features))?,
        Err(e) => {
            log::warn!("regression baseline on training rows: {e}");
            None
        }
    };
    let lr_in_sample = match fit_linear_regression(&dataset.features, &dataset.truth) {
        Ok(model) => score(&dataset.truth, &model.predict(&dataset.features))?,
        Err(e) => {
            log::warn!("regression baseline on all rows: {e}");
            None
        }
    };

    let mut subset: Vec<usize> = MEAN_ENSEMBLE_FEATURES
        .iter()
        .filter_map(|n| dataset.feature_index(n))
        .collect();
    if subset.len() != MEAN_ENSEMBLE_FEATURES.len() {
        subset = (0..dataset.n_features()).collect();
    }
    let mean_ensemble_full = score(&dataset.truth, &mean_ensemble(&dataset.features, &subset)?)?;
    let mean_ensemble_validation = score(&validation.truth, &mean_ensemble(&validation.features, &subset)?)?;

    Ok(BaselineReport {
        dataset: dataset.name.clone(),
        metric,
        features,
        lr_validation,
        lr_in_sample,
        mean_ensemble_features: subset.iter().map(|&j| dataset.feature_names[j].clone()).collect(),
        mean_ensemble_full,
        mean_ensemble_validation,
        reference: reference_scores(&dataset.name, metric.name()),
    })
}

impl fmt::Display for BaselineReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cell = |v: Option<f64>| v.map_or_else(|| "     -".to_string(), |v| format!("{v:.4}"));
        writeln!(f, "{} / {}", self.dataset, self.metric.name())?;
        writeln!(
            f,
            "{:<24} {:>8} {:>10} {:>10}",
            "baseline", "all rows", "validation", "reference"
        )?;
        for (j, s) in self.features.iter().enumerate() {
            let reference = self
                .reference
                .filter(|_| j < 5 && s.name == data::MEASURE_NAMES[j])
                .map(|r| r.measures[j]);
            writeln!(
                f,
                "{:<24} {:>8} {:>10} {:>10}",
                s.name,
                cell(s.full),
                cell(s.validation),
                cell(reference)
            )?;
        }
        let lr_reference = match self.reference {
            Some(r) if r.lr_reproducible => cell(Some(r.lr)),
            Some(r) => format!("{:.4} (split-dependent, not reproducible)", r.lr),
            None => cell(None),
        };
        writeln!(
            f,
            "{:<24} {:>8} {:>10} {:>10}",
            "linear regression",
            cell(self.lr_in_sample),
            cell(self.lr_validation),
            lr_reference
        )?;
        writeln!(
            f,
            "{:<24} {:>8} {:>10} {:>10}",
            format!("mean({})", self.mean_ensemble_features.len()),
            cell(self.mean_ensemble_full),
            cell(self.mean_ensemble_validation),
            cell(None)
        )?;
        if let Some(r) = self.reference {
            writeln!(
                f,
                "published medians: GE {:.3}, GE-i {:.3}, TGP {:.3}, LGP {:.3}, CGP {:.3}",
                r.ge, r.ge_interp, r.tgp, r.lgp, r.cgp
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let f = FiveNumber::of(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!((f.min, f.q1, f.median, f.q3, f.max), (1.0, 1.75, 2.5, 3.25, 4.0));
        let one = FiveNumber::of(&[0.5]).unwrap();
        assert_eq!(one.median, 0.5);
        assert!(FiveNumber::of(&[]).is_none());
    }

    #[test]
    fn config_keys() {
        let mut c = ExperimentConfig::new("mc30", Metric::Srcc);
        c.apply_config_text(
            "# run parameters\nPOPULATION_SIZE = 50\nGENERATIONS=10\nCROSSOVER=variable_onepoint\nELITE_SIZE=2\nRANDOM_SEED=9\n",
        )
        .unwrap();
        let e = c.evolution_config();
        assert_eq!((e.population_size, e.generations, e.elite_count), (50, 10, 2));
        assert_eq!(c.base_seed, 9);
        assert!(matches!(c.set("SELECTION", "roulette"), Err(ExperimentError::Usage(_))));
        assert!(matches!(c.set("NOPE", "1"), Err(ExperimentError::Usage(_))));
        assert!(c.apply_config_text("GENERATIONS").is_err());
    }

    #[test]
    fn interp_grammar_has_shallow_default() {
        let mut c = ExperimentConfig::new("mc30", Metric::Srcc);
        c.grammar = GrammarChoice::parse("ensemble_interp");
        assert_eq!(c.evolution_config().max_tree_depth, 8);
        c.set("MAX_TREE_DEPTH", "12").unwrap();
        assert_eq!(c.evolution_config().max_tree_depth, 12);
    }

    #[test]
    fn invalid_runs_is_usage_error() {
        let mut c = ExperimentConfig::new("mc30", Metric::Srcc);
        c.runs = 0;
        let e = c.validate().unwrap_err();
        assert_eq!(e.exit_code(), 1);
    }

    #[test]
    fn formula_file_parses_header() {
        let f = FormulaFile::parse("# dataset: mc30\n# seed: 4\nx[:,2]*x[:,1]\n").unwrap();
        assert_eq!(f.get("seed"), Some("4"));
        assert_eq!(f.expression.to_string(), "x[:,2]*x[:,1]");
    }
}
