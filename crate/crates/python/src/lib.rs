//! Python bindings: grammar mapping, formula evaluation, correlation,
//! regression baseline, bundled data and evolutionary runs.

use ge_ensemble::data::{self, Dataset as CoreDataset, FeatureMatrix};
use ge_ensemble::evolution::{self, EvolutionConfig};
use ge_ensemble::fitness::{self, Metric};
use ge_ensemble::grammar::{self, Derivation, Invalid};
use ge_ensemble::phenotype::Expression as CoreExpression;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn metric(name: &str) -> PyResult<Metric> {
    name.parse()
        .map_err(|_| PyValueError::new_err(format!("unknown metric `{name}`")))
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<FeatureMatrix> {
    FeatureMatrix::from_rows(rows).map_err(value_err)
}

#[pyclass(name = "Grammar", frozen)]
pub struct Grammar(grammar::Grammar);

#[pymethods]
impl Grammar {
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        grammar::Grammar::parse(text).map(Grammar).map_err(value_err)
    }

    #[staticmethod]
    fn ensemble() -> Self {
        Grammar(grammar::Grammar::ensemble())
    }

    #[staticmethod]
    fn ensemble_interp() -> Self {
        Grammar(grammar::Grammar::ensemble_interp())
    }

    /// Maps a genome to its formula text. Returns `(text, None)` on success
    /// and `(None, reason)` with reason `"codons_exhausted"` or
    /// `"depth_exceeded"` otherwise.
    #[pyo3(signature = (genome, max_depth = 18))]
    fn derive(&self, genome: Vec<u32>, max_depth: usize) -> (Option<String>, Option<&'static str>) {
        match grammar::derive(&self.0, &genome, max_depth) {
            Derivation::Complete(tree) => (Some(tree.serialize()), None),
            Derivation::Invalid(Invalid::CodonsExhausted) => (None, Some("codons_exhausted")),
            Derivation::Invalid(Invalid::DepthExceeded) => (None, Some("depth_exceeded")),
        }
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }
}

#[pyclass(name = "Expression", frozen)]
pub struct Expression(CoreExpression);

#[pymethods]
impl Expression {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        CoreExpression::parse(text).map(Expression).map_err(value_err)
    }

    /// Evaluates over rows of feature values. Returns `(values, finite)`.
    fn evaluate(&self, rows: Vec<Vec<f64>>) -> PyResult<(Vec<f64>, bool)> {
        let p = self.0.evaluate(&matrix(rows)?).map_err(value_err)?;
        Ok((p.values, p.finite))
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.0.node_count()
    }

    #[getter]
    fn depth(&self) -> usize {
        self.0.depth()
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Expression('{}')", self.0)
    }
}

#[pyclass(name = "Dataset", frozen)]
pub struct Dataset(CoreDataset);

#[pymethods]
impl Dataset {
    #[getter]
    fn name(&self) -> String {
        self.0.name.clone()
    }

    #[getter]
    fn case_ids(&self) -> Vec<String> {
        self.0.case_ids.clone()
    }

    #[getter]
    fn truth(&self) -> Vec<f64> {
        self.0.truth.clone()
    }

    #[getter]
    fn feature_names(&self) -> Vec<String> {
        self.0.feature_names.clone()
    }

    /// Feature values, one list per row.
    #[getter]
    fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.0.n_rows()).map(|i| self.0.features.row(i)).collect()
    }

    fn __len__(&self) -> usize {
        self.0.n_rows()
    }
}

/// |rho| between truth and prediction, `None` when either is degenerate.
#[pyfunction]
fn pearson(y: Vec<f64>, yhat: Vec<f64>) -> PyResult<Option<f64>> {
    Ok(fitness::pearson(&y, &yhat).map_err(value_err)?.fitness())
}

#[pyfunction]
fn spearman(y: Vec<f64>, yhat: Vec<f64>) -> PyResult<Option<f64>> {
    Ok(fitness::spearman(&y, &yhat).map_err(value_err)?.fitness())
}

/// Least squares with intercept. Returns `(coefficients, intercept)`.
#[pyfunction]
fn fit_linear_regression(rows: Vec<Vec<f64>>, truth: Vec<f64>) -> PyResult<(Vec<f64>, f64)> {
    let m = fitness::fit_linear_regression(&matrix(rows)?, &truth).map_err(value_err)?;
    Ok((m.coefficients, m.intercept))
}

#[pyfunction]
fn bundled(name: &str) -> PyResult<Dataset> {
    data::bundled(name).map(Dataset).map_err(value_err)
}

#[pyfunction]
fn load_csv(path: &str) -> PyResult<Dataset> {
    data::load_csv(path).map(Dataset).map_err(value_err)
}

/// Row indices `(train, validation)`.
#[pyfunction]
#[pyo3(signature = (rows, train_fraction = data::DEFAULT_TRAIN_FRACTION, seed = 1))]
fn split(rows: usize, train_fraction: f64, seed: u64) -> PyResult<(Vec<usize>, Vec<usize>)> {
    let s = data::split_rows(rows, train_fraction, seed).map_err(value_err)?;
    Ok((s.train, s.validation))
}

/// One evolutionary run on `dataset` (a `Dataset` or bundled name).
#[pyfunction]
#[pyo3(signature = (
    dataset, metric = "srcc", seed = 1, generations = 200, population = 100,
    crossover_probability = 0.8, interp = false, train_fraction = data::DEFAULT_TRAIN_FRACTION, split_seed = 1,
))]
#[allow(clippy::too_many_arguments)]
fn run<'py>(
    py: Python<'py>,
    dataset: &Bound<'py, PyAny>,
    metric: &str,
    seed: u64,
    generations: usize,
    population: usize,
    crossover_probability: f64,
    interp: bool,
    train_fraction: f64,
    split_seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let data = if let Ok(d) = dataset.cast::<Dataset>() {
        d.get().0.clone()
    } else {
        data::resolve(&dataset.extract::<String>()?).map_err(value_err)?
    };
    let metric = self::metric(metric)?;
    let (g, base) = if interp {
        (grammar::Grammar::ensemble_interp(), EvolutionConfig::interpretable())
    } else {
        (grammar::Grammar::ensemble(), EvolutionConfig::default())
    };
    let config = EvolutionConfig {
        population_size: population,
        generations,
        crossover_probability,
        rng_seed: seed,
        ..base
    };
    let s = data::split(&data, train_fraction, split_seed).map_err(value_err)?;
    let record = py
        .detach(|| evolution::run(&g, &data, &s, &config, metric))
        .map_err(value_err)?;

    let out = PyDict::new(py);
    out.set_item("seed", record.seed)?;
    out.set_item("metric", record.metric.name())?;
    out.set_item("formula", &record.best.formula)?;
    out.set_item("genome", record.best.genome.codons().to_vec())?;
    out.set_item("node_count", record.best.node_count)?;
    out.set_item("training_fitness", record.best.training_fitness)?;
    out.set_item("validation_fitness", record.best.validation_fitness)?;
    out.set_item(
        "best_fitness",
        record.stats.iter().map(|s| s.best_fitness).collect::<Vec<_>>(),
    )?;
    out.set_item(
        "average_fitness",
        record.stats.iter().map(|s| s.average_fitness).collect::<Vec<_>>(),
    )?;
    out.set_item("train", record.split.train)?;
    out.set_item("validation", record.split.validation)?;
    Ok(out)
}

#[pymodule]
fn ge_ensemble_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Grammar>()?;
    m.add_class::<Expression>()?;
    m.add_class::<Dataset>()?;
    m.add_function(wrap_pyfunction!(pearson, m)?)?;
    m.add_function(wrap_pyfunction!(spearman, m)?)?;
    m.add_function(wrap_pyfunction!(fit_linear_regression, m)?)?;
    m.add_function(wrap_pyfunction!(bundled, m)?)?;
    m.add_function(wrap_pyfunction!(load_csv, m)?)?;
    m.add_function(wrap_pyfunction!(split, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
