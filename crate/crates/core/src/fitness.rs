//! Correlation metrics, the evolutionary fitness function and the two
//! non-evolutionary baselines (least-squares regression, mean ensemble).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Dataset, FeatureMatrix};
use crate::phenotype::{Expression, PhenotypeError};

/// Relative spread below which a vector counts as constant.
const DEGENERATE_REL_TOL: f64 = 1e-12;
/// Pivot magnitude, relative to the largest, below which the design matrix is
/// treated as rank deficient.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FitnessError {
    #[error("vectors have lengths {0} and {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least 3 observations, got {0}")]
    TooShort(usize),
    #[error("design matrix is rank deficient (constant or duplicate feature columns)")]
    SingularDesign,
    #[error("need at least {needed} rows to fit {features} features, got {rows}")]
    Underdetermined {
        rows: usize,
        features: usize,
        needed: usize,
    },
    #[error("feature subset is empty")]
    EmptySubset,
    #[error("feature index {0} out of range")]
    BadFeature(usize),
    #[error(transparent)]
    Phenotype(#[from] PhenotypeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Pcc,
    Srcc,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Pcc => "pcc",
            Metric::Srcc => "srcc",
        }
    }

    pub fn correlate(self, y: &[f64], yhat: &[f64]) -> Result<FitnessReport, FitnessError> {
        match self {
            Metric::Pcc => pearson(y, yhat),
            Metric::Srcc => spearman(y, yhat),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pcc" | "pearson" => Ok(Metric::Pcc),
            "srcc" | "spearman" => Ok(Metric::Srcc),
            other => Err(format!("unknown metric `{other}` (expected pcc or srcc)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitnessReport {
    pub metric: Metric,
    /// Signed coefficient; NaN when degenerate.
    pub rho: f64,
    pub degenerate: bool,
}

impl FitnessReport {
    fn degenerate(metric: Metric) -> Self {
        Self {
            metric,
            rho: f64::NAN,
            degenerate: true,
        }
    }

    /// `|rho|`, or `None` for degenerate inputs.
    pub fn fitness(&self) -> Option<f64> {
        (!self.degenerate).then(|| self.rho.abs())
    }
}

fn check_lengths(y: &[f64], yhat: &[f64]) -> Result<(), FitnessError> {
    if y.len() != yhat.len() {
        return Err(FitnessError::LengthMismatch(y.len(), yhat.len()));
    }
    if y.len() < 3 {
        return Err(FitnessError::TooShort(y.len()));
    }
    Ok(())
}

/// True when the values are non-finite or (numerically) constant.
pub fn is_degenerate(values: &[f64]) -> bool {
    if values.iter().any(|v| !v.is_finite()) {
        return true;
    }
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    let scale = lo.abs().max(hi.abs());
    hi - lo <= DEGENERATE_REL_TOL * scale
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn product_moment(y: &[f64], yhat: &[f64]) -> f64 {
    let (my, mh) = (mean(y), mean(yhat));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in y.iter().zip(yhat) {
        let (da, db) = (a - my, b - mh);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
}

/// Pearson product-moment correlation.
pub fn pearson(y: &[f64], yhat: &[f64]) -> Result<FitnessReport, FitnessError> {
    check_lengths(y, yhat)?;
    if is_degenerate(y) || is_degenerate(yhat) {
        return Ok(FitnessReport::degenerate(Metric::Pcc));
    }
    Ok(FitnessReport {
        metric: Metric::Pcc,
        rho: product_moment(y, yhat),
        degenerate: false,
    })
}

/// Spearman rank correlation: Pearson correlation of average ranks.
pub fn spearman(y: &[f64], yhat: &[f64]) -> Result<FitnessReport, FitnessError> {
    check_lengths(y, yhat)?;
    if is_degenerate(y) || is_degenerate(yhat) {
        return Ok(FitnessReport::degenerate(Metric::Srcc));
    }
    let report = pearson(&ranks(y), &ranks(yhat))?;
    Ok(FitnessReport {
        metric: Metric::Srcc,
        ..report
    })
}

/// 1-based fractional ranks; tied values share the mean of their positions.
pub fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i+1 ..= j
        let rank = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            out[k] = rank;
        }
        i = j;
    }
    out
}

/// Scores an expression on a dataset: `|rho(truth, prediction)|`, degenerate
/// when the prediction is non-finite or constant.
pub fn ensemble_fitness(expr: &Expression, data: &Dataset, metric: Metric) -> Result<FitnessReport, FitnessError> {
    let prediction = expr.evaluate(&data.features)?;
    if !prediction.finite {
        check_lengths(&data.truth, &prediction.values)?;
        return Ok(FitnessReport::degenerate(metric));
    }
    metric.correlate(&data.truth, &prediction.values)
}

/// Least-squares linear model with intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
}

impl RegressionModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(row).map(|(a, x)| a * x).sum::<f64>()
    }

    pub fn predict(&self, features: &FeatureMatrix) -> Vec<f64> {
        let mut out = vec![self.intercept; features.n_rows()];
        for (coef, column) in self.coefficients.iter().zip(features.columns()) {
            for (o, x) in out.iter_mut().zip(column) {
                *o += coef * x;
            }
        }
        out
    }
}

/// Ordinary least squares with intercept, solved by Householder QR of the
/// design matrix `[X | 1]`.
pub fn fit_linear_regression(features: &FeatureMatrix, truth: &[f64]) -> Result<RegressionModel, FitnessError> {
    let rows = features.n_rows();
    let p = features.n_cols();
    if truth.len() != rows {
        return Err(FitnessError::LengthMismatch(rows, truth.len()));
    }
    let cols = p + 1;
    if rows < cols {
        return Err(FitnessError::Underdetermined {
            rows,
            features: p,
            needed: cols,
        });
    }

    // Column-major copy of the design matrix; last column is the intercept.
    let mut a: Vec<Vec<f64>> = features.columns().to_vec();
    a.push(vec![1.0; rows]);
    let mut b = truth.to_vec();
    let column_scale = a
        .iter()
        .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
        .fold(0.0f64, f64::max);

    for k in 0..cols {
        let norm = a[k][k..].iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm <= RANK_TOL * column_scale {
            return Err(FitnessError::SingularDesign);
        }
        let alpha = if a[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = a[k][k..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 > 0.0 {
            for col in a.iter_mut().skip(k) {
                let dot: f64 = v.iter().zip(&col[k..]).map(|(vi, ci)| vi * ci).sum();
                let f = 2.0 * dot / vnorm2;
                for (ci, vi) in col[k..].iter_mut().zip(&v) {
                    *ci -= f * vi;
                }
            }
            let dot: f64 = v.iter().zip(&b[k..]).map(|(vi, bi)| vi * bi).sum();
            let f = 2.0 * dot / vnorm2;
            for (bi, vi) in b[k..].iter_mut().zip(&v) {
                *bi -= f * vi;
            }
        }
        if a[k][k].abs() <= RANK_TOL * column_scale {
            return Err(FitnessError::SingularDesign);
        }
    }

    // Back substitution on R.
    let mut x = vec![0.0; cols];
    for i in (0..cols).rev() {
        let s: f64 = ((i + 1)..cols).map(|j| a[j][i] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    let intercept = x.pop().expect("intercept column");
    Ok(RegressionModel {
        coefficients: x,
        intercept,
    })
}

/// Row-wise arithmetic mean of the chosen feature columns.
pub fn mean_ensemble(features: &FeatureMatrix, subset: &[usize]) -> Result<Vec<f64>, FitnessError> {
    if subset.is_empty() {
        return Err(FitnessError::EmptySubset);
    }
    if let Some(&bad) = subset.iter().find(|&&j| j >= features.n_cols()) {
        return Err(FitnessError::BadFeature(bad));
    }
    let mut out = vec![0.0; features.n_rows()];
    for &j in subset {
        for (o, x) in out.iter_mut().zip(features.column(j)) {
            *o += x;
        }
    }
    let n = subset.len() as f64;
    out.iter_mut().for_each(|o| *o /= n);
    Ok(out)
}
