//! Grammatical evolution of aggregation formulas ("ensembles") over
//! precomputed semantic-similarity scores.
//!
//! The crate maps integer genomes through a BNF grammar into numpy-style
//! formulas over feature columns, scores them by absolute Pearson or Spearman
//! correlation with a human gold standard, and evolves them with tournament
//! selection, variable one-point crossover and per-codon mutation. The
//! [`experiment`] module wraps this into seeded 30-run batches with
//! per-generation statistics files and reference comparisons.

pub mod data;
pub mod evolution;
pub mod experiment;
pub mod fitness;
pub mod grammar;
pub mod phenotype;

pub use data::{bundled, load_csv, split, Dataset, DatasetSplit, FeatureMatrix};
pub use evolution::{run, EvolutionConfig, Genome, Individual, RunRecord};
pub use fitness::{pearson, spearman, Metric};
pub use grammar::{derive, Grammar};
pub use phenotype::{compile, Expression};
