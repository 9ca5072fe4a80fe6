//! The generational grammatical-evolution loop.
//!
//! A run initializes a population by random grammar-guided growth, then for a
//! fixed number of generations keeps the elite, fills the remaining slots with
//! tournament-selected, crossed-over and mutated offspring, and maps every new
//! genome through the grammar. Invalid genomes stay in the population but are
//! never selected.

mod init;
mod operators;

pub use init::{encode_choice, grow_genome};
pub use operators::{compare, crossover, crossover_at, mutate, tournament_index};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Dataset, DatasetSplit};
use crate::fitness::{ensemble_fitness, Metric};
use crate::grammar::{derive, Grammar};
use crate::phenotype::{compile, Expression};

pub const CODON_DOMAIN: u32 = 65536;

#[derive(Debug, Error)]
pub enum EvolutionError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("grammar cannot produce a complete derivation within depth {max_depth}")]
    GrammarNotGrowable { max_depth: usize },
    #[error("population has no valid individuals to select from")]
    NoValidIndividuals,
    #[error("grammar terminals do not form a valid expression: {0}")]
    Compile(#[from] crate::phenotype::PhenotypeError),
}

/// Integer codons in `[0, codon_domain)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Genome(Vec<u32>);

impl Genome {
    pub fn from_vec(codons: Vec<u32>) -> Self {
        Self(codons)
    }

    pub fn codons(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Copy of at most the first `max_length` codons.
    pub fn truncated(&self, max_length: usize) -> Genome {
        Genome(self.0[..self.0.len().min(max_length)].to_vec())
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub genome: Genome,
    pub phenotype: Option<Expression>,
    /// Training fitness; `None` for invalid individuals.
    pub fitness: Option<f64>,
    pub node_count: usize,
    pub depth: usize,
}

impl Individual {
    pub fn is_valid(&self) -> bool {
        self.fitness.is_some()
    }

    pub fn formula(&self) -> Option<String> {
        self.phenotype.as_ref().map(ToString::to_string)
    }
}

/// Run parameters. Defaults follow the published setup: population 100,
/// 200 generations, crossover probability 0.8, genome cap 1000, initial tree
/// depth 10, tree depth 18.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    pub population_size: usize,
    pub generations: usize,
    pub crossover_probability: f64,
    /// Per-codon mutation probability; `None` means `1 / genome length`.
    pub mutation_probability: Option<f64>,
    pub tournament_size: usize,
    pub elite_count: usize,
    pub max_genome_length: usize,
    pub max_init_tree_depth: usize,
    pub max_tree_depth: usize,
    pub codon_domain: u32,
    pub rng_seed: u64,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            population_size: 100,
            generations: 200,
            crossover_probability: 0.8,
            mutation_probability: None,
            tournament_size: 2,
            elite_count: 1,
            max_genome_length: 1000,
            max_init_tree_depth: 10,
            max_tree_depth: 18,
            codon_domain: CODON_DOMAIN,
            rng_seed: 0,
        }
    }
}

impl EvolutionConfig {
    /// Settings for the interpretable variant: shallow trees.
    pub fn interpretable() -> Self {
        Self {
            max_tree_depth: 8,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), EvolutionError> {
        let fail = |m: &str| Err(EvolutionError::InvalidConfig(m.to_string()));
        if self.population_size < 2 {
            return fail("population size must be at least 2");
        }
        if !(0.0..=1.0).contains(&self.crossover_probability) {
            return fail("crossover probability must lie in [0, 1]");
        }
        if let Some(p) = self.mutation_probability {
            if !(0.0..=1.0).contains(&p) {
                return fail("mutation probability must lie in [0, 1]");
            }
        }
        if self.tournament_size < 1 {
            return fail("tournament size must be at least 1");
        }
        if self.elite_count >= self.population_size {
            return fail("elite count must be smaller than the population");
        }
        if self.max_genome_length < 1 {
            return fail("max genome length must be at least 1");
        }
        if self.max_tree_depth < 1 || self.max_init_tree_depth < 1 {
            return fail("tree depth limits must be at least 1");
        }
        if self.codon_domain < 1 {
            return fail("codon domain must be non-empty");
        }
        Ok(())
    }

    /// Initial trees never exceed the depth the run itself enforces.
    pub fn init_depth(&self) -> usize {
        self.max_init_tree_depth.min(self.max_tree_depth)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    /// Averages are over valid individuals only.
    pub average_fitness: f64,
    pub average_genome_length: f64,
    pub average_tree_nodes: f64,
    pub best_fitness: f64,
    pub invalid_count: usize,
}

impl GenerationStats {
    pub fn of(generation: usize, population: &[Individual]) -> Self {
        let valid: Vec<&Individual> = population.iter().filter(|i| i.is_valid()).collect();
        let n = valid.len() as f64;
        let avg = |f: &dyn Fn(&Individual) -> f64| {
            if valid.is_empty() {
                f64::NAN
            } else {
                valid.iter().map(|i| f(i)).sum::<f64>() / n
            }
        };
        Self {
            generation,
            average_fitness: avg(&|i| i.fitness.unwrap_or(0.0)),
            average_genome_length: avg(&|i| i.genome.len() as f64),
            average_tree_nodes: avg(&|i| i.node_count as f64),
            best_fitness: valid.iter().filter_map(|i| i.fitness).fold(f64::NAN, f64::max),
            invalid_count: population.len() - valid.len(),
        }
    }
}

/// Maps genomes to scored individuals.
pub struct Evaluator<'a, F> {
    grammar: &'a Grammar,
    max_tree_depth: usize,
    fitness: F,
}

impl<'a, F> Evaluator<'a, F>
where
    F: Fn(&Expression) -> Option<f64>,
{
    pub fn new(grammar: &'a Grammar, max_tree_depth: usize, fitness: F) -> Self {
        Self {
            grammar,
            max_tree_depth,
            fitness,
        }
    }

    pub fn grammar(&self) -> &'a Grammar {
        self.grammar
    }

    pub fn evaluate(&self, genome: Genome) -> Result<Individual, EvolutionError> {
        let Some(tree) = derive(self.grammar, genome.codons(), self.max_tree_depth).into_tree() else {
            return Ok(Individual {
                genome,
                phenotype: None,
                fitness: None,
                node_count: 0,
                depth: 0,
            });
        };
        let expr = compile(&tree)?;
        let fitness = (self.fitness)(&expr);
        Ok(Individual {
            genome,
            node_count: expr.node_count(),
            depth: expr.depth(),
            phenotype: Some(expr),
            fitness,
        })
    }
}

/// Fitness closure over a dataset: `|rho|` of the chosen metric, `None` when
/// degenerate.
pub fn dataset_fitness(data: &Dataset, metric: Metric) -> impl Fn(&Expression) -> Option<f64> + '_ {
    move |expr| ensemble_fitness(expr, data, metric).ok().and_then(|r| r.fitness())
}

pub fn initialize<F, R>(
    evaluator: &Evaluator<'_, F>,
    config: &EvolutionConfig,
    rng: &mut R,
) -> Result<Vec<Individual>, EvolutionError>
where
    F: Fn(&Expression) -> Option<f64>,
    R: Rng + ?Sized,
{
    config.validate()?;
    (0..config.population_size)
        .map(|_| {
            let genome = grow_genome(evaluator.grammar(), config.init_depth(), config.codon_domain, rng)?;
            evaluator.evaluate(genome)
        })
        .collect()
}

/// Picks a tournament winner; see [`tournament_index`].
pub fn tournament_select<'p, R: Rng + ?Sized>(
    population: &'p [Individual],
    tournament_size: usize,
    rng: &mut R,
) -> Result<&'p Individual, EvolutionError> {
    tournament_index(population, tournament_size, rng)
        .map(|i| &population[i])
        .ok_or(EvolutionError::NoValidIndividuals)
}

/// Population indices of valid individuals, best first.
fn ranked_valid(population: &[Individual]) -> Vec<usize> {
    let mut valid: Vec<usize> = (0..population.len()).filter(|&i| population[i].is_valid()).collect();
    valid.sort_by(|&i, &j| compare(&population[i], &population[j]).then(i.cmp(&j)));
    valid
}

/// One generation: elites carried over unchanged, then tournament, crossover
/// and mutation until the population is full. Statistics describe the new
/// population.
pub fn step<F, R>(
    population: &[Individual],
    generation: usize,
    config: &EvolutionConfig,
    evaluator: &Evaluator<'_, F>,
    rng: &mut R,
) -> Result<(Vec<Individual>, GenerationStats), EvolutionError>
where
    F: Fn(&Expression) -> Option<f64>,
    R: Rng + ?Sized,
{
    let ranked = ranked_valid(population);
    if ranked.is_empty() {
        return Err(EvolutionError::NoValidIndividuals);
    }
    let mut valid_by_index = ranked.clone();
    valid_by_index.sort_unstable();

    let n = config.population_size;
    let mut next: Vec<Individual> = ranked
        .iter()
        .take(config.elite_count)
        .map(|&i| population[i].clone())
        .collect();

    let mut offspring = Vec::with_capacity(n);
    while next.len() + offspring.len() < n {
        let pa = operators::tournament_among(population, &valid_by_index, config.tournament_size, rng)
            .ok_or(EvolutionError::NoValidIndividuals)?;
        let pb = operators::tournament_among(population, &valid_by_index, config.tournament_size, rng)
            .ok_or(EvolutionError::NoValidIndividuals)?;
        let (ca, cb) = crossover(
            &population[pa].genome,
            &population[pb].genome,
            config.crossover_probability,
            config.max_genome_length,
            rng,
        );
        for child in [ca, cb] {
            if next.len() + offspring.len() == n {
                break;
            }
            let p = config.mutation_probability.unwrap_or(1.0 / child.len().max(1) as f64);
            offspring.push(mutate(&child, p, config.codon_domain, rng));
        }
    }

    for genome in offspring {
        next.push(evaluator.evaluate(genome)?);
    }
    let stats = GenerationStats::of(generation, &next);
    Ok((next, stats))
}

/// Best individual found in a run, re-scored on the validation rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestIndividual {
    pub generation: usize,
    pub genome: Genome,
    pub formula: String,
    pub node_count: usize,
    pub depth: usize,
    pub training_fitness: f64,
    /// `None` when the formula is constant or non-finite on the validation
    /// rows.
    pub validation_fitness: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub metric: Metric,
    pub config: EvolutionConfig,
    pub split: DatasetSplit,
    pub stats: Vec<GenerationStats>,
    pub best: BestIndividual,
}

/// A full run: initialization plus `config.generations` generations on the
/// training rows, then validation scoring of the best individual ever seen.
pub fn run(
    grammar: &Grammar,
    dataset: &Dataset,
    split: &DatasetSplit,
    config: &EvolutionConfig,
    metric: Metric,
) -> Result<RunRecord, EvolutionError> {
    config.validate()?;
    let training = dataset.training(split);
    let validation = dataset.validation(split);
    let evaluator = Evaluator::new(grammar, config.max_tree_depth, dataset_fitness(&training, metric));
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);

    let mut population = initialize(&evaluator, config, &mut rng)?;
    let mut stats = vec![GenerationStats::of(0, &population)];
    let mut best: Option<(usize, Individual)> = None;
    let mut track = |generation: usize, population: &[Individual]| {
        if let Some(&i) = ranked_valid(population).first() {
            let candidate = &population[i];
            let improves = match &best {
                None => true,
                Some((_, current)) => compare(candidate, current).is_lt(),
            };
            if improves {
                best = Some((generation, candidate.clone()));
            }
        }
    };
    track(0, &population);

    for generation in 1..=config.generations {
        let (next, generation_stats) = step(&population, generation, config, &evaluator, &mut rng)?;
        population = next;
        stats.push(generation_stats);
        track(generation, &population);
    }

    let (generation, best) = best.ok_or(EvolutionError::NoValidIndividuals)?;
    let expr = best.phenotype.as_ref().expect("valid individuals have a phenotype");
    let validation_fitness = ensemble_fitness(expr, &validation, metric)
        .ok()
        .and_then(|r| r.fitness());
    Ok(RunRecord {
        seed: config.rng_seed,
        metric,
        config: config.clone(),
        split: split.clone(),
        stats,
        best: BestIndividual {
            generation,
            formula: expr.to_string(),
            node_count: best.node_count,
            depth: best.depth,
            training_fitness: best.fitness.expect("valid"),
            validation_fitness,
            genome: best.genome,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{bundled, split};

    #[test]
    fn config_validation() {
        assert!(EvolutionConfig::default().validate().is_ok());
        let bad = [
            EvolutionConfig {
                population_size: 1,
                ..Default::default()
            },
            EvolutionConfig {
                crossover_probability: 1.5,
                ..Default::default()
            },
            EvolutionConfig {
                tournament_size: 0,
                ..Default::default()
            },
            EvolutionConfig {
                elite_count: 100,
                ..Default::default()
            },
            EvolutionConfig {
                mutation_probability: Some(-0.1),
                ..Default::default()
            },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(EvolutionError::InvalidConfig(_))), "{c:?}");
        }
    }

    #[test]
    fn single_derivation_grammar_is_constant() {
        let g = Grammar::parse("<s> ::= x[:,0]").unwrap();
        let mc = bundled("mc30").unwrap();
        let s = split(&mc, 0.7, 1).unwrap();
        let config = EvolutionConfig {
            population_size: 10,
            generations: 5,
            ..Default::default()
        };
        let record = run(&g, &mc, &s, &config, Metric::Pcc).unwrap();
        let first = record.stats[0].best_fitness;
        for st in &record.stats {
            assert_eq!(st.best_fitness, first);
            assert_eq!(st.average_fitness, first);
        }
        assert_eq!(record.best.formula, "x[:,0]");
    }

    #[test]
    fn zero_generations() {
        let g = Grammar::ensemble();
        let mc = bundled("mc30").unwrap();
        let s = split(&mc, 0.7, 1).unwrap();
        let config = EvolutionConfig {
            generations: 0,
            rng_seed: 3,
            ..Default::default()
        };
        let record = run(&g, &mc, &s, &config, Metric::Srcc).unwrap();
        assert_eq!(record.stats.len(), 1);
        // every initial genome derives; only constant formulas lack a fitness
        let training = mc.training(&s);
        let ev = Evaluator::new(&g, 18, dataset_fitness(&training, Metric::Srcc));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let population = initialize(&ev, &config, &mut rng).unwrap();
        assert!(population.iter().all(|i| i.phenotype.is_some()));
        for i in population.iter().filter(|i| !i.is_valid()) {
            let p = i.phenotype.as_ref().unwrap().evaluate(&training.features).unwrap();
            assert!(
                !p.finite || crate::fitness::is_degenerate(&p.values),
                "{:?}",
                i.formula()
            );
        }
        assert_eq!(record.best.generation, 0);
        assert_eq!(record.best.training_fitness, record.stats[0].best_fitness);
    }

    #[test]
    fn no_valid_individuals() {
        let g = Grammar::ensemble();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let dead = vec![
            Individual {
                genome: Genome::from_vec(vec![0]),
                phenotype: None,
                fitness: None,
                node_count: 0,
                depth: 0,
            };
            4
        ];
        assert!(matches!(
            tournament_select(&dead, 2, &mut rng),
            Err(EvolutionError::NoValidIndividuals)
        ));
        let ev = Evaluator::new(&g, 18, |_: &Expression| Some(0.5));
        let config = EvolutionConfig {
            population_size: 4,
            ..Default::default()
        };
        assert!(matches!(
            step(&dead, 1, &config, &ev, &mut rng),
            Err(EvolutionError::NoValidIndividuals)
        ));
    }
}
