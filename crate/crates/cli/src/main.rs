use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ge_ensemble::data::{self, DEFAULT_TRAIN_FRACTION};
use ge_ensemble::experiment::{
    evaluate_formula, report_baselines, run_experiment, ExperimentConfig, ExperimentError, FormulaFile, GrammarChoice,
    DEFAULT_SPLIT_SEED,
};
use ge_ensemble::fitness::Metric;

#[derive(Parser)]
#[command(
    name = "ge-ensemble",
    version,
    about = "Evolve aggregation formulas over similarity scores"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Pcc,
    Srcc,
}

impl From<MetricArg> for Metric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Pcc => Metric::Pcc,
            MetricArg::Srcc => Metric::Srcc,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Rows {
    All,
    Train,
    Validation,
}

#[derive(clap::Args)]
struct SplitArgs {
    /// Fraction of rows used for training.
    #[arg(long = "split", default_value_t = DEFAULT_TRAIN_FRACTION)]
    fraction: f64,
    #[arg(long, default_value_t = DEFAULT_SPLIT_SEED)]
    split_seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Run a seeded batch and write statistics, formulas and a summary.
    Evolve {
        /// Bundled dataset name or CSV path.
        #[arg(long)]
        dataset: Option<String>,
        /// `ensemble`, `ensemble_interp` or a BNF file.
        #[arg(long)]
        grammar: Option<String>,
        #[arg(long, value_enum)]
        metric: Option<MetricArg>,
        #[arg(long)]
        runs: Option<usize>,
        /// First seed; runs use seed, seed+1, ...
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        generations: Option<usize>,
        #[arg(long)]
        population: Option<usize>,
        #[arg(long)]
        crossover_prob: Option<f64>,
        #[arg(long = "split")]
        fraction: Option<f64>,
        #[arg(long)]
        split_seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// KEY=value file; flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Single features, linear regression and the mean ensemble.
    Baselines {
        #[arg(long)]
        dataset: String,
        #[arg(long, value_enum, default_value = "srcc")]
        metric: MetricArg,
        #[command(flatten)]
        split: SplitArgs,
    },
    /// Score a saved formula file against a dataset.
    Eval {
        formula: PathBuf,
        #[arg(long)]
        dataset: Option<String>,
        /// Defaults to the metric in the file header, else srcc.
        #[arg(long, value_enum)]
        metric: Option<MetricArg>,
        #[arg(long, value_enum, default_value = "validation")]
        rows: Rows,
        #[command(flatten)]
        split: SplitArgs,
    },
    /// List bundled datasets.
    Datasets,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(command: Command) -> Result<(), ExperimentError> {
    match command {
        Command::Evolve {
            dataset,
            grammar,
            metric,
            runs,
            seed,
            generations,
            population,
            crossover_prob,
            fraction,
            split_seed,
            out,
            config,
        } => {
            let mut c = ExperimentConfig::new("mc30", Metric::Srcc);
            if let Some(path) = config {
                c.apply_config_file(&path)?;
            }
            if let Some(d) = dataset {
                c.dataset = d;
            }
            if let Some(g) = grammar {
                c.grammar = GrammarChoice::parse(&g);
            }
            if let Some(m) = metric {
                c.metric = m.into();
            }
            if let Some(r) = runs {
                c.runs = r;
            }
            if let Some(s) = seed {
                c.base_seed = s;
            }
            c.overrides.generations = generations.or(c.overrides.generations);
            c.overrides.population_size = population.or(c.overrides.population_size);
            c.overrides.crossover_probability = crossover_prob.or(c.overrides.crossover_probability);
            if let Some(f) = fraction {
                c.split_fraction = f;
            }
            if let Some(s) = split_seed {
                c.split_seed = s;
            }
            if let Some(o) = out {
                c.out_dir = o;
            }
            let summary = run_experiment(&c)?;
            print!("{summary}");
            Ok(())
        }
        Command::Baselines { dataset, metric, split } => {
            let d = data::resolve(&dataset)?;
            let s = data::split(&d, split.fraction, split.split_seed)?;
            print!("{}", report_baselines(&d, metric.into(), &s)?);
            Ok(())
        }
        Command::Eval {
            formula,
            dataset,
            metric,
            rows,
            split,
        } => {
            let file = FormulaFile::load(&formula)?;
            let dataset = dataset
                .or_else(|| file.get("dataset").map(str::to_string))
                .ok_or_else(|| ExperimentError::Usage("no --dataset and no dataset in the formula header".into()))?;
            let metric = match (metric, file.get("metric")) {
                (Some(m), _) => m.into(),
                (None, Some(m)) => m
                    .parse()
                    .map_err(|_| ExperimentError::Usage(format!("unknown metric `{m}` in formula header")))?,
                (None, None) => Metric::Srcc,
            };
            let d = data::resolve(&dataset)?;
            let d = match rows {
                Rows::All => d,
                Rows::Train => d.training(&data::split(&d, split.fraction, split.split_seed)?),
                Rows::Validation => d.validation(&data::split(&d, split.fraction, split.split_seed)?),
            };
            let report = evaluate_formula(&file.expression, &d, metric)?;
            match report.fitness() {
                Some(f) => println!("{} {} on {} rows: {f}", d.name, metric.name(), d.n_rows()),
                None => println!("{} {} on {} rows: degenerate", d.name, metric.name(), d.n_rows()),
            }
            Ok(())
        }
        Command::Datasets => {
            for name in data::BUNDLED {
                let d = data::bundled(name)?;
                println!("{name}\t{} rows\t{}", d.n_rows(), d.feature_names.join(","));
            }
            Ok(())
        }
    }
}
