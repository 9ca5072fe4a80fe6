mod common;

use std::fs;
use std::path::Path;

use ge_ensemble::data::{bundled, parse_csv, split};
use ge_ensemble::experiment::{
    evaluate_formula, report_baselines, run_experiment, ExperimentConfig, ExperimentError, FormulaFile, GrammarChoice,
};
use ge_ensemble::fitness::Metric;
use ge_ensemble::RunRecord;

fn quick(dataset: &str, metric: Metric, out: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(dataset, metric);
    c.runs = 4;
    c.out_dir = out.to_path_buf();
    c.set("POPULATION_SIZE", "20").unwrap();
    c.set("GENERATIONS", "6").unwrap();
    c
}

#[test]
fn batch_layout_and_stats_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = quick("mc30", Metric::Srcc, dir.path());
    let summary = run_experiment(&config).unwrap();
    let batch = dir.path().join("mc30_srcc");
    for seed in 1..=4 {
        let run = batch.join(format!("run_{seed}"));
        for name in [
            "avg_fitness.txt",
            "avg_genome_length.txt",
            "avg_tree_nodes.txt",
            "best_fitness.txt",
        ] {
            let text = fs::read_to_string(run.join(name)).unwrap();
            let lines: Vec<&str> = text.lines().collect();
            assert_eq!(lines.len(), 7, "{name}");
            for (g, line) in lines.iter().enumerate() {
                let (gen, value) = line.split_once(' ').unwrap();
                assert_eq!(gen.parse::<usize>().unwrap(), g);
                value.parse::<f64>().unwrap();
            }
        }
        assert!(run.join("formula.txt").exists());
        let record: RunRecord = serde_json::from_str(&fs::read_to_string(run.join("record.json")).unwrap()).unwrap();
        assert_eq!(record.seed, seed);
    }
    assert!(batch.join("summary.txt").exists());
    assert!(batch.join("summary.json").exists());
    assert_eq!(summary.runs.len(), 4);
    assert!(!dir.path().join(".mc30_srcc.partial").exists());
}

#[test]
fn median_matches_per_run_file() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = quick("geresid50", Metric::Pcc, dir.path());
    config.runs = 5;
    let summary = run_experiment(&config).unwrap();
    let text = fs::read_to_string(dir.path().join("geresid50_pcc/validation_fitness.txt")).unwrap();
    let values: Vec<f64> = text
        .lines()
        .map(|l| l.split_once(' ').unwrap().1.parse().unwrap())
        .collect();
    assert_eq!(values.len(), 5);
    assert_eq!(summary.five_number.median, common::median(&values));
    let f = summary.five_number;
    assert!(f.min <= f.q1 && f.q1 <= f.median && f.median <= f.q3 && f.q3 <= f.max);
}

#[test]
fn identical_configs_write_identical_trees() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_experiment(&quick("mc30", Metric::Pcc, a.path())).unwrap();
    run_experiment(&quick("mc30", Metric::Pcc, b.path())).unwrap();
    let ha = common::tree_hashes(a.path());
    assert!(ha.len() > 20);
    assert_eq!(ha, common::tree_hashes(b.path()));
    // Rerunning into the same directory replaces the batch in place.
    run_experiment(&quick("mc30", Metric::Pcc, a.path())).unwrap();
    assert_eq!(ha, common::tree_hashes(a.path()));
}

#[test]
fn formula_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let config = quick("mc30", Metric::Srcc, dir.path());
    run_experiment(&config).unwrap();
    let data = bundled("mc30").unwrap();
    let validation = data.validation(&split(&data, 0.7, 1).unwrap());
    for seed in 1..=4 {
        let run = dir.path().join(format!("mc30_srcc/run_{seed}"));
        let file = FormulaFile::load(&run.join("formula.txt")).unwrap();
        assert_eq!(file.get("dataset"), Some("mc30"));
        assert_eq!(file.get("seed"), Some(seed.to_string().as_str()));
        let record: RunRecord = serde_json::from_str(&fs::read_to_string(run.join("record.json")).unwrap()).unwrap();
        let again = evaluate_formula(&file.expression, &validation, Metric::Srcc)
            .unwrap()
            .fitness();
        assert_eq!(again, record.best.validation_fitness);
        assert_eq!(file.expression.to_string(), record.best.formula);
    }
}

#[test]
fn zero_generation_single_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = quick("mc30", Metric::Pcc, dir.path());
    config.runs = 1;
    config.set("GENERATIONS", "0").unwrap();
    let summary = run_experiment(&config).unwrap();
    assert_eq!(summary.runs.len(), 1);
    let best = fs::read_to_string(dir.path().join("mc30_pcc/run_1/best_fitness.txt")).unwrap();
    assert_eq!(best.lines().count(), 1);
}

#[test]
fn interp_batches_use_reference_for_interp() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = quick("mc30", Metric::Srcc, dir.path());
    config.grammar = GrammarChoice::EnsembleInterp;
    let summary = run_experiment(&config).unwrap();
    let r = summary.reference.unwrap();
    assert!((r.delta - (summary.five_number.median - r.reference_ge_interp)).abs() < 1e-15);
    for run in &summary.runs {
        assert!(!run.formula.contains("np.exp") && !run.formula.contains("plog") && !run.formula.contains("psqrt"));
    }
}

#[test]
fn failures_leave_no_output() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = quick("no_such_dataset", Metric::Pcc, dir.path());
    let err = run_experiment(&config).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    config.dataset = "mc30".into();
    config.grammar = GrammarChoice::File(dir.path().join("missing.bnf"));
    assert_eq!(run_experiment(&config).unwrap_err().exit_code(), 2);
    let bnf = dir.path().join("loop.bnf");
    fs::write(&bnf, "<e> ::= <e>+<e>\n").unwrap();
    config.grammar = GrammarChoice::File(bnf);
    assert!(matches!(run_experiment(&config), Err(ExperimentError::Engine(_))));
    let names: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert_eq!(names, ["loop.bnf"]);
}

#[test]
fn baselines_report() {
    let data = bundled("mc30").unwrap();
    let s = split(&data, 0.7, 1).unwrap();
    let report = report_baselines(&data, Metric::Pcc, &s).unwrap();
    let euc = report.features.iter().find(|f| f.name == "Bert-Euc").unwrap();
    assert!((euc.full.unwrap() - 0.751).abs() <= 0.005);
    assert!(report.lr_in_sample.unwrap() >= euc.full.unwrap());
    assert_eq!(report.mean_ensemble_features, ["Bert-Cos", "Bert-Euc", "Bert-Man"]);
    assert!(report.to_string().contains("linear regression"));

    let report = report_baselines(
        &bundled("geresid50").unwrap(),
        Metric::Srcc,
        &split(&bundled("geresid50").unwrap(), 0.7, 1).unwrap(),
    )
    .unwrap();
    let inn = report.features.iter().find(|f| f.name == "Bert-Inn").unwrap();
    assert!((inn.full.unwrap() - 0.740).abs() <= 0.005);

    let copy = parse_csv(
        "copy",
        "response,a,b\n0.1,0.1,3\n0.4,0.4,1\n0.2,0.2,2\n0.9,0.9,0\n0.5,0.5,5\n0.3,0.3,4\n0.7,0.7,9\n0.8,0.8,1\n",
    )
    .unwrap();
    let s = split(&copy, 0.5, 1).unwrap();
    let report = report_baselines(&copy, Metric::Pcc, &s).unwrap();
    assert_eq!(report.features[0].full, Some(1.0));
    assert_eq!(report.mean_ensemble_features, ["a", "b"]);
}
