use std::path::Path;
use std::process::{Command, Output};

fn ge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ge-ensemble"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn datasets_lists_bundled() {
    let o = ge(&["datasets"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("mc30\t30 rows"));
    assert!(text.contains("geresid50\t50 rows"));
}

#[test]
fn baselines_prints_table() {
    let o = ge(&["baselines", "--dataset", "mc30", "--metric", "pcc"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let euc = text.lines().find(|l| l.starts_with("Bert-Euc")).unwrap();
    assert!(euc.contains("0.7509"), "{euc}");
    assert!(text.contains("linear regression"));
}

#[test]
fn evolve_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = ge(&[
        "evolve",
        "--dataset",
        "mc30",
        "--metric",
        "pcc",
        "--runs",
        "2",
        "--seed",
        "5",
        "--generations",
        "3",
        "--population",
        "16",
        "--out",
        out,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("median"));
    let formula = dir.path().join("mc30_pcc/run_6/formula.txt");
    assert!(formula.exists());
    let header_validation = std::fs::read_to_string(&formula)
        .unwrap()
        .lines()
        .find_map(|l| l.strip_prefix("# validation_fitness: ").map(str::to_string))
        .unwrap();
    let o = ge(&["eval", formula.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).trim_end().ends_with(&header_validation), "{}", stdout(&o));
}

#[test]
fn config_file_is_read() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        format!(
            "DATASET=geresid50\nMETRIC=srcc\nRUNS=1\nGENERATIONS=2\nPOPULATION_SIZE=10\nSELECTION=tournament\nOUT={}\n",
            dir.path().display()
        ),
    )
    .unwrap();
    let o = ge(&["evolve", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(Path::new(&dir.path().join("geresid50_srcc/run_1/record.json")).exists());
}

#[test]
fn exit_codes() {
    assert_eq!(ge(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(ge(&["evolve", "--runs", "0"]).status.code(), Some(1));
    assert_eq!(ge(&["baselines", "--dataset", "nope"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bnf = dir.path().join("loop.bnf");
    std::fs::write(&bnf, "<e> ::= <e>*<e>\n").unwrap();
    let o = ge(&[
        "evolve",
        "--grammar",
        bnf.to_str().unwrap(),
        "--runs",
        "1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(ge(&["--help"]).status.code(), Some(0));
}
