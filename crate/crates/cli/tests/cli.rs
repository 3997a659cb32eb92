use std::fs;

use emu_core::evaluator::EvalReport;

fn emu(args: &[&str]) -> i32 {
    let mut argv = vec!["emu"];
    argv.extend_from_slice(args);
    emu_cli::run(argv)
}

#[test]
fn six_languages_give_eleven_cells() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let common = [
        "--set", "synthetic.languages=6",
        "--set", "synthetic.per_intent=6",
        "--set", "synthetic.dim=16",
        "--set", "variant.name=emu-no-ld",
        "--out", out,
    ];
    assert_eq!(emu(&[&["train"][..], &common].concat()), 0);
    assert_eq!(emu(&[&["eval"][..], &common].concat()), 0);
    let report: EvalReport =
        serde_json::from_str(&fs::read_to_string(dir.path().join("eval_report.json")).unwrap()).unwrap();
    let labels: Vec<String> = report.cells.iter().map(|c| c.label()).collect();
    assert_eq!(labels.len(), 11);
    assert_eq!(labels[0], "en-en");
    assert!(labels.contains(&"en->zh".to_string()) && labels.contains(&"ja->en".to_string()));
    let table = fs::read_to_string(dir.path().join("eval_report.txt")).unwrap();
    assert!(table.contains("en->fr"));
}

#[test]
fn unknown_key_exits_2_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    assert_eq!(emu(&["train", "--set", "hp.alpah=3", "--out", out.to_str().unwrap()]), 2);
    assert!(!out.exists());
}

#[test]
fn invalid_value_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    assert_eq!(emu(&["gen-data", "--set", "synthetic.rho=1.5", "--out", out.to_str().unwrap()]), 2);
    assert!(!out.exists());
}

#[test]
fn eval_without_model_evaluates_frozen_space() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(emu(&["gen-data", "--set", "synthetic.per_intent=6", "--out", out]), 0);
    let corpus = dir.path().join("corpus.jsonl");
    assert_eq!(emu(&["eval", "--frozen", "--corpus", corpus.to_str().unwrap(), "--out", out]), 0);
    assert!(dir.path().join("eval_report.json").exists());
}
