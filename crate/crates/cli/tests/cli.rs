use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn iterlearn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iterlearn"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = iterlearn(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn corpus_train_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c.tsv");
    ok(&[
        "gen-corpus",
        "--language",
        "mix",
        "--i-max",
        "2",
        "--seed",
        "3",
        "--out",
        p(&corpus),
    ]);
    let text = fs::read_to_string(&corpus).unwrap();
    assert_eq!(text.lines().count(), 120 * 6);
    let model = dir.path().join("m");
    ok(&[
        "train",
        "--corpus",
        p(&corpus),
        "--language",
        "mix",
        "--max-epochs",
        "2",
        "--out",
        p(&model),
    ]);
    assert!(model.join("model.ckpt").is_file());
    let log = fs::read_to_string(model.join("training_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 3);
    let metrics = dir.path().join("metrics.csv");
    ok(&[
        "eval",
        "--model",
        p(&model.join("model.ckpt")),
        "--corpus",
        p(&corpus),
        "--language",
        "mix",
        "--out",
        p(&metrics),
    ]);
    let rows = fs::read_to_string(&metrics).unwrap();
    assert!(rows.starts_with("generation,seed,experiment,speak_acc,listen_acc,avg_len,fix,"));
    assert_eq!(rows.lines().count(), 2);
}

#[test]
fn evolve_sample_and_export() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.json");
    fs::write(
        &config,
        r#"{"experiment": "tiny", "i_max": 2, "generations": 1, "max_epochs": 2, "seeds": [7]}"#,
    )
    .unwrap();
    let run = dir.path().join("run");
    ok(&["evolve", "--config", p(&config), "--out", p(&run)]);
    assert!(run.join("manifest.json").is_file());
    assert!(run.join("tiny").join("metrics_mean.csv").is_file());
    let chain = run.join("tiny").join("7");
    assert!(chain.join("gen1").join("corpus.tsv").is_file());

    let table = ok(&[
        "sample-utterances",
        "--run",
        p(&chain),
        "--generation",
        "1",
        "--trajectory",
        "up up left",
    ]);
    let lines: Vec<&str> = table.lines().collect();
    assert!(!lines.is_empty() && lines.len() <= 6);
    let mut seen = std::collections::HashSet::new();
    for l in &lines {
        assert!(seen.insert(*l));
        assert!(l.contains('\t'));
    }

    let export = dir.path().join("all.csv");
    ok(&["export-plots-data", "--run", p(&run), "--out", p(&export)]);
    assert_eq!(fs::read_to_string(&export).unwrap().lines().count(), 1 + 2);
}

#[test]
fn invalid_arguments_fail_before_work() {
    let dir = tempfile::tempdir().unwrap();
    let out = iterlearn(&[
        "evolve",
        "--preset",
        "mix",
        "--ell",
        "0",
        "--out",
        p(dir.path()),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("selection_strength"));
    assert!(!dir.path().join("manifest.json").exists());
    let out = iterlearn(&["evolve", "--preset", "nope"]);
    assert!(!out.status.success());
    let out = iterlearn(&[
        "gen-corpus",
        "--language",
        "fix",
        "--i-max",
        "9",
        "--out",
        "x",
    ]);
    assert!(!out.status.success());
    let out = iterlearn(&[
        "sample-utterances",
        "--run",
        p(dir.path()),
        "--generation",
        "0",
        "--trajectory",
        "up",
    ]);
    assert!(!out.status.success());
}

#[test]
fn run_is_an_alias_of_evolve() {
    let out = iterlearn(&["run", "--help"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("--preset"));
}
