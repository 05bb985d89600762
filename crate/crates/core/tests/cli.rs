mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::fixtures;

fn soapbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_soapbench"))
        .args(args)
        .env_remove("OPENAI_API_KEY")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn config() -> String {
    fixtures().join("experiment.toml").display().to_string()
}

fn run_into(dir: &Path) -> Output {
    soapbench(&["run", "--config", &config(), "--backend", "mock", "--output-dir", dir.to_str().unwrap()])
}

#[test]
fn help_works_for_every_subcommand() {
    let commands: &[&[&str]] = &[
        &[],
        &["corpus"],
        &["corpus", "stats"],
        &["prompt"],
        &["prompt", "matrix"],
        &["prompt", "render"],
        &["run"],
        &["aggregate"],
        &["score"],
        &["tally"],
        &["report"],
        &["serve"],
    ];
    for cmd in commands {
        let mut args = cmd.to_vec();
        args.push("--help");
        let out = soapbench(&args);
        assert_eq!(out.status.code(), Some(0), "{args:?}: {}", stderr(&out));
        assert!(stdout(&out).contains("Usage"), "{args:?}");
    }
    let run_help = stdout(&soapbench(&["run", "--help"]));
    for flag in ["--config", "--backend", "--variants", "--repeats", "--concurrency", "--output-dir", "--seed"] {
        assert!(run_help.contains(flag), "run --help lacks {flag}");
    }
}

#[test]
fn bad_usage_exits_2() {
    assert_eq!(soapbench(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(soapbench(&["run"]).status.code(), Some(2));
    assert_eq!(soapbench(&["corpus", "stats"]).status.code(), Some(2));
}

#[test]
fn run_writes_ledger_aggregates_and_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_into(dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("Shot prompting"));
    assert!(text.contains("Context a & b & c & d"));
    assert_eq!(std::fs::read_to_string(dir.path().join("runs.jsonl")).unwrap().lines().count(), 250);
    assert!(dir.path().join("aggregates.json").exists());
    assert!(dir.path().join("tables.md").exists());

    // Same inputs, same bytes.
    let before = std::fs::read(dir.path().join("aggregates.json")).unwrap();
    let again = run_into(dir.path());
    assert!(stdout(&again).contains("0 new runs, 250 reused"));
    assert_eq!(std::fs::read(dir.path().join("aggregates.json")).unwrap(), before);

    let agg = soapbench(&["aggregate", "--output-dir", dir.path().to_str().unwrap()]);
    assert_eq!(agg.status.code(), Some(0));
    assert_eq!(stdout(&agg), std::fs::read_to_string(dir.path().join("tables.md")).unwrap());
}

#[test]
fn unknown_variant_is_a_usage_error_listing_valid_ids() {
    let dir = tempfile::tempdir().unwrap();
    let out = soapbench(&[
        "run",
        "--config",
        &config(),
        "--variants",
        "two-shot+z",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("two-shot+z"));
    assert!(err.contains("two-shot+a+b+c+d"));
    assert!(!dir.path().join("runs.jsonl").exists());
}

#[test]
fn remote_without_credential_exits_1_naming_the_variable() {
    let dir = tempfile::tempdir().unwrap();
    let out = soapbench(&[
        "run",
        "--config",
        &config(),
        "--backend",
        "remote",
        "--output-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("OPENAI_API_KEY"));
}

#[test]
fn corpus_and_prompt_commands() {
    let stats = soapbench(&["corpus", "stats", "--corpus", fixtures().join("corpus").to_str().unwrap()]);
    assert_eq!(stats.status.code(), Some(0));
    assert!(stdout(&stats).contains("mean 1209.0"));
    assert!(stdout(&stats).contains("min 37, max 87"));

    let matrix = soapbench(&["prompt", "matrix", "--config", &config()]);
    assert_eq!(stdout(&matrix).lines().count(), 10);

    let render = soapbench(&["prompt", "render", "--config", &config(), "--variant", "zero-shot", "--transcript", "2006"]);
    assert_eq!(render.status.code(), Some(0));
    assert!(!stdout(&render).contains("Example report:"));
    let bad = soapbench(&["prompt", "render", "--config", &config(), "--variant", "nine-shot", "--transcript", "2006"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn score_prints_both_metrics() {
    let t2 = fixtures().join("table2");
    let out = soapbench(&[
        "score",
        "--json",
        t2.join("generated.soap.txt").to_str().unwrap(),
        t2.join("reference.soap.txt").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(v["rouge1"]["f1"].as_f64().unwrap() > 0.0);
    assert!(v["rougeL"]["f1"].as_f64().unwrap() <= v["rouge1"]["f1"].as_f64().unwrap());
    assert_eq!(soapbench(&["score", "missing-a.txt", "missing-b.txt"]).status.code(), Some(1));
}

#[test]
fn tally_reproduces_error_table() {
    let out = soapbench(&["tally", fixtures().join("annotations").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    for row in ["Factual Errors", "Stylistic Errors", "Omissions", "Redundant Statements"] {
        assert!(text.contains(row));
    }
    let total: Vec<&str> = text.lines().find(|l| l.starts_with("Total")).unwrap().split_whitespace().collect();
    assert_eq!(total, ["Total", "75"]);
}

#[test]
fn report_sections_and_missing_annotations() {
    let dir = tempfile::tempdir().unwrap();
    run_into(dir.path());
    let d = dir.path().to_str().unwrap();

    let plain = soapbench(&["report", "--config", &config(), "--output-dir", d]);
    assert_eq!(plain.status.code(), Some(0), "{}", stderr(&plain));
    let text = stdout(&plain);
    assert!(text.contains("No annotations found"));
    assert!(text.contains("ROUGE F1 per variant"));
    assert!(text.contains("Word counts"));

    let annotations = fixtures().join("annotations");
    let full = soapbench(&["report", "--config", &config(), "--output-dir", d, "--annotations", annotations.to_str().unwrap()]);
    let text = stdout(&full);
    assert!(!text.contains("No annotations found"));
    for (row, n) in [("Factual Errors", "14"), ("Stylistic Errors", "17"), ("Omissions", "19"), ("Redundant Statements", "25")] {
        let line = text.lines().find(|l| l.starts_with(row)).unwrap();
        assert_eq!(line.split_whitespace().last(), Some(n), "{line}");
    }
    assert!(text.contains("duration of complaints"));

    let wc = soapbench(&["report", "--config", &config(), "--output-dir", d, "--section", "wordcount"]);
    let text = stdout(&wc);
    assert!(text.contains("Human Reference"));
    assert!(!text.contains("ROUGE"));
    assert!(!text.contains("annotations"));

    let again = soapbench(&["report", "--config", &config(), "--output-dir", d]);
    assert_eq!(again.stdout, plain.stdout);

    let empty = tempfile::tempdir().unwrap();
    let missing = soapbench(&["report", "--config", &config(), "--output-dir", empty.path().to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(1));
}
