mod common;

use std::fs;

use common::{fixture_config, fixtures, FakeServer};
use soapbench::corpus::{corpus_stats, load_corpus, save_corpus, validate_corpus};
use soapbench::experiment::{
    aggregate, run_experiment_with, write_aggregates, RunLedger, VariantSelection, AGGREGATES_FILE, FAILURES_FILE,
    RUNS_FILE,
};
use soapbench::llm::{Backend, MockBackend};
use soapbench::prompt::PromptPack;
use soapbench::rouge::TokenizerOptions;

#[test]
fn fixture_corpus_matches_its_description() {
    let corpus = load_corpus(fixtures().join("corpus")).unwrap();
    assert_eq!(
        (corpus.transcripts.len(), corpus.references.len(), corpus.shots.len()),
        (5, 5, 2)
    );
    assert!(validate_corpus(&corpus).is_empty());
    let counts: Vec<usize> = corpus.transcripts.iter().map(|t| t.word_count).collect();
    assert_eq!(counts, [606, 1000, 1200, 1370, 1869]);
    let refs: Vec<usize> = corpus.references.iter().map(|r| r.word_count).collect();
    assert_eq!(refs, [37, 50, 60, 66, 87]);

    let s = corpus_stats(&corpus).unwrap();
    assert_eq!(s.transcript_mean, 1209.0);
    assert_eq!((s.transcript_min, s.transcript_max), (606, 1869));
    assert_eq!((s.reference_min, s.reference_max), (37, 87));
}

#[test]
fn corpus_survives_save_and_reload() {
    let corpus = load_corpus(fixtures().join("corpus")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_corpus(&corpus, dir.path()).unwrap();
    let again = load_corpus(dir.path()).unwrap();
    assert_eq!(again, corpus);
}

#[test]
fn shipped_prompt_pack_equals_builtin() {
    let shipped = PromptPack::load(fixtures().join("prompt_pack.toml")).unwrap();
    assert_eq!(shipped, PromptPack::default());
}

#[tokio::test]
async fn mock_experiment_is_reproducible_and_resumable() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut aggregates = Vec::new();
    for dir in [&a, &b] {
        let config = fixture_config(dir.path());
        let backend = Backend::Mock(MockBackend::new(config.backend.mock_seed));
        let outcome = run_experiment_with(&config, &backend).await.unwrap();
        assert_eq!(outcome.new_records, 250);
        assert_eq!(outcome.backend_calls, 250);
        write_aggregates(dir.path(), &aggregate(&outcome.ledger).unwrap()).unwrap();
        aggregates.push(fs::read(dir.path().join(AGGREGATES_FILE)).unwrap());
    }
    assert_eq!(aggregates[0], aggregates[1]);
    assert_eq!(
        fs::read(a.path().join(RUNS_FILE)).unwrap(),
        fs::read(b.path().join(RUNS_FILE)).unwrap()
    );

    // Resume: nothing left to do.
    fs::remove_file(a.path().join(AGGREGATES_FILE)).unwrap();
    let config = fixture_config(a.path());
    let backend = Backend::Mock(MockBackend::new(config.backend.mock_seed));
    let outcome = run_experiment_with(&config, &backend).await.unwrap();
    assert_eq!((outcome.new_records, outcome.skipped, outcome.backend_calls), (0, 250, 0));
    assert!(outcome.stale.is_empty());
    write_aggregates(a.path(), &aggregate(&outcome.ledger).unwrap()).unwrap();
    assert_eq!(fs::read(a.path().join(AGGREGATES_FILE)).unwrap(), aggregates[0]);

    // Stored scores agree with a fresh recomputation.
    let corpus = config.load_corpus().unwrap();
    let ledger = RunLedger::load(a.path()).unwrap();
    assert!(ledger.verify_scores(&corpus, &TokenizerOptions::default(), 1e-12).is_empty());
}

#[tokio::test]
async fn interrupted_run_completes_only_missing_records() {
    let dir = tempfile::tempdir().unwrap();
    let config = fixture_config(dir.path());
    let backend = Backend::Mock(MockBackend::new(config.backend.mock_seed));
    run_experiment_with(&config, &backend).await.unwrap();
    let full = fs::read_to_string(dir.path().join(RUNS_FILE)).unwrap();

    // Keep the first 100 lines, as if the process died there.
    let partial: String = full.lines().take(100).map(|l| format!("{l}\n")).collect();
    fs::write(dir.path().join(RUNS_FILE), partial).unwrap();
    let backend = Backend::Mock(MockBackend::new(config.backend.mock_seed));
    let outcome = run_experiment_with(&config, &backend).await.unwrap();
    assert_eq!((outcome.new_records, outcome.backend_calls), (150, 150));

    let mut resumed: Vec<String> = fs::read_to_string(dir.path().join(RUNS_FILE)).unwrap().lines().map(String::from).collect();
    let mut original: Vec<String> = full.lines().map(String::from).collect();
    resumed.sort();
    original.sort();
    assert_eq!(resumed, original);
}

#[tokio::test]
async fn changed_prompt_marks_stored_runs_stale() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = fixture_config(dir.path());
    config.run.variants = VariantSelection::Ids(vec!["zero-shot".into()]);
    config.run.repeats = 1;
    let backend = Backend::Mock(MockBackend::new(1));
    run_experiment_with(&config, &backend).await.unwrap();

    let mut pack = PromptPack::default();
    pack.base.constraint.push_str(" Be brief.");
    let pack_path = dir.path().join("pack.toml");
    fs::write(&pack_path, toml::to_string(&pack).unwrap()).unwrap();
    config.prompt.pack = Some(pack_path);
    let outcome = run_experiment_with(&config, &backend).await.unwrap();
    assert_eq!(outcome.stale.len(), 5);
    assert_eq!(outcome.backend_calls, 0);
}

#[tokio::test]
async fn failed_runs_are_logged_and_excluded() {
    let server = FakeServer::start(&[401]).await;
    std::env::set_var("SOAPBENCH_TEST_KEY_PIPELINE", "sk-x");
    let dir = tempfile::tempdir().unwrap();
    let mut config = fixture_config(dir.path());
    config.backend = server.backend_config("SOAPBENCH_TEST_KEY_PIPELINE");
    config.run.variants = VariantSelection::Ids(vec!["two-shot".into()]);
    config.run.repeats = 2;
    let backend = Backend::from_config(&config.backend).unwrap();
    let outcome = run_experiment_with(&config, &backend).await.unwrap();
    assert_eq!(outcome.failures.len(), 10);
    assert_eq!(outcome.new_records, 0);

    let ledger = RunLedger::load(dir.path()).unwrap();
    assert_eq!(ledger.failures.len(), 10);
    assert!(ledger.records.is_empty());
    assert!(dir.path().join(FAILURES_FILE).exists());
    assert!(fs::read_to_string(dir.path().join(FAILURES_FILE)).unwrap().contains("authentication"));
    assert!(!fs::read_to_string(dir.path().join(FAILURES_FILE)).unwrap().contains("sk-x"));
    assert!(aggregate(&ledger).is_err());
}
