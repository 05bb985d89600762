//! Runs every selected prompt variant on every input transcript several times,
//! scores each output against the paired reference, and aggregates.
//!
//! Successful runs are appended to `runs.jsonl` in the output directory, one
//! JSON object per line; failed runs go to `failures.jsonl`. A rerun skips
//! every `(variant, consultation, run_index)` already present in `runs.jsonl`,
//! so an interrupted experiment resumes where it stopped and a completed one
//! makes no backend calls at all.
//!
//! Aggregation is two-level: the mean F1 over repeats per consultation, then
//! the mean and sample standard deviation of those per-consultation means.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use futures::stream::{self, StreamExt};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::corpus::{load_corpus, Corpus, CorpusError};
use crate::llm::{request_digest, Backend, BackendConfig, LlmError};
use crate::prompt::{generate_matrix, parse_variant_id, render_prompt, ContextKey, PromptError, PromptPack, PromptVariant, ShotKind};
use crate::rouge::{score_texts, RougeScore, ScorePair, TokenizerOptions};
use crate::soap::render_soap;
use crate::stats;

pub const RUNS_FILE: &str = "runs.jsonl";
pub const FAILURES_FILE: &str = "failures.jsonl";
pub const AGGREGATES_FILE: &str = "aggregates.json";
pub const TABLES_FILE: &str = "tables.md";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Backend(#[from] LlmError),
    #[error("unknown variant ids {}; valid ids: {}", .unknown.join(", "), .valid.join(", "))]
    UnknownVariants { unknown: Vec<String>, valid: Vec<String> },
    #[error("invalid experiment configuration: {0}")]
    Config(String),
    #[error("{path}:{line}: {message}")]
    Ledger {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("ledger has no successful runs to aggregate")]
    EmptyLedger,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// `"all"` or an explicit list of variant ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum VariantSelection {
    #[default]
    All,
    Ids(Vec<String>),
}

impl Serialize for VariantSelection {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            VariantSelection::All => serializer.serialize_str("all"),
            VariantSelection::Ids(ids) => ids.serialize(serializer),
        }
    }
}

impl<'de> Deserialize<'de> for VariantSelection {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            One(String),
            Many(Vec<String>),
        }
        Ok(match Raw::deserialize(deserializer)? {
            Raw::One(s) if s == "all" => VariantSelection::All,
            Raw::One(s) => VariantSelection::Ids(
                s.split(',').map(|p| p.trim().to_string()).filter(|p| !p.is_empty()).collect(),
            ),
            Raw::Many(ids) => VariantSelection::Ids(ids),
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    pub root: PathBuf,
    /// Shot examples to use, in order. Empty means all shots, sorted by id.
    pub shots: Vec<String>,
    /// Re-draw the input/example split with this seed.
    pub shuffle_split: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptSection {
    /// Prompt-pack file; the built-in default pack when absent.
    pub pack: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub variants: VariantSelection,
    pub repeats: u32,
    pub concurrency: usize,
    pub output_dir: PathBuf,
    /// Stamp every record with this time instead of the wall clock, making
    /// ledgers byte-reproducible.
    pub fixed_timestamp: Option<DateTime<Utc>>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            variants: VariantSelection::All,
            repeats: 5,
            concurrency: 2,
            output_dir: PathBuf::from("out"),
            fixed_timestamp: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub corpus: CorpusSection,
    pub prompt: PromptSection,
    pub run: RunSection,
    pub backend: BackendConfig,
    pub tokenizer: TokenizerOptions,
}

impl ExperimentConfig {
    /// Parses a TOML config; relative paths resolve against `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, ExperimentError> {
        let mut config: ExperimentConfig =
            toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        config.corpus.root = base_dir.join(&config.corpus.root);
        config.run.output_dir = base_dir.join(&config.run.output_dir);
        config.prompt.pack = config.prompt.pack.map(|p| base_dir.join(p));
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ExperimentError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base).map_err(|e| match e {
            ExperimentError::Config(m) => ExperimentError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.run.repeats < 1 {
            return Err(ExperimentError::Config("repeats must be at least 1".into()));
        }
        if self.run.concurrency < 1 {
            return Err(ExperimentError::Config("concurrency must be at least 1".into()));
        }
        self.backend.validate()?;
        Ok(())
    }

    pub fn load_pack(&self) -> Result<PromptPack, ExperimentError> {
        Ok(match &self.prompt.pack {
            Some(path) => PromptPack::load(path)?,
            None => PromptPack::default(),
        })
    }

    /// Corpus with the configured shot selection or shuffled split applied.
    pub fn load_corpus(&self) -> Result<Corpus, ExperimentError> {
        let mut corpus = load_corpus(&self.corpus.root)?;
        if let Some(seed) = self.corpus.shuffle_split {
            let n = if self.corpus.shots.is_empty() {
                corpus.shots.len()
            } else {
                self.corpus.shots.len()
            };
            corpus = corpus.shuffle_split(seed, n)?;
        } else if !self.corpus.shots.is_empty() {
            corpus = corpus.with_shot_order(&self.corpus.shots)?;
        }
        Ok(corpus)
    }
}

/// The variants a configuration selects, in matrix order.
pub fn select_variants(all: Vec<PromptVariant>, selection: &VariantSelection) -> Result<Vec<PromptVariant>, ExperimentError> {
    let VariantSelection::Ids(ids) = selection else {
        return Ok(all);
    };
    let valid: Vec<String> = all.iter().map(|v| v.id.clone()).collect();
    let unknown: Vec<String> = ids.iter().filter(|id| !valid.contains(id)).cloned().collect();
    if !unknown.is_empty() {
        return Err(ExperimentError::UnknownVariants { unknown, valid });
    }
    Ok(all.into_iter().filter(|v| ids.contains(&v.id)).collect())
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RunKey {
    pub variant_id: String,
    pub consultation_id: String,
    pub run_index: u32,
}

impl std::fmt::Display for RunKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}#{}", self.variant_id, self.consultation_id, self.run_index)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub variant_id: String,
    pub consultation_id: String,
    pub run_index: u32,
    pub request_digest: String,
    pub response_text: String,
    pub score: ScorePair,
    pub timestamp: DateTime<Utc>,
}

impl RunRecord {
    pub fn key(&self) -> RunKey {
        RunKey {
            variant_id: self.variant_id.clone(),
            consultation_id: self.consultation_id.clone(),
            run_index: self.run_index,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub variant_id: String,
    pub consultation_id: String,
    pub run_index: u32,
    pub request_digest: String,
    pub error: String,
    pub timestamp: DateTime<Utc>,
}

impl FailureRecord {
    pub fn key(&self) -> RunKey {
        RunKey {
            variant_id: self.variant_id.clone(),
            consultation_id: self.consultation_id.clone(),
            run_index: self.run_index,
        }
    }
}

/// Successful runs plus logged failures.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunLedger {
    pub records: Vec<RunRecord>,
    pub failures: Vec<FailureRecord>,
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, ExperimentError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| ExperimentError::Ledger {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

impl RunLedger {
    /// Loads `runs.jsonl` and `failures.jsonl` from `dir`; missing files are
    /// empty.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self, ExperimentError> {
        let dir = dir.as_ref();
        Ok(Self {
            records: read_jsonl(&dir.join(RUNS_FILE))?,
            failures: read_jsonl(&dir.join(FAILURES_FILE))?,
        })
    }

    pub fn record_keys(&self) -> BTreeSet<RunKey> {
        self.records.iter().map(RunRecord::key).collect()
    }

    /// Failures that no later successful run has superseded.
    pub fn outstanding_failures(&self) -> Vec<&FailureRecord> {
        let done = self.record_keys();
        let mut seen = BTreeSet::new();
        self.failures
            .iter()
            .filter(|f| !done.contains(&f.key()) && seen.insert(f.key()))
            .collect()
    }

    /// Records whose stored score differs from a fresh recomputation against
    /// the corpus references by more than `tolerance`.
    pub fn verify_scores(&self, corpus: &Corpus, options: &TokenizerOptions, tolerance: f64) -> Vec<String> {
        let mut problems = Vec::new();
        for r in &self.records {
            let Some(reference) = corpus.reference(&r.consultation_id) else {
                problems.push(format!("unknown consultation: {}", r.key()));
                continue;
            };
            let fresh = score_texts(&r.response_text, &render_soap(&reference.report), options);
            let pairs = [
                (fresh.rouge1, r.score.rouge1),
                (fresh.rouge_l, r.score.rouge_l),
            ];
            let off = pairs.iter().any(|(a, b)| {
                (a.precision - b.precision).abs() > tolerance
                    || (a.recall - b.recall).abs() > tolerance
                    || (a.f1 - b.f1).abs() > tolerance
            });
            if off {
                problems.push(format!("score mismatch: {}", r.key()));
            }
        }
        problems
    }
}

struct LedgerWriter {
    runs: File,
    failures: Option<File>,
    dir: PathBuf,
}

impl LedgerWriter {
    fn open(dir: &Path) -> Result<Self, ExperimentError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let path = dir.join(RUNS_FILE);
        let runs = OpenOptions::new().create(true).append(true).open(&path).map_err(io_err(&path))?;
        Ok(Self {
            runs,
            failures: None,
            dir: dir.to_path_buf(),
        })
    }

    fn append<T: Serialize>(file: &mut File, path: &Path, value: &T) -> Result<(), ExperimentError> {
        let mut line = serde_json::to_string(value).expect("ledger records serialize");
        line.push('\n');
        file.write_all(line.as_bytes()).map_err(io_err(path))?;
        file.flush().map_err(io_err(path))
    }

    fn record(&mut self, record: &RunRecord) -> Result<(), ExperimentError> {
        let path = self.dir.join(RUNS_FILE);
        Self::append(&mut self.runs, &path, record)
    }

    fn failure(&mut self, failure: &FailureRecord) -> Result<(), ExperimentError> {
        let path = self.dir.join(FAILURES_FILE);
        if self.failures.is_none() {
            let f = OpenOptions::new().create(true).append(true).open(&path).map_err(io_err(&path))?;
            self.failures = Some(f);
        }
        Self::append(self.failures.as_mut().expect("opened above"), &path, failure)
    }
}

/// What a call to [`run_experiment_with`] did.
#[derive(Debug, Clone, Default)]
pub struct RunOutcome {
    /// Full ledger after the run, previously stored records included.
    pub ledger: RunLedger,
    pub new_records: usize,
    pub skipped: usize,
    pub failures: Vec<FailureRecord>,
    /// Stored records whose prompt no longer matches the current prompt pack.
    pub stale: Vec<RunKey>,
    pub backend_calls: usize,
}

struct Job<'a> {
    key: RunKey,
    digest: String,
    request: crate::llm::CompletionRequest,
    reference: &'a str,
}

/// Builds the backend from the configuration and runs the experiment.
pub async fn run_experiment(config: &ExperimentConfig) -> Result<RunOutcome, ExperimentError> {
    config.validate()?;
    let backend = Backend::from_config(&config.backend)?;
    run_experiment_with(config, &backend).await
}

pub async fn run_experiment_with(config: &ExperimentConfig, backend: &Backend) -> Result<RunOutcome, ExperimentError> {
    config.validate()?;
    let corpus = config.load_corpus()?;
    let pack = config.load_pack()?;
    let variants = select_variants(generate_matrix(&pack, &corpus.shots)?, &config.run.variants)?;

    let out_dir = &config.run.output_dir;
    let existing = RunLedger::load(out_dir)?;
    let stored: BTreeMap<RunKey, &str> = existing
        .records
        .iter()
        .map(|r| (r.key(), r.request_digest.as_str()))
        .collect();

    let references: BTreeMap<&str, String> = corpus
        .references
        .iter()
        .map(|r| (r.id.as_str(), render_soap(&r.report)))
        .collect();

    let mut outcome = RunOutcome::default();
    let mut jobs = Vec::new();
    for variant in &variants {
        for transcript in &corpus.transcripts {
            let prompt = render_prompt(variant, transcript);
            let digest = request_digest(&prompt.messages);
            for run_index in 0..config.run.repeats {
                let key = RunKey {
                    variant_id: variant.id.clone(),
                    consultation_id: transcript.id.clone(),
                    run_index,
                };
                if let Some(old) = stored.get(&key) {
                    if *old != digest {
                        tracing::warn!(%key, "stored run was produced by a different prompt");
                        outcome.stale.push(key);
                    }
                    outcome.skipped += 1;
                    continue;
                }
                jobs.push(Job {
                    key,
                    digest: digest.clone(),
                    request: config.backend.request(&prompt, run_index),
                    reference: &references[transcript.id.as_str()],
                });
            }
        }
    }

    let calls_before = backend.calls();
    let mut writer = LedgerWriter::open(out_dir)?;
    let mut ledger = existing;
    let options = config.tokenizer;
    let now = || config.run.fixed_timestamp.unwrap_or_else(Utc::now);

    let mut results = stream::iter(jobs)
        .map(|job| async move {
            let result = backend.complete(&job.request).await;
            (job, result)
        })
        .buffered(config.run.concurrency);

    while let Some((job, result)) = results.next().await {
        match result {
            Ok(resp) => {
                let record = RunRecord {
                    score: score_texts(&resp.text, job.reference, &options),
                    variant_id: job.key.variant_id,
                    consultation_id: job.key.consultation_id,
                    run_index: job.key.run_index,
                    request_digest: job.digest,
                    response_text: resp.text,
                    timestamp: now(),
                };
                writer.record(&record)?;
                ledger.records.push(record);
                outcome.new_records += 1;
            }
            Err(e) => {
                tracing::error!(key = %job.key, error = %e, "run failed");
                let failure = FailureRecord {
                    variant_id: job.key.variant_id,
                    consultation_id: job.key.consultation_id,
                    run_index: job.key.run_index,
                    request_digest: job.digest,
                    error: e.to_string(),
                    timestamp: now(),
                };
                writer.failure(&failure)?;
                ledger.failures.push(failure.clone());
                outcome.failures.push(failure);
            }
        }
    }

    outcome.backend_calls = backend.calls() - calls_before;
    outcome.ledger = ledger;
    Ok(outcome)
}

/// Mean score over one consultation's repeats, or over consultations.
fn mean_score(scores: &[RougeScore]) -> RougeScore {
    let m = |f: fn(&RougeScore) -> f64| {
        stats::mean(&scores.iter().map(f).collect::<Vec<_>>()).unwrap_or(0.0)
    };
    RougeScore {
        precision: m(|s| s.precision),
        recall: m(|s| s.recall),
        f1: m(|s| s.f1),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantAggregate {
    pub variant_id: String,
    /// Successful runs that went into this aggregate.
    pub runs: usize,
    /// Mean precision, recall and F1 over repeats, per consultation.
    pub per_consultation: BTreeMap<String, ScorePair>,
    pub rouge1_mean: f64,
    pub rouge1_sd: f64,
    #[serde(rename = "rougeL_mean")]
    pub rouge_l_mean: f64,
    #[serde(rename = "rougeL_sd")]
    pub rouge_l_sd: f64,
}

impl VariantAggregate {
    /// Aggregate from per-consultation mean F1 values alone.
    pub fn from_consultation_means(variant_id: impl Into<String>, rouge1: &[f64], rouge_l: &[f64]) -> Self {
        Self {
            variant_id: variant_id.into(),
            runs: rouge1.len(),
            per_consultation: BTreeMap::new(),
            rouge1_mean: stats::mean(rouge1).unwrap_or(0.0),
            rouge1_sd: stats::sample_sd(rouge1).unwrap_or(0.0),
            rouge_l_mean: stats::mean(rouge_l).unwrap_or(0.0),
            rouge_l_sd: stats::sample_sd(rouge_l).unwrap_or(0.0),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub variants: Vec<VariantAggregate>,
    /// Failed runs left out of every aggregate.
    pub excluded_runs: usize,
}

impl AggregateReport {
    pub fn get(&self, variant_id: &str) -> Option<&VariantAggregate> {
        self.variants.iter().find(|v| v.variant_id == variant_id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("aggregates serialize") + "\n"
    }
}

/// Two-level aggregation of F1 scores, independently for ROUGE-1 and ROUGE-L.
///
/// The result does not depend on record order: values are grouped and summed
/// in key order.
pub fn aggregate(ledger: &RunLedger) -> Result<AggregateReport, ExperimentError> {
    if ledger.records.is_empty() {
        return Err(ExperimentError::EmptyLedger);
    }

    // variant -> consultation -> run_index -> score; first record per key wins.
    let mut grouped: BTreeMap<&str, BTreeMap<&str, BTreeMap<u32, &ScorePair>>> = BTreeMap::new();
    for r in &ledger.records {
        grouped
            .entry(&r.variant_id)
            .or_default()
            .entry(&r.consultation_id)
            .or_default()
            .entry(r.run_index)
            .or_insert(&r.score);
    }

    let excluded_runs = ledger.outstanding_failures().len();
    if excluded_runs > 0 {
        tracing::warn!(excluded_runs, "failed runs excluded from aggregation");
    }

    let mut variants: Vec<VariantAggregate> = grouped
        .into_iter()
        .map(|(variant_id, consultations)| {
            let mut runs = 0;
            let per_consultation: BTreeMap<String, ScorePair> = consultations
                .into_iter()
                .map(|(cid, by_run)| {
                    runs += by_run.len();
                    let r1: Vec<RougeScore> = by_run.values().map(|s| s.rouge1).collect();
                    let rl: Vec<RougeScore> = by_run.values().map(|s| s.rouge_l).collect();
                    (
                        cid.to_string(),
                        ScorePair {
                            rouge1: mean_score(&r1),
                            rouge_l: mean_score(&rl),
                        },
                    )
                })
                .collect();
            let r1: Vec<f64> = per_consultation.values().map(|p| p.rouge1.f1).collect();
            let rl: Vec<f64> = per_consultation.values().map(|p| p.rouge_l.f1).collect();
            VariantAggregate {
                runs,
                per_consultation,
                ..VariantAggregate::from_consultation_means(variant_id, &r1, &rl)
            }
        })
        .collect();
    variants.sort_by_key(|v| row_order(&v.variant_id));

    Ok(AggregateReport {
        variants,
        excluded_runs,
    })
}

/// Table sections, in display order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TableGroup {
    Shots,
    ScopeContext,
    DomainContext,
    TotalContext,
    Abbreviations,
    Other,
}

impl TableGroup {
    pub fn title(self) -> &'static str {
        match self {
            TableGroup::Shots => "Shot prompting",
            TableGroup::ScopeContext => "Context: Scope",
            TableGroup::DomainContext => "Context: Domain",
            TableGroup::TotalContext => "Context: Total",
            TableGroup::Abbreviations => "Context: Abbreviation list",
            TableGroup::Other => "Other",
        }
    }

    pub fn of(variant_id: &str) -> TableGroup {
        let Some((_, set)) = parse_variant_id(variant_id) else {
            return TableGroup::Other;
        };
        if set.is_empty() {
            TableGroup::Shots
        } else if set.contains(ContextKey::Abbrev) {
            TableGroup::Abbreviations
        } else if set.iter().all(ContextKey::is_scope) {
            TableGroup::ScopeContext
        } else if set.iter().all(ContextKey::is_domain) {
            TableGroup::DomainContext
        } else {
            TableGroup::TotalContext
        }
    }
}

fn row_order(variant_id: &str) -> (TableGroup, Option<ShotKind>, usize, String, String) {
    let parsed = parse_variant_id(variant_id);
    (
        TableGroup::of(variant_id),
        parsed.as_ref().map(|(k, _)| *k),
        parsed.as_ref().map_or(0, |(_, s)| s.len()),
        parsed.map(|(_, s)| s.to_string()).unwrap_or_default(),
        variant_id.to_string(),
    )
}

/// Row label: "Two-shot" for shot variants, "Context a & b" for context
/// variants (with the shot kind appended when it is not two-shot).
pub fn row_label(variant_id: &str) -> String {
    match parse_variant_id(variant_id) {
        Some((kind, set)) if set.is_empty() => kind.label().to_string(),
        Some((kind, set)) => {
            let keys: Vec<&str> = set.iter().map(ContextKey::as_str).collect();
            let mut label = format!("Context {}", keys.join(" & "));
            if kind != ShotKind::TwoShot {
                label.push_str(&format!(" ({kind})"));
            }
            label
        }
        None => variant_id.to_string(),
    }
}

pub fn format_mean_sd(mean: f64, sd: f64) -> String {
    format!("{mean:.3}±{sd:.3}")
}

/// Plain-text table of mean±SD F1 per variant, grouped into shot, scope,
/// domain and combined context sections.
pub fn render_table(report: &AggregateReport) -> String {
    const HEAD: [&str; 3] = ["Variant", "ROUGE1 Mean±SD", "ROUGEL Mean±SD"];
    let rows: Vec<(TableGroup, String, String, String)> = report
        .variants
        .iter()
        .map(|v| {
            (
                TableGroup::of(&v.variant_id),
                row_label(&v.variant_id),
                format_mean_sd(v.rouge1_mean, v.rouge1_sd),
                format_mean_sd(v.rouge_l_mean, v.rouge_l_sd),
            )
        })
        .collect();

    let w0 = rows
        .iter()
        .map(|r| r.1.chars().count())
        .chain(rows.iter().map(|r| r.0.title().len()))
        .chain([HEAD[0].len()])
        .max()
        .unwrap_or(0);
    let w1 = HEAD[1].chars().count();

    let line = |a: &str, b: &str, c: &str| {
        let pad = |s: &str, w: usize| format!("{s}{}", " ".repeat(w.saturating_sub(s.chars().count())));
        format!("{}  {}  {}", pad(a, w0), pad(b, w1), c).trim_end().to_string()
    };

    let mut out = vec![line(HEAD[0], HEAD[1], HEAD[2])];
    let mut current = None;
    for (group, label, r1, rl) in &rows {
        if current != Some(*group) {
            out.push(group.title().to_string());
            current = Some(*group);
        }
        out.push(line(label, r1, rl));
    }
    if report.excluded_runs > 0 {
        out.push(format!("Excluded failed runs: {}", report.excluded_runs));
    }
    out.join("\n") + "\n"
}

/// Writes `aggregates.json` and `tables.md` into `dir`.
pub fn write_aggregates(dir: impl AsRef<Path>, report: &AggregateReport) -> Result<(), ExperimentError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let json = dir.join(AGGREGATES_FILE);
    fs::write(&json, report.to_json()).map_err(io_err(&json))?;
    let tables = dir.join(TABLES_FILE);
    fs::write(&tables, render_table(report)).map_err(io_err(&tables))?;
    Ok(())
}
