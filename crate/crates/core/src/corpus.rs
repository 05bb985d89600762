//! Consultation corpus: input transcripts, their human reference reports, and
//! the SOAP examples used for shot prompting.
//!
//! On-disk layout:
//!
//! ```text
//! <root>/transcripts/<id>.txt
//! <root>/references/<id>.soap.txt
//! <root>/shots/<id>.soap.txt
//! <root>/shots/<id>.txt          (optional paired transcript)
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::soap::{parse_soap, render_soap, word_count, SectionWordCounts, SoapError, SoapReport};
use crate::stats;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("transcript {0} has no reference report")]
    MissingReference(String),
    #[error("{path}:{line}: {message}")]
    ParseFailure {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("corpus is inconsistent: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("unknown shot id {0}")]
    UnknownShot(String),
    #[error("cannot shuffle split: {0}")]
    Split(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub id: String,
    pub text: String,
    pub word_count: usize,
}

impl Transcript {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        Self {
            id: id.into(),
            word_count: word_count(&text),
            text,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceReport {
    pub id: String,
    pub report: SoapReport,
    /// Words across the four SOAP sections; markers and addenda excluded.
    pub word_count: usize,
}

impl ReferenceReport {
    pub fn new(id: impl Into<String>, report: SoapReport) -> Self {
        Self {
            id: id.into(),
            word_count: SectionWordCounts::of(&report).total,
            report,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotExample {
    pub id: String,
    pub report: SoapReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub transcripts: Vec<Transcript>,
    pub references: Vec<ReferenceReport>,
    pub shots: Vec<ShotExample>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub transcript_mean: f64,
    pub transcript_sd: f64,
    pub transcript_min: usize,
    pub transcript_max: usize,
    pub reference_mean: f64,
    pub reference_sd: f64,
    pub reference_min: usize,
    pub reference_max: usize,
}

/// File stems with the given suffix, sorted.
fn stems(dir: &Path, suffix: &str) -> Result<BTreeMap<String, PathBuf>, CorpusError> {
    let mut out = BTreeMap::new();
    if !dir.is_dir() {
        return Ok(out);
    }
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        if let Some(stem) = name.strip_suffix(suffix) {
            // "x.soap.txt" also ends with ".txt"; keep the two kinds apart.
            if suffix == ".txt" && stem.ends_with(".soap") {
                continue;
            }
            if !stem.is_empty() {
                out.insert(stem.to_string(), path);
            }
        }
    }
    Ok(out)
}

fn read(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(io_err(path))
}

fn read_soap(path: &Path) -> Result<SoapReport, CorpusError> {
    let text = read(path)?;
    let first_content_line = text
        .lines()
        .position(|l| !l.trim().is_empty())
        .map_or(1, |i| i + 1);
    let report = parse_soap(&text).map_err(|e| CorpusError::ParseFailure {
        path: path.to_path_buf(),
        line: first_content_line,
        message: e.to_string(),
    })?;
    if report.is_empty() {
        return Err(CorpusError::ParseFailure {
            path: path.to_path_buf(),
            line: first_content_line,
            message: SoapError::Invalid("all sections empty".into()).to_string(),
        });
    }
    Ok(report)
}

/// Loads and validates a corpus directory. Entries are ordered by id.
pub fn load_corpus(root: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let root = root.as_ref();
    let transcript_files = stems(&root.join("transcripts"), ".txt")?;
    let reference_files = stems(&root.join("references"), ".soap.txt")?;
    let shot_files = stems(&root.join("shots"), ".soap.txt")?;
    let shot_transcripts = stems(&root.join("shots"), ".txt")?;

    if transcript_files.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    if let Some(id) = transcript_files
        .keys()
        .find(|id| !reference_files.contains_key(*id))
    {
        return Err(CorpusError::MissingReference(id.clone()));
    }

    let mut corpus = Corpus::default();
    for (id, path) in &transcript_files {
        corpus.transcripts.push(Transcript::new(id, read(path)?));
    }
    for (id, path) in &reference_files {
        corpus.references.push(ReferenceReport::new(id, read_soap(path)?));
    }
    for (id, path) in &shot_files {
        let transcript = shot_transcripts.get(id).map(|p| read(p)).transpose()?;
        corpus.shots.push(ShotExample {
            id: id.clone(),
            report: read_soap(path)?,
            transcript,
        });
    }

    let violations = validate_corpus(&corpus);
    if !violations.is_empty() {
        return Err(CorpusError::Invalid(violations));
    }
    Ok(corpus)
}

/// Writes the corpus back out in the directory layout `load_corpus` reads.
/// Reports are written in canonical SOAP form.
pub fn save_corpus(corpus: &Corpus, root: impl AsRef<Path>) -> Result<(), CorpusError> {
    let root = root.as_ref();
    for dir in ["transcripts", "references", "shots"] {
        let d = root.join(dir);
        fs::create_dir_all(&d).map_err(io_err(&d))?;
    }
    let write = |path: PathBuf, text: &str| fs::write(&path, text).map_err(io_err(&path));
    for t in &corpus.transcripts {
        write(root.join("transcripts").join(format!("{}.txt", t.id)), &t.text)?;
    }
    for r in &corpus.references {
        write(
            root.join("references").join(format!("{}.soap.txt", r.id)),
            &(render_soap(&r.report) + "\n"),
        )?;
    }
    for s in &corpus.shots {
        write(
            root.join("shots").join(format!("{}.soap.txt", s.id)),
            &(render_soap(&s.report) + "\n"),
        )?;
        if let Some(t) = &s.transcript {
            write(root.join("shots").join(format!("{}.txt", s.id)), t)?;
        }
    }
    Ok(())
}

/// Every invariant violation in the corpus; an empty list means valid.
pub fn validate_corpus(corpus: &Corpus) -> Vec<String> {
    let mut violations = Vec::new();

    let mut transcript_ids = BTreeSet::new();
    for t in &corpus.transcripts {
        if !transcript_ids.insert(t.id.as_str()) {
            violations.push(format!("duplicate transcript: {}", t.id));
        }
        if t.text.trim().is_empty() {
            violations.push(format!("empty transcript: {}", t.id));
        }
        if t.word_count != word_count(&t.text) {
            violations.push(format!("word count mismatch: {}", t.id));
        }
    }

    let mut reference_ids = BTreeSet::new();
    for r in &corpus.references {
        if !reference_ids.insert(r.id.as_str()) {
            violations.push(format!("duplicate reference: {}", r.id));
        }
        if !transcript_ids.contains(r.id.as_str()) {
            violations.push(format!("orphan reference: {}", r.id));
        }
        if r.report.is_empty() {
            violations.push(format!("empty reference: {}", r.id));
        }
    }
    for id in &transcript_ids {
        if !reference_ids.contains(id) {
            violations.push(format!("missing reference: {id}"));
        }
    }

    let mut shot_ids = BTreeSet::new();
    for s in &corpus.shots {
        if !shot_ids.insert(s.id.as_str()) {
            violations.push(format!("duplicate shot: {}", s.id));
        }
        if transcript_ids.contains(s.id.as_str()) {
            violations.push(format!("shot/input overlap: {}", s.id));
        }
        if s.report.is_empty() {
            violations.push(format!("empty shot report: {}", s.id));
        }
    }
    violations
}

fn summarize(counts: &[usize]) -> Option<(f64, f64, usize, usize)> {
    let values: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    Some((
        stats::mean(&values)?,
        stats::sample_sd(&values)?,
        *counts.iter().min()?,
        *counts.iter().max()?,
    ))
}

/// Word-count statistics over transcripts and reference reports.
pub fn corpus_stats(corpus: &Corpus) -> Result<CorpusStats, CorpusError> {
    let transcript_counts: Vec<usize> = corpus.transcripts.iter().map(|t| t.word_count).collect();
    let reference_counts: Vec<usize> = corpus.references.iter().map(|r| r.word_count).collect();
    let (transcript_mean, transcript_sd, transcript_min, transcript_max) =
        summarize(&transcript_counts).ok_or(CorpusError::EmptyCorpus)?;
    let (reference_mean, reference_sd, reference_min, reference_max) =
        summarize(&reference_counts).ok_or(CorpusError::EmptyCorpus)?;
    Ok(CorpusStats {
        transcript_mean,
        transcript_sd,
        transcript_min,
        transcript_max,
        reference_mean,
        reference_sd,
        reference_min,
        reference_max,
    })
}

impl Corpus {
    pub fn transcript(&self, id: &str) -> Option<&Transcript> {
        self.transcripts.iter().find(|t| t.id == id)
    }

    pub fn reference(&self, id: &str) -> Option<&ReferenceReport> {
        self.references.iter().find(|r| r.id == id)
    }

    /// Restricts and reorders the shot examples to the listed ids.
    pub fn with_shot_order(mut self, ids: &[String]) -> Result<Corpus, CorpusError> {
        let mut by_id: BTreeMap<String, ShotExample> =
            self.shots.drain(..).map(|s| (s.id.clone(), s)).collect();
        for id in ids {
            let shot = by_id
                .remove(id)
                .ok_or_else(|| CorpusError::UnknownShot(id.clone()))?;
            self.shots.push(shot);
        }
        Ok(self)
    }

    /// Re-draws the input/example split with a seeded shuffle.
    ///
    /// The pool is every input consultation plus every shot that carries a
    /// transcript; `shot_count` of them become examples and the rest become
    /// inputs. Shots without a transcript cannot serve as inputs, so any such
    /// shot makes the split impossible.
    pub fn shuffle_split(self, seed: u64, shot_count: usize) -> Result<Corpus, CorpusError> {
        let mut pool: Vec<(String, String, SoapReport)> = Vec::new();
        for t in self.transcripts {
            let reference = self
                .references
                .iter()
                .find(|r| r.id == t.id)
                .ok_or_else(|| CorpusError::MissingReference(t.id.clone()))?;
            pool.push((t.id, t.text, reference.report.clone()));
        }
        for s in self.shots {
            let transcript = s.transcript.ok_or_else(|| {
                CorpusError::Split(format!("shot {} has no paired transcript", s.id))
            })?;
            pool.push((s.id, transcript, s.report));
        }
        if shot_count >= pool.len() {
            return Err(CorpusError::Split(format!(
                "{shot_count} shots requested from a pool of {}",
                pool.len()
            )));
        }

        pool.sort_by(|a, b| a.0.cmp(&b.0));
        pool.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let inputs = pool.split_off(shot_count);

        let mut corpus = Corpus::default();
        let mut shots: Vec<ShotExample> = pool
            .into_iter()
            .map(|(id, transcript, report)| ShotExample {
                id,
                report,
                transcript: Some(transcript),
            })
            .collect();
        shots.sort_by(|a, b| a.id.cmp(&b.id));
        corpus.shots = shots;

        let mut inputs = inputs;
        inputs.sort_by(|a, b| a.0.cmp(&b.0));
        for (id, text, report) in inputs {
            corpus.transcripts.push(Transcript::new(&id, text));
            corpus.references.push(ReferenceReport::new(id, report));
        }
        Ok(corpus)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(n: usize) -> String {
        (0..n).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ")
    }

    fn report(n: usize) -> SoapReport {
        SoapReport {
            subjective: words(n),
            ..Default::default()
        }
    }

    fn corpus(transcript_counts: &[usize], reference_counts: &[usize]) -> Corpus {
        let mut c = Corpus::default();
        for (i, (&tc, &rc)) in transcript_counts.iter().zip(reference_counts).enumerate() {
            let id = format!("{}", 2000 + i);
            c.transcripts.push(Transcript::new(&id, words(tc)));
            c.references.push(ReferenceReport::new(id, report(rc)));
        }
        c
    }

    #[test]
    fn stats_over_constructed_counts() {
        let c = corpus(&[606, 1000, 1200, 1370, 1869], &[37, 50, 60, 66, 87]);
        let s = corpus_stats(&c).unwrap();
        assert_eq!(s.transcript_mean, 1209.0);
        assert_eq!((s.transcript_min, s.transcript_max), (606, 1869));
        assert_eq!((s.reference_min, s.reference_max), (37, 87));
        assert_eq!(s.reference_mean, 60.0);
        // Independent fold: sum of squared deviations / (n - 1).
        let ss: f64 = [606.0f64, 1000.0, 1200.0, 1370.0, 1869.0]
            .iter()
            .fold(0.0, |acc, x| acc + (x - 1209.0).powi(2));
        let expected = (ss / 4.0).sqrt();
        assert!((s.transcript_sd - expected).abs() / expected < 1e-12);
    }

    #[test]
    fn single_transcript_has_zero_sd() {
        let s = corpus_stats(&corpus(&[100], &[10])).unwrap();
        assert_eq!(s.transcript_mean, 100.0);
        assert_eq!(s.transcript_sd, 0.0);
        assert_eq!((s.transcript_min, s.transcript_max), (100, 100));
    }

    #[test]
    fn empty_corpus_stats_error() {
        assert!(matches!(corpus_stats(&Corpus::default()), Err(CorpusError::EmptyCorpus)));
    }

    #[test]
    fn validate_reports_overlap_and_orphans() {
        let mut c = corpus(&[10, 10], &[5, 5]);
        assert!(validate_corpus(&c).is_empty());
        c.shots.push(ShotExample {
            id: "2000".into(),
            report: report(3),
            transcript: None,
        });
        c.references.push(ReferenceReport::new("2099", report(3)));
        let v = validate_corpus(&c);
        assert!(v.contains(&"shot/input overlap: 2000".to_string()));
        assert!(v.contains(&"orphan reference: 2099".to_string()));
    }

    #[test]
    fn shot_order_and_unknown_shot() {
        let mut c = corpus(&[10], &[5]);
        for id in ["3001", "3002"] {
            c.shots.push(ShotExample {
                id: id.into(),
                report: report(3),
                transcript: Some(words(20)),
            });
        }
        let reordered = c.clone().with_shot_order(&["3002".into()]).unwrap();
        assert_eq!(reordered.shots.len(), 1);
        assert_eq!(reordered.shots[0].id, "3002");
        assert!(matches!(
            c.clone().with_shot_order(&["nope".into()]),
            Err(CorpusError::UnknownShot(_))
        ));

        let a = c.clone().shuffle_split(7, 2).unwrap();
        let b = c.clone().shuffle_split(7, 2).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.shots.len(), 2);
        assert_eq!(a.transcripts.len(), 1);
        assert!(validate_corpus(&a).is_empty());
    }
}
