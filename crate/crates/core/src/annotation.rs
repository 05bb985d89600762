//! Human-evaluation data: error-taxonomy annotations on generated reports,
//! identical/paraphrased/additional word tags, and expert relevance votes.
//!
//! Error occurrences are counted per consultation. Annotators give each error
//! a short `dedup_key`; the same `(consultation, category, dedup_key)` seen in
//! several reruns counts once.
//!
//! Spans are `[start, end)` character offsets (Unicode scalar values). Error
//! spans point into the generated report, except omissions, which point into
//! the reference report because the missing content only exists there.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rouge::{tokenize_with_offsets, TokenizerOptions};
use crate::soap::Section;

pub const SCHEMA_VERSION: u32 = 1;

/// Omission kinds observed in practice; free text is accepted as well.
pub const SUGGESTED_OMISSION_KINDS: &[&str] = &[
    "Indication of which ear is involved",
    "Parts of symptoms mentioned",
    "Parts of relevant medical history",
    "Parts of symptoms observed",
    "Agreement with patient",
    "Possible future treatment",
];

/// Categories of additional content put to the expert panel.
pub const RELEVANCE_CATEGORIES: &[&str] = &[
    "duration of complaints",
    "duration of treatment",
    "previously tried treatments",
    "doctor's observations",
    "specific complaints",
    "referral to which hospital",
    "wait for results",
    "discussed treatment",
    "expected patient actions",
    "other complaints",
];

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("rater {rater} voted twice on {category:?}")]
    DuplicateVote { category: String, rater: String },
    #[error("unsupported annotation schema version {0}")]
    SchemaVersion(u32),
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FactualError {
    Hallucination,
    IncorrectStatement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StylisticError {
    Repetition,
    ClassificationError,
}

/// Where a redundant statement was placed: a SOAP section or an addendum
/// outside the four sections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RedundantLocation {
    #[serde(rename = "S")]
    Subjective,
    #[serde(rename = "O")]
    Objective,
    #[serde(rename = "A")]
    Assessment,
    #[serde(rename = "P")]
    Plan,
    Extra,
}

impl RedundantLocation {
    pub const ALL: [RedundantLocation; 5] = [
        RedundantLocation::Subjective,
        RedundantLocation::Objective,
        RedundantLocation::Assessment,
        RedundantLocation::Plan,
        RedundantLocation::Extra,
    ];

    pub fn label(self) -> &'static str {
        match self {
            RedundantLocation::Subjective => "In S",
            RedundantLocation::Objective => "In O",
            RedundantLocation::Assessment => "In A",
            RedundantLocation::Plan => "In P",
            RedundantLocation::Extra => "Additional",
        }
    }
}

/// A leaf of the error taxonomy.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum ErrorType {
    Factual { kind: FactualError },
    Stylistic { kind: StylisticError },
    Omission { section: Section, kind: String },
    Redundant { section: RedundantLocation },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorClass {
    Factual,
    Stylistic,
    Omission,
    Redundant,
}

impl ErrorClass {
    pub const ALL: [ErrorClass; 4] = [
        ErrorClass::Factual,
        ErrorClass::Stylistic,
        ErrorClass::Omission,
        ErrorClass::Redundant,
    ];

    pub fn title(self) -> &'static str {
        match self {
            ErrorClass::Factual => "Factual Errors",
            ErrorClass::Stylistic => "Stylistic Errors",
            ErrorClass::Omission => "Omissions",
            ErrorClass::Redundant => "Redundant Statements",
        }
    }
}

impl ErrorType {
    pub fn class(&self) -> ErrorClass {
        match self {
            ErrorType::Factual { .. } => ErrorClass::Factual,
            ErrorType::Stylistic { .. } => ErrorClass::Stylistic,
            ErrorType::Omission { .. } => ErrorClass::Omission,
            ErrorType::Redundant { .. } => ErrorClass::Redundant,
        }
    }

    /// Every fixed leaf; omissions are represented once per section with an
    /// empty kind.
    pub fn palette() -> Vec<ErrorType> {
        let mut out = vec![
            ErrorType::Factual {
                kind: FactualError::Hallucination,
            },
            ErrorType::Factual {
                kind: FactualError::IncorrectStatement,
            },
            ErrorType::Stylistic {
                kind: StylisticError::Repetition,
            },
            ErrorType::Stylistic {
                kind: StylisticError::ClassificationError,
            },
        ];
        out.extend(Section::ALL.map(|section| ErrorType::Omission {
            section,
            kind: String::new(),
        }));
        out.extend(RedundantLocation::ALL.map(|section| ErrorType::Redundant { section }));
        out
    }

    fn check(&self) -> Option<&'static str> {
        match self {
            ErrorType::Omission { kind, .. } if kind.trim().is_empty() => Some("omission kind is empty"),
            _ => None,
        }
    }
}

impl fmt::Display for ErrorType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ErrorType::Factual {
                kind: FactualError::Hallucination,
            } => f.write_str("Hallucinations"),
            ErrorType::Factual {
                kind: FactualError::IncorrectStatement,
            } => f.write_str("Incorrect statements"),
            ErrorType::Stylistic {
                kind: StylisticError::Repetition,
            } => f.write_str("Repetitions"),
            ErrorType::Stylistic {
                kind: StylisticError::ClassificationError,
            } => f.write_str("Classification error"),
            ErrorType::Omission { section, kind } => write!(f, "In {section}: {kind}"),
            ErrorType::Redundant { section } => f.write_str(section.label()),
        }
    }
}

/// Half-open character range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn contains(&self, offset: usize) -> bool {
        self.start <= offset && offset < self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub consultation_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_index: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<Span>,
    pub error_type: ErrorType,
    pub dedup_key: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum WordCategory {
    Identical,
    Paraphrased,
    Additional,
}

impl WordCategory {
    pub const ALL: [WordCategory; 3] = [
        WordCategory::Identical,
        WordCategory::Paraphrased,
        WordCategory::Additional,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordTag {
    pub consultation_id: String,
    pub run_index: u32,
    pub span: Span,
    pub category: WordCategory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Vote {
    Relevant,
    Neutral,
    NotRelevant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelevanceVote {
    pub category: String,
    pub rater_id: String,
    pub vote: Vote,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

/// One annotation file as written by the annotator UI or by hand.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationDocument {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub consultation_id: String,
    /// Prompt variant whose generated reports were annotated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variant_id: Option<String>,
    #[serde(default)]
    pub annotations: Vec<Annotation>,
    #[serde(default)]
    pub word_tags: Vec<WordTag>,
    #[serde(default)]
    pub votes: Vec<RelevanceVote>,
}

impl AnnotationDocument {
    pub fn new(consultation_id: impl Into<String>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            consultation_id: consultation_id.into(),
            variant_id: None,
            annotations: Vec::new(),
            word_tags: Vec::new(),
            votes: Vec::new(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("annotation document serializes") + "\n"
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, AnnotationError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| AnnotationError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let doc = Self::from_json(&text).map_err(|e| AnnotationError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        if doc.schema_version != SCHEMA_VERSION {
            return Err(AnnotationError::SchemaVersion(doc.schema_version));
        }
        Ok(doc)
    }
}

/// Several annotation documents viewed as one set.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AnnotationSet {
    pub documents: Vec<AnnotationDocument>,
}

impl AnnotationSet {
    /// Loads a single `.json` file, or every `.json` file in a directory
    /// (sorted by name).
    pub fn load(path: impl AsRef<Path>) -> Result<Self, AnnotationError> {
        let path = path.as_ref();
        let io = |source| AnnotationError::Io {
            path: path.to_path_buf(),
            source,
        };
        if path.is_file() {
            return Ok(Self {
                documents: vec![AnnotationDocument::load(path)?],
            });
        }
        let mut files: Vec<PathBuf> = fs::read_dir(path)
            .map_err(io)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        files.sort();
        let documents = files.iter().map(AnnotationDocument::load).collect::<Result<_, _>>()?;
        Ok(Self { documents })
    }

    pub fn annotations(&self) -> impl Iterator<Item = &Annotation> {
        self.documents.iter().flat_map(|d| d.annotations.iter())
    }

    pub fn word_tags(&self) -> impl Iterator<Item = &WordTag> {
        self.documents.iter().flat_map(|d| d.word_tags.iter())
    }

    pub fn votes(&self) -> impl Iterator<Item = &RelevanceVote> {
        self.documents.iter().flat_map(|d| d.votes.iter())
    }
}

/// Report texts that annotations refer to.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReportTexts {
    /// (consultation, run) -> generated report text.
    pub generated: BTreeMap<(String, u32), String>,
    /// consultation -> human reference text.
    pub references: BTreeMap<String, String>,
}

impl ReportTexts {
    pub fn generated(&self, consultation_id: &str, run_index: u32) -> Option<&str> {
        self.generated
            .get(&(consultation_id.to_string(), run_index))
            .map(String::as_str)
    }
}

fn location(consultation_id: &str, run_index: Option<u32>) -> String {
    match run_index {
        Some(r) => format!("{consultation_id}#{r}"),
        None => consultation_id.to_string(),
    }
}

/// Checks ids, span bounds, word-tag overlap and vote uniqueness. Returns
/// every violation; an empty list means the set is valid.
pub fn validate_annotations(set: &AnnotationSet, reports: &ReportTexts) -> Vec<String> {
    let mut violations = Vec::new();

    for doc in &set.documents {
        if doc.schema_version != SCHEMA_VERSION {
            violations.push(format!("unsupported schema version: {}", doc.schema_version));
        }
        for a in doc.annotations.iter().chain(std::iter::empty()) {
            let loc = location(&a.consultation_id, a.run_index);
            if a.consultation_id != doc.consultation_id {
                violations.push(format!("consultation mismatch: {loc}"));
            }
            if a.dedup_key.trim().is_empty() {
                violations.push(format!("empty dedup_key: {loc}"));
            }
            if let Some(problem) = a.error_type.check() {
                violations.push(format!("{problem}: {loc}"));
            }
            let is_omission = matches!(a.error_type, ErrorType::Omission { .. });
            let Some(span) = a.span else {
                continue;
            };
            if span.start >= span.end {
                violations.push(format!("empty span: {loc}"));
                continue;
            }
            let text = if is_omission {
                match reports.references.get(&a.consultation_id) {
                    Some(t) => t.as_str(),
                    None => {
                        violations.push(format!("unknown reference: {}", a.consultation_id));
                        continue;
                    }
                }
            } else {
                let Some(run) = a.run_index else {
                    violations.push(format!("span without run_index: {loc}"));
                    continue;
                };
                match reports.generated(&a.consultation_id, run) {
                    Some(t) => t,
                    None => {
                        violations.push(format!("unknown report: {loc}"));
                        continue;
                    }
                }
            };
            if span.end > text.chars().count() {
                violations.push(format!("span out of bounds: {loc}"));
            }
        }

        let mut by_report: BTreeMap<(&str, u32), Vec<Span>> = BTreeMap::new();
        for t in &doc.word_tags {
            let loc = location(&t.consultation_id, Some(t.run_index));
            let Some(text) = reports.generated(&t.consultation_id, t.run_index) else {
                violations.push(format!("unknown report: {loc}"));
                continue;
            };
            if t.span.start >= t.span.end {
                violations.push(format!("empty span: {loc}"));
                continue;
            }
            if t.span.end > text.chars().count() {
                violations.push(format!("span out of bounds: {loc}"));
                continue;
            }
            by_report.entry((&t.consultation_id, t.run_index)).or_default().push(t.span);
        }
        for ((cid, run), mut spans) in by_report {
            spans.sort();
            for w in spans.windows(2) {
                if w[0].overlaps(&w[1]) {
                    violations.push(format!(
                        "overlapping word tags: {cid}#{run} [{}, {}) and [{}, {})",
                        w[0].start, w[0].end, w[1].start, w[1].end
                    ));
                }
            }
        }
    }

    let mut votes = BTreeSet::new();
    for v in set.votes() {
        if !votes.insert((v.category.as_str(), v.rater_id.as_str())) {
            violations.push(format!("duplicate vote: {} by {}", v.category, v.rater_id));
        }
    }
    violations
}

/// Deduplicated error counts grouped by class.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorTally {
    /// Count per taxonomy leaf.
    pub leaves: BTreeMap<ErrorType, usize>,
    pub subtotals: BTreeMap<ErrorClass, usize>,
    pub total: usize,
}

impl ErrorTally {
    pub fn leaf(&self, leaf: &ErrorType) -> usize {
        self.leaves.get(leaf).copied().unwrap_or(0)
    }

    pub fn subtotal(&self, class: ErrorClass) -> usize {
        self.subtotals.get(&class).copied().unwrap_or(0)
    }

    /// Leaves of one class in display order.
    pub fn leaves_of(&self, class: ErrorClass) -> impl Iterator<Item = (&ErrorType, usize)> {
        self.leaves
            .iter()
            .filter(move |(leaf, _)| leaf.class() == class)
            .map(|(l, n)| (l, *n))
    }
}

/// Counts each `(consultation, leaf, dedup_key)` once.
pub fn tally_errors<'a>(annotations: impl IntoIterator<Item = &'a Annotation>) -> ErrorTally {
    let units: BTreeSet<(&str, &ErrorType, &str)> = annotations
        .into_iter()
        .map(|a| (a.consultation_id.as_str(), &a.error_type, a.dedup_key.trim()))
        .collect();

    let mut tally = ErrorTally::default();
    for class in ErrorClass::ALL {
        tally.subtotals.insert(class, 0);
    }
    for (_, leaf, _) in units {
        *tally.leaves.entry(leaf.clone()).or_insert(0) += 1;
        *tally.subtotals.entry(leaf.class()).or_insert(0) += 1;
        tally.total += 1;
    }
    tally
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordCategoryCounts {
    pub identical: usize,
    pub paraphrased: usize,
    pub additional: usize,
    pub unreviewed: usize,
}

impl WordCategoryCounts {
    pub fn total(&self) -> usize {
        self.identical + self.paraphrased + self.additional + self.unreviewed
    }

    fn bump(&mut self, category: Option<WordCategory>) {
        match category {
            Some(WordCategory::Identical) => self.identical += 1,
            Some(WordCategory::Paraphrased) => self.paraphrased += 1,
            Some(WordCategory::Additional) => self.additional += 1,
            None => self.unreviewed += 1,
        }
    }
}

/// Token-weighted category counts over `reports.generated`. A token belongs
/// to the tag whose span contains the token's first character; tokens under
/// no tag are unreviewed.
pub fn tally_word_categories<'a>(
    tags: impl IntoIterator<Item = &'a WordTag>,
    reports: &ReportTexts,
) -> WordCategoryCounts {
    let mut by_report: BTreeMap<(&str, u32), Vec<&WordTag>> = BTreeMap::new();
    for t in tags {
        by_report.entry((&t.consultation_id, t.run_index)).or_default().push(t);
    }
    let mut counts = WordCategoryCounts::default();
    for ((cid, run), text) in &reports.generated {
        let tags = by_report.get(&(cid.as_str(), *run));
        for token in tokenize_with_offsets(text, &TokenizerOptions::default()) {
            let category = tags
                .and_then(|ts| ts.iter().find(|t| t.span.contains(token.start)))
                .map(|t| t.category);
            counts.bump(category);
        }
    }
    counts
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelevanceDistribution {
    pub relevant: usize,
    pub neutral: usize,
    pub not_relevant: usize,
    /// Every rater gave the same vote.
    pub unanimous: bool,
}

impl RelevanceDistribution {
    pub fn total(&self) -> usize {
        self.relevant + self.neutral + self.not_relevant
    }
}

pub fn tally_relevance<'a>(
    votes: impl IntoIterator<Item = &'a RelevanceVote>,
) -> Result<BTreeMap<String, RelevanceDistribution>, AnnotationError> {
    let mut seen = BTreeSet::new();
    let mut out: BTreeMap<String, RelevanceDistribution> = BTreeMap::new();
    for v in votes {
        if !seen.insert((v.category.clone(), v.rater_id.clone())) {
            return Err(AnnotationError::DuplicateVote {
                category: v.category.clone(),
                rater: v.rater_id.clone(),
            });
        }
        let d = out.entry(v.category.clone()).or_default();
        match v.vote {
            Vote::Relevant => d.relevant += 1,
            Vote::Neutral => d.neutral += 1,
            Vote::NotRelevant => d.not_relevant += 1,
        }
    }
    for d in out.values_mut() {
        d.unanimous = [d.relevant, d.neutral, d.not_relevant].iter().filter(|&&n| n > 0).count() == 1;
    }
    Ok(out)
}

/// All tallies for one annotation set.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TallyReport {
    pub errors: ErrorTally,
    pub words: WordCategoryCounts,
    pub relevance: BTreeMap<String, RelevanceDistribution>,
}

pub fn tally(set: &AnnotationSet, reports: &ReportTexts) -> Result<TallyReport, AnnotationError> {
    Ok(TallyReport {
        errors: tally_errors(set.annotations()),
        words: tally_word_categories(set.word_tags(), reports),
        relevance: tally_relevance(set.votes())?,
    })
}

/// Error tally laid out like an occurrence table: class rows with their
/// subtotal, followed by indented leaf rows.
pub fn render_error_tally(tally: &ErrorTally) -> String {
    let mut rows: Vec<(String, usize)> = Vec::new();
    for class in ErrorClass::ALL {
        rows.push((class.title().to_string(), tally.subtotal(class)));
        for (leaf, n) in tally.leaves_of(class) {
            rows.push((format!("  {leaf}"), n));
        }
    }
    rows.push(("Total".into(), tally.total));
    let width = rows.iter().map(|(l, _)| l.chars().count()).max().unwrap_or(0).max(4);
    let mut out = format!("{:<width$}  Occurrence\n", "Type");
    for (label, n) in rows {
        out.push_str(&format!("{label:<width$}  {n}\n"));
    }
    out
}

pub fn render_relevance(dist: &BTreeMap<String, RelevanceDistribution>) -> String {
    if dist.is_empty() {
        return "No relevance votes.\n".into();
    }
    let width = dist.keys().map(|k| k.chars().count()).max().unwrap_or(0).max(8);
    let mut out = format!("{:<width$}  Relevant  Neutral  Not relevant  Consensus\n", "Category");
    for (category, d) in dist {
        out.push_str(&format!(
            "{category:<width$}  {:>8}  {:>7}  {:>12}  {}\n",
            d.relevant,
            d.neutral,
            d.not_relevant,
            if d.unanimous { "unanimous" } else { "split" }
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ann(cid: &str, run: Option<u32>, error_type: ErrorType, key: &str) -> Annotation {
        Annotation {
            consultation_id: cid.into(),
            run_index: run,
            span: None,
            error_type,
            dedup_key: key.into(),
            note: String::new(),
        }
    }

    fn hallucination() -> ErrorType {
        ErrorType::Factual {
            kind: FactualError::Hallucination,
        }
    }

    fn reports() -> ReportTexts {
        let mut r = ReportTexts::default();
        r.generated.insert(("2006".into(), 3), "S: pain in the left ear".into());
        r.references.insert("2006".into(), "S: pain".into());
        r
    }

    fn doc(annotations: Vec<Annotation>, word_tags: Vec<WordTag>) -> AnnotationSet {
        AnnotationSet {
            documents: vec![AnnotationDocument {
                annotations,
                word_tags,
                ..AnnotationDocument::new("2006")
            }],
        }
    }

    fn tag(start: usize, end: usize, category: WordCategory) -> WordTag {
        WordTag {
            consultation_id: "2006".into(),
            run_index: 3,
            span: Span::new(start, end),
            category,
        }
    }

    #[test]
    fn validation_catches_bounds_and_overlap() {
        let mut a = ann("2006", Some(3), hallucination(), "pain-origin");
        a.span = Some(Span::new(3, 7));
        assert!(validate_annotations(&doc(vec![a.clone()], vec![]), &reports()).is_empty());

        a.span = Some(Span::new(3, 500));
        assert_eq!(
            validate_annotations(&doc(vec![a], vec![]), &reports()),
            vec!["span out of bounds: 2006#3".to_string()]
        );

        let tags = vec![tag(3, 10, WordCategory::Identical), tag(8, 12, WordCategory::Additional)];
        let v = validate_annotations(&doc(vec![], tags), &reports());
        assert_eq!(v.len(), 1);
        assert!(v[0].starts_with("overlapping word tags: 2006#3"));
    }

    #[test]
    fn omission_spans_point_into_the_reference() {
        let mut a = ann(
            "2006",
            None,
            ErrorType::Omission {
                section: Section::Subjective,
                kind: "Indication of which ear is involved".into(),
            },
            "which-ear",
        );
        a.span = Some(Span::new(3, 7));
        assert!(validate_annotations(&doc(vec![a.clone()], vec![]), &reports()).is_empty());
        a.span = Some(Span::new(3, 9));
        assert_eq!(validate_annotations(&doc(vec![a], vec![]), &reports()), vec!["span out of bounds: 2006"]);
    }

    #[test]
    fn validation_other_rules() {
        let mut a = ann("2006", Some(9), hallucination(), " ");
        a.span = Some(Span::new(1, 2));
        let v = validate_annotations(&doc(vec![a], vec![]), &reports());
        assert!(v.contains(&"empty dedup_key: 2006#9".to_string()));
        assert!(v.contains(&"unknown report: 2006#9".to_string()));

        let mut set = doc(vec![], vec![]);
        let vote = RelevanceVote {
            category: "x".into(),
            rater_id: "gp1".into(),
            vote: Vote::Relevant,
        };
        set.documents[0].votes = vec![vote.clone(), vote];
        assert_eq!(validate_annotations(&set, &reports()), vec!["duplicate vote: x by gp1"]);
    }

    #[test]
    fn reruns_of_one_error_count_once() {
        let anns: Vec<Annotation> = (0..5).map(|r| ann("2006", Some(r), hallucination(), "pain-origin")).collect();
        let t = tally_errors(&anns);
        assert_eq!(t.leaf(&hallucination()), 1);
        assert_eq!(t.subtotal(ErrorClass::Factual), 1);
        assert_eq!(t.total, 1);

        // Same key in another consultation is a separate occurrence.
        let mut more = anns.clone();
        more.push(ann("2011", Some(0), hallucination(), "pain-origin"));
        assert_eq!(tally_errors(&more).leaf(&hallucination()), 2);
    }

    #[test]
    fn empty_tally() {
        let t = tally_errors(&[]);
        assert_eq!(t.total, 0);
        assert!(ErrorClass::ALL.iter().all(|c| t.subtotal(*c) == 0));
    }

    #[test]
    fn word_categories_by_token() {
        let r = reports();
        // "S: pain in the left ear": tokens s, pain, in, the, left, ear (6).
        let counts = tally_word_categories(&[tag(3, 22, WordCategory::Identical)], &r);
        assert_eq!(counts.identical, 5);
        assert_eq!(counts.unreviewed, 1);

        let full = [tag(0, 2, WordCategory::Additional), tag(3, 22, WordCategory::Paraphrased)];
        let counts = tally_word_categories(&full, &r);
        assert_eq!(counts.unreviewed, 0);
        assert_eq!(counts.total(), 6);

        let none = tally_word_categories(&[], &r);
        assert_eq!(none.unreviewed, 6);
    }

    fn votes(category: &str, vs: &[Vote]) -> Vec<RelevanceVote> {
        vs.iter()
            .enumerate()
            .map(|(i, v)| RelevanceVote {
                category: category.into(),
                rater_id: format!("gp{}", i + 1),
                vote: *v,
            })
            .collect()
    }

    #[test]
    fn relevance_distributions() {
        use Vote::*;
        let mut all = votes("left-ear complaint", &[Relevant, Relevant, Relevant, Neutral, Neutral, NotRelevant]);
        all.extend(votes("duration of complaints", &[Relevant; 6]));
        let d = tally_relevance(&all).unwrap();
        let left = d["left-ear complaint"];
        assert_eq!((left.relevant, left.neutral, left.not_relevant, left.unanimous), (3, 2, 1, false));
        let dur = d["duration of complaints"];
        assert_eq!((dur.relevant, dur.neutral, dur.not_relevant, dur.unanimous), (6, 0, 0, true));

        let single = tally_relevance(&votes("x", &[Neutral])).unwrap();
        assert!(single["x"].unanimous);
        assert_eq!(single["x"].neutral, 1);

        let mut dup = votes("x", &[Neutral]);
        dup.extend(votes("x", &[Relevant]));
        assert!(matches!(tally_relevance(&dup), Err(AnnotationError::DuplicateVote { .. })));
    }

    #[test]
    fn document_json_shape() {
        let mut d = AnnotationDocument::new("2006");
        let mut a = ann(
            "2006",
            Some(0),
            ErrorType::Redundant {
                section: RedundantLocation::Extra,
            },
            "nb-colonoscopy",
        );
        a.span = Some(Span::new(0, 4));
        d.annotations.push(a);
        let json: serde_json::Value = serde_json::from_str(&d.to_json()).unwrap();
        assert_eq!(json["schema_version"], 1);
        assert_eq!(json["annotations"][0]["error_type"]["class"], "redundant");
        assert_eq!(json["annotations"][0]["error_type"]["section"], "Extra");
        assert_eq!(AnnotationDocument::from_json(&d.to_json()).unwrap(), d);
    }

    #[test]
    fn palette_covers_every_class() {
        let p = ErrorType::palette();
        assert_eq!(p.len(), 4 + 4 + 5);
        for class in ErrorClass::ALL {
            assert!(p.iter().any(|l| l.class() == class));
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn leaf() -> impl Strategy<Value = ErrorType> {
            prop::sample::select(ErrorType::palette()).prop_map(|l| match l {
                ErrorType::Omission { section, .. } => ErrorType::Omission {
                    section,
                    kind: "Parts of symptoms mentioned".into(),
                },
                other => other,
            })
        }

        fn annotations() -> impl Strategy<Value = Vec<Annotation>> {
            proptest::collection::vec((0u8..3, 0u32..5, leaf(), 0u8..4), 0..40).prop_map(|v| {
                v.into_iter()
                    .map(|(c, r, l, k)| ann(&format!("c{c}"), Some(r), l, &format!("k{k}")))
                    .collect()
            })
        }

        proptest! {
            #[test]
            fn rerun_duplicates_do_not_change_counts(anns in annotations(), shift in 1u32..10) {
                let mut doubled = anns.clone();
                doubled.extend(anns.iter().cloned().map(|mut a| {
                    a.run_index = a.run_index.map(|r| r + shift);
                    a
                }));
                prop_assert_eq!(tally_errors(&anns), tally_errors(&doubled));
            }

            #[test]
            fn subtotals_sum_to_total(anns in annotations()) {
                let t = tally_errors(&anns);
                prop_assert_eq!(t.subtotals.values().sum::<usize>(), t.total);
                prop_assert_eq!(t.leaves.values().sum::<usize>(), t.total);
            }

            #[test]
            fn word_categories_cover_every_token(cuts in proptest::collection::vec(0usize..23, 0..6)) {
                let r = reports();
                let mut cuts = cuts;
                cuts.sort();
                cuts.dedup();
                let tags: Vec<WordTag> = cuts
                    .windows(2)
                    .enumerate()
                    .map(|(i, w)| tag(w[0], w[1], WordCategory::ALL[i % 3]))
                    .collect();
                let counts = tally_word_categories(&tags, &r);
                let tokens = tokenize_with_offsets(&r.generated[&("2006".to_string(), 3)], &TokenizerOptions::default());
                prop_assert_eq!(counts.total(), tokens.len());
            }
        }
    }
}
