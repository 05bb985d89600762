//! SOAP-structured reports: parsing, canonical rendering and word counts.
//!
//! Section markers are recognised at the start of a line, case-insensitively,
//! in letter form (`S:`), English (`Subjective:`) or Dutch (`Subjectief:`).
//! Short upper-case headers that are not SOAP markers (`NB:`, `N.B.:`, `PS:`)
//! open an addendum that is kept in [`SoapReport::extra`].

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SoapError {
    #[error("no SOAP section markers found")]
    NoSectionsFound,
    #[error("invalid report: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Section {
    #[serde(rename = "S")]
    Subjective,
    #[serde(rename = "O")]
    Objective,
    #[serde(rename = "A")]
    Assessment,
    #[serde(rename = "P")]
    Plan,
}

impl Section {
    pub const ALL: [Section; 4] = [
        Section::Subjective,
        Section::Objective,
        Section::Assessment,
        Section::Plan,
    ];

    pub fn letter(self) -> char {
        match self {
            Section::Subjective => 'S',
            Section::Objective => 'O',
            Section::Assessment => 'A',
            Section::Plan => 'P',
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Section::Subjective => "Subjective",
            Section::Objective => "Objective",
            Section::Assessment => "Assessment",
            Section::Plan => "Plan",
        }
    }

    fn from_label(label: &str) -> Option<Section> {
        match label.to_lowercase().as_str() {
            "s" | "subjective" | "subjectief" => Some(Section::Subjective),
            "o" | "objective" | "objectief" => Some(Section::Objective),
            "a" | "assessment" | "evaluatie" => Some(Section::Assessment),
            "p" | "plan" => Some(Section::Plan),
            _ => None,
        }
    }
}

impl fmt::Display for Section {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SoapReport {
    pub subjective: String,
    pub objective: String,
    pub assessment: String,
    pub plan: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extra: Option<String>,
}

enum LineKind<'a> {
    Marker(Section, &'a str),
    Header,
    Body,
}

/// Label before the first colon, with light markdown decoration removed
/// (`**S:**`, `## Plan:`).
fn split_label(line: &str) -> Option<(&str, &str)> {
    let stripped = line.trim_start().trim_start_matches(['*', '#', '_']).trim_start();
    let colon = stripped.find(':')?;
    let label = stripped[..colon].trim_end_matches(['*', '_']).trim();
    let rest = stripped[colon + 1..].trim_start_matches(['*', '_']);
    Some((label, rest))
}

fn is_addendum_label(label: &str) -> bool {
    let mut chars = label.chars();
    matches!(chars.next(), Some(c) if c.is_uppercase())
        && label.chars().count() <= 6
        && chars.all(|c| c.is_uppercase() || c == '.')
}

fn classify(line: &str) -> LineKind<'_> {
    match split_label(line) {
        Some((label, rest)) => {
            if let Some(section) = Section::from_label(label) {
                LineKind::Marker(section, rest.trim_start())
            } else if is_addendum_label(label) {
                LineKind::Header
            } else {
                LineKind::Body
            }
        }
        None => LineKind::Body,
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Slot {
    Section(Section),
    Extra,
}

fn push_segment(target: &mut String, segment: &[&str]) {
    let text = segment.join("\n");
    let text = text.trim();
    if text.is_empty() {
        return;
    }
    if !target.is_empty() {
        target.push('\n');
    }
    target.push_str(text);
}

impl SoapReport {
    pub fn section(&self, section: Section) -> &str {
        match section {
            Section::Subjective => &self.subjective,
            Section::Objective => &self.objective,
            Section::Assessment => &self.assessment,
            Section::Plan => &self.plan,
        }
    }

    pub fn section_mut(&mut self, section: Section) -> &mut String {
        match section {
            Section::Subjective => &mut self.subjective,
            Section::Objective => &mut self.objective,
            Section::Assessment => &mut self.assessment,
            Section::Plan => &mut self.plan,
        }
    }

    pub fn is_empty(&self) -> bool {
        Section::ALL.iter().all(|s| self.section(*s).is_empty())
    }

    /// Checks the invariants a report must satisfy to render canonically and
    /// parse back to itself.
    pub fn validate(&self) -> Result<(), SoapError> {
        if self.is_empty() {
            return Err(SoapError::Invalid("all sections empty".into()));
        }
        for section in Section::ALL {
            let text = self.section(section);
            if text.trim() != text {
                return Err(SoapError::Invalid(format!(
                    "section {section} has surrounding whitespace"
                )));
            }
            if text.lines().any(|l| !matches!(classify(l), LineKind::Body)) {
                return Err(SoapError::Invalid(format!(
                    "section {section} contains a header line"
                )));
            }
        }
        if let Some(extra) = &self.extra {
            if extra.is_empty() || extra.trim() != extra {
                return Err(SoapError::Invalid("extra block is blank or untrimmed".into()));
            }
            let mut lines = extra.lines();
            if !matches!(lines.next().map(classify), Some(LineKind::Header)) {
                return Err(SoapError::Invalid(
                    "extra block must start with an addendum header such as \"NB:\"".into(),
                ));
            }
            if lines.any(|l| matches!(classify(l), LineKind::Marker(..))) {
                return Err(SoapError::Invalid(
                    "extra block contains a SOAP marker".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Parses marker-structured report text.
///
/// Text before the first marker and text under unrecognised addendum headers
/// is collected in `extra`. A repeated marker appends to its section on a new
/// line. Empty input yields an empty report; non-empty input with no SOAP
/// marker at all is an error.
pub fn parse_soap(text: &str) -> Result<SoapReport, SoapError> {
    let mut report = SoapReport::default();
    let mut extra = String::new();
    let mut found_marker = false;

    let mut slot = Slot::Extra;
    let mut segment: Vec<&str> = Vec::new();

    let mut flush = |slot: Slot, segment: &mut Vec<&str>, report: &mut SoapReport| {
        match slot {
            Slot::Section(s) => push_segment(report.section_mut(s), segment),
            Slot::Extra => push_segment(&mut extra, segment),
        }
        segment.clear();
    };

    for line in text.split('\n') {
        let line = line.strip_suffix('\r').unwrap_or(line);
        match classify(line) {
            LineKind::Marker(section, rest) => {
                flush(slot, &mut segment, &mut report);
                found_marker = true;
                slot = Slot::Section(section);
                segment.push(rest);
            }
            LineKind::Header => {
                flush(slot, &mut segment, &mut report);
                slot = Slot::Extra;
                segment.push(line.trim_start());
            }
            LineKind::Body => segment.push(line),
        }
    }
    flush(slot, &mut segment, &mut report);

    if !found_marker && !text.trim().is_empty() {
        return Err(SoapError::NoSectionsFound);
    }
    report.extra = (!extra.is_empty()).then_some(extra);
    Ok(report)
}

/// Canonical `S: ...\nO: ...\nA: ...\nP: ...` form. Empty sections render as
/// bare markers; `extra` follows on its own line.
pub fn render_soap(report: &SoapReport) -> String {
    let mut out = String::new();
    for (i, section) in Section::ALL.into_iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push(section.letter());
        out.push(':');
        let body = report.section(section);
        if !body.is_empty() {
            out.push(' ');
            out.push_str(body);
        }
    }
    if let Some(extra) = &report.extra {
        out.push('\n');
        out.push_str(extra);
    }
    out
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionWordCounts {
    pub subjective: usize,
    pub objective: usize,
    pub assessment: usize,
    pub plan: usize,
    pub total: usize,
}

impl SectionWordCounts {
    pub fn of(report: &SoapReport) -> Self {
        Self::from_sections(
            word_count(&report.subjective),
            word_count(&report.objective),
            word_count(&report.assessment),
            word_count(&report.plan),
        )
    }

    pub fn from_sections(subjective: usize, objective: usize, assessment: usize, plan: usize) -> Self {
        Self {
            subjective,
            objective,
            assessment,
            plan,
            total: subjective + objective + assessment + plan,
        }
    }

    pub fn get(&self, section: Section) -> usize {
        match section {
            Section::Subjective => self.subjective,
            Section::Objective => self.objective,
            Section::Assessment => self.assessment,
            Section::Plan => self.plan,
        }
    }
}

/// Signed per-section difference, generated minus reference.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionDifferences {
    pub subjective: i64,
    pub objective: i64,
    pub assessment: i64,
    pub plan: i64,
    pub total: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordCountComparison {
    pub generated: SectionWordCounts,
    pub reference: SectionWordCounts,
    pub difference: SectionDifferences,
}

impl WordCountComparison {
    pub fn from_counts(generated: SectionWordCounts, reference: SectionWordCounts) -> Self {
        let d = |g: usize, r: usize| g as i64 - r as i64;
        Self {
            generated,
            reference,
            difference: SectionDifferences {
                subjective: d(generated.subjective, reference.subjective),
                objective: d(generated.objective, reference.objective),
                assessment: d(generated.assessment, reference.assessment),
                plan: d(generated.plan, reference.plan),
                total: d(generated.total, reference.total),
            },
        }
    }
}

pub fn section_word_counts(generated: &SoapReport, reference: &SoapReport) -> WordCountComparison {
    WordCountComparison::from_counts(SectionWordCounts::of(generated), SectionWordCounts::of(reference))
}
