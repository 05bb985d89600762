//! The combined study report: word-count comparison, score tables, error
//! tally and relevance votes in one markdown document.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::annotation::{
    render_error_tally, render_relevance, tally_errors, tally_relevance, tally_word_categories, AnnotationError,
    AnnotationSet, ReportTexts,
};
use crate::corpus::Corpus;
use crate::experiment::{render_table, row_label, AggregateReport, RunLedger};
use crate::soap::{parse_soap, render_soap, Section, SectionWordCounts, SoapReport, WordCountComparison};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ReportSection {
    WordCount,
    Scores,
    Errors,
    Relevance,
}

impl ReportSection {
    pub const ALL: [ReportSection; 4] = [
        ReportSection::WordCount,
        ReportSection::Scores,
        ReportSection::Errors,
        ReportSection::Relevance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ReportSection::WordCount => "wordcount",
            ReportSection::Scores => "scores",
            ReportSection::Errors => "errors",
            ReportSection::Relevance => "relevance",
        }
    }
}

impl FromStr for ReportSection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| format!("unknown report section {s:?}"))
    }
}

/// Section word counts averaged over several generated reports.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MeanSectionCounts {
    pub subjective: f64,
    pub objective: f64,
    pub assessment: f64,
    pub plan: f64,
    pub total: f64,
}

impl MeanSectionCounts {
    pub fn of(counts: &[SectionWordCounts]) -> Self {
        let n = counts.len().max(1) as f64;
        let avg = |f: fn(&SectionWordCounts) -> usize| counts.iter().map(f).sum::<usize>() as f64 / n;
        Self {
            subjective: avg(|c| c.subjective),
            objective: avg(|c| c.objective),
            assessment: avg(|c| c.assessment),
            plan: avg(|c| c.plan),
            total: avg(|c| c.total),
        }
    }

    pub fn get(&self, section: Section) -> f64 {
        match section {
            Section::Subjective => self.subjective,
            Section::Objective => self.objective,
            Section::Assessment => self.assessment,
            Section::Plan => self.plan,
        }
    }
}

/// One consultation's reference counts next to the mean generated counts.
#[derive(Debug, Clone, PartialEq)]
pub struct WordCountRow {
    pub consultation_id: String,
    pub runs: usize,
    pub reference: SectionWordCounts,
    pub generated: MeanSectionCounts,
}

impl WordCountRow {
    pub fn from_comparison(consultation_id: impl Into<String>, cmp: &WordCountComparison) -> Self {
        Self {
            consultation_id: consultation_id.into(),
            runs: 1,
            reference: cmp.reference,
            generated: MeanSectionCounts::of(&[cmp.generated]),
        }
    }
}

/// Per-consultation rows for one variant. Generated text without any SOAP
/// marker counts as an empty report.
pub fn word_count_rows(ledger: &RunLedger, corpus: &Corpus, variant_id: &str) -> Vec<WordCountRow> {
    let mut generated: BTreeMap<&str, BTreeMap<u32, SectionWordCounts>> = BTreeMap::new();
    for r in ledger.records.iter().filter(|r| r.variant_id == variant_id) {
        let report = parse_soap(&r.response_text).unwrap_or_default();
        generated
            .entry(&r.consultation_id)
            .or_default()
            .entry(r.run_index)
            .or_insert_with(|| SectionWordCounts::of(&report));
    }
    corpus
        .references
        .iter()
        .filter_map(|reference| {
            let runs = generated.get(reference.id.as_str())?;
            let counts: Vec<SectionWordCounts> = runs.values().copied().collect();
            Some(WordCountRow {
                consultation_id: reference.id.clone(),
                runs: counts.len(),
                reference: SectionWordCounts::of(&reference.report),
                generated: MeanSectionCounts::of(&counts),
            })
        })
        .collect()
}

fn count(x: f64) -> String {
    if x.fract() == 0.0 {
        format!("{x:.0}")
    } else {
        format!("{x:.1}")
    }
}

/// Word-count table. Totals are the sums of the section columns.
pub fn render_word_count_table(rows: &[WordCountRow]) -> String {
    let mut out = String::new();
    for row in rows {
        let runs = if row.runs == 1 { "1 run".to_string() } else { format!("{} runs", row.runs) };
        let _ = writeln!(out, "Consultation {} (generated: mean over {runs})", row.consultation_id);
        let _ = writeln!(out, "{:<12}  {:>15}  {:>16}  {:>10}", "Section", "Human Reference", "Generated Report", "Difference");
        let mut line = |label: &str, reference: usize, generated: f64| {
            let _ = writeln!(
                out,
                "{label:<12}  {:>15}  {:>16}  {:>10}",
                reference,
                count(generated),
                count(generated - reference as f64)
            );
        };
        for section in Section::ALL {
            line(section.name(), row.reference.get(section), row.generated.get(section));
        }
        line("Total", row.reference.total, row.generated.total);
        out.push('\n');
    }
    if rows.is_empty() {
        out.push_str("No generated reports for this variant.\n");
    }
    out.trim_end().to_string() + "\n"
}

/// Variant with the highest mean ROUGE-1 F1; the first one on ties.
pub fn best_variant(report: &AggregateReport) -> Option<&str> {
    report
        .variants
        .iter()
        .fold(None, |best: Option<&crate::experiment::VariantAggregate>, v| match best {
            Some(b) if b.rouge1_mean >= v.rouge1_mean => Some(b),
            _ => Some(v),
        })
        .map(|v| v.variant_id.as_str())
}

/// Generated texts of one variant plus canonical reference renderings, the
/// text basis for annotation spans.
pub fn report_texts(ledger: &RunLedger, corpus: &Corpus, variant_id: &str) -> ReportTexts {
    let mut texts = ReportTexts::default();
    for r in ledger.records.iter().filter(|r| r.variant_id == variant_id) {
        texts
            .generated
            .entry((r.consultation_id.clone(), r.run_index))
            .or_insert_with(|| r.response_text.clone());
    }
    for r in &corpus.references {
        texts.references.insert(r.id.clone(), render_soap(&r.report));
    }
    texts
}

pub struct StudyInputs<'a> {
    pub corpus: &'a Corpus,
    pub ledger: &'a RunLedger,
    pub aggregates: &'a AggregateReport,
    /// Variant used for the word-count table and annotation texts.
    pub variant_id: &'a str,
    pub annotations: Option<&'a AnnotationSet>,
}

fn fenced(body: &str) -> String {
    format!("```text\n{}```\n", body)
}

/// One report section, or `None` when it has nothing to show.
pub fn render_section(section: ReportSection, inputs: &StudyInputs<'_>) -> Result<String, AnnotationError> {
    let annotations = inputs.annotations.filter(|a| !a.documents.is_empty());
    let mut out = String::new();
    match section {
        ReportSection::WordCount => {
            let _ = writeln!(out, "## Word counts: {}\n", row_label(inputs.variant_id));
            out.push_str(&fenced(&render_word_count_table(&word_count_rows(
                inputs.ledger,
                inputs.corpus,
                inputs.variant_id,
            ))));
        }
        ReportSection::Scores => {
            out.push_str("## ROUGE F1 per variant\n\n");
            out.push_str(&fenced(&render_table(inputs.aggregates)));
        }
        ReportSection::Errors => {
            out.push_str("## Error analysis\n\n");
            match annotations {
                None => out.push_str("No annotations found; error tally skipped.\n"),
                Some(set) => {
                    out.push_str(&fenced(&render_error_tally(&tally_errors(set.annotations()))));
                    if set.word_tags().next().is_some() {
                        let texts = report_texts(inputs.ledger, inputs.corpus, inputs.variant_id);
                        let w = tally_word_categories(set.word_tags(), &texts);
                        let _ = write!(
                            out,
                            "\nWord categories: identical {}, paraphrased {}, additional {}, unreviewed {}\n",
                            w.identical, w.paraphrased, w.additional, w.unreviewed
                        );
                    }
                }
            }
        }
        ReportSection::Relevance => {
            out.push_str("## Relevance of additional content\n\n");
            match annotations {
                None => out.push_str("No annotations found; relevance votes skipped.\n"),
                Some(set) => out.push_str(&fenced(&render_relevance(&tally_relevance(set.votes())?))),
            }
        }
    }
    Ok(out)
}

/// The full document, or only the requested sections.
pub fn render_study_report(inputs: &StudyInputs<'_>, only: &[ReportSection]) -> Result<String, AnnotationError> {
    if let [single] = only {
        return render_section(*single, inputs);
    }
    let sections: Vec<ReportSection> = if only.is_empty() { ReportSection::ALL.to_vec() } else { only.to_vec() };
    let mut out = String::from("# Study report\n");
    if inputs.annotations.is_none_or(|a| a.documents.is_empty()) {
        out.push_str("\nNo annotations found: the report covers word counts and scores only.\n");
    }
    for s in sections {
        out.push('\n');
        out.push_str(&render_section(s, inputs)?);
    }
    Ok(out)
}

/// Parsed reference and generated report pair, for ad hoc comparisons.
pub fn compare_texts(generated: &str, reference: &str) -> Result<WordCountComparison, crate::soap::SoapError> {
    let g: SoapReport = parse_soap(generated)?;
    let r: SoapReport = parse_soap(reference)?;
    Ok(crate::soap::section_word_counts(&g, &r))
}
