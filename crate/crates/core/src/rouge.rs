//! ROUGE-1 and ROUGE-L between a generated report and a human reference.
//!
//! Tokenization is plain surface matching: Unicode lowercase, split on every
//! non-alphanumeric character, no stemming and no stopword removal. Dutch text
//! has no reliable light stemmer, so none is applied.
//!
//! ```
//! use soapbench::rouge::{score_texts, TokenizerOptions};
//!
//! let pair = score_texts("de kat zat", "de kat at", &TokenizerOptions::default());
//! assert!((pair.rouge1.f1 - 2.0 / 3.0).abs() < 1e-12);
//! ```

use std::collections::HashMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

/// Switches that affect how text is split into tokens.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizerOptions {
    /// Emit each punctuation character as its own token instead of dropping it.
    #[serde(default)]
    pub keep_punctuation: bool,
}

/// Ordered lowercase tokens. Never contains an empty token.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    /// Builds a sequence from pre-split tokens, dropping empty strings.
    pub fn new<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self(
            tokens
                .into_iter()
                .map(Into::into)
                .filter(|t: &String| !t.is_empty())
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }
}

impl<'a> FromIterator<&'a str> for TokenSequence {
    fn from_iter<T: IntoIterator<Item = &'a str>>(iter: T) -> Self {
        Self::new(iter)
    }
}

/// A token together with the character (Unicode scalar) offsets it occupies
/// in the source text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpannedToken {
    pub token: String,
    pub start: usize,
    pub end: usize,
}

impl SpannedToken {
    pub fn range(&self) -> Range<usize> {
        self.start..self.end
    }
}

/// Splits `text` into tokens with their character offsets.
pub fn tokenize_with_offsets(text: &str, options: &TokenizerOptions) -> Vec<SpannedToken> {
    let mut out = Vec::new();
    let mut current = String::new();
    let mut start = 0;

    for (idx, ch) in text.chars().enumerate() {
        if ch.is_alphanumeric() {
            if current.is_empty() {
                start = idx;
            }
            current.extend(ch.to_lowercase());
            continue;
        }
        if !current.is_empty() {
            out.push(SpannedToken {
                token: std::mem::take(&mut current),
                start,
                end: idx,
            });
        }
        if options.keep_punctuation && !ch.is_whitespace() {
            out.push(SpannedToken {
                token: ch.to_lowercase().collect(),
                start: idx,
                end: idx + 1,
            });
        }
    }
    if !current.is_empty() {
        let end = text.chars().count();
        out.push(SpannedToken {
            token: current,
            start,
            end,
        });
    }
    out
}

/// Lowercases and splits on every non-alphanumeric character.
pub fn tokenize(text: &str) -> TokenSequence {
    tokenize_opts(text, &TokenizerOptions::default())
}

pub fn tokenize_opts(text: &str, options: &TokenizerOptions) -> TokenSequence {
    TokenSequence(
        tokenize_with_offsets(text, options)
            .into_iter()
            .map(|t| t.token)
            .collect(),
    )
}

/// Length of the longest common subsequence of two token sequences.
///
/// Classic dynamic program, O(|a|·|b|) time, keeping a single row sized to
/// the shorter input.
pub fn lcs_length(a: &TokenSequence, b: &TokenSequence) -> usize {
    let (long, short) = if a.len() >= b.len() {
        (a.tokens(), b.tokens())
    } else {
        (b.tokens(), a.tokens())
    };
    if short.is_empty() {
        return 0;
    }

    let mut row = vec![0usize; short.len() + 1];
    for x in long {
        // `diag` holds row[j - 1] from the previous iteration of the outer loop.
        let mut diag = 0;
        for (j, y) in short.iter().enumerate() {
            let above = row[j + 1];
            row[j + 1] = if x == y {
                diag + 1
            } else {
                above.max(row[j])
            };
            diag = above;
        }
    }
    row[short.len()]
}

/// Precision, recall and their harmonic mean.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RougeScore {
    pub const ZERO: RougeScore = RougeScore {
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
    };

    /// Score from a match count and the two sequence lengths. Either length
    /// being zero yields an all-zero score.
    pub fn from_counts(matches: usize, candidate_len: usize, reference_len: usize) -> Self {
        if candidate_len == 0 || reference_len == 0 {
            return Self::ZERO;
        }
        let precision = matches as f64 / candidate_len as f64;
        let recall = matches as f64 / reference_len as f64;
        Self::from_precision_recall(precision, recall)
    }

    pub fn from_precision_recall(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            precision,
            recall,
            f1,
        }
    }
}

/// ROUGE-1 and ROUGE-L for one candidate/reference pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ScorePair {
    pub rouge1: RougeScore,
    #[serde(rename = "rougeL")]
    pub rouge_l: RougeScore,
}

fn unigram_counts(seq: &TokenSequence) -> HashMap<&str, usize> {
    let mut counts = HashMap::new();
    for tok in seq.iter() {
        *counts.entry(tok).or_insert(0) += 1;
    }
    counts
}

/// Size of the multiset intersection of the two token bags.
pub fn unigram_overlap(candidate: &TokenSequence, reference: &TokenSequence) -> usize {
    let reference_counts = unigram_counts(reference);
    unigram_counts(candidate)
        .into_iter()
        .map(|(tok, n)| n.min(reference_counts.get(tok).copied().unwrap_or(0)))
        .sum()
}

pub fn rouge1(candidate: &TokenSequence, reference: &TokenSequence) -> RougeScore {
    RougeScore::from_counts(
        unigram_overlap(candidate, reference),
        candidate.len(),
        reference.len(),
    )
}

pub fn rouge_l(candidate: &TokenSequence, reference: &TokenSequence) -> RougeScore {
    RougeScore::from_counts(
        lcs_length(candidate, reference),
        candidate.len(),
        reference.len(),
    )
}

pub fn score_tokens(candidate: &TokenSequence, reference: &TokenSequence) -> ScorePair {
    ScorePair {
        rouge1: rouge1(candidate, reference),
        rouge_l: rouge_l(candidate, reference),
    }
}

/// Tokenizes both texts and scores them.
pub fn score_texts(candidate: &str, reference: &str, options: &TokenizerOptions) -> ScorePair {
    score_tokens(
        &tokenize_opts(candidate, options),
        &tokenize_opts(reference, options),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(s: &str) -> TokenSequence {
        s.split_whitespace().collect()
    }

    #[test]
    fn tokenize_splits_decimal_comma_and_drops_period() {
        let toks = tokenize("Oorpijn sinds 1,5 week.");
        assert_eq!(toks.tokens(), ["oorpijn", "sinds", "1", "5", "week"]);
    }

    #[test]
    fn tokenize_edge_cases() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("  ... ,, ").is_empty());
        assert_eq!(tokenize("A a A").tokens(), ["a", "a", "a"]);
        assert_eq!(tokenize("1 wk.").tokens(), ["1", "wk"]);
        assert_eq!(tokenize("Ménière's ÖRE").tokens(), ["ménière", "s", "öre"]);
    }

    #[test]
    fn keep_punctuation_emits_symbols() {
        let opts = TokenizerOptions {
            keep_punctuation: true,
        };
        assert_eq!(tokenize_opts("1 wk.", &opts).tokens(), ["1", "wk", "."]);
    }

    #[test]
    fn offsets_are_character_based() {
        let toks = tokenize_with_offsets("é x", &TokenizerOptions::default());
        assert_eq!(toks[0].range(), 0..1);
        assert_eq!(toks[1].range(), 2..3);
    }

    #[test]
    fn lcs_examples() {
        assert_eq!(lcs_length(&seq("a b c d"), &seq("b a c d")), 3);
        assert_eq!(lcs_length(&seq("a b c"), &seq("a b c")), 3);
        assert_eq!(lcs_length(&seq("x y"), &seq("p q r")), 0);
        assert_eq!(lcs_length(&seq(""), &seq("p q r")), 0);
    }

    #[test]
    fn rouge1_hand_counted() {
        let s = rouge1(&tokenize("de kat zat"), &tokenize("de kat at"));
        assert!((s.precision - 2.0 / 3.0).abs() < 1e-12);
        assert!((s.recall - 2.0 / 3.0).abs() < 1e-12);
        assert!((s.f1 - 0.6667).abs() < 1e-4);
    }

    #[test]
    fn rouge1_counts_multiset_overlap() {
        // "a" appears twice in the candidate but once in the reference.
        let s = rouge1(&seq("a a b"), &seq("a b c d"));
        assert!((s.precision - 2.0 / 3.0).abs() < 1e-12);
        assert!((s.recall - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rouge_l_examples() {
        let s = rouge_l(&seq("a b c d"), &seq("b a c d"));
        assert_eq!((s.precision, s.recall, s.f1), (0.75, 0.75, 0.75));
        assert_eq!(rouge_l(&seq("x y"), &seq("p q r")), RougeScore::ZERO);
        let same = rouge_l(&seq("p q"), &seq("p q"));
        assert_eq!((same.precision, same.recall, same.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn empty_inputs_score_zero() {
        assert_eq!(rouge1(&seq(""), &seq("a b")), RougeScore::ZERO);
        assert_eq!(rouge1(&seq("a b"), &seq("")), RougeScore::ZERO);
        assert_eq!(rouge_l(&seq(""), &seq("")), RougeScore::ZERO);
    }

    #[test]
    fn score_pair_serializes_with_rouge_l_key() {
        let pair = score_texts("a", "a", &TokenizerOptions::default());
        let json = serde_json::to_value(pair).unwrap();
        assert!(json.get("rougeL").is_some());
        assert_eq!(json["rouge1"]["f1"], 1.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn tokens() -> impl Strategy<Value = TokenSequence> {
            proptest::collection::vec(prop::sample::select(vec!["a", "b", "c", "d", "e"]), 0..12)
                .prop_map(|v| v.into_iter().collect())
        }

        fn unit(s: RougeScore) -> bool {
            [s.precision, s.recall, s.f1].iter().all(|v| (0.0..=1.0).contains(v))
        }

        proptest! {
            #[test]
            fn scores_lie_in_unit_interval(a in tokens(), b in tokens()) {
                prop_assert!(unit(rouge1(&a, &b)));
                prop_assert!(unit(rouge_l(&a, &b)));
            }

            #[test]
            fn swapping_arguments_swaps_precision_and_recall(a in tokens(), b in tokens()) {
                let (x, y) = (rouge1(&a, &b), rouge1(&b, &a));
                prop_assert_eq!((x.precision, x.recall), (y.recall, y.precision));
                let (x, y) = (rouge_l(&a, &b), rouge_l(&b, &a));
                prop_assert_eq!((x.precision, x.recall), (y.recall, y.precision));
            }

            #[test]
            fn lcs_never_beats_unigram_overlap(a in tokens(), b in tokens()) {
                prop_assert!(lcs_length(&a, &b) <= unigram_overlap(&a, &b));
                prop_assert!(rouge_l(&a, &b).f1 <= rouge1(&a, &b).f1 + 1e-12);
            }

            #[test]
            fn identical_sequences_score_one(a in tokens()) {
                prop_assume!(!a.is_empty());
                prop_assert_eq!(rouge1(&a, &a).f1, 1.0);
                prop_assert_eq!(rouge_l(&a, &a).f1, 1.0);
            }

            #[test]
            fn offsets_slice_back_to_tokens(text in "[a-zA-Z0-9 .,:;é\\n-]{0,60}") {
                let chars: Vec<char> = text.chars().collect();
                for t in tokenize_with_offsets(&text, &TokenizerOptions::default()) {
                    let slice: String = chars[t.start..t.end].iter().collect();
                    prop_assert_eq!(slice.to_lowercase(), t.token);
                }
            }
        }
    }
}
