//! Evaluation harness: acceptance coverage of a grammar over gold term
//! lists, and extraction precision / hit rates against keyword sets. Hit
//! rates are reported against both the full key set and the upper bound
//! (multiword keys actually present in the text), since a true recall is
//! not computable without a complete domain terminology.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::bank::TermKey;
use crate::corpus::{CanonicalTag, Corpus, Sentence, Token};
use crate::grammar::CompiledGrammar;
use crate::matcher::accepts;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("empty gold term list")]
    EmptyGold,
}

/// Coverage of a grammar over a gold term list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageReport {
    pub total_terms: usize,
    pub one_word_terms: usize,
    /// Terms containing a genitive particle.
    pub phrasal_terms: usize,
    pub accepted_terms: usize,
    /// Accepted-term count per pattern name.
    pub histogram: BTreeMap<String, usize>,
}

impl CoverageReport {
    pub fn one_word_rate(&self) -> f64 {
        self.one_word_terms as f64 / self.total_terms as f64
    }

    pub fn phrasal_rate(&self) -> f64 {
        self.phrasal_terms as f64 / self.total_terms as f64
    }

    pub fn coverage_rate(&self) -> f64 {
        self.accepted_terms as f64 / self.total_terms as f64
    }
}

/// Checks each gold term (a pre-tagged token sequence) for whole-sequence
/// acceptance by the grammar. One-word terms are never accepted since no
/// pattern spans a single token.
pub fn coverage_eval(
    grammar: &CompiledGrammar,
    gold: &[Sentence],
) -> Result<CoverageReport, EvalError> {
    if gold.is_empty() {
        return Err(EvalError::EmptyGold);
    }
    let mut report = CoverageReport {
        total_terms: gold.len(),
        one_word_terms: 0,
        phrasal_terms: 0,
        accepted_terms: 0,
        histogram: BTreeMap::new(),
    };
    for term in gold {
        if term.len() == 1 {
            report.one_word_terms += 1;
        }
        if term.iter().any(|t| t.tag == CanonicalTag::No) {
            report.phrasal_terms += 1;
        }
        if let Some(pattern) = accepts(grammar, term) {
            report.accepted_terms += 1;
            *report.histogram.entry(pattern.to_string()).or_insert(0) += 1;
        }
    }
    Ok(report)
}

/// Extraction performance against a gold key set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractionReport {
    pub extracted_count: usize,
    pub gold_total: usize,
    /// Gold terms whose lemma sequence occurs contiguously in the corpus.
    pub gold_in_text: usize,
    /// One-word gold terms among those in the text.
    pub gold_one_word: usize,
    /// Multiword gold terms in the text: the most any extractor of this
    /// design can hit.
    pub upper_bound: usize,
    pub correct_count: usize,
}

impl ExtractionReport {
    pub fn precision(&self) -> Option<f64> {
        ratio(self.correct_count, self.extracted_count)
    }

    pub fn hit_rate_all(&self) -> Option<f64> {
        ratio(self.correct_count, self.gold_total)
    }

    pub fn hit_rate_upper(&self) -> Option<f64> {
        ratio(self.correct_count, self.upper_bound)
    }
}

fn ratio(numer: usize, denom: usize) -> Option<f64> {
    if denom == 0 {
        None
    } else {
        Some(numer as f64 / denom as f64)
    }
}

/// Lemma sequence used for containment matching: genitive particles are
/// transparent on both sides.
fn match_lemmas(tokens: &[Token]) -> Vec<&str> {
    tokens
        .iter()
        .filter(|t| t.tag != CanonicalTag::No)
        .map(|t| t.lemma.as_str())
        .collect()
}

/// True iff the term's lemma sequence appears as contiguous tokens in
/// some sentence, with genitive particles transparent for matching.
pub fn contained_in_text(term: &[Token], corpus: &Corpus) -> bool {
    let needle = match_lemmas(term);
    if needle.is_empty() {
        return false;
    }
    corpus.sentences().any(|(_, _, tokens)| {
        let hay = match_lemmas(tokens);
        hay.len() >= needle.len() && hay.windows(needle.len()).any(|w| w == needle)
    })
}

/// Compares extracted keys against a gold term list: correctness is exact
/// normalized-key equality, no partial credit.
pub fn extraction_eval(
    extracted: &[TermKey],
    gold: &[Sentence],
    corpus: &Corpus,
) -> Result<ExtractionReport, EvalError> {
    if gold.is_empty() {
        return Err(EvalError::EmptyGold);
    }
    let mut gold_in_text = 0;
    let mut gold_one_word = 0;
    let mut gold_keys: BTreeSet<TermKey> = BTreeSet::new();
    for term in gold {
        gold_keys.insert(TermKey::from_lemmas(term.iter().map(|t| t.lemma.as_str())));
        if contained_in_text(term, corpus) {
            gold_in_text += 1;
            if term.len() == 1 {
                gold_one_word += 1;
            }
        }
    }
    let extracted_keys: BTreeSet<&TermKey> = extracted.iter().collect();
    let correct_count = gold_keys
        .iter()
        .filter(|k| extracted_keys.contains(k))
        .count();
    Ok(ExtractionReport {
        extracted_count: extracted.len(),
        gold_total: gold.len(),
        gold_in_text,
        gold_one_word,
        upper_bound: gold_in_text - gold_one_word,
        correct_count,
    })
}

/// Percentage with one decimal, rounded half-up; `None` when the
/// denominator is zero. Integer arithmetic keeps the rendering exact.
pub fn percent_1dp(numer: u64, denom: u64) -> Option<String> {
    if denom == 0 {
        return None;
    }
    let tenths = (numer as u128 * 2000 + denom as u128) / (2 * denom as u128);
    Some(format!("{}.{}", tenths / 10, tenths % 10))
}
