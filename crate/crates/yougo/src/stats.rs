//! Word-association statistics: adjacent lemma pairs inside candidate
//! spans, 2x2 contingency tables over them, and the Dunning log-likelihood
//! ratio used to score and rank the term bank.

use std::collections::BTreeMap;

use num_traits::{Float, FromPrimitive};
use thiserror::Error;

use crate::bank::{TermBank, TermEntry, TermKey};
use crate::corpus::CanonicalTag;
use crate::matcher::Candidate;
use crate::Score;

/// Counts of adjacent lemma bigrams observed inside candidate spans.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairCounts {
    pairs: BTreeMap<(String, String), u64>,
    left: BTreeMap<String, u64>,
    right: BTreeMap<String, u64>,
    total: u64,
}

impl PairCounts {
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn pair(&self, w1: &str, w2: &str) -> u64 {
        self.pairs
            .get(&(w1.to_string(), w2.to_string()))
            .copied()
            .unwrap_or(0)
    }

    /// Occurrences of `w` as the left element of a pair.
    pub fn left(&self, w: &str) -> u64 {
        self.left.get(w).copied().unwrap_or(0)
    }

    /// Occurrences of `w` as the right element of a pair.
    pub fn right(&self, w: &str) -> u64 {
        self.right.get(w).copied().unwrap_or(0)
    }

    fn add(&mut self, w1: &str, w2: &str) {
        *self
            .pairs
            .entry((w1.to_string(), w2.to_string()))
            .or_insert(0) += 1;
        *self.left.entry(w1.to_string()).or_insert(0) += 1;
        *self.right.entry(w2.to_string()).or_insert(0) += 1;
        self.total += 1;
    }

    /// Commutative, associative merge for partial counting.
    pub fn merge(&mut self, other: PairCounts) {
        for ((w1, w2), n) in other.pairs {
            *self.pairs.entry((w1, w2)).or_insert(0) += n;
        }
        for (w, n) in other.left {
            *self.left.entry(w).or_insert(0) += n;
        }
        for (w, n) in other.right {
            *self.right.entry(w).or_insert(0) += n;
        }
        self.total += other.total;
    }
}

/// Counts every adjacent lemma pair inside every candidate span. Genitive
/// particles are transparent: the pair bridges across them.
pub fn count_pairs(candidates: &[Candidate]) -> PairCounts {
    let mut counts = PairCounts::default();
    for candidate in candidates {
        let lemmas: Vec<&str> = candidate
            .tokens
            .iter()
            .filter(|t| t.tag != CanonicalTag::No)
            .map(|t| t.lemma.as_str())
            .collect();
        for pair in lemmas.windows(2) {
            counts.add(pair[0], pair[1]);
        }
    }
    counts
}

/// 2x2 contingency table: `a` counts the pair (w1, w2), `b` w1 with a
/// different right element, `c` a different left element with w2, `d`
/// everything else.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContingencyTable {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
}

impl ContingencyTable {
    pub fn total(&self) -> u64 {
        self.a + self.b + self.c + self.d
    }
}

pub fn contingency(w1: &str, w2: &str, counts: &PairCounts) -> ContingencyTable {
    let a = counts.pair(w1, w2);
    let b = counts.left(w1) - a;
    let c = counts.right(w2) - a;
    let d = counts.total() - a - b - c;
    ContingencyTable { a, b, c, d }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StatsError {
    #[error("log-likelihood is undefined on an all-zero table")]
    EmptyTable,
}

fn x_log_x<F: Float + FromPrimitive>(x: u64) -> F {
    if x == 0 {
        F::zero()
    } else {
        let v = F::from_u64(x).expect("cell count representable");
        v * v.ln()
    }
}

/// Dunning log-likelihood ratio of a 2x2 table: `-2 log lambda`, computed
/// in entropy form with the 0*ln(0) = 0 convention. Non-negative; tiny
/// negative round-off is clamped to zero.
pub fn log_likelihood<F: Float + FromPrimitive>(t: &ContingencyTable) -> Result<F, StatsError> {
    let n = t.total();
    if n == 0 {
        return Err(StatsError::EmptyTable);
    }
    let all = x_log_x::<F>(n);
    let row = all - x_log_x::<F>(t.a + t.b) - x_log_x::<F>(t.c + t.d);
    let col = all - x_log_x::<F>(t.a + t.c) - x_log_x::<F>(t.b + t.d);
    let matrix =
        all - x_log_x::<F>(t.a) - x_log_x::<F>(t.b) - x_log_x::<F>(t.c) - x_log_x::<F>(t.d);
    let score = (F::one() + F::one()) * (row + col - matrix);
    Ok(if score < F::zero() { F::zero() } else { score })
}

/// Scores every entry by the log-likelihood of its linked basic term's
/// (modifier, head) lemma pair: the first and last lemma of the basic
/// key. Entries without a basic link stay unscored.
pub fn score_bank(mut bank: TermBank, counts: &PairCounts) -> TermBank {
    let scores: Vec<(TermKey, Option<Score>)> = bank
        .entries
        .values()
        .map(|entry| {
            let score = entry.basic_key.as_ref().and_then(|basic| {
                let lemmas: Vec<&str> = basic.lemmas().collect();
                let (first, last) = (lemmas.first()?, lemmas.last()?);
                if lemmas.len() < 2 {
                    return None;
                }
                log_likelihood::<Score>(&contingency(first, last, counts)).ok()
            });
            (entry.key.clone(), score)
        })
        .collect();
    for (key, score) in scores {
        if let Some(entry) = bank.entries.get_mut(&key) {
            entry.score = score;
        }
    }
    bank
}

/// Scored entries at or above the threshold, sorted by (score descending,
/// frequency descending, key ascending). With no threshold every
/// non-synthetic entry is listed, unscored ones last.
pub fn rank_and_filter(bank: &TermBank, min_llr: Option<Score>) -> Vec<TermEntry> {
    let mut out: Vec<TermEntry> = bank
        .entries
        .values()
        .filter(|e| !e.synthetic)
        .filter(|e| match min_llr {
            None => true,
            Some(threshold) => e.score.is_some_and(|s| s >= threshold),
        })
        .cloned()
        .collect();
    out.sort_by(|a, b| {
        let sa = a.score.unwrap_or(Score::NEG_INFINITY);
        let sb = b.score.unwrap_or(Score::NEG_INFINITY);
        sb.partial_cmp(&sa)
            .expect("scores are never NaN")
            .then_with(|| b.frequency.cmp(&a.frequency))
            .then_with(|| a.key.cmp(&b.key))
    });
    out
}
