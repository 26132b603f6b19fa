//! Term bank: aggregates candidates into entries keyed by normalized
//! (lemma) form and links each complex term to the basic term embedded at
//! its head. The morphological head sits on the final word, so basic
//! terms are recovered from suffix windows; for phrases only the side
//! right of the genitive counts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::corpus::{CanonicalTag, Token, KEY_SEPARATOR};
use crate::grammar::{CompiledGrammar, PatternKind};
use crate::matcher::Candidate;
use crate::Score;

/// Normalized term key: token lemmas joined with the reserved separator.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TermKey(String);

impl TermKey {
    pub fn from_lemmas<'a>(lemmas: impl IntoIterator<Item = &'a str>) -> TermKey {
        let mut joined = String::new();
        for (i, lemma) in lemmas.into_iter().enumerate() {
            if i > 0 {
                joined.push(KEY_SEPARATOR);
            }
            joined.push_str(lemma);
        }
        TermKey(joined)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn lemmas(&self) -> impl Iterator<Item = &str> {
        self.0.split(KEY_SEPARATOR)
    }

    pub fn token_len(&self) -> usize {
        self.lemmas().count()
    }
}

impl fmt::Display for TermKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Key of a candidate. Inflection variants with equal lemma sequences
/// collapse to one key.
pub fn normalize_key(candidate: &Candidate) -> TermKey {
    TermKey::from_lemmas(candidate.lemmas())
}

/// An aggregated term.
#[derive(Debug, Clone, PartialEq)]
pub struct TermEntry {
    pub key: TermKey,
    /// Majority pattern among the entry's candidates.
    pub pattern_name: String,
    pub frequency: u64,
    /// Observed surface renderings with their multiplicities.
    pub surfaces: BTreeMap<String, u64>,
    pub basic_key: Option<TermKey>,
    pub variant_keys: BTreeSet<TermKey>,
    pub score: Option<Score>,
    /// Created by linking as a zero-frequency basic target; excluded from
    /// frequency-based metrics and ranked output.
    pub synthetic: bool,
    pattern_counts: BTreeMap<String, u64>,
    rep_tokens: Vec<Token>,
}

impl TermEntry {
    pub fn token_len(&self) -> usize {
        self.rep_tokens.len()
    }

    /// Representative token sequence (smallest among the entry's
    /// candidates, so aggregation order does not matter).
    pub fn rep_tokens(&self) -> &[Token] {
        &self.rep_tokens
    }

    /// Most frequent surface rendering; falls back to the lemma join for
    /// synthetic entries that were never observed.
    pub fn display_surface(&self) -> String {
        self.surfaces
            .iter()
            .max_by(|(sa, ca), (sb, cb)| ca.cmp(cb).then(sb.cmp(sa)))
            .map(|(s, _)| s.clone())
            .unwrap_or_else(|| self.key.lemmas().collect::<Vec<_>>().join(" "))
    }
}

/// Key-sorted map of term entries.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TermBank {
    pub entries: BTreeMap<TermKey, TermEntry>,
    pub total_candidates: u64,
}

impl TermBank {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &TermKey) -> Option<&TermEntry> {
        self.entries.get(key)
    }
}

fn surface_rendering(tokens: &[Token]) -> String {
    tokens
        .iter()
        .map(|t| t.surface.as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Folds candidates into a bank: one entry per distinct key, frequency =
/// multiplicity, surfaces unioned. Insertion order does not matter.
pub fn aggregate(candidates: &[Candidate]) -> TermBank {
    let mut bank = TermBank::default();
    for candidate in candidates {
        let key = normalize_key(candidate);
        let entry = bank
            .entries
            .entry(key.clone())
            .or_insert_with(|| TermEntry {
                key,
                pattern_name: String::new(),
                frequency: 0,
                surfaces: BTreeMap::new(),
                basic_key: None,
                variant_keys: BTreeSet::new(),
                score: None,
                synthetic: false,
                pattern_counts: BTreeMap::new(),
                rep_tokens: candidate.tokens.clone(),
            });
        entry.frequency += 1;
        *entry
            .surfaces
            .entry(surface_rendering(&candidate.tokens))
            .or_insert(0) += 1;
        *entry
            .pattern_counts
            .entry(candidate.pattern_name.clone())
            .or_insert(0) += 1;
        if candidate.tokens < entry.rep_tokens {
            entry.rep_tokens = candidate.tokens.clone();
        }
        bank.total_candidates += 1;
    }
    for entry in bank.entries.values_mut() {
        entry.pattern_name = majority_pattern(&entry.pattern_counts, None);
    }
    bank
}

/// Majority pattern name; ties go to the higher-priority pattern when a
/// grammar is at hand, otherwise to the lexicographically smaller name.
fn majority_pattern(counts: &BTreeMap<String, u64>, grammar: Option<&CompiledGrammar>) -> String {
    let priority_of = |name: &str| -> usize {
        grammar
            .and_then(|g| g.grammar().pattern(name))
            .map(|p| p.priority)
            .unwrap_or(usize::MAX)
    };
    counts
        .iter()
        .max_by(|(na, ca), (nb, cb)| {
            ca.cmp(cb)
                .then_with(|| priority_of(nb).cmp(&priority_of(na)))
                .then_with(|| nb.cmp(na))
        })
        .map(|(name, _)| name.clone())
        .unwrap_or_default()
}

/// Links every compound, variant and phrase entry to the basic term at
/// its head: the longest suffix window (right of the genitive for
/// phrases) accepted by a basic pattern names the target, synthesizing a
/// zero-frequency basic entry when the target was never observed. Basic
/// entries link to themselves. Idempotent.
pub fn link_variants(mut bank: TermBank, grammar: &CompiledGrammar) -> TermBank {
    let min_basic = match grammar.grammar().min_basic_len() {
        Some(len) => len,
        None => return bank,
    };
    let window_lengths: Vec<usize> = grammar
        .grammar()
        .basic_window_lengths()
        .into_iter()
        .rev()
        .collect();
    let basics: Vec<&crate::grammar::CompiledPattern> = grammar
        .patterns()
        .iter()
        .filter(|p| p.kind == PatternKind::Basic)
        .collect();

    // Resolve tie-broken pattern names now that priorities are known.
    for entry in bank.entries.values_mut() {
        if !entry.pattern_counts.is_empty() {
            entry.pattern_name = majority_pattern(&entry.pattern_counts, Some(grammar));
        }
    }

    let mut links: BTreeMap<TermKey, Option<TermKey>> = BTreeMap::new();
    let mut synth: BTreeMap<TermKey, (String, Vec<Token>)> = BTreeMap::new();

    for entry in bank.entries.values() {
        let kind = grammar
            .grammar()
            .pattern(&entry.pattern_name)
            .map(|p| p.kind);
        let link = match kind {
            Some(PatternKind::Basic) => Some(entry.key.clone()),
            Some(PatternKind::Compound)
            | Some(PatternKind::Variant)
            | Some(PatternKind::Phrase)
                if entry.token_len() > min_basic =>
            {
                let tokens = entry.rep_tokens();
                let source: &[Token] = if kind == Some(PatternKind::Phrase) {
                    match tokens.iter().rposition(|t| t.tag == CanonicalTag::No) {
                        Some(pos) => &tokens[pos + 1..],
                        None => tokens,
                    }
                } else {
                    tokens
                };
                let mut found = None;
                'windows: for &len in &window_lengths {
                    if len > source.len() {
                        continue;
                    }
                    let window = &source[source.len() - len..];
                    for basic in &basics {
                        if basic.accepts_whole(window) {
                            let key = TermKey::from_lemmas(window.iter().map(|t| t.lemma.as_str()));
                            if !bank.entries.contains_key(&key) {
                                synth.insert(key.clone(), (basic.name.clone(), window.to_vec()));
                            }
                            found = Some(key);
                            break 'windows;
                        }
                    }
                }
                found
            }
            _ => None,
        };
        links.insert(entry.key.clone(), link);
    }

    for (key, (pattern_name, tokens)) in synth {
        links.insert(key.clone(), Some(key.clone()));
        bank.entries.insert(
            key.clone(),
            TermEntry {
                key,
                pattern_name,
                frequency: 0,
                surfaces: BTreeMap::new(),
                basic_key: None,
                variant_keys: BTreeSet::new(),
                score: None,
                synthetic: true,
                pattern_counts: BTreeMap::new(),
                rep_tokens: tokens,
            },
        );
    }

    for entry in bank.entries.values_mut() {
        entry.basic_key = links.get(&entry.key).cloned().flatten();
        entry.variant_keys.clear();
    }
    let inverse: Vec<(TermKey, TermKey)> = bank
        .entries
        .values()
        .filter_map(|e| {
            e.basic_key
                .as_ref()
                .filter(|b| **b != e.key)
                .map(|b| (b.clone(), e.key.clone()))
        })
        .collect();
    for (basic, variant) in inverse {
        if let Some(entry) = bank.entries.get_mut(&basic) {
            entry.variant_keys.insert(variant);
        }
    }
    bank
}
