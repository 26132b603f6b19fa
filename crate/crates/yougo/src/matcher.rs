//! Sentence scanner: deterministic leftmost-longest, non-overlapping
//! application of the grammar, and whole-sequence acceptance for the
//! coverage evaluator. Long matches are taken whole so a long term is
//! never decomposed into its shorter pieces.

use crate::corpus::{Corpus, Token};
use crate::grammar::{match_at, CompiledGrammar};

/// A matched token span with its pattern and corpus location.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub doc_id: String,
    pub sentence_index: usize,
    pub start: usize,
    pub pattern_name: String,
    pub tokens: Vec<Token>,
}

impl Candidate {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn lemmas(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.lemma.as_str())
    }
}

/// Scans one sentence left to right. At each position every pattern is
/// tried; the longest match wins, ties broken by grammar priority. A
/// match is consumed whole; positions inside it are not re-explored. On
/// no match the scan advances one token.
pub fn scan_sentence(
    grammar: &CompiledGrammar,
    tokens: &[Token],
    doc_id: &str,
    sentence_index: usize,
) -> Vec<Candidate> {
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < tokens.len() {
        let mut best: Option<(usize, usize)> = None; // (length, pattern index)
        for (idx, pattern) in grammar.patterns().iter().enumerate() {
            if let Some(len) = match_at(pattern, tokens, pos) {
                if best.is_none_or(|(best_len, _)| len > best_len) {
                    best = Some((len, idx));
                }
            }
        }
        match best {
            Some((len, idx)) => {
                out.push(Candidate {
                    doc_id: doc_id.to_string(),
                    sentence_index,
                    start: pos,
                    pattern_name: grammar.patterns()[idx].name.clone(),
                    tokens: tokens[pos..pos + len].to_vec(),
                });
                pos += len;
            }
            None => pos += 1,
        }
    }
    out
}

/// Name of the highest-priority pattern accepting the entire sequence.
pub fn accepts<'g>(grammar: &'g CompiledGrammar, tokens: &[Token]) -> Option<&'g str> {
    grammar
        .patterns()
        .iter()
        .find(|p| p.accepts_whole(tokens))
        .map(|p| p.name.as_str())
}

/// Scans every sentence in corpus order.
pub fn extract_corpus(grammar: &CompiledGrammar, corpus: &Corpus) -> Vec<Candidate> {
    corpus
        .sentences()
        .flat_map(|(doc_id, idx, tokens)| scan_sentence(grammar, tokens, doc_id, idx))
        .collect()
}

/// Same output as [`extract_corpus`], scanning sentence chunks on worker
/// threads and reassembling in corpus order.
pub fn extract_corpus_parallel(
    grammar: &CompiledGrammar,
    corpus: &Corpus,
    threads: usize,
) -> Vec<Candidate> {
    let sentences: Vec<(&str, usize, &[Token])> = corpus.sentences().collect();
    if threads <= 1 || sentences.len() <= 1 {
        return extract_corpus(grammar, corpus);
    }
    let chunk_size = sentences.len().div_ceil(threads);
    let mut results: Vec<Vec<Candidate>> = Vec::new();
    std::thread::scope(|scope| {
        let handles: Vec<_> = sentences
            .chunks(chunk_size)
            .map(|chunk| {
                scope.spawn(move || {
                    chunk
                        .iter()
                        .flat_map(|(doc_id, idx, tokens)| {
                            scan_sentence(grammar, tokens, doc_id, *idx)
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        results = handles
            .into_iter()
            .map(|h| h.join().expect("scan worker panicked"))
            .collect();
    });
    results.into_iter().flatten().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{CanonicalTag, Document};
    use crate::grammar::builtin_japanese_grammar;
    use proptest::prelude::*;

    use CanonicalTag::*;

    fn toks(tags: &[CanonicalTag]) -> Vec<Token> {
        tags.iter()
            .enumerate()
            .map(|(i, t)| Token::new(format!("w{i}"), format!("w{i}"), *t, "", None))
            .collect()
    }

    fn compiled() -> CompiledGrammar {
        builtin_japanese_grammar().compile()
    }

    #[test]
    fn three_token_basic_is_not_decomposed() {
        let g = compiled();
        let found = scan_sentence(&g, &toks(&[N, SfxStem, N]), "d", 0);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].pattern_name, "BT4");
        assert_eq!(found[0].len(), 3);
    }

    #[test]
    fn prefix_noun_suffix_matches_variant() {
        let g = compiled();
        let found = scan_sentence(&g, &toks(&[Pfx, N, Sfx]), "d", 0);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].pattern_name, "CT-IW");
        assert_eq!(found[0].len(), 3);
    }

    #[test]
    fn unmatchable_tags_yield_nothing() {
        let g = compiled();
        assert!(scan_sentence(&g, &toks(&[Other, Other]), "d", 0).is_empty());
    }

    #[test]
    fn phrase_wins_over_fragments() {
        let g = compiled();
        let found = scan_sentence(&g, &toks(&[N, N, No, N, N]), "d", 0);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].pattern_name, "PHR");
        assert_eq!(found[0].len(), 5);
    }

    #[test]
    fn two_nouns_scan_as_bt1() {
        let g = compiled();
        let found = scan_sentence(&g, &toks(&[N, N]), "d", 0);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].pattern_name, "BT1");
    }

    #[test]
    fn noun_run_respects_compound_cap() {
        let g = compiled();
        let found = scan_sentence(&g, &toks(&[N; 10]), "d", 0);
        assert_eq!(found[0].pattern_name, "ELEM");
        assert_eq!(found[0].len(), 8);
        assert_eq!(found[1].pattern_name, "BT1");
        assert_eq!(found[1].len(), 2);
    }

    #[test]
    fn accepts_whole_sequence_pins() {
        let g = compiled();
        assert_eq!(accepts(&g, &toks(&[VInf, Sfx])), Some("BT6"));
        assert_eq!(accepts(&g, &toks(&[Adj, SfxNom, N, N])), Some("CT-WJ1"));
        assert_eq!(accepts(&g, &toks(&[Adj, SfxNom, N])), Some("BT8"));
        assert_eq!(accepts(&g, &toks(&[N])), None);
        assert_eq!(accepts(&g, &toks(&[N, N, N])), None);
    }

    #[test]
    fn extract_corpus_concatenates_sentence_scans() {
        let g = compiled();
        let corpus = Corpus {
            documents: vec![
                Document {
                    id: "a".into(),
                    sentences: vec![toks(&[N, N]), toks(&[Other])],
                },
                Document {
                    id: "b".into(),
                    sentences: vec![toks(&[Pfx, N])],
                },
            ],
        };
        let all = extract_corpus(&g, &corpus);
        let mut manual = Vec::new();
        for (doc_id, idx, tokens) in corpus.sentences() {
            manual.extend(scan_sentence(&g, tokens, doc_id, idx));
        }
        assert_eq!(all, manual);
        assert!(extract_corpus(&g, &Corpus::default()).is_empty());
    }

    #[test]
    fn parallel_extraction_matches_sequential() {
        let g = compiled();
        let sentences: Vec<Vec<Token>> = (0..23)
            .map(|i| toks(&vec![[N, Pfx, Sfx, No, Other][i % 5]; (i % 7) + 1]))
            .collect();
        let corpus = Corpus {
            documents: vec![Document {
                id: "d".into(),
                sentences,
            }],
        };
        let sequential = extract_corpus(&g, &corpus);
        for threads in [2, 3, 8] {
            assert_eq!(extract_corpus_parallel(&g, &corpus, threads), sequential);
        }
    }

    proptest! {
        #[test]
        fn candidates_never_overlap_and_respect_caps(
            tags in prop::collection::vec(prop::sample::select(CanonicalTag::ALL.to_vec()), 0..=15),
        ) {
            let g = compiled();
            let tokens = toks(&tags);
            let found = scan_sentence(&g, &tokens, "d", 0);
            let mut prev_end = 0;
            for c in &found {
                prop_assert!(c.start >= prev_end);
                prev_end = c.start + c.len();
                let pattern = g.patterns().iter().find(|p| p.name == c.pattern_name).unwrap();
                prop_assert!(c.len() >= pattern.min_tokens);
                prop_assert!(c.len() <= pattern.max_tokens);
                prop_assert_eq!(&c.tokens[..], &tokens[c.start..c.start + c.len()]);
                // Longest-first: no pattern matches a longer span here.
                for p in g.patterns() {
                    if let Some(len) = match_at(p, &tokens, c.start) {
                        prop_assert!(len <= c.len());
                    }
                }
            }
            prop_assert!(prev_end <= tokens.len());
        }

        #[test]
        fn whole_sentence_acceptance_matches_scan(
            tags in prop::collection::vec(prop::sample::select(CanonicalTag::ALL.to_vec()), 1..=9),
        ) {
            let g = compiled();
            let tokens = toks(&tags);
            if let Some(pattern) = accepts(&g, &tokens) {
                let found = scan_sentence(&g, &tokens, "d", 0);
                prop_assert_eq!(found.len(), 1);
                prop_assert_eq!(found[0].len(), tokens.len());
                prop_assert_eq!(found[0].pattern_name.as_str(), pattern);
            }
        }
    }
}
