//! Command-line pipeline: corpus in, ranked term list and evaluation
//! reports out. All output is deterministic; repeated runs over the same
//! inputs are byte-identical regardless of the thread count.

use std::io::{Read, Write};
use std::path::PathBuf;

use thiserror::Error;

use crate::bank::{aggregate, link_variants, TermEntry};
use crate::corpus::{parse_tagged_stream, Corpus, CorpusError, Sentence, TagMap};
use crate::eval::{
    coverage_eval, extraction_eval, percent_1dp, CoverageReport, EvalError, ExtractionReport,
};
use crate::grammar::{builtin_japanese_grammar, load_grammar, CompiledGrammar, GrammarError};
use crate::matcher::extract_corpus_parallel;
use crate::stats::{count_pairs, rank_and_filter, score_bank};
use crate::Score;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GrammarSource {
    Builtin,
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Tsv,
    Structured,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub grammar: GrammarSource,
    pub tagmap: Option<PathBuf>,
    pub min_llr: Option<Score>,
    /// Clamp on every pattern's maximum span; a cap below a pattern's
    /// minimum disables that pattern.
    pub max_len: Option<usize>,
    pub format: OutputFormat,
    pub strict_tags: bool,
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig {
            grammar: GrammarSource::Builtin,
            tagmap: None,
            min_llr: None,
            max_len: None,
            format: OutputFormat::Tsv,
            strict_tags: false,
            threads: 1,
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Corpus {
        path: String,
        #[source]
        source: CorpusError,
    },
    #[error("{path}: {source}")]
    Grammar {
        path: String,
        #[source]
        source: GrammarError,
    },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{0}")]
    Config(String),
}

impl CliError {
    /// 2 for I/O failures, 1 for input and validation errors.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 2,
            _ => 1,
        }
    }
}

fn read_input(path: &str) -> Result<String, CliError> {
    if path == "-" {
        let mut buf = String::new();
        std::io::stdin()
            .read_to_string(&mut buf)
            .map_err(|source| CliError::Io {
                path: "<stdin>".to_string(),
                source,
            })?;
        Ok(buf)
    } else {
        std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_string(),
            source,
        })
    }
}

fn load_tagmap(config: &RunConfig) -> Result<TagMap, CliError> {
    match &config.tagmap {
        None => Ok(TagMap::identity()),
        Some(path) => {
            let path_str = path.display().to_string();
            let text = read_input(&path_str)?;
            TagMap::parse(&text).map_err(|source| CliError::Corpus {
                path: path_str,
                source,
            })
        }
    }
}

/// Loads and compiles the configured grammar, applying the `max_len`
/// clamp to extraction pipelines.
pub fn load_run_grammar(config: &RunConfig) -> Result<CompiledGrammar, CliError> {
    let mut grammar = match &config.grammar {
        GrammarSource::Builtin => builtin_japanese_grammar(),
        GrammarSource::File(path) => {
            let path_str = path.display().to_string();
            let text = read_input(&path_str)?;
            load_grammar(&text).map_err(|source| CliError::Grammar {
                path: path_str,
                source,
            })?
        }
    };
    if let Some(cap) = config.max_len {
        if cap < 2 {
            return Err(CliError::Config(format!(
                "--max-len must be at least 2, got {cap}"
            )));
        }
        for pattern in &mut grammar.patterns {
            pattern.max_tokens = pattern.max_tokens.min(cap);
        }
    }
    Ok(grammar.compile())
}

fn parse_corpus_file(config: &RunConfig, path: &str) -> Result<Corpus, CliError> {
    let map = load_tagmap(config)?;
    let text = read_input(path)?;
    parse_tagged_stream(&text, &map, config.strict_tags).map_err(|source| CliError::Corpus {
        path: path.to_string(),
        source,
    })
}

fn gold_terms(corpus: &Corpus) -> Vec<Sentence> {
    corpus
        .sentences()
        .map(|(_, _, tokens)| tokens.to_vec())
        .collect()
}

/// Full extraction pipeline: scan, aggregate, link, score, rank.
pub fn run_extraction(
    grammar: &CompiledGrammar,
    corpus: &Corpus,
    min_llr: Option<Score>,
    threads: usize,
) -> Vec<TermEntry> {
    let candidates = extract_corpus_parallel(grammar, corpus, threads);
    let counts = count_pairs(&candidates);
    let bank = score_bank(link_variants(aggregate(&candidates), grammar), &counts);
    rank_and_filter(&bank, min_llr)
}

fn write_line(out: &mut dyn Write, line: &str) -> Result<(), CliError> {
    writeln!(out, "{line}").map_err(|source| CliError::Io {
        path: "<output>".to_string(),
        source,
    })
}

fn format_score(score: Option<Score>) -> String {
    score.map(|s| format!("{s:.4}")).unwrap_or_default()
}

/// Extracts and prints the ranked term list as TSV.
pub fn cmd_extract(
    config: &RunConfig,
    corpus_path: &str,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let grammar = load_run_grammar(config)?;
    let corpus = parse_corpus_file(config, corpus_path)?;
    let ranked = run_extraction(&grammar, &corpus, config.min_llr, config.threads);
    write_line(
        out,
        "rank\tkey\tsurface\tpattern\tfrequency\tllr\tbasic_key",
    )?;
    for (i, entry) in ranked.iter().enumerate() {
        write_line(
            out,
            &format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                i + 1,
                entry.key,
                entry.display_surface(),
                entry.pattern_name,
                entry.frequency,
                format_score(entry.score),
                entry
                    .basic_key
                    .as_ref()
                    .map(|k| k.to_string())
                    .unwrap_or_default(),
            ),
        )?;
    }
    Ok(())
}

fn render_coverage(
    report: &CoverageReport,
    format: OutputFormat,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let total = report.total_terms as u64;
    let pct = |n: usize| percent_1dp(n as u64, total).unwrap_or_else(|| "-".to_string());
    match format {
        OutputFormat::Tsv => {
            write_line(out, &format!("total_terms\t{}", report.total_terms))?;
            write_line(
                out,
                &format!(
                    "one_word_terms\t{}/{}\t{}",
                    report.one_word_terms,
                    total,
                    pct(report.one_word_terms)
                ),
            )?;
            write_line(
                out,
                &format!(
                    "phrasal_terms\t{}/{}\t{}",
                    report.phrasal_terms,
                    total,
                    pct(report.phrasal_terms)
                ),
            )?;
            write_line(
                out,
                &format!(
                    "accepted_terms\t{}/{}\t{}",
                    report.accepted_terms,
                    total,
                    pct(report.accepted_terms)
                ),
            )?;
            for (pattern, count) in &report.histogram {
                write_line(out, &format!("pattern\t{pattern}\t{count}"))?;
            }
        }
        OutputFormat::Structured => {
            write_line(out, &format!("total_terms\t{}", report.total_terms))?;
            write_line(out, &format!("one_word_terms\t{}", report.one_word_terms))?;
            write_line(
                out,
                &format!("one_word_pct\t{}", pct(report.one_word_terms)),
            )?;
            write_line(out, &format!("phrasal_terms\t{}", report.phrasal_terms))?;
            write_line(out, &format!("phrasal_pct\t{}", pct(report.phrasal_terms)))?;
            write_line(out, &format!("accepted_terms\t{}", report.accepted_terms))?;
            write_line(
                out,
                &format!("coverage_pct\t{}", pct(report.accepted_terms)),
            )?;
            for (pattern, count) in &report.histogram {
                write_line(out, &format!("pattern.{pattern}\t{count}"))?;
            }
        }
    }
    Ok(())
}

/// Evaluates pattern coverage over a gold term file (one term per
/// sentence block) and prints the report.
pub fn cmd_coverage(
    config: &RunConfig,
    gold_path: &str,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let grammar = load_run_grammar(config)?;
    let gold = gold_terms(&parse_corpus_file(config, gold_path)?);
    let report = coverage_eval(&grammar, &gold)?;
    render_coverage(&report, config.format, out)
}

fn render_extraction(
    report: &ExtractionReport,
    format: OutputFormat,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let frac = |n: usize, d: usize| -> String {
        match percent_1dp(n as u64, d as u64) {
            Some(pct) => format!("{n}/{d}\t{pct}"),
            None => format!("{n}/{d}\t-"),
        }
    };
    match format {
        OutputFormat::Tsv => {
            write_line(out, &format!("extracted_count\t{}", report.extracted_count))?;
            write_line(out, &format!("gold_total\t{}", report.gold_total))?;
            write_line(
                out,
                &format!(
                    "gold_in_text\t{}",
                    frac(report.gold_in_text, report.gold_total)
                ),
            )?;
            write_line(
                out,
                &format!(
                    "gold_one_word\t{}",
                    frac(report.gold_one_word, report.gold_in_text)
                ),
            )?;
            write_line(
                out,
                &format!(
                    "upper_bound\t{}",
                    frac(report.upper_bound, report.gold_total)
                ),
            )?;
            write_line(out, &format!("correct_count\t{}", report.correct_count))?;
            write_line(
                out,
                &format!(
                    "precision\t{}",
                    frac(report.correct_count, report.extracted_count)
                ),
            )?;
            write_line(
                out,
                &format!(
                    "hit_rate_all\t{}",
                    frac(report.correct_count, report.gold_total)
                ),
            )?;
            write_line(
                out,
                &format!(
                    "hit_rate_upper\t{}",
                    frac(report.correct_count, report.upper_bound)
                ),
            )?;
        }
        OutputFormat::Structured => {
            write_line(out, &format!("extracted_count\t{}", report.extracted_count))?;
            write_line(out, &format!("gold_total\t{}", report.gold_total))?;
            write_line(out, &format!("gold_in_text\t{}", report.gold_in_text))?;
            write_line(out, &format!("gold_one_word\t{}", report.gold_one_word))?;
            write_line(out, &format!("upper_bound\t{}", report.upper_bound))?;
            write_line(out, &format!("correct_count\t{}", report.correct_count))?;
            let pcts: [(&str, usize, usize); 3] = [
                (
                    "precision_pct",
                    report.correct_count,
                    report.extracted_count,
                ),
                ("hit_rate_all_pct", report.correct_count, report.gold_total),
                (
                    "hit_rate_upper_pct",
                    report.correct_count,
                    report.upper_bound,
                ),
            ];
            for (name, n, d) in pcts {
                if let Some(pct) = percent_1dp(n as u64, d as u64) {
                    write_line(out, &format!("{name}\t{pct}"))?;
                }
            }
        }
    }
    Ok(())
}

/// Runs the extraction pipeline, then compares the extracted keys against
/// the gold term file and prints precision and hit rates.
pub fn cmd_evaluate(
    config: &RunConfig,
    corpus_path: &str,
    gold_path: &str,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let grammar = load_run_grammar(config)?;
    let corpus = parse_corpus_file(config, corpus_path)?;
    let gold = gold_terms(&parse_corpus_file(config, gold_path)?);
    let ranked = run_extraction(&grammar, &corpus, config.min_llr, config.threads);
    let extracted: Vec<crate::bank::TermKey> = ranked.into_iter().map(|entry| entry.key).collect();
    let report = extraction_eval(&extracted, &gold, &corpus)?;
    render_extraction(&report, config.format, out)
}

/// Prints the grammar in the grammar-file syntax; the output is itself
/// loadable. The `max_len` clamp is not applied here so the dump always
/// reflects the grammar as written.
pub fn cmd_grammar_dump(config: &RunConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let grammar = match &config.grammar {
        GrammarSource::Builtin => builtin_japanese_grammar(),
        GrammarSource::File(path) => {
            let path_str = path.display().to_string();
            let text = read_input(&path_str)?;
            load_grammar(&text).map_err(|source| CliError::Grammar {
                path: path_str,
                source,
            })?
        }
    };
    write!(out, "{}", grammar.to_config_string()).map_err(|source| CliError::Io {
        path: "<output>".to_string(),
        source,
    })
}
