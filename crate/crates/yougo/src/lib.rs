//! Multiword term extraction from POS-tagged Japanese text.
//!
//! The pipeline mirrors a classic pattern-based terminology extractor:
//! a tagged corpus is scanned with an ordered grammar of morpho-syntactic
//! patterns (longest match first), matched spans are aggregated into a
//! term bank, each complex term is linked to the basic term embedded at
//! its head, and entries are ranked by a log-likelihood association
//! score. An evaluation harness measures pattern coverage over gold term
//! lists and extraction precision against keyword sets.

pub mod bank;
pub mod cli;
pub mod corpus;
pub mod eval;
pub mod grammar;
pub mod matcher;
pub mod stats;

/// Concrete scalar used for association scores throughout the pipeline.
/// The statistics in [`stats`] are generic over `num_traits::Float`; the
/// pipeline instantiates them at `f64`.
pub type Score = f64;

pub use bank::{TermBank, TermEntry, TermKey};
pub use corpus::{CanonicalTag, Corpus, Document, Sentence, TagMap, Token};
pub use grammar::{CompiledGrammar, Grammar, Pattern, PatternKind};
pub use matcher::Candidate;
