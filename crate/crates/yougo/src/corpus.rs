//! Tagged-token data model and the neutral corpus file format.
//!
//! Input arrives pre-tagged, one token per line as
//! `surface<TAB>lemma<TAB>raw_pos<TAB>inflection`, with blank lines as
//! sentence boundaries and `#doc <id>` lines as document boundaries. A
//! [`TagMap`] collapses the tagger's raw POS strings onto the closed
//! canonical alphabet the grammar is written against, so any tagger can
//! feed the extractor.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

/// Reserved separator used to join lemmas into term keys. Corpus fields
/// must never contain it; the parser rejects lines that do.
pub const KEY_SEPARATOR: char = '\u{2016}'; // '‖'

/// Document id assigned to tokens that appear before any `#doc` directive.
pub const DEFAULT_DOC_ID: &str = "doc1";

/// Canonical POS tag alphabet. The grammar may reference only these tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CanonicalTag {
    /// Nominal noun.
    N,
    /// Deverbal noun (acts as a verb with auxiliary *suru*).
    Vn,
    /// Deadjectival noun (acts as an adjective with *na* inflection).
    An,
    /// Prefix word.
    Pfx,
    /// Nominal suffix word.
    Sfx,
    /// Suffix deriving an adjectival stem (e.g. *teki*).
    SfxStem,
    /// Suffix deriving a noun from an adjective (e.g. *sa*).
    SfxNom,
    /// Inflected verb other than a deverbal noun.
    VInf,
    /// Inflected adjective other than a deadjectival noun.
    AInf,
    /// Adjective stem.
    Adj,
    /// Number sequence.
    Num,
    /// Symbol sequence.
    Sym,
    /// Genitive particle *no*.
    No,
    /// Anything outside the term grammar.
    Other,
}

impl CanonicalTag {
    pub const ALL: [CanonicalTag; 14] = [
        CanonicalTag::N,
        CanonicalTag::Vn,
        CanonicalTag::An,
        CanonicalTag::Pfx,
        CanonicalTag::Sfx,
        CanonicalTag::SfxStem,
        CanonicalTag::SfxNom,
        CanonicalTag::VInf,
        CanonicalTag::AInf,
        CanonicalTag::Adj,
        CanonicalTag::Num,
        CanonicalTag::Sym,
        CanonicalTag::No,
        CanonicalTag::Other,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CanonicalTag::N => "N",
            CanonicalTag::Vn => "VN",
            CanonicalTag::An => "AN",
            CanonicalTag::Pfx => "PFX",
            CanonicalTag::Sfx => "SFX",
            CanonicalTag::SfxStem => "SFX_STEM",
            CanonicalTag::SfxNom => "SFX_NOM",
            CanonicalTag::VInf => "V_INF",
            CanonicalTag::AInf => "A_INF",
            CanonicalTag::Adj => "ADJ",
            CanonicalTag::Num => "NUM",
            CanonicalTag::Sym => "SYM",
            CanonicalTag::No => "NO",
            CanonicalTag::Other => "OTHER",
        }
    }

    pub fn from_name(name: &str) -> Option<CanonicalTag> {
        Self::ALL.iter().copied().find(|t| t.name() == name)
    }

    /// Bit for tag-set masks used by compiled patterns.
    pub fn bit(self) -> u16 {
        1 << (self as u16)
    }

    /// Tags carrying an inflection label.
    pub fn inflects(self) -> bool {
        matches!(self, CanonicalTag::VInf | CanonicalTag::AInf)
    }
}

impl fmt::Display for CanonicalTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Optional word-origin marker carried as metadata.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum WordOrigin {
    /// Imported word (foreign origin).
    Imported,
    /// Word originating in traditional Japanese.
    Traditional,
}

impl WordOrigin {
    pub fn name(self) -> &'static str {
        match self {
            WordOrigin::Imported => "IW",
            WordOrigin::Traditional => "WJ",
        }
    }
}

/// One tagged word.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Token {
    pub surface: String,
    pub lemma: String,
    pub tag: CanonicalTag,
    /// Inflection label; empty unless the tag inflects.
    pub inflection: String,
    pub origin: Option<WordOrigin>,
}

impl Token {
    /// Builds a token, dropping the inflection label on tags that do not
    /// inflect so the invariant holds by construction.
    pub fn new(
        surface: impl Into<String>,
        lemma: impl Into<String>,
        tag: CanonicalTag,
        inflection: impl Into<String>,
        origin: Option<WordOrigin>,
    ) -> Token {
        let inflection = if tag.inflects() {
            inflection.into()
        } else {
            String::new()
        };
        Token {
            surface: surface.into(),
            lemma: lemma.into(),
            tag,
            inflection,
            origin,
        }
    }
}

/// Ordered token list; candidates never cross sentence boundaries.
pub type Sentence = Vec<Token>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub sentences: Vec<Sentence>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Corpus {
    pub documents: Vec<Document>,
}

impl Corpus {
    pub fn token_count(&self) -> usize {
        self.sentences().map(|(_, _, s)| s.len()).sum()
    }

    /// Iterates sentences in corpus order as (doc id, sentence index, tokens).
    pub fn sentences(&self) -> impl Iterator<Item = (&str, usize, &[Token])> {
        self.documents.iter().flat_map(|d| {
            d.sentences
                .iter()
                .enumerate()
                .map(move |(i, s)| (d.id.as_str(), i, s.as_slice()))
        })
    }
}

/// Errors from corpus and tag-map parsing. Every variant names the
/// offending line.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum CorpusError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: unmapped POS tag `{raw}`")]
    UnmappedTag { line: usize, raw: String },
}

impl CorpusError {
    fn malformed(line: usize, reason: impl Into<String>) -> CorpusError {
        CorpusError::Malformed {
            line,
            reason: reason.into(),
        }
    }
}

/// Mapping from raw tagger POS strings (optionally paired with an
/// inflection type) onto the canonical tag alphabet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagMap {
    by_pair: BTreeMap<(String, String), CanonicalTag>,
    by_raw: BTreeMap<String, CanonicalTag>,
    /// Default policy for raw tags absent from the map: fail instead of
    /// mapping to OTHER.
    fail_on_unknown: bool,
}

impl TagMap {
    /// Map in which every canonical tag name maps to itself. Used when no
    /// tag map is supplied, i.e. the corpus is already canonically tagged.
    pub fn identity() -> TagMap {
        let by_raw = CanonicalTag::ALL
            .iter()
            .map(|t| (t.name().to_string(), *t))
            .collect();
        TagMap {
            by_pair: BTreeMap::new(),
            by_raw,
            fail_on_unknown: false,
        }
    }

    /// Parses the tag-map file format: one `raw[<TAB>inflection] -> TAG`
    /// mapping per line, `#` comments, and an optional trailing
    /// `* -> OTHER` / `* -> FAIL` default-policy line.
    pub fn parse(text: &str) -> Result<TagMap, CorpusError> {
        let mut map = TagMap {
            by_pair: BTreeMap::new(),
            by_raw: BTreeMap::new(),
            fail_on_unknown: false,
        };
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (lhs, rhs) = line
                .split_once("->")
                .ok_or_else(|| CorpusError::malformed(line_no, "expected `lhs -> TAG`"))?;
            let rhs = rhs.trim();
            let lhs = lhs.trim();
            if lhs == "*" {
                map.fail_on_unknown = match rhs {
                    "FAIL" => true,
                    "OTHER" => false,
                    other => {
                        return Err(CorpusError::malformed(
                            line_no,
                            format!("default policy must be OTHER or FAIL, got `{other}`"),
                        ))
                    }
                };
                continue;
            }
            let tag = CanonicalTag::from_name(rhs).ok_or_else(|| {
                CorpusError::malformed(line_no, format!("unknown canonical tag `{rhs}`"))
            })?;
            let mut fields = lhs.split('\t');
            let raw = fields.next().unwrap_or("").trim();
            if raw.is_empty() {
                return Err(CorpusError::malformed(line_no, "empty raw tag"));
            }
            match fields.next() {
                Some(infl) => {
                    let infl = normalize_inflection_field(infl.trim());
                    map.by_pair.insert((raw.to_string(), infl.to_string()), tag);
                }
                None => {
                    map.by_raw.insert(raw.to_string(), tag);
                }
            }
        }
        Ok(map)
    }

    pub fn fail_on_unknown(&self) -> bool {
        self.fail_on_unknown
    }

    /// Deterministic lookup: the (raw, inflection) pair is consulted
    /// before the raw tag alone.
    pub fn map(&self, raw: &str, inflection: &str) -> Option<CanonicalTag> {
        self.by_pair
            .get(&(raw.to_string(), inflection.to_string()))
            .or_else(|| self.by_raw.get(raw))
            .copied()
    }
}

fn normalize_inflection_field(field: &str) -> &str {
    if field == "-" {
        ""
    } else {
        field
    }
}

fn check_field(line_no: usize, name: &str, value: &str) -> Result<(), CorpusError> {
    if value.is_empty() {
        return Err(CorpusError::malformed(
            line_no,
            format!("empty {name} field"),
        ));
    }
    if value.contains(KEY_SEPARATOR) {
        return Err(CorpusError::malformed(
            line_no,
            format!("{name} field contains the reserved separator `{KEY_SEPARATOR}`"),
        ));
    }
    Ok(())
}

/// Parses the corpus file format. Under `strict` (or a `* -> FAIL` map
/// policy) a raw tag missing from the map is an error; otherwise it maps
/// to OTHER.
pub fn parse_tagged_stream(text: &str, map: &TagMap, strict: bool) -> Result<Corpus, CorpusError> {
    let strict = strict || map.fail_on_unknown;
    let mut documents: Vec<Document> = Vec::new();
    let mut seen_ids: BTreeMap<String, ()> = BTreeMap::new();
    // None until the first token or directive arrives.
    let mut current: Option<Document> = None;
    let mut sentence: Sentence = Vec::new();

    fn flush_sentence(current: &mut Option<Document>, sentence: &mut Sentence) {
        if sentence.is_empty() {
            return;
        }
        let doc = current.get_or_insert_with(|| Document {
            id: DEFAULT_DOC_ID.to_string(),
            sentences: Vec::new(),
        });
        doc.sentences.push(std::mem::take(sentence));
    }

    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            flush_sentence(&mut current, &mut sentence);
            continue;
        }
        if let Some(rest) = line.strip_prefix("#doc") {
            if !rest.starts_with(char::is_whitespace) && !rest.is_empty() {
                return Err(CorpusError::malformed(
                    line_no,
                    "malformed `#doc` directive",
                ));
            }
            let id = rest.trim();
            if id.is_empty() {
                return Err(CorpusError::malformed(
                    line_no,
                    "`#doc` directive without an id",
                ));
            }
            check_field(line_no, "document id", id)?;
            flush_sentence(&mut current, &mut sentence);
            if let Some(doc) = current.take() {
                documents.push(doc);
            }
            if seen_ids.insert(id.to_string(), ()).is_some() {
                return Err(CorpusError::malformed(
                    line_no,
                    format!("duplicate document id `{id}`"),
                ));
            }
            current = Some(Document {
                id: id.to_string(),
                sentences: Vec::new(),
            });
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 && fields.len() != 5 {
            return Err(CorpusError::malformed(
                line_no,
                format!("expected 4 or 5 tab-separated fields, got {}", fields.len()),
            ));
        }
        let (surface, lemma, raw_pos) = (fields[0], fields[1], fields[2]);
        check_field(line_no, "surface", surface)?;
        check_field(line_no, "lemma", lemma)?;
        check_field(line_no, "raw POS", raw_pos)?;
        let inflection = normalize_inflection_field(fields[3]);
        let origin = match fields.get(4).copied() {
            None | Some("-") => None,
            Some("IW") => Some(WordOrigin::Imported),
            Some("WJ") => Some(WordOrigin::Traditional),
            Some(other) => {
                return Err(CorpusError::malformed(
                    line_no,
                    format!("unknown origin marker `{other}` (expected IW, WJ or -)"),
                ))
            }
        };
        let tag = match map.map(raw_pos, inflection) {
            Some(tag) => tag,
            None if strict => {
                return Err(CorpusError::UnmappedTag {
                    line: line_no,
                    raw: raw_pos.to_string(),
                })
            }
            None => CanonicalTag::Other,
        };
        sentence.push(Token::new(surface, lemma, tag, inflection, origin));
    }
    flush_sentence(&mut current, &mut sentence);
    if let Some(doc) = current.take() {
        documents.push(doc);
    }
    Ok(Corpus { documents })
}

/// Canonical writer for the corpus format. `parse_tagged_stream` of the
/// output under an identity map reproduces the corpus exactly.
pub fn serialize_corpus(corpus: &Corpus) -> String {
    let mut out = String::new();
    for doc in &corpus.documents {
        out.push_str("#doc ");
        out.push_str(&doc.id);
        out.push('\n');
        for sentence in &doc.sentences {
            for token in sentence {
                out.push_str(&token.surface);
                out.push('\t');
                out.push_str(&token.lemma);
                out.push('\t');
                out.push_str(token.tag.name());
                out.push('\t');
                if token.inflection.is_empty() {
                    out.push('-');
                } else {
                    out.push_str(&token.inflection);
                }
                if let Some(origin) = token.origin {
                    out.push('\t');
                    out.push_str(origin.name());
                }
                out.push('\n');
            }
            out.push('\n');
        }
    }
    out
}
