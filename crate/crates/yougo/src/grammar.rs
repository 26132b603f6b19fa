//! Pattern grammar: a restricted tag-sequence expression language, the
//! built-in Japanese term inventory, a loader for user grammar files, and
//! the compiled automata the matcher runs.
//!
//! Expressions are concatenations of atoms; each atom is a canonical tag
//! or a named class, with an optional repetition suffix. Alternation
//! exists only inside named classes, whose alternatives may be short tag
//! sequences. That keeps every pattern deterministic to audit while still
//! expressing compound-noun element chains.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::corpus::{CanonicalTag, Token};

/// Token cap for compound-noun spans. Element chains are cut here, and
/// each side of a phrase pattern is held to the same cap.
pub const COMPOUND_SPAN_CAP: usize = 9;

/// Repetition suffix on an atom.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Repeat {
    One,
    Plus,
    Star,
    Range { min: u32, max: Option<u32> },
}

impl Repeat {
    fn min(self) -> usize {
        match self {
            Repeat::One | Repeat::Plus => 1,
            Repeat::Star => 0,
            Repeat::Range { min, .. } => min as usize,
        }
    }

    fn suffix(self) -> String {
        match self {
            Repeat::One => String::new(),
            Repeat::Plus => "+".to_string(),
            Repeat::Star => "*".to_string(),
            Repeat::Range {
                min,
                max: Some(max),
            } if min == max => format!("{{{min}}}"),
            Repeat::Range {
                min,
                max: Some(max),
            } => format!("{{{min},{max}}}"),
            Repeat::Range { min, max: None } => format!("{{{min},}}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AtomItem {
    Tag(CanonicalTag),
    Class(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Atom {
    pub item: AtomItem,
    pub repeat: Repeat,
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.item {
            AtomItem::Tag(t) => write!(f, "{}{}", t.name(), self.repeat.suffix()),
            AtomItem::Class(name) => write!(f, "{}{}", name, self.repeat.suffix()),
        }
    }
}

/// Concatenation of atoms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagExpr {
    pub atoms: Vec<Atom>,
}

impl fmt::Display for TagExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.atoms.iter().map(|a| a.to_string()).collect();
        f.write_str(&parts.join(" "))
    }
}

/// Named union of tag sequences. A class whose alternatives are all
/// single tags is a plain tag class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassDef {
    pub name: String,
    pub alternatives: Vec<TagExpr>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PatternKind {
    Basic,
    Compound,
    Variant,
    Phrase,
}

impl PatternKind {
    pub fn name(self) -> &'static str {
        match self {
            PatternKind::Basic => "BASIC",
            PatternKind::Compound => "COMPOUND",
            PatternKind::Variant => "VARIANT",
            PatternKind::Phrase => "PHRASE",
        }
    }

    fn from_name(name: &str) -> Option<PatternKind> {
        match name {
            "BASIC" => Some(PatternKind::Basic),
            "COMPOUND" => Some(PatternKind::Compound),
            "VARIANT" => Some(PatternKind::Variant),
            "PHRASE" => Some(PatternKind::Phrase),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    pub name: String,
    pub kind: PatternKind,
    pub expr: TagExpr,
    /// Effective minimum span; at least the expression's own minimum and
    /// never below 2 (no single-token terms).
    pub min_tokens: usize,
    pub max_tokens: usize,
    /// Position in the grammar; lower is tried earlier.
    pub priority: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grammar {
    pub classes: Vec<ClassDef>,
    pub patterns: Vec<Pattern>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GrammarError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: unknown tag or class name `{name}`")]
    UnknownName { line: usize, name: String },
    #[error("line {line}: duplicate class `{name}`")]
    DuplicateClass { line: usize, name: String },
    #[error("line {line}: duplicate pattern `{name}`")]
    DuplicatePattern { line: usize, name: String },
    #[error("line {line}: pattern `{name}`: {reason}")]
    InvalidPattern {
        line: usize,
        name: String,
        reason: String,
    },
}

impl Grammar {
    pub fn pattern(&self, name: &str) -> Option<&Pattern> {
        self.patterns.iter().find(|p| p.name == name)
    }

    pub fn class(&self, name: &str) -> Option<&ClassDef> {
        self.classes.iter().find(|c| c.name == name)
    }

    /// Minimum span among BASIC patterns, the floor above which complex
    /// entries are linked back to a basic term.
    pub fn min_basic_len(&self) -> Option<usize> {
        self.patterns
            .iter()
            .filter(|p| p.kind == PatternKind::Basic)
            .map(|p| p.min_tokens)
            .min()
    }

    /// Every span length some BASIC pattern can match, ascending.
    pub fn basic_window_lengths(&self) -> BTreeSet<usize> {
        let mut lengths = BTreeSet::new();
        for p in self
            .patterns
            .iter()
            .filter(|p| p.kind == PatternKind::Basic)
        {
            lengths.extend(p.min_tokens..=p.max_tokens);
        }
        lengths
    }

    fn class_map(&self) -> BTreeMap<&str, &ClassDef> {
        self.classes.iter().map(|c| (c.name.as_str(), c)).collect()
    }

    fn expr_min(&self, expr: &TagExpr) -> usize {
        expr_min_len(expr, &self.class_map())
    }

    /// Renders the grammar in the grammar-file syntax; the output loads
    /// back to an equal grammar.
    pub fn to_config_string(&self) -> String {
        let mut out = String::new();
        for class in &self.classes {
            let alts: Vec<String> = class.alternatives.iter().map(|a| a.to_string()).collect();
            out.push_str(&format!("class {} = {}\n", class.name, alts.join(" | ")));
        }
        for p in &self.patterns {
            let min = if p.min_tokens > self.expr_min(&p.expr) {
                format!(" min={}", p.min_tokens)
            } else {
                String::new()
            };
            out.push_str(&format!(
                "pattern {} kind={}{} max={}: {}\n",
                p.name,
                p.kind.name(),
                min,
                p.max_tokens,
                p.expr
            ));
        }
        out
    }

    pub fn compile(self) -> CompiledGrammar {
        CompiledGrammar::new(self)
    }
}

fn expr_min_len(expr: &TagExpr, classes: &BTreeMap<&str, &ClassDef>) -> usize {
    expr.atoms
        .iter()
        .map(|atom| {
            let item_min = match &atom.item {
                AtomItem::Tag(_) => 1,
                AtomItem::Class(name) => classes
                    .get(name.as_str())
                    .map(|c| {
                        c.alternatives
                            .iter()
                            .map(|alt| expr_min_len(alt, classes))
                            .min()
                            .unwrap_or(0)
                    })
                    .unwrap_or(0),
            };
            atom.repeat.min() * item_min
        })
        .sum()
}

/// Built-in Japanese grammar source, in the grammar-file syntax.
///
/// Ordering is the application priority: the phrase pattern and the
/// compound chain first, then the restricted variant shapes, then the
/// basic two/three-token patterns (three-token ones ahead of two-token
/// ones). NUM/SYM-only chains and a bare `NUM SFX` are elements, not
/// terms; the matcher suppresses them (see `span_ok`).
const BUILTIN_GRAMMAR_SRC: &str = "\
class NOUNISH = N | VN | AN
class ELEMENT = NOUNISH NOUNISH | PFX NOUNISH | NOUNISH SFX | NUM SFX NOUNISH | NUM SFX | NUM | SYM
class SIDE = ELEMENT+ | NOUNISH
pattern PHR kind=PHRASE max=19: SIDE NO SIDE
pattern ELEM kind=COMPOUND min=3 max=9: ELEMENT+
pattern CT-IW kind=VARIANT max=9: PFX NOUNISH SFX NOUNISH*
pattern CT-WJ1 kind=VARIANT max=9: ADJ SFX_NOM NOUNISH{2,}
pattern CT-WJ3 kind=VARIANT max=3: NOUNISH V_INF NOUNISH
pattern CT-WJ2 kind=VARIANT max=3: NOUNISH V_INF SFX
pattern BT4 kind=BASIC max=3: NOUNISH SFX_STEM NOUNISH
pattern BT8 kind=BASIC max=3: ADJ SFX_NOM NOUNISH
pattern BT1 kind=BASIC max=2: NOUNISH NOUNISH
pattern BT2 kind=BASIC max=2: PFX NOUNISH
pattern BT3 kind=BASIC max=2: NOUNISH SFX
pattern BT5 kind=BASIC max=2: V_INF NOUNISH
pattern BT6 kind=BASIC max=2: V_INF SFX
pattern BT7 kind=BASIC max=2: A_INF NOUNISH
";

/// The built-in Japanese term grammar.
pub fn builtin_japanese_grammar() -> Grammar {
    load_grammar(BUILTIN_GRAMMAR_SRC).expect("built-in grammar must parse")
}

/// Parses the grammar file format. Declaration order is priority; classes
/// must be declared before use.
pub fn load_grammar(config: &str) -> Result<Grammar, GrammarError> {
    let mut grammar = Grammar {
        classes: Vec::new(),
        patterns: Vec::new(),
    };
    for (idx, raw_line) in config.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("class ") {
            parse_class_line(rest, line_no, &mut grammar)?;
        } else if let Some(rest) = line.strip_prefix("pattern ") {
            parse_pattern_line(rest, line_no, &mut grammar)?;
        } else {
            return Err(GrammarError::Malformed {
                line: line_no,
                reason: "expected a `class` or `pattern` declaration".to_string(),
            });
        }
    }
    Ok(grammar)
}

fn parse_class_line(rest: &str, line_no: usize, grammar: &mut Grammar) -> Result<(), GrammarError> {
    let (name, body) = rest
        .split_once('=')
        .ok_or_else(|| GrammarError::Malformed {
            line: line_no,
            reason: "expected `class NAME = ...`".to_string(),
        })?;
    let name = name.trim();
    check_name(name, line_no)?;
    if CanonicalTag::from_name(name).is_some() {
        return Err(GrammarError::Malformed {
            line: line_no,
            reason: format!("class `{name}` shadows a canonical tag"),
        });
    }
    if grammar.class(name).is_some() {
        return Err(GrammarError::DuplicateClass {
            line: line_no,
            name: name.to_string(),
        });
    }
    let mut alternatives = Vec::new();
    for alt in body.split('|') {
        let expr = parse_expr(alt, line_no, grammar)?;
        if expr.atoms.is_empty() {
            return Err(GrammarError::Malformed {
                line: line_no,
                reason: "empty class alternative".to_string(),
            });
        }
        alternatives.push(expr);
    }
    grammar.classes.push(ClassDef {
        name: name.to_string(),
        alternatives,
    });
    Ok(())
}

fn parse_pattern_line(
    rest: &str,
    line_no: usize,
    grammar: &mut Grammar,
) -> Result<(), GrammarError> {
    let (header, body) = rest
        .split_once(':')
        .ok_or_else(|| GrammarError::Malformed {
            line: line_no,
            reason: "expected `pattern NAME kind=... max=...: EXPR`".to_string(),
        })?;
    let mut fields = header.split_whitespace();
    let name = fields.next().unwrap_or("");
    check_name(name, line_no)?;
    if grammar.pattern(name).is_some() {
        return Err(GrammarError::DuplicatePattern {
            line: line_no,
            name: name.to_string(),
        });
    }
    let mut kind = None;
    let mut max_tokens = None;
    let mut min_tokens = None;
    for field in fields {
        if let Some(v) = field.strip_prefix("kind=") {
            kind = Some(
                PatternKind::from_name(v).ok_or_else(|| GrammarError::Malformed {
                    line: line_no,
                    reason: format!("unknown pattern kind `{v}`"),
                })?,
            );
        } else if let Some(v) = field.strip_prefix("max=") {
            max_tokens = Some(parse_count(v, line_no)?);
        } else if let Some(v) = field.strip_prefix("min=") {
            min_tokens = Some(parse_count(v, line_no)?);
        } else {
            return Err(GrammarError::Malformed {
                line: line_no,
                reason: format!("unexpected field `{field}`"),
            });
        }
    }
    let kind = kind.ok_or_else(|| GrammarError::Malformed {
        line: line_no,
        reason: "missing kind=".to_string(),
    })?;
    let max_tokens = max_tokens.ok_or_else(|| GrammarError::Malformed {
        line: line_no,
        reason: "missing max=".to_string(),
    })?;
    let expr = parse_expr(body, line_no, grammar)?;
    if expr.atoms.is_empty() {
        return Err(GrammarError::InvalidPattern {
            line: line_no,
            name: name.to_string(),
            reason: "empty expression".to_string(),
        });
    }
    let natural_min = grammar.expr_min(&expr);
    let min = match min_tokens {
        Some(m) if m < natural_min => {
            return Err(GrammarError::InvalidPattern {
                line: line_no,
                name: name.to_string(),
                reason: format!("min={m} is below the expression's minimum length {natural_min}"),
            })
        }
        Some(m) => m,
        None => natural_min,
    };
    if min < 2 {
        return Err(GrammarError::InvalidPattern {
            line: line_no,
            name: name.to_string(),
            reason: "patterns must span at least 2 tokens".to_string(),
        });
    }
    if max_tokens < min {
        return Err(GrammarError::InvalidPattern {
            line: line_no,
            name: name.to_string(),
            reason: format!("max={max_tokens} is below the minimum length {min}"),
        });
    }
    let priority = grammar.patterns.len();
    grammar.patterns.push(Pattern {
        name: name.to_string(),
        kind,
        expr,
        min_tokens: min,
        max_tokens,
        priority,
    });
    Ok(())
}

fn check_name(name: &str, line_no: usize) -> Result<(), GrammarError> {
    let ok = !name.is_empty()
        && name.chars().next().unwrap().is_ascii_alphabetic()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
    if ok {
        Ok(())
    } else {
        Err(GrammarError::Malformed {
            line: line_no,
            reason: format!("invalid name `{name}`"),
        })
    }
}

fn parse_count(v: &str, line_no: usize) -> Result<usize, GrammarError> {
    v.parse::<usize>().map_err(|_| GrammarError::Malformed {
        line: line_no,
        reason: format!("invalid count `{v}`"),
    })
}

fn parse_expr(body: &str, line_no: usize, grammar: &Grammar) -> Result<TagExpr, GrammarError> {
    let mut atoms = Vec::new();
    for word in body.split_whitespace() {
        atoms.push(parse_atom(word, line_no, grammar)?);
    }
    Ok(TagExpr { atoms })
}

fn parse_atom(word: &str, line_no: usize, grammar: &Grammar) -> Result<Atom, GrammarError> {
    let (name, repeat) = if let Some(stripped) = word.strip_suffix('+') {
        (stripped, Repeat::Plus)
    } else if let Some(stripped) = word.strip_suffix('*') {
        (stripped, Repeat::Star)
    } else if word.ends_with('}') {
        let open = word.find('{').ok_or_else(|| GrammarError::Malformed {
            line: line_no,
            reason: format!("malformed repetition in `{word}`"),
        })?;
        let (name, rep) = word.split_at(open);
        (name, parse_range(&rep[1..rep.len() - 1], line_no)?)
    } else {
        (word, Repeat::One)
    };
    let item = if let Some(tag) = CanonicalTag::from_name(name) {
        AtomItem::Tag(tag)
    } else if grammar.class(name).is_some() {
        AtomItem::Class(name.to_string())
    } else {
        return Err(GrammarError::UnknownName {
            line: line_no,
            name: name.to_string(),
        });
    };
    Ok(Atom { item, repeat })
}

fn parse_range(body: &str, line_no: usize) -> Result<Repeat, GrammarError> {
    let malformed = || GrammarError::Malformed {
        line: line_no,
        reason: format!("malformed repetition `{{{body}}}`"),
    };
    let repeat = match body.split_once(',') {
        None => {
            let n: u32 = body.trim().parse().map_err(|_| malformed())?;
            Repeat::Range {
                min: n,
                max: Some(n),
            }
        }
        Some((lo, hi)) => {
            let min: u32 = lo.trim().parse().map_err(|_| malformed())?;
            let max = if hi.trim().is_empty() {
                None
            } else {
                Some(hi.trim().parse().map_err(|_| malformed())?)
            };
            Repeat::Range { min, max }
        }
    };
    // Canonicalize so dump/load is stable.
    Ok(match repeat {
        Repeat::Range {
            min: 1,
            max: Some(1),
        } => Repeat::One,
        Repeat::Range { min: 1, max: None } => Repeat::Plus,
        Repeat::Range { min: 0, max: None } => Repeat::Star,
        Repeat::Range {
            min,
            max: Some(max),
        } if min > max => return Err(malformed()),
        Repeat::Range {
            min: 0,
            max: Some(0),
        } => return Err(malformed()),
        other => other,
    })
}

// ---------------------------------------------------------------------------
// Compiled automata
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default)]
struct NfaState {
    eps: Vec<usize>,
    edges: Vec<(u16, usize)>,
}

#[derive(Debug, Clone)]
struct Nfa {
    states: Vec<NfaState>,
    start: usize,
    accept: usize,
}

struct NfaBuilder<'g> {
    states: Vec<NfaState>,
    classes: BTreeMap<&'g str, &'g ClassDef>,
}

impl<'g> NfaBuilder<'g> {
    fn state(&mut self) -> usize {
        self.states.push(NfaState::default());
        self.states.len() - 1
    }

    fn eps(&mut self, from: usize, to: usize) {
        self.states[from].eps.push(to);
    }

    fn build_expr(&mut self, expr: &TagExpr) -> (usize, usize) {
        let start = self.state();
        let mut cur = start;
        for atom in &expr.atoms {
            let (s, e) = self.build_atom(atom);
            self.eps(cur, s);
            cur = e;
        }
        (start, cur)
    }

    fn build_atom(&mut self, atom: &Atom) -> (usize, usize) {
        match atom.repeat {
            Repeat::One => self.build_item(&atom.item),
            Repeat::Plus => {
                let (s, e) = self.build_item(&atom.item);
                self.eps(e, s);
                (s, e)
            }
            Repeat::Star => {
                let start = self.state();
                let end = self.state();
                let (s, e) = self.build_item(&atom.item);
                self.eps(start, s);
                self.eps(start, end);
                self.eps(e, s);
                self.eps(e, end);
                (start, end)
            }
            Repeat::Range { min, max } => {
                let start = self.state();
                let mut cur = start;
                for _ in 0..min {
                    let (s, e) = self.build_item(&atom.item);
                    self.eps(cur, s);
                    cur = e;
                }
                match max {
                    None => {
                        let (s, e) = self.build_item(&atom.item);
                        self.eps(cur, s);
                        self.eps(e, s);
                        self.eps(e, cur);
                        // `cur` doubles as exit: zero extra repetitions allowed.
                        (start, cur)
                    }
                    Some(max) => {
                        let end = self.state();
                        for _ in min..max {
                            self.eps(cur, end);
                            let (s, e) = self.build_item(&atom.item);
                            self.eps(cur, s);
                            cur = e;
                        }
                        self.eps(cur, end);
                        (start, end)
                    }
                }
            }
        }
    }

    fn build_item(&mut self, item: &AtomItem) -> (usize, usize) {
        match item {
            AtomItem::Tag(tag) => {
                let s = self.state();
                let e = self.state();
                self.states[s].edges.push((tag.bit(), e));
                (s, e)
            }
            AtomItem::Class(name) => {
                let class = self.classes[name.as_str()];
                let s = self.state();
                let e = self.state();
                for alt in &class.alternatives {
                    let (as_, ae) = self.build_expr(alt);
                    self.eps(s, as_);
                    self.eps(ae, e);
                }
                (s, e)
            }
        }
    }
}

impl Nfa {
    fn closure(&self, active: &mut [bool]) {
        let mut stack: Vec<usize> = active
            .iter()
            .enumerate()
            .filter(|(_, on)| **on)
            .map(|(i, _)| i)
            .collect();
        while let Some(s) = stack.pop() {
            for &t in &self.states[s].eps {
                if !active[t] {
                    active[t] = true;
                    stack.push(t);
                }
            }
        }
    }

    /// `result[i]` is true iff the automaton accepts the first `i` tags.
    fn prefix_accepts(&self, tags: &[CanonicalTag], max_len: usize) -> Vec<bool> {
        let n = max_len.min(tags.len());
        let mut acc = vec![false; n + 1];
        let mut active = vec![false; self.states.len()];
        active[self.start] = true;
        self.closure(&mut active);
        acc[0] = active[self.accept];
        for (i, tag) in tags.iter().take(n).enumerate() {
            let bit = tag.bit();
            let mut next = vec![false; self.states.len()];
            let mut any = false;
            for (s, on) in active.iter().enumerate() {
                if !on {
                    continue;
                }
                for &(mask, to) in &self.states[s].edges {
                    if mask & bit != 0 {
                        next[to] = true;
                        any = true;
                    }
                }
            }
            if !any {
                break;
            }
            self.closure(&mut next);
            acc[i + 1] = next[self.accept];
            active = next;
        }
        acc
    }
}

/// A pattern compiled to an automaton plus its span bounds.
#[derive(Debug, Clone)]
pub struct CompiledPattern {
    pub name: String,
    pub kind: PatternKind,
    pub min_tokens: usize,
    pub max_tokens: usize,
    nfa: Nfa,
}

impl CompiledPattern {
    pub fn compile(pattern: &Pattern, grammar: &Grammar) -> CompiledPattern {
        let mut builder = NfaBuilder {
            states: Vec::new(),
            classes: grammar.class_map(),
        };
        let (start, accept) = builder.build_expr(&pattern.expr);
        CompiledPattern {
            name: pattern.name.clone(),
            kind: pattern.kind,
            min_tokens: pattern.min_tokens,
            max_tokens: pattern.max_tokens,
            nfa: Nfa {
                states: builder.states,
                start,
                accept,
            },
        }
    }

    /// Raw automaton acceptance of a tag sequence, without span bounds or
    /// NO-segment checks. Exposed so acceptance can be cross-checked
    /// against a declarative interpretation of the expression.
    pub fn nfa_accepts(&self, tags: &[CanonicalTag]) -> bool {
        let acc = self.nfa.prefix_accepts(tags, tags.len());
        acc.len() == tags.len() + 1 && acc[tags.len()]
    }

    /// Whole-sequence acceptance including length bounds and span checks.
    pub fn accepts_whole(&self, tokens: &[Token]) -> bool {
        let len = tokens.len();
        if len < self.min_tokens || len > self.max_tokens {
            return false;
        }
        let tags: Vec<CanonicalTag> = tokens.iter().map(|t| t.tag).collect();
        self.nfa_accepts(&tags) && span_ok(self.kind, tokens)
    }
}

/// Content rule applied to every match. Segments between NO particles
/// must each contain a token that is not a bare number or symbol; phrase
/// spans must hold exactly one NO with both sides inside the compound
/// cap.
pub fn span_ok(kind: PatternKind, span: &[Token]) -> bool {
    let substantive = |seg: &[Token]| {
        seg.iter()
            .any(|t| !matches!(t.tag, CanonicalTag::Num | CanonicalTag::Sym))
    };
    let mut segments = 0usize;
    for seg in span.split(|t| t.tag == CanonicalTag::No) {
        segments += 1;
        if !substantive(seg) {
            return false;
        }
        if kind == PatternKind::Phrase && seg.len() > COMPOUND_SPAN_CAP {
            return false;
        }
    }
    if kind == PatternKind::Phrase && segments != 2 {
        return false;
    }
    true
}

/// Longest span starting at `start` that the pattern accepts, if any.
pub fn match_at(pattern: &CompiledPattern, tokens: &[Token], start: usize) -> Option<usize> {
    debug_assert!(start <= tokens.len());
    let avail = tokens.len() - start;
    let cap = pattern.max_tokens.min(avail);
    if cap < pattern.min_tokens {
        return None;
    }
    let window = &tokens[start..start + cap];
    let tags: Vec<CanonicalTag> = window.iter().map(|t| t.tag).collect();
    let acc = pattern.nfa.prefix_accepts(&tags, cap);
    for len in (pattern.min_tokens..=cap).rev() {
        if len < acc.len() && acc[len] && span_ok(pattern.kind, &window[..len]) {
            return Some(len);
        }
    }
    None
}

/// A grammar with every pattern compiled, ready for scanning. Immutable
/// and shareable across threads.
#[derive(Debug, Clone)]
pub struct CompiledGrammar {
    grammar: Grammar,
    patterns: Vec<CompiledPattern>,
}

impl CompiledGrammar {
    pub fn new(grammar: Grammar) -> CompiledGrammar {
        let patterns = grammar
            .patterns
            .iter()
            .map(|p| CompiledPattern::compile(p, &grammar))
            .collect();
        CompiledGrammar { grammar, patterns }
    }

    pub fn grammar(&self) -> &Grammar {
        &self.grammar
    }

    /// Compiled patterns in priority order.
    pub fn patterns(&self) -> &[CompiledPattern] {
        &self.patterns
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(tags: &[CanonicalTag]) -> Vec<Token> {
        tags.iter()
            .enumerate()
            .map(|(i, t)| Token::new(format!("w{i}"), format!("w{i}"), *t, "", None))
            .collect()
    }

    fn compiled() -> CompiledGrammar {
        builtin_japanese_grammar().compile()
    }

    fn pat<'a>(g: &'a CompiledGrammar, name: &str) -> &'a CompiledPattern {
        g.patterns().iter().find(|p| p.name == name).unwrap()
    }

    use CanonicalTag::*;

    #[test]
    fn builtin_inventory() {
        let g = builtin_japanese_grammar();
        let names: Vec<&str> = g.patterns.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(
            names,
            [
                "PHR", "ELEM", "CT-IW", "CT-WJ1", "CT-WJ3", "CT-WJ2", "BT4", "BT8", "BT1", "BT2",
                "BT3", "BT5", "BT6", "BT7"
            ]
        );
        let bt4 = g.pattern("BT4").unwrap();
        assert_eq!(bt4.kind, PatternKind::Basic);
        assert_eq!(bt4.expr.to_string(), "NOUNISH SFX_STEM NOUNISH");
        assert_eq!(g.pattern("ELEM").unwrap().max_tokens, 9);
        for p in g.patterns.iter().filter(|p| p.kind == PatternKind::Basic) {
            assert!(p.min_tokens == 2 || p.min_tokens == 3, "{}", p.name);
        }
        // Priorities are the total declaration order.
        let priorities: Vec<usize> = g.patterns.iter().map(|p| p.priority).collect();
        assert_eq!(priorities, (0..14).collect::<Vec<_>>());
    }

    #[test]
    fn nounish_class_unions_three_tags() {
        let g = builtin_japanese_grammar();
        let class = g.class("NOUNISH").unwrap();
        assert_eq!(class.alternatives.len(), 3);
    }

    #[test]
    fn load_single_pattern_config() {
        let g = load_grammar(
            "class NOUNISH = N | VN | AN\npattern BT1 kind=BASIC max=2: NOUNISH NOUNISH\n",
        )
        .unwrap();
        assert_eq!(g.patterns.len(), 1);
        assert_eq!(g.patterns[0].min_tokens, 2);
    }

    #[test]
    fn duplicate_pattern_name_is_error() {
        let cfg = "pattern X kind=BASIC max=2: N N\npattern X kind=BASIC max=2: N N\n";
        assert_eq!(
            load_grammar(cfg).unwrap_err(),
            GrammarError::DuplicatePattern {
                line: 2,
                name: "X".into()
            }
        );
    }

    #[test]
    fn unknown_tag_is_error() {
        let err = load_grammar("pattern X kind=BASIC max=2: N BOGUS\n").unwrap_err();
        assert_eq!(
            err,
            GrammarError::UnknownName {
                line: 1,
                name: "BOGUS".into()
            }
        );
    }

    #[test]
    fn max_below_min_is_error() {
        let err = load_grammar("pattern X kind=BASIC max=2: N N N\n").unwrap_err();
        assert!(matches!(err, GrammarError::InvalidPattern { line: 1, .. }));
    }

    #[test]
    fn single_token_pattern_is_error() {
        let err = load_grammar("pattern X kind=BASIC max=3: N\n").unwrap_err();
        assert!(matches!(err, GrammarError::InvalidPattern { line: 1, .. }));
    }

    #[test]
    fn dump_load_round_trip_builtin() {
        let g = builtin_japanese_grammar();
        let dumped = g.to_config_string();
        assert_eq!(load_grammar(&dumped).unwrap(), g);
    }

    #[test]
    fn config_reproducing_builtin_is_equal() {
        assert_eq!(
            load_grammar(BUILTIN_GRAMMAR_SRC).unwrap(),
            builtin_japanese_grammar()
        );
    }

    #[test]
    fn bt1_accepts_two_nouns_only() {
        let g = compiled();
        let bt1 = pat(&g, "BT1");
        assert!(bt1.accepts_whole(&toks(&[N, N])));
        assert!(!bt1.accepts_whole(&toks(&[N])));
        assert!(!bt1.accepts_whole(&toks(&[N, N, N])));
    }

    #[test]
    fn elem_rejects_ten_tags() {
        let g = compiled();
        let elem = pat(&g, "ELEM");
        assert!(!elem.accepts_whole(&toks(&[N; 10])));
    }

    #[test]
    fn fixed_length_pattern_matches_its_length() {
        let g = compiled();
        let tokens = toks(&[N, N, N]);
        assert_eq!(match_at(pat(&g, "BT1"), &tokens, 0), Some(2));
        assert_eq!(match_at(pat(&g, "BT1"), &tokens, 1), Some(2));
        assert_eq!(match_at(pat(&g, "BT1"), &tokens, 2), None);
        assert_eq!(match_at(pat(&g, "BT1"), &tokens, 3), None);
    }

    #[test]
    fn elem_accepts_number_suffix_noun() {
        let g = compiled();
        let elem = pat(&g, "ELEM");
        assert!(elem.accepts_whole(&toks(&[Num, Sfx, N])));
    }

    #[test]
    fn elem_floor_keeps_two_token_spans_for_basics() {
        let g = compiled();
        let elem = pat(&g, "ELEM");
        assert!(!elem.accepts_whole(&toks(&[N, N])));
        assert!(!elem.accepts_whole(&toks(&[Pfx, N])));
    }

    #[test]
    fn elem_longest_match_on_noun_run_is_eight() {
        // Eleven nouns: chains pair up, so the longest element chain
        // within the cap is four noun-noun elements.
        let g = compiled();
        let tokens = toks(&[N; 11]);
        assert_eq!(match_at(pat(&g, "ELEM"), &tokens, 0), Some(8));
    }

    #[test]
    fn num_sym_only_spans_are_suppressed() {
        let g = compiled();
        let elem = pat(&g, "ELEM");
        assert!(!elem.accepts_whole(&toks(&[Num, Num, Num])));
        assert!(!elem.accepts_whole(&toks(&[Sym, Num, Sym])));
        assert!(elem.accepts_whole(&toks(&[Sym, N, N])));
    }

    #[test]
    fn phrase_needs_one_no_and_substantive_sides() {
        let g = compiled();
        let phr = pat(&g, "PHR");
        assert!(phr.accepts_whole(&toks(&[N, No, N, N])));
        assert!(phr.accepts_whole(&toks(&[N, N, No, N, N])));
        // A number-only side never forms a phrase term.
        assert!(!phr.accepts_whole(&toks(&[Num, No, N, N])));
        assert!(!phr.accepts_whole(&toks(&[N, No, N, No, N])));
    }

    #[test]
    fn phrase_longest_match_stops_at_second_no() {
        let g = compiled();
        let tokens = toks(&[N, N, No, N, N, No, N, N]);
        assert_eq!(match_at(pat(&g, "PHR"), &tokens, 0), Some(5));
    }

    #[test]
    fn ct_wj1_requires_two_trailing_nouns() {
        let g = compiled();
        let wj1 = pat(&g, "CT-WJ1");
        assert!(!wj1.accepts_whole(&toks(&[Adj, SfxNom, N])));
        assert!(wj1.accepts_whole(&toks(&[Adj, SfxNom, N, N])));
        assert!(wj1.accepts_whole(&toks(&[Adj, SfxNom, N, Vn, N])));
    }

    #[test]
    fn ct_iw_matches_prefix_noun_suffix_chain() {
        let g = compiled();
        let iw = pat(&g, "CT-IW");
        assert!(iw.accepts_whole(&toks(&[Pfx, N, Sfx])));
        assert!(iw.accepts_whole(&toks(&[Pfx, Vn, Sfx, N, N])));
        assert!(!iw.accepts_whole(&toks(&[Pfx, N, N, Sfx])));
    }

    // Brute-force element segmentation: left-to-right partition into the
    // element alternatives, independent of the automaton.
    fn elements() -> Vec<Vec<CanonicalTag>> {
        let nounish = [N, Vn, An];
        let mut out = Vec::new();
        for &a in &nounish {
            for &b in &nounish {
                out.push(vec![a, b]);
            }
            out.push(vec![Pfx, a]);
            out.push(vec![a, Sfx]);
            out.push(vec![Num, Sfx, a]);
        }
        out.push(vec![Num, Sfx]);
        out.push(vec![Num]);
        out.push(vec![Sym]);
        out
    }

    fn partitions_into_elements(tags: &[CanonicalTag]) -> bool {
        if tags.is_empty() {
            return true;
        }
        elements()
            .iter()
            .any(|el| tags.starts_with(el) && partitions_into_elements(&tags[el.len()..]))
    }

    fn elem_oracle(tags: &[CanonicalTag]) -> bool {
        tags.len() >= 3
            && tags.len() <= COMPOUND_SPAN_CAP
            && partitions_into_elements(tags)
            && tags.iter().any(|t| !matches!(t, Num | Sym))
    }

    #[test]
    fn elem_matches_exactly_the_segmentable_sequences() {
        let g = compiled();
        let elem = pat(&g, "ELEM");
        // Exhaustive over a reduced alphabet that exercises every element shape.
        let alphabet = [N, Pfx, Sfx, Num, Sym];
        let mut checked = 0usize;
        for len in 1..=6 {
            let mut idx = vec![0usize; len];
            loop {
                let tags: Vec<CanonicalTag> = idx.iter().map(|&i| alphabet[i]).collect();
                assert_eq!(
                    elem.accepts_whole(&toks(&tags)),
                    elem_oracle(&tags),
                    "mismatch on {tags:?}"
                );
                checked += 1;
                let mut carry = 0;
                loop {
                    idx[carry] += 1;
                    if idx[carry] < alphabet.len() {
                        break;
                    }
                    idx[carry] = 0;
                    carry += 1;
                    if carry == len {
                        break;
                    }
                }
                if carry == len {
                    break;
                }
            }
        }
        assert!(checked > 3000);
        // Longer sequences over a smaller alphabet, up to the cap.
        let alphabet = [N, Num, Sfx];
        for len in 7..=COMPOUND_SPAN_CAP {
            let mut idx = vec![0usize; len];
            loop {
                let tags: Vec<CanonicalTag> = idx.iter().map(|&i| alphabet[i]).collect();
                assert_eq!(
                    elem.accepts_whole(&toks(&tags)),
                    elem_oracle(&tags),
                    "mismatch on {tags:?}"
                );
                let mut carry = 0;
                loop {
                    idx[carry] += 1;
                    if idx[carry] < alphabet.len() {
                        break;
                    }
                    idx[carry] = 0;
                    carry += 1;
                    if carry == len {
                        break;
                    }
                }
                if carry == len {
                    break;
                }
            }
        }
    }

    // Declarative reference interpreter for the expression language; used
    // to cross-check the compiled automata.
    fn item_ends(
        item: &AtomItem,
        g: &Grammar,
        tags: &[CanonicalTag],
        from: usize,
    ) -> BTreeSet<usize> {
        match item {
            AtomItem::Tag(t) => {
                if from < tags.len() && tags[from] == *t {
                    [from + 1].into_iter().collect()
                } else {
                    BTreeSet::new()
                }
            }
            AtomItem::Class(name) => {
                let class = g.class(name).unwrap();
                let mut out = BTreeSet::new();
                for alt in &class.alternatives {
                    out.extend(expr_ends(&alt.atoms, g, tags, from));
                }
                out
            }
        }
    }

    fn expr_ends(
        atoms: &[Atom],
        g: &Grammar,
        tags: &[CanonicalTag],
        from: usize,
    ) -> BTreeSet<usize> {
        let Some((atom, rest)) = atoms.split_first() else {
            return [from].into_iter().collect();
        };
        let (min, max) = match atom.repeat {
            Repeat::One => (1, Some(1)),
            Repeat::Plus => (1, None),
            Repeat::Star => (0, None),
            Repeat::Range { min, max } => (min as usize, max.map(|m| m as usize)),
        };
        let mut after_atom = BTreeSet::new();
        let mut reachable: BTreeSet<usize> = [from].into_iter().collect();
        let mut seen = reachable.clone();
        let mut count = 0usize;
        if min == 0 {
            after_atom.extend(reachable.iter().copied());
        }
        loop {
            count += 1;
            if let Some(max) = max {
                if count > max {
                    break;
                }
            } else if count > tags.len() + 1 {
                break;
            }
            let mut next = BTreeSet::new();
            for &pos in &reachable {
                next.extend(item_ends(&atom.item, g, tags, pos));
            }
            if next.is_empty() {
                break;
            }
            if count >= min {
                after_atom.extend(next.iter().copied());
            }
            if next.is_subset(&seen) && max.is_none() {
                break;
            }
            seen.extend(next.iter().copied());
            reachable = next;
        }
        let mut out = BTreeSet::new();
        for pos in after_atom {
            out.extend(expr_ends(rest, g, tags, pos));
        }
        out
    }

    fn reference_accepts(p: &Pattern, g: &Grammar, tags: &[CanonicalTag]) -> bool {
        expr_ends(&p.expr.atoms, g, tags, 0).contains(&tags.len())
    }

    proptest! {
        #[test]
        fn automata_agree_with_reference_interpreter(
            tags in prop::collection::vec(prop::sample::select(CanonicalTag::ALL.to_vec()), 0..=12),
            pattern_idx in 0usize..14,
        ) {
            let grammar = builtin_japanese_grammar();
            let compiled = grammar.clone().compile();
            let pattern = &grammar.patterns[pattern_idx];
            let machine = &compiled.patterns()[pattern_idx];
            prop_assert_eq!(
                machine.nfa_accepts(&tags),
                reference_accepts(pattern, &grammar, &tags)
            );
        }

        #[test]
        fn dump_load_round_trip_fuzzed(
            maxes in prop::collection::vec(2usize..6, 1..5),
        ) {
            // Small grammars assembled from fixed-shape exprs.
            let shapes = ["N N", "NOUNISH SFX", "PFX NOUNISH NOUNISH*", "N{2,3} SFX", "V_INF NOUNISH+"];
            let mut cfg = String::from("class NOUNISH = N | VN | AN\n");
            for (i, max) in maxes.iter().enumerate() {
                let shape = shapes[i % shapes.len()];
                cfg.push_str(&format!("pattern P{i} kind=BASIC max={}: {shape}\n", *max.max(&4)));
            }
            let g = load_grammar(&cfg).unwrap();
            prop_assert_eq!(load_grammar(&g.to_config_string()).unwrap(), g);
        }
    }
}
