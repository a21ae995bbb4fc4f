//! Priority-ordered surface patterns with named captures.
//!
//! Rule files are plain text:
//!
//! ```text
//! # comment
//! barrier if unless then else otherwise
//! define IF ( if | provided that | only if )
//! rule if-comma priority 50: @IF {capture:cond} , {capture:csq}
//! ```
//!
//! Pattern syntax, matched token by token against lowercased input:
//!
//! * `word` / `,` literal token
//! * `[ ... ]` optional group, `( a | b c )` alternation
//! * `@NAME` reference to a `define`d fragment
//! * `{capture:NAME}` lazy wildcard of one or more tokens bound to a tag.
//!   `cond`, `csq`, `alt`, `fa`, `sa`, `ta` map to their tags; any other
//!   name needs an explicit tag, `{capture:x=CND}`.
//! * `{any}` lazy wildcard that is not captured.
//!
//! Wildcards accept flags: `+verb` (must contain a verb-like token) and
//! `-word` (must not contain `word`). Wildcards never cross a `barrier`
//! word. Patterns are anchored at both ends; trailing punctuation is ignored.
//! A rule without captures yields an empty annotation set, which defers
//! the utterance to the statistical tagger.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use crate::annotation::{AnnotationSet, Provenance, SpanAnnotation, TagType};
use crate::lexicon::{self, Category};
use crate::restructure::{HeuristicProvider, SyntaxHints, SyntaxProvider};
use crate::text::Utterance;

/// Rule file shipped with the crate.
pub const DEFAULT_RULES: &str = include_str!("../rules/default.rules");

/// Upper bound on matcher steps per rule and utterance.
const STEP_BUDGET: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{}line {line}, column {column}: {kind}", rule.as_ref().map(|r| format!("rule {}: ", r)).unwrap_or_default())]
pub struct RuleError {
    pub rule: Option<String>,
    pub line: usize,
    pub column: usize,
    pub kind: RuleErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RuleErrorKind {
    #[error("priority {0} already used by rule {1}")]
    DuplicatePriority(i64, String),
    #[error("rule id already defined")]
    DuplicateId,
    #[error("capture {name:?} mapped to unknown tag {tag:?}")]
    UnknownTag { name: String, tag: String },
    #[error("malformed pattern: {0}")]
    Malformed(String),
    #[error("undefined fragment @{0}")]
    UndefinedFragment(String),
    #[error("malformed rule header, expected `rule <id> priority <n>: <pattern>`")]
    Header,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
struct WildcardFlags {
    require_verb: bool,
    forbid: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Node {
    Word(String),
    Wildcard { slot: usize, flags: WildcardFlags },
    Optional(Vec<Node>),
    Alternation(Vec<Vec<Node>>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Instr {
    Word(String),
    /// Consume one token that is not a barrier or forbidden for the slot.
    Token(usize),
    /// Try `.0` first, then `.1`.
    Split(usize, usize),
    Jump(usize),
    Save(usize),
    Check(usize),
    Match,
}

/// A compiled rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleTemplate {
    pub id: String,
    pub priority: i64,
    pub source: String,
    /// Capture name to tag.
    pub captures: BTreeMap<String, TagType>,
    /// slot -> capture name, `None` for `{any}`.
    slots: Vec<Option<String>>,
    flags: Vec<WildcardFlags>,
    program: Vec<Instr>,
}

impl RuleTemplate {
    pub fn emits(&self) -> impl Iterator<Item = TagType> + '_ {
        self.captures.values().copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleSet {
    rules: Vec<RuleTemplate>,
    markers: Vec<String>,
    barrier: HashSet<String>,
}

impl Default for RuleSet {
    fn default() -> Self {
        compile_rules(DEFAULT_RULES).expect("shipped rule file compiles")
    }
}

impl RuleSet {
    pub fn empty() -> Self {
        RuleSet {
            rules: Vec::new(),
            markers: lexicon::MARKERS.iter().map(|m| m.to_string()).collect(),
            barrier: HashSet::new(),
        }
    }

    pub fn rules(&self) -> &[RuleTemplate] {
        &self.rules
    }

    pub fn markers(&self) -> &[String] {
        &self.markers
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Tags any rule can emit.
    pub fn emitted_tags(&self) -> HashSet<TagType> {
        self.rules.iter().flat_map(|r| r.emits()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleMatch {
    pub rule_id: String,
    pub annotations: AnnotationSet,
}

fn default_tag(name: &str) -> Option<TagType> {
    match name {
        "cond" => Some(TagType::Cnd),
        "csq" => Some(TagType::Csq),
        "alt" => Some(TagType::Alt),
        "fa" => Some(TagType::Fa),
        "sa" => Some(TagType::Sa),
        "ta" => Some(TagType::Ta),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Lexeme {
    text: String,
    column: usize,
}

fn lex(pattern: &str, column0: usize) -> Result<Vec<Lexeme>, (usize, String)> {
    let chars: Vec<char> = pattern.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '{' {
            let start = i;
            while i < chars.len() && chars[i] != '}' {
                i += 1;
            }
            if i == chars.len() {
                return Err((column0 + start, "unterminated `{`".into()));
            }
            i += 1;
            out.push(Lexeme { text: chars[start..i].iter().collect(), column: column0 + start });
        } else if "[]()|,;:.?!".contains(c) {
            out.push(Lexeme { text: c.to_string(), column: column0 + i });
            i += 1;
        } else {
            let start = i;
            while i < chars.len() && !chars[i].is_whitespace() && !"{[]()|,;:?!".contains(chars[i]) {
                i += 1;
            }
            out.push(Lexeme { text: chars[start..i].iter().collect(), column: column0 + start });
        }
    }
    Ok(out)
}

struct Parser<'a> {
    lexemes: &'a [Lexeme],
    pos: usize,
    fragments: &'a BTreeMap<String, Vec<Lexeme>>,
    slots: Vec<Option<String>>,
    flags: Vec<WildcardFlags>,
    captures: BTreeMap<String, TagType>,
    depth: usize,
}

type ParseErr = (usize, RuleErrorKind);

impl<'a> Parser<'a> {
    fn parse_seq(&mut self, stop: &[&str]) -> Result<Vec<Node>, ParseErr> {
        let mut nodes = Vec::new();
        while let Some(lx) = self.lexemes.get(self.pos) {
            if stop.contains(&lx.text.as_str()) {
                break;
            }
            self.pos += 1;
            let malformed = |m: &str| (lx.column, RuleErrorKind::Malformed(m.to_string()));
            match lx.text.as_str() {
                "[" => {
                    let inner = self.parse_seq(&["]"])?;
                    self.expect("]", lx.column)?;
                    if inner.is_empty() {
                        return Err(malformed("empty optional group"));
                    }
                    nodes.push(Node::Optional(inner));
                }
                "(" => {
                    let mut branches = vec![self.parse_seq(&["|", ")"])?];
                    while self.peek() == Some("|") {
                        self.pos += 1;
                        branches.push(self.parse_seq(&["|", ")"])?);
                    }
                    self.expect(")", lx.column)?;
                    if branches.iter().any(Vec::is_empty) {
                        return Err(malformed("empty alternative"));
                    }
                    nodes.push(Node::Alternation(branches));
                }
                "]" | ")" | "|" => return Err(malformed(&format!("unexpected `{}`", lx.text))),
                t if t.starts_with('{') => nodes.push(self.wildcard(lx)?),
                t if t.starts_with('@') => {
                    let name = &t[1..];
                    let body = self
                        .fragments
                        .get(name)
                        .ok_or_else(|| (lx.column, RuleErrorKind::UndefinedFragment(name.to_string())))?;
                    if self.depth > 8 {
                        return Err(malformed("fragment nesting too deep"));
                    }
                    let mut sub = Parser {
                        lexemes: body,
                        pos: 0,
                        fragments: self.fragments,
                        slots: std::mem::take(&mut self.slots),
                        flags: std::mem::take(&mut self.flags),
                        captures: std::mem::take(&mut self.captures),
                        depth: self.depth + 1,
                    };
                    let inner = sub.parse_seq(&[])?;
                    if sub.pos != body.len() {
                        return Err(malformed(&format!("unbalanced fragment @{}", name)));
                    }
                    self.slots = sub.slots;
                    self.flags = sub.flags;
                    self.captures = sub.captures;
                    nodes.extend(inner);
                }
                t => nodes.push(Node::Word(t.to_lowercase())),
            }
        }
        Ok(nodes)
    }

    fn peek(&self) -> Option<&str> {
        self.lexemes.get(self.pos).map(|l| l.text.as_str())
    }

    fn expect(&mut self, want: &str, open_col: usize) -> Result<(), ParseErr> {
        if self.peek() == Some(want) {
            self.pos += 1;
            Ok(())
        } else {
            Err((open_col, RuleErrorKind::Malformed(format!("missing `{}`", want))))
        }
    }

    fn wildcard(&mut self, lx: &Lexeme) -> Result<Node, ParseErr> {
        let body = lx.text.trim_start_matches('{').trim_end_matches('}');
        let mut parts = body.split_whitespace();
        let head = parts.next().unwrap_or("");
        let mut flags = WildcardFlags::default();
        for p in parts {
            if p == "+verb" {
                flags.require_verb = true;
            } else if let Some(w) = p.strip_prefix('-').filter(|w| !w.is_empty()) {
                flags.forbid.push(w.to_lowercase());
            } else {
                return Err((lx.column, RuleErrorKind::Malformed(format!("unknown flag {:?}", p))));
            }
        }
        let name = if head == "any" {
            None
        } else if let Some(spec) = head.strip_prefix("capture:") {
            let (name, tag) = match spec.split_once('=') {
                Some((n, t)) => {
                    let tag = TagType::parse_any(t).filter(|t| *t != TagType::Nn).ok_or_else(|| {
                        (lx.column, RuleErrorKind::UnknownTag { name: n.to_string(), tag: t.to_string() })
                    })?;
                    (n.to_string(), tag)
                }
                None => {
                    let tag = default_tag(spec).ok_or_else(|| {
                        (lx.column, RuleErrorKind::UnknownTag { name: spec.to_string(), tag: String::new() })
                    })?;
                    (spec.to_string(), tag)
                }
            };
            if name.is_empty() {
                return Err((lx.column, RuleErrorKind::Malformed("empty capture name".into())));
            }
            match self.captures.get(&name) {
                Some(&prev) if prev != tag => {
                    return Err((
                        lx.column,
                        RuleErrorKind::Malformed(format!("capture {:?} bound to two tags", name)),
                    ))
                }
                _ => {
                    self.captures.insert(name.clone(), tag);
                }
            }
            Some(name)
        } else {
            return Err((lx.column, RuleErrorKind::Malformed(format!("unknown wildcard {:?}", head))));
        };
        let slot = self.slots.len();
        self.slots.push(name);
        self.flags.push(flags.clone());
        Ok(Node::Wildcard { slot, flags })
    }
}

fn emit(nodes: &[Node], prog: &mut Vec<Instr>) {
    for node in nodes {
        match node {
            Node::Word(w) => prog.push(Instr::Word(w.clone())),
            Node::Wildcard { slot, .. } => {
                prog.push(Instr::Save(2 * slot));
                prog.push(Instr::Token(*slot));
                let split = prog.len();
                prog.push(Instr::Split(0, 0));
                prog.push(Instr::Token(*slot));
                prog.push(Instr::Jump(split));
                let exit = prog.len();
                prog[split] = Instr::Split(exit, split + 1);
                prog.push(Instr::Save(2 * slot + 1));
                prog.push(Instr::Check(*slot));
            }
            Node::Optional(inner) => {
                let split = prog.len();
                prog.push(Instr::Split(0, 0));
                emit(inner, prog);
                prog[split] = Instr::Split(split + 1, prog.len());
            }
            Node::Alternation(branches) => {
                let mut jumps = Vec::new();
                for (k, branch) in branches.iter().enumerate() {
                    let last = k + 1 == branches.len();
                    let split = prog.len();
                    if !last {
                        prog.push(Instr::Split(0, 0));
                    }
                    emit(branch, prog);
                    if !last {
                        jumps.push(prog.len());
                        prog.push(Instr::Jump(0));
                        prog[split] = Instr::Split(split + 1, prog.len());
                    }
                }
                let end = prog.len();
                for j in jumps {
                    prog[j] = Instr::Jump(end);
                }
            }
        }
    }
}

/// Parses and validates a rule file.
pub fn compile_rules(source: &str) -> Result<RuleSet, RuleError> {
    let mut fragments: BTreeMap<String, Vec<Lexeme>> = BTreeMap::new();
    let mut barrier = HashSet::new();
    let mut markers: Vec<String> = lexicon::MARKERS.iter().map(|m| m.to_string()).collect();
    let mut rules: Vec<RuleTemplate> = Vec::new();

    // (id, priority, header line, pattern pieces with line/column)
    let mut blocks: Vec<(String, i64, usize, Vec<(usize, usize, String)>)> = Vec::new();
    let mut open = false;

    for (idx, raw) in source.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("");
        if line.trim().is_empty() {
            open = false;
            continue;
        }
        let err = |kind| RuleError { rule: None, line: line_no, column: 1, kind };
        let indented = line.starts_with(char::is_whitespace);
        if indented && open {
            let col = line.len() - line.trim_start().len() + 1;
            blocks.last_mut().unwrap().3.push((line_no, col, line.trim().to_string()));
            continue;
        }
        open = false;
        let trimmed = line.trim();
        let (keyword, rest) = trimmed.split_once(char::is_whitespace).unwrap_or((trimmed, ""));
        match keyword {
            "barrier" => barrier.extend(rest.split_whitespace().map(str::to_lowercase)),
            "marker" => markers.push(rest.trim().to_lowercase()),
            "define" => {
                let (name, body) = rest.trim().split_once(char::is_whitespace).ok_or_else(|| {
                    err(RuleErrorKind::Malformed("define needs a name and a body".into()))
                })?;
                let col = raw.find(body).unwrap_or(0) + 1;
                let lexemes = lex(body, col).map_err(|(c, m)| RuleError {
                    rule: None,
                    line: line_no,
                    column: c,
                    kind: RuleErrorKind::Malformed(m),
                })?;
                fragments.insert(name.to_string(), lexemes);
            }
            "rule" => {
                let (head, pattern) = rest.split_once(':').ok_or_else(|| err(RuleErrorKind::Header))?;
                let parts: Vec<&str> = head.split_whitespace().collect();
                let (id, priority) = match parts.as_slice() {
                    [id, "priority", p] => (
                        id.to_string(),
                        p.parse::<i64>().map_err(|_| err(RuleErrorKind::Header))?,
                    ),
                    _ => return Err(err(RuleErrorKind::Header)),
                };
                let col = raw.find(':').map(|c| c + 2).unwrap_or(1);
                let mut pieces = Vec::new();
                if !pattern.trim().is_empty() {
                    pieces.push((line_no, col, pattern.to_string()));
                }
                blocks.push((id, priority, line_no, pieces));
                open = true;
            }
            _ => return Err(err(RuleErrorKind::Malformed(format!("unknown directive {:?}", keyword)))),
        }
    }

    for (id, priority, header_line, pieces) in blocks {
        let rule_err = |line, column, kind| RuleError { rule: Some(id.clone()), line, column, kind };
        if rules.iter().any(|r| r.id == id) {
            return Err(rule_err(header_line, 1, RuleErrorKind::DuplicateId));
        }
        if let Some(other) = rules.iter().find(|r| r.priority == priority) {
            return Err(rule_err(
                header_line,
                1,
                RuleErrorKind::DuplicatePriority(priority, other.id.clone()),
            ));
        }
        let mut lexemes = Vec::new();
        let mut lines_of = Vec::new();
        for (line, col, text) in &pieces {
            let lx = lex(text, *col).map_err(|(c, m)| rule_err(*line, c, RuleErrorKind::Malformed(m)))?;
            lines_of.extend(std::iter::repeat_n(*line, lx.len()));
            lexemes.extend(lx);
        }
        if lexemes.is_empty() {
            return Err(rule_err(header_line, 1, RuleErrorKind::Malformed("empty pattern".into())));
        }
        let mut parser = Parser {
            lexemes: &lexemes,
            pos: 0,
            fragments: &fragments,
            slots: Vec::new(),
            flags: Vec::new(),
            captures: BTreeMap::new(),
            depth: 0,
        };
        let locate = |pos: usize| lines_of.get(pos).copied().unwrap_or(header_line);
        let nodes = parser.parse_seq(&[]).map_err(|(c, k)| rule_err(locate(parser_pos_hint(&lexemes, c)), c, k))?;
        if parser.pos != lexemes.len() {
            let lx = &lexemes[parser.pos];
            return Err(rule_err(
                locate(parser.pos),
                lx.column,
                RuleErrorKind::Malformed(format!("unexpected `{}`", lx.text)),
            ));
        }
        let mut program = Vec::new();
        emit(&nodes, &mut program);
        program.push(Instr::Match);
        rules.push(RuleTemplate {
            id,
            priority,
            source: pieces.iter().map(|p| p.2.trim()).collect::<Vec<_>>().join(" "),
            captures: parser.captures,
            slots: parser.slots,
            flags: parser.flags,
            program,
        });
    }

    rules.sort_by_key(|r| r.priority);
    markers.sort_by_key(|m| std::cmp::Reverse(m.split(' ').count()));
    markers.dedup();
    Ok(RuleSet { rules, markers, barrier })
}

fn parser_pos_hint(lexemes: &[Lexeme], column: usize) -> usize {
    lexemes.iter().position(|l| l.column == column).unwrap_or(0)
}

struct MatchInput<'a> {
    lower: Vec<String>,
    hints: &'a SyntaxHints,
    /// Content ends before trailing punctuation.
    content_end: usize,
    markers: &'a [String],
    barrier: &'a HashSet<String>,
}

impl MatchInput<'_> {
    fn is_marker_at(&self, i: usize, end: usize) -> Option<usize> {
        self.markers.iter().find_map(|m| {
            let words: Vec<&str> = m.split(' ').collect();
            let stop = i + words.len();
            (stop <= end && words.iter().zip(&self.lower[i..stop]).all(|(w, t)| w == t)).then_some(words.len())
        })
    }

    fn is_marker_ending_at(&self, start: usize, end: usize) -> Option<usize> {
        self.markers.iter().find_map(|m| {
            let words: Vec<&str> = m.split(' ').collect();
            (end >= start + words.len()
                && words.iter().zip(&self.lower[end - words.len()..end]).all(|(w, t)| w == t))
            .then_some(words.len())
        })
    }

    /// Strips punctuation and marker words from both ends.
    fn trim(&self, mut start: usize, mut end: usize) -> (usize, usize) {
        loop {
            let before = (start, end);
            while start < end && is_punct(&self.lower[start]) {
                start += 1;
            }
            while end > start && is_punct(&self.lower[end - 1]) {
                end -= 1;
            }
            if start < end {
                if let Some(n) = self.is_marker_at(start, end) {
                    start += n;
                }
            }
            if start < end {
                if let Some(n) = self.is_marker_ending_at(start, end) {
                    end -= n;
                }
            }
            if (start, end) == before {
                return (start, end);
            }
        }
    }
}

fn is_punct(t: &str) -> bool {
    !t.is_empty() && t.chars().all(|c| c.is_ascii_punctuation())
}

struct Vm<'a> {
    rule: &'a RuleTemplate,
    input: &'a MatchInput<'a>,
    steps: usize,
}

impl Vm<'_> {
    fn run(&mut self, pc: usize, pos: usize, saves: &mut Vec<Option<usize>>) -> bool {
        self.steps += 1;
        if self.steps > STEP_BUDGET {
            return false;
        }
        match &self.rule.program[pc] {
            Instr::Word(w) => pos < self.input.content_end && self.input.lower[pos] == *w && self.run(pc + 1, pos + 1, saves),
            Instr::Token(slot) => {
                if pos >= self.input.content_end {
                    return false;
                }
                let t = &self.input.lower[pos];
                if self.input.barrier.contains(t) || self.rule.flags[*slot].forbid.contains(t) {
                    return false;
                }
                self.run(pc + 1, pos + 1, saves)
            }
            Instr::Split(a, b) => {
                let (a, b) = (*a, *b);
                self.run(a, pos, saves) || self.run(b, pos, saves)
            }
            Instr::Jump(t) => self.run(*t, pos, saves),
            Instr::Save(k) => {
                let k = *k;
                let old = saves[k];
                saves[k] = Some(pos);
                if self.run(pc + 1, pos, saves) {
                    return true;
                }
                saves[k] = old;
                false
            }
            Instr::Check(slot) => {
                let flags = &self.rule.flags[*slot];
                if flags.require_verb {
                    let (Some(s), Some(e)) = (saves[2 * slot], saves[2 * slot + 1]) else {
                        return false;
                    };
                    if !(s..e).any(|i| self.input.hints.categories[i] == Category::Verb) {
                        return false;
                    }
                }
                self.run(pc + 1, pos, saves)
            }
            Instr::Match => {
                if pos != self.input.content_end {
                    return false;
                }
                // every capture must survive trimming
                self.rule.slots.iter().enumerate().all(|(slot, name)| {
                    name.is_none()
                        || match (saves[2 * slot], saves[2 * slot + 1]) {
                            (Some(s), Some(e)) => {
                                let (s, e) = self.input.trim(s, e);
                                s < e
                            }
                            _ => true,
                        }
                })
            }
        }
    }
}

/// Runs the rules in priority order with the bundled syntax provider.
pub fn match_rules(utterance: &Utterance, ruleset: &RuleSet) -> Option<RuleMatch> {
    let hints = HeuristicProvider.analyze(utterance);
    match_with_hints(utterance, &hints, ruleset)
}

/// First rule whose pattern covers the whole utterance wins; later rules are
/// not consulted. Output that breaks the annotation constraints counts as
/// no match.
pub fn match_with_hints(utterance: &Utterance, hints: &SyntaxHints, ruleset: &RuleSet) -> Option<RuleMatch> {
    if utterance.is_empty() || hints.categories.len() != utterance.len() {
        return None;
    }
    let lower: Vec<String> = utterance.tokens().iter().map(|t| t.lower()).collect();
    let mut content_end = lower.len();
    while content_end > 0 && is_punct(&lower[content_end - 1]) {
        content_end -= 1;
    }
    let input = MatchInput {
        lower,
        hints,
        content_end,
        markers: &ruleset.markers,
        barrier: &ruleset.barrier,
    };
    for rule in &ruleset.rules {
        let mut saves = vec![None; rule.slots.len() * 2];
        let mut vm = Vm { rule, input: &input, steps: 0 };
        if !vm.run(0, 0, &mut saves) {
            if vm.steps > STEP_BUDGET {
                log::warn!("rule {} exceeded the step budget", rule.id);
            }
            continue;
        }
        let mut spans = Vec::new();
        for (slot, name) in rule.slots.iter().enumerate() {
            let (Some(name), Some(s), Some(e)) = (name, saves[2 * slot], saves[2 * slot + 1]) else {
                continue;
            };
            let (s, e) = input.trim(s, e);
            spans.push(SpanAnnotation::new(rule.captures[name], s, e));
        }
        return match validate(utterance, spans) {
            Ok(annotations) => Some(RuleMatch { rule_id: rule.id.clone(), annotations }),
            Err(reason) => {
                log::warn!("rule {} produced invalid annotations: {}", rule.id, reason);
                None
            }
        };
    }
    None
}

fn validate(utterance: &Utterance, spans: Vec<SpanAnnotation>) -> Result<AnnotationSet, String> {
    let has = |t: TagType| spans.iter().any(|s| s.tag == t);
    for (tag, requires) in [(TagType::Csq, TagType::Cnd), (TagType::Alt, TagType::Cnd)] {
        if has(tag) && !has(requires) {
            return Err(format!("{} without {}", tag, requires));
        }
    }
    AnnotationSet::new_strict(utterance.clone(), spans, Provenance::Grammar).map_err(|e| e.to_string())
}

impl fmt::Display for RuleTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rule {} priority {}: {}", self.id, self.priority, self.source)
    }
}
