//! Annotated corpora: loading, validation, statistics and conversion.
//!
//! Two on-disk formats are supported:
//!
//! * token-per-line BIO: `token<TAB>label`, blank line between sentences.
//!   The reader also accepts any whitespace separator and long tag names
//!   (`B-CONDITIONAL`), which is all the released data needs.
//! * JSON spans, one object per line:
//!   `{"text": ..., "tokens": [...], "spans": [{"tag", "start_token", "end_token"}]}`.
//!   `tokens` is optional (the text is tokenized when absent), and
//!   `{"tokens": [...], "labels": [...]}` records are accepted too.
//!
//! Malformed records never abort a load; they land in the quarantine list.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::annotation::{parse_labels, to_bio, AnnotationSet, BioError, Provenance, SpanAnnotation, TagType};
use crate::text::Utterance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Format {
    TokenPerLineBio,
    JsonSpans,
}

impl Format {
    /// Guesses from the extension: `.json`/`.jsonl` are spans, all else BIO.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") | Some("jsonl") => Format::JsonSpans,
            _ => Format::TokenPerLineBio,
        }
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bio" | "conll" | "token_per_line_bio" => Ok(Format::TokenPerLineBio),
            "json" | "jsonl" | "json_spans" => Ok(Format::JsonSpans),
            _ => Err(format!("unknown corpus format {:?} (expected bio or json)", s)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    /// File stems conventionally used for this split.
    pub fn stems(self) -> &'static [&'static str] {
        match self {
            Split::Train => &["train"],
            Split::Validation => &["validation", "valid", "val", "dev"],
            Split::Test => &["test"],
        }
    }

    fn guess(path: &Path) -> Option<Split> {
        let stem = path.file_stem()?.to_str()?.to_ascii_lowercase();
        Split::ALL.into_iter().find(|s| s.stems().iter().any(|k| stem == *k || stem.starts_with(&format!("{}.", k))))
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum QuarantineReason {
    LengthMismatch,
    UnknownLabel,
    InvalidSpans,
    Malformed,
}

/// A record that failed validation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Quarantined {
    /// 0-based record index in the file.
    pub record: usize,
    /// 1-based line where the record starts.
    pub line: usize,
    pub reason: QuarantineReason,
    pub detail: String,
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub name: String,
    pub split: Option<Split>,
    pub examples: Vec<AnnotationSet>,
    pub quarantine: Vec<Quarantined>,
    /// Soft-invariant findings (cardinality, CND/CSQ balance).
    pub warnings: Vec<String>,
}

impl Corpus {
    pub fn new(name: impl Into<String>, examples: Vec<AnnotationSet>) -> Self {
        let mut c = Corpus { name: name.into(), split: None, examples, quarantine: Vec::new(), warnings: Vec::new() };
        c.collect_warnings();
        c
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn stats(&self) -> SplitStats {
        stats(&self.examples)
    }

    /// Quarantine entries as JSON lines.
    pub fn quarantine_report(&self) -> String {
        self.quarantine
            .iter()
            .map(|q| serde_json::to_string(q).expect("serializable") + "\n")
            .collect()
    }

    fn collect_warnings(&mut self) {
        for (i, ex) in self.examples.iter().enumerate() {
            for issue in ex.cardinality_issues() {
                self.warnings.push(format!("example {}: {}", i, issue));
            }
        }
        self.warnings.extend(self.stats().warnings());
    }
}

/// Per-tag span counts for a set of examples.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SplitStats {
    pub sentences: usize,
    /// Span counts per payload tag; `NN` counts sentences with no payload span.
    pub counts: BTreeMap<TagType, usize>,
}

impl SplitStats {
    pub fn count(&self, tag: TagType) -> usize {
        self.counts.get(&tag).copied().unwrap_or(0)
    }

    /// Data-sanity findings: every condition should have a consequence.
    pub fn warnings(&self) -> Vec<String> {
        let (cnd, csq) = (self.count(TagType::Cnd), self.count(TagType::Csq));
        if cnd.abs_diff(csq) > 1 {
            vec![format!("CND count {} and CSQ count {} differ by more than 1", cnd, csq)]
        } else {
            Vec::new()
        }
    }

    /// Plain-text table in tag order ALT, CND, CSQ, FA, SA, TA, NONE.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for t in [TagType::Alt, TagType::Cnd, TagType::Csq, TagType::Fa, TagType::Sa, TagType::Ta, TagType::Nn] {
            out.push_str(&format!("{:<14} {:>6}\n", t.long_name(), self.count(t)));
        }
        out.push_str(&format!("{:<14} {:>6}\n", "SENTENCES", self.sentences));
        out
    }
}

pub fn stats(examples: &[AnnotationSet]) -> SplitStats {
    let mut counts: BTreeMap<TagType, usize> = TagType::ALL.iter().map(|&t| (t, 0)).collect();
    for ex in examples {
        let mut payload = false;
        for s in ex.payload_spans() {
            *counts.entry(s.tag).or_default() += 1;
            payload = true;
        }
        if !payload {
            *counts.entry(TagType::Nn).or_default() += 1;
        }
    }
    SplitStats { sentences: examples.len(), counts }
}

/// Span as written in JSON files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanRecord {
    pub tag: String,
    pub start_token: usize,
    pub end_token: usize,
    /// Covered text; informational, ignored on input.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

/// One JSON-spans line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ExampleRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spans: Option<Vec<SpanRecord>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl ExampleRecord {
    pub fn from_set(set: &AnnotationSet) -> Self {
        ExampleRecord {
            text: Some(set.utterance().text().to_string()),
            tokens: Some(set.utterance().surfaces().into_iter().map(String::from).collect()),
            spans: Some(
                set.spans()
                    .iter()
                    .map(|s| SpanRecord {
                        tag: s.tag.abbrev().to_string(),
                        start_token: s.token_start,
                        end_token: s.token_end,
                        text: Some(set.span_text(s).to_string()),
                    })
                    .collect(),
            ),
            labels: None,
            provenance: Some(set.provenance()),
        }
    }

    /// Validates the record into an annotation set. NN spans are dropped:
    /// a sentence without payload spans is an NN sentence.
    pub fn into_set(self, default_provenance: Provenance) -> Result<AnnotationSet, (QuarantineReason, String)> {
        let provenance = self.provenance.unwrap_or(default_provenance);
        let utterance = match (self.text, self.tokens) {
            (Some(text), Some(tokens)) => Utterance::from_tokens(text, &tokens),
            (None, Some(tokens)) => Utterance::from_words(&tokens),
            (Some(text), None) => Ok(Utterance::new(text)),
            (None, None) => return Err((QuarantineReason::Malformed, "record has neither text nor tokens".into())),
        }
        .map_err(|e| (QuarantineReason::Malformed, e.to_string()))?;

        if let Some(labels) = self.labels {
            if labels.len() != utterance.len() {
                return Err((
                    QuarantineReason::LengthMismatch,
                    format!("{} labels for {} tokens", labels.len(), utterance.len()),
                ));
            }
            let labels = parse_labels(&labels).map_err(|e| (QuarantineReason::UnknownLabel, e.to_string()))?;
            return crate::annotation::from_bio(&labels, utterance, provenance).map_err(invalid);
        }
        let mut spans = Vec::new();
        for s in self.spans.unwrap_or_default() {
            let tag = TagType::parse_any(&s.tag)
                .ok_or_else(|| (QuarantineReason::UnknownLabel, format!("unknown tag {:?}", s.tag)))?;
            if tag != TagType::Nn {
                spans.push(SpanAnnotation::new(tag, s.start_token, s.end_token));
            }
        }
        AnnotationSet::new(utterance, spans, provenance).map_err(invalid)
    }
}

fn invalid(e: BioError) -> (QuarantineReason, String) {
    let reason = match e {
        BioError::LengthMismatch { .. } => QuarantineReason::LengthMismatch,
        BioError::UnknownLabel(_) => QuarantineReason::UnknownLabel,
        _ => QuarantineReason::InvalidSpans,
    };
    (reason, e.to_string())
}

pub fn load(path: impl AsRef<Path>, format: Format) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let mut corpus = parse(name, &text, format);
    corpus.split = Split::guess(path);
    Ok(corpus)
}

/// Parses corpus text already in memory.
pub fn parse(name: impl Into<String>, text: &str, format: Format) -> Corpus {
    let records = match format {
        Format::TokenPerLineBio => parse_bio(text),
        Format::JsonSpans => parse_json(text),
    };
    let mut examples = Vec::new();
    let mut quarantine = Vec::new();
    for (record, (line, result)) in records.into_iter().enumerate() {
        match result {
            Ok(set) => examples.push(set),
            Err((reason, detail)) => quarantine.push(Quarantined { record, line, reason, detail }),
        }
    }
    let mut corpus = Corpus { name: name.into(), split: None, examples, quarantine, warnings: Vec::new() };
    corpus.collect_warnings();
    corpus
}

type Parsed = (usize, Result<AnnotationSet, (QuarantineReason, String)>);

fn parse_bio(text: &str) -> Vec<Parsed> {
    let mut out = Vec::new();
    let mut block: Vec<&str> = Vec::new();
    let mut block_line = 0;
    let flush = |block: &mut Vec<&str>, line: usize, out: &mut Vec<Parsed>| {
        if !block.is_empty() {
            out.push((line, bio_record(block)));
            block.clear();
        }
    };
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            flush(&mut block, block_line, &mut out);
            continue;
        }
        if line.starts_with("-DOCSTART-") {
            continue;
        }
        if block.is_empty() {
            block_line = i + 1;
        }
        block.push(line);
    }
    flush(&mut block, block_line, &mut out);
    out
}

fn bio_record(lines: &[&str]) -> Result<AnnotationSet, (QuarantineReason, String)> {
    let mut tokens = Vec::with_capacity(lines.len());
    let mut labels = Vec::with_capacity(lines.len());
    for line in lines {
        let (tok, label) = match line.split_once('\t') {
            Some((t, l)) => (t.trim(), Some(l.trim())),
            None => {
                let mut parts = line.split_whitespace();
                let t = parts.next().unwrap_or_default();
                (t, parts.last())
            }
        };
        tokens.push(tok);
        if let Some(l) = label.filter(|l| !l.is_empty()) {
            labels.push(l);
        }
    }
    if labels.len() != tokens.len() {
        return Err((
            QuarantineReason::LengthMismatch,
            format!("{} labels for {} tokens", labels.len(), tokens.len()),
        ));
    }
    let labels = parse_labels(&labels).map_err(|e| (QuarantineReason::UnknownLabel, e.to_string()))?;
    let utterance = Utterance::from_words(&tokens).map_err(|e| (QuarantineReason::Malformed, e.to_string()))?;
    crate::annotation::from_bio(&labels, utterance, Provenance::Gold).map_err(invalid)
}

fn parse_json(text: &str) -> Vec<Parsed> {
    // a whole-file array is accepted as well as JSON lines
    if text.trim_start().starts_with('[') {
        return match serde_json::from_str::<Vec<ExampleRecord>>(text) {
            Ok(recs) => recs.into_iter().map(|r| (1, r.into_set(Provenance::Gold))).collect(),
            Err(e) => vec![(1, Err((QuarantineReason::Malformed, e.to_string())))],
        };
    }
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let rec = serde_json::from_str::<ExampleRecord>(l)
                .map_err(|e| (QuarantineReason::Malformed, e.to_string()))
                .and_then(|r| r.into_set(Provenance::Gold));
            (i + 1, rec)
        })
        .collect()
}

/// Serializes examples; `parse(convert(c))` reproduces `c`.
pub fn convert(examples: &[AnnotationSet], format: Format) -> String {
    let mut out = String::new();
    match format {
        Format::TokenPerLineBio => {
            for ex in examples {
                for (tok, label) in ex.utterance().tokens().iter().zip(ex.to_bio()) {
                    out.push_str(&tok.surface);
                    out.push('\t');
                    out.push_str(&label.to_string());
                    out.push('\n');
                }
                out.push('\n');
            }
        }
        Format::JsonSpans => {
            for ex in examples {
                let mut rec = ExampleRecord::from_set(ex);
                if ex.provenance() == Provenance::Gold {
                    rec.provenance = None;
                }
                out.push_str(&serde_json::to_string(&rec).expect("serializable"));
                out.push('\n');
            }
        }
    }
    out
}

/// BIO labels of an example as strings.
pub fn bio_strings(set: &AnnotationSet) -> Vec<String> {
    to_bio(set.utterance().len(), set.spans())
        .expect("validated spans")
        .into_iter()
        .map(|l| l.to_string())
        .collect()
}

/// Looks for `<stem>.<ext>` in `dir` for any stem conventionally naming
/// `split` and a known extension.
pub fn find_split(dir: impl AsRef<Path>, split: Split) -> Option<(PathBuf, Format)> {
    let dir = dir.as_ref();
    for stem in split.stems() {
        for ext in ["bio", "conll", "tsv", "txt", "jsonl", "json"] {
            let p = dir.join(format!("{}.{}", stem, ext));
            if p.is_file() {
                let f = Format::from_path(&p);
                return Some((p, f));
            }
        }
    }
    None
}
