//! Per-tag precision / recall / F1 and the report table.
//!
//! Span level gives credit only when tag, start and end all match a gold
//! span. Token level counts tokens carrying each tag. NN is never scored.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::annotation::{AnnotationSet, SpanAnnotation, TagType};
use crate::corpus::{self, Corpus, CorpusError, Format};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    #[default]
    Span,
    Token,
}

impl FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "span" => Ok(Level::Span),
            "token" => Ok(Level::Token),
            _ => Err(format!("unknown level {:?} (expected span or token)", s)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("{predictions} predictions for {gold} gold examples")]
    LengthMismatch { predictions: usize, gold: usize },
    #[error("example {index}: prediction has {predicted} tokens, gold has {gold}")]
    TokenMismatch { index: usize, predicted: usize, gold: usize },
}

#[derive(Debug, thiserror::Error)]
pub enum ExternalError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("prediction file has {0} malformed records")]
    Quarantined(usize),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagScore {
    pub tag: TagType,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Gold units (spans or tokens) of this tag.
    pub support: usize,
    pub predicted: usize,
    pub correct: usize,
}

impl TagScore {
    pub fn from_counts(tag: TagType, correct: usize, predicted: usize, gold: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(correct, predicted);
        let recall = ratio(correct, gold);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        TagScore { tag, precision, recall, f1, support: gold, predicted, correct }
    }

    pub fn precision_defined(&self) -> bool {
        self.predicted > 0
    }

    pub fn recall_defined(&self) -> bool {
        self.support > 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub level: Level,
    /// One entry per scored tag, in CND, CSQ, ALT, FA, SA, TA order.
    pub scores: Vec<TagScore>,
    /// Unweighted mean of the six per-tag F1 values.
    pub average: f64,
    /// F1 over the pooled counts of all six tags.
    pub micro_f1: f64,
    pub sentences: usize,
}

impl EvalReport {
    pub fn score(&self, tag: TagType) -> Option<&TagScore> {
        self.scores.iter().find(|s| s.tag == tag)
    }

    fn from_counts(level: Level, counts: &BTreeMap<TagType, [usize; 3]>, sentences: usize) -> Self {
        let scores: Vec<TagScore> = TagType::SCORED
            .iter()
            .map(|&t| {
                let [c, p, g] = counts.get(&t).copied().unwrap_or_default();
                TagScore::from_counts(t, c, p, g)
            })
            .collect();
        let average = scores.iter().map(|s| s.f1).sum::<f64>() / scores.len() as f64;
        let (c, p, g) = scores
            .iter()
            .fold((0, 0, 0), |(c, p, g), s| (c + s.correct, p + s.predicted, g + s.support));
        let micro_f1 = TagScore::from_counts(TagType::Nn, c, p, g).f1;
        EvalReport { level, scores, average, micro_f1, sentences }
    }
}

/// Span-level evaluation; predictions align with gold by index.
pub fn evaluate(predictions: &[AnnotationSet], gold: &[AnnotationSet]) -> Result<EvalReport, EvalError> {
    evaluate_at(predictions, gold, Level::Span)
}

pub fn evaluate_at(
    predictions: &[AnnotationSet],
    gold: &[AnnotationSet],
    level: Level,
) -> Result<EvalReport, EvalError> {
    if predictions.len() != gold.len() {
        return Err(EvalError::LengthMismatch { predictions: predictions.len(), gold: gold.len() });
    }
    // tag -> [correct, predicted, gold]
    let mut counts: BTreeMap<TagType, [usize; 3]> = BTreeMap::new();
    for (index, (p, g)) in predictions.iter().zip(gold).enumerate() {
        if p.utterance().len() != g.utterance().len() {
            return Err(EvalError::TokenMismatch {
                index,
                predicted: p.utterance().len(),
                gold: g.utterance().len(),
            });
        }
        match level {
            Level::Span => count_spans(p.spans(), g.spans(), &mut counts),
            Level::Token => count_tokens(p, g, &mut counts),
        }
    }
    Ok(EvalReport::from_counts(level, &counts, gold.len()))
}

fn count_spans(pred: &[SpanAnnotation], gold: &[SpanAnnotation], counts: &mut BTreeMap<TagType, [usize; 3]>) {
    for s in pred.iter().filter(|s| s.tag != TagType::Nn) {
        let e = counts.entry(s.tag).or_default();
        e[1] += 1;
        if gold.contains(s) {
            e[0] += 1;
        }
    }
    for s in gold.iter().filter(|s| s.tag != TagType::Nn) {
        counts.entry(s.tag).or_default()[2] += 1;
    }
}

fn token_tags(set: &AnnotationSet) -> Vec<Option<TagType>> {
    let mut out = vec![None; set.utterance().len()];
    for s in set.payload_spans() {
        for slot in &mut out[s.token_start..s.token_end] {
            *slot = Some(s.tag);
        }
    }
    out
}

fn count_tokens(pred: &AnnotationSet, gold: &AnnotationSet, counts: &mut BTreeMap<TagType, [usize; 3]>) {
    for (p, g) in token_tags(pred).into_iter().zip(token_tags(gold)) {
        if let Some(p) = p {
            let e = counts.entry(p).or_default();
            e[1] += 1;
            if g == Some(p) {
                e[0] += 1;
            }
        }
        if let Some(g) = g {
            counts.entry(g).or_default()[2] += 1;
        }
    }
}

/// Scores a prediction file (BIO or JSON spans) against a gold corpus.
/// Records are aligned by position, so a reordered file scores poorly but
/// still evaluates as long as the token counts agree.
pub fn score_external(
    predictions: impl AsRef<Path>,
    format: Format,
    gold: &Corpus,
    level: Level,
) -> Result<EvalReport, ExternalError> {
    let pred = corpus::load(predictions, format)?;
    if !pred.quarantine.is_empty() {
        return Err(ExternalError::Quarantined(pred.quarantine.len()));
    }
    Ok(evaluate_at(&pred.examples, &gold.examples, level)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(ReportFormat::Text),
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            _ => Err(format!("unknown report format {:?} (expected text, json or csv)", s)),
        }
    }
}

fn pct(v: f64) -> String {
    format!("{:.2}", v * 100.0)
}

/// Renders one row per system: P, R and F1 for each of the six tags followed
/// by the average. Scores are percentages; a 0/0 ratio prints as `undefined`
/// in text and as an empty cell in CSV.
pub fn render(rows: &[(&str, &EvalReport)], format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let value: Vec<serde_json::Value> = rows
                .iter()
                .map(|(name, r)| serde_json::json!({ "system": name, "report": r }))
                .collect();
            serde_json::to_string_pretty(&value).expect("report serializes") + "\n"
        }
        ReportFormat::Csv => {
            let mut out = String::from("system");
            for t in TagType::SCORED {
                for m in ["P", "R", "F1"] {
                    let _ = write!(out, ",{}_{}", t.abbrev(), m);
                }
            }
            out.push_str(",Average\n");
            for (name, r) in rows {
                out.push_str(&csv_field(name));
                for s in &r.scores {
                    let p = if s.precision_defined() { pct(s.precision) } else { String::new() };
                    let rc = if s.recall_defined() { pct(s.recall) } else { String::new() };
                    let _ = write!(out, ",{},{},{}", p, rc, pct(s.f1));
                }
                let _ = writeln!(out, ",{}", pct(r.average));
            }
            out
        }
        ReportFormat::Text => {
            let name_w = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max("System".len());
            let cell = 9;
            let mut out = format!("{:<name_w$}", "");
            for t in TagType::SCORED {
                let _ = write!(out, " | {:^w$}", t.abbrev(), w = cell * 3 + 2);
            }
            out.push_str(" |\n");
            let _ = write!(out, "{:<name_w$}", "System");
            for _ in TagType::SCORED {
                let _ = write!(out, " | {:>cell$} {:>cell$} {:>cell$}", "P", "R", "F1");
            }
            let _ = writeln!(out, " | {:>7}", "Average");
            for (name, r) in rows {
                let _ = write!(out, "{:<name_w$}", name);
                for s in &r.scores {
                    let p = if s.precision_defined() { pct(s.precision) } else { "undefined".into() };
                    let rc = if s.recall_defined() { pct(s.recall) } else { "undefined".into() };
                    let _ = write!(out, " | {:>cell$} {:>cell$} {:>cell$}", p, rc, pct(s.f1));
                }
                let _ = writeln!(out, " | {:>7}", pct(r.average));
            }
            out
        }
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
