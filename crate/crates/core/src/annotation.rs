//! Tag taxonomy, span annotations and BIO conversion.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::text::Utterance;

/// The seven annotation labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TagType {
    /// Condition gating an action.
    #[serde(rename = "CND")]
    Cnd,
    /// Action taken when the condition holds.
    #[serde(rename = "CSQ")]
    Csq,
    /// Action taken when the condition fails.
    #[serde(rename = "ALT")]
    Alt,
    #[serde(rename = "FA")]
    Fa,
    #[serde(rename = "SA")]
    Sa,
    #[serde(rename = "TA")]
    Ta,
    /// No conditional or sequential payload. Never appears in BIO space.
    #[serde(rename = "NN")]
    Nn,
}

impl TagType {
    pub const ALL: [TagType; 7] = [
        TagType::Cnd,
        TagType::Csq,
        TagType::Alt,
        TagType::Fa,
        TagType::Sa,
        TagType::Ta,
        TagType::Nn,
    ];

    /// Tags that carry a decomposition payload and are scored.
    pub const SCORED: [TagType; 6] = [
        TagType::Cnd,
        TagType::Csq,
        TagType::Alt,
        TagType::Fa,
        TagType::Sa,
        TagType::Ta,
    ];

    pub fn abbrev(self) -> &'static str {
        match self {
            TagType::Cnd => "CND",
            TagType::Csq => "CSQ",
            TagType::Alt => "ALT",
            TagType::Fa => "FA",
            TagType::Sa => "SA",
            TagType::Ta => "TA",
            TagType::Nn => "NN",
        }
    }

    pub fn long_name(self) -> &'static str {
        match self {
            TagType::Cnd => "CONDITIONAL",
            TagType::Csq => "CONSEQUENCE",
            TagType::Alt => "ALTERNATIVE",
            TagType::Fa => "FIRST_ACTION",
            TagType::Sa => "SECOND_ACTION",
            TagType::Ta => "THIRD_ACTION",
            TagType::Nn => "NONE",
        }
    }

    /// Accepts either the abbreviation or the long name, case-insensitively.
    pub fn parse_any(s: &str) -> Option<TagType> {
        let up = s.trim().to_ascii_uppercase();
        TagType::ALL
            .into_iter()
            .find(|t| t.abbrev() == up || t.long_name() == up)
    }
}

impl fmt::Display for TagType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.abbrev())
    }
}

impl FromStr for TagType {
    type Err = BioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TagType::parse_any(s).ok_or_else(|| BioError::UnknownLabel(s.to_string()))
    }
}

/// One BIO label. Never wraps [`TagType::Nn`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BioLabel {
    O,
    B(TagType),
    I(TagType),
}

impl BioLabel {
    /// Fixed label alphabet. `O` comes first so it wins index tie-breaks.
    pub const ALPHABET: [BioLabel; 13] = [
        BioLabel::O,
        BioLabel::B(TagType::Cnd),
        BioLabel::I(TagType::Cnd),
        BioLabel::B(TagType::Csq),
        BioLabel::I(TagType::Csq),
        BioLabel::B(TagType::Alt),
        BioLabel::I(TagType::Alt),
        BioLabel::B(TagType::Fa),
        BioLabel::I(TagType::Fa),
        BioLabel::B(TagType::Sa),
        BioLabel::I(TagType::Sa),
        BioLabel::B(TagType::Ta),
        BioLabel::I(TagType::Ta),
    ];

    pub fn index(self) -> usize {
        Self::ALPHABET
            .iter()
            .position(|&l| l == self)
            .expect("label outside alphabet")
    }

    pub fn from_index(i: usize) -> Option<BioLabel> {
        Self::ALPHABET.get(i).copied()
    }

    pub fn tag(self) -> Option<TagType> {
        match self {
            BioLabel::O => None,
            BioLabel::B(t) | BioLabel::I(t) => Some(t),
        }
    }

    /// Whether `next` may follow `self` without producing an orphan `I-`.
    pub fn allows(self, next: BioLabel) -> bool {
        match next {
            BioLabel::I(t) => matches!(self, BioLabel::B(p) | BioLabel::I(p) if p == t),
            _ => true,
        }
    }

    /// Whether a sequence may start with this label.
    pub fn can_start(self) -> bool {
        !matches!(self, BioLabel::I(_))
    }
}

impl fmt::Display for BioLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BioLabel::O => f.write_str("O"),
            BioLabel::B(t) => write!(f, "B-{}", t),
            BioLabel::I(t) => write!(f, "I-{}", t),
        }
    }
}

impl FromStr for BioLabel {
    type Err = BioError;

    /// Parses `O`, `B-<TAG>` or `I-<TAG>`. Long tag names are accepted too.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "O" {
            return Ok(BioLabel::O);
        }
        let unknown = || BioError::UnknownLabel(s.to_string());
        let (prefix, tag) = s.split_once('-').ok_or_else(unknown)?;
        let tag = TagType::parse_any(tag).ok_or_else(unknown)?;
        if tag == TagType::Nn {
            return Ok(BioLabel::O);
        }
        match prefix {
            "B" => Ok(BioLabel::B(tag)),
            "I" => Ok(BioLabel::I(tag)),
            _ => Err(unknown()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpanAnnotation {
    pub tag: TagType,
    #[serde(rename = "start_token")]
    pub token_start: usize,
    #[serde(rename = "end_token")]
    pub token_end: usize,
}

impl SpanAnnotation {
    pub fn new(tag: TagType, token_start: usize, token_end: usize) -> Self {
        SpanAnnotation { tag, token_start, token_end }
    }

    pub fn len(&self) -> usize {
        self.token_end.saturating_sub(self.token_start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn overlaps(&self, other: &SpanAnnotation) -> bool {
        self.token_start < other.token_end && other.token_start < self.token_end
    }
}

/// Spans order by position first.
impl Ord for SpanAnnotation {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.token_start, self.token_end, self.tag).cmp(&(other.token_start, other.token_end, other.tag))
    }
}

impl PartialOrd for SpanAnnotation {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Provenance {
    Gold,
    Grammar,
    Model,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BioError {
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("label count {labels} does not match token count {tokens}")]
    LengthMismatch { labels: usize, tokens: usize },
    #[error("spans {first:?} and {second:?} overlap")]
    Overlap {
        first: SpanAnnotation,
        second: SpanAnnotation,
    },
    #[error("span {span:?} out of bounds for {tokens} tokens")]
    OutOfBounds { span: SpanAnnotation, tokens: usize },
}

/// Soft invariant violations. The released data may contain them, so they
/// are reported rather than rejected.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum CardinalityIssue {
    DuplicateTag(TagType),
    MissingPredecessor { tag: TagType, requires: TagType },
}

impl fmt::Display for CardinalityIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CardinalityIssue::DuplicateTag(t) => write!(f, "more than one {} span", t),
            CardinalityIssue::MissingPredecessor { tag, requires } => {
                write!(f, "{} present without {}", tag, requires)
            }
        }
    }
}

/// Span labeling of one utterance.
///
/// Spans are kept sorted by start token and never overlap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationSet {
    utterance: Utterance,
    spans: Vec<SpanAnnotation>,
    provenance: Provenance,
}

impl AnnotationSet {
    /// Checks bounds and overlap only. Use [`AnnotationSet::cardinality_issues`]
    /// or [`AnnotationSet::new_strict`] for the per-tag constraints.
    pub fn new(
        utterance: Utterance,
        mut spans: Vec<SpanAnnotation>,
        provenance: Provenance,
    ) -> Result<Self, BioError> {
        spans.sort();
        check_spans(utterance.len(), &spans)?;
        Ok(AnnotationSet { utterance, spans, provenance })
    }

    /// Like [`AnnotationSet::new`] but also rejects cardinality issues.
    pub fn new_strict(
        utterance: Utterance,
        spans: Vec<SpanAnnotation>,
        provenance: Provenance,
    ) -> Result<Self, AnnotationError> {
        let set = Self::new(utterance, spans, provenance)?;
        match set.cardinality_issues().into_iter().next() {
            Some(issue) => Err(AnnotationError::Cardinality(issue)),
            None => Ok(set),
        }
    }

    pub fn empty(utterance: Utterance, provenance: Provenance) -> Self {
        AnnotationSet { utterance, spans: Vec::new(), provenance }
    }

    pub fn utterance(&self) -> &Utterance {
        &self.utterance
    }

    pub fn spans(&self) -> &[SpanAnnotation] {
        &self.spans
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn span_text(&self, span: &SpanAnnotation) -> &str {
        self.utterance.slice(span.token_start, span.token_end)
    }

    /// First span carrying `tag`.
    pub fn get(&self, tag: TagType) -> Option<&SpanAnnotation> {
        self.spans.iter().find(|s| s.tag == tag)
    }

    pub fn text_of(&self, tag: TagType) -> Option<&str> {
        self.get(tag).map(|s| self.span_text(s))
    }

    /// Tags carrying a decomposition payload (NN excluded).
    pub fn payload_spans(&self) -> impl Iterator<Item = &SpanAnnotation> {
        self.spans.iter().filter(|s| s.tag != TagType::Nn)
    }

    pub fn cardinality_issues(&self) -> Vec<CardinalityIssue> {
        let mut issues = Vec::new();
        let count = |t: TagType| self.spans.iter().filter(|s| s.tag == t).count();
        for t in TagType::SCORED {
            if count(t) > 1 {
                issues.push(CardinalityIssue::DuplicateTag(t));
            }
        }
        for (tag, requires) in [(TagType::Sa, TagType::Fa), (TagType::Ta, TagType::Sa)] {
            if count(tag) > 0 && count(requires) == 0 {
                issues.push(CardinalityIssue::MissingPredecessor { tag, requires });
            }
        }
        issues
    }

    /// Drops spans until the cardinality constraints hold: the longest span
    /// of a duplicated tag survives (earliest on ties), then orphaned SA/TA
    /// spans are removed.
    pub fn enforce_cardinality(mut self) -> Self {
        let mut keep: Vec<SpanAnnotation> = Vec::new();
        for span in &self.spans {
            if span.tag == TagType::Nn {
                keep.push(*span);
                continue;
            }
            match keep.iter_mut().find(|k| k.tag == span.tag) {
                Some(k) if span.len() > k.len() => *k = *span,
                Some(_) => {}
                None => keep.push(*span),
            }
        }
        let has = |spans: &[SpanAnnotation], t: TagType| spans.iter().any(|s| s.tag == t);
        if !has(&keep, TagType::Fa) {
            keep.retain(|s| s.tag != TagType::Sa);
        }
        if !has(&keep, TagType::Sa) {
            keep.retain(|s| s.tag != TagType::Ta);
        }
        keep.sort();
        self.spans = keep;
        self
    }

    pub fn to_bio(&self) -> Vec<BioLabel> {
        to_bio(self.utterance.len(), &self.spans).expect("AnnotationSet spans are validated")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnnotationError {
    #[error(transparent)]
    Bio(#[from] BioError),
    #[error("{0}")]
    Cardinality(CardinalityIssue),
}

fn check_spans(n_tokens: usize, sorted: &[SpanAnnotation]) -> Result<(), BioError> {
    for span in sorted {
        if span.token_start >= span.token_end || span.token_end > n_tokens {
            return Err(BioError::OutOfBounds { span: *span, tokens: n_tokens });
        }
    }
    for pair in sorted.windows(2) {
        if pair[0].overlaps(&pair[1]) {
            return Err(BioError::Overlap { first: pair[0], second: pair[1] });
        }
    }
    Ok(())
}

/// Encodes spans as one BIO label per token. NN spans become `O`.
pub fn to_bio(n_tokens: usize, spans: &[SpanAnnotation]) -> Result<Vec<BioLabel>, BioError> {
    let mut sorted = spans.to_vec();
    sorted.sort();
    check_spans(n_tokens, &sorted)?;
    let mut labels = vec![BioLabel::O; n_tokens];
    for span in sorted.iter().filter(|s| s.tag != TagType::Nn) {
        labels[span.token_start] = BioLabel::B(span.tag);
        for l in &mut labels[span.token_start + 1..span.token_end] {
            *l = BioLabel::I(span.tag);
        }
    }
    Ok(labels)
}

/// Decodes maximal B/I runs into spans. An `I-X` that does not continue an
/// `X` run is treated as `B-X`.
pub fn bio_spans(labels: &[BioLabel]) -> Vec<SpanAnnotation> {
    let mut spans = Vec::new();
    let mut open: Option<SpanAnnotation> = None;
    for (i, &label) in labels.iter().enumerate() {
        let continues = matches!((label, open), (BioLabel::I(t), Some(cur)) if cur.tag == t);
        if continues {
            if let Some(cur) = open.as_mut() {
                cur.token_end = i + 1;
            }
            continue;
        }
        spans.extend(open.take());
        if let Some(tag) = label.tag() {
            open = Some(SpanAnnotation::new(tag, i, i + 1));
        }
    }
    spans.extend(open);
    spans
}

pub fn from_bio(
    labels: &[BioLabel],
    utterance: Utterance,
    provenance: Provenance,
) -> Result<AnnotationSet, BioError> {
    if labels.len() != utterance.len() {
        return Err(BioError::LengthMismatch {
            labels: labels.len(),
            tokens: utterance.len(),
        });
    }
    AnnotationSet::new(utterance, bio_spans(labels), provenance)
}

pub fn parse_labels<S: AsRef<str>>(labels: &[S]) -> Result<Vec<BioLabel>, BioError> {
    labels.iter().map(|l| l.as_ref().parse()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use BioLabel::{B, I, O};
    use TagType::*;

    fn utt(n: usize) -> Utterance {
        let words: Vec<String> = (0..n).map(|i| format!("w{}", i)).collect();
        Utterance::from_words(&words).unwrap()
    }

    #[test]
    fn empty_spans_all_outside() {
        assert_eq!(to_bio(4, &[]).unwrap(), vec![O, O, O, O]);
    }

    #[test]
    fn conditional_example_labels() {
        let u = Utterance::new(
            "Provided that I have at least 1000 bucks in my account, please transfer $400 to Donald otherwise check my account balance",
        );
        let set = AnnotationSet::new(
            u,
            vec![
                SpanAnnotation::new(Cnd, 2, 11),
                SpanAnnotation::new(Csq, 12, 17),
                SpanAnnotation::new(Alt, 18, 22),
            ],
            Provenance::Gold,
        )
        .unwrap();
        assert_eq!(set.text_of(Cnd), Some("I have at least 1000 bucks in my account"));
        assert_eq!(set.text_of(Csq), Some("please transfer $400 to Donald"));
        assert_eq!(set.text_of(Alt), Some("check my account balance"));
        let labels = set.to_bio();
        assert_eq!(&labels[..3], &[O, O, B(Cnd)]);
        assert!(labels[3..11].iter().all(|&l| l == I(Cnd)));
        assert_eq!(labels[11], O);
        assert_eq!(labels[12], B(Csq));
        assert!(labels[13..17].iter().all(|&l| l == I(Csq)));
        assert_eq!(labels[17], O);
        assert_eq!(labels[18], B(Alt));
        assert!(labels[19..].iter().all(|&l| l == I(Alt)));
    }

    #[test]
    fn overlap_rejected_with_pair() {
        let a = SpanAnnotation::new(Cnd, 0, 3);
        let b = SpanAnnotation::new(Csq, 2, 4);
        match to_bio(5, &[b, a]) {
            Err(BioError::Overlap { first, second }) => {
                assert_eq!((first, second), (a, b));
            }
            other => panic!("unexpected {:?}", other),
        }
    }

    #[test]
    fn nn_spans_become_outside() {
        assert_eq!(to_bio(2, &[SpanAnnotation::new(Nn, 0, 2)]).unwrap(), vec![O, O]);
    }

    #[test]
    fn from_bio_examples() {
        let set = from_bio(&[O, O, O], utt(3), Provenance::Model).unwrap();
        assert!(set.spans().is_empty());
        let set = from_bio(&[B(Cnd), I(Cnd), O, B(Csq)], utt(4), Provenance::Model).unwrap();
        assert_eq!(
            set.spans(),
            &[SpanAnnotation::new(Cnd, 0, 2), SpanAnnotation::new(Csq, 3, 4)]
        );
        let set = from_bio(&[I(Csq), I(Csq)], utt(2), Provenance::Model).unwrap();
        assert_eq!(set.spans(), &[SpanAnnotation::new(Csq, 0, 2)]);
    }

    #[test]
    fn from_bio_length_mismatch() {
        assert_eq!(
            from_bio(&[O], utt(2), Provenance::Model),
            Err(BioError::LengthMismatch { labels: 1, tokens: 2 })
        );
    }

    #[test]
    fn label_parsing() {
        assert_eq!("B-CND".parse::<BioLabel>().unwrap(), B(Cnd));
        assert_eq!("I-SECOND_ACTION".parse::<BioLabel>().unwrap(), I(Sa));
        assert_eq!("B-NONE".parse::<BioLabel>().unwrap(), O);
        assert!("X-CND".parse::<BioLabel>().is_err());
        assert!("B-FOO".parse::<BioLabel>().is_err());
        for l in BioLabel::ALPHABET {
            assert_eq!(l.to_string().parse::<BioLabel>().unwrap(), l);
        }
    }

    #[test]
    fn cardinality() {
        let set = AnnotationSet::new(
            utt(6),
            vec![
                SpanAnnotation::new(Sa, 0, 1),
                SpanAnnotation::new(Cnd, 1, 2),
                SpanAnnotation::new(Cnd, 2, 4),
            ],
            Provenance::Model,
        )
        .unwrap();
        let issues = set.cardinality_issues();
        assert!(issues.contains(&CardinalityIssue::DuplicateTag(Cnd)));
        assert!(issues.contains(&CardinalityIssue::MissingPredecessor { tag: Sa, requires: Fa }));
        let fixed = set.enforce_cardinality();
        assert_eq!(fixed.spans(), &[SpanAnnotation::new(Cnd, 2, 4)]);
        assert!(fixed.cardinality_issues().is_empty());
    }

    #[test]
    fn serde_names_match_abbreviations() {
        for t in TagType::ALL {
            assert_eq!(serde_json::to_string(&t).unwrap(), format!("\"{}\"", t.abbrev()));
        }
    }
}
