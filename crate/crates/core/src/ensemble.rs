//! Grammar-first pipeline with the statistical tagger as fallback.
//!
//! Each sentence of the input is analyzed, clause-expanded and offered to
//! the rules. A rule match is final; otherwise the tagger labels the
//! expanded sentence. Spans come back in expanded coordinates together with
//! the expansion trace, so callers decide how to map them back.

use std::ops::Range;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::annotation::{AnnotationSet, Provenance, SpanAnnotation, TagType};
use crate::grammar::{self, RuleError, RuleSet};
use crate::restructure::{expand_clauses, CopiedSegment, ExpansionTrace, HeuristicProvider, SyntaxProvider};
use crate::scalar::Scalar;
use crate::tagger::{ModelError, TaggerModel};
use crate::text::{char_slice, Utterance};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RulesSource {
    /// The rule file compiled into the crate.
    Embedded,
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    #[default]
    Heuristic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub rules: Option<RulesSource>,
    pub model: Option<PathBuf>,
    pub provider: ProviderKind,
    pub expand: bool,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig { rules: Some(RulesSource::Embedded), model: None, provider: ProviderKind::Heuristic, expand: true }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EnsembleError {
    #[error("neither a rule set nor a model was configured")]
    NoResources,
    #[error("cannot read rules from {path}: {source}")]
    RulesIo {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid rules: {0}")]
    Rules(#[from] RuleError),
    #[error("cannot load model: {0}")]
    Model(#[from] ModelError),
}

/// Which stage produced a sentence's spans.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "stage", rename_all = "lowercase")]
pub enum Stage {
    Grammar { rule: String },
    Model,
    /// No rule fired and no model was available.
    Unresolved,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceResult {
    /// Token range in the original utterance.
    pub original: Range<usize>,
    /// Token range in the expanded utterance.
    pub expanded: Range<usize>,
    pub stage: Stage,
    /// Sentence-local spans (expanded coordinates).
    pub annotations: AnnotationSet,
    /// Spans left out of the combined set because they clashed with an
    /// earlier sentence's tags.
    pub dropped: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnsembleOutput {
    /// Spans over `trace.expanded`.
    pub annotations: AnnotationSet,
    pub trace: ExpansionTrace,
    pub sentences: Vec<SentenceResult>,
}

impl EnsembleOutput {
    /// Spans mapped onto the original tokens. Spans made only of copied
    /// tokens disappear; on overlap the earlier span wins.
    pub fn project_to_original(&self) -> AnnotationSet {
        let mut spans: Vec<SpanAnnotation> = Vec::new();
        for s in self.annotations.spans() {
            if let Some(p) = self.trace.project_span(s) {
                if !spans.iter().any(|k| k.overlaps(&p)) {
                    spans.push(p);
                }
            }
        }
        AnnotationSet::new(self.trace.original.clone(), spans, self.annotations.provenance())
            .expect("projected spans are in bounds and disjoint")
    }
}

/// A ready-to-run ensemble. Immutable apart from the invocation counter,
/// so it can be shared across threads.
pub struct Ensemble<T> {
    rules: Option<RuleSet>,
    model: Option<TaggerModel<T>>,
    provider: Box<dyn SyntaxProvider>,
    expand: bool,
    model_calls: AtomicUsize,
}

impl<T: Scalar> Ensemble<T> {
    pub fn new(rules: Option<RuleSet>, model: Option<TaggerModel<T>>, expand: bool) -> Result<Self, EnsembleError> {
        Self::with_provider(rules, model, Box::new(HeuristicProvider), expand)
    }

    pub fn with_provider(
        rules: Option<RuleSet>,
        model: Option<TaggerModel<T>>,
        provider: Box<dyn SyntaxProvider>,
        expand: bool,
    ) -> Result<Self, EnsembleError> {
        if rules.is_none() && model.is_none() {
            return Err(EnsembleError::NoResources);
        }
        Ok(Ensemble { rules, model, provider, expand, model_calls: AtomicUsize::new(0) })
    }

    pub fn from_config(config: &EnsembleConfig) -> Result<Self, EnsembleError> {
        let rules = match &config.rules {
            None => None,
            Some(RulesSource::Embedded) => Some(RuleSet::default()),
            Some(RulesSource::File(path)) => {
                let src = std::fs::read_to_string(path)
                    .map_err(|source| EnsembleError::RulesIo { path: path.clone(), source })?;
                Some(grammar::compile_rules(&src)?)
            }
        };
        let model = config.model.as_ref().map(TaggerModel::load).transpose()?;
        let provider: Box<dyn SyntaxProvider> = match config.provider {
            ProviderKind::Heuristic => Box::new(HeuristicProvider),
        };
        Self::with_provider(rules, model, provider, config.expand)
    }

    pub fn model(&self) -> Option<&TaggerModel<T>> {
        self.model.as_ref()
    }

    pub fn rules(&self) -> Option<&RuleSet> {
        self.rules.as_ref()
    }

    /// How many sentences have been sent to the tagger so far.
    pub fn model_invocations(&self) -> usize {
        self.model_calls.load(Ordering::Relaxed)
    }

    fn run_sentence(&self, sentence: &Utterance) -> (ExpansionTrace, Stage, AnnotationSet) {
        let trace = if self.expand {
            expand_clauses(sentence, &self.provider.analyze(sentence))
        } else {
            ExpansionTrace::identity(sentence.clone())
        };
        let expanded = &trace.expanded;
        if let Some(rules) = &self.rules {
            let hints = self.provider.analyze(expanded);
            if let Some(m) = grammar::match_with_hints(expanded, &hints, rules) {
                if m.annotations.payload_spans().next().is_some() {
                    let set = m.annotations.with_provenance(Provenance::Grammar);
                    return (trace, Stage::Grammar { rule: m.rule_id }, set);
                }
                log::debug!("rule {} deferred to the tagger", m.rule_id);
            }
        }
        match &self.model {
            Some(model) => {
                self.model_calls.fetch_add(1, Ordering::Relaxed);
                let set = model.annotate(expanded).enforce_cardinality();
                (trace, Stage::Model, set)
            }
            None => {
                let set = AnnotationSet::empty(expanded.clone(), Provenance::Grammar);
                (trace, Stage::Unresolved, set)
            }
        }
    }

    pub fn run(&self, utterance: &Utterance) -> EnsembleOutput {
        let mut expanded_text = String::new();
        let mut expanded_tokens: Vec<String> = Vec::new();
        let mut segments: Vec<CopiedSegment> = Vec::new();
        let mut spans: Vec<SpanAnnotation> = Vec::new();
        let mut sentences = Vec::new();
        let mut char_cursor = 0;
        let text = utterance.text();
        let total_chars = text.chars().count();

        for range in segment_sentences(utterance) {
            let toks = &utterance.tokens()[range.clone()];
            let (from, to) = (toks[0].start, toks[toks.len() - 1].end);
            let sentence_text = char_slice(text, from, to);
            let surfaces: Vec<&str> = toks.iter().map(|t| t.surface.as_str()).collect();
            let sentence = Utterance::from_tokens(sentence_text, &surfaces).expect("tokens come from this text");
            let (trace, stage, set) = self.run_sentence(&sentence);

            expanded_text.push_str(char_slice(text, char_cursor, from));
            expanded_text.push_str(trace.expanded.text());
            char_cursor = to;

            let offset = expanded_tokens.len();
            expanded_tokens.extend(trace.expanded.surfaces().into_iter().map(String::from));
            segments.extend(trace.copied_segments.iter().map(|s| CopiedSegment {
                source_start: s.source_start + range.start,
                source_end: s.source_end + range.start,
                inserted_at: s.inserted_at + offset,
            }));

            let shifted: Vec<SpanAnnotation> = set
                .spans()
                .iter()
                .map(|s| SpanAnnotation::new(s.tag, s.token_start + offset, s.token_end + offset))
                .collect();
            let mut candidate = spans.clone();
            candidate.extend(shifted.iter().copied());
            let clashes = !shifted.is_empty() && !cardinality_ok(&candidate);
            if clashes {
                log::info!("dropping spans of sentence at tokens {:?}: tags repeat an earlier sentence", range);
            } else {
                spans = candidate;
            }
            sentences.push(SentenceResult {
                original: range,
                expanded: offset..offset + trace.expanded.len(),
                stage,
                annotations: set,
                dropped: clashes,
            });
        }
        expanded_text.push_str(char_slice(text, char_cursor, total_chars));

        let expanded = if segments.is_empty() {
            utterance.clone()
        } else {
            Utterance::from_tokens(expanded_text, &expanded_tokens).expect("expanded tokens appear in order")
        };
        let trace = ExpansionTrace { original: utterance.clone(), expanded, copied_segments: segments };

        let contributing: Vec<&SentenceResult> =
            sentences.iter().filter(|s| !s.dropped && !s.annotations.spans().is_empty()).collect();
        let provenance = if contributing.is_empty() {
            if sentences.iter().any(|s| s.stage == Stage::Model) {
                Provenance::Model
            } else {
                Provenance::Grammar
            }
        } else if contributing.iter().all(|s| matches!(s.stage, Stage::Grammar { .. })) {
            Provenance::Grammar
        } else {
            Provenance::Model
        };
        let annotations = AnnotationSet::new(trace.expanded.clone(), spans, provenance)
            .expect("sentence spans are disjoint and in bounds");
        EnsembleOutput { annotations, trace, sentences }
    }
}

fn cardinality_ok(spans: &[SpanAnnotation]) -> bool {
    let count = |t: TagType| spans.iter().filter(|s| s.tag == t).count();
    TagType::SCORED.iter().all(|&t| count(t) <= 1)
        && (count(TagType::Sa) == 0 || count(TagType::Fa) > 0)
        && (count(TagType::Ta) == 0 || count(TagType::Sa) > 0)
}

/// Token ranges of sentences: a sentence ends after `.`, `?` or `!` plus any
/// quotes or brackets glued to it.
pub fn segment_sentences(utterance: &Utterance) -> Vec<Range<usize>> {
    let toks = utterance.tokens();
    let mut out = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < toks.len() {
        if matches!(toks[i].surface.as_str(), "." | "?" | "!") {
            let mut end = i + 1;
            // only closers glued to the terminator belong to this sentence
            while end < toks.len()
                && toks[end].start == toks[end - 1].end
                && matches!(toks[end].surface.as_str(), "." | "?" | "!" | "\"" | ")" | "]")
            {
                end += 1;
            }
            out.push(start..end);
            start = end;
            i = end;
            continue;
        }
        i += 1;
    }
    if start < toks.len() {
        out.push(start..toks.len());
    }
    out
}

/// One-shot convenience: builds the ensemble from `config` and runs it.
pub fn run_ensemble(utterance: &Utterance, config: &EnsembleConfig) -> Result<EnsembleOutput, EnsembleError> {
    Ok(Ensemble::<f64>::from_config(config)?.run(utterance))
}
