//! Decomposition of conditional and multi-step utterances into tagged spans
//! and condition/action graphs.
//!
//! The pipeline expands coordinated clauses, tries an ordered set of
//! surface rules, and falls back to a linear-chain CRF tagger:
//!
//! ```
//! use clause_forge::{Ensemble, RuleSet, TagType, Utterance};
//!
//! let ensemble = Ensemble::new(Some(RuleSet::default()), None, true).unwrap();
//! let out = ensemble.run(&Utterance::new("If it rains, stay home, otherwise go for a walk."));
//! assert_eq!(out.annotations.text_of(TagType::Alt), Some("go for a walk"));
//! ```
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`.

pub mod annotation;
pub mod corpus;
pub mod ensemble;
pub mod eval;
pub mod grammar;
pub mod graph;
pub mod lexicon;
pub mod restructure;
pub mod scalar;
pub mod tagger;
pub mod text;

pub use annotation::{AnnotationSet, BioLabel, Provenance, SpanAnnotation, TagType};
pub use corpus::{Corpus, Format, Split, SplitStats};
pub use eval::{evaluate, EvalReport, TagScore};
pub use grammar::{compile_rules, match_rules, RuleSet};
pub use graph::{create_graph, DecompositionGraph, TemplateRegistry};
pub use restructure::{expand, ExpansionTrace};
pub use scalar::Scalar;
pub use tagger::{train, TaggerModel, TrainingConfig};
pub use text::Utterance;

/// Double-precision tagger.
pub type Tagger = TaggerModel<f64>;
/// Single-precision tagger; half the model size.
pub type Tagger32 = TaggerModel<f32>;
/// Ensemble over a double-precision tagger.
pub type Ensemble = ensemble::Ensemble<f64>;
