mod common;

use std::fs;

use clause_forge::corpus::{self, Format, QuarantineReason};
use clause_forge::ensemble::Stage;
use clause_forge::Ensemble;
use clause_forge::eval::{evaluate, score_external, Level};
use clause_forge::grammar::{match_rules, RuleSet};
use clause_forge::tagger::{train, TrainingConfig};
use clause_forge::{AnnotationSet, Provenance, TagType, Utterance};

fn trained() -> clause_forge::Tagger {
    train::<f64>(&common::corpus(150, 5), &TrainingConfig { epochs: 5, ..Default::default() }).unwrap().0
}

#[test]
fn bio_to_json_of_coordinated_request() {
    let words = "I would like to add myself to the insurance policy and my wife's bank account .";
    let labels = ["B-FA", "I-FA", "I-FA", "I-FA", "I-FA", "I-FA", "I-FA", "I-FA", "I-FA", "I-FA", "O", "B-SA", "I-SA", "I-SA", "I-SA", "O"];
    let bio: String = words.split(' ').zip(labels).map(|(w, l)| format!("{}\t{}\n", w, l)).collect();
    let c = corpus::parse("ex", &bio, Format::TokenPerLineBio);
    assert!(c.quarantine.is_empty());
    let json = corpus::convert(&c.examples, Format::JsonSpans);
    let back = corpus::parse("ex", &json, Format::JsonSpans);
    let ex = &back.examples[0];
    assert_eq!(ex.text_of(TagType::Fa), Some("I would like to add myself to the insurance policy"));
    assert_eq!(ex.text_of(TagType::Sa), Some("my wife's bank account"));
    assert_eq!(back.examples, c.examples);
}

#[test]
fn spans_serialized_in_start_order() {
    let line = r#"{"text":"a b c d e f","spans":[{"tag":"TA","start_token":4,"end_token":6},{"tag":"FA","start_token":0,"end_token":1},{"tag":"SA","start_token":2,"end_token":3}]}"#;
    let c = corpus::parse("t", line, Format::JsonSpans);
    let out = corpus::convert(&c.examples, Format::JsonSpans);
    let v: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
    let starts: Vec<u64> = v["spans"].as_array().unwrap().iter().map(|s| s["start_token"].as_u64().unwrap()).collect();
    let mut reference = starts.clone();
    reference.sort_unstable();
    assert_eq!(starts, reference);
    assert_eq!(starts, vec![0, 2, 4]);
}

#[test]
fn five_tokens_four_labels_is_quarantined() {
    let c = corpus::parse("t", "a\tO\nb\tO\nc\tO\nd\tO\ne\n", Format::TokenPerLineBio);
    assert!(c.is_empty());
    assert_eq!(c.quarantine[0].reason, QuarantineReason::LengthMismatch);
}

#[test]
fn convert_round_trips_synthetic_corpus() {
    let data = common::corpus(60, 8);
    for format in [Format::TokenPerLineBio, Format::JsonSpans] {
        let text = corpus::convert(&data, format);
        let back = corpus::parse("s", &text, format);
        assert_eq!(back.examples, data);
        assert_eq!(back.stats(), corpus::stats(&data));
    }
}

#[test]
fn empty_rules_always_use_the_model() {
    let ens = Ensemble::new(Some(RuleSet::empty()), Some(trained()), true).unwrap();
    for ex in common::corpus(20, 6) {
        let out = ens.run(ex.utterance());
        assert_eq!(out.annotations.provenance(), Provenance::Model);
    }
    assert_eq!(ens.model_invocations(), 20);
}

#[test]
fn grammar_match_skips_the_model() {
    let ens = Ensemble::new(Some(RuleSet::default()), Some(trained()), true).unwrap();
    let out = ens.run(&Utterance::new("If it rains, then book a table for two, else call the help desk."));
    assert_eq!(out.annotations.provenance(), Provenance::Grammar);
    assert_eq!(ens.model_invocations(), 0);
    let out = ens.run(&Utterance::new("my phone number changed last week"));
    assert_eq!(out.sentences[0].stage, Stage::Model);
    assert_eq!(ens.model_invocations(), 1);
}

#[test]
fn ensemble_output_respects_invariants() {
    let ens = Ensemble::new(Some(RuleSet::default()), Some(trained()), true).unwrap();
    for ex in common::corpus(100, 12) {
        let out = ens.run(ex.utterance());
        assert!(out.annotations.cardinality_issues().is_empty());
        let projected = out.project_to_original();
        assert!(projected.cardinality_issues().is_empty());
        assert_eq!(projected.utterance(), ex.utterance());
    }
}

#[test]
fn disabled_expansion_equals_raw_grammar() {
    let ens = Ensemble::new(Some(RuleSet::default()), None, false).unwrap();
    let rules = RuleSet::default();
    for s in ["Transfer $400 to John and Sam.", "If it rains, stay home.", "Book a table and call Sam."] {
        let u = Utterance::new(s);
        let out = ens.run(&u);
        let direct = match_rules(&u, &rules).map(|m| m.annotations.spans().to_vec()).unwrap_or_default();
        assert_eq!(out.annotations.spans(), direct.as_slice());
        assert_eq!(out.annotations.utterance(), &u);
    }
}

#[test]
fn external_scoring() {
    let gold = common::corpus(30, 9);
    let dir = tempfile::tempdir().unwrap();
    let gold_path = dir.path().join("gold.bio");
    fs::write(&gold_path, corpus::convert(&gold, Format::TokenPerLineBio)).unwrap();
    let gold_c = corpus::load(&gold_path, Format::TokenPerLineBio).unwrap();

    let r = score_external(&gold_path, Format::TokenPerLineBio, &gold_c, Level::Span).unwrap();
    assert_eq!(r, evaluate(&gold, &gold).unwrap());
    assert!(r.scores.iter().all(|s| s.support == 0 || s.f1 == 1.0));

    let empty: Vec<AnnotationSet> = gold.iter().map(|g| AnnotationSet::empty(g.utterance().clone(), Provenance::Model)).collect();
    let empty_path = dir.path().join("o.jsonl");
    fs::write(&empty_path, corpus::convert(&empty, Format::JsonSpans)).unwrap();
    let r = score_external(&empty_path, Format::JsonSpans, &gold_c, Level::Span).unwrap();
    assert!(r.scores.iter().all(|s| s.recall == 0.0));

    // reordered predictions: alignment is positional, so scores collapse
    // wherever token counts still line up
    let mut same_len: Vec<AnnotationSet> = gold.clone();
    same_len.reverse();
    let mismatch = evaluate(&same_len, &gold);
    match mismatch {
        Ok(r) => assert!(r.average < 1.0),
        Err(e) => assert!(e.to_string().contains("tokens")),
    }
}
