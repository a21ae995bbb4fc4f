use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

const BIN: &str = env!("CARGO_BIN_EXE_clause-forge");

const EXAMPLE_1: &str =
    "Provided that I have at least 1000 bucks in my account, please transfer $400 to Donald otherwise check my account balance";

fn run(args: &[&str], stdin: Option<&str>) -> Output {
    run_env(args, stdin, None)
}

fn run_env(args: &[&str], stdin: Option<&str>, config: Option<&Path>) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::piped());
    match config {
        Some(p) => cmd.env("CLAUSE_FORGE_CONFIG", p),
        None => cmd.env_remove("CLAUSE_FORGE_CONFIG"),
    };
    let mut child = cmd.spawn().expect("binary runs");
    {
        let mut pipe = child.stdin.take().unwrap();
        if let Some(s) = stdin {
            // the binary may exit before reading (usage errors)
            let _ = pipe.write_all(s.as_bytes());
        }
    }
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn small_bio() -> String {
    let mut s = String::new();
    let sents: [&[(&str, &str)]; 4] = [
        &[("if", "O"), ("it", "B-CND"), ("rains", "I-CND"), (",", "O"), ("stay", "B-CSQ"), ("home", "I-CSQ")],
        &[("if", "O"), ("it", "B-CND"), ("snows", "I-CND"), (",", "O"), ("call", "B-CSQ"), ("Sam", "I-CSQ"), ("else", "O"), ("wait", "B-ALT")],
        &[("book", "B-FA"), ("a", "I-FA"), ("table", "I-FA"), ("and", "O"), ("then", "O"), ("call", "B-SA"), ("Sam", "I-SA")],
        &[("the", "O"), ("weather", "O"), ("is", "O"), ("nice", "O")],
    ];
    for sent in sents {
        for (w, l) in sent {
            s.push_str(&format!("{}\t{}\n", w, l));
        }
        s.push('\n');
    }
    s
}

#[test]
fn no_arguments_is_a_usage_error() {
    let o = run(&[], None);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(code(&run(&["frobnicate"], None)), 1);
}

#[test]
fn version_and_help_succeed() {
    let o = run(&["--version"], None);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).starts_with("clause-forge "));
    assert_eq!(code(&run(&["tag", "--help"], None)), 0);
}

#[test]
fn missing_corpus_is_a_data_error() {
    let o = run(&["stats", "--corpus", "/definitely/not/here.bio"], None);
    assert_eq!(code(&o), 2);
}

#[test]
fn stats_text_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.bio");
    fs::write(&path, small_bio()).unwrap();
    let p = path.to_str().unwrap();

    let o = run(&["stats", "--corpus", p], None);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("SENTENCES"));

    let o = run(&["stats", "--corpus", p, "--output", "json"], None);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["sentences"], 4);
    assert_eq!(v["counts"]["CND"], 2);
    assert_eq!(v["counts"]["ALT"], 1);
    assert_eq!(v["counts"]["NN"], 1);
}

#[test]
fn quarantine_goes_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.bio");
    fs::write(&path, format!("{}a\tO\nb\n\n", small_bio())).unwrap();
    let q = dir.path().join("q.jsonl");
    let o = run(&["stats", "--corpus", path.to_str().unwrap(), "--quarantine", q.to_str().unwrap(), "--output", "json"], None);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["sentences"], 4);
    let lines = fs::read_to_string(&q).unwrap();
    assert_eq!(lines.lines().count(), 1);
    assert!(lines.contains("LENGTH_MISMATCH"));
}

#[test]
fn convert_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let bio = dir.path().join("c.bio");
    fs::write(&bio, small_bio()).unwrap();
    let json = dir.path().join("c.jsonl");
    let back = dir.path().join("back.bio");
    assert_eq!(code(&run(&["convert", "--corpus", bio.to_str().unwrap(), "--to", "json", "--out", json.to_str().unwrap()], None)), 0);
    assert_eq!(code(&run(&["convert", "--corpus", json.to_str().unwrap(), "--to", "bio", "--out", back.to_str().unwrap()], None)), 0);
    assert_eq!(fs::read_to_string(&back).unwrap(), small_bio());
}

#[test]
fn expand_plain_text() {
    let o = run(&["expand"], Some("Transfer $400 to John and Sam.\n"));
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).trim(), "Transfer $400 to John and Transfer $400 to Sam.");
}

#[test]
fn tag_uses_the_grammar_for_the_first_example() {
    let o = run(&["tag"], Some(&format!("{}\n", EXAMPLE_1)));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["provenance"], "GRAMMAR");
    let tags: Vec<&str> = v["spans"].as_array().unwrap().iter().map(|s| s["tag"].as_str().unwrap()).collect();
    assert_eq!(tags, ["CND", "CSQ", "ALT"]);
}

#[test]
fn expand_tag_graph_pipeline() {
    let expanded = run(&["expand", "--trace", "json"], Some(&format!("{}\n", EXAMPLE_1)));
    assert_eq!(code(&expanded), 0);
    let tagged = run(&["tag"], Some(&stdout(&expanded)));
    assert_eq!(code(&tagged), 0, "{}", String::from_utf8_lossy(&tagged.stderr));
    let g = run(&["graph"], Some(&stdout(&tagged)));
    assert_eq!(code(&g), 0, "{}", String::from_utf8_lossy(&g.stderr));
    let v: serde_json::Value = serde_json::from_str(stdout(&g).trim()).unwrap();
    assert_eq!(v["nodes"].as_array().unwrap().len(), 3);
    let labels: Vec<&str> = v["edges"].as_array().unwrap().iter().map(|e| e["label"].as_str().unwrap()).collect();
    assert_eq!(labels, ["TRUE", "FALSE"]);

    let dot = run(&["graph", "--format", "dot"], Some(&stdout(&tagged)));
    assert!(stdout(&dot).contains("digraph"));
}

#[test]
fn rules_none_without_model_is_a_usage_error() {
    let o = run(&["tag", "--rules", "none"], Some("hello\n"));
    assert_eq!(code(&o), 1);
}

#[test]
fn train_then_tag_with_model_and_eval() {
    let dir = tempfile::tempdir().unwrap();
    let bio = dir.path().join("train.bio");
    fs::write(&bio, small_bio()).unwrap();
    let model = dir.path().join("m.bin");
    let o = run(&["train", "--corpus", bio.to_str().unwrap(), "--out", model.to_str().unwrap(), "--epochs", "5"], None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(model.exists());

    let sentences: String = small_bio()
        .split("\n\n")
        .filter(|b| !b.trim().is_empty())
        .map(|b| b.lines().map(|l| l.split('\t').next().unwrap()).collect::<Vec<_>>().join(" ") + "\n")
        .collect();
    let pred = run(&["tag", "--rules", "none", "--model", model.to_str().unwrap(), "--format", "bio"], Some(&sentences));
    assert_eq!(code(&pred), 0, "{}", String::from_utf8_lossy(&pred.stderr));

    for (fmt, needle) in [("text", "CND"), ("json", "\"average\""), ("csv", "system")] {
        let o = run(
            &["eval", "--pred", "-", "--pred-format", "bio", "--gold", bio.to_str().unwrap(), "--format", fmt],
            Some(&stdout(&pred)),
        );
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).contains(needle), "{} output: {}", fmt, stdout(&o));
    }
}

#[test]
fn eval_of_gold_against_itself_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let bio = dir.path().join("g.bio");
    fs::write(&bio, small_bio()).unwrap();
    let p = bio.to_str().unwrap();
    let o = run(&["eval", "--pred", p, "--gold", p, "--format", "json"], None);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let scores = v.pointer("/0/report/scores").unwrap().as_array().unwrap();
    for s in scores.iter().filter(|s| s["support"].as_u64().unwrap() > 0) {
        assert_eq!(s["f1"], 1.0, "{}", s);
    }
    assert_eq!(v.pointer("/0/report/micro_f1").unwrap(), 1.0);
}

#[test]
fn config_file_is_honoured_and_validated() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "colour = \"blue\"\n").unwrap();
    assert_eq!(code(&run_env(&["expand"], Some("hi\n"), Some(&bad))), 1);

    let cfg = dir.path().join("ok.toml");
    fs::write(&cfg, "rules = \"none\"\n").unwrap();
    // rules disabled and no model: nothing can tag
    assert_eq!(code(&run_env(&["tag"], Some("hello\n"), Some(&cfg))), 1);
    // the flag overrides the file
    let o = run_env(&["tag", "--rules", "default"], Some(&format!("{}\n", EXAMPLE_1)), Some(&cfg));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}
