//! `clause-forge` command-line front end.
//!
//! Data goes to stdout, diagnostics to stderr. Exit codes: 0 success,
//! 1 usage error, 2 data error.

mod config;

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use clause_forge::corpus::{self, ExampleRecord, Format};
use clause_forge::ensemble::{Ensemble, EnsembleOutput, Stage};
use clause_forge::eval::{self, Level, ReportFormat};
use clause_forge::grammar::{compile_rules, RuleSet};
use clause_forge::graph::{create_graph, TemplateRegistry};
use clause_forge::restructure;
use clause_forge::tagger::{train_with_validation, ModelError, Optimizer, TaggerModel, TrainingConfig};
use clause_forge::{AnnotationSet, Provenance, Scalar, Utterance};

use config::AppConfig;

#[derive(Parser, Debug)]
#[command(name = "clause-forge", version, about = "Split conditional and multi-step requests into tagged spans")]
struct Cli {
    /// Log filter for stderr diagnostics (error, warn, info, debug, trace).
    #[arg(long, global = true)]
    log_level: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Per-tag span counts of a corpus.
    Stats(StatsArgs),
    /// Convert a corpus between the BIO and JSON-spans formats.
    Convert(ConvertArgs),
    /// Expand coordinated clauses, one sentence per line.
    Expand(ExpandArgs),
    /// Tag sentences with the rule/model ensemble.
    Tag(TagArgs),
    /// Train the CRF tagger.
    Train(TrainArgs),
    /// Score predictions against a gold corpus.
    Eval(EvalArgs),
    /// Compile tagged sentences into condition/action graphs.
    Graph(GraphArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CorpusFormat {
    Bio,
    Json,
}

impl From<CorpusFormat> for Format {
    fn from(f: CorpusFormat) -> Self {
        match f {
            CorpusFormat::Bio => Format::TokenPerLineBio,
            CorpusFormat::Json => Format::JsonSpans,
        }
    }
}

fn corpus_format(flag: Option<CorpusFormat>, path: &Path) -> Format {
    flag.map(Format::from).unwrap_or_else(|| Format::from_path(path))
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TextOrJson {
    Text,
    Json,
}

#[derive(Args, Debug)]
struct StatsArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Input format; guessed from the extension when omitted.
    #[arg(long)]
    format: Option<CorpusFormat>,
    #[arg(long, value_enum, default_value = "text")]
    output: TextOrJson,
    /// Write quarantined records here (JSON lines) instead of stderr.
    #[arg(long)]
    quarantine: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ConvertArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    from: Option<CorpusFormat>,
    #[arg(long)]
    to: CorpusFormat,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    quarantine: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TraceFormat {
    Json,
}

#[derive(Args, Debug)]
struct ExpandArgs {
    /// Input file (`-` or omitted: stdin). Lines are plain text or JSON
    /// objects with a `text` field.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Emit JSON lines carrying the expansion trace instead of plain text.
    #[arg(long, value_enum)]
    trace: Option<TraceFormat>,
    /// Also write the trace as JSON lines to this file.
    #[arg(long)]
    sidecar: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TagArgs {
    /// Rule file, `default` for the shipped rules, or `none`.
    #[arg(long)]
    rules: Option<String>,
    /// Trained model file.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Skip clause expansion.
    #[arg(long)]
    no_expand: bool,
    /// `json` (one object per line) or `bio` (token/label lines, original tokens).
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    input: Option<PathBuf>,
    /// Report JSON spans over the original tokens instead of the expanded ones.
    #[arg(long)]
    project: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OptimizerArg {
    Sgd,
    FullBatch,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Precision {
    F64,
    F32,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    format: Option<CorpusFormat>,
    /// Held-out corpus; macro F1 on it is reported each epoch.
    #[arg(long)]
    validation: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    optimizer: Option<OptimizerArg>,
    /// Visit sentences in file order.
    #[arg(long)]
    no_shuffle: bool,
    /// Train on clause-expanded sentences.
    #[arg(long)]
    expand_training: bool,
    #[arg(long, value_enum, default_value = "f64")]
    precision: Precision,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Prediction file (`-` for stdin).
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    pred_format: Option<CorpusFormat>,
    #[arg(long)]
    gold_format: Option<CorpusFormat>,
    #[arg(long, default_value = "span")]
    level: String,
    #[arg(long, default_value = "text")]
    format: String,
    /// Row label in the report.
    #[arg(long, default_value = "system")]
    name: String,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GraphFormat {
    Json,
    Dot,
}

#[derive(Args, Debug)]
struct GraphArgs {
    /// Annotation JSON lines (as written by `tag`); stdin when omitted.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: GraphFormat,
}

enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

type CmdResult = Result<(), Failure>;

fn usage(msg: impl std::fmt::Display) -> Failure {
    Failure::Usage(anyhow!("{}", msg))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let app = match AppConfig::from_env() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}", e);
            return ExitCode::from(1);
        }
    };
    init_logging(cli.log_level.as_deref().or(app.log_level.as_deref()));

    let result = match cli.command {
        Command::Stats(a) => stats(a),
        Command::Convert(a) => convert(a),
        Command::Expand(a) => expand(a),
        Command::Tag(a) => tag(a, &app),
        Command::Train(a) => train(a, &app),
        Command::Eval(a) => evaluate(a),
        Command::Graph(a) => graph(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {:#}", e);
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {:#}", e);
            ExitCode::from(2)
        }
    }
}

fn init_logging(level: Option<&str>) {
    let mut builder = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"));
    if let Some(level) = level {
        builder.parse_filters(level);
    }
    let _ = builder.try_init();
}

fn read_input(path: Option<&Path>) -> anyhow::Result<String> {
    match path {
        Some(p) if p != Path::new("-") => fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display())),
        _ => {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s).context("cannot read stdin")?;
            Ok(s)
        }
    }
}

fn load_corpus(path: &Path, format: Format, quarantine: Option<&Path>) -> anyhow::Result<corpus::Corpus> {
    let c = if path == Path::new("-") {
        corpus::parse("stdin", &read_input(None)?, format)
    } else {
        corpus::load(path, format)?
    };
    if !c.quarantine.is_empty() {
        let report = c.quarantine_report();
        match quarantine {
            Some(q) => fs::write(q, report).with_context(|| format!("cannot write {}", q.display()))?,
            None => eprint!("{}", report),
        }
        log::warn!("{}: {} records quarantined", c.name, c.quarantine.len());
    }
    for w in &c.warnings {
        log::warn!("{}: {}", c.name, w);
    }
    Ok(c)
}

fn write_output(out: Option<&Path>, data: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => fs::write(p, data).with_context(|| format!("cannot write {}", p.display())),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(data.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn stats(a: StatsArgs) -> CmdResult {
    let c = load_corpus(&a.corpus, corpus_format(a.format, &a.corpus), a.quarantine.as_deref())?;
    let s = c.stats();
    let out = match a.output {
        TextOrJson::Text => s.render_text(),
        TextOrJson::Json => {
            let v = json!({
                "corpus": c.name,
                "split": c.split,
                "sentences": s.sentences,
                "counts": s.counts,
                "quarantined": c.quarantine.len(),
                "warnings": s.warnings(),
            });
            serde_json::to_string_pretty(&v).map_err(anyhow::Error::from)? + "\n"
        }
    };
    write_output(None, &out)?;
    Ok(())
}

fn convert(a: ConvertArgs) -> CmdResult {
    let c = load_corpus(&a.corpus, corpus_format(a.from, &a.corpus), a.quarantine.as_deref())?;
    write_output(a.out.as_deref(), &corpus::convert(&c.examples, a.to.into()))?;
    Ok(())
}

/// One input line: plain text or a JSON object with `text` (and optionally
/// `tokens`, which are then kept as-is).
fn parse_line(line: &str, number: usize) -> anyhow::Result<Utterance> {
    if !line.trim_start().starts_with('{') {
        return Ok(Utterance::new(line));
    }
    let rec: ExampleRecord = serde_json::from_str(line).with_context(|| format!("line {}: invalid JSON", number))?;
    match (rec.text, rec.tokens) {
        (Some(text), Some(tokens)) => {
            Utterance::from_tokens(text, &tokens).with_context(|| format!("line {}: tokens do not match text", number))
        }
        (None, Some(tokens)) => Ok(Utterance::from_words(&tokens).with_context(|| format!("line {}", number))?),
        (Some(text), None) => Ok(Utterance::new(text)),
        (None, None) => bail!("line {}: record has no text", number),
    }
}

fn input_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r'))).filter(|(_, l)| !l.trim().is_empty())
}

fn expand(a: ExpandArgs) -> CmdResult {
    let text = read_input(a.input.as_deref())?;
    let mut out = String::new();
    let mut sidecar = String::new();
    for (n, line) in input_lines(&text) {
        let u = parse_line(line, n)?;
        let trace = restructure::expand(&u);
        let record = json!({
            "text": trace.expanded.text(),
            "tokens": trace.expanded.surfaces(),
            "original": trace.original.text(),
            "copied_segments": trace.copied_segments,
        })
        .to_string();
        match a.trace {
            Some(TraceFormat::Json) => out.push_str(&record),
            None => out.push_str(trace.expanded.text()),
        }
        out.push('\n');
        sidecar.push_str(&record);
        sidecar.push('\n');
    }
    if let Some(p) = &a.sidecar {
        fs::write(p, sidecar).with_context(|| format!("cannot write {}", p.display()))?;
    }
    write_output(None, &out)?;
    Ok(())
}

enum Engine {
    F64(Ensemble<f64>),
    F32(Ensemble<f32>),
}

impl Engine {
    fn run(&self, u: &Utterance) -> EnsembleOutput {
        match self {
            Engine::F64(e) => e.run(u),
            Engine::F32(e) => e.run(u),
        }
    }
}

fn build_engine(rules: Option<RuleSet>, model: Option<&Path>, expand: bool) -> Result<Engine, Failure> {
    let Some(path) = model else {
        if rules.is_none() {
            return Err(usage("nothing to tag with: give --model or enable rules"));
        }
        return Ok(Engine::F64(Ensemble::new(rules, None, expand).map_err(anyhow::Error::from)?));
    };
    let model = match TaggerModel::<f64>::load(path) {
        Ok(m) => Engine::F64(Ensemble::new(rules, Some(m), expand).map_err(anyhow::Error::from)?),
        Err(ModelError::ScalarWidth { found: 4, .. }) => {
            let m = TaggerModel::<f32>::load(path).with_context(|| format!("cannot load {}", path.display()))?;
            Engine::F32(Ensemble::new(rules, Some(m), expand).map_err(anyhow::Error::from)?)
        }
        Err(e) => return Err(anyhow::Error::from(e).context(format!("cannot load {}", path.display())).into()),
    };
    Ok(model)
}

fn load_rules(spec: &str) -> Result<Option<RuleSet>, Failure> {
    match spec {
        "none" => Ok(None),
        "default" => Ok(Some(RuleSet::default())),
        path => {
            let src = fs::read_to_string(path).with_context(|| format!("cannot read rules {}", path))?;
            Ok(Some(compile_rules(&src).with_context(|| format!("invalid rules in {}", path))?))
        }
    }
}

fn sentence_json(out: &EnsembleOutput) -> Vec<Value> {
    out.sentences
        .iter()
        .map(|s| {
            let (stage, rule) = match &s.stage {
                Stage::Grammar { rule } => ("grammar", Some(rule.as_str())),
                Stage::Model => ("model", None),
                Stage::Unresolved => ("none", None),
            };
            json!({
                "stage": stage,
                "rule": rule,
                "original": [s.original.start, s.original.end],
                "expanded": [s.expanded.start, s.expanded.end],
                "dropped": s.dropped,
            })
        })
        .collect()
}

fn record_json(set: &AnnotationSet) -> Value {
    serde_json::to_value(ExampleRecord::from_set(set)).expect("record serializes")
}

fn tag(a: TagArgs, app: &AppConfig) -> CmdResult {
    let rules_spec = a.rules.or_else(|| app.rules.clone()).unwrap_or_else(|| "default".into());
    let rules = load_rules(&rules_spec)?;
    let model = a.model.or_else(|| app.model.clone());
    let expand = !a.no_expand && app.expand.unwrap_or(true);
    let format = a.format.or_else(|| app.format.clone()).unwrap_or_else(|| "json".into());
    if !matches!(format.as_str(), "json" | "bio") {
        return Err(usage(format!("unknown tag format {:?} (expected json or bio)", format)));
    }
    let engine = build_engine(rules, model.as_deref(), expand)?;

    let text = read_input(a.input.as_deref())?;
    let mut out = String::new();
    for (n, line) in input_lines(&text) {
        let u = parse_line(line, n)?;
        let result = engine.run(&u);
        if format == "bio" {
            let projected = result.project_to_original();
            out.push_str(&corpus::convert(std::slice::from_ref(&projected), Format::TokenPerLineBio));
            continue;
        }
        let shown = if a.project { result.project_to_original() } else { result.annotations.clone() };
        let mut v = record_json(&shown);
        v["original"] = json!(u.text());
        v["trace"] = json!({ "copied_segments": result.trace.copied_segments, "projected": a.project });
        v["sentences"] = json!(sentence_json(&result));
        out.push_str(&v.to_string());
        out.push('\n');
    }
    write_output(None, &out)?;
    Ok(())
}

fn train(a: TrainArgs, app: &AppConfig) -> CmdResult {
    let defaults = TrainingConfig::default();
    let config = TrainingConfig {
        epochs: a.epochs.unwrap_or(defaults.epochs),
        learning_rate: a.learning_rate.unwrap_or(defaults.learning_rate),
        l2: a.l2.unwrap_or(defaults.l2),
        seed: a.seed.or(app.seed).unwrap_or(defaults.seed),
        shuffle: !a.no_shuffle,
        optimizer: match a.optimizer {
            Some(OptimizerArg::FullBatch) => Optimizer::FullBatch,
            _ => Optimizer::Sgd,
        },
        expand_training: a.expand_training,
    };
    config.validate().map_err(usage)?;

    let train_set = load_corpus(&a.corpus, corpus_format(a.format, &a.corpus), None)?;
    let validation = match &a.validation {
        Some(p) => Some(load_corpus(p, Format::from_path(p), None)?),
        None => None,
    };
    let val = validation.as_ref().map(|c| c.examples.as_slice());
    match a.precision {
        Precision::F64 => fit::<f64>(&train_set.examples, val, &config, &a.out),
        Precision::F32 => fit::<f32>(&train_set.examples, val, &config, &a.out),
    }
}

fn fit<T: Scalar>(
    examples: &[AnnotationSet],
    validation: Option<&[AnnotationSet]>,
    config: &TrainingConfig,
    out: &Path,
) -> CmdResult {
    let (model, report) = train_with_validation::<T>(examples, validation, config).map_err(anyhow::Error::from)?;
    for e in &report.epochs {
        match e.validation_f1 {
            Some(f1) => eprintln!("epoch {:>3}  loss {:.5}  validation macro-F1 {:.4}", e.epoch, e.loss, f1),
            None => eprintln!("epoch {:>3}  loss {:.5}", e.epoch, e.loss),
        }
    }
    model.save(out).with_context(|| format!("cannot write model {}", out.display()))?;
    let summary = json!({
        "model": out.display().to_string(),
        "sentences": model.metadata.sentences,
        "features": model.feature_count(),
        "corpus_fingerprint": model.metadata.corpus_fingerprint,
        "final_loss": report.epochs.last().map(|e| e.loss),
    });
    write_output(None, &(summary.to_string() + "\n"))?;
    Ok(())
}

fn evaluate(a: EvalArgs) -> CmdResult {
    let level: Level = a.level.parse().map_err(usage)?;
    let format: ReportFormat = a.format.parse().map_err(usage)?;
    let gold = load_corpus(&a.gold, corpus_format(a.gold_format, &a.gold), None)?;
    let pred_format = a.pred_format.map(Format::from).unwrap_or_else(|| {
        if a.pred == Path::new("-") {
            Format::JsonSpans
        } else {
            Format::from_path(&a.pred)
        }
    });
    let pred = load_corpus(&a.pred, pred_format, None)?;
    if !gold.quarantine.is_empty() || !pred.quarantine.is_empty() {
        return Err(anyhow!(
            "cannot align predictions with gold: {} gold and {} prediction records quarantined",
            gold.quarantine.len(),
            pred.quarantine.len()
        )
        .into());
    }
    let report = eval::evaluate_at(&pred.examples, &gold.examples, level).map_err(anyhow::Error::from)?;
    write_output(None, &eval::render(&[(a.name.as_str(), &report)], format))?;
    Ok(())
}

fn graph(a: GraphArgs) -> CmdResult {
    let text = read_input(a.input.as_deref())?;
    let registry = TemplateRegistry::default();
    let mut out = String::new();
    for (n, line) in input_lines(&text) {
        let rec: ExampleRecord = serde_json::from_str(line).with_context(|| format!("line {}: invalid JSON", n))?;
        let set = rec
            .into_set(Provenance::Gold)
            .map_err(|(reason, detail)| anyhow!("line {}: {:?}: {}", n, reason, detail))?;
        let g = create_graph(&set, &registry);
        match a.format {
            GraphFormat::Json => {
                out.push_str(&g.to_json());
                out.push('\n');
            }
            GraphFormat::Dot => out.push_str(&g.to_dot()),
        }
    }
    write_output(None, &out)?;
    Ok(())
}
