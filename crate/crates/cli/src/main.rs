use std::collections::{BTreeSet, HashMap};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use bridgechat::detect::{
    build_question_catalog, build_tod_qa, load_catalog, restrict_to_catalog, NegativeSampling,
};
use bridgechat::dialogue::{compute_stats, read_corpus_file, Provenance};
use bridgechat::eval::{
    aggregate_ranks, aggregate_scores, compare_provenance, export_amt, ingest_annotations, instructions_path,
    read_snippets, Annotations, ExportInput, RankUnit, StdMode, Task,
};
use bridgechat::intent::{known_labels, IntentLabel, KnownIntent};
use bridgechat::pipeline::{load_config, manifest_path, run_pipeline, ContinuationMode};
use bridgechat::sgd::{load_sgd, SgdLoadOptions};
use bridgechat::transition::{adapt_otters, build_training_triples, TransitionTriple};

#[derive(Parser)]
#[command(
    name = "bridgechat",
    version,
    about = "Synthesize and evaluate chit-chat to task-oriented dialogues"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a corpus with the full pipeline.
    Generate(GenerateArgs),
    /// Print corpus statistics per intent and per continuation source.
    Stats(StatsArgs),
    /// Build yes/no intent QA training data from an SGD corpus.
    BuildTodQa(TodQaArgs),
    /// Build seq2seq training data for transition generation.
    BuildTransitionData(TransitionArgs),
    /// Export a crowdsourcing task file.
    ExportAmt(ExportArgs),
    /// Aggregate completed crowdsourcing annotations.
    Aggregate(AggregateArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// TOML pipeline configuration.
    #[arg(long)]
    config: PathBuf,
    /// Number of dialogue seeds to run.
    #[arg(long)]
    n: usize,
    /// merge, sim or mixed; overrides continuation.mode.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<ContinuationMode>,
    /// Overrides master_seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides io.output_path.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_mode(s: &str) -> Result<ContinuationMode, String> {
    s.parse()
}

fn parse_task(s: &str) -> Result<Task, String> {
    s.parse()
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Print JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct TodQaArgs {
    #[arg(long)]
    sgd: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// NO examples kept per YES example in each dialogue.
    #[arg(long, default_value_t = 1.0, conflicts_with = "no_downsample")]
    negative_ratio: f64,
    /// Keep every NO example.
    #[arg(long)]
    no_downsample: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Question catalog JSON; defaults to the built-in intents.
    #[arg(long, conflicts_with = "all_intents")]
    catalog: Option<PathBuf>,
    /// Add every intent described in the SGD schema to the catalog.
    #[arg(long)]
    all_intents: bool,
    /// Replace slot values in system turns with `[slot]` tokens.
    #[arg(long)]
    delexicalize: bool,
}

#[derive(Args)]
struct TransitionArgs {
    /// Generated corpus to take (past, future, transition) triples from.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Tab-separated topic-transition records.
    #[arg(long)]
    otters: Option<PathBuf>,
    /// The records file starts with a header row.
    #[arg(long)]
    otters_header: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExportArgs {
    /// Dialogue corpus (tasks 1, 2) or detector snippets (task 3).
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, value_parser = parse_task)]
    task: Task,
    #[arg(long)]
    out: PathBuf,
    /// Guideline text to copy verbatim into the instructions file.
    #[arg(long)]
    guidelines: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum StdArg {
    Population,
    Sample,
}

#[derive(Clone, Copy, ValueEnum)]
enum UnitArg {
    Record,
    Snippet,
}

#[derive(Args)]
struct AggregateArgs {
    #[arg(long, value_parser = parse_task)]
    task: Task,
    #[arg(long)]
    annotations: PathBuf,
    /// Corpus used to split scores by continuation source (tasks 1, 2).
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "population")]
    std: StdArg,
    #[arg(long, value_enum, default_value = "record")]
    unit: UnitArg,
    /// Write the full report as JSON.
    #[arg(long)]
    json_out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", error_chain(&e));
            ExitCode::from(2)
        }
    }
}

/// Join an error's causes, skipping any already spelled out by the message
/// before it.
fn error_chain(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Generate(a) => generate(a),
        Command::Stats(a) => stats(a),
        Command::BuildTodQa(a) => tod_qa(a),
        Command::BuildTransitionData(a) => transition_data(a),
        Command::ExportAmt(a) => export(a),
        Command::Aggregate(a) => aggregate(a),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    ))
}

fn generate(a: GenerateArgs) -> Result<()> {
    let mut config = load_config(&a.config)?;
    if let Some(mode) = a.mode {
        config.continuation.mode = mode;
    }
    if let Some(seed) = a.seed {
        config.master_seed = seed;
    }
    if let Some(out) = a.out {
        config.io.output_path = out;
    }
    let out = config.io.output_path.clone();
    let report = run_pipeline(config, a.n)?;
    println!(
        "wrote {} of {} dialogues to {}",
        report.written,
        report.requested,
        out.display()
    );
    for (reason, count) in &report.discarded {
        println!(
            "discarded {count} ({})",
            serde_json::to_value(reason)?.as_str().unwrap_or("")
        );
    }
    println!("manifest: {}", manifest_path(&out).display());
    Ok(())
}

fn stats(a: StatsArgs) -> Result<()> {
    let corpus = read_corpus_file(&a.corpus)?;
    let stats = compute_stats(&corpus);
    if a.json {
        println!("{}", serde_json::to_string_pretty(&stats.to_json())?);
    } else {
        print!("{}", stats.to_table());
    }
    Ok(())
}

fn tod_qa(a: TodQaArgs) -> Result<()> {
    if !(a.negative_ratio.is_finite() && a.negative_ratio >= 0.0) {
        bail!("--negative-ratio must be a non-negative number");
    }
    let corpus = load_sgd(
        &a.sgd,
        SgdLoadOptions {
            delexicalize: a.delexicalize,
        },
    )?;
    let catalog = match &a.catalog {
        Some(path) => load_catalog(path)?,
        None => {
            let mut labels = known_labels();
            if a.all_intents {
                labels.extend(
                    corpus
                        .intent_descriptions
                        .iter()
                        .filter(|(name, _)| KnownIntent::from_name(name).is_none())
                        .map(|(name, desc)| IntentLabel::new(name.as_str(), desc.as_str())),
                );
            }
            build_question_catalog(&labels)?
        }
    };
    let (dialogues, skipped) = restrict_to_catalog(corpus.dialogues, &catalog);
    let sampling = if a.no_downsample {
        NegativeSampling::Off
    } else {
        NegativeSampling::Ratio(a.negative_ratio)
    };
    let examples = build_tod_qa(&dialogues, &catalog, sampling, a.seed)?;
    let mut w = create(&a.out)?;
    for e in &examples {
        writeln!(w, "{}", e.to_json_line())?;
    }
    w.flush()?;
    let yes = examples
        .iter()
        .filter(|e| e.answer == bridgechat::backend::QaLabel::Yes)
        .count();
    println!(
        "{} examples ({yes} yes, {} no) from {} dialogues; {} dialogue(s) skipped for intents outside the catalog",
        examples.len(),
        examples.len() - yes,
        dialogues.len(),
        skipped.len()
    );
    Ok(())
}

fn transition_data(a: TransitionArgs) -> Result<()> {
    if a.corpus.is_none() && a.otters.is_none() {
        bail!("give --corpus, --otters or both");
    }
    let mut triples: Vec<TransitionTriple> = Vec::new();
    if let Some(path) = &a.corpus {
        let report = build_training_triples(&read_corpus_file(path)?);
        for (id, reason) in &report.skipped {
            log::warn!("skipped {id}: {reason}");
        }
        println!(
            "corpus: {} triples, {} skipped",
            report.triples.len(),
            report.skipped.len()
        );
        triples.extend(report.triples);
    }
    if let Some(path) = &a.otters {
        let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
        let report = adapt_otters(BufReader::new(file), a.otters_header)?;
        println!("otters: {report}");
        triples.extend(report.triples);
    }
    let mut w = create(&a.out)?;
    for t in &triples {
        writeln!(w, "{}", t.to_json_line())?;
    }
    w.flush()?;
    println!("wrote {} training pairs to {}", triples.len(), a.out.display());
    Ok(())
}

fn export(a: ExportArgs) -> Result<()> {
    let count = if a.task == Task::Detection {
        let file = File::open(&a.corpus).with_context(|| format!("cannot open {}", a.corpus.display()))?;
        let snippets = read_snippets(BufReader::new(file))?;
        export_amt(
            ExportInput::Snippets(&snippets),
            a.task,
            &a.out,
            a.guidelines.as_deref(),
        )?
    } else {
        let corpus = read_corpus_file(&a.corpus)?;
        export_amt(
            ExportInput::Dialogues(&corpus),
            a.task,
            &a.out,
            a.guidelines.as_deref(),
        )?
    };
    println!(
        "{count} rows written to {} (instructions: {})",
        a.out.display(),
        instructions_path(&a.out).display()
    );
    Ok(())
}

fn aggregate(a: AggregateArgs) -> Result<()> {
    let annotations = ingest_annotations(&a.annotations, a.task)?;
    let json = match &annotations {
        Annotations::Task3(records) => {
            let unit = match a.unit {
                UnitArg::Record => RankUnit::Record,
                UnitArg::Snippet => RankUnit::Snippet,
            };
            let mode = match a.std {
                StdArg::Population => StdMode::Population,
                StdArg::Sample => StdMode::Sample,
            };
            let report = aggregate_ranks(records, unit, mode);
            print!("{}", report.to_table());
            let snippets: BTreeSet<&str> = records.iter().map(|r| r.snippet_id.as_str()).collect();
            println!("{} records over {} snippets", records.len(), snippets.len());
            serde_json::to_value(&report)?
        }
        _ => {
            let report = aggregate_scores(&annotations).expect("score task");
            print!("{}", report.to_table());
            let mut value = serde_json::json!({ "scores": report });
            if let Some(path) = &a.corpus {
                let provenance: HashMap<String, Provenance> = read_corpus_file(path)?
                    .into_iter()
                    .map(|d| (d.id, d.provenance))
                    .collect();
                let split = compare_provenance(&report, &provenance);
                print!("{}", split.to_table());
                value["by_provenance"] = serde_json::to_value(&split)?;
            }
            value
        }
    };
    if let Some(path) = &a.json_out {
        fs::write(path, serde_json::to_string_pretty(&json)? + "\n")
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}
