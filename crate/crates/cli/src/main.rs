//! Command-line surface: train, encode/decode, evaluate, prune, classify,
//! diff, stats, and sweep.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on usage errors.
//! Thread count is controlled by `RAYON_NUM_THREADS`; everything else goes
//! through flags and config files. All commands are deterministic: identical
//! inputs produce bit-identical outputs.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use srcbpe::classifier;
use srcbpe::corpus::{load_corpus, Document, ExtensionMap};
use srcbpe::metrics;
use srcbpe::pruner::{self, PruneOrder};
use srcbpe::tokenizer::Tokenizer;
use srcbpe::trainer::{
    self, PriorityCriterion, SkipCriterion, TrainConfig, TrainOutcome, TrainStatus,
};
use srcbpe::TokenId;

#[derive(Parser)]
#[command(name = "srcbpe", version, about = "Source-attributed BPE tokenizer toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a tokenizer and write its merge history
    Train(TrainArgs),
    /// Encode bytes to whitespace-separated token ids
    Encode(EncodeArgs),
    /// Decode whitespace-separated token ids back to bytes
    Decode(DecodeArgs),
    /// Evaluate a tokenizer on a corpus
    Eval(EvalArgs),
    /// Prune a tokenizer and/or emit a compression curve
    Prune(PruneArgs),
    /// Classify tokens into rule-based categories
    Classify(ClassifyArgs),
    /// Count vocabulary differences between two tokenizers
    Diff(DiffArgs),
    /// Vocabulary statistics: name parts, three-digit tokens, merge trees
    Stats(StatsArgs),
    /// Train and evaluate a grid of criterion/threshold configurations
    Sweep(SweepArgs),
}

#[derive(Args)]
struct CorpusArgs {
    /// Corpus path: a JSONL file or a directory tree
    #[arg(long)]
    corpus: PathBuf,

    /// Extension map JSON for directory ingestion (defaults to the built-in
    /// code-language map)
    #[arg(long)]
    ext_map: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    corpus: CorpusArgs,

    /// Output tokenizer JSON path
    #[arg(long, default_value = "tokenizer.json")]
    out: PathBuf,

    /// Merge-history CSV path
    #[arg(long)]
    history: Option<PathBuf>,

    /// TOML config file; flags override its keys
    #[arg(long)]
    config: Option<PathBuf>,

    /// Priority criterion: f, f_l, f_log_r1, f_log_r, f_log_r1_l, f_log_r_l
    #[arg(long)]
    criterion: Option<String>,

    /// Skip merges present in fewer repositories
    #[arg(long)]
    min_repos: Option<u64>,

    /// Skip merges present in fewer languages
    #[arg(long)]
    min_langs: Option<u64>,

    /// Target vocabulary size
    #[arg(long)]
    vocab: Option<usize>,

    /// Reserved token literal (repeatable)
    #[arg(long = "reserved")]
    reserved: Vec<String>,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    tokenizer: PathBuf,

    /// Input file; stdin when omitted
    #[arg(long)]
    input: Option<PathBuf>,

    /// Recognise reserved token literals in the input
    #[arg(long)]
    parse_reserved: bool,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long)]
    tokenizer: PathBuf,

    /// Input file of whitespace-separated ids; stdin when omitted
    #[arg(long)]
    input: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    tokenizer: PathBuf,

    #[command(flatten)]
    corpus: CorpusArgs,

    /// Write the full report as JSON
    #[arg(long)]
    json: Option<PathBuf>,

    /// Write a flat CSV row
    #[arg(long)]
    csv: Option<PathBuf>,

    /// Write per-language rows as CSV
    #[arg(long)]
    per_language: Option<PathBuf>,
}

#[derive(Args)]
struct PruneArgs {
    #[arg(long)]
    tokenizer: PathBuf,

    /// Pruning order: reverse | score
    #[arg(long, default_value = "reverse")]
    order: String,

    /// token_id,score CSV (required for --order score)
    #[arg(long)]
    scores: Option<PathBuf>,

    /// Prune exactly this many tokens and write the result to --out
    #[arg(long)]
    count: Option<usize>,

    /// Output path for the pruned tokenizer
    #[arg(long)]
    out: Option<PathBuf>,

    /// Removal-order log CSV (score order only)
    #[arg(long)]
    removal_log: Option<PathBuf>,

    /// Comma-separated removed-token checkpoints for a compression curve
    #[arg(long, value_delimiter = ',')]
    checkpoints: Vec<usize>,

    /// Evaluation corpus for the curve
    #[arg(long)]
    corpus: Option<PathBuf>,

    #[arg(long)]
    ext_map: Option<PathBuf>,

    /// Curve CSV output path
    #[arg(long, default_value = "prune_curve.csv")]
    curve: PathBuf,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Newline-delimited escaped token strings
    #[arg(long)]
    tokens: Option<PathBuf>,

    /// Tokenizer whose vocabulary supplies the tokens
    #[arg(long)]
    tokenizer: Option<PathBuf>,

    /// Whitespace-separated token ids (with --tokenizer); whole vocabulary
    /// when omitted
    #[arg(long)]
    ids: Option<PathBuf>,

    #[arg(long)]
    json: Option<PathBuf>,

    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct DiffArgs {
    a: PathBuf,
    b: PathBuf,

    /// Write the full diff (both one-sided token lists) as JSON
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    tokenizer: PathBuf,

    /// Name-part histogram CSV output
    #[arg(long)]
    name_parts: Option<PathBuf>,

    /// Token-frequency CSV output (needs --corpus)
    #[arg(long)]
    frequencies: Option<PathBuf>,

    #[arg(long)]
    corpus: Option<PathBuf>,

    #[arg(long)]
    ext_map: Option<PathBuf>,

    /// Render the merge tree of this token id
    #[arg(long)]
    merge_tree: Option<TokenId>,

    /// Levels of the merge tree to expand
    #[arg(long, default_value_t = 6)]
    depth: usize,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep TOML config
    #[arg(long)]
    config: PathBuf,

    /// Output directory for tokenizers, histories and the combined report
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<srcbpe::Error> for CliError {
    fn from(e: srcbpe::Error) -> Self {
        match e {
            srcbpe::Error::Config(msg) => CliError::Usage(msg),
            other => CliError::Runtime(other.into()),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> CliResult {
    match command {
        Command::Train(args) => cmd_train(args),
        Command::Encode(args) => cmd_encode(args),
        Command::Decode(args) => cmd_decode(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Prune(args) => cmd_prune(args),
        Command::Classify(args) => cmd_classify(args),
        Command::Diff(args) => cmd_diff(args),
        Command::Stats(args) => cmd_stats(args),
        Command::Sweep(args) => cmd_sweep(args),
    }
}

fn load_corpus_checked(path: &Path, ext_map: Option<&PathBuf>) -> CliResult<Vec<Document>> {
    if !path.exists() {
        return Err(usage(format!("corpus not found: {}", path.display())));
    }
    let map = match ext_map {
        Some(p) => ExtensionMap::load(p)?,
        None => ExtensionMap::default(),
    };
    let docs = load_corpus(path, &map)?;
    log::info!("loaded {} documents from {}", docs.len(), path.display());
    Ok(docs)
}

fn load_tokenizer(path: &Path) -> CliResult<Tokenizer> {
    if !path.exists() {
        return Err(usage(format!("tokenizer not found: {}", path.display())));
    }
    Ok(Tokenizer::load(path)?)
}

/// Keys of the train TOML config; flags override file values.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainFileConfig {
    vocab_size: Option<usize>,
    criterion: Option<String>,
    min_repos: Option<u64>,
    min_langs: Option<u64>,
    reserved_tokens: Option<Vec<String>>,
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| usage(format!("invalid config {}: {e}", path.display())))
}

fn resolve_train_config(args: &TrainArgs) -> CliResult<TrainConfig> {
    let file: TrainFileConfig = match &args.config {
        Some(path) => read_toml(path)?,
        None => TrainFileConfig::default(),
    };
    let criterion = match args.criterion.as_deref().or(file.criterion.as_deref()) {
        Some(name) => name.parse::<PriorityCriterion>()?,
        None => PriorityCriterion::F,
    };
    let cfg = TrainConfig {
        vocab_size: args.vocab.or(file.vocab_size).unwrap_or(32768),
        criterion,
        skip: SkipCriterion {
            min_repos: args.min_repos.or(file.min_repos).unwrap_or(1),
            min_langs: args.min_langs.or(file.min_langs).unwrap_or(1),
        },
        reserved_tokens: if args.reserved.is_empty() {
            file.reserved_tokens.unwrap_or_default()
        } else {
            args.reserved.clone()
        },
        pretokenizer: Default::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn train_once(docs: &[Document], cfg: &TrainConfig) -> CliResult<TrainOutcome> {
    let outcome = trainer::train(docs, cfg)?;
    log::info!(
        "training finished: {} executed, {} skipped, vocab {}{}",
        outcome.executed_steps(),
        outcome.skipped_steps(),
        outcome.tokenizer.vocab_size(),
        match outcome.status {
            TrainStatus::Completed => "",
            TrainStatus::QueueExhausted => " (queue exhausted)",
        }
    );
    Ok(outcome)
}

fn cmd_train(args: TrainArgs) -> CliResult {
    let cfg = resolve_train_config(&args)?;
    let docs = load_corpus_checked(&args.corpus.corpus, args.corpus.ext_map.as_ref())?;
    let outcome = train_once(&docs, &cfg)?;
    outcome.tokenizer.save(&args.out)?;
    println!(
        "wrote tokenizer with vocab {} ({} merges) to {}",
        outcome.tokenizer.vocab_size(),
        outcome.tokenizer.merges().len(),
        args.out.display()
    );
    if let Some(history) = &args.history {
        let file = fs::File::create(history)
            .with_context(|| format!("cannot create {}", history.display()))
            .map_err(CliError::Runtime)?;
        trainer::export_history(&outcome.tokenizer, &outcome.history, file)?;
        println!(
            "wrote {} history records to {}",
            outcome.history.len(),
            history.display()
        );
    }
    Ok(())
}

fn read_input(input: Option<&PathBuf>) -> CliResult<Vec<u8>> {
    match input {
        Some(path) => {
            fs::read(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
        }
        None => {
            let mut buf = Vec::new();
            std::io::stdin()
                .read_to_end(&mut buf)
                .context("reading stdin")
                .map_err(CliError::Runtime)?;
            Ok(buf)
        }
    }
}

fn cmd_encode(args: EncodeArgs) -> CliResult {
    let tok = load_tokenizer(&args.tokenizer)?;
    let text = read_input(args.input.as_ref())?;
    let ids = if args.parse_reserved {
        tok.encode_with_specials(&text)
    } else {
        tok.encode(&text)
    };
    let mut out = String::with_capacity(ids.len() * 6);
    for (i, id) in ids.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&id.to_string());
    }
    println!("{out}");
    Ok(())
}

fn cmd_decode(args: DecodeArgs) -> CliResult {
    let tok = load_tokenizer(&args.tokenizer)?;
    let text = read_input(args.input.as_ref())?;
    let text = String::from_utf8(text).map_err(|_| usage("token id input must be text"))?;
    let ids = text
        .split_whitespace()
        .map(|part| {
            part.parse::<TokenId>()
                .map_err(|_| usage(format!("invalid token id {part:?}")))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let bytes = tok.decode(&ids)?;
    std::io::stdout()
        .write_all(&bytes)
        .context("writing stdout")
        .map_err(CliError::Runtime)?;
    Ok(())
}

fn write_report_csv(report: &metrics::MetricsReport, path: &Path) -> CliResult {
    let mut csv = csv::Writer::from_path(path)
        .with_context(|| format!("cannot create {}", path.display()))
        .map_err(CliError::Runtime)?;
    let err = |e: csv::Error| CliError::Runtime(e.into());
    csv.write_record(metrics::MetricsReport::CSV_HEADER).map_err(err)?;
    csv.write_record(report.csv_row()).map_err(err)?;
    csv.flush().context("flushing csv").map_err(CliError::Runtime)?;
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> CliResult {
    let tok = load_tokenizer(&args.tokenizer)?;
    let docs = load_corpus_checked(&args.corpus.corpus, args.corpus.ext_map.as_ref())?;
    let report = metrics::evaluate(&tok, &docs)?;
    println!(
        "compression_rate={:.4} coverage={} mtl={:.3} gini={:.4} three_digit={}",
        report.compression_rate,
        report.coverage,
        report.mean_token_length,
        report.gini,
        report.three_digit_count
    );
    if let Some(path) = &args.json {
        let json =
            serde_json::to_string_pretty(&report).context("serializing report")?;
        fs::write(path, json)
            .with_context(|| format!("cannot write {}", path.display()))
            .map_err(CliError::Runtime)?;
    }
    if let Some(path) = &args.csv {
        write_report_csv(&report, path)?;
    }
    if let Some(path) = &args.per_language {
        let mut csv = csv::Writer::from_path(path)
            .with_context(|| format!("cannot create {}", path.display()))
            .map_err(CliError::Runtime)?;
        let err = |e: csv::Error| CliError::Runtime(e.into());
        csv.write_record(["lang", "bytes", "tokens", "compression_rate", "coverage"])
            .map_err(err)?;
        for (lang, m) in &report.per_language {
            csv.write_record([
                lang.clone(),
                m.bytes.to_string(),
                m.tokens.to_string(),
                m.compression_rate.to_string(),
                m.coverage.to_string(),
            ])
            .map_err(err)?;
        }
        csv.flush().context("flushing csv").map_err(CliError::Runtime)?;
    }
    Ok(())
}

fn cmd_prune(args: PruneArgs) -> CliResult {
    let tok = load_tokenizer(&args.tokenizer)?;
    let order = match args.order.as_str() {
        "reverse" => PruneOrder::ReverseMergeOrder,
        "score" => {
            let path = args
                .scores
                .as_ref()
                .ok_or_else(|| usage("--order score requires --scores"))?;
            PruneOrder::ScoreOrder(pruner::read_scores_csv(path)?)
        }
        other => return Err(usage(format!("unknown prune order {other:?}"))),
    };

    if let Some(count) = args.count {
        let out = args
            .out
            .as_ref()
            .ok_or_else(|| usage("--count requires --out"))?;
        let pruned = match &order {
            PruneOrder::ReverseMergeOrder => pruner::prune_reverse(&tok, count)?,
            PruneOrder::ScoreOrder(scores) => {
                let (pruned, removals) = pruner::prune_by_score(&tok, scores, count)?;
                if let Some(log_path) = &args.removal_log {
                    let mut csv = csv::Writer::from_path(log_path)
                        .with_context(|| format!("cannot create {}", log_path.display()))
                        .map_err(CliError::Runtime)?;
                    let err = |e: csv::Error| CliError::Runtime(e.into());
                    csv.write_record(["order", "token_id", "token", "score"]).map_err(err)?;
                    for (i, removal) in removals.iter().enumerate() {
                        csv.write_record([
                            i.to_string(),
                            removal.token_id.to_string(),
                            srcbpe::escape::escape_bytes(&removal.bytes),
                            removal.score.to_string(),
                        ])
                        .map_err(err)?;
                    }
                    csv.flush().context("flushing csv").map_err(CliError::Runtime)?;
                }
                pruned
            }
        };
        pruned.save(out)?;
        println!(
            "pruned {} tokens; wrote vocab {} to {}",
            count,
            pruned.vocab_size(),
            out.display()
        );
    }

    if !args.checkpoints.is_empty() {
        let corpus = args
            .corpus
            .as_ref()
            .ok_or_else(|| usage("--checkpoints requires --corpus"))?;
        let docs = load_corpus_checked(corpus, args.ext_map.as_ref())?;
        let points = pruner::prune_curve(&tok, &docs, &order, &args.checkpoints)?;
        let file = fs::File::create(&args.curve)
            .with_context(|| format!("cannot create {}", args.curve.display()))
            .map_err(CliError::Runtime)?;
        pruner::write_curve_csv(&points, file)?;
        println!(
            "wrote {} curve points to {}",
            points.len(),
            args.curve.display()
        );
    } else if args.count.is_none() {
        return Err(usage("nothing to do: pass --count and/or --checkpoints"));
    }
    Ok(())
}

fn cmd_classify(args: ClassifyArgs) -> CliResult {
    let tokens: Vec<Vec<u8>> = match (&args.tokens, &args.tokenizer) {
        (Some(path), None) => {
            let text = fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
            text.lines()
                .filter(|l| !l.is_empty())
                .map(srcbpe::escape::unescape_bytes)
                .collect::<srcbpe::Result<_>>()?
        }
        (None, Some(tok_path)) => {
            let tok = load_tokenizer(tok_path)?;
            let ids: Vec<TokenId> = match &args.ids {
                Some(path) => {
                    let text = fs::read_to_string(path)
                        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
                    text.split_whitespace()
                        .map(|part| {
                            part.parse::<TokenId>()
                                .map_err(|_| usage(format!("invalid token id {part:?}")))
                        })
                        .collect::<CliResult<_>>()?
                }
                None => (0..tok.vocab_size() as TokenId).collect(),
            };
            ids.iter()
                .map(|&id| Ok(tok.token_bytes(id)?.to_vec()))
                .collect::<srcbpe::Result<_>>()?
        }
        _ => return Err(usage("pass exactly one of --tokens or --tokenizer")),
    };

    let report = classifier::classify_report(tokens.iter().map(|t| t.as_slice()));
    for row in &report.rows {
        println!("{:<45} {:>8} ({:.1}%)", row.label, row.count, row.percentage);
    }
    if let Some(path) = &args.json {
        let json = serde_json::to_string_pretty(&report).context("serializing report")?;
        fs::write(path, json)
            .with_context(|| format!("cannot write {}", path.display()))
            .map_err(CliError::Runtime)?;
    }
    if let Some(path) = &args.csv {
        let mut csv = csv::Writer::from_path(path)
            .with_context(|| format!("cannot create {}", path.display()))
            .map_err(CliError::Runtime)?;
        let err = |e: csv::Error| CliError::Runtime(e.into());
        csv.write_record(["category", "count", "percentage"]).map_err(err)?;
        for row in &report.rows {
            csv.write_record([
                row.label.to_string(),
                row.count.to_string(),
                row.percentage.to_string(),
            ])
            .map_err(err)?;
        }
        csv.flush().context("flushing csv").map_err(CliError::Runtime)?;
    }
    Ok(())
}

fn cmd_diff(args: DiffArgs) -> CliResult {
    let a = load_tokenizer(&args.a)?;
    let b = load_tokenizer(&args.b)?;
    let diff = metrics::vocab_diff(&a, &b);
    println!("{}", diff.count);
    if let Some(path) = &args.json {
        let json = serde_json::to_string_pretty(&diff).context("serializing diff")?;
        fs::write(path, json)
            .with_context(|| format!("cannot write {}", path.display()))
            .map_err(CliError::Runtime)?;
    }
    Ok(())
}

fn cmd_stats(args: StatsArgs) -> CliResult {
    let tok = load_tokenizer(&args.tokenizer)?;
    println!(
        "vocab_size={} merges={} reserved={} three_digit={}",
        tok.vocab_size(),
        tok.merges().len(),
        tok.reserved_tokens().len(),
        metrics::count_three_digit(&tok)
    );

    let hist = metrics::name_part_histogram(&tok);
    let total_camel: usize = hist.camel.values().sum();
    let total_snake: usize = hist.snake.values().sum();
    println!("camel_tokens={total_camel} snake_tokens={total_snake}");
    if let Some(path) = &args.name_parts {
        let mut csv = csv::Writer::from_path(path)
            .with_context(|| format!("cannot create {}", path.display()))
            .map_err(CliError::Runtime)?;
        let err = |e: csv::Error| CliError::Runtime(e.into());
        csv.write_record(["style", "parts", "tokens"]).map_err(err)?;
        for (style, map) in [("camel", &hist.camel), ("snake", &hist.snake)] {
            for (parts, tokens) in map {
                csv.write_record([style.to_string(), parts.to_string(), tokens.to_string()])
                    .map_err(err)?;
            }
        }
        csv.flush().context("flushing csv").map_err(CliError::Runtime)?;
    }

    if let Some(path) = &args.frequencies {
        let corpus = args
            .corpus
            .as_ref()
            .ok_or_else(|| usage("--frequencies requires --corpus"))?;
        let docs = load_corpus_checked(corpus, args.ext_map.as_ref())?;
        let rows = metrics::token_frequencies(&tok, &docs)?;
        let file = fs::File::create(path)
            .with_context(|| format!("cannot create {}", path.display()))
            .map_err(CliError::Runtime)?;
        metrics::write_frequencies_csv(&rows, file)?;
        println!("wrote {} frequency rows to {}", rows.len(), path.display());
    }

    if let Some(id) = args.merge_tree {
        println!("{}", tok.render_merge_tree(id, args.depth)?);
    }
    Ok(())
}

/// Sweep config: global training settings plus one cell per grid entry.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepConfig {
    corpus: PathBuf,
    eval_corpus: Option<PathBuf>,
    ext_map: Option<PathBuf>,
    out_dir: Option<PathBuf>,
    vocab_size: usize,
    #[serde(default)]
    reserved_tokens: Vec<String>,
    #[serde(default)]
    cells: Vec<SweepCell>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepCell {
    name: Option<String>,
    criterion: String,
    #[serde(default)]
    min_repos: Option<u64>,
    #[serde(default)]
    min_langs: Option<u64>,
}

fn cmd_sweep(args: SweepArgs) -> CliResult {
    let sweep: SweepConfig = read_toml(&args.config)?;
    if sweep.cells.is_empty() {
        return Err(usage("empty sweep: config lists no cells"));
    }
    let out_dir = args
        .out_dir
        .or(sweep.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("sweep_out"));
    fs::create_dir_all(&out_dir)
        .with_context(|| format!("cannot create {}", out_dir.display()))
        .map_err(CliError::Runtime)?;

    let train_docs = load_corpus_checked(&sweep.corpus, sweep.ext_map.as_ref())?;
    let eval_docs = match &sweep.eval_corpus {
        Some(path) => load_corpus_checked(path, sweep.ext_map.as_ref())?,
        None => train_docs.clone(),
    };

    let mut csv = csv::Writer::from_path(out_dir.join("sweep.csv"))
        .context("cannot create sweep.csv")
        .map_err(CliError::Runtime)?;
    let err = |e: csv::Error| CliError::Runtime(e.into());
    let mut header = vec![
        "name".to_string(),
        "criterion".to_string(),
        "min_repos".to_string(),
        "min_langs".to_string(),
        "status".to_string(),
    ];
    header.extend(metrics::MetricsReport::CSV_HEADER.iter().map(|s| s.to_string()));
    csv.write_record(&header).map_err(err)?;

    let mut failures = 0usize;
    for (idx, cell) in sweep.cells.iter().enumerate() {
        let name = cell
            .name
            .clone()
            .unwrap_or_else(|| format!("cell{idx:02}"));
        let result = run_sweep_cell(&sweep, cell, &train_docs, &eval_docs, &out_dir, &name);
        let mut row = vec![
            name.clone(),
            cell.criterion.clone(),
            cell.min_repos.unwrap_or(1).to_string(),
            cell.min_langs.unwrap_or(1).to_string(),
        ];
        match result {
            Ok(report) => {
                row.push("ok".to_string());
                row.extend(report.csv_row());
                log::info!("cell {name}: ok");
            }
            Err(e) => {
                failures += 1;
                let msg = match e {
                    CliError::Usage(m) => m,
                    CliError::Runtime(e) => format!("{e:#}"),
                };
                log::warn!("cell {name} failed: {msg}");
                row.push(format!("failed: {msg}"));
                row.extend(std::iter::repeat_n(String::new(), 10));
            }
        }
        csv.write_record(&row).map_err(err)?;
    }
    csv.flush().context("flushing sweep.csv").map_err(CliError::Runtime)?;
    println!(
        "sweep finished: {} cells, {} failed; report at {}",
        sweep.cells.len(),
        failures,
        out_dir.join("sweep.csv").display()
    );
    if failures > 0 {
        return Err(CliError::Runtime(anyhow::anyhow!(
            "{failures} sweep cell(s) failed"
        )));
    }
    Ok(())
}

fn run_sweep_cell(
    sweep: &SweepConfig,
    cell: &SweepCell,
    train_docs: &[Document],
    eval_docs: &[Document],
    out_dir: &Path,
    name: &str,
) -> CliResult<metrics::MetricsReport> {
    let cfg = TrainConfig {
        vocab_size: sweep.vocab_size,
        criterion: cell.criterion.parse::<PriorityCriterion>()?,
        skip: SkipCriterion {
            min_repos: cell.min_repos.unwrap_or(1),
            min_langs: cell.min_langs.unwrap_or(1),
        },
        reserved_tokens: sweep.reserved_tokens.clone(),
        pretokenizer: Default::default(),
    };
    cfg.validate()?;
    let outcome = train_once(train_docs, &cfg)?;
    outcome.tokenizer.save(&out_dir.join(format!("{name}.json")))?;
    let history = fs::File::create(out_dir.join(format!("{name}_history.csv")))
        .context("cannot create history file")
        .map_err(CliError::Runtime)?;
    trainer::export_history(&outcome.tokenizer, &outcome.history, history)?;
    let mut report = metrics::evaluate(&outcome.tokenizer, eval_docs)?;
    report.set_steps(outcome.executed_steps(), outcome.skipped_steps());
    Ok(report)
}
