//! Command-line front end. Exit codes: 0 success, 1 domain error, 2 usage
//! error. Summaries go to stdout, diagnostics to stderr, machine-readable
//! results to files in the output directory.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::annotation::{render_error_tally, render_relevance, tally, validate_annotations, AnnotationSet};
use crate::corpus::{corpus_stats, load_corpus};
use crate::experiment::{
    aggregate, render_table, run_experiment, write_aggregates, ExperimentConfig, ExperimentError, RunLedger,
    VariantSelection,
};
use crate::llm::BackendKind;
use crate::prompt::{generate_matrix, render_prompt, PromptPack};
use crate::report::{best_variant, render_study_report, report_texts, ReportSection, StudyInputs};
use crate::rouge::{score_texts, TokenizerOptions};
use crate::serve::{serve, ServeConfig};

#[derive(Debug, Parser)]
#[command(name = "soapbench", version, about = "Prompt-variant experiments for SOAP report generation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Corpus inspection.
    #[command(subcommand)]
    Corpus(CorpusCommand),
    /// Prompt matrix listing and rendering.
    #[command(subcommand)]
    Prompt(PromptCommand),
    /// Run the experiment, then aggregate and print the score table.
    Run(RunArgs),
    /// Re-aggregate an existing ledger.
    Aggregate(LedgerArgs),
    /// ROUGE-1 and ROUGE-L between two text files.
    Score(ScoreArgs),
    /// Validate and tally annotation files.
    Tally(TallyArgs),
    /// Combined study report.
    Report(ReportArgs),
    /// Annotation API and UI assets on a local port.
    Serve(ServeArgs),
}

#[derive(Debug, Subcommand)]
pub enum CorpusCommand {
    /// Word-count statistics of transcripts and references.
    Stats(CorpusArgs),
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// Corpus directory; taken from --config when absent.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Experiment config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum PromptCommand {
    /// List variant ids in matrix order.
    Matrix(PromptArgs),
    /// Print the prompt one variant sends for one transcript.
    Render(RenderArgs),
}

#[derive(Debug, Args)]
pub struct PromptArgs {
    /// Experiment config file (corpus and prompt pack).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Corpus directory, overriding the config.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Prompt-pack TOML, overriding the config.
    #[arg(long)]
    pub pack: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[command(flatten)]
    pub prompt: PromptArgs,
    /// Variant id, e.g. two-shot+a+b+c+d.
    #[arg(long)]
    pub variant: String,
    /// Transcript id.
    #[arg(long)]
    pub transcript: String,
    /// Print the chat messages as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BackendArg {
    Mock,
    Remote,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Experiment config file.
    #[arg(long)]
    pub config: PathBuf,
    /// Backend kind, overriding the config.
    #[arg(long, value_enum)]
    pub backend: Option<BackendArg>,
    /// Comma-separated variant ids, or "all".
    #[arg(long)]
    pub variants: Option<String>,
    /// Runs per variant and transcript.
    #[arg(long)]
    pub repeats: Option<u32>,
    /// Concurrent backend requests.
    #[arg(long)]
    pub concurrency: Option<usize>,
    /// Output directory for the ledger, aggregates and tables.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Mock backend seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Remote endpoint base URL.
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Model name sent to the remote endpoint.
    #[arg(long)]
    pub model: Option<String>,
}

#[derive(Debug, Args)]
pub struct LedgerArgs {
    /// Experiment config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory holding runs.jsonl, overriding the config.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Candidate (generated) text file.
    pub candidate: PathBuf,
    /// Reference text file.
    pub reference: PathBuf,
    /// Keep punctuation characters as tokens.
    #[arg(long)]
    pub keep_punctuation: bool,
    /// Print JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct TallyArgs {
    /// Annotation file or directory of annotation files.
    pub annotations: PathBuf,
    /// Experiment config; enables span checks against the ledger and corpus.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Ledger directory, overriding the config.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Variant whose reports were annotated; defaults to the best-scoring one.
    #[arg(long)]
    pub variant: Option<String>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Experiment config file.
    #[arg(long)]
    pub config: PathBuf,
    /// Ledger directory, overriding the config.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Annotation file or directory; defaults to <output_dir>/annotations.
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    /// Only these sections: wordcount, scores, errors, relevance.
    #[arg(long, value_delimiter = ',')]
    pub section: Vec<ReportSection>,
    /// Variant for the word-count table; defaults to the best-scoring one.
    #[arg(long)]
    pub variant: Option<String>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Experiment config file.
    #[arg(long)]
    pub config: PathBuf,
    /// Ledger directory, overriding the config.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Address to bind.
    #[arg(long, default_value = "127.0.0.1:8765")]
    pub bind: SocketAddr,
    /// Directory of built UI assets.
    #[arg(long)]
    pub assets: Option<PathBuf>,
    /// Where annotation files are written; defaults to <output_dir>/annotations.
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    /// Variant shown by default; defaults to the best-scoring one.
    #[arg(long)]
    pub variant: Option<String>,
}

impl clap::ValueEnum for ReportSection {
    fn value_variants<'a>() -> &'a [Self] {
        &ReportSection::ALL
    }

    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(clap::builder::PossibleValue::new(self.name()))
    }
}

/// A failed command: its exit code and the message for stderr.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn domain(message: impl ToString) -> Self {
        Self {
            code: 1,
            message: message.to_string(),
        }
    }

    fn usage(message: impl ToString) -> Self {
        Self {
            code: 2,
            message: message.to_string(),
        }
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::UnknownVariants { .. } => Failure::usage(e),
            other => Failure::domain(other),
        }
    }
}

type Outcome = Result<(), Failure>;

fn domain<E: ToString>(e: E) -> Failure {
    Failure::domain(e)
}

fn load_config(path: &Path) -> Result<ExperimentConfig, Failure> {
    if !path.exists() {
        return Err(Failure::domain(format!("config file {} not found", path.display())));
    }
    Ok(ExperimentConfig::load(path)?)
}

fn optional_config(path: Option<&PathBuf>) -> Result<ExperimentConfig, Failure> {
    match path {
        Some(p) => load_config(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn corpus_stats_cmd(args: &CorpusArgs) -> Outcome {
    let root = match (&args.corpus, &args.config) {
        (Some(root), _) => root.clone(),
        (None, Some(cfg)) => load_config(cfg)?.corpus.root,
        (None, None) => return Err(Failure::usage("pass --corpus or --config")),
    };
    let corpus = load_corpus(&root).map_err(domain)?;
    let s = corpus_stats(&corpus).map_err(domain)?;
    println!(
        "{} transcripts, {} references, {} shots",
        corpus.transcripts.len(),
        corpus.references.len(),
        corpus.shots.len()
    );
    println!(
        "transcript words: mean {:.1}, sd {:.1}, min {}, max {}",
        s.transcript_mean, s.transcript_sd, s.transcript_min, s.transcript_max
    );
    println!(
        "reference words:  mean {:.1}, sd {:.1}, min {}, max {}",
        s.reference_mean, s.reference_sd, s.reference_min, s.reference_max
    );
    Ok(())
}

fn prompt_setup(args: &PromptArgs) -> Result<(crate::corpus::Corpus, PromptPack), Failure> {
    let mut config = optional_config(args.config.as_ref())?;
    if let Some(root) = &args.corpus {
        config.corpus.root = root.clone();
    }
    if let Some(pack) = &args.pack {
        config.prompt.pack = Some(pack.clone());
    }
    if args.config.is_none() && args.corpus.is_none() {
        return Err(Failure::usage("pass --config or --corpus"));
    }
    Ok((config.load_corpus()?, config.load_pack()?))
}

fn prompt_matrix_cmd(args: &PromptArgs) -> Outcome {
    let (corpus, pack) = prompt_setup(args)?;
    for v in generate_matrix(&pack, &corpus.shots).map_err(domain)? {
        println!("{}", v.id);
    }
    Ok(())
}

fn prompt_render_cmd(args: &RenderArgs) -> Outcome {
    let (corpus, pack) = prompt_setup(&args.prompt)?;
    let matrix = generate_matrix(&pack, &corpus.shots).map_err(domain)?;
    let valid: Vec<String> = matrix.iter().map(|v| v.id.clone()).collect();
    let variant = matrix
        .into_iter()
        .find(|v| v.id == args.variant)
        .ok_or_else(|| ExperimentError::UnknownVariants {
            unknown: vec![args.variant.clone()],
            valid,
        })?;
    let transcript = corpus
        .transcript(&args.transcript)
        .ok_or_else(|| Failure::usage(format!("unknown transcript {}", args.transcript)))?;
    let prompt = render_prompt(&variant, transcript);
    if args.json {
        println!("{}", serde_json::to_string_pretty(&prompt.messages).map_err(domain)?);
    } else {
        println!("{}", prompt.to_text());
    }
    Ok(())
}

fn apply_run_overrides(config: &mut ExperimentConfig, args: &RunArgs) {
    if let Some(b) = args.backend {
        config.backend.kind = match b {
            BackendArg::Mock => BackendKind::Mock,
            BackendArg::Remote => BackendKind::Remote,
        };
    }
    if let Some(v) = &args.variants {
        config.run.variants = if v == "all" {
            VariantSelection::All
        } else {
            VariantSelection::Ids(v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
        };
    }
    if let Some(r) = args.repeats {
        config.run.repeats = r;
    }
    if let Some(c) = args.concurrency {
        config.run.concurrency = c;
    }
    if let Some(d) = &args.output_dir {
        config.run.output_dir = d.clone();
    }
    if let Some(s) = args.seed {
        config.backend.mock_seed = s;
    }
    if let Some(e) = &args.endpoint {
        config.backend.endpoint = Some(e.clone());
    }
    if let Some(m) = &args.model {
        config.backend.model = m.clone();
    }
}

async fn run_cmd(args: &RunArgs) -> Outcome {
    let mut config = load_config(&args.config)?;
    apply_run_overrides(&mut config, args);
    let outcome = run_experiment(&config).await?;
    let report = aggregate(&outcome.ledger)?;
    write_aggregates(&config.run.output_dir, &report)?;
    print!("{}", render_table(&report));
    println!(
        "{} new runs, {} reused, {} failed, {} backend calls; ledger in {}",
        outcome.new_records,
        outcome.skipped,
        outcome.failures.len(),
        outcome.backend_calls,
        config.run.output_dir.display()
    );
    if !outcome.stale.is_empty() {
        eprintln!(
            "warning: {} stored runs were produced by a different prompt; delete the ledger to regenerate them",
            outcome.stale.len()
        );
    }
    if !outcome.failures.is_empty() {
        return Err(Failure::domain(format!(
            "{} of {} runs failed; rerun to retry them",
            outcome.failures.len(),
            outcome.failures.len() + outcome.new_records
        )));
    }
    Ok(())
}

fn ledger_dir(config: &ExperimentConfig, override_dir: Option<&PathBuf>) -> PathBuf {
    override_dir.cloned().unwrap_or_else(|| config.run.output_dir.clone())
}

fn load_ledger(dir: &Path) -> Result<RunLedger, Failure> {
    if !dir.join(crate::experiment::RUNS_FILE).exists() {
        return Err(Failure::domain(format!("no ledger in {}", dir.display())));
    }
    Ok(RunLedger::load(dir)?)
}

fn aggregate_cmd(args: &LedgerArgs) -> Outcome {
    if args.config.is_none() && args.output_dir.is_none() {
        return Err(Failure::usage("pass --config or --output-dir"));
    }
    let config = optional_config(args.config.as_ref())?;
    let dir = ledger_dir(&config, args.output_dir.as_ref());
    let ledger = load_ledger(&dir)?;
    let report = aggregate(&ledger)?;
    write_aggregates(&dir, &report)?;
    print!("{}", render_table(&report));
    Ok(())
}

fn score_cmd(args: &ScoreArgs) -> Outcome {
    let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| Failure::domain(format!("{}: {e}", p.display())));
    let candidate = read(&args.candidate)?;
    let reference = read(&args.reference)?;
    let options = TokenizerOptions {
        keep_punctuation: args.keep_punctuation,
    };
    let s = score_texts(&candidate, &reference, &options);
    if args.json {
        println!("{}", serde_json::to_string_pretty(&s).map_err(domain)?);
    } else {
        println!("{:<8}  {:>9}  {:>9}  {:>9}", "metric", "precision", "recall", "f1");
        for (name, r) in [("ROUGE-1", s.rouge1), ("ROUGE-L", s.rouge_l)] {
            println!("{name:<8}  {:>9.4}  {:>9.4}  {:>9.4}", r.precision, r.recall, r.f1);
        }
    }
    Ok(())
}

/// Picks the requested variant, or the best-scoring one in the ledger.
fn choose_variant(ledger: &RunLedger, requested: Option<&String>) -> Result<String, Failure> {
    if let Some(v) = requested {
        return Ok(v.clone());
    }
    let report = aggregate(ledger)?;
    Ok(best_variant(&report).unwrap_or_default().to_string())
}

fn tally_cmd(args: &TallyArgs) -> Outcome {
    if !args.annotations.exists() {
        return Err(Failure::domain(format!("{} not found", args.annotations.display())));
    }
    let set = AnnotationSet::load(&args.annotations).map_err(domain)?;
    if let Some(cfg) = &args.config {
        let config = load_config(cfg)?;
        let corpus = config.load_corpus()?;
        let ledger = load_ledger(&ledger_dir(&config, args.output_dir.as_ref()))?;
        let variant = choose_variant(&ledger, args.variant.as_ref())?;
        let violations = validate_annotations(&set, &report_texts(&ledger, &corpus, &variant));
        if !violations.is_empty() {
            for v in &violations {
                eprintln!("{v}");
            }
            return Err(Failure::domain(format!("{} annotation violations", violations.len())));
        }
        let t = tally(&set, &report_texts(&ledger, &corpus, &variant)).map_err(domain)?;
        print!("{}", render_error_tally(&t.errors));
        println!(
            "\nWord categories: identical {}, paraphrased {}, additional {}, unreviewed {}",
            t.words.identical, t.words.paraphrased, t.words.additional, t.words.unreviewed
        );
        print!("\n{}", render_relevance(&t.relevance));
    } else {
        let t = tally(&set, &Default::default()).map_err(domain)?;
        print!("{}", render_error_tally(&t.errors));
        print!("\n{}", render_relevance(&t.relevance));
    }
    Ok(())
}

fn report_cmd(args: &ReportArgs) -> Outcome {
    let config = load_config(&args.config)?;
    let dir = ledger_dir(&config, args.output_dir.as_ref());
    let corpus = config.load_corpus()?;
    let ledger = load_ledger(&dir)?;
    let aggregates = aggregate(&ledger)?;
    let variant = match &args.variant {
        Some(v) => v.clone(),
        None => best_variant(&aggregates).unwrap_or_default().to_string(),
    };
    let annotations_path = args.annotations.clone().unwrap_or_else(|| dir.join("annotations"));
    let annotations = if annotations_path.exists() {
        Some(AnnotationSet::load(&annotations_path).map_err(domain)?)
    } else if args.annotations.is_some() {
        return Err(Failure::domain(format!("{} not found", annotations_path.display())));
    } else {
        None
    };
    let inputs = StudyInputs {
        corpus: &corpus,
        ledger: &ledger,
        aggregates: &aggregates,
        variant_id: &variant,
        annotations: annotations.as_ref(),
    };
    print!("{}", render_study_report(&inputs, &args.section).map_err(domain)?);
    Ok(())
}

async fn serve_cmd(args: &ServeArgs) -> Outcome {
    let config = load_config(&args.config)?;
    let dir = ledger_dir(&config, args.output_dir.as_ref());
    let corpus = config.load_corpus()?;
    let ledger = load_ledger(&dir)?;
    let default_variant = choose_variant(&ledger, args.variant.as_ref())?;
    let serve_config = ServeConfig {
        corpus,
        ledger,
        default_variant,
        annotations_dir: args.annotations.clone().unwrap_or_else(|| dir.join("annotations")),
        assets_dir: args.assets.clone(),
        tokenizer: config.tokenizer,
    };
    println!("serving on http://{}", args.bind);
    serve(serve_config, args.bind).await.map_err(domain)
}

pub async fn execute(cli: Cli) -> Outcome {
    match &cli.command {
        Command::Corpus(CorpusCommand::Stats(a)) => corpus_stats_cmd(a),
        Command::Prompt(PromptCommand::Matrix(a)) => prompt_matrix_cmd(a),
        Command::Prompt(PromptCommand::Render(a)) => prompt_render_cmd(a),
        Command::Run(a) => run_cmd(a).await,
        Command::Aggregate(a) => aggregate_cmd(a),
        Command::Score(a) => score_cmd(a),
        Command::Tally(a) => tally_cmd(a),
        Command::Report(a) => report_cmd(a),
        Command::Serve(a) => serve_cmd(a).await,
    }
}

/// Parses the process arguments, runs the command and maps the result to
/// an exit code.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .init();
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match runtime.block_on(execute(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
