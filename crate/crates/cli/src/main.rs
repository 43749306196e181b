mod commands;
mod manifest;
mod plot;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::settings::ConfigFile;

/// Train and analyse PMI-regression word embeddings.
#[derive(Debug, Parser)]
#[command(name = "pmivec", version)]
struct Cli {
    /// Worker threads for counting and sharded training.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// JSON file with one object per subcommand; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// More logging (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Count words in a corpus and write the vocabulary.
    Vocab(VocabArgs),
    /// Count co-occurrences and write the PMI matrix and raw counts.
    Cooccur(CooccurArgs),
    /// Fit W and C to a PMI matrix.
    Train(TrainArgs),
    /// Score embeddings on a similarity or analogy dataset.
    Eval(EvalArgs),
    /// Internal angles, conjugate identity and residual diagnostics.
    Geometry(GeometryArgs),
    /// Project targets onto a context vector and bucket by probability.
    Contours(ContoursArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct VocabArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    min_count: Option<u64>,
    /// Read at most this many tokens.
    #[arg(long)]
    max_tokens: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct CooccurArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long)]
    max_tokens: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    /// Down-sampling threshold t; 0 keeps every token.
    #[arg(long)]
    subsample: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// PMI matrix output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Raw count output; defaults to the PMI path with a `.stats` extension.
    #[arg(long)]
    stats_out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct TrainArgs {
    #[arg(long)]
    pmi: Option<PathBuf>,
    /// Vocabulary that the PMI matrix was built from (supplies the words).
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Raw counts; needed only with --count-weighted.
    #[arg(long)]
    stats: Option<PathBuf>,
    /// d, l, p or shifted.
    #[arg(long)]
    variant: Option<String>,
    #[arg(long, visible_alias = "d")]
    dim: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, visible_alias = "lr")]
    learning_rate: Option<f64>,
    /// adagrad or sgd.
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    alpha1: Option<f64>,
    #[arg(long)]
    alpha2: Option<f64>,
    /// Negative pairs per positive entry.
    #[arg(long, visible_alias = "k")]
    negatives: Option<usize>,
    /// `min` (smallest stored PMI) or a number.
    #[arg(long)]
    neg_target: Option<String>,
    /// Shift for the shifted variant; defaults to ln k.
    #[arg(long)]
    shift: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// deterministic or sharded.
    #[arg(long)]
    mode: Option<String>,
    /// Weight positive entries by their co-occurrence count.
    #[arg(long, default_missing_value = "true", num_args = 0..=1)]
    count_weighted: Option<bool>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    /// Directory written by `train`.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// W or A.
    #[arg(long)]
    vectors: Option<String>,
    /// similarity or analogy.
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// ALL, SIM or REL (similarity only).
    #[arg(long)]
    subset: Option<String>,
    /// tsv or ws353-csv (similarity only).
    #[arg(long)]
    format: Option<String>,
    /// norm or cosadd (analogy only).
    #[arg(long)]
    rule: Option<String>,
    /// JSON report path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct GeometryArgs {
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    pmi: Option<PathBuf>,
    /// Raw counts; enables the pair residual checks.
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Number of observed pairs sampled for pair residuals.
    #[arg(long)]
    sample: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
#[command(allow_negative_numbers = true)]
pub struct ContoursArgs {
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Context word the targets are projected onto.
    #[arg(long)]
    context: Option<String>,
    /// context_given_target (c|w) or target_given_context (w|c).
    #[arg(long)]
    kind: Option<String>,
    /// Comma-separated log-probability bucket centers.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    centers: Option<Vec<f64>>,
    #[arg(long)]
    half_width: Option<f64>,
    /// CSV output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional SVG scatter plot.
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn usage(msg: impl Into<String>) -> Self {
        Failure::Usage(msg.into())
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<pmivec::Error> for Failure {
    fn from(e: pmivec::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let config = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let threads = match cli.threads {
        Some(t) => t,
        None => config.threads()?.unwrap_or(1),
    };
    if threads == 0 {
        return Err(Failure::usage("--threads must be at least 1"));
    }
    match &cli.command {
        Command::Vocab(a) => commands::vocab(settings::resolve("vocab", &config, a)?, threads),
        Command::Cooccur(a) => commands::cooccur(settings::resolve("cooccur", &config, a)?, threads),
        Command::Train(a) => commands::train(settings::resolve("train", &config, a)?, threads),
        Command::Eval(a) => commands::eval(settings::resolve("eval", &config, a)?, threads),
        Command::Geometry(a) => commands::geometry(settings::resolve("geometry", &config, a)?, threads),
        Command::Contours(a) => commands::contours(settings::resolve("contours", &config, a)?, threads),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
