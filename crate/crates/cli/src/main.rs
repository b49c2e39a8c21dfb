//! `catgen`: build vocabularies, train, tag, rerank, evaluate and trace.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "catgen", version, about = "CCG supertagging by category generation")]
struct Cli {
    /// TOML file with default settings; flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the category inventory and an atomic-tag vocabulary.
    BuildVocab(BuildVocabArgs),
    /// Train a generator, classifier or transition model.
    Train(TrainArgs),
    /// Tag a corpus with a trained model.
    Tag(TagArgs),
    /// Combine generator k-best dumps with classifier scores.
    Rerank(RerankArgs),
    /// Score predictions against gold categories.
    Eval(EvalArgs),
    /// Print the oracle transition trace of a category.
    Trace(TraceArgs),
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    #[arg(long, value_name = "FILE")]
    pub corpus: PathBuf,
    /// pipe or tsv [default: pipe]
    #[arg(long)]
    pub format: Option<String>,
}

#[derive(Debug, Args)]
pub struct BuildVocabArgs {
    #[command(flatten)]
    pub input: CorpusArgs,
    /// ac, pa, ng or or [default: ac]
    #[arg(long)]
    pub oracle: Option<String>,
    /// N-gram order for ng [default: 2]
    #[arg(long)]
    pub n: Option<usize>,
    /// Top-k cutoff for pa and ng [default: 10]
    #[arg(long)]
    pub k: Option<usize>,
    /// Train generators on randomly sampled segmentations.
    #[arg(long)]
    pub nondet: bool,
    /// Minimum frequency of a kept category [default: 10]
    #[arg(long)]
    pub threshold: Option<u64>,
    /// Output directory for inventory.txt and vocab.txt.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub input: CorpusArgs,
    /// generator, classifier or transition [default: generator]
    #[arg(long)]
    pub component: Option<String>,
    /// Inventory file; built from the corpus with --threshold when absent.
    #[arg(long, value_name = "FILE")]
    pub inventory: Option<PathBuf>,
    #[arg(long)]
    pub threshold: Option<u64>,
    /// Vocabulary file (generator only).
    #[arg(long, value_name = "FILE")]
    pub vocab: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TagArgs {
    /// Corpus to tag; its categories are ignored.
    #[command(flatten)]
    pub input: CorpusArgs,
    /// classifier, tagwise or transition [default: tagwise]
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub inventory: PathBuf,
    /// Vocabulary file (tagwise only).
    #[arg(long, value_name = "FILE")]
    pub vocab: Option<PathBuf>,
    /// [default: 4]
    #[arg(long)]
    pub beam: Option<usize>,
    /// [default: beam]
    #[arg(long)]
    pub kbest: Option<usize>,
    /// Step cap per word [default: 32 tagwise, 64 transition]
    #[arg(long)]
    pub max_steps: Option<usize>,
    /// Predictions file; standard output when absent.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// K-best dump file (generator modes).
    #[arg(long, value_name = "FILE")]
    pub dump: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RerankArgs {
    /// The corpus the dumps were produced from.
    #[command(flatten)]
    pub input: CorpusArgs,
    #[arg(long, value_name = "FILE")]
    pub inventory: PathBuf,
    /// Classifier model.
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    /// K-best dump; repeat to pool several generators.
    #[arg(long, value_name = "FILE", required = true)]
    pub dump: Vec<PathBuf>,
    /// [default: 0.9]
    #[arg(long)]
    pub lambda: Option<f64>,
    /// [default: 0.15]
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Per-word report file.
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Gold corpus.
    #[command(flatten)]
    pub input: CorpusArgs,
    #[arg(long, value_name = "FILE")]
    pub pred: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub inventory: PathBuf,
    /// K-best dump for the unseen-category table.
    #[arg(long, value_name = "FILE")]
    pub dump: Option<PathBuf>,
    /// text or tsv [default: text]
    #[arg(long)]
    pub report_format: Option<String>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[arg(long)]
    pub category: String,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = config::FileConfig::load(cli.config.as_deref()).and_then(|file| match cli.command {
        Command::BuildVocab(a) => commands::build_vocab(a, &file),
        Command::Train(a) => commands::train(a, &file),
        Command::Tag(a) => commands::tag(a, &file),
        Command::Rerank(a) => commands::rerank(a, &file),
        Command::Eval(a) => commands::eval(a, &file),
        Command::Trace(a) => commands::trace(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
