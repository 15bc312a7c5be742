//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "crossner",
    version,
    about = "Word clusters, multilingual cluster merging, and a cluster-featured CRF NE tagger"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Induce K word clusters from a plain one-sentence-per-line corpus
    Cluster(ClusterArgs),
    /// Merge secondary-language cluster files into a target clustering
    Merge(MergeArgs),
    /// Train a CRF tagger on a CoNLL file
    Train(TrainArgs),
    /// Tag a CoNLL file with a trained model
    Tag(TagArgs),
    /// Score predictions against gold, optionally comparing two systems
    Eval(EvalArgs),
    /// List test-set OOV words covered by the given clusterings
    OovReport(OovArgs),
    /// Run a declarative experiment file: baseline plus one model per
    /// clustering, with grid/delta/OOV reports
    Experiment(ExperimentArgs),
}

/// Column layout and tag scheme of CoNLL inputs. Defaults follow the
/// CoNLL-2003 layout: `word pos chunk ne`, space-separated, BIO2.
#[derive(Debug, Clone, Args)]
pub struct ColumnArgs {
    #[arg(long, default_value_t = 0)]
    pub word_col: usize,
    #[arg(long, default_value_t = 3)]
    pub ne_col: usize,
    #[arg(long)]
    pub pos_col: Option<usize>,
    #[arg(long)]
    pub lemma_col: Option<usize>,
    #[arg(long)]
    pub chunk_col: Option<usize>,
    /// `space` or `tab`
    #[arg(long, default_value = "space")]
    pub separator: String,
    /// Tag scheme of the file: `bio2` or `iob1`
    #[arg(long, default_value = "bio2")]
    pub scheme: String,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    /// Plain UTF-8 corpus, one sentence per line
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 400)]
    pub k: u32,
    #[arg(long, default_value_t = 5)]
    pub min_count: u32,
    #[arg(long, default_value_t = 20)]
    pub max_passes: u32,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Cluster file to write
    #[arg(long)]
    pub output: PathBuf,
    /// Add final-3-character suffixes as pinned pseudo-contexts
    #[arg(long)]
    pub suffix_context: bool,
    /// Also dump the thresholded vocabulary as `word<TAB>count`
    #[arg(long)]
    pub dump_vocab: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MergeArgs {
    /// Target-language cluster file; its words stay intact
    #[arg(long)]
    pub target: PathBuf,
    /// Secondary cluster files, processed in order (repeatable)
    #[arg(long = "source", required = true)]
    pub sources: Vec<PathBuf>,
    #[arg(long)]
    pub output: PathBuf,
    /// Import report: word, source language, source/target cluster, overlap
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Labeled CoNLL training data
    #[arg(long)]
    pub train: PathBuf,
    /// Clusterings as `id=path` (repeatable); ids become feature namespaces
    #[arg(long = "clusters")]
    pub clusters: Vec<String>,
    /// Feature/optimizer overrides as `key=value` (repeatable)
    #[arg(long = "config")]
    pub config: Vec<String>,
    /// Model file to write
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub columns: ColumnArgs,
}

#[derive(Debug, Args)]
pub struct TagArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    /// Output CoNLL file; predictions appended as the final column
    #[arg(long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub columns: ColumnArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub gold: PathBuf,
    /// Predictions of system A: CoNLL rows whose final column is the label
    #[arg(long)]
    pub pred: PathBuf,
    /// Predictions of system B, enabling dF1 and the McNemar test
    #[arg(long)]
    pub pred_b: Option<PathBuf>,
    /// McNemar unit: `token` or `entity`
    #[arg(long, default_value = "token")]
    pub mcnemar: String,
    /// Report TSV to write
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub columns: ColumnArgs,
}

#[derive(Debug, Args)]
pub struct OovArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// Clusterings as `id=path` (repeatable)
    #[arg(long = "clusters")]
    pub clusters: Vec<String>,
    #[arg(long, default_value_t = 20)]
    pub top: usize,
    #[command(flatten)]
    pub columns: ColumnArgs,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Flat key=value run file
    #[arg(long)]
    pub spec: PathBuf,
    /// Output directory (overrides the run file's `output_dir`)
    #[arg(long)]
    pub output: Option<PathBuf>,
}
