use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

/// Geo-multimedia cross-modal kNN search.
///
/// Relative paths are resolved against the data directory.
#[derive(Debug, Parser)]
#[command(name = "gmrsearch", version)]
struct Cli {
    /// Directory holding datasets, models and indexes.
    #[arg(long, global = true, env = "GMRSEARCH_DATA_DIR", default_value = ".")]
    data_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic training split, index split and query texts.
    Synth(SynthArgs),
    /// Validate a dataset file and optionally rewrite it in canonical form.
    Ingest(IngestArgs),
    /// Fit the semantic-space model on paired text and image training files.
    Train(TrainArgs),
    /// Attach semantic vectors to every object of a dataset.
    Embed(EmbedArgs),
    /// Build and save an index.
    Build(BuildArgs),
    /// Run one text-to-image query.
    Query(QueryArgs),
    /// Benchmark search methods against the exact oracle.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Layout {
    Uniform,
    Clustered,
}

#[derive(Debug, Args)]
struct WorldArgs {
    /// Number of semantic classes.
    #[arg(long, default_value_t = 10)]
    classes: usize,
    #[arg(long, default_value_t = 32)]
    text_dim: usize,
    #[arg(long, default_value_t = 48)]
    image_dim: usize,
    /// Distance between the first class means in latent space.
    #[arg(long, default_value_t = 4.0)]
    separation: f64,
    /// Standard deviation of the per-feature noise.
    #[arg(long, default_value_t = 0.5)]
    noise: f64,
    /// Side length of the square the locations are drawn from.
    #[arg(long, default_value_t = 1000.0)]
    extent: f64,
    #[arg(long, value_enum, default_value_t = Layout::Uniform)]
    layout: Layout,
    /// Cluster count for the clustered layout.
    #[arg(long, default_value_t = 20)]
    clusters: usize,
    /// Standard deviation of each cluster for the clustered layout.
    #[arg(long, default_value_t = 20.0)]
    spread: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[command(flatten)]
    world: WorldArgs,
    #[arg(long, default_value_t = 2000)]
    train_size: usize,
    #[arg(long, default_value_t = 10_000)]
    index_size: usize,
    #[arg(long, default_value_t = 100)]
    query_count: usize,
}

#[derive(Debug, Args)]
struct IngestArgs {
    input: PathBuf,
    /// Write the validated dataset here in canonical form.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long, default_value = "train_text.tsv")]
    text: PathBuf,
    #[arg(long, default_value = "train_image.tsv")]
    image: PathBuf,
    #[arg(long, short, default_value = "model.gmrspace")]
    output: PathBuf,
    /// Number of correlation directions kept [default: min(16, d_T, d_I)].
    #[arg(long)]
    gamma: Option<usize>,
    /// Covariance ridge as a fraction of the mean variance.
    #[arg(long, default_value_t = 1e-6)]
    ridge: f64,
    #[arg(long, default_value_t = 1e-4)]
    l2: f64,
    #[arg(long, default_value_t = 5000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// File with one concept name per line, in class order.
    #[arg(long)]
    concepts: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EmbedArgs {
    #[arg(long, default_value = "model.gmrspace")]
    model: PathBuf,
    #[arg(long, default_value = "index.tsv")]
    input: PathBuf,
    #[arg(long, short, default_value = "index.embedded.tsv")]
    output: PathBuf,
    /// Embed objects on all cores.
    #[arg(long)]
    parallel: bool,
}

#[derive(Debug, Args)]
struct BuildArgs {
    /// Dataset to index; objects without semantic vectors need --model.
    #[arg(long, default_value = "index.embedded.tsv")]
    input: PathBuf,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long, short, default_value = "index.gmr")]
    output: PathBuf,
    #[arg(long, default_value_t = 32)]
    max_fanout: usize,
    /// Minimum node fill [default: max-fanout / 2].
    #[arg(long)]
    min_fanout: Option<usize>,
    /// Signature length in bits.
    #[arg(long, default_value_t = 64)]
    bits: usize,
    /// Posterior probability that sets a signature bit [default: 2 / classes].
    #[arg(long)]
    threshold: Option<f64>,
    /// Insert objects one by one instead of bulk loading.
    #[arg(long)]
    insert: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum QueryMethod {
    Kgmcms,
    Exact,
    Postfilter,
    Linear,
}

#[derive(Debug, Args)]
struct QueryArgs {
    #[arg(long, default_value = "model.gmrspace")]
    model: PathBuf,
    #[arg(long, default_value = "index.gmr")]
    index: PathBuf,
    #[arg(long, allow_negative_numbers = true)]
    x: f64,
    #[arg(long, allow_negative_numbers = true)]
    y: f64,
    /// Text feature as comma-separated floats.
    #[arg(long, group = "source", allow_hyphen_values = true)]
    feature: Option<String>,
    /// Free text, featurized over --vocab.
    #[arg(long, group = "source", requires = "vocab")]
    text: Option<String>,
    /// Vocabulary file, one word per line, one word per text dimension.
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Take the feature of the object with this id from --queries.
    #[arg(long, group = "source")]
    query_id: Option<u64>,
    #[arg(long, default_value = "queries.tsv")]
    queries: PathBuf,
    #[arg(long, short, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 0.5)]
    mu: f64,
    #[arg(long, value_enum, default_value_t = QueryMethod::Kgmcms)]
    method: QueryMethod,
    /// Print JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Generate, train and index synthetic data instead of reading files.
    #[arg(long)]
    synthetic: bool,
    /// Index sizes for --synthetic.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "40000,80000,120000,160000,200000"
    )]
    sizes: Vec<usize>,
    /// Training pairs for --synthetic.
    #[arg(long, default_value_t = 2000)]
    train_size: usize,
    #[command(flatten)]
    world: WorldArgs,

    #[arg(long, default_value = "model.gmrspace")]
    model: PathBuf,
    #[arg(long, default_value = "index.gmr")]
    index: PathBuf,
    /// Query texts; locations are drawn from indexed objects.
    #[arg(long, default_value = "queries.tsv")]
    queries: PathBuf,

    /// Result counts to sweep.
    #[arg(long, short, value_delimiter = ',', default_value = "10")]
    k: Vec<usize>,
    #[arg(long, default_value_t = 0.5)]
    mu: f64,
    #[arg(long, default_value_t = 100)]
    query_count: usize,
    /// Seed for query locations.
    #[arg(long, default_value_t = 0)]
    workload_seed: u64,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "gmrtree-kgmcms,gmrtree-exact,rtree-postfilter,linear-scan"
    )]
    methods: Vec<String>,
    /// Run queries concurrently.
    #[arg(long)]
    parallel: bool,
    #[arg(long)]
    no_warm_up: bool,
    /// Write the reports as JSON to this file ("-" for stdout).
    #[arg(long)]
    json: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
