//! `bimg`: fit codec models, encode traces to behavior images, decode and
//! fingerprint them.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use bimg_core::CodecMode;
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "bimg", version, about = "Behavior images from API-call traces")]
struct Cli {
    /// Worker threads for batch commands; 0 picks one per core.
    #[arg(long, global = true, env = "BIMG_JOBS", default_value_t = 0)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a codec model on a trace corpus and write its manifest.
    Fit(FitArgs),
    /// Encode traces to PNG behavior images.
    Encode(EncodeArgs),
    /// Decode a behavior image back to ordered ngram lists.
    Decode(DecodeArgs),
    /// Print the 192-bit perceptual hash of images.
    Hash(HashArgs),
    /// Print the Hamming distance between two images' hashes.
    Compare(CompareArgs),
    /// Group images whose hashes lie within a cutoff of each other.
    Cluster(ClusterArgs),
    /// Generate a labeled synthetic trace corpus with ground truth.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Directory of trace logs, one file per trace.
    #[arg(long)]
    corpus: PathBuf,
    /// Labels file: `source_id<TAB>0|1|?` per line.
    #[arg(long)]
    labels: PathBuf,
    /// Manifest to write.
    #[arg(long, env = "BIMG_MANIFEST")]
    manifest: PathBuf,
    /// Image side in pixels.
    #[arg(long, env = "BIMG_SIZE", default_value_t = 64, value_parser = parse_size)]
    size: usize,
    #[arg(long, env = "BIMG_MODE", default_value = "strict", value_parser = parse_mode)]
    mode: CodecMode,
    /// Presence threshold relative to the strongest decoded amplitude.
    #[arg(long, env = "BIMG_EPSILON", default_value_t = bimg_core::codec::DEFAULT_EPSILON)]
    epsilon: f64,
    /// Share of the smaller labeled class drawn per class into the holdout.
    #[arg(long, env = "BIMG_HOLDOUT", default_value_t = bimg_core::model::DEFAULT_HOLDOUT_FRACTION)]
    holdout: f64,
    #[arg(long, env = "BIMG_SEED", default_value_t = 0)]
    seed: u64,
    /// Also write the full significance ranking as TSV.
    #[arg(long)]
    ranking: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EncodeArgs {
    #[arg(long, env = "BIMG_MANIFEST")]
    manifest: PathBuf,
    /// Output directory for `<source_id>.png` files.
    #[arg(long)]
    out: PathBuf,
    /// Trace files or directories of trace files.
    #[arg(required = true)]
    traces: Vec<PathBuf>,
}

#[derive(Debug, Args)]
struct DecodeArgs {
    #[arg(long, env = "BIMG_MANIFEST")]
    manifest: PathBuf,
    /// Overrides the manifest's presence threshold.
    #[arg(long, env = "BIMG_EPSILON")]
    epsilon: Option<f64>,
    image: PathBuf,
}

#[derive(Debug, Args)]
struct HashArgs {
    /// Images or directories of images.
    #[arg(required = true)]
    images: Vec<PathBuf>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    a: PathBuf,
    b: PathBuf,
}

#[derive(Debug, Args)]
struct ClusterArgs {
    /// Directory of PNG images.
    dir: PathBuf,
    #[arg(long, env = "BIMG_CUTOFF", default_value_t = bimg_core::phash::DEFAULT_CUTOFF,
          value_parser = clap::value_parser!(u32).range(0..=192))]
    cutoff: u32,
    /// Manifest whose holdout ids are left out of the clustering.
    #[arg(long, env = "BIMG_MANIFEST")]
    manifest: Option<PathBuf>,
    /// Write the pairwise distance matrix as TSV.
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Write the pairwise distance histogram as TSV.
    #[arg(long)]
    histogram: Option<PathBuf>,
    /// `source_id<TAB>category` file splitting the histogram into
    /// same-category and different-category pairs.
    #[arg(long)]
    categories: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output directory; receives `traces/`, `labels.tsv`, `categories.tsv`,
    /// `truth.json` and `spec.json`.
    #[arg(long)]
    out: PathBuf,
    /// JSON generator spec; overrides `--preset`.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value = "two-class", value_parser = ["two-class", "planted", "two-family"])]
    preset: String,
    /// Documents per labeled class for presets.
    #[arg(long, default_value_t = 100)]
    docs: usize,
    #[arg(long, env = "BIMG_SEED", default_value_t = 1)]
    seed: u64,
}

fn parse_size(s: &str) -> Result<usize, String> {
    const ALLOWED: [usize; 6] = [4, 8, 16, 32, 64, 128];
    let n: usize = s.parse().map_err(|e| format!("{e}"))?;
    if ALLOWED.contains(&n) {
        Ok(n)
    } else {
        Err(format!("size must be one of {ALLOWED:?}"))
    }
}

fn parse_mode(s: &str) -> Result<CodecMode, String> {
    s.parse()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
    {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::FAILURE;
        }
    };
    let result = pool.install(|| match cli.command {
        Command::Fit(a) => commands::fit(a),
        Command::Encode(a) => commands::encode(a),
        Command::Decode(a) => commands::decode(a),
        Command::Hash(a) => commands::hash(a),
        Command::Compare(a) => commands::compare(a),
        Command::Cluster(a) => commands::cluster(a),
        Command::Synth(a) => commands::synth(a),
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
