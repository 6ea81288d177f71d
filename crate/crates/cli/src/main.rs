//! `storystream`: replay article streams through the story-discovery engine,
//! evaluate the output, generate planted-story corpora and benchmark scaling.

mod bench;
mod eval;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use storystream::cluster::JsdMode;
use storystream::embed::EmbeddingStrategy;
use storystream::metrics::{AmiNormalization, UnassignedPolicy};
use storystream::synthetic::SyntheticSpec;
use storystream::{EncoderKind, RunConfig};

#[derive(Parser)]
#[command(name = "storystream", version, about = "Online story discovery over timestamped article streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replay a JSONL article stream and write per-slide story reports.
    Run(RunArgs),
    /// Score a run's stories.jsonl against gold labels, window by window.
    Eval(EvalArgs),
    /// Write a planted-story JSONL corpus.
    GenSynthetic(GenArgs),
    /// Measure per-slide wall time at several in-window article counts.
    Bench(BenchArgs),
}

#[derive(Args, Clone, Debug, Default)]
pub struct Overrides {
    /// TOML configuration file; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    window_slides: Option<u32>,
    /// Slide length in seconds.
    #[arg(long)]
    slide_seconds: Option<u64>,
    /// Minimum number of articles to start a story (M).
    #[arg(long)]
    min_story_size: Option<usize>,
    /// Thematic keywords per theme (N).
    #[arg(long)]
    keywords_n: Option<usize>,
    /// Softmax temperature (T).
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long, value_enum)]
    encoder: Option<EncoderArg>,
    /// Base URL of the embedding bridge.
    #[arg(long)]
    endpoint: Option<String>,
    /// Embedding dimension (sets both the encoder and the window value).
    #[arg(long)]
    encoder_dim: Option<usize>,
    /// Seed for seed-story discovery.
    #[arg(long, env = "STORYSTREAM_SEED")]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    strategy: Option<StrategyArg>,
    #[arg(long, value_enum)]
    jsd_mode: Option<JsdArg>,
    /// Stopword file, one term per line.
    #[arg(long)]
    stopwords: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EncoderArg {
    Hashed,
    Bridge,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StrategyArg {
    ThemSentMean,
    IndSentMean,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum JsdArg {
    Similarity,
    Divergence,
}

impl Overrides {
    /// The configuration file (or defaults) with flag and environment
    /// overrides applied, validated.
    pub fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let w = &mut c.window;
        if let Some(v) = self.window_slides {
            w.window_slides = v;
        }
        if let Some(v) = self.slide_seconds {
            w.slide_seconds = v;
        }
        if let Some(v) = self.min_story_size {
            w.min_story_size = v;
        }
        if let Some(v) = self.keywords_n {
            w.keywords_n = v;
        }
        if let Some(v) = self.temperature {
            w.temperature = v;
        }
        if let Some(v) = self.seed {
            w.rng_seed = v;
        }
        if let Some(v) = self.encoder_dim {
            w.encoder_dim = v;
            c.encoder.dim = v;
        }
        if let Some(v) = self.encoder {
            c.encoder.kind = match v {
                EncoderArg::Hashed => EncoderKind::Hashed,
                EncoderArg::Bridge => EncoderKind::Bridge,
            };
        }
        if let Some(v) = &self.endpoint {
            c.encoder.endpoint = Some(v.clone());
        }
        if let Some(v) = self.strategy {
            c.sim.strategy = match v {
                StrategyArg::ThemSentMean => EmbeddingStrategy::ThemSentMean,
                StrategyArg::IndSentMean => EmbeddingStrategy::IndSentMean,
            };
        }
        if let Some(v) = self.jsd_mode {
            c.sim.jsd_mode = match v {
                JsdArg::Similarity => JsdMode::Similarity,
                JsdArg::Divergence => JsdMode::Divergence,
            };
        }
        if let Some(v) = &self.stopwords {
            c.tokenize.stopwords_path = Some(v.clone());
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args)]
pub struct RunArgs {
    /// JSONL article stream.
    #[arg(long, short)]
    input: PathBuf,
    /// Directory for stories.jsonl, expired.jsonl, run_meta.json and slide_timings.csv.
    #[arg(long, short)]
    out_dir: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
    /// Overwrite assigned articles' buffers instead of freeing them (testing aid).
    #[arg(long, hide = true)]
    poison_assigned: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PolicyArg {
    Singletons,
    ExcludeUnassigned,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AmiNormArg {
    Arithmetic,
    Max,
}

#[derive(Args)]
pub struct EvalArgs {
    /// stories.jsonl written by `run`.
    #[arg(long)]
    stories: PathBuf,
    /// The labelled JSONL input the run consumed.
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "singletons")]
    policy: PolicyArg,
    #[arg(long, value_enum, default_value = "arithmetic")]
    ami_norm: AmiNormArg,
    /// Window length in slides; defaults to the value in run_meta.json next to
    /// the stories file, else 7.
    #[arg(long)]
    window_slides: Option<u32>,
    /// Output CSV (default: eval.csv next to the stories file).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl EvalArgs {
    fn policy(&self) -> UnassignedPolicy {
        match self.policy {
            PolicyArg::Singletons => UnassignedPolicy::Singletons,
            PolicyArg::ExcludeUnassigned => UnassignedPolicy::ExcludeUnassigned,
        }
    }

    fn normalization(&self) -> AmiNormalization {
        match self.ami_norm {
            AmiNormArg::Arithmetic => AmiNormalization::Arithmetic,
            AmiNormArg::Max => AmiNormalization::Max,
        }
    }
}

#[derive(Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 4)]
    stories: usize,
    #[arg(long, default_value_t = 6)]
    articles_per_story_per_pane: usize,
    #[arg(long, default_value_t = 10)]
    panes: usize,
    /// Private vocabulary size per story.
    #[arg(long, default_value_t = 60)]
    vocab_size: usize,
    /// Shared-pool sentences per article, as a fraction of story sentences.
    #[arg(long, default_value_t = 0.3)]
    noise_ratio: f64,
    #[arg(long, default_value_t = 4)]
    sentences_per_article: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Output file (default: stdout).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

impl GenArgs {
    fn spec(&self) -> SyntheticSpec {
        SyntheticSpec {
            stories: self.stories,
            articles_per_story_per_pane: self.articles_per_story_per_pane,
            panes: self.panes,
            vocab_size: self.vocab_size,
            noise_ratio: self.noise_ratio,
            sentences_per_article: self.sentences_per_article,
            seed: self.seed,
            ..SyntheticSpec::default()
        }
    }
}

#[derive(Args)]
pub struct BenchArgs {
    /// In-window article counts to measure.
    #[arg(long, value_delimiter = ',', default_value = "1000,2000,4000")]
    sizes: Vec<usize>,
    /// Number of concurrent stories (fixed across sizes).
    #[arg(long, default_value_t = 8)]
    stories: usize,
    #[arg(long, default_value_t = 7)]
    window_slides: u32,
    /// Timed slides after the window has filled.
    #[arg(long, default_value_t = 5)]
    measure_slides: usize,
    #[arg(long, default_value_t = 256)]
    encoder_dim: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Print results as JSON instead of a table.
    #[arg(long)]
    json: bool,
}

fn gen_synthetic(args: &GenArgs) -> anyhow::Result<()> {
    use std::io::Write;
    let records = storystream::synthetic::generate(&args.spec())?;
    match &args.out {
        Some(path) => {
            let file = std::fs::File::create(path)?;
            storystream::ingest::write_records(std::io::BufWriter::new(file), &records)?;
            eprintln!("wrote {} articles to {}", records.len(), path.display());
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            storystream::ingest::write_records(&mut lock, &records)?;
            lock.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => run::run(args),
        Command::Eval(args) => eval::eval(args),
        Command::GenSynthetic(args) => gen_synthetic(args),
        Command::Bench(args) => bench::bench(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
